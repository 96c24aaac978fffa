//! Symmetric 2×2 tensors stored as `(xx, xy, yy)`.

use std::ops::{Add, Mul};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor {
    pub const ZERO: SymTensor = SymTensor { xx: 0.0, xy: 0.0, yy: 0.0 };
    pub const IDENTITY: SymTensor = SymTensor { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymTensor { xx, xy, yy }
    }

    pub fn isotropic(s: f64) -> Self {
        SymTensor { xx: s, xy: 0.0, yy: s }
    }

    /// Frobenius norm; the off-diagonal entry counts twice.
    pub fn frobenius(&self) -> f64 {
        (self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy).sqrt()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.xx + self.yy);
        let dev = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        mean - dev
    }

    /// `a · T b`
    pub fn quadratic(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        a[0] * (self.xx * b[0] + self.xy * b[1]) + a[1] * (self.xy * b[0] + self.yy * b[1])
    }

    /// Symmetric outer product `(a ⊗ b + b ⊗ a) / 2`.
    pub fn sym_outer(a: [f64; 2], b: [f64; 2]) -> Self {
        SymTensor {
            xx: a[0] * b[0],
            xy: 0.5 * (a[0] * b[1] + a[1] * b[0]),
            yy: a[1] * b[1],
        }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.xx, self.xy, self.yy]
    }
}

impl Add for SymTensor {
    type Output = SymTensor;
    fn add(self, o: SymTensor) -> SymTensor {
        SymTensor::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl Mul<SymTensor> for f64 {
    type Output = SymTensor;
    fn mul(self, t: SymTensor) -> SymTensor {
        SymTensor::new(self * t.xx, self * t.xy, self * t.yy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn frobenius_matches_full_matrix(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let t = SymTensor::new(a, b, c);
            let full = [[a, b], [b, c]];
            let f: f64 = full.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((t.frobenius() - f).abs() <= 1e-14 * (1.0 + f));
        }

        #[test]
        fn min_eigenvalue_is_a_root(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let t = SymTensor::new(a, b, c);
            let l = t.min_eigenvalue();
            let det = (a - l) * (c - l) - b * b;
            prop_assert!(det.abs() < 1e-9 * (1.0 + t.frobenius().powi(2)));
            prop_assert!(l <= a.min(c) + 1e-12);
        }
    }
}
