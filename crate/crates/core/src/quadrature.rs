//! Exact integration over cut-cell polygons.
//!
//! A polynomial integrand `f` is rewritten as `div (F, 0)` with `F` the
//! antiderivative of `f` in `x`; the divergence theorem turns the area
//! integral into `Σ_r ∫_{l_r} F dy`, and every edge integral is evaluated with
//! a Gauss–Legendre rule in the affine edge parameter. With the 3-point rule
//! this is exact whenever `F` restricted to an edge has degree ≤ 5.

use crate::error::{Error, Result};
use crate::geometry::{CutCellPolygon, Point};
use crate::tensor::SymTensor;

/// Gauss–Legendre rule on the parameter interval `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest univariate degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    pub fn three_point() -> Self {
        gauss_legendre_nodes(3).expect("supported rule")
    }

    pub fn five_point() -> Self {
        gauss_legendre_nodes(5).expect("supported rule")
    }
}

/// Gauss–Legendre rule with `q ∈ {3, 5}` points, mapped to `[0, 1]`.
pub fn gauss_legendre_nodes(q: usize) -> Result<EdgeRule> {
    let (xs, ws): (Vec<f64>, Vec<f64>) = match q {
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        5 => {
            let s = 2.0 * (10.0f64 / 7.0).sqrt();
            let inner = (5.0 - s).sqrt() / 3.0;
            let outer = (5.0 + s).sqrt() / 3.0;
            let w_inner = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
            let w_outer = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
            (
                vec![-outer, -inner, 0.0, inner, outer],
                vec![w_outer, w_inner, 128.0 / 225.0, w_inner, w_outer],
            )
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unsupported Gauss-Legendre rule with {q} points (use 3 or 5)"
            )))
        }
    };
    Ok(EdgeRule {
        nodes: xs.iter().map(|x| 0.5 * (1.0 + x)).collect(),
        weights: ws.iter().map(|w| 0.5 * w).collect(),
    })
}

/// Bivariate polynomial `Σ c[a][b] xᵃ yᵇ` with `a ≤ deg_x`, `b ≤ deg_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiPolynomial {
    deg_x: usize,
    deg_y: usize,
    coeffs: Vec<f64>,
}

impl BiPolynomial {
    pub fn zero(deg_x: usize, deg_y: usize) -> Self {
        BiPolynomial {
            deg_x,
            deg_y,
            coeffs: vec![0.0; (deg_x + 1) * (deg_y + 1)],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(0, 0, c)
    }

    /// `c xᵃ yᵇ`
    pub fn monomial(a: usize, b: usize, c: f64) -> Self {
        let mut p = Self::zero(a, b);
        p.set(a, b, c);
        p
    }

    /// Tensor product of two univariate polynomials given by ascending coefficients.
    pub fn separable(px: &[f64], py: &[f64]) -> Self {
        let mut p = Self::zero(px.len() - 1, py.len() - 1);
        for (a, &cx) in px.iter().enumerate() {
            for (b, &cy) in py.iter().enumerate() {
                p.set(a, b, cx * cy);
            }
        }
        p
    }

    pub fn deg_x(&self) -> usize {
        self.deg_x
    }

    pub fn deg_y(&self) -> usize {
        self.deg_y
    }

    fn idx(&self, a: usize, b: usize) -> usize {
        a * (self.deg_y + 1) + b
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a > self.deg_x || b > self.deg_y {
            0.0
        } else {
            self.coeffs[self.idx(a, b)]
        }
    }

    pub fn set(&mut self, a: usize, b: usize, c: f64) {
        let i = self.idx(a, b);
        self.coeffs[i] = c;
    }

    /// Iterates over `(a, b, c)` for all stored coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.deg_x).flat_map(move |a| (0..=self.deg_y).map(move |b| (a, b, self.coeff(a, b))))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for a in (0..=self.deg_x).rev() {
            let mut row = 0.0;
            for b in (0..=self.deg_y).rev() {
                row = row * y + self.coeffs[self.idx(a, b)];
            }
            acc = acc * x + row;
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.deg_x.max(other.deg_x), self.deg_y.max(other.deg_y));
        for (a, b, c) in self.terms().chain(other.terms()) {
            let i = p.idx(a, b);
            p.coeffs[i] += c;
        }
        p
    }

    pub fn scale(&self, s: f64) -> Self {
        BiPolynomial {
            deg_x: self.deg_x,
            deg_y: self.deg_y,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.deg_x + other.deg_x, self.deg_y + other.deg_y);
        for (a, b, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            for (d, e, g) in other.terms() {
                let i = p.idx(a + d, b + e);
                p.coeffs[i] += c * g;
            }
        }
        p
    }

    /// Antiderivative in `x` with zero constant of integration.
    pub fn antiderivative_x(&self) -> Self {
        let mut p = Self::zero(self.deg_x + 1, self.deg_y);
        for (a, b, c) in self.terms() {
            p.set(a + 1, b, c / (a + 1) as f64);
        }
        p
    }

    pub fn derivative_x(&self) -> Self {
        if self.deg_x == 0 {
            return Self::zero(0, self.deg_y);
        }
        let mut p = Self::zero(self.deg_x - 1, self.deg_y);
        for (a, b, c) in self.terms().filter(|t| t.0 > 0) {
            p.set(a - 1, b, c * a as f64);
        }
        p
    }

    pub fn derivative_y(&self) -> Self {
        if self.deg_y == 0 {
            return Self::zero(self.deg_x, 0);
        }
        let mut p = Self::zero(self.deg_x, self.deg_y - 1);
        for (a, b, c) in self.terms().filter(|t| t.1 > 0) {
            p.set(a, b - 1, c * b as f64);
        }
        p
    }

    /// `Σ c[a][b] · moments[a][b]`, where `moments[a][b] = ∫ xᵃ yᵇ` over some region.
    pub fn integrate_with_moments(&self, moments: &Moments) -> f64 {
        self.terms().map(|(a, b, c)| if c == 0.0 { 0.0 } else { c * moments.get(a, b) }).sum()
    }
}

/// Applies the edge rule to `Σ_r ∫_{l_r} F dy` for a closed counterclockwise polygon.
pub fn integrate_antiderivative<F: Fn(f64, f64) -> f64>(
    vertices: &[Point],
    rule: &EdgeRule,
    antiderivative: F,
) -> f64 {
    let m = vertices.len();
    let mut total = 0.0;
    for r in 0..m {
        let p = vertices[r];
        let q = vertices[(r + 1) % m];
        let dy = q[1] - p[1];
        if dy == 0.0 {
            continue;
        }
        let dx = q[0] - p[0];
        let edge: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| w * antiderivative(p[0] + t * dx, p[1] + t * dy))
            .sum();
        total += edge * dy;
    }
    total
}

/// `∫_P f dx dy` over the polygon with the given counterclockwise vertices.
pub fn integrate_polygon(f: &BiPolynomial, vertices: &[Point], rule: &EdgeRule) -> f64 {
    let big_f = f.antiderivative_x();
    integrate_antiderivative(vertices, rule, |x, y| big_f.eval(x, y))
}

/// Table of monomial integrals `∫_P xᵃ yᵇ` for `a, b ≤ max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    max_degree: usize,
    values: Vec<f64>,
}

impl Moments {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        assert!(
            a <= self.max_degree && b <= self.max_degree,
            "moment ({a}, {b}) not tabulated (max degree {})",
            self.max_degree
        );
        self.values[a * (self.max_degree + 1) + b]
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }
}

/// Monomial moments of a polygon, evaluated edge by edge through the
/// divergence theorem. Exact when `2·max_degree + 1` does not exceed the
/// rule's exact degree.
pub fn polygon_moments(vertices: &[Point], max_degree: usize, rule: &EdgeRule) -> Moments {
    let d = max_degree + 1;
    let mut values = vec![0.0; d * d];
    let m = vertices.len();
    let mut xp = vec![0.0; d + 1];
    let mut yp = vec![0.0; d];
    for r in 0..m {
        let p = vertices[r];
        let q = vertices[(r + 1) % m];
        let dy = q[1] - p[1];
        if dy == 0.0 {
            continue;
        }
        let dx = q[0] - p[0];
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let (x, y) = (p[0] + t * dx, p[1] + t * dy);
            xp[0] = 1.0;
            yp[0] = 1.0;
            for k in 1..=d {
                xp[k] = xp[k - 1] * x;
            }
            for k in 1..d {
                yp[k] = yp[k - 1] * y;
            }
            let wdy = w * dy;
            for a in 0..d {
                // Antiderivative of xᵃ yᵇ in x is x^{a+1} yᵇ / (a + 1).
                let fx = xp[a + 1] / (a + 1) as f64 * wdy;
                for b in 0..d {
                    values[a * d + b] += fx * yp[b];
                }
            }
        }
    }
    Moments { max_degree, values }
}

/// Q1 basis function `k` of a cell in reference coordinates `(ξ, η) ∈ [0, 1]²`;
/// corners are numbered counterclockwise from the lower-left.
pub fn reference_basis(k: usize) -> BiPolynomial {
    let (px, py): (&[f64], &[f64]) = match k {
        0 => (&[1.0, -1.0], &[1.0, -1.0]),
        1 => (&[0.0, 1.0], &[1.0, -1.0]),
        2 => (&[0.0, 1.0], &[0.0, 1.0]),
        3 => (&[1.0, -1.0], &[0.0, 1.0]),
        _ => panic!("Q1 cells have four basis functions, got index {k}"),
    };
    BiPolynomial::separable(px, py)
}

/// `∫_P φ_i φ_j` for local basis ids `i, j ∈ 0..4` of the cell holding `P`.
pub fn local_mass_block(i: usize, j: usize, poly: &CutCellPolygon, rule: &EdgeRule) -> f64 {
    let f = reference_basis(i).mul(&reference_basis(j));
    poly.h * poly.h * integrate_polygon(&f, &poly.reference_vertices(), rule)
}

/// `∫_P ∇φ_i · M ∇φ_j` with `M` constant over the polygon.
pub fn local_stiffness_block(
    i: usize,
    j: usize,
    m: &SymTensor,
    poly: &CutCellPolygon,
    rule: &EdgeRule,
) -> f64 {
    let (bi, bj) = (reference_basis(i), reference_basis(j));
    let gi = [bi.derivative_x(), bi.derivative_y()];
    let gj = [bj.derivative_x(), bj.derivative_y()];
    let coef = [[m.xx, m.xy], [m.xy, m.yy]];
    let verts = poly.reference_vertices();
    let mut total = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            if coef[a][b] != 0.0 {
                total += coef[a][b] * integrate_polygon(&gi[a].mul(&gj[b]), &verts, rule);
            }
        }
    }
    // The 1/h² from the gradients cancels the h² area factor.
    total
}
