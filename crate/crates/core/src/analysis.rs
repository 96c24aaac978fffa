//! Post-processing of nodal snapshots: distances, convergence orders,
//! symmetry residuals and level-set diagnostics.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{NodeClass, Point};

/// Floor applied before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-16;

/// One active lattice node of a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotNode {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub class: NodeClass,
}

/// Nodal fields on the active nodes of one grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub domain: String,
    pub step: usize,
    pub time: f64,
    pub fingerprint: String,
    pub nodes: Vec<SnapshotNode>,
    pub labels: Vec<String>,
    /// One column per label, each with one value per node.
    pub columns: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "snapshot has {} labels but {} columns",
                self.labels.len(),
                self.columns.len()
            )));
        }
        if let Some(c) = self.columns.iter().find(|c| c.len() != self.nodes.len()) {
            return Err(Error::InvalidArgument(format!(
                "snapshot column has {} values for {} nodes",
                c.len(),
                self.nodes.len()
            )));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.labels.iter().position(|l| l == label).map(|k| self.columns[k].as_slice())
    }

    /// True when the conductivity is stored as three tensor components.
    pub fn is_tensor(&self) -> bool {
        self.column("C11").is_some()
    }

    /// Frobenius norm of the conductivity at every node (absolute value in
    /// scalar mode).
    pub fn conductivity_norm(&self) -> Result<Vec<f64>> {
        if let (Some(a), Some(b), Some(c)) = (self.column("C11"), self.column("C12"), self.column("C22")) {
            return Ok((0..self.len())
                .map(|k| (a[k] * a[k] + 2.0 * b[k] * b[k] + c[k] * c[k]).sqrt())
                .collect());
        }
        self.column("C")
            .map(|c| c.iter().map(|v| v.abs()).collect())
            .ok_or_else(|| Error::InvalidArgument("snapshot has no conductivity column".into()))
    }

    /// Map from lattice coordinates to row index.
    pub fn lattice_index(&self) -> HashMap<(usize, usize), usize> {
        self.nodes.iter().enumerate().map(|(k, nd)| ((nd.i, nd.j), k)).collect()
    }

    /// Keeps only nodes that also lie on the lattice with `coarse_n` cells
    /// per side, renumbered to that lattice.
    pub fn restrict_to_lattice(&self, coarse_n: usize) -> Result<Snapshot> {
        if coarse_n == 0 || self.n % coarse_n != 0 {
            return Err(Error::InvalidArgument(format!(
                "lattice N = {coarse_n} does not divide N = {}",
                self.n
            )));
        }
        let ratio = self.n / coarse_n;
        let keep: Vec<usize> = (0..self.len())
            .filter(|&k| self.nodes[k].i % ratio == 0 && self.nodes[k].j % ratio == 0)
            .collect();
        Ok(Snapshot {
            n: coarse_n,
            domain: self.domain.clone(),
            step: self.step,
            time: self.time,
            fingerprint: self.fingerprint.clone(),
            nodes: keep
                .iter()
                .map(|&k| SnapshotNode {
                    i: self.nodes[k].i / ratio,
                    j: self.nodes[k].j / ratio,
                    ..self.nodes[k]
                })
                .collect(),
            labels: self.labels.clone(),
            columns: self.columns.iter().map(|c| keep.iter().map(|&k| c[k]).collect()).collect(),
        })
    }
}

/// p-Wasserstein distance between the empirical distributions of `u` and `v`.
pub fn wasserstein_distance(u: &[f64], v: &[f64], p: f64) -> Result<f64> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::InvalidArgument("Wasserstein distance of an empty sample".into()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("Wasserstein order must be finite and >= 1, got {p}")));
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("Wasserstein distance of non-finite samples".into()));
    }
    let mut a = u.to_vec();
    let mut b = v.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let pow = |d: f64| if p == 1.0 { d } else { d.powf(p) };
    let total = if a.len() == b.len() {
        a.iter().zip(&b).map(|(x, y)| pow((x - y).abs())).sum::<f64>() / a.len() as f64
    } else {
        // Walk the merged breakpoints k/n and l/m of both quantile functions.
        let (n, m) = (a.len(), b.len());
        let (mut k, mut l) = (0, 0);
        let mut t = 0.0;
        let mut acc = 0.0;
        while k < n && l < m {
            let next_a = (k + 1) as f64 / n as f64;
            let next_b = (l + 1) as f64 / m as f64;
            let next = next_a.min(next_b);
            acc += (next - t) * pow((a[k] - b[l]).abs());
            t = next;
            // Integer comparison avoids rounding in the breakpoint ordering.
            match ((k + 1) * m).cmp(&((l + 1) * n)) {
                std::cmp::Ordering::Less => k += 1,
                std::cmp::Ordering::Greater => l += 1,
                std::cmp::Ordering::Equal => {
                    k += 1;
                    l += 1;
                }
            }
        }
        acc
    };
    Ok(if p == 1.0 { total } else { total.powf(1.0 / p) })
}

/// Observed order `log(e_coarse / e_fine) / log ρ`.
pub fn richardson_order(e_coarse: f64, e_fine: f64, ratio: f64) -> Result<f64> {
    if !(e_coarse > 0.0) || !(e_fine > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Richardson order needs positive errors, got {e_coarse} and {e_fine}"
        )));
    }
    if !(ratio > 1.0) {
        return Err(Error::InvalidArgument(format!("refinement ratio must exceed 1, got {ratio}")));
    }
    Ok((e_coarse / e_fine).ln() / ratio.ln())
}

/// Reflection axis of the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    /// The vertical line `x = c`.
    Vertical(f64),
    /// The horizontal line `y = c`.
    Horizontal(f64),
    /// The diagonal `y = x`.
    Diagonal,
}

impl Axis {
    pub const CENTER_X: Axis = Axis::Vertical(0.5);
    pub const CENTER_Y: Axis = Axis::Horizontal(0.5);

    fn lattice_offset(c: f64, n: usize) -> Result<usize> {
        let twice = 2.0 * c * n as f64;
        let k = twice.round();
        if (twice - k).abs() > 1e-9 || k < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "reflection axis at {c} does not map the N = {n} lattice onto itself"
            )));
        }
        Ok(k as usize)
    }

    /// Lattice mirror of node `(i, j)`, if it stays on the lattice.
    pub fn reflect(self, n: usize, i: usize, j: usize) -> Result<Option<(usize, usize)>> {
        Ok(match self {
            Axis::Vertical(c) => {
                let k = Self::lattice_offset(c, n)?;
                (i <= k && k - i <= n).then(|| (k - i, j))
            }
            Axis::Horizontal(c) => {
                let k = Self::lattice_offset(c, n)?;
                (j <= k && k - j <= n).then(|| (i, k - j))
            }
            Axis::Diagonal => Some((j, i)),
        })
    }
}

/// Column mapping under a reflection: `(source column, sign)` per column.
fn reflected_columns(labels: &[String], axis: Axis) -> Vec<(usize, f64)> {
    let find = |name: &str| labels.iter().position(|l| l == name);
    labels
        .iter()
        .enumerate()
        .map(|(k, l)| match (l.as_str(), axis) {
            ("C12", Axis::Vertical(_) | Axis::Horizontal(_)) => (k, -1.0),
            ("C11", Axis::Diagonal) => (find("C22").unwrap_or(k), 1.0),
            ("C22", Axis::Diagonal) => (find("C11").unwrap_or(k), 1.0),
            _ => (k, 1.0),
        })
        .collect()
}

/// Largest deviation between the fields and their mirror images over nodes
/// active on both sides of the axis. Tensor components transform as a
/// tensor: the off-diagonal flips sign under axis-parallel reflections, and
/// the diagonal entries swap under the diagonal reflection.
pub fn symmetry_residual(snapshot: &Snapshot, axis: Axis) -> Result<f64> {
    snapshot.validate()?;
    let index = snapshot.lattice_index();
    let map = reflected_columns(&snapshot.labels, axis);
    let mut worst = 0.0f64;
    for (k, nd) in snapshot.nodes.iter().enumerate() {
        let Some((ri, rj)) = axis.reflect(snapshot.n, nd.i, nd.j)? else {
            continue;
        };
        let Some(&r) = index.get(&(ri, rj)) else {
            continue;
        };
        for (c, &(src, sign)) in map.iter().enumerate() {
            let d = (snapshot.columns[c][k] - sign * snapshot.columns[src][r]).abs();
            if d.is_nan() {
                return Ok(f64::NAN);
            }
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Marching-squares segment inside one lattice cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSegment {
    pub cell: (usize, usize),
    pub a: Point,
    pub b: Point,
}

/// Marching squares for `values = level` on cells whose four corners are all
/// present in the snapshot. A corner is "above" when its value exceeds the
/// level. Saddle cells are split by comparing the mean of the four corners
/// with the level.
pub fn contour_cells(snapshot: &Snapshot, values: &[f64], level: f64) -> Result<Vec<ContourSegment>> {
    if values.len() != snapshot.len() {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for {} nodes",
            values.len(),
            snapshot.len()
        )));
    }
    let index = snapshot.lattice_index();
    let h = snapshot.h();
    let mut out = Vec::new();
    for j in 0..snapshot.n {
        for i in 0..snapshot.n {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let Some(ids) = corners.iter().map(|c| index.get(c).copied()).collect::<Option<Vec<_>>>() else {
                continue;
            };
            let v: Vec<f64> = ids.iter().map(|&k| values[k]).collect();
            let above: Vec<bool> = v.iter().map(|&x| x > level).collect();
            let pos = |k: usize| [corners[k].0 as f64 * h, corners[k].1 as f64 * h];
            // Crossing on edge k between corner k and corner k+1.
            let crossing = |k: usize| {
                let l = (k + 1) % 4;
                let t = (level - v[k]) / (v[l] - v[k]);
                let (p, q) = (pos(k), pos(l));
                [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
            };
            let edges: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
            let pairs: Vec<(usize, usize)> = match edges.len() {
                2 => vec![(edges[0], edges[1])],
                4 => {
                    let center = v.iter().sum::<f64>() / 4.0 > level;
                    if center == above[0] {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
                _ => Vec::new(),
            };
            for (e, f) in pairs {
                out.push(ContourSegment {
                    cell: (i, j),
                    a: crossing(e),
                    b: crossing(f),
                });
            }
        }
    }
    Ok(out)
}

/// Number of 4-connected clusters of nodes with `values > threshold`.
pub fn connected_components(snapshot: &Snapshot, values: &[f64], threshold: f64) -> Result<usize> {
    if values.len() != snapshot.len() {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for {} nodes",
            values.len(),
            snapshot.len()
        )));
    }
    let index = snapshot.lattice_index();
    let mut seen = vec![false; snapshot.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..snapshot.len() {
        if seen[start] || !(values[start] > threshold) {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (i, j) = (snapshot.nodes[k].i as i64, snapshot.nodes[k].j as i64);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 {
                    continue;
                }
                if let Some(&m) = index.get(&(a as usize, b as usize)) {
                    if !seen[m] && values[m] > threshold {
                        seen[m] = true;
                        stack.push(m);
                    }
                }
            }
        }
    }
    Ok(count)
}

/// Entrywise natural logarithm of every column, floored at [`LOG_FLOOR`].
pub fn log_field(snapshot: &Snapshot) -> Snapshot {
    Snapshot {
        columns: snapshot
            .columns
            .iter()
            .map(|c| c.iter().map(|&v| v.max(LOG_FLOOR).ln()).collect())
            .collect(),
        ..snapshot.clone()
    }
}

/// Evaluates the bilinear interpolant of a snapshot column at `point`.
///
/// Cells with missing corners fall back to the interpolation weights of the
/// corners that are present, renormalized; `None` if no corner is present or
/// the point lies outside the unit square.
pub fn interpolate_at(snapshot: &Snapshot, index: &HashMap<(usize, usize), usize>, values: &[f64], point: Point) -> Option<f64> {
    let n = snapshot.n;
    let (sx, sy) = (point[0] * n as f64, point[1] * n as f64);
    if !(sx >= -1e-12 && sy >= -1e-12 && sx <= n as f64 + 1e-12 && sy <= n as f64 + 1e-12) {
        return None;
    }
    let i = (sx.floor().max(0.0) as usize).min(n - 1);
    let j = (sy.floor().max(0.0) as usize).min(n - 1);
    let (xi, eta) = ((sx - i as f64).clamp(0.0, 1.0), (sy - j as f64).clamp(0.0, 1.0));
    let weights = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta];
    let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
    let (mut acc, mut wsum) = (0.0, 0.0);
    let mut any = false;
    for (c, w) in corners.iter().zip(weights) {
        if let Some(&k) = index.get(c) {
            acc += w * values[k];
            wsum += w;
            any = true;
        }
    }
    if !any {
        None
    } else if wsum > 0.0 {
        Some(acc / wsum)
    } else {
        // The point sits on a missing corner's support only; use the nearest present corner.
        corners.iter().find_map(|c| index.get(c).map(|&k| values[k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Full-lattice snapshot of a function of position.
    fn lattice_snapshot(n: usize, labels: &[&str], f: impl Fn(f64, f64) -> Vec<f64>) -> Snapshot {
        let mut nodes = Vec::new();
        let mut columns = vec![Vec::new(); labels.len()];
        for j in 0..=n {
            for i in 0..=n {
                let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
                nodes.push(SnapshotNode {
                    i,
                    j,
                    x,
                    y,
                    class: NodeClass::Internal,
                });
                for (c, v) in f(x, y).into_iter().enumerate() {
                    columns[c].push(v);
                }
            }
        }
        Snapshot {
            n,
            domain: "square".into(),
            step: 0,
            time: 0.0,
            fingerprint: String::new(),
            nodes,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            columns,
        }
    }

    /// Transport cost by brute force over the optimal monotone coupling of
    /// equal-size samples, computed without sorting.
    fn brute_force_w1(u: &[f64], v: &[f64]) -> f64 {
        // For equal sizes the optimal coupling is a permutation; enumerate all.
        fn permute(k: usize, idx: &mut Vec<usize>, u: &[f64], v: &[f64], best: &mut f64) {
            if k == idx.len() {
                let c: f64 = idx.iter().enumerate().map(|(a, &b)| (u[a] - v[b]).abs()).sum();
                *best = best.min(c / u.len() as f64);
                return;
            }
            for m in k..idx.len() {
                idx.swap(k, m);
                permute(k + 1, idx, u, v, best);
                idx.swap(k, m);
            }
        }
        let mut best = f64::INFINITY;
        permute(0, &mut (0..v.len()).collect(), u, v, &mut best);
        best
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_distance(&[1.0, 2.0], &[2.0, 1.0], 1.0).unwrap(), 0.0);
        assert_eq!(wasserstein_distance(&[0.0], &[1.0], 1.0).unwrap(), 1.0);
        assert_relative_eq!(wasserstein_distance(&[0.0, 0.0], &[0.0, 1.0], 1.0).unwrap(), 0.5);
        assert_relative_eq!(brute_force_w1(&[0.0, 0.0], &[0.0, 1.0]), 0.5);
        assert!(wasserstein_distance(&[], &[1.0], 1.0).is_err());
        assert!(wasserstein_distance(&[1.0], &[1.0], 0.5).is_err());
    }

    #[test]
    fn wasserstein_unequal_lengths() {
        // Point mass at 0 against uniform mass on {0, 1, 2}: (0 + 1 + 2) / 3.
        assert_relative_eq!(wasserstein_distance(&[0.0], &[0.0, 1.0, 2.0], 1.0).unwrap(), 1.0, max_relative = 1e-15);
        // Duplicating every sample leaves the distribution unchanged.
        let u = [0.3, -1.0, 2.0];
        let v = [0.5, 0.1, 4.0];
        let v2: Vec<f64> = v.iter().chain(&v).copied().collect();
        let a = wasserstein_distance(&u, &v, 2.0).unwrap();
        let b = wasserstein_distance(&u, &v2, 2.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn wasserstein_matches_brute_force_transport() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use rand::Rng;
        for _ in 0..20 {
            let u: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert_relative_eq!(wasserstein_distance(&u, &v, 1.0).unwrap(), brute_force_w1(&u, &v), max_relative = 1e-12);
        }
    }

    #[test]
    fn richardson_examples() {
        assert_relative_eq!(richardson_order(4.0, 1.0, 2.0).unwrap(), 2.0);
        assert_relative_eq!(richardson_order(2.0, 1.0, 2.0).unwrap(), 1.0);
        let table = richardson_order(7.3178e-4, 3.1681e-4, 2.0).unwrap();
        assert!((table - 1.21).abs() < 0.005, "{table}");
        assert!(richardson_order(0.0, 1.0, 2.0).is_err());
        assert!(richardson_order(1.0, -1.0, 2.0).is_err());
    }

    #[test]
    fn symmetry_residual_examples() {
        let snap = lattice_snapshot(10, &["u"], |x, _| vec![x]);
        let expected = snap.nodes.iter().map(|n| (n.x - (1.0 - n.x)).abs()).fold(0.0, f64::max);
        assert_relative_eq!(symmetry_residual(&snap, Axis::CENTER_X).unwrap(), expected, max_relative = 1e-15);
        let even = lattice_snapshot(10, &["u"], |x, y| vec![(x - 0.5).powi(2) + y]);
        assert!(symmetry_residual(&even, Axis::CENTER_X).unwrap() < 1e-15);
        assert!(symmetry_residual(&even, Axis::CENTER_Y).unwrap() > 0.1);
        assert!(symmetry_residual(&snap, Axis::Vertical(0.123)).is_err());
    }

    #[test]
    fn tensor_components_transform_under_reflection() {
        // C(x, y) = R C(Rx) Rᵀ holds for this field under x ↦ 1 − x.
        let snap = lattice_snapshot(8, &["C11", "C12", "C22"], |x, y| {
            let d = x - 0.5;
            vec![1.0 + d * d, d * y, 2.0 + y]
        });
        assert!(symmetry_residual(&snap, Axis::CENTER_X).unwrap() < 1e-15);
        let diag = lattice_snapshot(8, &["C11", "C12", "C22"], |x, y| vec![x, x * y, y]);
        assert!(symmetry_residual(&diag, Axis::Diagonal).unwrap() < 1e-15);
    }

    #[test]
    fn contour_examples() {
        let constant = lattice_snapshot(6, &["u"], |_, _| vec![2.0]);
        assert!(contour_cells(&constant, &constant.columns[0], 1.0).unwrap().is_empty());
        let snap = lattice_snapshot(10, &["u"], |x, _| vec![x]);
        let segs = contour_cells(&snap, &snap.columns[0], 0.5).unwrap();
        assert_eq!(segs.len(), 10);
        for s in &segs {
            assert_eq!(s.cell.0, 5);
            assert!((s.a[0] - 0.5).abs() < 1e-15 && (s.b[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn saddle_uses_center_average() {
        let mut snap = lattice_snapshot(1, &["u"], |_, _| vec![0.0]);
        // Corners in storage order (0,0), (1,0), (0,1), (1,1).
        snap.columns[0] = vec![1.0, 0.0, 0.0, 1.0];
        let high = contour_cells(&snap, &snap.columns[0].clone(), 0.4).unwrap();
        let low = contour_cells(&snap, &snap.columns[0].clone(), 0.6).unwrap();
        assert_eq!(high.len(), 2);
        assert_eq!(low.len(), 2);
        assert_ne!(high, low);
    }

    #[test]
    fn connected_components_counts_clusters() {
        let snap = lattice_snapshot(10, &["u"], |x, y| {
            let a = (x - 0.2).hypot(y - 0.2) < 0.12;
            let b = (x - 0.8).hypot(y - 0.7) < 0.12;
            vec![if a || b { 1.0 } else { 0.0 }]
        });
        assert_eq!(connected_components(&snap, &snap.columns[0], 0.5).unwrap(), 2);
        assert_eq!(connected_components(&snap, &snap.columns[0], -0.5).unwrap(), 1);
        assert_eq!(connected_components(&snap, &snap.columns[0], 2.0).unwrap(), 0);
    }

    #[test]
    fn log_field_examples() {
        let snap = lattice_snapshot(1, &["C"], |_, _| vec![1.0]);
        let mut s = snap.clone();
        s.columns[0] = vec![1.0, std::f64::consts::E, 0.0, -3.0];
        let l = log_field(&s);
        assert_eq!(l.columns[0][0], 0.0);
        assert_relative_eq!(l.columns[0][1], 1.0, max_relative = 1e-15);
        assert_eq!(l.columns[0][2], LOG_FLOOR.ln());
        assert_eq!(l.columns[0][3], LOG_FLOOR.ln());
    }

    #[test]
    fn restriction_and_interpolation() {
        let snap = lattice_snapshot(8, &["u"], |x, y| vec![2.0 * x - y]);
        let coarse = snap.restrict_to_lattice(4).unwrap();
        assert_eq!(coarse.len(), 25);
        for (k, nd) in coarse.nodes.iter().enumerate() {
            assert_relative_eq!(coarse.columns[0][k], 2.0 * nd.x - nd.y);
        }
        assert!(snap.restrict_to_lattice(3).is_err());
        let index = snap.lattice_index();
        let v = interpolate_at(&snap, &index, &snap.columns[0], [0.33, 0.71]).unwrap();
        assert_relative_eq!(v, 2.0 * 0.33 - 0.71, max_relative = 1e-14);
        assert!(interpolate_at(&snap, &index, &snap.columns[0], [1.5, 0.5]).is_none());
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 12)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn wasserstein_is_a_metric(u in sample(), v in sample(), w in sample(), p in 1.0f64..3.0) {
            let d = |a: &[f64], b: &[f64]| wasserstein_distance(a, b, p).unwrap();
            prop_assert_eq!(d(&u, &u), 0.0);
            prop_assert!((d(&u, &v) - d(&v, &u)).abs() <= 1e-12);
            prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-12);
            let mut sorted_u = u.clone();
            sorted_u.sort_by(f64::total_cmp);
            let mut sorted_v = v.clone();
            sorted_v.sort_by(f64::total_cmp);
            if sorted_u != sorted_v {
                prop_assert!(d(&u, &v) > 0.0);
            }
        }

        #[test]
        fn wasserstein_translation_and_permutation(u in sample(), v in sample(), c in -5.0f64..5.0, seed in 0u64..1000) {
            let shift = |a: &[f64]| a.iter().map(|x| x + c).collect::<Vec<_>>();
            let d = wasserstein_distance(&u, &v, 1.0).unwrap();
            let ds = wasserstein_distance(&shift(&u), &shift(&v), 1.0).unwrap();
            prop_assert!((d - ds).abs() <= 1e-12 * (1.0 + d));
            let mut shuffled = u.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(wasserstein_distance(&u, &shuffled, 1.0).unwrap(), 0.0);
        }
    }
}
