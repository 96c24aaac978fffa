//! Q1 finite elements on the active nodes of a cut grid.
//!
//! Every cut cell carries precomputed integral tables in reference
//! coordinates, so assembling an operator for new coefficients only combines
//! tables with sampled coefficient values.

mod solve;
mod sparse;

pub use solve::{pcg_neumann, LinearSolverKind, NeumannSolver, SpdSolver, CG_MAX_DIRECT_DOFS};
pub use sparse::{dot, norm2, SparseOperator, SparsityPattern};

use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{CutCellPolygon, GridTopology, NodeClass, Point};
use crate::quadrature::{gauss_legendre_nodes, polygon_moments, reference_basis, BiPolynomial, EdgeRule};
use crate::tensor::SymTensor;

/// How nonconstant coefficients enter local integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientSampling {
    /// One value per polygon, taken at its centroid; 3-point edge rule.
    #[default]
    Centroid,
    /// Q1 interpolation of corner values; 5-point edge rule.
    NodalQ5,
}

impl CoefficientSampling {
    pub fn as_str(self) -> &'static str {
        match self {
            CoefficientSampling::Centroid => "centroid",
            CoefficientSampling::NodalQ5 => "nodal-q5",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "centroid" => Some(CoefficientSampling::Centroid),
            "nodal-q5" => Some(CoefficientSampling::NodalQ5),
            _ => None,
        }
    }
}

/// Coefficient value on one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample<T> {
    /// Constant over the polygon.
    Uniform(T),
    /// Values at the four cell corners, interpolated bilinearly.
    Corners([T; 4]),
}

/// Nodal triple products `∫ φ_k φ_i φ_j` and `∫ φ_k ∂_a φ_i ∂_b φ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleTables {
    pub mass: [[[f64; 4]; 4]; 4],
    pub grad: [[[[f64; 4]; 4]; 4]; 3],
}

/// Geometry and integral tables of one cut cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellData {
    pub polygon: CutCellPolygon,
    /// Dofs of the corners, counterclockwise from the lower-left.
    pub dofs: [usize; 4],
    /// Pattern positions of the entries `(dofs[a], dofs[b])`, index `4a + b`.
    pub positions: [usize; 16],
    pub area: f64,
    pub centroid: Point,
    /// Centroid in reference coordinates of the cell.
    pub reference_centroid: Point,
    /// `∫ φ_i φ_j`.
    pub mass: [[f64; 4]; 4],
    /// `∫ ∂_a φ_i ∂_b φ_j` for `(a, b) = (x, x), (x, y), (y, y)`.
    pub grad: [[[f64; 4]; 4]; 3],
    /// `∫ φ_i`.
    pub load: [f64; 4],
    pub triple: Option<Box<TripleTables>>,
}

impl CellData {
    /// Values of the four basis functions at the centroid.
    pub fn centroid_weights(&self) -> [f64; 4] {
        basis_values(self.reference_centroid)
    }

    /// Stiffness block for a constant tensor coefficient.
    pub fn stiffness_block(&self, m: &SymTensor) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = m.xx * self.grad[0][a][b]
                    + m.xy * (self.grad[1][a][b] + self.grad[1][b][a])
                    + m.yy * self.grad[2][a][b];
            }
        }
        out
    }

    fn triple(&self) -> Result<&TripleTables> {
        self.triple.as_deref().ok_or_else(|| {
            Error::InvalidArgument("corner-sampled coefficients need a space built with nodal-q5 sampling".into())
        })
    }
}

/// Values of the Q1 reference basis at `(ξ, η)`.
pub fn basis_values(r: Point) -> [f64; 4] {
    let (x, y) = (r[0], r[1]);
    [(1.0 - x) * (1.0 - y), x * (1.0 - y), x * y, (1.0 - x) * y]
}

/// Gradient of a Q1 function with corner values `u` at reference point `r`
/// on a cell of width `h`.
pub fn q1_gradient(u: [f64; 4], r: Point, h: f64) -> [f64; 2] {
    let (x, y) = (r[0], r[1]);
    [
        ((u[1] - u[0]) * (1.0 - y) + (u[2] - u[3]) * y) / h,
        ((u[3] - u[0]) * (1.0 - x) + (u[2] - u[1]) * x) / h,
    ]
}

/// The Q1 space spanned by hat functions on internal and ghost nodes.
#[derive(Debug, Clone)]
pub struct FeSpace {
    topology: GridTopology,
    dof_of_node: Vec<Option<usize>>,
    node_of_dof: Vec<usize>,
    cells: Vec<CellData>,
    pattern: Arc<SparsityPattern>,
    lumped_mass: Vec<f64>,
    sampling: CoefficientSampling,
}

impl FeSpace {
    pub fn new(topology: GridTopology, sampling: CoefficientSampling) -> Result<Self> {
        let mut dof_of_node = vec![None; topology.classes().len()];
        let mut node_of_dof = Vec::new();
        for (k, c) in topology.classes().iter().enumerate() {
            if c.is_active() {
                dof_of_node[k] = Some(node_of_dof.len());
                node_of_dof.push(k);
            }
        }

        let rule3 = EdgeRule::three_point();
        let rule5 = gauss_legendre_nodes(5)?;
        let basis: Vec<BiPolynomial> = (0..4).map(reference_basis).collect();
        let derivs: Vec<[BiPolynomial; 2]> =
            basis.iter().map(|b| [b.derivative_x(), b.derivative_y()]).collect();
        let h = topology.h();

        let mut cells = Vec::new();
        for polygon in topology.cut_cells()? {
            let (ci, cj) = polygon.cell;
            let mut dofs = [0; 4];
            for (slot, (a, b)) in dofs.iter_mut().zip(topology.cell_corners(ci, cj)) {
                *slot = dof_of_node[topology.node_index(a, b)].ok_or_else(|| {
                    Error::InvalidArgument(format!("cut cell ({ci}, {cj}) has an inactive corner ({a}, {b})"))
                })?;
            }
            let verts = polygon.reference_vertices();
            let triple = sampling == CoefficientSampling::NodalQ5;
            let moments = if triple {
                polygon_moments(&verts, 3, &rule5)
            } else {
                polygon_moments(&verts, 2, &rule3)
            };
            let ref_area = moments.get(0, 0);
            let reference_centroid = [moments.get(1, 0) / ref_area, moments.get(0, 1) / ref_area];
            let o = polygon.origin();
            let centroid = [o[0] + h * reference_centroid[0], o[1] + h * reference_centroid[1]];

            let mut mass = [[0.0; 4]; 4];
            let mut grad = [[[0.0; 4]; 4]; 3];
            let mut load = [0.0; 4];
            for a in 0..4 {
                load[a] = h * h * basis[a].integrate_with_moments(&moments);
                for b in 0..4 {
                    mass[a][b] = h * h * basis[a].mul(&basis[b]).integrate_with_moments(&moments);
                    for (g, (p, q)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                        grad[g][a][b] = derivs[a][p].mul(&derivs[b][q]).integrate_with_moments(&moments);
                    }
                }
            }
            let triple = triple.then(|| {
                let mut t = TripleTables {
                    mass: [[[0.0; 4]; 4]; 4],
                    grad: [[[[0.0; 4]; 4]; 4]; 3],
                };
                for k in 0..4 {
                    for a in 0..4 {
                        let ka = basis[k].mul(&basis[a]);
                        for b in 0..4 {
                            t.mass[k][a][b] = h * h * ka.mul(&basis[b]).integrate_with_moments(&moments);
                            for (g, (p, q)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                                let f = basis[k].mul(&derivs[a][p]).mul(&derivs[b][q]);
                                t.grad[g][k][a][b] = f.integrate_with_moments(&moments);
                            }
                        }
                    }
                }
                Box::new(t)
            });
            cells.push(CellData {
                area: h * h * ref_area,
                centroid,
                reference_centroid,
                polygon,
                dofs,
                positions: [0; 16],
                mass,
                grad,
                load,
                triple,
            });
        }

        let pattern = Arc::new(SparsityPattern::from_cells(node_of_dof.len(), cells.iter().map(|c| c.dofs)));
        for cell in &mut cells {
            for a in 0..4 {
                for b in 0..4 {
                    cell.positions[4 * a + b] = pattern.position(cell.dofs[a], cell.dofs[b]).expect("cell entry in pattern");
                }
            }
        }
        let mut lumped_mass = vec![0.0; node_of_dof.len()];
        for cell in &cells {
            for a in 0..4 {
                lumped_mass[cell.dofs[a]] += cell.load[a];
            }
        }
        Ok(FeSpace {
            topology,
            dof_of_node,
            node_of_dof,
            cells,
            pattern,
            lumped_mass,
            sampling,
        })
    }

    pub fn topology(&self) -> &GridTopology {
        &self.topology
    }

    pub fn sampling(&self) -> CoefficientSampling {
        self.sampling
    }

    pub fn n_dofs(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn h(&self) -> f64 {
        self.topology.h()
    }

    /// Dof of the lattice node with storage index `node`, if active.
    pub fn dof(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub fn dof_at(&self, i: usize, j: usize) -> Option<usize> {
        self.dof_of_node[self.topology.node_index(i, j)]
    }

    /// Lattice storage index of a dof.
    pub fn node(&self, dof: usize) -> usize {
        self.node_of_dof[dof]
    }

    pub fn dof_ij(&self, dof: usize) -> (usize, usize) {
        self.topology.node_ij(self.node_of_dof[dof])
    }

    pub fn dof_position(&self, dof: usize) -> Point {
        let (i, j) = self.dof_ij(dof);
        self.topology.node_position(i, j)
    }

    pub fn dof_class(&self, dof: usize) -> NodeClass {
        self.topology.classes()[self.node_of_dof[dof]]
    }

    pub fn cells(&self) -> &[CellData] {
        &self.cells
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Row sums of the unit mass matrix, i.e. `∫ φ_i`.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    /// Area of the discrete domain (sum of cut-polygon areas).
    pub fn area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n_dofs())
            .map(|d| {
                let p = self.dof_position(d);
                f(p[0], p[1])
            })
            .collect()
    }

    /// Corner values of a nodal field on a cell.
    pub fn corner_values(&self, u: &[f64], cell: &CellData) -> [f64; 4] {
        cell.dofs.map(|d| u[d])
    }

    /// Value of a nodal field at the cell centroid.
    pub fn centroid_value(&self, u: &[f64], cell: &CellData) -> f64 {
        let w = cell.centroid_weights();
        (0..4).map(|k| w[k] * u[cell.dofs[k]]).sum()
    }

    /// `∫ u` over the discrete domain for a nodal field.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        dot(&self.lumped_mass, u)
    }
}

/// Gradient of a nodal field restricted to `cell`, evaluated at its centroid.
pub fn cell_gradient(space: &FeSpace, u: &[f64], cell: &CellData) -> [f64; 2] {
    q1_gradient(space.corner_values(u, cell), cell.reference_centroid, space.h())
}

/// Gradient of a nodal field on `cell` at each of its corners.
pub fn corner_gradients(space: &FeSpace, u: &[f64], cell: &CellData) -> [[f64; 2]; 4] {
    let vals = space.corner_values(u, cell);
    [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]].map(|r| q1_gradient(vals, r, space.h()))
}

fn scatter(op: &mut SparseOperator, cell: &CellData, block: &[[f64; 4]; 4]) {
    let values = op.values_mut();
    for a in 0..4 {
        for b in 0..4 {
            values[cell.positions[4 * a + b]] += block[a][b];
        }
    }
}

fn weighted_mass_block(cell: &CellData, coeff: Sample<f64>) -> Result<[[f64; 4]; 4]> {
    Ok(match coeff {
        Sample::Uniform(c) => cell.mass.map(|row| row.map(|v| c * v)),
        Sample::Corners(ck) => {
            let t = cell.triple()?;
            let mut out = [[0.0; 4]; 4];
            for (k, &c) in ck.iter().enumerate() {
                for a in 0..4 {
                    for b in 0..4 {
                        out[a][b] += c * t.mass[k][a][b];
                    }
                }
            }
            out
        }
    })
}

/// `M_ij = Σ_cells ∫ c φ_i φ_j`.
pub fn assemble_mass<F>(space: &FeSpace, coeff: F) -> Result<SparseOperator>
where
    F: Fn(&CellData) -> Sample<f64>,
{
    let mut op = SparseOperator::zeros(Arc::clone(&space.pattern));
    for cell in &space.cells {
        let block = weighted_mass_block(cell, coeff(cell))?;
        scatter(&mut op, cell, &block);
    }
    Ok(op)
}

/// Unit-coefficient mass matrix.
pub fn unit_mass(space: &FeSpace) -> SparseOperator {
    assemble_mass(space, |_| Sample::Uniform(1.0)).expect("uniform coefficients need no triple tables")
}

/// `K_ij = Σ_cells ∫ ∇φ_i · M ∇φ_j`.
pub fn assemble_stiffness<F>(space: &FeSpace, coeff: F) -> Result<SparseOperator>
where
    F: Fn(&CellData) -> Sample<SymTensor>,
{
    let mut op = SparseOperator::zeros(Arc::clone(&space.pattern));
    let mut worst = 0.0f64;
    for cell in &space.cells {
        let block = match coeff(cell) {
            Sample::Uniform(m) => {
                worst = worst.min(m.min_eigenvalue());
                cell.stiffness_block(&m)
            }
            Sample::Corners(mk) => {
                let t = cell.triple()?;
                let mut out = [[0.0; 4]; 4];
                for (k, m) in mk.iter().enumerate() {
                    worst = worst.min(m.min_eigenvalue());
                    for a in 0..4 {
                        for b in 0..4 {
                            out[a][b] += m.xx * t.grad[0][k][a][b]
                                + m.xy * (t.grad[1][k][a][b] + t.grad[1][k][b][a])
                                + m.yy * t.grad[2][k][a][b];
                        }
                    }
                }
                out
            }
        };
        scatter(&mut op, cell, &block);
    }
    if worst < -1e-12 {
        warn!("stiffness coefficient has a negative eigenvalue ({worst:.3e})");
    }
    Ok(op)
}

/// Unit-coefficient stiffness matrix (the Neumann Laplacian).
pub fn unit_stiffness(space: &FeSpace) -> SparseOperator {
    assemble_stiffness(space, |_| Sample::Uniform(SymTensor::IDENTITY)).expect("uniform coefficients need no triple tables")
}

/// `b_i = Σ_cells ∫ f φ_i`.
pub fn assemble_load<F>(space: &FeSpace, f: F) -> Result<Vec<f64>>
where
    F: Fn(&CellData) -> Sample<f64>,
{
    let samples: Vec<Sample<f64>> = space.cells.iter().map(f).collect();
    assemble_load_from(space, &samples)
}

/// Load vector from one precomputed sample per cell (in [`FeSpace::cells`] order).
pub fn assemble_load_from(space: &FeSpace, samples: &[Sample<f64>]) -> Result<Vec<f64>> {
    if samples.len() != space.cells.len() {
        return Err(Error::InvalidArgument(format!(
            "{} samples for {} cells",
            samples.len(),
            space.cells.len()
        )));
    }
    let mut b = vec![0.0; space.n_dofs()];
    for (cell, sample) in space.cells.iter().zip(samples) {
        match *sample {
            Sample::Uniform(v) => {
                for a in 0..4 {
                    b[cell.dofs[a]] += v * cell.load[a];
                }
            }
            Sample::Corners(vk) => {
                for a in 0..4 {
                    let s: f64 = (0..4).map(|k| vk[k] * cell.mass[k][a]).sum();
                    b[cell.dofs[a]] += s;
                }
            }
        }
    }
    Ok(b)
}

/// `b_i = ∫_{∂Ω_h} g(x, n) φ_i ds`, with `n` the outward unit normal of each
/// boundary edge.
pub fn assemble_boundary_load<G>(space: &FeSpace, g: G) -> Vec<f64>
where
    G: Fn(Point, [f64; 2]) -> f64,
{
    let rule = EdgeRule::five_point();
    let h = space.h();
    let mut b = vec![0.0; space.n_dofs()];
    for cell in &space.cells {
        let o = cell.polygon.origin();
        for (k, (p, q)) in cell.polygon.edges().enumerate() {
            if !cell.polygon.on_boundary[k] {
                continue;
            }
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            let len = dx.hypot(dy);
            if len == 0.0 {
                continue;
            }
            let normal = [dy / len, -dx / len];
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let x = [p[0] + t * dx, p[1] + t * dy];
                let phi = basis_values([(x[0] - o[0]) / h, (x[1] - o[1]) / h]);
                let gv = g(x, normal) * w * len;
                for a in 0..4 {
                    b[cell.dofs[a]] += gv * phi[a];
                }
            }
        }
    }
    b
}

/// Projects `b` onto the range of a Neumann operator: `b − (1ᵀb / 1ᵀm) m`.
pub fn project_compatible(b: &mut [f64], lumped: &[f64]) {
    let total: f64 = b.iter().sum();
    let mass: f64 = lumped.iter().sum();
    let s = total / mass;
    for (bi, mi) in b.iter_mut().zip(lumped) {
        *bi -= s * mi;
    }
}

/// Shifts `u` by a constant so that `mᵀu = 0`.
pub fn remove_mean(u: &mut [f64], lumped: &[f64]) {
    let mass: f64 = lumped.iter().sum();
    let s = dot(lumped, u) / mass;
    for ui in u.iter_mut() {
        *ui -= s;
    }
}

/// Solves `K u = b` for a Neumann operator: projects `b`, returns the
/// zero-mean solution.
pub fn solve_neumann_zero_mean(k: &SparseOperator, b: &[f64], space: &FeSpace, tol: f64) -> Result<Vec<f64>> {
    let mut solver = NeumannSolver::new(space, LinearSolverKind::for_dofs(space.n_dofs()), tol);
    solver.factor(k)?;
    solver.solve(b)
}
