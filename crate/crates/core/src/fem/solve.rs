//! Linear solvers for the assembled operators.
//!
//! Both routes share one interface: factor once, then solve any number of
//! right-hand sides. The direct route keeps the symbolic Cholesky analysis
//! across refactorizations since the sparsity pattern never changes.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use super::sparse::{dot, norm2, SparseOperator, SparsityPattern};
use super::{project_compatible, remove_mean, FeSpace};
use crate::error::{Error, Result};

/// Above this many dofs, [`LinearSolverKind::for_dofs`] picks conjugate gradients.
pub const CG_MAX_DIRECT_DOFS: usize = 250_000;

const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolverKind {
    /// Sparse Cholesky factorization.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

impl LinearSolverKind {
    pub fn for_dofs(n: usize) -> Self {
        if n > CG_MAX_DIRECT_DOFS {
            LinearSolverKind::ConjugateGradient
        } else {
            LinearSolverKind::Direct
        }
    }
}

fn solver_error(reason: impl Into<String>, residual: f64) -> Error {
    Error::Solver {
        reason: reason.into(),
        residual,
    }
}

struct Cholesky {
    pattern: Arc<SparsityPattern>,
    symbolic: Option<SymbolicLlt<usize>>,
    numeric: Option<Llt<usize, f64>>,
}

impl Cholesky {
    fn new(pattern: Arc<SparsityPattern>) -> Self {
        Cholesky {
            pattern,
            symbolic: None,
            numeric: None,
        }
    }

    fn factor(&mut self, values: &[f64]) -> Result<()> {
        let n = self.pattern.dim();
        // The pattern is structurally symmetric, so its row layout is also a
        // valid column layout of the same (symmetric) matrix.
        let sym = SymbolicSparseColMatRef::new_checked(n, n, self.pattern.row_ptr(), None, self.pattern.col_idx());
        let mat = SparseColMatRef::new(sym, values);
        if self.symbolic.is_none() {
            let s = SymbolicLlt::try_new(sym, Side::Lower)
                .map_err(|e| solver_error(format!("symbolic factorization failed: {e:?}"), f64::NAN))?;
            self.symbolic = Some(s);
        }
        let symbolic = self.symbolic.clone().expect("symbolic analysis present");
        let llt = Llt::try_new_with_symbolic(symbolic, mat, Side::Lower)
            .map_err(|e| solver_error(format!("Cholesky factorization failed: {e}"), f64::NAN))?;
        self.numeric = Some(llt);
        Ok(())
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        let llt = self.numeric.as_ref().expect("factor before solve");
        llt.solve_in_place(MatMut::from_column_major_slice_mut(x, n, 1));
    }
}

/// Jacobi-preconditioned CG. With `deflate = Some(m)`, iterates are kept in
/// the complement of the constants (for consistent Neumann systems).
fn pcg(
    op: &SparseOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    deflate: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let inv_diag: Vec<f64> = op.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let precondition = |r: &[f64]| {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        if let Some(m) = deflate {
            remove_mean(&mut z, m);
        }
        z
    };
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for _ in 0..max_iter {
        op.matvec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(solver_error("conjugate gradients broke down (operator not positive definite)", norm2(&r) / bnorm));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(solver_error(format!("conjugate gradients did not converge in {max_iter} iterations"), norm2(&r) / bnorm))
}

/// Deflated CG for a consistent Neumann system; returns the zero-mean solution.
pub fn pcg_neumann(op: &SparseOperator, b: &[f64], lumped: &[f64], tol: f64) -> Result<Vec<f64>> {
    let mut rhs = b.to_vec();
    project_compatible(&mut rhs, lumped);
    let mut u = pcg(op, &rhs, tol, max_iterations(b.len()), Some(lumped))?;
    remove_mean(&mut u, lumped);
    Ok(u)
}

fn max_iterations(n: usize) -> usize {
    (10 * n).max(1000)
}

fn residual_norm(op: &SparseOperator, u: &[f64], b: &[f64]) -> f64 {
    let ku = op.matvec(u);
    ku.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt()
}

/// Solver for singular Neumann systems whose kernel is the constants.
///
/// The direct route pins one dof to zero, factors the resulting positive
/// definite matrix, and shifts the solution to zero lumped-mass mean.
pub struct NeumannSolver {
    kind: LinearSolverKind,
    tol: f64,
    lumped: Vec<f64>,
    pinned: usize,
    pinned_entries: Vec<usize>,
    pinned_diagonal: usize,
    cholesky: Cholesky,
    operator: Option<SparseOperator>,
}

impl NeumannSolver {
    pub fn new(space: &FeSpace, kind: LinearSolverKind, tol: f64) -> Self {
        let pattern = Arc::clone(space.pattern());
        let lumped = space.lumped_mass().to_vec();
        // Pin the dof with the largest support.
        let pinned = lumped
            .iter()
            .enumerate()
            .fold(0, |best, (i, &m)| if m > lumped[best] { i } else { best });
        let mut pinned_entries = Vec::new();
        for &j in pattern.row(pinned) {
            if j != pinned {
                pinned_entries.push(pattern.position(pinned, j).expect("row entry"));
                pinned_entries.push(pattern.position(j, pinned).expect("symmetric entry"));
            }
        }
        let pinned_diagonal = pattern.position(pinned, pinned).expect("diagonal entry");
        NeumannSolver {
            kind,
            tol,
            lumped,
            pinned,
            pinned_entries,
            pinned_diagonal,
            cholesky: Cholesky::new(pattern),
            operator: None,
        }
    }

    pub fn kind(&self) -> LinearSolverKind {
        self.kind
    }

    pub fn factor(&mut self, op: &SparseOperator) -> Result<()> {
        let scale = op.max_abs();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(solver_error("Neumann operator is zero or not finite", f64::NAN));
        }
        if self.kind == LinearSolverKind::Direct {
            let mut values = op.values().to_vec();
            for &k in &self.pinned_entries {
                values[k] = 0.0;
            }
            let d = values[self.pinned_diagonal];
            values[self.pinned_diagonal] = if d > 0.0 { d } else { scale };
            self.cholesky.factor(&values)?;
        }
        self.operator = Some(op.clone());
        Ok(())
    }

    /// Solves `K u = b − (1ᵀb / 1ᵀm) m` with `mᵀu = 0`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let op = self.operator.as_ref().expect("factor before solve");
        let mut rhs = b.to_vec();
        project_compatible(&mut rhs, &self.lumped);
        let bnorm = norm2(&rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        match self.kind {
            LinearSolverKind::ConjugateGradient => {
                let mut u = pcg(op, &rhs, self.tol, max_iterations(rhs.len()), Some(&self.lumped))?;
                remove_mean(&mut u, &self.lumped);
                Ok(u)
            }
            LinearSolverKind::Direct => {
                let mut u = rhs.clone();
                u[self.pinned] = 0.0;
                self.cholesky.solve_in_place(&mut u);
                remove_mean(&mut u, &self.lumped);
                let mut res = residual_norm(op, &u, &rhs);
                for _ in 0..REFINEMENT_STEPS {
                    if res <= self.tol * bnorm {
                        break;
                    }
                    let ku = op.matvec(&u);
                    let mut corr: Vec<f64> = rhs.iter().zip(&ku).map(|(a, c)| a - c).collect();
                    project_compatible(&mut corr, &self.lumped);
                    corr[self.pinned] = 0.0;
                    self.cholesky.solve_in_place(&mut corr);
                    for (ui, ci) in u.iter_mut().zip(&corr) {
                        *ui += ci;
                    }
                    remove_mean(&mut u, &self.lumped);
                    res = residual_norm(op, &u, &rhs);
                }
                if !(res <= self.tol * bnorm) {
                    return Err(solver_error("Neumann solve missed the residual tolerance", res / bnorm));
                }
                Ok(u)
            }
        }
    }
}

/// Solver for symmetric positive definite systems on a fixed pattern.
pub struct SpdSolver {
    kind: LinearSolverKind,
    tol: f64,
    cholesky: Cholesky,
    operator: Option<SparseOperator>,
}

impl SpdSolver {
    pub fn new(pattern: Arc<SparsityPattern>, kind: LinearSolverKind, tol: f64) -> Self {
        SpdSolver {
            kind,
            tol,
            cholesky: Cholesky::new(pattern),
            operator: None,
        }
    }

    pub fn factor(&mut self, op: &SparseOperator) -> Result<()> {
        if op.values().iter().any(|v| !v.is_finite()) {
            return Err(solver_error("operator has non-finite entries", f64::NAN));
        }
        if self.kind == LinearSolverKind::Direct {
            self.cholesky.factor(op.values())?;
        }
        self.operator = Some(op.clone());
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let op = self.operator.as_ref().expect("factor before solve");
        match self.kind {
            LinearSolverKind::ConjugateGradient => pcg(op, b, self.tol, max_iterations(b.len()), None),
            LinearSolverKind::Direct => {
                let mut u = b.to_vec();
                self.cholesky.solve_in_place(&mut u);
                Ok(u)
            }
        }
    }
}
