//! Symmetric sparse operators on a fixed compressed-row pattern.

use std::sync::Arc;

/// Compressed-row sparsity pattern with sorted column indices.
///
/// Patterns built by [`SparsityPattern::from_cells`] are structurally
/// symmetric, so the same arrays double as a compressed-column layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Pattern of a Q1 discretization where every cell couples its four dofs.
    pub fn from_cells(n: usize, cells: impl Iterator<Item = [usize; 4]>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in cells {
            for &a in &dofs {
                rows[a].extend_from_slice(&dofs);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        SparsityPattern { n, row_ptr, col_idx }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage position of entry `(i, j)`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.row(i).binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn diagonal_positions(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.position(i, i).expect("diagonal entry in pattern"))
            .collect()
    }
}

/// Real sparse matrix sharing a [`SparsityPattern`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseOperator { pattern, values }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entry `(i, j)`; zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Iterates over stored `(row, col, value)` triples in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |i| {
            let range = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
            range.map(move |k| (i, self.pattern.col_idx[k], self.values[k]))
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in rp[i]..rp[i + 1] {
                acc += self.values[k] * x[ci[k]];
            }
            *yi = acc;
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.values[self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.pattern.diagonal_positions().into_iter().map(|k| self.values[k]).collect()
    }

    /// `self += s · other`; both must share the pattern.
    pub fn add_scaled(&mut self, s: f64, other: &SparseOperator) {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        SparseOperator {
            pattern: Arc::clone(&self.pattern),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij − A_ji|` over the pattern.
    pub fn asymmetry(&self) -> f64 {
        self.triplets().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
