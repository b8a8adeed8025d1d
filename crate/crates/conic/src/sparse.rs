//! Minimal compressed-sparse-column matrix used by the solver.

/// Sparse matrix in compressed-sparse-column format.
///
/// Row indices within each column are kept sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Build from unordered triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> CscMatrix {
        let mut count = vec![0usize; ncols];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet out of bounds");
            count[c] += 1;
        }
        let mut col_ptr = vec![0usize; ncols + 1];
        for c in 0..ncols {
            col_ptr[c + 1] = col_ptr[c] + count[c];
        }
        let nnz = col_ptr[ncols];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = col_ptr.clone();
        for &(r, c, v) in triplets {
            let p = next[c];
            row_idx[p] = r;
            values[p] = v;
            next[c] += 1;
        }
        // Sort rows within each column, then merge duplicates.
        let mut out_ptr = vec![0usize; ncols + 1];
        let mut out_rows = Vec::with_capacity(nnz);
        let mut out_vals = Vec::with_capacity(nnz);
        let mut order: Vec<usize> = Vec::new();
        for c in 0..ncols {
            let lo = col_ptr[c];
            let hi = col_ptr[c + 1];
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&p| row_idx[p]);
            let mut last_row = usize::MAX;
            for &p in &order {
                if row_idx[p] == last_row {
                    let v = out_vals.last_mut().unwrap();
                    *v += values[p];
                } else {
                    out_rows.push(row_idx[p]);
                    out_vals.push(values[p]);
                    last_row = row_idx[p];
                }
            }
            out_ptr[c + 1] = out_rows.len();
        }
        CscMatrix {
            nrows,
            ncols,
            col_ptr: out_ptr,
            row_idx: out_rows,
            values: out_vals,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> CscMatrix {
        CscMatrix {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterate the entries of one column as (row, value) pairs.
    pub fn col_iter(&self, col: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        self.row_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// y += alpha * A * x
    pub fn gaxpy(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for c in 0..self.ncols {
            let xc = alpha * x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[p]] += self.values[p] * xc;
            }
        }
    }

    /// y += alpha * A^T * x
    pub fn gaxpy_transpose(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                acc += self.values[p] * x[self.row_idx[p]];
            }
            y[c] += alpha * acc;
        }
    }

    /// Number of structurally nonzero entries in each row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.nrows];
        for &r in &self.row_idx {
            counts[r] += 1;
        }
        counts
    }
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Infinity norm.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_build_sorts_and_merges() {
        let a = CscMatrix::from_triplets(3, 2, &[(2, 0, 1.0), (0, 0, 2.0), (2, 0, 0.5), (1, 1, 3.0)]);
        assert_eq!(a.nnz(), 3);
        let col0: Vec<_> = a.col_iter(0).collect();
        assert_eq!(col0, vec![(0, 2.0), (2, 1.5)]);
    }

    #[test]
    fn gaxpy_matches_dense() {
        let a = CscMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 0, 4.0), (0, 2, -2.0)]);
        let x = [1.0, 5.0, 3.0];
        let mut y = vec![0.0; 2];
        a.gaxpy(1.0, &x, &mut y);
        assert_eq!(y, vec![1.0 - 6.0, 4.0]);
        let mut yt = vec![0.0; 3];
        a.gaxpy_transpose(2.0, &[1.0, 1.0], &mut yt);
        assert_eq!(yt, vec![10.0, 0.0, -4.0]);
    }
}
