//! Sparse LDL^T factorization of symmetric quasi-definite matrices.
//!
//! Up-looking factorization over a fixed elimination tree, with static
//! pivot order and dynamic regularization of tiny pivots. The input is
//! the upper triangle in CSC form with every diagonal entry present.

const UNKNOWN: usize = usize::MAX;

/// Symbolic structure shared by repeated numeric factorizations.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    n: usize,
    etree: Vec<usize>,
    l_colptr: Vec<usize>,
}

impl LdlSymbolic {
    /// Analyze the upper-triangular pattern (col_ptr/row_idx, diagonal present).
    pub fn analyze(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> LdlSymbolic {
        let mut etree = vec![UNKNOWN; n];
        let mut l_nz = vec![0usize; n];
        let mut work = vec![UNKNOWN; n];
        for j in 0..n {
            work[j] = j;
            for p in col_ptr[j]..col_ptr[j + 1] {
                let mut i = row_idx[p];
                debug_assert!(i <= j, "matrix must be upper triangular");
                while work[i] != j {
                    work[i] = j;
                    l_nz[i] += 1;
                    if etree[i] == UNKNOWN {
                        etree[i] = j;
                    }
                    i = etree[i];
                }
            }
        }
        let mut l_colptr = vec![0usize; n + 1];
        for i in 0..n {
            l_colptr[i + 1] = l_colptr[i] + l_nz[i];
        }
        LdlSymbolic { n, etree, l_colptr }
    }

    pub fn l_nnz(&self) -> usize {
        self.l_colptr[self.n]
    }
}

/// Numeric LDL^T factor with reusable workspace.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_values: Vec<f64>,
    d: Vec<f64>,
    d_inv: Vec<f64>,
    // workspace
    y_vals: Vec<f64>,
    y_marker: Vec<usize>,
    y_idx: Vec<usize>,
    elim: Vec<usize>,
    next_in_col: Vec<usize>,
    /// Number of pivots bumped by dynamic regularization in the last factor.
    pub dynamic_bumps: usize,
}

impl LdlFactor {
    pub fn new(sym: &LdlSymbolic) -> LdlFactor {
        let nnz = sym.l_nnz();
        LdlFactor {
            n: sym.n,
            l_colptr: sym.l_colptr.clone(),
            l_rowidx: vec![0; nnz],
            l_values: vec![0.0; nnz],
            d: vec![0.0; sym.n],
            d_inv: vec![0.0; sym.n],
            y_vals: vec![0.0; sym.n],
            y_marker: vec![UNKNOWN; sym.n],
            y_idx: vec![0; sym.n],
            elim: vec![0; sym.n],
            next_in_col: vec![0; sym.n],
            dynamic_bumps: 0,
        }
    }

    /// Factor the matrix given by the analyzed pattern and current values.
    ///
    /// `pivot_sign[k]` gives the expected sign of D[k]; pivots whose signed
    /// value falls below `dyn_eps` are bumped to `pivot_sign[k] * dyn_eps`.
    /// Returns false only if a pivot is exactly non-finite.
    pub fn factor(
        &mut self,
        sym: &LdlSymbolic,
        col_ptr: &[usize],
        row_idx: &[usize],
        values: &[f64],
        pivot_sign: &[f64],
        dyn_eps: f64,
    ) -> bool {
        let n = self.n;
        self.dynamic_bumps = 0;
        self.next_in_col.copy_from_slice(&self.l_colptr[..n]);
        self.y_marker.fill(UNKNOWN);
        self.y_vals.fill(0.0);

        for k in 0..n {
            let mut nnz_y = 0usize;
            let mut dk = 0.0;
            for p in col_ptr[k]..col_ptr[k + 1] {
                let i = row_idx[p];
                if i == k {
                    dk = values[p];
                    continue;
                }
                self.y_vals[i] = values[p];
                if self.y_marker[i] != k {
                    self.y_marker[i] = k;
                    self.elim[0] = i;
                    let mut nnz_e = 1usize;
                    let mut next = sym.etree[i];
                    while next != UNKNOWN && next < k {
                        if self.y_marker[next] == k {
                            break;
                        }
                        self.y_marker[next] = k;
                        self.elim[nnz_e] = next;
                        nnz_e += 1;
                        next = sym.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        self.y_idx[nnz_y] = self.elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            // Eliminate in topological order (stack order reversed).
            for idx in (0..nnz_y).rev() {
                let c = self.y_idx[idx];
                let yc = self.y_vals[c];
                let tmp = self.next_in_col[c];
                for p in self.l_colptr[c]..tmp {
                    self.y_vals[self.l_rowidx[p]] -= self.l_values[p] * yc;
                }
                let l_kc = yc * self.d_inv[c];
                self.l_rowidx[tmp] = k;
                self.l_values[tmp] = l_kc;
                dk -= yc * l_kc;
                self.next_in_col[c] = tmp + 1;
                self.y_vals[c] = 0.0;
            }
            if !dk.is_finite() {
                return false;
            }
            // Pivot signs are not order-invariant once cones are expanded,
            // so only near-zero pivots are nudged, toward the expected sign.
            if dk.abs() < dyn_eps {
                dk = pivot_sign[k] * dyn_eps;
                self.dynamic_bumps += 1;
            }
            self.d[k] = dk;
            self.d_inv[k] = 1.0 / dk;
        }
        true
    }

    /// In-place solve of L D L^T x = b.
    pub fn solve(&self, x: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                    x[self.l_rowidx[p]] -= self.l_values[p] * xj;
                }
            }
        }
        for j in 0..n {
            x[j] *= self.d_inv[j];
        }
        for j in (0..n).rev() {
            let mut acc = x[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                acc -= self.l_values[p] * x[self.l_rowidx[p]];
            }
            x[j] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_small_quasidefinite() {
        // M = [ 4  1  2 ]
        //     [ 1  3  0 ]
        //     [ 2  0 -5 ]
        // Upper CSC with diagonal entries.
        let col_ptr = vec![0, 1, 3, 5];
        let row_idx = vec![0, 0, 1, 0, 2];
        let values = vec![4.0, 1.0, 3.0, 2.0, -5.0];
        let sym = LdlSymbolic::analyze(3, &col_ptr, &row_idx);
        let mut fac = LdlFactor::new(&sym);
        let signs = vec![1.0, 1.0, -1.0];
        assert!(fac.factor(&sym, &col_ptr, &row_idx, &values, &signs, 1e-14));
        assert_eq!(fac.dynamic_bumps, 0);
        let b = vec![1.0, 2.0, 3.0];
        let mut x = b.clone();
        fac.solve(&mut x);
        // Check M x = b against dense arithmetic.
        let m = [[4.0, 1.0, 2.0], [1.0, 3.0, 0.0], [2.0, 0.0, -5.0]];
        for r in 0..3 {
            let mut acc = 0.0;
            for c in 0..3 {
                acc += m[r][c] * x[c];
            }
            assert!((acc - b[r]).abs() < 1e-12, "row {r}: {acc}");
        }
    }

    #[test]
    fn dynamic_regularization_bumps_zero_pivot() {
        // Second pivot becomes exactly zero without regularization:
        // M = [1 1; 1 1]
        let col_ptr = vec![0, 1, 3];
        let row_idx = vec![0, 0, 1];
        let values = vec![1.0, 1.0, 1.0];
        let sym = LdlSymbolic::analyze(2, &col_ptr, &row_idx);
        let mut fac = LdlFactor::new(&sym);
        assert!(fac.factor(&sym, &col_ptr, &row_idx, &values, &[1.0, 1.0], 1e-10));
        assert_eq!(fac.dynamic_bumps, 1);
    }
}
