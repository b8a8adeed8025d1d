//! Assembly and solution of the quasi-definite KKT system
//!
//! ```text
//! [ D    -A^T ] [dx]   [r1]
//! [ -A    0   ] [dy] = [r2]
//! ```
//!
//! where D carries the Nesterov-Todd scaling blocks: zero on free
//! variables, z_i/x_i on the orthant, and P(w^-1) per second-order cone.
//! Cones wider than a threshold are expanded sparsely as
//! P(v) = det(v) I + u u^T - q q^T with two auxiliary rows each, instead
//! of a dense block. Static regularization keeps the matrix quasi-definite.

use crate::cone::{ConeLayout, NtScalings};
use crate::ldl::{LdlFactor, LdlSymbolic};
use crate::sparse::CscMatrix;

/// Cones with dimension above this use the sparse two-row expansion.
const SOC_DENSE_MAX: usize = 8;

enum SocSlot {
    Dense {
        dim: usize,
        /// Upper-triangle positions, column-major within the block.
        positions: Vec<usize>,
    },
    Expanded {
        offset: usize,
        dim: usize,
        u_positions: Vec<usize>,
        u_diag: usize,
        q_position: usize,
        q_diag: usize,
    },
}

pub struct KktSystem {
    n: usize,
    m: usize,
    n_kkt: usize,
    layout: ConeLayout,
    static_reg: f64,
    refine_steps: usize,
    // Unpermuted upper-triangular CSC with explicit diagonal everywhere.
    up_colptr: Vec<usize>,
    up_rowidx: Vec<usize>,
    up_values: Vec<f64>,
    diag_pos: Vec<usize>,
    soc_slots: Vec<SocSlot>,
    pivot_sign: Vec<f64>,
    // Fill-reducing permutation (perm[new] = old) and permuted pattern.
    perm: Vec<usize>,
    data_map: Vec<usize>,
    pk_colptr: Vec<usize>,
    pk_rowidx: Vec<usize>,
    pk_values: Vec<f64>,
    sym: LdlSymbolic,
    fac: LdlFactor,
    // Workspaces.
    rhs_full: Vec<f64>,
    sol_full: Vec<f64>,
    work_perm: Vec<f64>,
    resid: Vec<f64>,
    pub factor_count: usize,
}

impl KktSystem {
    pub fn new(a: &CscMatrix, layout: &ConeLayout, static_reg: f64, refine_steps: usize) -> KktSystem {
        let n = a.ncols();
        let m = a.nrows();
        let nn = layout.nonneg_offset();

        let mut soc_meta: Vec<(usize, usize, bool)> = Vec::new(); // (offset, dim, expanded)
        let mut off = nn + layout.n_nonneg;
        let mut n_aux = 0usize;
        for &d in &layout.soc_dims {
            let expanded = d > SOC_DENSE_MAX;
            if expanded {
                n_aux += 2;
            }
            soc_meta.push((off, d, expanded));
            off += d;
        }
        let n_kkt = n + m + n_aux;

        // Collect unique upper-triangle coordinates.
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n_kkt {
            trips.push((i, i, 0.0));
        }
        for (offset, dim, expanded) in soc_meta.iter().copied() {
            if !expanded {
                for c in 0..dim {
                    for r in 0..c {
                        trips.push((offset + r, offset + c, 0.0));
                    }
                }
            }
        }
        let mut aux_idx = n + m;
        let mut aux_cols: Vec<(usize, usize)> = Vec::new(); // (u_col, q_col) per expanded cone
        for (offset, dim, expanded) in soc_meta.iter().copied() {
            if expanded {
                let u_col = aux_idx;
                let q_col = aux_idx + 1;
                aux_idx += 2;
                for r in 0..dim {
                    trips.push((offset + r, u_col, 0.0));
                }
                trips.push((offset, q_col, 0.0));
                aux_cols.push((u_col, q_col));
            }
        }
        // -A^T block: entry (var i, n + row j) = -A[j, i].
        for i in 0..n {
            for (j, v) in a.col_iter(i) {
                trips.push((i, n + j, -v));
            }
        }

        let upper = CscMatrix::from_triplets(n_kkt, n_kkt, &trips);
        let (up_colptr, up_rowidx, up_values) = (
            upper.col_ptr().to_vec(),
            upper.row_idx().to_vec(),
            upper.values().to_vec(),
        );

        let find = |row: usize, col: usize| -> usize {
            let lo = up_colptr[col];
            let hi = up_colptr[col + 1];
            let k = up_rowidx[lo..hi]
                .binary_search(&row)
                .expect("kkt slot must exist");
            lo + k
        };

        let diag_pos: Vec<usize> = (0..n_kkt).map(|i| find(i, i)).collect();

        let mut soc_slots = Vec::new();
        let mut aux_it = aux_cols.iter();
        for (offset, dim, expanded) in soc_meta.iter().copied() {
            if expanded {
                let &(u_col, q_col) = aux_it.next().unwrap();
                soc_slots.push(SocSlot::Expanded {
                    offset,
                    dim,
                    u_positions: (0..dim).map(|r| find(offset + r, u_col)).collect(),
                    u_diag: diag_pos[u_col],
                    q_position: find(offset, q_col),
                    q_diag: diag_pos[q_col],
                });
            } else {
                let mut positions = Vec::with_capacity(dim * (dim + 1) / 2);
                for c in 0..dim {
                    for r in 0..=c {
                        positions.push(find(offset + r, offset + c));
                    }
                }
                soc_slots.push(SocSlot::Dense { dim, positions });
            }
        }

        let mut pivot_sign = vec![1.0; n_kkt];
        for s in pivot_sign.iter_mut().take(n + m).skip(n) {
            *s = -1.0;
        }
        for &(u_col, q_col) in &aux_cols {
            pivot_sign[u_col] = -1.0;
            pivot_sign[q_col] = 1.0;
        }

        // Fill-reducing ordering on the assembled pattern.
        let (perm, perm_inv, _info) = amd::order::<usize>(
            n_kkt,
            &up_colptr,
            &up_rowidx,
            &amd::Control::default(),
        )
        .expect("amd ordering failed");

        // Build the permuted upper-triangular pattern and the entry map.
        let nnz = up_rowidx.len();
        let mut counts = vec![0usize; n_kkt];
        let mut targets = vec![(0usize, 0usize); nnz];
        for col in 0..n_kkt {
            for p in up_colptr[col]..up_colptr[col + 1] {
                let row = up_rowidx[p];
                let (pi, pj) = (perm_inv[row], perm_inv[col]);
                let (r, c) = if pi <= pj { (pi, pj) } else { (pj, pi) };
                targets[p] = (r, c);
                counts[c] += 1;
            }
        }
        let mut pk_colptr = vec![0usize; n_kkt + 1];
        for c in 0..n_kkt {
            pk_colptr[c + 1] = pk_colptr[c] + counts[c];
        }
        let mut next = pk_colptr.clone();
        let mut slot_of_entry = vec![0usize; nnz];
        let mut pk_rowidx = vec![0usize; nnz];
        for (p, &(r, c)) in targets.iter().enumerate() {
            let slot = next[c];
            pk_rowidx[slot] = r;
            slot_of_entry[p] = slot;
            next[c] += 1;
        }
        // Sort rows within each permuted column, tracking the entry map.
        let mut data_map = vec![0usize; nnz];
        {
            let mut order: Vec<usize> = Vec::new();
            let mut inverse_slot = vec![0usize; nnz]; // slot -> original entry
            for (p, &s) in slot_of_entry.iter().enumerate() {
                inverse_slot[s] = p;
            }
            let mut sorted_rows = vec![0usize; nnz];
            let mut sorted_inv = vec![0usize; nnz];
            for c in 0..n_kkt {
                let lo = pk_colptr[c];
                let hi = pk_colptr[c + 1];
                order.clear();
                order.extend(lo..hi);
                order.sort_by_key(|&s| pk_rowidx[s]);
                for (k, &s) in order.iter().enumerate() {
                    sorted_rows[lo + k] = pk_rowidx[s];
                    sorted_inv[lo + k] = inverse_slot[s];
                }
            }
            pk_rowidx = sorted_rows;
            for (slot, &orig) in sorted_inv.iter().enumerate() {
                data_map[orig] = slot;
            }
        }

        let sym = LdlSymbolic::analyze(n_kkt, &pk_colptr, &pk_rowidx);
        let fac = LdlFactor::new(&sym);

        KktSystem {
            n,
            m,
            n_kkt,
            layout: layout.clone(),
            static_reg,
            refine_steps,
            up_colptr,
            up_rowidx,
            up_values,
            diag_pos,
            soc_slots,
            pivot_sign,
            perm,
            data_map,
            pk_colptr,
            pk_rowidx,
            pk_values: vec![0.0; nnz],
            sym,
            fac,
            rhs_full: vec![0.0; n_kkt],
            sol_full: vec![0.0; n_kkt],
            work_perm: vec![0.0; n_kkt],
            resid: vec![0.0; n_kkt],
            factor_count: 0,
        }
    }

    pub fn set_static_reg(&mut self, reg: f64) {
        self.static_reg = reg;
    }

    pub fn static_reg(&self) -> f64 {
        self.static_reg
    }

    /// Write the scaling-dependent values and refactor.
    pub fn update_and_factor(&mut self, nt: &NtScalings) -> bool {
        let reg = self.static_reg;
        let n = self.n;
        // Diagonal base values.
        for i in 0..self.layout.n_free {
            self.up_values[self.diag_pos[i]] = reg;
        }
        let nn = self.layout.nonneg_offset();
        for i in 0..self.layout.n_nonneg {
            self.up_values[self.diag_pos[nn + i]] = nt.orth_d[i] + reg;
        }
        for i in n..n + self.m {
            self.up_values[self.diag_pos[i]] = -reg;
        }
        for (k, slot) in self.soc_slots.iter().enumerate() {
            let s = &nt.socs[k];
            match slot {
                SocSlot::Dense { dim, positions } => {
                    let mut idx = 0;
                    for c in 0..*dim {
                        for r in 0..=c {
                            let mut val = 2.0 * s.v[r] * s.v[c];
                            if r == c {
                                val += if r == 0 { -s.det_v } else { s.det_v } + reg;
                            }
                            self.up_values[positions[idx]] = val;
                            idx += 1;
                        }
                    }
                }
                SocSlot::Expanded {
                    offset,
                    dim,
                    u_positions,
                    u_diag,
                    q_position,
                    q_diag,
                } => {
                    let sqrt2 = std::f64::consts::SQRT_2;
                    for r in 0..*dim {
                        self.up_values[self.diag_pos[offset + r]] = s.det_v + reg;
                        self.up_values[u_positions[r]] = sqrt2 * s.v[r];
                    }
                    self.up_values[*u_diag] = -1.0 - reg;
                    self.up_values[*q_position] = (2.0 * s.det_v).sqrt();
                    self.up_values[*q_diag] = 1.0 + reg;
                }
            }
        }
        // Scatter into the permuted value array and factor.
        for (p, &slot) in self.data_map.iter().enumerate() {
            self.pk_values[slot] = self.up_values[p];
        }
        let mut max_diag = 1.0f64;
        for &dp in &self.diag_pos {
            max_diag = max_diag.max(self.up_values[dp].abs());
        }
        let dyn_eps = 1e-13 * max_diag;
        let perm = &self.perm;
        let mut sign_perm = vec![0.0; self.n_kkt];
        for k in 0..self.n_kkt {
            sign_perm[k] = self.pivot_sign[perm[k]];
        }
        self.factor_count += 1;
        self.fac.factor(
            &self.sym,
            &self.pk_colptr,
            &self.pk_rowidx,
            &self.pk_values,
            &sign_perm,
            dyn_eps,
        )
    }

    /// Symmetric matvec with the regularized matrix in upper CSC form.
    fn matvec_upper(
        colptr: &[usize],
        rowidx: &[usize],
        values: &[f64],
        x: &[f64],
        out: &mut [f64],
    ) {
        out.fill(0.0);
        for c in 0..colptr.len() - 1 {
            let xc = x[c];
            for p in colptr[c]..colptr[c + 1] {
                let r = rowidx[p];
                let v = values[p];
                out[r] += v * xc;
                if r != c {
                    out[c] += v * x[r];
                }
            }
        }
    }

    /// Solve the KKT system for (dx, dy) given the right-hand side split
    /// (r1, r2), with iterative refinement against the unregularized matrix.
    pub fn solve(&mut self, r1: &[f64], r2: &[f64], dx: &mut [f64], dy: &mut [f64]) {
        let n = self.n;
        let m = self.m;
        self.rhs_full[..n].copy_from_slice(r1);
        self.rhs_full[n..n + m].copy_from_slice(r2);
        self.rhs_full[n + m..].fill(0.0);

        for k in 0..self.n_kkt {
            self.work_perm[k] = self.rhs_full[self.perm[k]];
        }
        self.fac.solve(&mut self.work_perm);
        for k in 0..self.n_kkt {
            self.sol_full[self.perm[k]] = self.work_perm[k];
        }

        for _ in 0..self.refine_steps {
            // resid = rhs - M_exact * sol = rhs - M_reg*sol + reg*(sign .* sol)
            Self::matvec_upper(
                &self.up_colptr,
                &self.up_rowidx,
                &self.up_values,
                &self.sol_full,
                &mut self.resid,
            );
            let mut worst = 0.0f64;
            for i in 0..self.n_kkt {
                let r = self.rhs_full[i] - self.resid[i]
                    + self.static_reg * self.pivot_sign[i] * self.sol_full[i];
                self.resid[i] = r;
                worst = worst.max(r.abs());
            }
            if worst < 1e-14 {
                break;
            }
            for k in 0..self.n_kkt {
                self.work_perm[k] = self.resid[self.perm[k]];
            }
            self.fac.solve(&mut self.work_perm);
            for k in 0..self.n_kkt {
                self.sol_full[self.perm[k]] += self.work_perm[k];
            }
        }

        dx.copy_from_slice(&self.sol_full[..n]);
        dy.copy_from_slice(&self.sol_full[n..n + m]);
    }

    pub fn dynamic_bumps(&self) -> usize {
        self.fac.dynamic_bumps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{ConeLayout, NtScalings};

    #[test]
    fn kkt_solve_reproduces_dense_solution() {
        // Small layout: 1 free, 2 nonneg, one dim-3 cone; 2 equality rows.
        let layout = ConeLayout {
            n_free: 1,
            n_nonneg: 2,
            soc_dims: vec![3],
        };
        let n = layout.total_dim();
        let a = CscMatrix::from_triplets(
            2,
            n,
            &[
                (0, 0, 1.0),
                (0, 2, -2.0),
                (0, 3, 0.5),
                (1, 1, 1.0),
                (1, 4, 3.0),
                (1, 5, -1.0),
            ],
        );
        let mut x = vec![0.0; n];
        let mut z = vec![0.0; n];
        layout.set_identity(&mut x);
        layout.set_identity(&mut z);
        // Nudge off the identity for a nontrivial scaling.
        x[1] = 2.0;
        z[2] = 0.5;
        x[3] = 1.5;
        x[4] = 0.25;
        z[3] = 2.0;
        z[5] = -0.5;
        let mut nt = NtScalings::new(&layout);
        assert!(nt.update(&layout, &x, &z));

        let mut kkt = KktSystem::new(&a, &layout, 1e-9, 2);
        assert!(kkt.update_and_factor(&nt));

        let r1 = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let r2 = vec![4.0, -1.0];
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; 2];
        kkt.solve(&r1, &r2, &mut dx, &mut dy);

        // Verify residuals of the unregularized system directly:
        // D dx - A^T dy = r1 ; -A dx = r2.
        let mut d = vec![vec![0.0; n]; n];
        // free block zero; orthant diag; soc P(v)
        d[1][1] = nt.orth_d[0];
        d[2][2] = nt.orth_d[1];
        let s = &nt.socs[0];
        for r in 0..3 {
            for c in 0..3 {
                let mut v = 2.0 * s.v[r] * s.v[c];
                if r == c {
                    v += if r == 0 { -s.det_v } else { s.det_v };
                }
                d[3 + r][3 + c] = v;
            }
        }
        let mut res1 = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += d[i][j] * dx[j];
            }
            res1[i] = acc - r1[i];
        }
        // subtract A^T dy
        let mut atdy = vec![0.0; n];
        a.gaxpy_transpose(1.0, &dy, &mut atdy);
        for i in 0..n {
            res1[i] -= atdy[i];
            assert!(res1[i].abs() < 1e-7, "row {i}: {}", res1[i]);
        }
        let mut ax = vec![0.0; 2];
        a.gaxpy(1.0, &dx, &mut ax);
        for j in 0..2 {
            assert!((-ax[j] - r2[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn expanded_cone_matches_dense_path() {
        // A cone wider than the dense threshold must give the same solution
        // as the reference dense P(v) computation.
        let dim = SOC_DENSE_MAX + 4;
        let layout = ConeLayout {
            n_free: 0,
            n_nonneg: 0,
            soc_dims: vec![dim],
        };
        let n = layout.total_dim();
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((0, i, (i + 1) as f64 * 0.1));
        }
        let a = CscMatrix::from_triplets(1, n, &trips);
        let mut x = vec![0.1; n];
        let mut z = vec![-0.05; n];
        x[0] = 2.0;
        z[0] = 1.5;
        let mut nt = NtScalings::new(&layout);
        assert!(nt.update(&layout, &x, &z));
        let mut kkt = KktSystem::new(&a, &layout, 1e-10, 3);
        assert!(kkt.update_and_factor(&nt));
        let r1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let r2 = vec![2.0];
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; 1];
        kkt.solve(&r1, &r2, &mut dx, &mut dy);

        // Dense reference residual check.
        let s = &nt.socs[0];
        for r in 0..n {
            let mut acc = 0.0;
            for c in 0..n {
                let mut v = 2.0 * s.v[r] * s.v[c];
                if r == c {
                    v += if r == 0 { -s.det_v } else { s.det_v };
                }
                acc += v * dx[c];
            }
            let arow: f64 = (r + 1) as f64 * 0.1;
            acc -= arow * dy[0];
            assert!((acc - r1[r]).abs() < 1e-7, "row {r}: {acc} vs {}", r1[r]);
        }
    }
}
