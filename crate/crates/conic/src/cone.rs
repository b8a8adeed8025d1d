//! Cone layout and Jordan-algebra operations for the nonnegative orthant
//! and second-order cones, including Nesterov-Todd scalings.

/// Partition of the variable vector into free, nonnegative, and
/// second-order-cone blocks, in that fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeLayout {
    pub n_free: usize,
    pub n_nonneg: usize,
    pub soc_dims: Vec<usize>,
}

impl ConeLayout {
    pub fn total_dim(&self) -> usize {
        self.n_free + self.n_nonneg + self.soc_dims.iter().sum::<usize>()
    }

    pub fn nonneg_offset(&self) -> usize {
        self.n_free
    }

    /// Offset of the k-th second-order cone in the variable vector.
    pub fn soc_offset(&self, k: usize) -> usize {
        self.n_free + self.n_nonneg + self.soc_dims[..k].iter().sum::<usize>()
    }

    /// Barrier degree: one per nonnegative component plus one per cone.
    pub fn degree(&self) -> usize {
        self.n_nonneg + self.soc_dims.len()
    }

    /// Write the cone identity element (0 on the free block).
    pub fn set_identity(&self, v: &mut [f64]) {
        v.fill(0.0);
        let nn = self.nonneg_offset();
        for item in v.iter_mut().skip(nn).take(self.n_nonneg) {
            *item = 1.0;
        }
        let mut off = nn + self.n_nonneg;
        for &d in &self.soc_dims {
            v[off] = 1.0;
            off += d;
        }
    }

    /// Inner product over the cone components only (free block skipped).
    pub fn cone_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let lo = self.nonneg_offset();
        a[lo..].iter().zip(&b[lo..]).map(|(x, y)| x * y).sum()
    }

    /// Largest step alpha in [0, cap] keeping u + alpha*du inside the cone.
    ///
    /// Free components are unconstrained.
    pub fn step_to_boundary(&self, u: &[f64], du: &[f64], cap: f64) -> f64 {
        let mut alpha = cap;
        let nn = self.nonneg_offset();
        for i in nn..nn + self.n_nonneg {
            if du[i] < 0.0 {
                alpha = alpha.min(-u[i] / du[i]);
            }
        }
        let mut off = nn + self.n_nonneg;
        for &d in &self.soc_dims {
            alpha = alpha.min(soc_step(&u[off..off + d], &du[off..off + d]));
            off += d;
        }
        alpha.max(0.0)
    }

    /// Minimum margin to the cone boundary: min over nonneg components and
    /// per-cone t0 - ||t_1:||. Negative values indicate violation.
    pub fn membership_margin(&self, u: &[f64]) -> f64 {
        let mut margin = f64::INFINITY;
        let nn = self.nonneg_offset();
        for i in nn..nn + self.n_nonneg {
            margin = margin.min(u[i]);
        }
        let mut off = nn + self.n_nonneg;
        for &d in &self.soc_dims {
            let head = u[off];
            let tail = crate::sparse::norm2(&u[off + 1..off + d]);
            margin = margin.min(head - tail);
            off += d;
        }
        margin
    }

    /// Margin for the dual cone: free components must vanish, so their
    /// absolute value is counted against the margin.
    pub fn dual_membership_margin(&self, u: &[f64]) -> f64 {
        let mut margin = self.membership_margin(u);
        for &v in &u[..self.n_free] {
            margin = margin.min(-v.abs());
        }
        margin
    }
}

/// Largest alpha >= 0 with u + alpha*du in the second-order cone,
/// assuming u is strictly interior.
fn soc_step(u: &[f64], du: &[f64]) -> f64 {
    let d = u.len();
    let det_u = soc_det(u);
    debug_assert!(det_u > 0.0 && u[0] > 0.0);
    // f(alpha) = det(u + alpha*du) = a0 + 2*a1*alpha + a2*alpha^2
    let a0 = det_u;
    let mut cross = u[0] * du[0];
    let mut det_du = du[0] * du[0];
    for i in 1..d {
        cross -= u[i] * du[i];
        det_du -= du[i] * du[i];
    }
    let a1 = cross;
    let a2 = det_du;

    let mut alpha = f64::INFINITY;
    if du[0] < 0.0 {
        alpha = alpha.min(-u[0] / du[0]);
    }
    if a2 == 0.0 {
        if a1 < 0.0 {
            alpha = alpha.min(-a0 / (2.0 * a1));
        }
        return alpha;
    }
    let disc = a1 * a1 - a0 * a2;
    if disc < 0.0 {
        // No real root; a2 > 0 here since a2 < 0 forces disc > 0.
        return alpha;
    }
    let sq = disc.sqrt();
    // Stable quadratic roots via the Citardauq form.
    let q = -(a1 + a1.signum() * sq);
    let r1 = q / a2;
    let r2 = if q != 0.0 { a0 / q } else { f64::INFINITY };
    for r in [r1, r2] {
        if r > 0.0 {
            alpha = alpha.min(r);
        }
    }
    alpha
}

/// Jordan determinant of a second-order-cone element.
pub fn soc_det(u: &[f64]) -> f64 {
    let mut d = u[0] * u[0];
    for &v in &u[1..] {
        d -= v * v;
    }
    d
}

/// Jordan product u o v.
pub fn soc_product(u: &[f64], v: &[f64], out: &mut [f64]) {
    let d = u.len();
    let mut dot = 0.0;
    for i in 0..d {
        dot += u[i] * v[i];
    }
    for i in 1..d {
        out[i] = u[0] * v[i] + v[0] * u[i];
    }
    out[0] = dot;
}

/// Jordan inverse: u^{-1} = J u / det(u).
pub fn soc_inverse(u: &[f64], out: &mut [f64]) {
    let det = soc_det(u);
    out[0] = u[0] / det;
    for i in 1..u.len() {
        out[i] = -u[i] / det;
    }
}

/// Jordan square root of an interior element.
pub fn soc_sqrt(u: &[f64], out: &mut [f64]) {
    let det = soc_det(u);
    let s0 = ((u[0] + det.max(0.0).sqrt()) / 2.0).sqrt();
    out[0] = s0;
    for i in 1..u.len() {
        out[i] = u[i] / (2.0 * s0);
    }
}

/// Quadratic representation: P(u) v = 2 u (u^T v) - det(u) J v.
pub fn soc_quad_rep(u: &[f64], v: &[f64], out: &mut [f64]) {
    let d = u.len();
    let det = soc_det(u);
    let mut dot = 0.0;
    for i in 0..d {
        dot += u[i] * v[i];
    }
    out[0] = 2.0 * u[0] * dot - det * v[0];
    for i in 1..d {
        out[i] = 2.0 * u[i] * dot + det * v[i];
    }
}

/// Solve lambda o w = v for w given interior lambda.
pub fn soc_product_solve(lambda: &[f64], v: &[f64], out: &mut [f64]) {
    let d = lambda.len();
    let det = soc_det(lambda);
    let mut tail_dot = 0.0;
    for i in 1..d {
        tail_dot += lambda[i] * v[i];
    }
    let w0 = (lambda[0] * v[0] - tail_dot) / det;
    out[0] = w0;
    for i in 1..d {
        out[i] = (v[i] - w0 * lambda[i]) / lambda[0];
    }
}

/// Nesterov-Todd scaling data for one second-order cone.
#[derive(Debug, Clone)]
pub struct SocScaling {
    /// Scaling point w with P(w) z = x.
    pub w: Vec<f64>,
    /// Jordan square root of w.
    pub w_half: Vec<f64>,
    /// Inverse scaling point v = w^{-1}; P(v) = P(w)^{-1}.
    pub v: Vec<f64>,
    /// v^{1/2} = w^{-1/2}.
    pub v_half: Vec<f64>,
    /// Jordan determinant of v.
    pub det_v: f64,
    /// Scaled point lambda = P(w^{-1/2}) x = P(w^{1/2}) z.
    pub lambda: Vec<f64>,
}

/// Nesterov-Todd scalings for all cone blocks of a layout.
#[derive(Debug, Clone)]
pub struct NtScalings {
    /// Orthant: d_i = z_i / x_i (the KKT diagonal contribution).
    pub orth_d: Vec<f64>,
    /// Orthant scaled point lambda_i = sqrt(x_i z_i).
    pub orth_lambda: Vec<f64>,
    /// Orthant scaling w_i = sqrt(x_i / z_i).
    pub orth_w: Vec<f64>,
    pub socs: Vec<SocScaling>,
}

impl NtScalings {
    pub fn new(layout: &ConeLayout) -> NtScalings {
        NtScalings {
            orth_d: vec![0.0; layout.n_nonneg],
            orth_lambda: vec![0.0; layout.n_nonneg],
            orth_w: vec![0.0; layout.n_nonneg],
            socs: layout
                .soc_dims
                .iter()
                .map(|&d| SocScaling {
                    w: vec![0.0; d],
                    w_half: vec![0.0; d],
                    v: vec![0.0; d],
                    v_half: vec![0.0; d],
                    det_v: 0.0,
                    lambda: vec![0.0; d],
                })
                .collect(),
        }
    }

    /// Recompute all scalings from strictly interior (x, z).
    ///
    /// Returns false if a block is numerically outside its cone.
    pub fn update(&mut self, layout: &ConeLayout, x: &[f64], z: &[f64]) -> bool {
        let nn = layout.nonneg_offset();
        for i in 0..layout.n_nonneg {
            let (xi, zi) = (x[nn + i], z[nn + i]);
            if xi <= 0.0 || zi <= 0.0 {
                return false;
            }
            self.orth_d[i] = zi / xi;
            self.orth_lambda[i] = (xi * zi).sqrt();
            self.orth_w[i] = (xi / zi).sqrt();
        }
        let mut off = nn + layout.n_nonneg;
        for (k, &d) in layout.soc_dims.iter().enumerate() {
            let xb = &x[off..off + d];
            let zb = &z[off..off + d];
            if !update_soc_scaling(xb, zb, &mut self.socs[k]) {
                return false;
            }
            off += d;
        }
        true
    }

    /// Scaled step vector P(w^{-1/2}) dx per cone block (orthant: dx/w).
    pub fn scale_primal(&self, layout: &ConeLayout, dx: &[f64], out: &mut [f64]) {
        out[..layout.n_free].fill(0.0);
        let nn = layout.nonneg_offset();
        for i in 0..layout.n_nonneg {
            out[nn + i] = dx[nn + i] / self.orth_w[i];
        }
        let mut off = nn + layout.n_nonneg;
        for (k, &d) in layout.soc_dims.iter().enumerate() {
            soc_quad_rep(&self.socs[k].v_half, &dx[off..off + d], &mut out[off..off + d]);
            off += d;
        }
    }

    /// Scaled step vector P(w^{1/2}) dz per cone block (orthant: dz*w).
    pub fn scale_dual(&self, layout: &ConeLayout, dz: &[f64], out: &mut [f64]) {
        out[..layout.n_free].fill(0.0);
        let nn = layout.nonneg_offset();
        for i in 0..layout.n_nonneg {
            out[nn + i] = dz[nn + i] * self.orth_w[i];
        }
        let mut off = nn + layout.n_nonneg;
        for (k, &d) in layout.soc_dims.iter().enumerate() {
            soc_quad_rep(&self.socs[k].w_half, &dz[off..off + d], &mut out[off..off + d]);
            off += d;
        }
    }
}

fn update_soc_scaling(x: &[f64], z: &[f64], s: &mut SocScaling) -> bool {
    let d = x.len();
    let det_x = soc_det(x);
    let det_z = soc_det(z);
    if det_x <= 0.0 || det_z <= 0.0 || x[0] <= 0.0 || z[0] <= 0.0 {
        return false;
    }
    let a = det_x.sqrt();
    let b = det_z.sqrt();
    // Normalized points and the NT scaling point.
    let mut dot = 0.0;
    for i in 0..d {
        dot += x[i] / a * (z[i] / b);
    }
    let gamma = ((1.0 + dot) / 2.0).sqrt();
    let eta = (a / b).sqrt();
    s.w[0] = eta * (x[0] / a + z[0] / b) / (2.0 * gamma);
    for i in 1..d {
        s.w[i] = eta * (x[i] / a - z[i] / b) / (2.0 * gamma);
    }
    soc_sqrt(&s.w, &mut s.w_half);
    soc_inverse(&s.w, &mut s.v);
    soc_inverse(&s.w_half, &mut s.v_half);
    s.det_v = soc_det(&s.v);
    soc_quad_rep(&s.v_half, x, &mut s.lambda);
    s.det_v > 0.0 && s.lambda[0].is_finite()
}
