//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling
//! and a Mehrotra predictor-corrector step.
//!
//! Solves the embedding of
//!
//! ```text
//! min c'x  s.t.  A x = b,  x in K = R^f x R^p_+ x SOC(d1) x ...
//! ```
//!
//! with variables (x, y, z, tau, kappa). Free components carry no barrier;
//! their dual slack is identically zero and the corresponding KKT rows act
//! as pure equality constraints.

use crate::cone::{soc_product, soc_product_solve, NtScalings};
use crate::kkt::KktSystem;
use crate::sparse::{dot, norm2};
use crate::{ConicProgram, SolveStatus, Solution, SolverConfig};

struct Workspace {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
    // residuals
    rp: Vec<f64>,
    rd: Vec<f64>,
    // directions
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    dx2: Vec<f64>,
    dy2: Vec<f64>,
    // rhs buffers
    r1: Vec<f64>,
    r2: Vec<f64>,
    // scaled step vectors and correction buffers
    scaled_dx: Vec<f64>,
    scaled_dz: Vec<f64>,
    comp_target: Vec<f64>,
    rhs4: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, m: usize) -> Workspace {
        Workspace {
            x: vec![0.0; n],
            y: vec![0.0; m],
            z: vec![0.0; n],
            tau: 1.0,
            kappa: 1.0,
            rp: vec![0.0; m],
            rd: vec![0.0; n],
            dx: vec![0.0; n],
            dy: vec![0.0; m],
            dz: vec![0.0; n],
            dx2: vec![0.0; n],
            dy2: vec![0.0; m],
            r1: vec![0.0; n],
            r2: vec![0.0; m],
            scaled_dx: vec![0.0; n],
            scaled_dz: vec![0.0; n],
            comp_target: vec![0.0; n],
            rhs4: vec![0.0; n],
        }
    }
}


/// Wide-neighborhood centrality test at the trial point
/// (x,z,tau,kappa) + alpha*(dx,dz,dtau,dkappa): every block's
/// complementarity proxy must stay above beta times the new mu.
#[allow(clippy::too_many_arguments)]
fn neighborhood_ok(
    layout: &crate::cone::ConeLayout,
    ws: &Workspace,
    dtau: f64,
    dkappa: f64,
    alpha: f64,
    nu: f64,
    beta: f64,
) -> bool {
    let nn = layout.nonneg_offset();
    let n = ws.x.len();
    let tau_t = ws.tau + alpha * dtau;
    let kap_t = ws.kappa + alpha * dkappa;
    let mut total = tau_t * kap_t;
    for i in nn..n {
        total += (ws.x[i] + alpha * ws.dx[i]) * (ws.z[i] + alpha * ws.dz[i]);
    }
    let mu_t = total / (nu + 1.0);
    if mu_t <= 0.0 {
        return false;
    }
    let thresh = beta * mu_t;
    if tau_t * kap_t < thresh {
        return false;
    }
    for i in nn..nn + layout.n_nonneg {
        if (ws.x[i] + alpha * ws.dx[i]) * (ws.z[i] + alpha * ws.dz[i]) < thresh {
            return false;
        }
    }
    let mut off = nn + layout.n_nonneg;
    for &d in &layout.soc_dims {
        let mut det_x = 0.0;
        let mut det_z = 0.0;
        let mut h = 0.0;
        for r in 0..d {
            let xv = ws.x[off + r] + alpha * ws.dx[off + r];
            let zv = ws.z[off + r] + alpha * ws.dz[off + r];
            let sgn = if r == 0 { 1.0 } else { -1.0 };
            det_x += sgn * xv * xv;
            det_z += sgn * zv * zv;
            h += xv * zv;
        }
        if det_x <= 0.0 || det_z <= 0.0 || h <= 0.0 {
            return false;
        }
        // Smallest eigenvalue of the scaled complementarity product,
        // g^2 / (h + sqrt(h^2 - g^2)) with g the geometric-mean proxy.
        let g2 = det_x * det_z;
        let disc = (h * h - g2).max(0.0);
        let min_eig = g2 / (h + disc.sqrt());
        if min_eig < thresh {
            return false;
        }
        off += d;
    }
    true
}

pub fn solve_ipm(prog: &ConicProgram, config: &SolverConfig) -> Solution {
    let start = std::time::Instant::now();
    let n = prog.num_vars();
    let m = prog.num_rows();
    let layout = prog.cone_layout();
    let a = &prog.a;

    // Normalize b and c so convergence measures are scale-free; the
    // de-homogenized outputs are rescaled at the end.
    let raw_norm_b = norm2(&prog.b);
    let raw_norm_c = norm2(&prog.c);
    let s_b = if raw_norm_b > 0.0 { raw_norm_b } else { 1.0 };
    let s_c = if raw_norm_c > 0.0 { raw_norm_c } else { 1.0 };
    let b: Vec<f64> = prog.b.iter().map(|v| v / s_b).collect();
    let c: Vec<f64> = prog.c.iter().map(|v| v / s_c).collect();
    let b = &b[..];
    let c = &c[..];

    let norm_b = norm2(b);
    let norm_c = norm2(c);
    let nu = layout.degree() as f64;

    let mut ws = Workspace::new(n, m);
    layout.set_identity(&mut ws.x);
    layout.set_identity(&mut ws.z);

    let mut nt = NtScalings::new(&layout);
    let mut kkt = KktSystem::new(a, &layout, config.static_reg, config.refine_steps);

    let mut best = Solution {
        status: SolveStatus::MaxIters,
        x: vec![0.0; n],
        y: vec![0.0; m],
        z: vec![0.0; n],
        objective: f64::NAN,
        gap: f64::INFINITY,
        iterations: 0,
        solve_time: 0.0,
        dynamic_bumps: 0,
    };

    let mut reg_bumped = false;

    for iter in 0..config.max_iters {
        // Residuals of the homogeneous model.
        //   rp = A x - b tau
        //   rd = c tau - A' y - z
        //   rg = kappa + c'x - b'y
        ws.rp.fill(0.0);
        a.gaxpy(1.0, &ws.x, &mut ws.rp);
        for (r, &bi) in ws.rp.iter_mut().zip(b) {
            *r -= bi * ws.tau;
        }
        for (r, &ci) in ws.rd.iter_mut().zip(c) {
            *r = ci * ws.tau;
        }
        a.gaxpy_transpose(-1.0, &ws.y, &mut ws.rd);
        for (r, &zi) in ws.rd.iter_mut().zip(&ws.z) {
            *r -= zi;
        }
        let ctx = dot(c, &ws.x);
        let bty = dot(b, &ws.y);
        let rg = ws.kappa + ctx - bty;

        let mu = (layout.cone_dot(&ws.x, &ws.z) + ws.tau * ws.kappa) / (nu + 1.0);

        // Convergence bookkeeping on the de-homogenized point.
        let tau = ws.tau;
        let pres = norm2(&ws.rp) / tau / (1.0 + norm_b);
        let dres = norm2(&ws.rd) / tau / (1.0 + norm_c);
        let pobj = ctx / tau;
        let dobj = bty / tau;
        let gap_abs = (pobj - dobj).abs();
        let relgap = gap_abs / f64::max(1.0, pobj.abs().min(dobj.abs()));
        let compgap = layout.cone_dot(&ws.x, &ws.z) / (tau * tau);

        best.iterations = iter;
        best.gap = relgap;
        if std::env::var("WTC_TRACE").is_ok() {
            eprintln!("it {iter}: mu {mu:.3e} tau {:.3e} kap {:.3e} pres {pres:.3e} dres {dres:.3e} gap {relgap:.3e} pobj {pobj:.6e}", ws.tau, ws.kappa);
            let mut off = layout.nonneg_offset() + layout.n_nonneg;
            for &d in &layout.soc_dims {
                let dx_ = crate::cone::soc_det(&ws.x[off..off + d]);
                let dz_ = crate::cone::soc_det(&ws.z[off..off + d]);
                eprintln!("   soc dim {d}: det_x {dx_:.3e} det_z {dz_:.3e} x0 {:.3e} z0 {:.3e}", ws.x[off], ws.z[off]);
                off += d;
            }
            let nn = layout.nonneg_offset();
            let mut min_xz = f64::INFINITY;
            for i in nn..nn + layout.n_nonneg {
                min_xz = min_xz.min(ws.x[i].min(ws.z[i]));
            }
            eprintln!("   orth min component {min_xz:.3e}");
        }

        if pres <= config.feas_tol
            && dres <= config.feas_tol
            && (relgap <= config.rel_gap_tol
                || compgap <= config.rel_gap_tol * f64::max(1.0, pobj.abs()))
        {
            finalize(&mut best, &ws, SolveStatus::Optimal, s_b, s_c, &prog.c, kkt_bumps(&kkt));
            best.solve_time = start.elapsed().as_secs_f64();
            return best;
        }

        // Infeasibility certificates.
        if bty > config.feas_tol {
            // y/b'y with A'y + z = 0 proves primal infeasibility.
            let mut atyz = ws.z.clone();
            a.gaxpy_transpose(1.0, &ws.y, &mut atyz);
            if norm2(&atyz) * f64::max(1.0, norm_c) <= config.feas_tol * bty * 1e3
                && ws.tau < 1e-6 * f64::max(1.0, ws.kappa)
            {
                let scale = 1.0 / bty;
                for (o, &v) in best.y.iter_mut().zip(&ws.y) {
                    *o = v * scale;
                }
                for (o, &v) in best.z.iter_mut().zip(&ws.z) {
                    *o = v * scale;
                }
                best.status = SolveStatus::PrimalInfeasible;
                best.objective = f64::INFINITY;
                best.solve_time = start.elapsed().as_secs_f64();
                best.dynamic_bumps = kkt_bumps(&kkt);
                return best;
            }
        }
        if ctx < -config.feas_tol {
            let mut ax = vec![0.0; m];
            a.gaxpy(1.0, &ws.x, &mut ax);
            if norm2(&ax) * f64::max(1.0, norm_b) <= config.feas_tol * (-ctx) * 1e3
                && ws.tau < 1e-6 * f64::max(1.0, ws.kappa)
            {
                let scale = -1.0 / ctx;
                for (o, &v) in best.x.iter_mut().zip(&ws.x) {
                    *o = v * scale;
                }
                best.status = SolveStatus::DualInfeasible;
                best.objective = f64::NEG_INFINITY;
                best.solve_time = start.elapsed().as_secs_f64();
                best.dynamic_bumps = kkt_bumps(&kkt);
                return best;
            }
        }

        // Refresh scalings and refactor.
        let dbg = std::env::var("WTC_DEBUG").is_ok();
        if !nt.update(&layout, &ws.x, &ws.z) {
            if dbg { eprintln!("iter {iter}: NT update failed"); }
            finalize_numerical(&mut best, &ws, s_b, s_c, &prog.c, start, kkt_bumps(&kkt));
            return best;
        }
        let mut ok = kkt.update_and_factor(&nt);
        if !ok && !reg_bumped {
            reg_bumped = true;
            kkt.set_static_reg(kkt.static_reg() * 100.0);
            ok = kkt.update_and_factor(&nt);
        }
        if !ok {
            if dbg { eprintln!("iter {iter}: factor failed"); }
            finalize_numerical(&mut best, &ws, s_b, s_c, &prog.c, start, kkt_bumps(&kkt));
            return best;
        }

        // Constant direction for the tau elimination: M [dx2; dy2] = [-c; -b].
        for (r, &ci) in ws.r1.iter_mut().zip(c) {
            *r = -ci;
        }
        for (r, &bi) in ws.r2.iter_mut().zip(b) {
            *r = -bi;
        }
        kkt.solve(&ws.r1, &ws.r2, &mut ws.dx2, &mut ws.dy2);
        let cdx2 = dot(c, &ws.dx2);
        let bdy2 = dot(b, &ws.dy2);

        // ---- Predictor (affine) direction ----
        // comp target: -lambda o lambda, i.e. rhs4 = -x.
        for i in 0..n {
            ws.r1[i] = -ws.z[i] - ws.rd[i];
        }
        ws.r2.copy_from_slice(&ws.rp);
        let rhs5_aff = -ws.tau * ws.kappa;
        let (dtau_aff, dkappa_aff);
        kkt.solve(&ws.r1, &ws.r2, &mut ws.dx, &mut ws.dy);
        {
            let denom = cdx2 - bdy2 - ws.kappa / ws.tau;
            let num = -rg - dot(c, &ws.dx) + dot(b, &ws.dy) - rhs5_aff / ws.tau;
            if denom.abs() < 1e-300 {
                if dbg { eprintln!("iter {iter}: affine denom zero"); }
                finalize_numerical(&mut best, &ws, s_b, s_c, &prog.c, start, kkt_bumps(&kkt));
                return best;
            }
            dtau_aff = num / denom;
            for i in 0..n {
                ws.dx[i] += dtau_aff * ws.dx2[i];
            }
            for j in 0..m {
                ws.dy[j] += dtau_aff * ws.dy2[j];
            }
            // dz = c dtau - A' dy + rd on cone components, 0 on free.
            for i in 0..n {
                ws.dz[i] = c[i] * dtau_aff + ws.rd[i];
            }
            a.gaxpy_transpose(-1.0, &ws.dy, &mut ws.dz);
            for i in 0..layout.n_free {
                ws.dz[i] = 0.0;
            }
            dkappa_aff = (rhs5_aff - ws.kappa * dtau_aff) / ws.tau;
        }

        let mut alpha_aff = layout.step_to_boundary(&ws.x, &ws.dx, 1.0);
        alpha_aff = alpha_aff.min(layout.step_to_boundary(&ws.z, &ws.dz, 1.0));
        if dtau_aff < 0.0 {
            alpha_aff = alpha_aff.min(-ws.tau / dtau_aff);
        }
        if dkappa_aff < 0.0 {
            alpha_aff = alpha_aff.min(-ws.kappa / dkappa_aff);
        }
        alpha_aff = alpha_aff.min(1.0);

        // Centering parameter from the affine trial point.
        let mu_aff = {
            let mut acc = (ws.tau + alpha_aff * dtau_aff) * (ws.kappa + alpha_aff * dkappa_aff);
            let lo = layout.nonneg_offset();
            for i in lo..n {
                acc += (ws.x[i] + alpha_aff * ws.dx[i]) * (ws.z[i] + alpha_aff * ws.dz[i]);
            }
            acc / (nu + 1.0)
        };
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // ---- Combined (corrector) direction ----
        // Higher-order term in scaled space per cone block. When the
        // combined step collapses, retry as a pure centering step.
        nt.scale_primal(&layout, &ws.dx, &mut ws.scaled_dx);
        nt.scale_dual(&layout, &ws.dz, &mut ws.scaled_dz);
        let mut dtau = 0.0;
        let mut dkappa = 0.0;
        let mut alpha = 0.0;
        let mut direction_ok = false;
        for attempt in 0..2 {
            let (sigma_eff, use_ho) = if attempt == 0 {
                (sigma, true)
            } else {
                (0.8, false)
            };
            // comp_target = sigma*mu*e - lambda o lambda - [scaled_dx o scaled_dz]
            {
                let lo = layout.nonneg_offset();
                for i in lo..lo + layout.n_nonneg {
                    let lam2 = nt.orth_lambda[i - lo] * nt.orth_lambda[i - lo];
                    let hot = if use_ho { ws.scaled_dx[i] * ws.scaled_dz[i] } else { 0.0 };
                    ws.comp_target[i] = sigma_eff * mu - lam2 - hot;
                }
                let mut off = lo + layout.n_nonneg;
                for (k, &d) in layout.soc_dims.iter().enumerate() {
                    let lam = &nt.socs[k].lambda;
                    let mut lam2 = vec![0.0; d];
                    soc_product(lam, lam, &mut lam2);
                    let mut hot = vec![0.0; d];
                    if use_ho {
                        soc_product(
                            &ws.scaled_dx[off..off + d],
                            &ws.scaled_dz[off..off + d],
                            &mut hot,
                        );
                    }
                    for r in 0..d {
                        ws.comp_target[off + r] = -lam2[r] - hot[r];
                    }
                    ws.comp_target[off] += sigma_eff * mu;
                    off += d;
                }
            }
            // rhs4 = P(w^{-1/2}) (lambda \ comp_target)
            {
                let lo = layout.nonneg_offset();
                for i in lo..lo + layout.n_nonneg {
                    let wi = nt.orth_w[i - lo];
                    let u = ws.comp_target[i] / nt.orth_lambda[i - lo];
                    ws.rhs4[i] = u / wi;
                }
                let mut off = lo + layout.n_nonneg;
                for (k, &d) in layout.soc_dims.iter().enumerate() {
                    let sc = &nt.socs[k];
                    let mut u = vec![0.0; d];
                    soc_product_solve(&sc.lambda, &ws.comp_target[off..off + d], &mut u);
                    crate::cone::soc_quad_rep(&sc.v_half, &u, &mut ws.rhs4[off..off + d]);
                    off += d;
                }
            }
            let one_minus_sigma = 1.0 - sigma_eff;
            for i in 0..layout.n_free {
                ws.r1[i] = -one_minus_sigma * ws.rd[i];
            }
            for i in layout.nonneg_offset()..n {
                ws.r1[i] = ws.rhs4[i] - one_minus_sigma * ws.rd[i];
            }
            for j in 0..m {
                ws.r2[j] = one_minus_sigma * ws.rp[j];
            }
            let ho_tau = if use_ho { dtau_aff * dkappa_aff } else { 0.0 };
            let rhs5 = sigma_eff * mu - ws.tau * ws.kappa - ho_tau;
            kkt.solve(&ws.r1, &ws.r2, &mut ws.dx, &mut ws.dy);
            let denom = cdx2 - bdy2 - ws.kappa / ws.tau;
            let num = -one_minus_sigma * rg - dot(c, &ws.dx) + dot(b, &ws.dy) - rhs5 / ws.tau;
            if denom.abs() < 1e-300 || !num.is_finite() {
                if dbg { eprintln!("iter {iter}: corrector denom/num bad: {denom} {num}"); }
                continue;
            }
            dtau = num / denom;
            for i in 0..n {
                ws.dx[i] += dtau * ws.dx2[i];
            }
            for j in 0..m {
                ws.dy[j] += dtau * ws.dy2[j];
            }
            for i in 0..n {
                ws.dz[i] = c[i] * dtau + ws.rd[i];
            }
            a.gaxpy_transpose(-1.0, &ws.dy, &mut ws.dz);
            for i in 0..layout.n_free {
                ws.dz[i] = 0.0;
            }
            dkappa = (rhs5 - ws.kappa * dtau) / ws.tau;

            alpha = layout.step_to_boundary(&ws.x, &ws.dx, f64::INFINITY);
            alpha = alpha.min(layout.step_to_boundary(&ws.z, &ws.dz, f64::INFINITY));
            if dtau < 0.0 {
                alpha = alpha.min(-ws.tau / dtau);
            }
            if dkappa < 0.0 {
                alpha = alpha.min(-ws.kappa / dkappa);
            }
            alpha = (0.99 * alpha).min(1.0);
            if alpha.is_finite() {
                // Backtrack into the wide centrality neighborhood so no
                // block collapses onto its boundary ahead of mu.
                let mut tries = 0;
                while tries < 60
                    && !neighborhood_ok(&layout, &ws, dtau, dkappa, alpha, nu, 1e-5)
                {
                    alpha *= 0.8;
                    tries += 1;
                }
            }
            if alpha.is_finite() && alpha > 1e-8 {
                direction_ok = true;
                break;
            }
            if dbg { eprintln!("iter {iter} attempt {attempt}: alpha {alpha} sigma {sigma_eff} mu {mu} alpha_aff {alpha_aff}"); }
        }
        if !direction_ok && alpha <= 1e-11 {
            finalize_numerical(&mut best, &ws, s_b, s_c, &prog.c, start, kkt_bumps(&kkt));
            return best;
        }

        for i in 0..n {
            ws.x[i] += alpha * ws.dx[i];
            ws.z[i] += alpha * ws.dz[i];
        }
        for j in 0..m {
            ws.y[j] += alpha * ws.dy[j];
        }
        ws.tau += alpha * dtau;
        ws.kappa += alpha * dkappa;
        if ws.tau <= 0.0 || ws.kappa < 0.0 || !ws.tau.is_finite() {
            if dbg { eprintln!("iter {iter}: tau/kappa bad {} {}", ws.tau, ws.kappa); }
            finalize_numerical(&mut best, &ws, s_b, s_c, &prog.c, start, kkt_bumps(&kkt));
            return best;
        }
    }

    // Iteration limit: report the de-homogenized iterate.
    finalize(&mut best, &ws, SolveStatus::MaxIters, s_b, s_c, &prog.c, kkt_bumps(&kkt));
    best.iterations = config.max_iters;
    best.solve_time = start.elapsed().as_secs_f64();
    best
}

fn kkt_bumps(kkt: &KktSystem) -> usize {
    kkt.dynamic_bumps()
}

fn finalize(
    sol: &mut Solution,
    ws: &Workspace,
    status: SolveStatus,
    scale_b: f64,
    scale_c: f64,
    c_orig: &[f64],
    bumps: usize,
) {
    let tau = ws.tau;
    for (o, &v) in sol.x.iter_mut().zip(&ws.x) {
        *o = v * scale_b / tau;
    }
    for (o, &v) in sol.y.iter_mut().zip(&ws.y) {
        *o = v * scale_c / tau;
    }
    for (o, &v) in sol.z.iter_mut().zip(&ws.z) {
        *o = v * scale_c / tau;
    }
    sol.objective = crate::sparse::dot(c_orig, &sol.x);
    sol.status = status;
    sol.dynamic_bumps = bumps;
}

fn finalize_numerical(
    sol: &mut Solution,
    ws: &Workspace,
    scale_b: f64,
    scale_c: f64,
    c_orig: &[f64],
    start: std::time::Instant,
    bumps: usize,
) {
    finalize(sol, ws, SolveStatus::NumericalError, scale_b, scale_c, c_orig, bumps);
    sol.solve_time = start.elapsed().as_secs_f64();
}
