//! Native interior-point solver for cone programs in standard form
//!
//! ```text
//! min c'x  s.t.  A x = b,  x in K
//! ```
//!
//! where K is a product of a free block, a nonnegative orthant block, and
//! second-order cones, in that order. The algorithm is a homogeneous
//! self-dual embedding with Nesterov-Todd scaling, a predictor-corrector
//! step, and a sparse quasi-definite LDL^T factorization of the KKT system.

mod cone;
mod ipm;
mod kkt;
mod ldl;
pub mod sparse;
pub mod triplet;

pub use cone::ConeLayout;
pub use sparse::CscMatrix;

use thiserror::Error;

/// Errors raised when a program is structurally invalid.
#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("program has no variables")]
    Empty,
    #[error("equality row {0} has no entries")]
    EmptyRow(usize),
    #[error("second-order cone {0} has dimension {1}, minimum is 1")]
    BadConeDim(usize, usize),
}

/// A cone program in solver standard form.
///
/// Variables are laid out as `[free | nonneg | soc_1 | soc_2 | ...]`.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub c: Vec<f64>,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub n_free: usize,
    pub n_nonneg: usize,
    pub soc_dims: Vec<usize>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.n_free + self.n_nonneg + self.soc_dims.iter().sum::<usize>()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn cone_layout(&self) -> ConeLayout {
        ConeLayout {
            n_free: self.n_free,
            n_nonneg: self.n_nonneg,
            soc_dims: self.soc_dims.clone(),
        }
    }

    /// Check structural invariants: consistent dimensions, no empty
    /// equality rows, positive cone dimensions.
    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.num_vars();
        if n == 0 {
            return Err(ProgramError::Empty);
        }
        if self.c.len() != n {
            return Err(ProgramError::Dimension(format!(
                "objective has {} entries for {} variables",
                self.c.len(),
                n
            )));
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return Err(ProgramError::Dimension(format!(
                "A is {}x{}, expected {}x{}",
                self.a.nrows(),
                self.a.ncols(),
                self.b.len(),
                n
            )));
        }
        for (k, &d) in self.soc_dims.iter().enumerate() {
            if d < 1 {
                return Err(ProgramError::BadConeDim(k, d));
            }
        }
        let counts = self.a.row_counts();
        for (j, &cnt) in counts.iter().enumerate() {
            if cnt == 0 {
                return Err(ProgramError::EmptyRow(j));
            }
        }
        Ok(())
    }
}

/// Solver termination status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIters,
    NumericalError,
}

/// Interior-point configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub rel_gap_tol: f64,
    pub feas_tol: f64,
    pub max_iters: usize,
    pub static_reg: f64,
    pub refine_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iters: 200,
            static_reg: 1e-9,
            refine_steps: 2,
        }
    }
}

/// Solver output: status, primal/dual point, and diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub solve_time: f64,
    pub dynamic_bumps: usize,
}

/// Solve a validated cone program.
pub fn solve(prog: &ConicProgram, config: &SolverConfig) -> Result<Solution, ProgramError> {
    prog.validate()?;
    Ok(ipm::solve_ipm(prog, config))
}

/// Residuals of a candidate solution recomputed from the raw program data,
/// independent of the solver internals.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// ||A x - b||_inf
    pub primal_residual: f64,
    /// ||A'y + z - c||_inf
    pub dual_residual: f64,
    /// Most negative primal cone margin (>= 0 means x in K).
    pub primal_cone_margin: f64,
    /// Most negative dual cone margin (free components must be ~0).
    pub dual_cone_margin: f64,
    /// Complementarity x'z over the cone components.
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl ResidualReport {
    /// True when every residual is within `tol` scaled by the problem data.
    pub fn within(&self, tol: f64, prog: &ConicProgram) -> bool {
        let scale_b = 1.0 + sparse::norm2(&prog.b);
        let scale_c = 1.0 + sparse::norm2(&prog.c);
        self.primal_residual <= tol * scale_b
            && self.dual_residual <= tol * scale_c
            && self.primal_cone_margin >= -tol * scale_b
            && self.dual_cone_margin >= -tol * scale_c
    }
}

/// Recompute residuals for a solution in exact program data.
pub fn certify(prog: &ConicProgram, sol: &Solution) -> ResidualReport {
    let layout = prog.cone_layout();
    let m = prog.num_rows();
    let n = prog.num_vars();
    let mut ax = vec![0.0; m];
    prog.a.gaxpy(1.0, &sol.x, &mut ax);
    let mut pr = 0.0f64;
    for j in 0..m {
        pr = pr.max((ax[j] - prog.b[j]).abs());
    }
    let mut aty_z_c = sol.z.clone();
    prog.a.gaxpy_transpose(1.0, &sol.y, &mut aty_z_c);
    let mut dr = 0.0f64;
    for i in 0..n {
        dr = dr.max((aty_z_c[i] - prog.c[i]).abs());
    }
    ResidualReport {
        primal_residual: pr,
        dual_residual: dr,
        primal_cone_margin: layout.membership_margin(&sol.x),
        dual_cone_margin: layout.dual_membership_margin(&sol.z),
        complementarity: layout.cone_dot(&sol.x, &sol.z),
        primal_objective: sparse::dot(&prog.c, &sol.x),
        dual_objective: sparse::dot(&prog.b, &sol.y),
    }
}
