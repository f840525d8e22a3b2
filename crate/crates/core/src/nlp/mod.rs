//! Sparse nonlinear programming.
//!
//! Problems are stated as
//!
//! ```text
//! min f(z)   s.t.   g_l <= g(z) <= g_u,   z_l <= z <= z_u
//! ```
//!
//! through the [`NlpProblem`] trait. [`solve`] runs a primal-dual
//! interior-point method with a filter line search on a sparse, inertia
//! corrected `L D Lᵀ` factorization of the KKT matrix.

mod derivatives;
mod ipm;
pub mod ldl;
mod small;
mod standard;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use derivatives::{
    color_columns, fd_gradient, fd_jacobian, probe_sparsity, SparsityReport,
};
pub use small::{AutoDiff, SmallProblem, AUTODIFF_MAX_VARIABLES};

/// Failure inside a user callback.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{0}")]
pub struct EvalError(pub String);

impl EvalError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

pub type EvalResult<T> = Result<T, EvalError>;

/// Callback interface of a sparse NLP.
///
/// Implementations must be pure: evaluating at the same point twice gives
/// bit-identical results.
pub trait NlpProblem: Sync {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Lower and upper variable bounds; infinities mark absent bounds.
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, z: &[f64]) -> EvalResult<f64>;
    fn gradient(&self, z: &[f64], grad: &mut [f64]) -> EvalResult<()>;
    fn constraints(&self, z: &[f64], g: &mut [f64]) -> EvalResult<()>;
    /// `(row, column)` pairs; must cover every structurally nonzero entry.
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, z: &[f64], vals: &mut [f64]) -> EvalResult<()>;
    /// Variables the objective depends on. Defaults to all of them.
    fn objective_structure(&self) -> Option<Vec<usize>> {
        None
    }
    /// Lower-triangle pattern of the Lagrangian Hessian, when the problem
    /// can supply it.
    fn hessian_structure(&self) -> Option<Vec<(usize, usize)>> {
        None
    }
    /// Values of `sigma * ∇²f + Σ λ_i ∇²g_i` on [`Self::hessian_structure`].
    fn hessian_values(
        &self,
        _z: &[f64],
        _sigma: f64,
        _lambda: &[f64],
        _vals: &mut [f64],
    ) -> EvalResult<()> {
        Err(EvalError::new("no Hessian callback"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    /// Callback gradients and Jacobians (dual-number based in this crate).
    #[default]
    AnalyticForward,
    /// Central differences over the declared Jacobian pattern.
    FiniteDifference,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub derivative_mode: DerivativeMode,
    pub initial_barrier: f64,
    /// Relative distance the starting point is moved inside its bounds.
    pub bound_push: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 3000,
            derivative_mode: DerivativeMode::AnalyticForward,
            initial_barrier: 0.1,
            bound_push: 1e-2,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), NlpError> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(NlpError::Options(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.initial_barrier > 0.0 && self.initial_barrier.is_finite()) {
            return Err(NlpError::Options("initial barrier must be positive".into()));
        }
        if !(self.bound_push > 0.0 && self.bound_push < 0.5) {
            return Err(NlpError::Options("bound push must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

/// Multipliers in the sign convention `∇f + Jᵀλ − ζ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub constraints: Vec<f64>,
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// One-norm of the scaled constraint residual.
    pub infeasibility: f64,
    /// Scaled dual infeasibility.
    pub stationarity: f64,
    pub barrier: f64,
    pub step_norm: f64,
    pub step_length: f64,
    /// `f`, `h`, `s` (second-order correction), `r` (restoration), `t` (tiny step).
    pub kind: char,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSolution {
    pub z: Vec<f64>,
    pub multipliers: Multipliers,
    pub status: SolveStatus,
    pub objective: f64,
    /// Largest bound violation of `g(z)` and `z`.
    pub feasibility: f64,
    /// See [`residuals`].
    pub stationarity: f64,
    pub objective_scale: f64,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

#[derive(Debug, Error)]
pub enum NlpError {
    #[error("invalid options: {0}")]
    Options(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("inconsistent bounds at {what} {index}: [{lower}, {upper}]")]
    Bounds { what: &'static str, index: usize, lower: f64, upper: f64 },
    #[error("callback failed while evaluating {stage}: {source}")]
    Callback { stage: String, source: EvalError },
    #[error("linear algebra: {0}")]
    Linear(#[from] ldl::LdlError),
}

/// Feasibility and stationarity of `(z, multipliers)`.
///
/// Feasibility is the largest violation of any constraint or variable bound.
/// Stationarity is `s ‖∇f + Jᵀλ − ζ‖∞ / s_d` with `s` the objective scale
/// and `s_d = max(1, s (‖λ‖₁ + ‖ζ‖₁) / (100 (n + m)))`.
pub fn residuals<P: NlpProblem + ?Sized>(
    nlp: &P,
    z: &[f64],
    multipliers: &Multipliers,
    objective_scale: f64,
) -> Result<(f64, f64), NlpError> {
    let n = nlp.num_variables();
    let m = nlp.num_constraints();
    if z.len() != n || multipliers.constraints.len() != m || multipliers.bounds.len() != n {
        return Err(NlpError::Dimension("residual inputs".into()));
    }
    let cb = |stage: &str| {
        let stage = stage.to_string();
        move |source| NlpError::Callback { stage, source }
    };
    let (zl, zu) = nlp.variable_bounds();
    let (gl, gu) = nlp.constraint_bounds();
    let mut g = vec![0.0; m];
    nlp.constraints(z, &mut g).map_err(cb("constraints"))?;
    let mut feas: f64 = 0.0;
    for i in 0..m {
        feas = feas.max(gl[i] - g[i]).max(g[i] - gu[i]);
    }
    for j in 0..n {
        feas = feas.max(zl[j] - z[j]).max(z[j] - zu[j]);
    }
    let mut grad = vec![0.0; n];
    nlp.gradient(z, &mut grad).map_err(cb("gradient"))?;
    let js = nlp.jacobian_structure();
    let mut jv = vec![0.0; js.len()];
    nlp.jacobian_values(z, &mut jv).map_err(cb("jacobian"))?;
    for (&(r, c), v) in js.iter().zip(&jv) {
        grad[c] += v * multipliers.constraints[r];
    }
    let mut stat: f64 = 0.0;
    for j in 0..n {
        stat = stat.max((grad[j] - multipliers.bounds[j]).abs());
    }
    let l1: f64 = multipliers.constraints.iter().chain(&multipliers.bounds).map(|v| v.abs()).sum();
    let sd = (objective_scale * l1 / (100.0 * (n + m).max(1) as f64)).max(1.0);
    Ok((feas.max(0.0), objective_scale * stat / sd))
}

/// Gradient and sparse Jacobian at `z` in the requested mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub gradient: Vec<f64>,
    pub jacobian_structure: Vec<(usize, usize)>,
    pub jacobian_values: Vec<f64>,
}

pub fn derivatives<P: NlpProblem>(nlp: &P, z: &[f64], mode: DerivativeMode) -> Result<Derivatives, NlpError> {
    let n = nlp.num_variables();
    if z.len() != n {
        return Err(NlpError::Dimension(format!("z has length {}, expected {n}", z.len())));
    }
    let structure = nlp.jacobian_structure();
    let cb = |stage: &'static str| move |source| NlpError::Callback { stage: stage.into(), source };
    let (gradient, jacobian_values) = match mode {
        DerivativeMode::AnalyticForward => {
            let mut g = vec![0.0; n];
            nlp.gradient(z, &mut g).map_err(cb("gradient"))?;
            let mut v = vec![0.0; structure.len()];
            nlp.jacobian_values(z, &mut v).map_err(cb("jacobian"))?;
            (g, v)
        }
        DerivativeMode::FiniteDifference => {
            let g = fd_gradient(nlp, z, None).map_err(cb("gradient"))?;
            let colors = color_columns(n, &structure);
            let v = fd_jacobian(nlp, z, &structure, &colors, None).map_err(cb("jacobian"))?;
            (g, v)
        }
    };
    Ok(Derivatives { gradient, jacobian_structure: structure, jacobian_values })
}

/// Solves `nlp` from `z0`.
pub fn solve<P: NlpProblem>(nlp: &P, z0: &[f64], opts: &SolverOptions) -> Result<NlpSolution, NlpError> {
    standard::solve(nlp, z0, opts)
}

/// Writes the iteration log as whitespace-separated columns.
pub fn write_log<W: Write>(records: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{:>5} {:>23} {:>10} {:>10} {:>9} {:>10} {:>10} k", "iter", "objective", "inf_pr", "inf_du", "mu", "|d|", "alpha")?;
    for r in records {
        writeln!(
            out,
            "{:>5} {:>23.16e} {:>10.3e} {:>10.3e} {:>9.2e} {:>10.3e} {:>10.3e} {}",
            r.iteration, r.objective, r.infeasibility, r.stationarity, r.barrier, r.step_norm, r.step_length, r.kind
        )?;
    }
    Ok(())
}
