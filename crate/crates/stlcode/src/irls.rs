//! Sparse encoding of a single observation under any supported family.
//!
//! The smooth part of the master objective
//!
//! ```text
//!     F(s) = 2·Σᵢ [a((Bs)ᵢ) − T(x)ᵢ·(Bs)ᵢ] + β‖s‖₁
//! ```
//!
//! is approximated at the current iterate by its second-order Taylor model,
//! which is exactly the weighted least-squares term `‖Λ^{1/2}Bs' − Λ^{1/2}z‖²`
//! with `Λᵢᵢ = a''((Bs)ᵢ)` and `z = Λ⁻¹(T(x) − a'(Bs)) + Bs`. Each iteration
//! solves that weighted lasso with [`crate::lasso`], then backtracks
//! `s := (1−t)s + t·ŝ` until the true objective decreases. For the gaussian
//! family the model is exact (Λ = I, z = x) and one subproblem solve is the
//! whole story.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::lasso::{self, LassoProblem, LassoSolution};

/// Floor for Λ entries; bernoulli curvature underflows for |η| ≳ 40 and the
/// target z divides by Λ.
const WEIGHT_FLOOR: f64 = 1e-12;

/// Knobs of the encoding loop.
#[derive(Debug, Clone)]
pub struct EncodeConfig {
    /// L1 penalty β.
    pub beta: f64,
    /// Stop once the objective decrease of a step falls to this or below.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Line-search shrink factor for t, in (0, 1).
    pub ls_shrink: f64,
    pub ls_max_halvings: usize,
}

impl EncodeConfig {
    pub fn new(beta: f64) -> Self {
        EncodeConfig {
            beta,
            ..EncodeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return Err(Error::invalid("ls_shrink must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            beta: 0.1,
            epsilon: 1e-6,
            max_iter: 100,
            ls_shrink: 0.5,
            ls_max_halvings: 30,
        }
    }
}

/// The activation vector for one observation, with its convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub s: DVector<f64>,
    /// Objective at the zero initialization and after each accepted step;
    /// strictly decreasing from index 1 onward.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// One reweighted iteration: the quadratic model, its lasso solution, and
/// the line-searched update.
#[derive(Debug, Clone)]
pub struct IrlsStep {
    /// Diagonal of Λ (clamped to a positive floor).
    pub weights: DVector<f64>,
    /// Working target z.
    pub target: DVector<f64>,
    /// Solution ŝ of the weighted lasso, warm-started at the current s.
    pub subproblem: LassoSolution,
    /// Accepted step length t; 0 when the step was rejected.
    pub step: f64,
    /// (1−t)s + t·ŝ, or the unchanged s when rejected.
    pub next: DVector<f64>,
    /// False when backtracking exhausted its halvings without a decrease,
    /// which signals convergence (decrease 0) to the caller.
    pub accepted: bool,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// F(s) for a validated observation. Errors if `x` leaves the family domain
/// or the value is not finite.
pub fn master_objective(
    family: Family,
    basis: &DMatrix<f64>,
    x: &DVector<f64>,
    s: &DVector<f64>,
    beta: f64,
) -> Result<f64> {
    check_dims(basis, x, s)?;
    family.check_domain_all(x.as_slice())?;
    let value = objective_raw(family, basis, x, s, beta);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numerical(format!("objective is {value}")))
    }
}

/// Objective evaluation without error plumbing; may return ±inf, which the
/// line search treats as "not a decrease".
fn objective_raw(
    family: Family,
    basis: &DMatrix<f64>,
    x: &DVector<f64>,
    s: &DVector<f64>,
    beta: f64,
) -> f64 {
    let eta = basis * s;
    let mut smooth = 0.0;
    for i in 0..eta.len() {
        smooth += log_partition_raw(family, eta[i]) - x[i] * eta[i];
    }
    2.0 * smooth + beta * s.iter().map(|v| v.abs()).sum::<f64>()
}

fn log_partition_raw(family: Family, eta: f64) -> f64 {
    match family {
        Family::Gaussian => 0.5 * eta * eta,
        Family::Bernoulli => {
            if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            }
        }
        Family::Poisson => eta.exp(),
    }
}

/// Build and solve the quadratic model at `s`, then backtrack to a decrease.
pub fn irls_step(
    family: Family,
    basis: &DMatrix<f64>,
    x: &DVector<f64>,
    s: &DVector<f64>,
    config: &EncodeConfig,
) -> Result<IrlsStep> {
    check_dims(basis, x, s)?;
    family.check_domain_all(x.as_slice())?;
    config.validate()?;
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("current iterate is not finite"));
    }

    let eta = basis * s;
    let k = eta.len();
    let mut weights = DVector::zeros(k);
    let mut target = DVector::zeros(k);
    for i in 0..k {
        let var = family.variance(eta[i])?;
        if !var.is_finite() {
            return Err(Error::numerical(format!(
                "curvature overflow at row {i} (eta = {})",
                eta[i]
            )));
        }
        weights[i] = var.max(WEIGHT_FLOOR);
        target[i] = (x[i] - family.mean(eta[i])?) / weights[i] + eta[i];
        if !target[i].is_finite() {
            return Err(Error::numerical(format!("working target diverged at row {i}")));
        }
    }

    let problem = LassoProblem::new(basis.clone(), target, weights, config.beta)?
        .with_warm_start(s.clone())?;
    let subproblem = lasso::solve_weighted_lasso(
        &problem,
        lasso::DEFAULT_TOL,
        lasso::default_max_steps(basis.ncols()),
    )?;

    let objective_before = objective_raw(family, basis, x, s, config.beta);
    let mut t = 1.0;
    let mut accepted = false;
    let mut next = s.clone();
    let mut objective_after = objective_before;
    for _ in 0..=config.ls_max_halvings {
        let trial = s * (1.0 - t) + &subproblem.s * t;
        let trial_obj = objective_raw(family, basis, x, &trial, config.beta);
        if trial_obj < objective_before {
            accepted = true;
            next = trial;
            objective_after = trial_obj;
            break;
        }
        t *= config.ls_shrink;
    }

    Ok(IrlsStep {
        weights: problem.weights,
        target: problem.target,
        subproblem,
        step: if accepted { t } else { 0.0 },
        next,
        accepted,
        objective_before,
        objective_after,
    })
}

/// Encode one observation: start at s = 0 and iterate [`irls_step`] until
/// the objective decrease per step falls to `epsilon` or `max_iter` is hit.
pub fn encode(
    family: Family,
    basis: &DMatrix<f64>,
    x: &DVector<f64>,
    config: &EncodeConfig,
) -> Result<SparseCode> {
    let (k, n) = basis.shape();
    if k == 0 || n == 0 {
        return Err(Error::invalid("basis must have at least one row and column"));
    }
    config.validate()?;
    check_dims(basis, x, &DVector::zeros(n))?;
    family.check_domain_all(x.as_slice())?;

    let mut s = DVector::zeros(n);
    let mut objective = objective_raw(family, basis, x, &s, config.beta);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=config.max_iter {
        iterations = iter;
        let step = irls_step(family, basis, x, &s, config).map_err(|e| match e {
            Error::Numerical(msg) => Error::numerical(format!("iteration {iter}: {msg}")),
            other => other,
        })?;
        if !step.accepted {
            converged = true;
            break;
        }
        let decrease = objective - step.objective_after;
        s = step.next;
        objective = step.objective_after;
        trace.push(objective);
        if decrease <= config.epsilon {
            converged = true;
            break;
        }
    }

    Ok(SparseCode {
        s,
        objective_trace: trace,
        converged,
        iterations,
    })
}

fn check_dims(basis: &DMatrix<f64>, x: &DVector<f64>, s: &DVector<f64>) -> Result<()> {
    let (k, n) = basis.shape();
    if x.len() != k {
        return Err(Error::invalid(format!(
            "observation has length {} but basis has {k} rows",
            x.len()
        )));
    }
    if s.len() != n {
        return Err(Error::invalid(format!(
            "activation has length {} but basis has {n} columns",
            s.len()
        )));
    }
    Ok(())
}
