//! Dictionary learning by alternating minimization: encode every example
//! against the current basis, then solve the norm-constrained basis problem
//! with the activations fixed.
//!
//! The basis subproblem under the gaussian model is solved exactly by cyclic
//! block coordinate descent over columns — each column's quadratic is
//! isotropic, so projecting its unconstrained minimizer onto the radius-√C
//! ball is the exact constrained minimizer. Non-gaussian families use
//! projected gradient descent on the family's negative log-likelihood with
//! backtracking and the same column-wise ball projection.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::irls::{self, EncodeConfig};
use crate::threads;

/// Row i holds the activation vector of example i.
pub type ActivationMatrix = DMatrix<f64>;

/// Per-column fixed-point tolerance of [`update_basis`].
const COLUMN_TOL: f64 = 1e-8;

/// Training record carried by a learned dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct DictMeta {
    /// Alternation sweeps executed.
    pub iterations: usize,
    pub final_objective: f64,
    pub seed: u64,
    /// Training objective after each sweep.
    pub sweep_objectives: Vec<f64>,
}

/// A learned basis: columns bⱼ with ‖bⱼ‖² ≤ norm_bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    basis: DMatrix<f64>,
    pub norm_bound: f64,
    pub family: Family,
    /// The L1 penalty the dictionary was trained with.
    pub beta: f64,
    pub meta: DictMeta,
}

impl Dictionary {
    pub fn new(
        basis: DMatrix<f64>,
        norm_bound: f64,
        family: Family,
        beta: f64,
        meta: DictMeta,
    ) -> Result<Self> {
        let (k, n) = basis.shape();
        if k == 0 || n == 0 {
            return Err(Error::invalid("dictionary must have at least one row and column"));
        }
        if !(norm_bound > 0.0) {
            return Err(Error::invalid("norm bound must be positive"));
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dictionary entries must be finite"));
        }
        for j in 0..n {
            let sq = basis.column(j).norm_squared();
            if sq > norm_bound + 1e-9 {
                return Err(Error::invalid(format!(
                    "column {j} has squared norm {sq} above the bound {norm_bound}"
                )));
            }
        }
        Ok(Dictionary {
            basis,
            norm_bound,
            family,
            beta,
            meta,
        })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Observation dimension k.
    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Number of basis vectors n.
    pub fn n_basis(&self) -> usize {
        self.basis.ncols()
    }
}

/// Reconstruction-plus-penalty objective
/// Σᵢ ‖x⁽ⁱ⁾ − B s⁽ⁱ⁾‖² + β Σᵢ ‖s⁽ⁱ⁾‖₁ with examples as rows of `x`.
pub fn dict_objective(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    codes: &ActivationMatrix,
    beta: f64,
) -> Result<f64> {
    check_learn_dims(x, basis, codes)?;
    let residual = x - codes * basis.transpose();
    Ok(residual.norm_squared() + beta * codes.iter().map(|v| v.abs()).sum::<f64>())
}

/// Exact basis update for the gaussian reconstruction term: cyclic
/// block coordinate descent with ball projection, iterated to a per-column
/// fixed point. Columns whose activations are all zero are left unchanged.
pub fn update_basis(
    x: &DMatrix<f64>,
    codes: &ActivationMatrix,
    norm_bound: f64,
    basis_init: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_learn_dims(x, basis_init, codes)?;
    if !(norm_bound > 0.0) {
        return Err(Error::invalid("norm bound must be positive"));
    }
    let (_, n) = basis_init.shape();
    let radius = norm_bound.sqrt();

    let mut basis = basis_init.clone();
    // clamp an infeasible starting point before iterating
    for j in 0..n {
        project_column(&mut basis, j, radius);
    }
    let mut residual = x - codes * basis.transpose();

    let col_sq: Vec<f64> = (0..n).map(|j| codes.column(j).norm_squared()).collect();
    for _pass in 0..1000 {
        let mut delta: f64 = 0.0;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                continue;
            }
            let sj = codes.column(j);
            let old: DVector<f64> = basis.column(j).into();
            // unconstrained minimizer of Σᵢ ‖rᵢ + sᵢⱼ·(old − b)‖² over b
            let mut new = residual.transpose() * sj / col_sq[j] + &old;
            let norm = new.norm();
            if norm > radius {
                new *= radius / norm;
            }
            let diff = &new - &old;
            let step = diff.amax();
            if step > 0.0 {
                // rank-one residual update: r += s_j (old − new)ᵀ
                for i in 0..x.nrows() {
                    let c = codes[(i, j)];
                    if c != 0.0 {
                        for d in 0..x.ncols() {
                            residual[(i, d)] -= c * diff[d];
                        }
                    }
                }
                basis.column_mut(j).copy_from(&new);
            }
            delta = delta.max(step);
        }
        if delta <= COLUMN_TOL {
            break;
        }
    }
    Ok(basis)
}

fn project_column(basis: &mut DMatrix<f64>, j: usize, radius: f64) {
    let norm = basis.column(j).norm();
    if norm > radius {
        let scale = radius / norm;
        basis.column_mut(j).scale_mut(scale);
    }
}

/// Basis update for non-gaussian families: projected gradient descent on
/// 2ΣᵢΣ_d [a((Bs⁽ⁱ⁾)_d) − T(x⁽ⁱ⁾)_d(Bs⁽ⁱ⁾)_d] with backtracking and
/// column-wise ball projection.
fn update_basis_glm(
    family: Family,
    x: &DMatrix<f64>,
    codes: &ActivationMatrix,
    norm_bound: f64,
    basis_init: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_learn_dims(x, basis_init, codes)?;
    let (_, n) = basis_init.shape();
    let radius = norm_bound.sqrt();

    let mut basis = basis_init.clone();
    for j in 0..n {
        project_column(&mut basis, j, radius);
    }

    let loss = |b: &DMatrix<f64>| -> f64 {
        let eta = codes * b.transpose(); // m×k
        let mut total = 0.0;
        for (e, xv) in eta.iter().zip(x.iter()) {
            total += log_partition_raw(family, *e) - xv * e;
        }
        2.0 * total
    };

    let mut current = loss(&basis);
    let mut step = 1.0f64;
    for _iter in 0..500 {
        let eta = codes * basis.transpose();
        let mut mean_gap = DMatrix::zeros(x.nrows(), x.ncols());
        for i in 0..x.nrows() {
            for d in 0..x.ncols() {
                mean_gap[(i, d)] = family.mean(eta[(i, d)])? - x[(i, d)];
            }
        }
        let gradient = 2.0 * mean_gap.transpose() * codes; // k×n

        let mut improved = false;
        for _halving in 0..60 {
            let mut trial = &basis - step * &gradient;
            for j in 0..n {
                project_column(&mut trial, j, radius);
            }
            let trial_loss = loss(&trial);
            if trial_loss < current {
                basis = trial;
                let decrease = current - trial_loss;
                current = trial_loss;
                improved = true;
                step *= 1.2;
                if decrease <= 1e-10 * (1.0 + current.abs()) {
                    return Ok(basis);
                }
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(basis)
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

/// Hyperparameters of [`learn_dictionary`].
#[derive(Debug, Clone)]
pub struct LearnParams {
    pub n_basis: usize,
    pub beta: f64,
    pub norm_bound: f64,
    pub family: Family,
    /// Maximum alternation sweeps.
    pub sweeps: usize,
    pub seed: u64,
    /// Stop when the relative objective decrease per sweep falls to this.
    pub tol: f64,
    /// Per-example encoding stop threshold.
    pub encode_epsilon: f64,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            n_basis: 8,
            beta: 0.1,
            norm_bound: 1.0,
            family: Family::Gaussian,
            sweeps: 50,
            seed: 0,
            tol: 1e-5,
            encode_epsilon: 1e-6,
        }
    }
}

impl LearnParams {
    fn validate(&self) -> Result<()> {
        if self.n_basis == 0 {
            return Err(Error::invalid("n_basis must be at least 1"));
        }
        if !(self.beta > 0.0) || !(self.norm_bound > 0.0) {
            return Err(Error::invalid("beta and norm_bound must be positive"));
        }
        if self.sweeps == 0 {
            return Err(Error::invalid("sweeps must be at least 1"));
        }
        if !(self.tol > 0.0) || !(self.encode_epsilon > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        Ok(())
    }

    fn encode_config(&self) -> EncodeConfig {
        EncodeConfig {
            beta: self.beta,
            epsilon: self.encode_epsilon,
            ..EncodeConfig::default()
        }
    }
}

/// Learn a dictionary from the rows of `x`. Deterministic given the seed;
/// the training objective never increases across sweeps.
pub fn learn_dictionary(
    x: &DMatrix<f64>,
    params: &LearnParams,
) -> Result<(Dictionary, ActivationMatrix)> {
    params.validate()?;
    let (m, k) = x.shape();
    if m == 0 || k == 0 {
        return Err(Error::invalid("training data must be nonempty"));
    }
    params.family.check_domain_all(x.as_slice())?;

    let n = params.n_basis;
    let radius = params.norm_bound.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut basis = DMatrix::from_fn(k, n, |_, _| {
        let v: f64 = rng.sample(StandardNormal);
        v
    });
    for j in 0..n {
        let norm = basis.column(j).norm();
        if norm > 0.0 {
            basis.column_mut(j).scale_mut(radius / norm);
        }
    }

    let mut codes: ActivationMatrix = DMatrix::zeros(m, n);
    let cfg = params.encode_config();
    let threads = threads::row_encode_threads();

    let mut objective = training_objective(params.family, x, &basis, &codes, params.beta);
    let mut sweep_objectives = Vec::new();
    let mut sweeps_done = 0;

    for sweep in 1..=params.sweeps {
        sweeps_done = sweep;
        let rows = threads::map_rows(m, threads, |i| {
            let xi = x.row(i).transpose();
            irls::encode(params.family, &basis, &xi, &cfg).map(|code| code.s)
        })?;
        for (i, s) in rows.into_iter().enumerate() {
            codes.row_mut(i).copy_from(&s.transpose());
        }

        basis = match params.family {
            Family::Gaussian => update_basis(x, &codes, params.norm_bound, &basis)?,
            _ => update_basis_glm(params.family, x, &codes, params.norm_bound, &basis)?,
        };

        let new_objective = training_objective(params.family, x, &basis, &codes, params.beta);
        sweep_objectives.push(new_objective);
        let decrease = (objective - new_objective) / objective.abs().max(1e-12);
        objective = new_objective;
        if decrease <= params.tol {
            break;
        }
    }

    let meta = DictMeta {
        iterations: sweeps_done,
        final_objective: objective,
        seed: params.seed,
        sweep_objectives,
    };
    let dictionary = Dictionary::new(basis, params.norm_bound, params.family, params.beta, meta)?;
    Ok((dictionary, codes))
}

/// The alternation objective: reconstruction form for gaussian data, summed
/// per-example likelihood objective otherwise.
fn training_objective(
    family: Family,
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    codes: &ActivationMatrix,
    beta: f64,
) -> f64 {
    match family {
        Family::Gaussian => {
            let residual = x - codes * basis.transpose();
            residual.norm_squared() + beta * codes.iter().map(|v| v.abs()).sum::<f64>()
        }
        _ => {
            let eta = codes * basis.transpose();
            let mut total = 0.0;
            for (e, xv) in eta.iter().zip(x.iter()) {
                total += log_partition_raw(family, *e) - xv * e;
            }
            2.0 * total + beta * codes.iter().map(|v| v.abs()).sum::<f64>()
        }
    }
}

fn check_learn_dims(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    codes: &ActivationMatrix,
) -> Result<()> {
    let (m, k) = x.shape();
    let (bk, n) = basis.shape();
    if bk != k {
        return Err(Error::invalid(format!(
            "examples have dimension {k} but the basis has {bk} rows"
        )));
    }
    if codes.nrows() != m || codes.ncols() != n {
        return Err(Error::invalid(format!(
            "activations are {}x{} but expected {m}x{n}",
            codes.nrows(),
            codes.ncols()
        )));
    }
    Ok(())
}
