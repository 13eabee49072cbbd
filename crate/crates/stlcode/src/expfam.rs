//! Exponential-family observation models.
//!
//! Each family is defined by its log-partition function `a(η)`; the mean is
//! `a'(η)`, the variance `a''(η)`, and the natural parameter η is the linear
//! predictor produced by a dictionary, `η = (Bs)ᵢ`. Three canonical families
//! are supported:
//!
//! | family    | a(η)          | mean a'(η) | variance a''(η) | domain               |
//! |-----------|---------------|------------|-----------------|----------------------|
//! | gaussian  | η²/2          | η          | 1               | all reals            |
//! | bernoulli | log(1 + e^η)  | σ(η)       | σ(η)(1 − σ(η))  | {0, 1}               |
//! | poisson   | e^η           | e^η        | e^η             | nonnegative integers |

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// An exponential-family observation model with identity sufficient statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Bernoulli,
    Poisson,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Bernoulli, Family::Poisson];

    /// Human-readable description of the admissible observations.
    pub fn domain_description(&self) -> &'static str {
        match self {
            Family::Gaussian => "all reals",
            Family::Bernoulli => "{0, 1}",
            Family::Poisson => "nonnegative integers",
        }
    }

    /// Log-partition a(η).
    pub fn log_partition(&self, eta: f64) -> Result<f64> {
        check_eta(eta)?;
        Ok(match self {
            Family::Gaussian => 0.5 * eta * eta,
            // log(1 + e^η) = η + log(1 + e^−η) for η > 0 avoids overflow.
            Family::Bernoulli => {
                if eta > 0.0 {
                    eta + (-eta).exp().ln_1p()
                } else {
                    eta.exp().ln_1p()
                }
            }
            Family::Poisson => eta.exp(),
        })
    }

    /// Mean function a'(η): the model's expected observation at η.
    pub fn mean(&self, eta: f64) -> Result<f64> {
        check_eta(eta)?;
        Ok(match self {
            Family::Gaussian => eta,
            Family::Bernoulli => logistic(eta),
            Family::Poisson => eta.exp(),
        })
    }

    /// Variance function a''(η); strictly positive for every finite η.
    pub fn variance(&self, eta: f64) -> Result<f64> {
        check_eta(eta)?;
        Ok(match self {
            Family::Gaussian => 1.0,
            Family::Bernoulli => {
                let p = logistic(eta);
                p * (1.0 - p)
            }
            Family::Poisson => eta.exp(),
        })
    }

    /// Sufficient statistic T(x); the identity map on the data domain.
    pub fn sufficient_stat(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(x)
    }

    /// Whether `x` is an admissible observation for this family.
    pub fn check_domain(&self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::domain(format!(
                "{self} observation {x} is not finite"
            )));
        }
        match self {
            Family::Gaussian => Ok(()),
            Family::Bernoulli => {
                if x == 0.0 || x == 1.0 {
                    Ok(())
                } else {
                    Err(Error::domain(format!(
                        "bernoulli observation {x} is outside {{0, 1}}"
                    )))
                }
            }
            Family::Poisson => {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(())
                } else {
                    Err(Error::domain(format!(
                        "poisson observation {x} is not a nonnegative integer"
                    )))
                }
            }
        }
    }

    /// Validate every entry of a slice against the data domain.
    pub fn check_domain_all(&self, xs: &[f64]) -> Result<()> {
        xs.iter().try_for_each(|&x| self.check_domain(x))
    }

    /// Draw one observation at natural parameter η. Deterministic given the
    /// RNG state; the draw always lies in the data domain.
    pub fn sample<R: Rng>(&self, eta: f64, rng: &mut R) -> Result<f64> {
        check_eta(eta)?;
        Ok(match self {
            Family::Gaussian => {
                let noise: f64 = rng.sample(StandardNormal);
                eta + noise
            }
            Family::Bernoulli => {
                if rng.random::<f64>() < logistic(eta) {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Poisson => sample_poisson(eta.exp(), rng),
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
        };
        f.write_str(name)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "bernoulli" => Ok(Family::Bernoulli),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::invalid(format!(
                "unknown family '{other}' (expected gaussian, bernoulli, or poisson)"
            ))),
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "natural parameter {eta} is not finite"
        )))
    }
}

/// Numerically stable logistic σ(v) = 1/(1 + e^−v).
pub fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Poisson draw: sequential inversion for small means, rounded normal
/// approximation above (adequate for synthetic test data).
fn sample_poisson<R: Rng>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 30.0 {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cum = p;
        while u > cum && k < 1_000_000 {
            k += 1;
            p *= mean / k as f64;
            cum += p;
        }
        k as f64
    } else {
        let noise: f64 = rng.sample(StandardNormal);
        (mean + mean.sqrt() * noise).round().max(0.0)
    }
}
