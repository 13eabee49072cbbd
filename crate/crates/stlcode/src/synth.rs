//! Synthetic data with a known ground-truth dictionary, plus the score that
//! compares a learned basis against it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expfam::Family;

/// Keep |η| inside the well-conditioned range of the discrete families.
fn eta_cap(family: Family) -> Option<f64> {
    match family {
        Family::Gaussian => None,
        Family::Bernoulli => Some(4.0),
        Family::Poisson => Some(2.5),
    }
}

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub seed: u64,
    /// Observation dimension k.
    pub obs_dim: usize,
    /// Number of ground-truth atoms n.
    pub n_basis: usize,
    /// Number of examples m.
    pub examples: usize,
    /// Nonzeros per code row.
    pub sparsity: usize,
    pub family: Family,
    /// Skip sampling and emit the exact means (gaussian only).
    pub noiseless: bool,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    /// k×n, unit-norm columns.
    pub basis_true: DMatrix<f64>,
    /// m×n, `sparsity` nonzeros per row with magnitudes in [0.5, 1.5].
    pub codes_true: DMatrix<f64>,
    /// m×k observations.
    pub x: DMatrix<f64>,
}

/// Draw a ground-truth dictionary, sparse codes, and observations.
pub fn synth_generate(params: &SynthParams) -> Result<SynthData> {
    let SynthParams {
        seed,
        obs_dim: k,
        n_basis: n,
        examples: m,
        sparsity,
        family,
        noiseless,
    } = *params;
    if k == 0 || n == 0 || m == 0 {
        return Err(Error::invalid("dimensions must be at least 1"));
    }
    if sparsity > n {
        return Err(Error::invalid(format!(
            "sparsity {sparsity} exceeds the {n} available atoms"
        )));
    }
    if noiseless && family != Family::Gaussian {
        return Err(Error::invalid(
            "the noiseless variant is only defined for the gaussian family",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = DMatrix::from_fn(k, n, |_, _| {
        let v: f64 = rng.sample(StandardNormal);
        v
    });
    for j in 0..n {
        let norm = basis.column(j).norm();
        basis.column_mut(j).scale_mut(1.0 / norm);
    }

    let mut codes = DMatrix::zeros(m, n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        // partial Fisher-Yates: the first `sparsity` entries are the support
        for t in 0..sparsity {
            let swap = t + rng.random_range(0..n - t);
            pool.swap(t, swap);
        }
        for &j in pool.iter().take(sparsity) {
            let mag = 0.5 + rng.random::<f64>();
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            codes[(i, j)] = mag * sign;
        }
        if let Some(cap) = eta_cap(family) {
            let eta = &basis * codes.row(i).transpose();
            let peak = eta.amax();
            if peak > cap {
                let scale = cap / peak;
                for j in 0..n {
                    codes[(i, j)] *= scale;
                }
            }
        }
    }

    let x = if noiseless {
        &codes * basis.transpose()
    } else {
        let mut x = DMatrix::zeros(m, k);
        for i in 0..m {
            let eta = &basis * codes.row(i).transpose();
            for d in 0..k {
                x[(i, d)] = family.sample(eta[d], &mut rng)?;
            }
        }
        x
    };

    Ok(SynthData {
        basis_true: basis,
        codes_true: codes,
        x,
    })
}

/// Mean |cosine similarity| between true and learned atoms under greedy
/// one-to-one matching; 1.0 means every atom was recovered up to sign and
/// permutation. Zero-norm columns contribute 0.
pub fn dictionary_recovery_score(
    basis_true: &DMatrix<f64>,
    basis_learned: &DMatrix<f64>,
) -> Result<f64> {
    if basis_true.nrows() != basis_learned.nrows() {
        return Err(Error::invalid(format!(
            "row dimensions differ: {} vs {}",
            basis_true.nrows(),
            basis_learned.nrows()
        )));
    }
    let nt = basis_true.ncols();
    let nl = basis_learned.ncols();
    if nt == 0 || nl == 0 {
        return Err(Error::invalid("dictionaries must have columns"));
    }

    let cosine = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        let na = a.norm();
        let nb = b.norm();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            (a.dot(b) / (na * nb)).abs()
        }
    };
    let mut scores = DMatrix::zeros(nt, nl);
    for i in 0..nt {
        let bt: DVector<f64> = basis_true.column(i).into();
        for j in 0..nl {
            let bl: DVector<f64> = basis_learned.column(j).into();
            scores[(i, j)] = cosine(&bt, &bl);
        }
    }

    let pairs = nt.min(nl);
    let mut used_true = vec![false; nt];
    let mut used_learned = vec![false; nl];
    let mut total = 0.0;
    for _ in 0..pairs {
        let mut best = (0usize, 0usize);
        let mut best_score = -1.0;
        for i in 0..nt {
            if used_true[i] {
                continue;
            }
            for j in 0..nl {
                if used_learned[j] {
                    continue;
                }
                // strict > keeps ties at the lexicographically first pair
                if scores[(i, j)] > best_score {
                    best_score = scores[(i, j)];
                    best = (i, j);
                }
            }
        }
        used_true[best.0] = true;
        used_learned[best.1] = true;
        total += best_score;
    }
    Ok(total / pairs as f64)
}
