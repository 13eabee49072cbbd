//! Principal-component dimensionality reduction.
//!
//! The covariance eigenproblem is solved with cyclic Jacobi rotations, which
//! is deterministic and plenty for the feature dimensions this crate works
//! at. Components are returned in descending eigenvalue order with a fixed
//! sign convention: the largest-magnitude entry of each component is
//! positive.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A fitted reducer: `transform(x) = components · (x − mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// r×d, rows orthonormal.
    pub components: DMatrix<f64>,
    pub retained: usize,
    /// Covariance eigenvalue per retained component, descending.
    pub explained_variance: Vec<f64>,
}

/// Fit the top-`retained` principal components of the rows of `x`.
///
/// Zero-variance data is not an error: the components are then an arbitrary
/// orthonormal basis (the identity) with eigenvalues 0.
pub fn pca_fit(x: &DMatrix<f64>, retained: usize) -> Result<PcaModel> {
    let (m, d) = x.shape();
    if m < 2 {
        return Err(Error::invalid(format!("pca needs at least 2 rows, got {m}")));
    }
    if retained == 0 || retained > d {
        return Err(Error::invalid(format!(
            "retained components must lie in 1..={d}, got {retained}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("pca input must be finite"));
    }

    let mean = DVector::from_fn(d, |j, _| x.column(j).sum() / m as f64);
    let mut centered = x.clone();
    for i in 0..m {
        for j in 0..d {
            centered[(i, j)] -= mean[j];
        }
    }
    let cov = centered.transpose() * &centered / (m as f64 - 1.0);

    let (eigenvalues, eigenvectors) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).expect("finite"));

    let mut components = DMatrix::zeros(retained, d);
    let mut explained = Vec::with_capacity(retained);
    for (row, &idx) in order.iter().take(retained).enumerate() {
        let mut v: DVector<f64> = eigenvectors.column(idx).into();
        // sign convention: largest-magnitude entry positive, first index
        // winning ties
        let mut lead = 0;
        for j in 1..d {
            if v[j].abs() > v[lead].abs() {
                lead = j;
            }
        }
        if v[lead] < 0.0 {
            v = -v;
        }
        components.row_mut(row).copy_from(&v.transpose());
        explained.push(eigenvalues[idx].max(0.0));
    }

    Ok(PcaModel {
        mean,
        components,
        retained,
        explained_variance: explained,
    })
}

/// Project one observation onto the retained components.
pub fn pca_transform(model: &PcaModel, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != model.mean.len() {
        return Err(Error::invalid(format!(
            "input has length {} but the reducer was fit on dimension {}",
            x.len(),
            model.mean.len()
        )));
    }
    Ok(&model.components * (x - &model.mean))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as columns), unsorted.
fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(d, d);
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1e-300);

    for _sweep in 0..200 {
        let mut off = 0.0f64;
        for p in 0..d {
            for q in (p + 1)..d {
                off = off.max(m[(p, q)].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..d {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for i in 0..d {
                    let mpi = m[(p, i)];
                    let mqi = m[(q, i)];
                    m[(p, i)] = c * mpi - s * mqi;
                    m[(q, i)] = s * mpi + c * mqi;
                }
                for i in 0..d {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    ((0..d).map(|i| m[(i, i)]).collect(), v)
}
