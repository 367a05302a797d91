//! Fréchet distance between Gaussian fits of two embedding sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{GanensError, Result};
use crate::store::EmbeddingSet;

/// Eigenvalues below this are treated as zero when taking square roots.
pub const EIGEN_CLAMP: f64 = 1e-10;
const EIGEN_EPS: f64 = 1e-13;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianSummary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column mean and unbiased (N-1) covariance, symmetrised.
pub fn gaussian_summary(set: &EmbeddingSet) -> Result<GaussianSummary> {
    let n = set.rows();
    if n < 2 {
        return Err(GanensError::param(format!(
            "{}: covariance needs at least 2 rows, got {n}",
            set.source_id()
        )));
    }
    let d = set.dim();
    let x = DMatrix::from_row_iterator(n, d, set.data().iter().map(|&v| f64::from(v)));
    let mean = DVector::from_iterator(d, x.column_iter().map(|c| c.sum() / n as f64));
    let mut centered = x;
    for (mut col, &mu) in centered.column_iter_mut().zip(mean.iter()) {
        col.add_scalar_mut(-mu);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let covariance = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianSummary { mean, covariance })
}

fn eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| GanensError::Numeric("symmetric eigensolver did not converge".into()))
}

fn clamp(l: f64) -> f64 {
    if l < EIGEN_CLAMP {
        0.0
    } else {
        l
    }
}

/// Principal square root of a symmetric PSD matrix.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = eigen(sym)?;
    let roots = eig.eigenvalues.map(|l| clamp(l).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// `|mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2))`, clamped at 0.
///
/// `Tr((Sa Sb)^(1/2))` is taken as the sum of square roots of the
/// eigenvalues of `Sa^(1/2) Sb Sa^(1/2)`, which is symmetric PSD and has the
/// same spectrum as `Sa Sb`.
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GanensError::param(format!(
            "frechet_distance: dim {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let sa = sqrt_psd(&a.covariance)?;
    let inner = &sa * &b.covariance * &sa;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_sqrt: f64 = eigen(inner)?.eigenvalues.iter().map(|&l| clamp(l).sqrt()).sum();
    let fd = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * tr_sqrt;
    if !fd.is_finite() {
        return Err(GanensError::Numeric(format!("frechet distance is {fd}")));
    }
    Ok(fd.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(mu: f64, var: f64) -> GaussianSummary {
        GaussianSummary {
            mean: DVector::from_element(1, mu),
            covariance: DMatrix::from_element(1, 1, var),
        }
    }

    #[test]
    fn summary_of_two_points() {
        let s = EmbeddingSet::from_rows("s", &[[0.0f32, 0.0], [2.0, 0.0]]).unwrap();
        let g = gaussian_summary(&s).unwrap();
        assert_eq!(g.mean.as_slice(), &[1.0, 0.0]);
        assert_eq!(g.covariance, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn summary_preconditions() {
        let one = EmbeddingSet::from_rows("s", &[[1.0f32, 2.0]]).unwrap();
        assert!(gaussian_summary(&one).is_err());
        let same = EmbeddingSet::from_rows("s", &[[1.0f32, 2.0]; 5]).unwrap();
        let g = gaussian_summary(&same).unwrap();
        assert!(g.covariance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_cases() {
        assert!((frechet_distance(&scalar(0.0, 1.0), &scalar(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-9);
        assert!((frechet_distance(&scalar(0.0, 4.0), &scalar(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-9);
        assert!(frechet_distance(&scalar(3.0, 2.0), &scalar(3.0, 2.0)).unwrap() < 1e-6);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0, 0.0]));
        let r = sqrt_psd(&m).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((r[(1, 1)] - 3.0).abs() < 1e-12);
        assert!(r[(2, 2)].abs() < 1e-12);
    }

    #[test]
    fn dim_mismatch() {
        let a = scalar(0.0, 1.0);
        let b = GaussianSummary {
            mean: DVector::zeros(2),
            covariance: DMatrix::identity(2, 2),
        };
        assert!(frechet_distance(&a, &b).is_err());
    }
}
