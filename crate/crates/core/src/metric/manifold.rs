//! k-NN manifold estimates: density, coverage and their harmonic mean.
//! Balls are closed, so a point lying exactly on a radius counts as inside.

use rayon::prelude::*;

use super::knn::{euclidean, knn_radii, RadiusProfile};
use crate::error::{GanensError, Result};
use crate::store::{check_dims, EmbeddingSet};

fn check_profile(reference: &EmbeddingSet, radii: &RadiusProfile) -> Result<()> {
    if radii.radii.len() != reference.rows() {
        return Err(GanensError::param(format!(
            "radius profile of {} has {} entries, reference {} has {} rows",
            radii.reference_id,
            radii.radii.len(),
            reference.source_id(),
            reference.rows()
        )));
    }
    Ok(())
}

/// Density against precomputed reference radii.
pub fn density_with(reference: &EmbeddingSet, radii: &RadiusProfile, candidate: &EmbeddingSet) -> Result<f64> {
    check_dims(reference, candidate)?;
    check_profile(reference, radii)?;
    let hits: usize = candidate
        .iter_rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|y| {
            reference
                .iter_rows()
                .zip(&radii.radii)
                .filter(|(x, &r)| euclidean(x, y) <= r)
                .count()
        })
        .sum();
    Ok(hits as f64 / (radii.k as f64 * candidate.rows() as f64))
}

/// Coverage against precomputed reference radii.
pub fn coverage_with(reference: &EmbeddingSet, radii: &RadiusProfile, candidate: &EmbeddingSet) -> Result<f64> {
    check_dims(reference, candidate)?;
    check_profile(reference, radii)?;
    let covered = reference
        .iter_rows()
        .zip(&radii.radii)
        .collect::<Vec<_>>()
        .into_par_iter()
        .filter(|&(x, &r)| candidate.iter_rows().any(|y| euclidean(x, y) <= r))
        .count();
    Ok(covered as f64 / reference.rows() as f64)
}

pub fn density(reference: &EmbeddingSet, candidate: &EmbeddingSet, k: usize) -> Result<f64> {
    check_dims(reference, candidate)?;
    density_with(reference, &knn_radii(reference, k)?, candidate)
}

pub fn coverage(reference: &EmbeddingSet, candidate: &EmbeddingSet, k: usize) -> Result<f64> {
    check_dims(reference, candidate)?;
    coverage_with(reference, &knn_radii(reference, k)?, candidate)
}

/// `2*dns*cvg / (dns+cvg)`, or 0 when both are 0.
pub fn harmonic_d(dns: f64, cvg: f64) -> Result<f64> {
    if !(dns >= 0.0 && cvg >= 0.0) {
        return Err(GanensError::param(format!(
            "harmonic_d needs non-negative inputs, got dns={dns}, cvg={cvg}"
        )));
    }
    if dns == cvg {
        // exact for equal inputs, where the product form can be off by an ulp
        return Ok(dns);
    }
    let sum = dns + cvg;
    Ok(2.0 * dns * cvg / sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f32]) -> EmbeddingSet {
        let rows: Vec<[f32; 1]> = xs.iter().map(|&x| [x]).collect();
        EmbeddingSet::from_rows("line", &rows).unwrap()
    }

    #[test]
    fn density_examples() {
        let r = line(&[0.0, 1.0]);
        assert_eq!(density(&r, &line(&[0.1]), 1).unwrap(), 2.0);
        assert_eq!(density(&r, &r, 1).unwrap(), 2.0);
        assert_eq!(density(&r, &line(&[100.0]), 1).unwrap(), 0.0);
    }

    #[test]
    fn coverage_examples() {
        let r = line(&[0.0, 1.0]);
        assert_eq!(coverage(&r, &r, 1).unwrap(), 1.0);
        assert_eq!(coverage(&r, &line(&[0.1]), 1).unwrap(), 1.0);
        assert_eq!(coverage(&r, &line(&[5.0]), 1).unwrap(), 0.0);
    }

    #[test]
    fn self_coverage_with_duplicates() {
        let r = line(&[3.0, 3.0, 3.0, 9.0]);
        assert_eq!(coverage(&r, &r, 2).unwrap(), 1.0);
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic_d(0.4, 0.4).unwrap(), 0.4);
        assert_eq!(harmonic_d(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(harmonic_d(0.0, 0.0).unwrap(), 0.0);
        // 2 * 0.886 / 1.886
        assert!((harmonic_d(0.886, 1.0).unwrap() - 0.9395546129374338).abs() < 1e-12);
        assert!(harmonic_d(-0.1, 0.5).is_err());
        assert!(harmonic_d(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn dim_mismatch() {
        let a = line(&[0.0, 1.0]);
        let b = EmbeddingSet::from_rows("b", &[[0.0f32, 1.0]]).unwrap();
        assert!(matches!(density(&a, &b, 1), Err(GanensError::DimMismatch { .. })));
    }
}
