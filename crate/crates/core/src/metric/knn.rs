use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GanensError, Result};
use crate::store::EmbeddingSet;

#[inline]
pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance from each reference point to its k-th nearest other point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusProfile {
    pub reference_id: String,
    pub k: usize,
    pub radii: Vec<f64>,
}

pub fn knn_radii(reference: &EmbeddingSet, k: usize) -> Result<RadiusProfile> {
    let n = reference.rows();
    if k == 0 || k >= n {
        return Err(GanensError::param(format!(
            "k={k} must satisfy 1 <= k < {n} (rows of {})",
            reference.source_id()
        )));
    }
    let radii = (0..n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n - 1),
            |dists, i| {
                dists.clear();
                let xi = reference.row(i);
                dists.extend(
                    reference
                        .iter_rows()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, xj)| euclidean(xi, xj)),
                );
                let (_, kth, _) = dists.select_nth_unstable_by(k - 1, f64::total_cmp);
                *kth
            },
        )
        .collect();
    Ok(RadiusProfile {
        reference_id: reference.source_id().to_owned(),
        k,
        radii,
    })
}
