//! Distribution-quality metrics between a reference set and a candidate set.

mod frechet;
mod knn;
mod manifold;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

pub use frechet::{frechet_distance, gaussian_summary, sqrt_psd, GaussianSummary, EIGEN_CLAMP};
pub use knn::{euclidean, knn_radii, RadiusProfile};
pub use manifold::{coverage, coverage_with, density, density_with, harmonic_d};

use crate::error::{GanensError, Result};
use crate::store::{check_dims, EmbeddingSet};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    /// Harmonic mean of k-NN density and coverage.
    #[serde(rename = "dnc")]
    DensityCoverage,
    /// Fréchet distance between Gaussian fits.
    #[serde(rename = "fid")]
    Frechet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    HigherIsBetter,
    LowerIsBetter,
}

impl Orientation {
    /// Maps a raw metric value onto a "larger is better" axis.
    pub fn effective(self, raw: f64) -> f64 {
        match self {
            Orientation::HigherIsBetter => raw,
            Orientation::LowerIsBetter => -raw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricConfig {
    pub kind: MetricKind,
    /// Neighbour count; only used by [`MetricKind::DensityCoverage`].
    pub k: usize,
    pub orientation: Orientation,
    /// z-score every dimension with the reference's mean and std first.
    #[serde(default)]
    pub standardize: bool,
}

impl MetricConfig {
    pub fn density_coverage(k: usize) -> Self {
        MetricConfig {
            kind: MetricKind::DensityCoverage,
            k,
            orientation: Orientation::HigherIsBetter,
            standardize: false,
        }
    }

    pub fn frechet() -> Self {
        MetricConfig {
            kind: MetricKind::Frechet,
            k: DEFAULT_K,
            orientation: Orientation::LowerIsBetter,
            standardize: false,
        }
    }

    pub fn new(kind: MetricKind, k: usize) -> Self {
        match kind {
            MetricKind::DensityCoverage => Self::density_coverage(k),
            MetricKind::Frechet => MetricConfig { k, ..Self::frechet() },
        }
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            MetricKind::DensityCoverage => Orientation::HigherIsBetter,
            MetricKind::Frechet => Orientation::LowerIsBetter,
        };
        if self.orientation != expected {
            return Err(GanensError::param(format!(
                "{:?} requires orientation {expected:?}",
                self.kind
            )));
        }
        if self.kind == MetricKind::DensityCoverage && self.k == 0 {
            return Err(GanensError::param("k must be at least 1"));
        }
        Ok(())
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self::density_coverage(DEFAULT_K)
    }
}

#[derive(Debug, Clone)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(set: &EmbeddingSet) -> Self {
        let n = set.rows() as f64;
        let d = set.dim();
        let mut mean = vec![0.0; d];
        for row in set.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += f64::from(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in set.iter_rows() {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (f64::from(v) - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / (n - 1.0).max(1.0)).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, set: &EmbeddingSet) -> Result<EmbeddingSet> {
        let d = set.dim();
        let data = set
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| ((f64::from(v) - self.mean[i % d]) / self.scale[i % d]) as f32)
            .collect();
        EmbeddingSet::new(set.source_id(), set.rows(), d, data)
    }
}

#[derive(Debug, Clone)]
enum ReferenceModel {
    Manifold(RadiusProfile),
    Gaussian(GaussianSummary),
}

/// A reference set with its metric-specific precomputation (k-NN radii or
/// Gaussian fit) done once, for scoring many candidates against it.
#[derive(Debug, Clone)]
pub struct PreparedReference {
    cfg: MetricConfig,
    reference: EmbeddingSet,
    standardizer: Option<Standardizer>,
    model: ReferenceModel,
}

impl PreparedReference {
    pub fn new(reference: &EmbeddingSet, cfg: MetricConfig) -> Result<Self> {
        cfg.validate()?;
        let standardizer = cfg.standardize.then(|| Standardizer::fit(reference));
        let reference = match &standardizer {
            Some(s) => s.apply(reference)?,
            None => reference.clone(),
        };
        let model = match cfg.kind {
            MetricKind::DensityCoverage => ReferenceModel::Manifold(knn_radii(&reference, cfg.k)?),
            MetricKind::Frechet => ReferenceModel::Gaussian(gaussian_summary(&reference)?),
        };
        Ok(PreparedReference {
            cfg,
            reference,
            standardizer,
            model,
        })
    }

    pub fn config(&self) -> &MetricConfig {
        &self.cfg
    }

    fn prepare<'c>(&self, candidate: &'c EmbeddingSet) -> Result<Cow<'c, EmbeddingSet>> {
        check_dims(&self.reference, candidate)?;
        Ok(match &self.standardizer {
            Some(s) => Cow::Owned(s.apply(candidate)?),
            None => Cow::Borrowed(candidate),
        })
    }

    /// `(density, coverage)`; only defined for the density/coverage metric.
    pub fn density_coverage(&self, candidate: &EmbeddingSet) -> Result<(f64, f64)> {
        let ReferenceModel::Manifold(radii) = &self.model else {
            return Err(GanensError::param("density/coverage requested from a Fréchet reference"));
        };
        let candidate = self.prepare(candidate)?;
        Ok((
            density_with(&self.reference, radii, &candidate)?,
            coverage_with(&self.reference, radii, &candidate)?,
        ))
    }

    /// Raw metric value `d(reference, candidate)`.
    pub fn score(&self, candidate: &EmbeddingSet) -> Result<f64> {
        match &self.model {
            ReferenceModel::Manifold(_) => {
                let (dns, cvg) = self.density_coverage(candidate)?;
                harmonic_d(dns, cvg)
            }
            ReferenceModel::Gaussian(summary) => {
                let candidate = self.prepare(candidate)?;
                frechet_distance(summary, &gaussian_summary(&candidate)?)
            }
        }
    }
}

/// `d(reference, candidate)`. The reference defines the k-NN balls, so the
/// density/coverage variant is not symmetric in its arguments.
pub fn metric_d(reference: &EmbeddingSet, candidate: &EmbeddingSet, cfg: &MetricConfig) -> Result<f64> {
    check_dims(reference, candidate)?;
    PreparedReference::new(reference, *cfg)?.score(candidate)
}
