//! Synthetic pools with known ground truth: a Gaussian-mixture "real" set
//! and generators that cover chosen modes, with optional extra noise and a
//! drift offset.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::Distribution;
use rand_distr::{StandardNormal, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{GanensError, Result};
use crate::rng::{self, Stream};
use crate::store::{write_embeddings, EmbeddingSet, GeneratorRecord, PoolManifest};

/// Canonical mode-recovery fixture shipped with the crate.
pub const MODE_RECOVERY_FIXTURE: &str = include_str!("../fixtures/mode_recovery.json");
/// Ten-generator fixture small enough for exhaustive comparison.
pub const TEN_POOL_FIXTURE: &str = include_str!("../fixtures/ten_pool.json");

const fn default_real_samples() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub center: Vec<f64>,
    /// Isotropic standard deviation.
    pub spread: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorProfile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default)]
    pub iteration: u64,
    pub modes: Vec<usize>,
    /// Added to each covered mode's spread.
    #[serde(default)]
    pub noise: f64,
    /// Drift vector; empty means no drift.
    #[serde(default)]
    pub offset: Vec<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub modes: Vec<ModeSpec>,
    pub generators: Vec<GeneratorProfile>,
    pub seed: u64,
    #[serde(default = "default_real_samples")]
    pub real_samples: usize,
}

impl ToySpec {
    pub fn parse(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| GanensError::io(path, e))?;
        Self::parse(&text).map_err(|source| GanensError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn mode_recovery() -> Self {
        Self::parse(MODE_RECOVERY_FIXTURE).expect("bundled fixture parses")
    }

    pub fn ten_pool() -> Self {
        Self::parse(TEN_POOL_FIXTURE).expect("bundled fixture parses")
    }

    pub fn dim(&self) -> usize {
        self.modes.first().map(|m| m.center.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        validate_modes(&self.modes)?;
        if self.real_samples == 0 {
            return Err(GanensError::param("real_samples must be positive"));
        }
        let mut ids = HashSet::new();
        for p in &self.generators {
            if !ids.insert(p.id.as_str()) {
                return Err(GanensError::DuplicateGenerator(p.id.clone()));
            }
            validate_profile(p, &self.modes)?;
        }
        Ok(())
    }
}

fn validate_modes(modes: &[ModeSpec]) -> Result<()> {
    let Some(first) = modes.first() else {
        return Err(GanensError::param("at least one mode is required"));
    };
    let d = first.center.len();
    if d == 0 {
        return Err(GanensError::param("mode centers must be nonempty"));
    }
    for (i, m) in modes.iter().enumerate() {
        if m.center.len() != d {
            return Err(GanensError::param(format!("mode {i} has dim {}, expected {d}", m.center.len())));
        }
        if !m.center.iter().all(|v| v.is_finite()) || !(m.spread >= 0.0 && m.spread.is_finite()) {
            return Err(GanensError::param(format!("mode {i} has a non-finite center or invalid spread")));
        }
        if !(m.weight >= 0.0 && m.weight.is_finite()) {
            return Err(GanensError::param(format!("mode {i} has invalid weight {}", m.weight)));
        }
    }
    if modes.iter().map(|m| m.weight).sum::<f64>() <= 0.0 {
        return Err(GanensError::param("mode weights sum to zero"));
    }
    Ok(())
}

fn validate_profile(p: &GeneratorProfile, modes: &[ModeSpec]) -> Result<()> {
    if p.modes.is_empty() {
        return Err(GanensError::param(format!("generator {} covers no modes", p.id)));
    }
    if let Some(&bad) = p.modes.iter().find(|&&m| m >= modes.len()) {
        return Err(GanensError::param(format!(
            "generator {} references unknown mode {bad} ({} modes)",
            p.id,
            modes.len()
        )));
    }
    let d = modes[0].center.len();
    if !p.offset.is_empty() && p.offset.len() != d {
        return Err(GanensError::param(format!("generator {} offset has dim {}, expected {d}", p.id, p.offset.len())));
    }
    if !(p.noise >= 0.0 && p.noise.is_finite()) || !p.offset.iter().all(|v| v.is_finite()) {
        return Err(GanensError::param(format!("generator {} has invalid noise or offset", p.id)));
    }
    if p.samples == 0 {
        return Err(GanensError::param(format!("generator {} emits no samples", p.id)));
    }
    Ok(())
}

fn draw_mixture(
    id: &str,
    modes: &[&ModeSpec],
    n: usize,
    extra_spread: f64,
    offset: &[f64],
    rng: &mut Stream,
) -> Result<EmbeddingSet> {
    let picker = WeightedIndex::new(modes.iter().map(|m| m.weight))
        .map_err(|e| GanensError::param(format!("{id}: mode weights: {e}")))?;
    let d = modes[0].center.len();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mode = modes[picker.sample(rng)];
        let sd = mode.spread + extra_spread;
        for (j, &c) in mode.center.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            let shift = offset.get(j).copied().unwrap_or(0.0);
            data.push((c + sd * z + shift) as f32);
        }
    }
    EmbeddingSet::new(id, n, d, data)
}

/// `n` draws from the full mixture.
pub fn sample_real(modes: &[ModeSpec], n: usize, seed: u64) -> Result<EmbeddingSet> {
    validate_modes(modes)?;
    if n == 0 {
        return Err(GanensError::param("n must be positive"));
    }
    let all: Vec<&ModeSpec> = modes.iter().collect();
    draw_mixture("real", &all, n, 0.0, &[], &mut rng::stream(seed, "toy/real"))
}

/// Draws from the profile's covered modes (weights renormalised), with the
/// spread widened by `noise` and every point shifted by `offset`.
pub fn sample_generator(profile: &GeneratorProfile, modes: &[ModeSpec], seed: u64) -> Result<EmbeddingSet> {
    validate_modes(modes)?;
    validate_profile(profile, modes)?;
    let covered: Vec<&ModeSpec> = profile.modes.iter().map(|&i| &modes[i]).collect();
    let mut rng = rng::stream(seed, &format!("toy/generator/{}", profile.id));
    draw_mixture(&profile.id, &covered, profile.samples, profile.noise, &profile.offset, &mut rng)
}

/// Writes `real.emb`, one `<id>.emb` per profile and `manifest.json` into
/// `out_dir`; returns the manifest path. `seed` overrides the spec's seed.
pub fn emit_pool(spec: &ToySpec, out_dir: &Path, seed: Option<u64>) -> Result<PathBuf> {
    spec.validate()?;
    let seed = seed.unwrap_or(spec.seed);
    fs::create_dir_all(out_dir).map_err(|e| GanensError::io(out_dir, e))?;
    let real = sample_real(&spec.modes, spec.real_samples, seed)?;
    write_embeddings(&real, &out_dir.join("real.emb"))?;
    let mut generators = Vec::with_capacity(spec.generators.len());
    for p in &spec.generators {
        let set = sample_generator(p, &spec.modes, seed)?;
        let file = PathBuf::from(format!("{}.emb", p.id));
        write_embeddings(&set, &out_dir.join(&file))?;
        generators.push(GeneratorRecord {
            id: p.id.clone(),
            model_name: p.model.clone().unwrap_or_else(|| p.id.clone()),
            iteration: p.iteration,
            path: file,
            count: Some(set.rows()),
        });
    }
    let manifest = PoolManifest {
        real: PathBuf::from("real.emb"),
        generators,
        embedding_dim: Some(spec.dim()),
    };
    let path = out_dir.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}
