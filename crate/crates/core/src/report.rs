//! Reporting quantities and output file schemas: provenance, the
//! real-vs-synthetic utility gap, per-source quality rows and Pareto front
//! exports.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GanensError, Result};
use crate::metric::{frechet_distance, gaussian_summary, MetricConfig, PreparedReference};
use crate::objective::{build_union, EnsembleGenome};
use crate::pareto::{Evaluated, ParetoFront, SearchConfig};
use crate::rng;
use crate::store::{EmbeddingSet, Pool};

/// Everything needed to reproduce an output file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Union budget (rows drawn across the ensemble).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise_sample: Option<usize>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Provenance {
            tool: "ganens".into(),
            version: crate::VERSION.into(),
            command: command.into(),
            ..Default::default()
        }
    }
}

/// Downstream utility gap between training on synthetic and on real data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gmean_real: f64,
    pub gmean_synth: f64,
    /// `(synth - real) / real * 100`.
    pub gamma_rs: f64,
}

impl GapReport {
    pub fn new(gmean_real: f64, gmean_synth: f64) -> Result<Self> {
        if !(gmean_real > 0.0 && gmean_real <= 1.0) {
            return Err(GanensError::param(format!("real g-mean must lie in (0, 1], got {gmean_real}")));
        }
        if !(0.0..=1.0).contains(&gmean_synth) {
            return Err(GanensError::param(format!("synthetic g-mean must lie in [0, 1], got {gmean_synth}")));
        }
        Ok(GapReport {
            gmean_real,
            gmean_synth,
            gamma_rs: (gmean_synth - gmean_real) / gmean_real * 100.0,
        })
    }

    /// Gap rounded half away from zero to one decimal, with explicit sign.
    pub fn rounded(&self) -> f64 {
        let r = (self.gamma_rs * 10.0).round() / 10.0;
        if r == 0.0 {
            0.0
        } else {
            r
        }
    }

    pub fn display(&self) -> String {
        let r = self.rounded();
        if r == 0.0 {
            "0.0".into()
        } else {
            format!("{r:+.1}")
        }
    }
}

/// Geometric mean of per-class recalls from a confusion matrix whose rows
/// are true classes and columns predictions.
pub fn gmean_from_confusion(matrix: &[Vec<u64>]) -> Result<f64> {
    let c = matrix.len();
    if c == 0 {
        return Err(GanensError::param("empty confusion matrix"));
    }
    let mut log_sum = 0.0;
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != c {
            return Err(GanensError::param(format!("confusion row {i} has {} entries, expected {c}", row.len())));
        }
        let support: u64 = row.iter().sum();
        if support == 0 {
            return Err(GanensError::param(format!("class {i} has no samples")));
        }
        if row[i] == 0 {
            return Ok(0.0);
        }
        log_sum += (row[i] as f64 / support as f64).ln();
    }
    Ok((log_sum / c as f64).exp())
}

/// One row of the fidelity/diversity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub label: String,
    pub fid: f64,
    pub density: f64,
    pub coverage: f64,
}

/// Scores candidates against the real set with both metric families.
pub struct QualityScorer {
    manifold: PreparedReference,
    real: EmbeddingSet,
}

impl QualityScorer {
    pub fn new(real: &EmbeddingSet, k: usize) -> Result<Self> {
        Ok(QualityScorer {
            manifold: PreparedReference::new(real, MetricConfig::density_coverage(k))?,
            real: real.clone(),
        })
    }

    pub fn row(&self, label: &str, candidate: &EmbeddingSet) -> Result<QualityRow> {
        let (density, coverage) = self.manifold.density_coverage(candidate)?;
        let fid = frechet_distance(&gaussian_summary(&self.real)?, &gaussian_summary(candidate)?)?;
        Ok(QualityRow {
            label: label.into(),
            fid,
            density,
            coverage,
        })
    }
}

/// Rows for every generator (subsampled to at most `|R|` rows), the naive
/// all-generator union and, when given, the selected ensemble's union.
pub fn quality_table(pool: &Pool, selected: Option<&EnsembleGenome>, k: usize, seed: u64) -> Result<Vec<QualityRow>> {
    let scorer = QualityScorer::new(&pool.real, k)?;
    let budget = pool.real.rows();
    let mut rows = Vec::new();
    for g in &pool.generators {
        let set = if g.set.rows() > budget {
            let mut rng = rng::stream(seed, &format!("quality/{}", g.record.id));
            let mut idx = rand::seq::index::sample(&mut rng, g.set.rows(), budget).into_vec();
            idx.sort_unstable();
            g.set.select(g.record.id.clone(), &idx)?
        } else {
            g.set.clone()
        };
        rows.push(scorer.row(&g.record.id, &set)?);
    }
    let all = EnsembleGenome::all(pool.len())?;
    rows.push(scorer.row("naive_all", &build_union(&all, pool, budget, seed)?.set)?);
    if let Some(sel) = selected {
        rows.push(scorer.row("selected", &build_union(sel, pool, budget, seed)?.set)?);
    }
    Ok(rows)
}

pub fn write_quality_csv<W: Write>(rows: &[QualityRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "label,fid,density,coverage")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.label, r.fid, r.density, r.coverage)?;
    }
    Ok(())
}

/// Fidelity-vs-diversity scatter: coverage on the first axis, density on the second.
pub fn write_fidelity_diversity_csv<W: Write>(rows: &[QualityRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "label,diversity,fidelity")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.label, r.coverage, r.density)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEntry {
    pub ids: Vec<String>,
    pub bits: String,
    pub intra: f64,
    pub inter: f64,
    pub member_count: usize,
}

/// Front export: provenance, pool ids, evaluation count and the front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontFile {
    pub provenance: Provenance,
    pub ids: Vec<String>,
    pub evaluations: usize,
    pub front: Vec<FrontEntry>,
}

impl FrontFile {
    pub fn new(provenance: Provenance, ids: Vec<String>, evaluations: usize, front: &ParetoFront) -> Self {
        let front = front
            .entries
            .iter()
            .map(|(g, o)| FrontEntry {
                ids: g.selected().map(|i| ids[i].clone()).collect(),
                bits: g.to_string(),
                intra: o.intra,
                inter: o.inter,
                member_count: o.member_count,
            })
            .collect();
        FrontFile {
            provenance,
            ids,
            evaluations,
            front,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| GanensError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| GanensError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }

    /// Rebuilds the in-memory front; the metric comes from the provenance.
    pub fn to_front(&self) -> Result<ParetoFront> {
        let metric = self.provenance.metric.unwrap_or_default();
        metric.validate()?;
        let entries = self
            .front
            .iter()
            .map(|e| {
                if e.bits.len() != self.ids.len() {
                    return Err(GanensError::param(format!(
                        "front entry {} does not match {} ids",
                        e.bits,
                        self.ids.len()
                    )));
                }
                let g = EnsembleGenome::new(e.bits.chars().map(|c| c == '1').collect())?;
                let o = crate::objective::ObjectiveVector {
                    intra: e.intra,
                    inter: e.inter,
                    member_count: g.popcount(),
                    metric,
                };
                Ok((g, o))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParetoFront {
            entries,
            orientation: metric.orientation,
        })
    }
}

/// Scatter of every evaluated genome: `intra,inter,on_front,member_count`.
pub fn write_scatter_csv<W: Write>(archive: &[Evaluated], front: &ParetoFront, mut w: W) -> std::io::Result<()> {
    let on_front: std::collections::HashSet<&[bool]> = front.entries.iter().map(|(g, _)| g.bits()).collect();
    writeln!(w, "intra,inter,on_front,member_count")?;
    for (g, o) in archive {
        writeln!(
            w,
            "{},{},{},{}",
            o.intra,
            o.inter,
            u8::from(on_front.contains(g.bits())),
            o.member_count
        )?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("output types serialize");
    fs::write(path, text + "\n").map_err(|e| GanensError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_examples() {
        let g = GapReport::new(0.822, 0.867).unwrap();
        assert!((g.gamma_rs - 5.474452554744525).abs() < 1e-12);
        assert_eq!(g.display(), "+5.5");
        assert_eq!(GapReport::new(0.817, 0.755).unwrap().display(), "-7.6");
        assert_eq!(GapReport::new(0.5, 0.5).unwrap().display(), "0.0");
        assert!(GapReport::new(0.0, 0.5).is_err());
        assert!(GapReport::new(-0.2, 0.5).is_err());
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        let r = GapReport {
            gmean_real: 1.0,
            gmean_synth: 1.0,
            gamma_rs: -0.25,
        };
        assert_eq!(r.display(), "-0.3");
        let r = GapReport { gamma_rs: 0.04, ..r };
        assert_eq!(r.display(), "0.0");
    }

    #[test]
    fn gmean_helper() {
        // recalls 0.8 and 0.5
        let g = gmean_from_confusion(&[vec![8, 2], vec![5, 5]]).unwrap();
        assert!((g - (0.4f64).sqrt()).abs() < 1e-12);
        assert_eq!(gmean_from_confusion(&[vec![0, 3], vec![0, 4]]).unwrap(), 0.0);
        assert!(gmean_from_confusion(&[vec![0, 0], vec![1, 1]]).is_err());
        assert!(gmean_from_confusion(&[vec![1, 1, 1], vec![1, 1]]).is_err());
    }
}
