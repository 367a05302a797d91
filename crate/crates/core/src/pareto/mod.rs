//! Bi-objective subset search and selection of the final ensemble.

mod front;
mod search;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use front::{dominates, extract_front, Evaluated, ParetoFront};
pub use search::{search, SearchOutcome};

use crate::error::{GanensError, Result};
use crate::objective::{quota_plan, EnsembleGenome, Objective, ObjectiveVector};
use crate::report::Provenance;

/// Largest pool exhaustive enumeration accepts (`2^20 - 1` genomes).
pub const EXHAUSTIVE_MAX_POOL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchAlgorithm {
    Exhaustive,
    Random,
    #[serde(rename = "nsga2")]
    Evolutionary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub algorithm: SearchAlgorithm,
    /// Evaluation budget; ignored by exhaustive search.
    pub budget: usize,
    pub population: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means `1 / pool size`.
    pub mutation_rate: Option<f64>,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            algorithm: SearchAlgorithm::Evolutionary,
            budget: 1000,
            population: 50,
            crossover_rate: 0.9,
            mutation_rate: None,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn exhaustive() -> Self {
        SearchConfig {
            algorithm: SearchAlgorithm::Exhaustive,
            ..Self::default()
        }
    }

    pub fn validate(&self, pool_size: usize) -> Result<()> {
        match self.algorithm {
            SearchAlgorithm::Exhaustive if pool_size > EXHAUSTIVE_MAX_POOL => {
                return Err(GanensError::param(format!(
                    "exhaustive search is limited to {EXHAUSTIVE_MAX_POOL} generators, pool has {pool_size}"
                )))
            }
            SearchAlgorithm::Exhaustive => return Ok(()),
            _ => {}
        }
        if self.budget == 0 {
            return Err(GanensError::param("budget must be positive"));
        }
        if self.algorithm == SearchAlgorithm::Evolutionary {
            if self.population < 2 {
                return Err(GanensError::param("population must be at least 2"));
            }
            if self.budget < self.population {
                return Err(GanensError::param(format!(
                    "budget {} is smaller than population {}",
                    self.budget, self.population
                )));
            }
        }
        let rates = [Some(self.crossover_rate), self.mutation_rate];
        if rates.iter().flatten().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(GanensError::param("crossover and mutation rates must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Preference used by both selection rules: higher effective Intra-d, then
/// fewer members, then the lexicographically smaller bit vector.
fn preference(a: &Evaluated, b: &Evaluated) -> Ordering {
    b.1.effective_intra()
        .total_cmp(&a.1.effective_intra())
        .then(a.1.member_count.cmp(&b.1.member_count))
        .then(a.0.cmp(&b.0))
}

fn best_of<'a>(entries: impl IntoIterator<Item = &'a Evaluated>) -> Option<&'a Evaluated> {
    entries.into_iter().min_by(|a, b| preference(a, b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    pub id: String,
    pub quota: usize,
}

/// The chosen ensemble, its per-generator quotas and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub chosen: Vec<String>,
    pub bits: String,
    pub quotas: Vec<Quota>,
    pub total: usize,
    pub objectives: ObjectiveVector,
    pub front_size: usize,
    pub provenance: Provenance,
}

impl SelectionManifest {
    pub fn new(
        ids: &[String],
        genome: &EnsembleGenome,
        objectives: ObjectiveVector,
        front_size: usize,
        total: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        genome.check_pool(ids.len())?;
        let quotas = quota_plan(genome, total)?
            .into_iter()
            .map(|(i, quota)| Quota {
                id: ids[i].clone(),
                quota,
            })
            .collect();
        Ok(SelectionManifest {
            chosen: genome.selected().map(|i| ids[i].clone()).collect(),
            bits: genome.to_string(),
            quotas,
            total,
            objectives,
            front_size,
            provenance,
        })
    }

    pub fn genome(&self) -> Result<EnsembleGenome> {
        EnsembleGenome::new(self.bits.chars().map(|c| c == '1').collect())
    }
}

/// Front member with the best effective Intra-d.
pub fn select_best(front: &ParetoFront) -> Result<&Evaluated> {
    best_of(&front.entries).ok_or_else(|| GanensError::param("empty Pareto front"))
}

/// Best effective Intra-d over every evaluated genome, ignoring Inter-d.
pub fn select_uniobjective(archive: &[Evaluated]) -> Result<&Evaluated> {
    best_of(archive).ok_or_else(|| GanensError::param("no evaluated genomes"))
}

/// Multi-objective search followed by [`select_best`].
pub fn multiobjective_search<O: Objective>(objective: &O, cfg: &SearchConfig) -> Result<(SearchOutcome, Evaluated)> {
    let outcome = search(objective, cfg)?;
    let best = select_best(&outcome.front)?.clone();
    Ok((outcome, best))
}

/// Same candidate generation as [`search`], selection by Intra-d alone.
pub fn uniobjective_search<O: Objective>(objective: &O, cfg: &SearchConfig) -> Result<(SearchOutcome, Evaluated)> {
    let outcome = search(objective, cfg)?;
    let best = select_uniobjective(&outcome.archive)?.clone();
    Ok((outcome, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricConfig;

    fn entry(bits: &str, intra: f64, inter: f64) -> Evaluated {
        let g = EnsembleGenome::new(bits.chars().map(|c| c == '1').collect()).unwrap();
        let o = ObjectiveVector {
            intra,
            inter,
            member_count: g.popcount(),
            metric: MetricConfig::default(),
        };
        (g, o)
    }

    #[test]
    fn tie_breaks_on_member_count_then_bits() {
        let front = ParetoFront {
            entries: vec![entry("1110", 0.9, 0.1), entry("0011", 0.9, 0.1), entry("1100", 0.9, 0.1)],
            orientation: crate::metric::Orientation::HigherIsBetter,
        };
        assert_eq!(select_best(&front).unwrap().0.to_string(), "0011");
    }

    #[test]
    fn best_is_max_intra() {
        let archive = vec![entry("100", 0.5, 0.0), entry("011", 0.7, 0.9), entry("111", 0.6, 0.2)];
        let front = extract_front(&archive).unwrap();
        assert_eq!(select_best(&front).unwrap().0.to_string(), "011");
        assert_eq!(select_uniobjective(&archive).unwrap().0.to_string(), "011");
    }

    #[test]
    fn frechet_best_is_lowest_fid() {
        let mut a = entry("10", 12.0, 0.0);
        let mut b = entry("01", 3.0, 0.0);
        a.1.metric = MetricConfig::frechet();
        b.1.metric = MetricConfig::frechet();
        let front = extract_front(&[a, b]).unwrap();
        assert_eq!(select_best(&front).unwrap().1.intra, 3.0);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate(110).is_ok());
        assert!(SearchConfig::exhaustive().validate(21).is_err());
        let small = SearchConfig {
            budget: 10,
            ..SearchConfig::default()
        };
        assert!(small.validate(5).is_err());
        let bad = SearchConfig {
            crossover_rate: 1.5,
            ..SearchConfig::default()
        };
        assert!(bad.validate(5).is_err());
    }

    #[test]
    fn manifest_quotas() {
        let ids: Vec<String> = (0..40).map(|i| format!("g{i:02}")).collect();
        let g = EnsembleGenome::from_indices(40, &(0..38).collect::<Vec<_>>()).unwrap();
        let (_, o) = entry("1", 0.5, 0.1);
        let m = SelectionManifest::new(&ids, &g, o, 3, 4708, Provenance::default()).unwrap();
        assert_eq!(m.quotas.iter().map(|q| q.quota).sum::<usize>(), 4708);
        assert_eq!(m.chosen.len(), 38);
        assert_eq!(m.genome().unwrap(), g);
    }
}
