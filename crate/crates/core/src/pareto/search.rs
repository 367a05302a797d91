//! Candidate generation: exhaustive enumeration, uniform random sampling and
//! a non-dominated-sorting evolutionary loop over bit-string genomes.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;

use super::front::{crowding_distance, extract_front, non_dominated_ranks, Evaluated, ParetoFront};
use super::{SearchAlgorithm, SearchConfig, EXHAUSTIVE_MAX_POOL};
use crate::error::{GanensError, Result};
use crate::objective::{EnsembleGenome, Objective, ObjectiveVector};
use crate::rng::{self, Stream};

/// Re-mutation attempts before falling back to a fresh genome.
const NOVELTY_RETRIES: usize = 64;

/// Every evaluated genome, in evaluation order, plus the front over them.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub archive: Vec<Evaluated>,
    pub front: ParetoFront,
}

fn evaluate_all<O: Objective>(objective: &O, genomes: Vec<EnsembleGenome>) -> Result<Vec<Evaluated>> {
    genomes
        .into_par_iter()
        .map(|g| {
            let o = objective.evaluate(&g)?;
            Ok((g, o))
        })
        .collect()
}

/// Sets one uniformly chosen bit when none is set.
fn repair(bits: &mut [bool], rng: &mut Stream) {
    if !bits.iter().any(|&b| b) {
        let i = rng.random_range(0..bits.len());
        bits[i] = true;
    }
}

fn random_bits(n: usize, rng: &mut Stream) -> Vec<bool> {
    let mut bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    repair(&mut bits, rng);
    bits
}

fn genome(bits: Vec<bool>) -> EnsembleGenome {
    EnsembleGenome::new(bits).expect("repaired genome is nonempty")
}

pub fn search<O: Objective>(objective: &O, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let n = objective.pool_size();
    if n == 0 {
        return Err(GanensError::param("cannot search an empty pool"));
    }
    cfg.validate(n)?;
    let archive = match cfg.algorithm {
        SearchAlgorithm::Exhaustive => exhaustive(objective, n)?,
        SearchAlgorithm::Random => random(objective, n, cfg)?,
        SearchAlgorithm::Evolutionary => Evolution::new(objective, n, cfg).run()?,
    };
    let front = extract_front(&archive)?;
    Ok(SearchOutcome { archive, front })
}

fn exhaustive<O: Objective>(objective: &O, n: usize) -> Result<Vec<Evaluated>> {
    if n > EXHAUSTIVE_MAX_POOL {
        return Err(GanensError::param(format!(
            "exhaustive search is limited to {EXHAUSTIVE_MAX_POOL} generators, pool has {n}"
        )));
    }
    let genomes = (1u64..1 << n)
        .map(|mask| genome((0..n).map(|i| mask >> i & 1 == 1).collect()))
        .collect();
    evaluate_all(objective, genomes)
}

fn random<O: Objective>(objective: &O, n: usize, cfg: &SearchConfig) -> Result<Vec<Evaluated>> {
    let mut rng = rng::stream(cfg.seed, "search/random");
    let genomes = (0..cfg.budget).map(|_| genome(random_bits(n, &mut rng))).collect();
    evaluate_all(objective, genomes)
}

struct Evolution<'o, O> {
    objective: &'o O,
    n: usize,
    cfg: SearchConfig,
    mutation_rate: f64,
    rng: Stream,
    archive: Vec<Evaluated>,
    seen: HashSet<Vec<bool>>,
    /// Next mask to try when falling back to enumeration on small pools.
    scan_cursor: u64,
}

impl<'o, O: Objective> Evolution<'o, O> {
    fn new(objective: &'o O, n: usize, cfg: &SearchConfig) -> Self {
        Evolution {
            objective,
            n,
            cfg: cfg.clone(),
            mutation_rate: cfg.mutation_rate.unwrap_or(1.0 / n as f64),
            rng: rng::stream(cfg.seed, "search/evolutionary"),
            archive: Vec::with_capacity(cfg.budget),
            seen: HashSet::new(),
            scan_cursor: 1,
        }
    }

    fn space_exhausted(&self) -> bool {
        self.n < 64 && self.seen.len() as u64 >= (1u64 << self.n) - 1
    }

    fn is_novel(&self, bits: &[bool], batch: &HashSet<Vec<bool>>) -> bool {
        !self.seen.contains(bits) && !batch.contains(bits)
    }

    /// Returns a genome not yet evaluated, starting from `bits`. Tries a few
    /// single-bit flips, then random genomes, then (on small pools) the first
    /// unevaluated mask in enumeration order.
    fn make_novel(&mut self, mut bits: Vec<bool>, batch: &HashSet<Vec<bool>>) -> Option<Vec<bool>> {
        for _ in 0..NOVELTY_RETRIES {
            if self.is_novel(&bits, batch) {
                return Some(bits);
            }
            let i = self.rng.random_range(0..self.n);
            bits[i] = !bits[i];
            repair(&mut bits, &mut self.rng);
        }
        for _ in 0..NOVELTY_RETRIES {
            let candidate = random_bits(self.n, &mut self.rng);
            if self.is_novel(&candidate, batch) {
                return Some(candidate);
            }
        }
        if self.n <= super::EXHAUSTIVE_MAX_POOL {
            while self.scan_cursor < 1 << self.n {
                let mask = self.scan_cursor;
                self.scan_cursor += 1;
                let candidate: Vec<bool> = (0..self.n).map(|i| mask >> i & 1 == 1).collect();
                if self.is_novel(&candidate, batch) {
                    return Some(candidate);
                }
            }
        }
        None
    }

    fn record(&mut self, batch: Vec<EnsembleGenome>) -> Result<Vec<Evaluated>> {
        let evaluated = evaluate_all(self.objective, batch)?;
        for (g, _) in &evaluated {
            self.seen.insert(g.bits().to_vec());
        }
        self.archive.extend(evaluated.iter().cloned());
        Ok(evaluated)
    }

    fn fresh_batch(&mut self, count: usize, mut propose: impl FnMut(&mut Self) -> Vec<bool>) -> Vec<EnsembleGenome> {
        let mut batch = HashSet::new();
        let mut out = Vec::with_capacity(count);
        while out.len() < count && !self.space_exhausted() {
            let proposal = propose(self);
            let Some(bits) = self.make_novel(proposal, &batch) else {
                break;
            };
            batch.insert(bits.clone());
            out.push(genome(bits));
            if self.n < 64 && (self.seen.len() + batch.len()) as u64 >= (1u64 << self.n) - 1 {
                break;
            }
        }
        out
    }

    fn tournament(&mut self, ranks: &[usize], crowd: &[f64]) -> usize {
        let a = self.rng.random_range(0..ranks.len());
        let b = self.rng.random_range(0..ranks.len());
        let better_b = ranks[b] < ranks[a] || (ranks[b] == ranks[a] && crowd[b] > crowd[a]);
        if better_b {
            b
        } else {
            a
        }
    }

    fn offspring(&mut self, parents: &[Evaluated], ranks: &[usize], crowd: &[f64]) -> Vec<bool> {
        let p1 = self.tournament(ranks, crowd);
        let p2 = self.tournament(ranks, crowd);
        let a = parents[p1].0.bits();
        let b = parents[p2].0.bits();
        let mut child: Vec<bool> = if self.rng.random_bool(self.cfg.crossover_rate) {
            a.iter()
                .zip(b)
                .map(|(&x, &y)| if self.rng.random_bool(0.5) { x } else { y })
                .collect()
        } else {
            a.to_vec()
        };
        for bit in child.iter_mut() {
            if self.rng.random_bool(self.mutation_rate) {
                *bit = !*bit;
            }
        }
        repair(&mut child, &mut self.rng);
        child
    }

    fn run(mut self) -> Result<Vec<Evaluated>> {
        let pop_size = self.cfg.population.min(self.cfg.budget);
        let n = self.n;
        let init = self.fresh_batch(pop_size, |s| random_bits(n, &mut s.rng));
        let mut population = self.record(init)?;

        while self.archive.len() < self.cfg.budget && !self.space_exhausted() && !population.is_empty() {
            let objs: Vec<ObjectiveVector> = population.iter().map(|e| e.1).collect();
            let ranks = non_dominated_ranks(&objs);
            let crowd = crowding_per_member(&objs, &ranks);
            let want = pop_size.min(self.cfg.budget - self.archive.len());
            let parents = population.clone();
            let batch = self.fresh_batch(want, |s| s.offspring(&parents, &ranks, &crowd));
            if batch.is_empty() {
                break;
            }
            let children = self.record(batch)?;
            population.extend(children);
            population = environmental_selection(population, pop_size);
        }
        Ok(self.archive)
    }
}

fn crowding_per_member(objs: &[ObjectiveVector], ranks: &[usize]) -> Vec<f64> {
    let mut crowd = vec![0.0; objs.len()];
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    for r in 0..=max_rank {
        let members: Vec<usize> = (0..objs.len()).filter(|&i| ranks[i] == r).collect();
        for (m, d) in members.iter().zip(crowding_distance(objs, &members)) {
            crowd[*m] = d;
        }
    }
    crowd
}

/// Keeps `size` members: whole fronts by rank, the last partial front by
/// descending crowding distance.
fn environmental_selection(combined: Vec<Evaluated>, size: usize) -> Vec<Evaluated> {
    if combined.len() <= size {
        return combined;
    }
    let objs: Vec<ObjectiveVector> = combined.iter().map(|e| e.1).collect();
    let ranks = non_dominated_ranks(&objs);
    let mut keep: Vec<usize> = Vec::with_capacity(size);
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    for r in 0..=max_rank {
        let members: Vec<usize> = (0..objs.len()).filter(|&i| ranks[i] == r).collect();
        if keep.len() + members.len() <= size {
            keep.extend(&members);
        } else {
            let cd = crowding_distance(&objs, &members);
            let mut order: Vec<usize> = (0..members.len()).collect();
            order.sort_by(|&a, &b| cd[b].total_cmp(&cd[a]).then(a.cmp(&b)));
            keep.extend(order.iter().take(size - keep.len()).map(|&o| members[o]));
        }
        if keep.len() == size {
            break;
        }
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| combined[i].clone()).collect()
}
