//! Objective pair for a candidate ensemble: fidelity of the pooled synthetic
//! union to the real set (Intra-d) and mean pairwise overlap between the
//! members (Inter-d).

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GanensError, Result};
use crate::metric::{metric_d, MetricConfig, PreparedReference};
use crate::rng;
use crate::store::{EmbeddingSet, Pool};

/// Inclusion vector over a pool; bit `i` selects `pool.generators[i]`.
/// Always has at least one bit set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnsembleGenome {
    bits: Vec<bool>,
}

impl EnsembleGenome {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if !bits.iter().any(|&b| b) {
            return Err(GanensError::param("empty ensemble"));
        }
        Ok(EnsembleGenome { bits })
    }

    pub fn from_indices(pool_size: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; pool_size];
        for &i in indices {
            if i >= pool_size {
                return Err(GanensError::param(format!("index {i} outside pool of {pool_size}")));
            }
            bits[i] = true;
        }
        Self::new(bits)
    }

    pub fn all(pool_size: usize) -> Result<Self> {
        Self::new(vec![true; pool_size])
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits.get(i).copied().unwrap_or(false)
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn ids<'p>(&self, pool: &'p Pool) -> Vec<&'p str> {
        self.selected().map(|i| pool.generators[i].record.id.as_str()).collect()
    }

    pub(crate) fn check_pool(&self, pool_size: usize) -> Result<()> {
        if self.bits.len() != pool_size {
            return Err(GanensError::param(format!(
                "genome has {} bits, pool has {pool_size} generators",
                self.bits.len()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for EnsembleGenome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `(intra, inter)` for one genome, in the metric's raw units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub intra: f64,
    pub inter: f64,
    pub member_count: usize,
    pub metric: MetricConfig,
}

impl ObjectiveVector {
    /// Intra-d on a "maximise" axis. For Fréchet this is `-FID`.
    pub fn effective_intra(&self) -> f64 {
        self.metric.orientation.effective(self.intra)
    }

    /// Inter-d on a "minimise" axis. For Fréchet this is `-mean pairwise FID`,
    /// so more spread between members is preferred.
    pub fn effective_inter(&self) -> f64 {
        self.metric.orientation.effective(self.inter)
    }
}

/// Splits `total` rows across the selected generators: `total / n` each, with
/// the remainder going one apiece to the earliest selected indices. When
/// `total < n` the trailing members get a quota of 0.
pub fn quota_plan(genome: &EnsembleGenome, total: usize) -> Result<Vec<(usize, usize)>> {
    let n = genome.popcount();
    if total == 0 {
        return Err(GanensError::param("total must be positive"));
    }
    let base = total / n;
    let rem = total % n;
    Ok(genome
        .selected()
        .enumerate()
        .map(|(rank, i)| (i, base + usize::from(rank < rem)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Shortfall {
    pub id: String,
    pub quota: usize,
    pub available: usize,
}

#[derive(Debug, Clone)]
pub struct Union {
    pub set: EmbeddingSet,
    pub quotas: Vec<(usize, usize)>,
    pub shortfalls: Vec<Shortfall>,
}

/// Draws `quota` rows without replacement from one generator, from the stream
/// keyed by `(seed, id)`. Returned indices are ascending.
fn draw(set: &EmbeddingSet, id: &str, quota: usize, seed: u64, purpose: &str) -> Vec<usize> {
    if quota >= set.rows() {
        return (0..set.rows()).collect();
    }
    let mut rng = rng::stream(seed, &format!("{purpose}/{id}"));
    let mut idx = index::sample(&mut rng, set.rows(), quota).into_vec();
    idx.sort_unstable();
    idx
}

/// Pooled synthetic set for an ensemble at a fixed row budget.
pub fn build_union(genome: &EnsembleGenome, pool: &Pool, total: usize, seed: u64) -> Result<Union> {
    genome.check_pool(pool.len())?;
    let quotas = quota_plan(genome, total)?;
    let mut parts = Vec::with_capacity(quotas.len());
    let mut shortfalls = Vec::new();
    for &(i, quota) in quotas.iter().filter(|q| q.1 > 0) {
        let g = &pool.generators[i];
        if g.set.rows() < quota {
            log::warn!(
                "generator {} holds {} rows, quota is {quota}; using all rows",
                g.record.id,
                g.set.rows()
            );
            shortfalls.push(Shortfall {
                id: g.record.id.clone(),
                quota,
                available: g.set.rows(),
            });
        }
        let rows = draw(&g.set, &g.record.id, quota, seed, "union");
        parts.push(g.set.select(g.record.id.clone(), &rows)?);
    }
    let refs: Vec<&EmbeddingSet> = parts.iter().collect();
    Ok(Union {
        set: EmbeddingSet::concat("union", &refs)?,
        quotas,
        shortfalls,
    })
}

/// `d(real, union)` with the union drawn at budget `|real|`.
pub fn intra_d(genome: &EnsembleGenome, pool: &Pool, real: &EmbeddingSet, cfg: &MetricConfig, seed: u64) -> Result<f64> {
    let union = build_union(genome, pool, real.rows(), seed)?;
    metric_d(real, &union.set, cfg)
}

/// Symmetrised pairwise metric between generators:
/// `entry(i, j) = (d(S_i, S_j) + d(S_j, S_i)) / 2`. The diagonal is unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub ids: Vec<String>,
    pub metric: MetricConfig,
    pub seed: u64,
    pub sample_per_generator: usize,
    /// Rows actually compared per generator (`min(sample, N_i)`).
    pub sample_sizes: Vec<usize>,
    values: Vec<f64>,
}

impl PairwiseMatrix {
    /// Builds a matrix from explicit upper-triangle entries, mainly for tests
    /// and for feeding externally computed overlaps.
    pub fn from_entries(ids: Vec<String>, metric: MetricConfig, entries: &[((usize, usize), f64)]) -> Result<Self> {
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        for &((i, j), v) in entries {
            if i >= n || j >= n || i == j {
                return Err(GanensError::param(format!("bad pair ({i}, {j}) for {n} generators")));
            }
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
        Ok(PairwiseMatrix {
            ids,
            metric,
            seed: 0,
            sample_per_generator: 0,
            sample_sizes: vec![0; n],
            values,
        })
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }

    /// CSV with a header row of ids; the diagonal is left blank.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "id")?;
        for id in &self.ids {
            write!(w, ",{id}")?;
        }
        writeln!(w)?;
        for (i, id) in self.ids.iter().enumerate() {
            write!(w, "{id}")?;
            for j in 0..self.size() {
                if i == j {
                    write!(w, ",")?;
                } else {
                    write!(w, ",{}", self.get(i, j))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Parses a CSV written by [`PairwiseMatrix::write_csv`].
    pub fn read_csv(path: &Path, metric: MetricConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GanensError::io(path, e))?;
        let csv_err = |line: usize, message: String| GanensError::Csv {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| csv_err(1, "missing header".into()))?;
        let ids: Vec<String> = header.split(',').skip(1).map(str::to_owned).collect();
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        for (i, line) in lines.enumerate() {
            if i >= n {
                return Err(csv_err(i + 2, "more rows than ids".into()));
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != n + 1 || cells[0] != ids[i] {
                return Err(csv_err(i + 2, "row does not match header".into()));
            }
            for (j, cell) in cells[1..].iter().enumerate() {
                if i != j {
                    values[i * n + j] = cell
                        .parse()
                        .map_err(|e| csv_err(i + 2, format!("cannot parse {cell:?}: {e}")))?;
                }
            }
        }
        Ok(PairwiseMatrix {
            ids,
            metric,
            seed: 0,
            sample_per_generator: 0,
            sample_sizes: vec![0; n],
            values,
        })
    }
}

/// Default per-generator sample for pairwise entries: smallest generator,
/// capped at the real-set size.
pub fn default_pairwise_sample(pool: &Pool) -> usize {
    pool.generators
        .iter()
        .map(|g| g.set.rows())
        .min()
        .unwrap_or(0)
        .min(pool.real.rows())
}

pub fn pairwise_matrix(pool: &Pool, cfg: &MetricConfig, sample_per_generator: usize, seed: u64) -> Result<PairwiseMatrix> {
    cfg.validate()?;
    if sample_per_generator == 0 {
        return Err(GanensError::param("sample_per_generator must be positive"));
    }
    let samples = pool
        .generators
        .par_iter()
        .map(|g| {
            let rows = draw(&g.set, &g.record.id, sample_per_generator, seed, "pairwise");
            g.set.select(g.record.id.clone(), &rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let prepared = samples
        .par_iter()
        .map(|s| PreparedReference::new(s, *cfg))
        .collect::<Result<Vec<_>>>()?;
    let n = pool.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let entries = pairs
        .par_iter()
        .map(|&(i, j)| {
            let ij = prepared[i].score(&samples[j])?;
            let ji = prepared[j].score(&samples[i])?;
            Ok((i, j, (ij + ji) / 2.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; n * n];
    for (i, j, v) in entries {
        values[i * n + j] = v;
        values[j * n + i] = v;
    }
    Ok(PairwiseMatrix {
        ids: pool.ids().into_iter().map(str::to_owned).collect(),
        metric: *cfg,
        seed,
        sample_per_generator,
        sample_sizes: samples.iter().map(EmbeddingSet::rows).collect(),
        values,
    })
}

/// Mean symmetrised entry over distinct selected pairs; 0 for a singleton.
pub fn inter_d(genome: &EnsembleGenome, matrix: &PairwiseMatrix) -> Result<f64> {
    genome.check_pool(matrix.size())?;
    let sel: Vec<usize> = genome.selected().collect();
    let n = sel.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (a, &i) in sel.iter().enumerate() {
        for &j in &sel[a + 1..] {
            sum += matrix.get(i, j);
        }
    }
    Ok(sum / (n * (n - 1) / 2) as f64)
}

/// Anything that scores genomes over a fixed pool.
pub trait Objective: Sync {
    fn pool_size(&self) -> usize;
    fn metric(&self) -> MetricConfig;
    fn evaluate(&self, genome: &EnsembleGenome) -> Result<ObjectiveVector>;
}

/// Scores genomes over a loaded pool. Intra-d results are memoised by genome.
pub struct Evaluator<'p> {
    pool: &'p Pool,
    reference: PreparedReference,
    matrix: PairwiseMatrix,
    seed: u64,
    total: usize,
    memoize: bool,
    cache: RwLock<HashMap<Vec<bool>, f64>>,
    evaluations: AtomicUsize,
}

impl<'p> Evaluator<'p> {
    /// Evaluator with the default pairwise sample and union budget `|real|`.
    pub fn new(pool: &'p Pool, cfg: MetricConfig, seed: u64) -> Result<Self> {
        let matrix = pairwise_matrix(pool, &cfg, default_pairwise_sample(pool), seed)?;
        Self::with_matrix(pool, matrix, seed, pool.real.rows())
    }

    pub fn with_matrix(pool: &'p Pool, matrix: PairwiseMatrix, seed: u64, total: usize) -> Result<Self> {
        if matrix.size() != pool.len() {
            return Err(GanensError::param(format!(
                "pairwise matrix covers {} generators, pool has {}",
                matrix.size(),
                pool.len()
            )));
        }
        if total == 0 {
            return Err(GanensError::param("union budget must be positive"));
        }
        let reference = PreparedReference::new(&pool.real, matrix.metric)?;
        Ok(Evaluator {
            pool,
            reference,
            matrix,
            seed,
            total,
            memoize: true,
            cache: RwLock::new(HashMap::new()),
            evaluations: AtomicUsize::new(0),
        })
    }

    pub fn without_memo(mut self) -> Self {
        self.memoize = false;
        self
    }

    pub fn pool(&self) -> &'p Pool {
        self.pool
    }

    pub fn matrix(&self) -> &PairwiseMatrix {
        &self.matrix
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Number of `evaluate` calls so far, cache hits included.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn union(&self, genome: &EnsembleGenome) -> Result<Union> {
        build_union(genome, self.pool, self.total, self.seed)
    }

    pub fn intra_d(&self, genome: &EnsembleGenome) -> Result<f64> {
        genome.check_pool(self.pool.len())?;
        if self.memoize {
            if let Some(&v) = self.cache.read().unwrap().get(genome.bits()) {
                return Ok(v);
            }
        }
        let v = self.reference.score(&self.union(genome)?.set)?;
        if self.memoize {
            self.cache.write().unwrap().insert(genome.bits().to_vec(), v);
        }
        Ok(v)
    }

    pub fn inter_d(&self, genome: &EnsembleGenome) -> Result<f64> {
        inter_d(genome, &self.matrix)
    }
}

impl Objective for Evaluator<'_> {
    fn pool_size(&self) -> usize {
        self.pool.len()
    }

    fn metric(&self) -> MetricConfig {
        self.matrix.metric
    }

    fn evaluate(&self, genome: &EnsembleGenome) -> Result<ObjectiveVector> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let intra = self.intra_d(genome)?;
        let inter = self.inter_d(genome)?;
        if !intra.is_finite() || !inter.is_finite() {
            return Err(GanensError::Numeric(format!(
                "non-finite objective ({intra}, {inter}) for {genome}"
            )));
        }
        Ok(ObjectiveVector {
            intra,
            inter,
            member_count: genome.popcount(),
            metric: self.matrix.metric,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::GeneratorRecord;
    use std::path::PathBuf;

    fn line(id: &str, xs: &[f32]) -> EmbeddingSet {
        let rows: Vec<[f32; 1]> = xs.iter().map(|&x| [x]).collect();
        EmbeddingSet::from_rows(id, &rows).unwrap()
    }

    fn rec(id: &str) -> GeneratorRecord {
        GeneratorRecord {
            id: id.into(),
            model_name: id.into(),
            iteration: 0,
            path: PathBuf::new(),
            count: None,
        }
    }

    fn pool(real: EmbeddingSet, gens: Vec<(&str, EmbeddingSet)>) -> Pool {
        Pool::new(real, gens.into_iter().map(|(id, s)| (rec(id), s)).collect()).unwrap()
    }

    #[test]
    fn quotas() {
        let g = EnsembleGenome::from_indices(5, &[0, 2, 4]).unwrap();
        assert_eq!(quota_plan(&g, 100).unwrap(), vec![(0, 34), (2, 33), (4, 33)]);
        let g = EnsembleGenome::from_indices(5, &[3]).unwrap();
        assert_eq!(quota_plan(&g, 100).unwrap(), vec![(3, 100)]);
        let g = EnsembleGenome::all(38).unwrap();
        let q = quota_plan(&g, 4708).unwrap();
        assert_eq!(q.iter().map(|p| p.1).sum::<usize>(), 4708);
        assert_eq!(q.iter().filter(|p| p.1 == 124).count(), 34);
        assert_eq!(q.iter().filter(|p| p.1 == 123).count(), 4);
        let q = quota_plan(&g, 37).unwrap();
        assert_eq!(q.iter().filter(|p| p.1 == 1).count(), 37);
        assert_eq!(q[37], (37, 0));
        assert!(quota_plan(&g, 0).is_err());
    }

    #[test]
    fn empty_genome_rejected() {
        assert!(EnsembleGenome::new(vec![false; 3]).is_err());
        assert!(EnsembleGenome::from_indices(3, &[3]).is_err());
    }

    #[test]
    fn union_quota_and_determinism() {
        let a = line("a", &(0..10).map(|v| v as f32).collect::<Vec<_>>());
        let b = line("b", &(0..10).map(|v| 100.0 + v as f32).collect::<Vec<_>>());
        let p = pool(a.clone(), vec![("a", a), ("b", b)]);
        let g = EnsembleGenome::all(2).unwrap();
        let u = build_union(&g, &p, 10, 7).unwrap();
        assert_eq!(u.set.rows(), 10);
        assert_eq!(u.set.data().iter().filter(|&&v| v < 50.0).count(), 5);
        assert!(u.shortfalls.is_empty());
        let again = build_union(&g, &p, 10, 7).unwrap();
        assert_eq!(u.set, again.set);
    }

    #[test]
    fn union_shortfall() {
        let a = line("a", &[0.0, 1.0, 2.0]);
        let p = pool(line("r", &[0.0; 10]), vec![("a", a.clone()), ("b", line("b", &[5.0; 5]))]);
        let g = EnsembleGenome::all(2).unwrap();
        let u = build_union(&g, &p, 10, 1).unwrap();
        assert_eq!(u.set.rows(), 8);
        assert_eq!(
            u.shortfalls,
            vec![Shortfall {
                id: "a".into(),
                quota: 5,
                available: 3
            }]
        );
    }

    #[test]
    fn intra_of_exact_copy() {
        let r = line("r", &[0.0, 1.0]);
        let p = pool(r.clone(), vec![("copy", r.clone()), ("far", line("far", &[40.0, 41.0]))]);
        let cfg = MetricConfig::density_coverage(1);
        let copy = EnsembleGenome::from_indices(2, &[0]).unwrap();
        let far = EnsembleGenome::from_indices(2, &[1]).unwrap();
        assert!((intra_d(&copy, &p, &r, &cfg, 3).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(intra_d(&far, &p, &r, &cfg, 3).unwrap(), 0.0);
    }

    #[test]
    fn inter_examples() {
        let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let m = PairwiseMatrix::from_entries(
            ids,
            MetricConfig::default(),
            &[((1, 2), 0.2), ((1, 3), 0.4), ((2, 3), 0.6), ((0, 1), 0.5)],
        )
        .unwrap();
        let g = EnsembleGenome::from_indices(4, &[1, 2, 3]).unwrap();
        assert!((inter_d(&g, &m).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(inter_d(&EnsembleGenome::from_indices(4, &[2]).unwrap(), &m).unwrap(), 0.0);
        assert_eq!(inter_d(&EnsembleGenome::from_indices(4, &[0, 1]).unwrap(), &m).unwrap(), 0.5);
        assert!(inter_d(&EnsembleGenome::all(3).unwrap(), &m).is_err());
    }

    #[test]
    fn pairwise_duplicate_and_far() {
        let s = line("s", &[0.0, 1.0, 2.5, 4.0]);
        let p = pool(
            s.clone(),
            vec![("x", s.clone()), ("y", s.clone()), ("z", line("z", &[90.0, 91.0, 92.5, 94.0]))],
        );
        let m = pairwise_matrix(&p, &MetricConfig::density_coverage(1), 4, 0).unwrap();
        // identical sets: density 1/(k M) * sum of ball counts, coverage 1
        let self_d = metric_d(&s, &s, &MetricConfig::density_coverage(1)).unwrap();
        assert_eq!(m.get(0, 1), self_d);
        assert_eq!(m.get(1, 0), self_d);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(2, 1), 0.0);
    }

    #[test]
    fn pairwise_csv_roundtrip() {
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let m = PairwiseMatrix::from_entries(ids, MetricConfig::default(), &[((0, 1), 0.25), ((1, 2), 1.5)]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "id,a,b,c\na,,0.25,0\nb,0.25,,1.5\nc,0,1.5,\n");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, text).unwrap();
        let back = PairwiseMatrix::read_csv(&path, MetricConfig::default()).unwrap();
        assert_eq!(back.get(1, 2), 1.5);
        assert_eq!(back.get(0, 2), 0.0);
    }

    #[test]
    fn memo_is_transparent() {
        let r = line("r", &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let p = pool(
            r.clone(),
            vec![("a", line("a", &[0.2, 1.1, 2.3, 3.9, 4.4, 5.5])), ("b", line("b", &[0.5, 0.7, 3.3, 8.0, 9.0, 1.0]))],
        );
        let cfg = MetricConfig::density_coverage(2);
        let memo = Evaluator::new(&p, cfg, 11).unwrap();
        let plain = Evaluator::new(&p, cfg, 11).unwrap().without_memo();
        for bits in [[true, false], [false, true], [true, true]] {
            let g = EnsembleGenome::new(bits.to_vec()).unwrap();
            let first = memo.evaluate(&g).unwrap();
            assert_eq!(first, memo.evaluate(&g).unwrap());
            assert_eq!(first, plain.evaluate(&g).unwrap());
        }
        assert_eq!(memo.evaluations(), 6);
    }
}
