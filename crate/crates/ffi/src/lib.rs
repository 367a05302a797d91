//! C ABI over the `ganens` toolkit.
//!
//! Conventions:
//!
//! - Fallible functions return a [`GanensStatus`]; `GANENS_STATUS_OK` is 0.
//! - On failure a message is stored per thread and can be read with
//!   [`ganens_last_error`] until the next failing call on that thread.
//! - Handles ([`GanensPool`], [`GanensSelection`]) are opaque and must be
//!   released with their `_free` function. Passing NULL to `_free` is a no-op.
//! - Embedding matrices are row-major `float` buffers of `rows * dim` values.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ganens::metric::{metric_d, MetricConfig, PreparedReference};
use ganens::objective::{quota_plan, Evaluator};
use ganens::pareto::{multiobjective_search, uniobjective_search, SearchAlgorithm, SearchConfig, SelectionManifest};
use ganens::report::{self, GapReport, Provenance};
use ganens::{EmbeddingSet, EnsembleGenome, GanensError, Pool};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanensStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Numeric = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanensMetric {
    DensityCoverage = 0,
    Frechet = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanensAlgorithm {
    Exhaustive = 0,
    Random = 1,
    Evolutionary = 2,
}

/// Search and metric settings for [`ganens_select`]. Start from
/// [`ganens_search_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GanensSearchOptions {
    pub metric: GanensMetric,
    pub k: u32,
    pub algorithm: GanensAlgorithm,
    pub budget: u64,
    pub population: u32,
    pub crossover_rate: f64,
    /// Per-bit flip probability; a value <= 0 means `1 / pool size`.
    pub mutation_rate: f64,
    pub seed: u64,
    /// Union budget; 0 means the real-set size.
    pub total: u64,
    /// Non-zero selects by Intra-d alone.
    pub uniobjective: u8,
}

/// Opaque loaded pool.
pub struct GanensPool {
    pool: Pool,
}

/// Opaque selection result.
pub struct GanensSelection {
    manifest: SelectionManifest,
    members: Vec<(usize, usize)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &GanensError) -> GanensStatus {
    match err {
        GanensError::Io { .. } => GanensStatus::Io,
        GanensError::BadMagic { .. }
        | GanensError::Truncated { .. }
        | GanensError::NonFinite { .. }
        | GanensError::EmptySet { .. }
        | GanensError::Csv { .. }
        | GanensError::Manifest { .. }
        | GanensError::Json { .. }
        | GanensError::DimMismatch { .. }
        | GanensError::DuplicateGenerator(_) => GanensStatus::Format,
        GanensError::Param(_) => GanensStatus::InvalidArgument,
        GanensError::Numeric(_) => GanensStatus::Numeric,
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard<F>(f: F) -> GanensStatus
where
    F: FnOnce() -> Result<(), (GanensStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GanensStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GanensStatus::Panic
        }
    }
}

fn lift(err: GanensError) -> (GanensStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (GanensStatus, String) {
    (GanensStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, (GanensStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| (GanensStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn matrix_arg(data: *const f32, rows: usize, dim: usize, id: &str) -> Result<EmbeddingSet, (GanensStatus, String)> {
    if data.is_null() {
        return Err(null(id));
    }
    let len = rows
        .checked_mul(dim)
        .ok_or_else(|| (GanensStatus::InvalidArgument, format!("{id}: {rows}x{dim} overflows")))?;
    let values = std::slice::from_raw_parts(data, len).to_vec();
    EmbeddingSet::new(id, rows, dim, values).map_err(lift)
}

fn metric_config(metric: GanensMetric, k: u32) -> MetricConfig {
    match metric {
        GanensMetric::DensityCoverage => MetricConfig::density_coverage(k as usize),
        GanensMetric::Frechet => MetricConfig::frechet(),
    }
}

/// Message for the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ganens_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ganens_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn ganens_pool_load(manifest_path: *const c_char, out: *mut *mut GanensPool) -> GanensStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(manifest_path, "manifest_path")?;
        let pool = ganens::store::load_pool(path).map_err(lift)?;
        *out = Box::into_raw(Box::new(GanensPool { pool }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ganens_pool_free(pool: *mut GanensPool) {
    if !pool.is_null() {
        drop(Box::from_raw(pool));
    }
}

/// Number of generators, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ganens_pool_size(pool: *const GanensPool) -> usize {
    pool.as_ref().map_or(0, |p| p.pool.len())
}

/// Embedding dimension, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ganens_pool_dim(pool: *const GanensPool) -> usize {
    pool.as_ref().map_or(0, |p| p.pool.dim())
}

/// Copies the id of generator `index` (canonical order) into `buf` as a
/// NUL-terminated string. `needed` receives the required size including the
/// terminator; on `GANENS_STATUS_BUFFER_TOO_SMALL` nothing is written.
#[no_mangle]
pub unsafe extern "C" fn ganens_pool_generator_id(
    pool: *const GanensPool,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
    needed: *mut usize,
) -> GanensStatus {
    guard(|| {
        let pool = pool.as_ref().ok_or_else(|| null("pool"))?;
        let g = pool.pool.generators.get(index).ok_or_else(|| {
            (
                GanensStatus::InvalidArgument,
                format!("index {index} outside pool of {}", pool.pool.len()),
            )
        })?;
        let id = g.record.id.as_bytes();
        if !needed.is_null() {
            *needed = id.len() + 1;
        }
        if buf.is_null() || buf_len < id.len() + 1 {
            return Err((GanensStatus::BufferTooSmall, format!("id needs {} bytes", id.len() + 1)));
        }
        ptr::copy_nonoverlapping(id.as_ptr().cast::<c_char>(), buf, id.len());
        *buf.add(id.len()) = 0;
        Ok(())
    })
}

/// `d(reference, candidate)` for two row-major matrices of width `dim`.
#[no_mangle]
pub unsafe extern "C" fn ganens_metric_d(
    reference: *const f32,
    reference_rows: usize,
    candidate: *const f32,
    candidate_rows: usize,
    dim: usize,
    metric: GanensMetric,
    k: u32,
    out: *mut f64,
) -> GanensStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = matrix_arg(reference, reference_rows, dim, "reference")?;
        let c = matrix_arg(candidate, candidate_rows, dim, "candidate")?;
        *out = metric_d(&r, &c, &metric_config(metric, k)).map_err(lift)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ganens_density_coverage(
    reference: *const f32,
    reference_rows: usize,
    candidate: *const f32,
    candidate_rows: usize,
    dim: usize,
    k: u32,
    density: *mut f64,
    coverage: *mut f64,
) -> GanensStatus {
    guard(|| {
        if density.is_null() || coverage.is_null() {
            return Err(null("density/coverage"));
        }
        let r = matrix_arg(reference, reference_rows, dim, "reference")?;
        let c = matrix_arg(candidate, candidate_rows, dim, "candidate")?;
        let prepared = PreparedReference::new(&r, MetricConfig::density_coverage(k as usize)).map_err(lift)?;
        let (d, v) = prepared.density_coverage(&c).map_err(lift)?;
        *density = d;
        *coverage = v;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ganens_harmonic_d(density: f64, coverage: f64, out: *mut f64) -> GanensStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ganens::metric::harmonic_d(density, coverage).map_err(lift)?;
        Ok(())
    })
}

/// Writes `n` quotas summing to `total` into `quotas`.
#[no_mangle]
pub unsafe extern "C" fn ganens_quota_plan(total: usize, n: usize, quotas: *mut usize) -> GanensStatus {
    guard(|| {
        if quotas.is_null() {
            return Err(null("quotas"));
        }
        let genome = EnsembleGenome::all(n).map_err(lift)?;
        for (slot, (_, q)) in quota_plan(&genome, total).map_err(lift)?.into_iter().enumerate() {
            *quotas.add(slot) = q;
        }
        Ok(())
    })
}

/// Real-vs-synthetic g-mean gap in percent (unrounded).
#[no_mangle]
pub unsafe extern "C" fn ganens_gap(gmean_real: f64, gmean_synth: f64, gamma_rs: *mut f64) -> GanensStatus {
    guard(|| {
        if gamma_rs.is_null() {
            return Err(null("gamma_rs"));
        }
        *gamma_rs = GapReport::new(gmean_real, gmean_synth).map_err(lift)?.gamma_rs;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn ganens_search_options_default() -> GanensSearchOptions {
    let d = SearchConfig::default();
    GanensSearchOptions {
        metric: GanensMetric::DensityCoverage,
        k: ganens::metric::DEFAULT_K as u32,
        algorithm: GanensAlgorithm::Evolutionary,
        budget: d.budget as u64,
        population: d.population as u32,
        crossover_rate: d.crossover_rate,
        mutation_rate: 0.0,
        seed: d.seed,
        total: 0,
        uniobjective: 0,
    }
}

/// Runs the search over `pool` and returns the chosen ensemble.
#[no_mangle]
pub unsafe extern "C" fn ganens_select(
    pool: *const GanensPool,
    options: *const GanensSearchOptions,
    out: *mut *mut GanensSelection,
) -> GanensStatus {
    guard(|| {
        let pool = &pool.as_ref().ok_or_else(|| null("pool"))?.pool;
        let opts = options.as_ref().ok_or_else(|| null("options"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let metric = metric_config(opts.metric, opts.k);
        let total = if opts.total == 0 {
            pool.real.rows()
        } else {
            opts.total as usize
        };
        let search = SearchConfig {
            algorithm: match opts.algorithm {
                GanensAlgorithm::Exhaustive => SearchAlgorithm::Exhaustive,
                GanensAlgorithm::Random => SearchAlgorithm::Random,
                GanensAlgorithm::Evolutionary => SearchAlgorithm::Evolutionary,
            },
            budget: opts.budget as usize,
            population: opts.population as usize,
            crossover_rate: opts.crossover_rate,
            mutation_rate: (opts.mutation_rate > 0.0).then_some(opts.mutation_rate),
            seed: opts.seed,
        };
        let matrix = ganens::objective::pairwise_matrix(
            pool,
            &metric,
            ganens::objective::default_pairwise_sample(pool),
            opts.seed,
        )
        .map_err(lift)?;
        let sample = matrix.sample_per_generator;
        let evaluator = Evaluator::with_matrix(pool, matrix, opts.seed, total).map_err(lift)?;
        let (outcome, (genome, objectives)) = if opts.uniobjective != 0 {
            uniobjective_search(&evaluator, &search)
        } else {
            multiobjective_search(&evaluator, &search)
        }
        .map_err(lift)?;
        let mut provenance = Provenance::new("ffi.select");
        provenance.metric = Some(metric);
        provenance.search = Some(search);
        provenance.seed = Some(opts.seed);
        provenance.total = Some(total);
        provenance.pairwise_sample = Some(sample);
        let ids: Vec<String> = pool.ids().into_iter().map(str::to_owned).collect();
        let manifest =
            SelectionManifest::new(&ids, &genome, objectives, outcome.front.len(), total, provenance).map_err(lift)?;
        let members = quota_plan(&genome, total).map_err(lift)?;
        *out = Box::into_raw(Box::new(GanensSelection { manifest, members }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ganens_selection_free(selection: *mut GanensSelection) {
    if !selection.is_null() {
        drop(Box::from_raw(selection));
    }
}

/// Number of chosen generators, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ganens_selection_len(selection: *const GanensSelection) -> usize {
    selection.as_ref().map_or(0, |s| s.members.len())
}

/// Pool index and quota of the `i`-th chosen generator.
#[no_mangle]
pub unsafe extern "C" fn ganens_selection_member(
    selection: *const GanensSelection,
    i: usize,
    pool_index: *mut usize,
    quota: *mut usize,
) -> GanensStatus {
    guard(|| {
        let s = selection.as_ref().ok_or_else(|| null("selection"))?;
        if pool_index.is_null() || quota.is_null() {
            return Err(null("pool_index/quota"));
        }
        let &(idx, q) = s.members.get(i).ok_or_else(|| {
            (
                GanensStatus::InvalidArgument,
                format!("member {i} outside selection of {}", s.members.len()),
            )
        })?;
        *pool_index = idx;
        *quota = q;
        Ok(())
    })
}

/// Intra-d and Inter-d of the selection in raw metric units.
#[no_mangle]
pub unsafe extern "C" fn ganens_selection_objectives(
    selection: *const GanensSelection,
    intra: *mut f64,
    inter: *mut f64,
    front_size: *mut usize,
) -> GanensStatus {
    guard(|| {
        let s = selection.as_ref().ok_or_else(|| null("selection"))?;
        if intra.is_null() || inter.is_null() {
            return Err(null("intra/inter"));
        }
        *intra = s.manifest.objectives.intra;
        *inter = s.manifest.objectives.inter;
        if !front_size.is_null() {
            *front_size = s.manifest.front_size;
        }
        Ok(())
    })
}

/// Writes the selection manifest JSON (same schema as `ganens select`).
#[no_mangle]
pub unsafe extern "C" fn ganens_selection_write_json(selection: *const GanensSelection, path: *const c_char) -> GanensStatus {
    guard(|| {
        let s = selection.as_ref().ok_or_else(|| null("selection"))?;
        let path = path_arg(path, "path")?;
        report::write_json(&s.manifest, path).map_err(lift)
    })
}
