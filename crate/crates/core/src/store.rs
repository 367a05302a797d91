//! On-disk embedding sets and the generator pool manifest.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! offset 0   "EMB1"
//! offset 4   u32 rows (N)
//! offset 8   u32 dim  (D)
//! offset 12  N*D f32, row-major
//! ```
//!
//! Files ending in `.csv` or `.txt` are read as text instead: one vector per
//! line, comma-separated decimals.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GanensError, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

/// An immutable `rows x dim` matrix of finite feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    source_id: String,
}

impl EmbeddingSet {
    pub fn new(source_id: impl Into<String>, rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        let source_id = source_id.into();
        if rows == 0 || dim == 0 {
            return Err(GanensError::EmptySet {
                location: source_id,
                rows,
                dim,
            });
        }
        if data.len() != rows * dim {
            return Err(GanensError::param(format!(
                "{source_id}: data length {} does not match {rows}x{dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(GanensError::NonFinite {
                location: format!("{source_id} row {} col {}", pos / dim, pos % dim),
            });
        }
        Ok(EmbeddingSet {
            rows,
            dim,
            data,
            source_id,
        })
    }

    /// Builds a set from equal-length rows.
    pub fn from_rows<R: AsRef<[f32]>>(source_id: impl Into<String>, rows: &[R]) -> Result<Self> {
        let source_id = source_id.into();
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(GanensError::param(format!(
                    "{source_id}: row {i} has {} values, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(source_id, rows.len(), dim, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// New set holding the given rows, in the given order.
    pub fn select(&self, source_id: impl Into<String>, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.rows {
                return Err(GanensError::param(format!(
                    "{}: row index {i} out of range ({} rows)",
                    self.source_id, self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(source_id, indices.len(), self.dim, data)
    }

    /// Row-wise concatenation. All parts must share a dimension.
    pub fn concat(source_id: impl Into<String>, parts: &[&EmbeddingSet]) -> Result<Self> {
        let source_id = source_id.into();
        let Some(first) = parts.first() else {
            return Err(GanensError::EmptySet {
                location: source_id,
                rows: 0,
                dim: 0,
            });
        };
        let dim = first.dim;
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        for p in parts {
            check_dims(first, p)?;
            data.extend_from_slice(&p.data);
        }
        Self::new(source_id, data.len() / dim, dim, data)
    }

    /// Same matrix under a different tag.
    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }
}

pub(crate) fn check_dims(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.dim != b.dim {
        return Err(GanensError::DimMismatch {
            left: a.source_id.clone(),
            left_dim: a.dim,
            right: b.source_id.clone(),
            right_dim: b.dim,
        });
    }
    Ok(())
}

pub fn write_embeddings(set: &EmbeddingSet, dest: &Path) -> Result<()> {
    if set.rows == 0 || set.dim == 0 {
        return Err(GanensError::EmptySet {
            location: dest.display().to_string(),
            rows: set.rows,
            dim: set.dim,
        });
    }
    let rows = u32::try_from(set.rows).map_err(|_| GanensError::param("row count exceeds u32"))?;
    let dim = u32::try_from(set.dim).map_err(|_| GanensError::param("dim exceeds u32"))?;
    let file = File::create(dest).map_err(|e| GanensError::io(dest, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| GanensError::io(dest, e));
    write(MAGIC)?;
    write(&rows.to_le_bytes())?;
    write(&dim.to_le_bytes())?;
    for v in &set.data {
        write(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| GanensError::io(dest, e))
}

fn is_text_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("csv") | Some("txt")
    )
}

/// Reads a binary `EMB1` file, or CSV text when the extension is `.csv`/`.txt`.
pub fn read_embeddings(src: &Path) -> Result<EmbeddingSet> {
    let id = src
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| src.display().to_string());
    let bytes = fs::read(src).map_err(|e| GanensError::io(src, e))?;
    if is_text_path(src) {
        parse_csv(src, &id, &bytes)
    } else {
        parse_binary(src, &id, &bytes)
    }
}

fn parse_binary(path: &Path, id: &str, bytes: &[u8]) -> Result<EmbeddingSet> {
    let truncated = |offset: usize, expected: usize, found: usize| GanensError::Truncated {
        path: path.to_path_buf(),
        offset: offset as u64,
        expected: expected as u64,
        found: found as u64,
    };
    if bytes.len() < MAGIC.len() {
        return Err(truncated(0, HEADER_LEN, bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err(GanensError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(4, HEADER_LEN - 4, bytes.len() - 4));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if rows == 0 || dim == 0 {
        return Err(GanensError::EmptySet {
            location: format!("{} @ offset 4", path.display()),
            rows,
            dim,
        });
    }
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| GanensError::param(format!("{}: header {rows}x{dim} overflows", path.display())))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(truncated(HEADER_LEN, expected, payload.len()));
    }
    if payload.len() > expected {
        return Err(GanensError::Truncated {
            path: path.to_path_buf(),
            offset: (HEADER_LEN + expected) as u64,
            expected: 0,
            found: (payload.len() - expected) as u64,
        });
    }
    let mut data = Vec::with_capacity(rows * dim);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(GanensError::NonFinite {
                location: format!("{} @ offset {}", path.display(), HEADER_LEN + 4 * i),
            });
        }
        data.push(v);
    }
    EmbeddingSet::new(id, rows, dim, data)
}

fn parse_csv(path: &Path, id: &str, bytes: &[u8]) -> Result<EmbeddingSet> {
    let csv_err = |line: usize, message: String| GanensError::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = std::str::from_utf8(bytes).map_err(|e| csv_err(0, format!("not utf-8: {e}")))?;
    let mut data = Vec::new();
    let mut dim = 0usize;
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|e| csv_err(lineno, format!("cannot parse {:?}: {e}", field.trim())))?;
            if !v.is_finite() {
                return Err(GanensError::NonFinite {
                    location: format!("{}:{lineno}", path.display()),
                });
            }
            data.push(v);
        }
        let width = data.len() - before;
        if rows == 0 {
            dim = width;
        } else if width != dim {
            return Err(csv_err(lineno, format!("expected {dim} values, found {width}")));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(GanensError::EmptySet {
            location: path.display().to_string(),
            rows: 0,
            dim: 0,
        });
    }
    EmbeddingSet::new(id, rows, dim, data)
}

/// Identity and location of one candidate generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub id: String,
    #[serde(rename = "model")]
    pub model_name: String,
    pub iteration: u64,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

/// JSON manifest: `{"real": path, "generators": [{id, model, iteration, path}]}`.
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolManifest {
    pub real: PathBuf,
    pub generators: Vec<GeneratorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
}

impl PoolManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| GanensError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| GanensError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| GanensError::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct Generator {
    pub record: GeneratorRecord,
    pub set: EmbeddingSet,
}

/// A loaded pool: the real set plus generators in canonical
/// `(model, iteration)` order. Genome bit `i` refers to `generators[i]`.
#[derive(Debug, Clone)]
pub struct Pool {
    pub real: EmbeddingSet,
    pub generators: Vec<Generator>,
}

impl Pool {
    /// Builds a pool from in-memory parts, validating and sorting them.
    pub fn new(real: EmbeddingSet, generators: Vec<(GeneratorRecord, EmbeddingSet)>) -> Result<Self> {
        if generators.is_empty() {
            return Err(GanensError::param("pool has no generators"));
        }
        let mut ids = HashSet::new();
        let mut keys = HashSet::new();
        for (rec, _) in &generators {
            if !ids.insert(rec.id.as_str()) {
                return Err(GanensError::DuplicateGenerator(format!("id {:?}", rec.id)));
            }
            if !keys.insert((rec.model_name.as_str(), rec.iteration)) {
                return Err(GanensError::DuplicateGenerator(format!(
                    "(model {:?}, iteration {})",
                    rec.model_name, rec.iteration
                )));
            }
        }
        let mut generators: Vec<Generator> = generators
            .into_iter()
            .map(|(mut record, set)| {
                record.count = Some(set.rows());
                let set = set.with_source_id(record.id.clone());
                Generator { record, set }
            })
            .collect();
        for g in &generators {
            check_dims(&real, &g.set)?;
        }
        generators.sort_by(|a, b| {
            (a.record.model_name.as_str(), a.record.iteration)
                .cmp(&(b.record.model_name.as_str(), b.record.iteration))
        });
        Ok(Pool { real, generators })
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.real.dim()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.generators.iter().map(|g| g.record.id.as_str()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.record.id == id)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads the manifest and every set it names, in parallel.
pub fn load_pool(manifest: &Path) -> Result<Pool> {
    let m = PoolManifest::read(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    if m.generators.is_empty() {
        return Err(GanensError::Manifest {
            path: manifest.to_path_buf(),
            message: "at least one generator is required".into(),
        });
    }
    let real = read_embeddings(&resolve(base, &m.real))?.with_source_id("real");
    if let Some(d) = m.embedding_dim {
        if d != real.dim() {
            return Err(GanensError::DimMismatch {
                left: "manifest".into(),
                left_dim: d,
                right: real.source_id().into(),
                right_dim: real.dim(),
            });
        }
    }
    let loaded = m
        .generators
        .par_iter()
        .map(|rec| {
            let set = read_embeddings(&resolve(base, &rec.path))?.with_source_id(rec.id.clone());
            Ok((rec.clone(), set))
        })
        .collect::<Result<Vec<_>>>()?;
    Pool::new(real, loaded)
}
