//! Selection of generative-model ensembles by bi-objective Pareto
//! optimisation over precomputed feature embeddings.
//!
//! The pipeline is: load a pool of embedding sets ([`store`]), score subsets
//! of generators against the real set and against each other ([`metric`],
//! [`objective`]), search the subset space for the non-dominated front and
//! pick the highest-fidelity ensemble ([`pareto`]). [`toy`] fabricates
//! synthetic pools with known ground truth and [`report`] holds the
//! reporting quantities used by the `ganens` binary.

pub mod error;
pub mod metric;
pub mod objective;
pub mod pareto;
pub mod report;
pub mod rng;
pub mod store;
pub mod toy;

pub use error::{GanensError, Result};
pub use metric::{MetricConfig, MetricKind, Orientation};
pub use objective::{EnsembleGenome, Evaluator, ObjectiveVector, PairwiseMatrix};
pub use pareto::{ParetoFront, SearchAlgorithm, SearchConfig, SelectionManifest};
pub use store::{EmbeddingSet, GeneratorRecord, Pool};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
