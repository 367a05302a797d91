use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ganens::error::{GanensError, Result};
use ganens::metric::{MetricConfig, MetricKind, DEFAULT_K};
use ganens::objective::{build_union, default_pairwise_sample, pairwise_matrix, Evaluator};
use ganens::pareto::{multiobjective_search, uniobjective_search, SearchAlgorithm, SearchConfig, SelectionManifest};
use ganens::report::{self, FrontFile, GapReport, Provenance};
use ganens::store::{load_pool, write_embeddings};
use ganens::toy::{emit_pool, ToySpec};

#[derive(Parser)]
#[command(name = "ganens", version, about = "Pareto selection of generator ensembles from embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pool from a profile spec.
    Toy {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pairwise symmetrised metric between all generators.
    Pairwise {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for the Pareto front and export it with the scatter of all evaluations.
    Optimize {
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the ensemble from a front file, or run the search first.
    Select {
        #[arg(long, conflicts_with = "manifest")]
        front: Option<PathBuf>,
        #[command(flatten)]
        metric: OptionalManifest,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the quota-sampled union as `union.emb` (needs the manifest).
        #[arg(long)]
        materialize: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// FID, density and coverage of every generator, the naive union and the selection.
    Quality {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        selection: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Percentage gap between synthetic- and real-trained g-means.
    Gap {
        #[arg(long)]
        real: f64,
        #[arg(long)]
        synth: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricFlag {
    Dnc,
    Fid,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoFlag {
    Exhaustive,
    Random,
    Nsga2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveFlag {
    /// Maximise Intra-d and minimise Inter-d.
    Multi,
    /// Maximise Intra-d only.
    Intra,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    opts: MetricOpts,
}

#[derive(Args)]
struct OptionalManifest {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    opts: MetricOpts,
}

#[derive(Args)]
struct MetricOpts {
    #[arg(long, value_enum, default_value = "dnc")]
    metric: MetricFlag,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rows per generator for pairwise entries (default: smallest generator, capped at |R|).
    #[arg(long)]
    sample: Option<usize>,
}

impl MetricOpts {
    fn config(&self) -> MetricConfig {
        let kind = match self.metric {
            MetricFlag::Dnc => MetricKind::DensityCoverage,
            MetricFlag::Fid => MetricKind::Frechet,
        };
        MetricConfig::new(kind, self.k).with_standardize(self.standardize)
    }
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, value_enum, default_value = "nsga2")]
    algo: AlgoFlag,
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    #[arg(long, default_value_t = 50)]
    population: usize,
    #[arg(long, default_value_t = 0.9)]
    crossover: f64,
    #[arg(long)]
    mutation: Option<f64>,
    #[arg(long, value_enum, default_value = "multi")]
    objective: ObjectiveFlag,
    /// Union budget; defaults to the real-set size.
    #[arg(long)]
    total: Option<usize>,
}

impl SearchArgs {
    fn config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            algorithm: match self.algo {
                AlgoFlag::Exhaustive => SearchAlgorithm::Exhaustive,
                AlgoFlag::Random => SearchAlgorithm::Random,
                AlgoFlag::Nsga2 => SearchAlgorithm::Evolutionary,
            },
            budget: self.budget,
            population: self.population,
            crossover_rate: self.crossover,
            mutation_rate: self.mutation,
            seed,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GanensError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(BufWriter<File>) -> std::io::Result<()>,
{
    let io = |e| GanensError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    f(BufWriter::new(File::create(path).map_err(io)?)).map_err(io)
}

struct SearchRun {
    front: FrontFile,
    archive: Vec<ganens::pareto::Evaluated>,
    front_full: ganens::ParetoFront,
    chosen: ganens::pareto::Evaluated,
    ids: Vec<String>,
    provenance: Provenance,
}

fn run_search(command: &str, manifest: &Path, opts: &MetricOpts, search: &SearchArgs) -> Result<SearchRun> {
    let pool = load_pool(manifest)?;
    let cfg = opts.config();
    let sample = opts.sample.unwrap_or_else(|| default_pairwise_sample(&pool));
    let total = search.total.unwrap_or(pool.real.rows());
    let matrix = pairwise_matrix(&pool, &cfg, sample, opts.seed)?;
    let evaluator = Evaluator::with_matrix(&pool, matrix, opts.seed, total)?;
    let search_cfg = search.config(opts.seed);
    let (outcome, chosen) = match search.objective {
        ObjectiveFlag::Multi => multiobjective_search(&evaluator, &search_cfg)?,
        ObjectiveFlag::Intra => uniobjective_search(&evaluator, &search_cfg)?,
    };
    let mut provenance = Provenance::new(command);
    provenance.manifest = Some(manifest.display().to_string());
    provenance.metric = Some(cfg);
    provenance.search = Some(search_cfg);
    provenance.seed = Some(opts.seed);
    provenance.total = Some(total);
    provenance.pairwise_sample = Some(sample);
    let ids: Vec<String> = pool.ids().into_iter().map(str::to_owned).collect();
    let front = FrontFile::new(provenance.clone(), ids.clone(), outcome.archive.len(), &outcome.front);
    log::info!(
        "{} evaluations, front of {}",
        outcome.archive.len(),
        outcome.front.len()
    );
    Ok(SearchRun {
        front,
        archive: outcome.archive,
        front_full: outcome.front,
        chosen,
        ids,
        provenance,
    })
}

fn print_selection(m: &SelectionManifest) {
    println!("chosen ({}): {}", m.chosen.len(), m.chosen.join(","));
    println!(
        "intra-d {:.3}  inter-d {:.3}  front size {}",
        m.objectives.intra, m.objectives.inter, m.front_size
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Toy { spec, out, seed } => {
            let spec = ToySpec::read(&spec)?;
            let manifest = emit_pool(&spec, &out, seed)?;
            println!("{}", manifest.display());
        }
        Command::Pairwise { metric, out } => {
            create_dir(&out)?;
            let pool = load_pool(&metric.manifest)?;
            let cfg = metric.opts.config();
            let sample = metric.opts.sample.unwrap_or_else(|| default_pairwise_sample(&pool));
            let m = pairwise_matrix(&pool, &cfg, sample, metric.opts.seed)?;
            write_with(&out.join("pairwise.csv"), |w| m.write_csv(w))?;
            let mut provenance = Provenance::new("pairwise");
            provenance.manifest = Some(metric.manifest.display().to_string());
            provenance.metric = Some(cfg);
            provenance.seed = Some(metric.opts.seed);
            provenance.pairwise_sample = Some(sample);
            let sidecar = serde_json::json!({
                "provenance": provenance,
                "metric": cfg,
                "k": cfg.k,
                "seed": metric.opts.seed,
                "sample_per_generator": sample,
                "sample_sizes": m.ids.iter().zip(&m.sample_sizes)
                    .map(|(id, n)| (id.clone(), serde_json::json!(n)))
                    .collect::<serde_json::Map<_, _>>(),
            });
            report::write_json(&sidecar, &out.join("pairwise.json"))?;
            println!("{}", out.join("pairwise.csv").display());
        }
        Command::Optimize { metric, search, out } => {
            create_dir(&out)?;
            let run = run_search("optimize", &metric.manifest, &metric.opts, &search)?;
            run.front.write(&out.join("front.json"))?;
            write_with(&out.join("scatter.csv"), |w| {
                report::write_scatter_csv(&run.archive, &run.front_full, w)
            })?;
            println!(
                "{} evaluations, {} on front -> {}",
                run.archive.len(),
                run.front_full.len(),
                out.join("front.json").display()
            );
        }
        Command::Select {
            front,
            metric,
            search,
            materialize,
            out,
        } => {
            create_dir(&out)?;
            let (selection, manifest) = match (front, metric.manifest) {
                (Some(front_path), _) => {
                    let file = FrontFile::read(&front_path)?;
                    let parsed = file.to_front()?;
                    let (g, o) = ganens::pareto::select_best(&parsed)?;
                    let mut provenance = file.provenance.clone();
                    provenance.command = "select".into();
                    let total = search.total.or(file.provenance.total).ok_or_else(|| {
                        GanensError::Param("--total is required when the front file has none".into())
                    })?;
                    provenance.total = Some(total);
                    let m = SelectionManifest::new(&file.ids, g, *o, parsed.len(), total, provenance)?;
                    (m, file.provenance.manifest.map(PathBuf::from))
                }
                (None, Some(manifest)) => {
                    let run = run_search("select", &manifest, &metric.opts, &search)?;
                    let total = run.provenance.total.unwrap_or_default();
                    let m = SelectionManifest::new(
                        &run.ids,
                        &run.chosen.0,
                        run.chosen.1,
                        run.front_full.len(),
                        total,
                        run.provenance,
                    )?;
                    (m, Some(manifest))
                }
                (None, None) => return Err(GanensError::Param("one of --front or --manifest is required".into())),
            };
            report::write_json(&selection, &out.join("selection.json"))?;
            if materialize {
                let manifest = manifest.ok_or_else(|| GanensError::Param("--materialize needs a manifest".into()))?;
                let pool = load_pool(&manifest)?;
                let genome = selection.genome()?;
                let seed = selection.provenance.seed.unwrap_or(0);
                let union = build_union(&genome, &pool, selection.total, seed)?;
                write_embeddings(&union.set, &out.join("union.emb"))?;
            }
            print_selection(&selection);
        }
        Command::Quality {
            manifest,
            selection,
            k,
            seed,
            out,
        } => {
            create_dir(&out)?;
            let pool = load_pool(&manifest)?;
            let genome = match &selection {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| GanensError::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    let sel: SelectionManifest = serde_json::from_str(&text).map_err(|source| GanensError::Json {
                        path: path.clone(),
                        source,
                    })?;
                    let ids: Vec<&str> = pool.ids();
                    let idx = sel
                        .chosen
                        .iter()
                        .map(|id| {
                            ids.iter()
                                .position(|p| p == id)
                                .ok_or_else(|| GanensError::Param(format!("selected id {id} is not in the pool")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Some(ganens::EnsembleGenome::from_indices(pool.len(), &idx)?)
                }
                None => None,
            };
            let rows = report::quality_table(&pool, genome.as_ref(), k, seed)?;
            write_with(&out.join("quality.csv"), |w| report::write_quality_csv(&rows, w))?;
            write_with(&out.join("fidelity_diversity.csv"), |w| {
                report::write_fidelity_diversity_csv(&rows, w)
            })?;
            let mut provenance = Provenance::new("quality");
            provenance.manifest = Some(manifest.display().to_string());
            provenance.metric = Some(MetricConfig::density_coverage(k));
            provenance.seed = Some(seed);
            provenance.total = Some(pool.real.rows());
            report::write_json(&serde_json::json!({ "provenance": provenance, "rows": rows }), &out.join("quality.json"))?;
            println!("{:<16} {:>9} {:>9} {:>9}", "label", "fid", "density", "coverage");
            for r in &rows {
                println!("{:<16} {:>9.3} {:>9.3} {:>9.3}", r.label, r.fid, r.density, r.coverage);
            }
        }
        Command::Gap { real, synth, out } => {
            let gap = GapReport::new(real, synth)?;
            if let Some(out) = out {
                let mut provenance = Provenance::new("gap");
                provenance.seed = None;
                report::write_json(&serde_json::json!({ "provenance": provenance, "gap": gap }), &out)?;
            }
            println!("{}", gap.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = std::env::var("GANENS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("GANENS_THREADS ignored: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
