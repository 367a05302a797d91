//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ganens::metric::{self, frechet_distance, gaussian_summary, harmonic_d, GaussianSummary};
use ganens::objective::quota_plan;
use ganens::pareto::{dominates, multiobjective_search, search, uniobjective_search, SearchAlgorithm};
use ganens::store::load_pool;
use ganens::toy::{emit_pool, ToySpec};
use ganens::{EnsembleGenome, Evaluator, MetricConfig, SearchConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ganens(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ganens"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("ganens {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn metric_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(1);
    for trial in 0..20 {
        let x = common::gaussian_set(&mut rng, "x", 10 + trial, 3, 0.0);
        let cov = metric::coverage(&x, &x, 1 + trial % 5).map_err(|e| e.to_string())?;
        check!(cov == 1.0, "coverage(X,X) = {cov}");
        let g = gaussian_summary(&x).unwrap();
        let f = frechet_distance(&g, &g).unwrap();
        check!(f <= 1e-6, "frechet(a,a) = {f}");
    }
    for _ in 0..1000 {
        let c: f64 = rng.random_range(0.0..1.0);
        let d: f64 = rng.random_range(0.0..2.0);
        check!(harmonic_d(c, c).unwrap() == c, "harmonic_d({c},{c}) != {c}");
        check!(harmonic_d(0.0, c).unwrap() == 0.0 && harmonic_d(d, 0.0).unwrap() == 0.0, "harmonic_d(0,.) != 0");
    }
    let mut cases = 0;
    for i in 0..200 {
        let k = [1, 3, 5][i % 3];
        let n = rng.random_range(k + 1..=50);
        let m = rng.random_range(1..=50);
        let dim = rng.random_range(1..=4);
        let (r, c) = if i % 2 == 0 {
            (common::grid_set(&mut rng, "r", n, dim), common::grid_set(&mut rng, "c", m, dim))
        } else {
            (
                common::gaussian_set(&mut rng, "r", n, dim, 0.0),
                common::gaussian_set(&mut rng, "c", m, dim, 0.5),
            )
        };
        let dn = metric::density(&r, &c, k).unwrap();
        let cv = metric::coverage(&r, &c, k).unwrap();
        check!(dn == common::density(&r, &c, k), "density differs from oracle at instance {i}");
        check!(cv == common::coverage(&r, &c, k), "coverage differs from oracle at instance {i}");
        cases += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    check!(secs < 1.0, "took {secs:.2} s");
    Ok(format!("identities hold; {cases}/200 oracle instances exact; {secs:.2} s"))
}

fn scalar(mu: f64, var: f64) -> GaussianSummary {
    GaussianSummary {
        mean: DVector::from_element(1, mu),
        covariance: DMatrix::from_element(1, 1, var),
    }
}

fn fid_scalar_cases() -> Outcome {
    let a = frechet_distance(&scalar(0.0, 1.0), &scalar(1.0, 1.0)).unwrap();
    let b = frechet_distance(&scalar(0.0, 4.0), &scalar(0.0, 1.0)).unwrap();
    check!((a - 1.0).abs() <= 1e-9, "shifted mean gives {a}");
    check!((b - 1.0).abs() <= 1e-9, "scaled variance gives {b}");
    Ok(format!("(0,1)/(1,1) -> {a:.12}; (0,4)/(0,1) -> {b:.12}"))
}

fn objective_points(front: &ganens::ParetoFront) -> BTreeSet<(u64, u64)> {
    front.points().into_iter().map(|(a, b)| (a.to_bits(), b.to_bits())).collect()
}

fn pareto_correctness() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_pool(&ToySpec::ten_pool(), dir.path(), None).unwrap();
    let pool = load_pool(&manifest).unwrap();
    let full = (1usize << pool.len()) - 1;
    let mut parts = Vec::new();
    for (name, cfg) in [("dnc", MetricConfig::density_coverage(5)), ("fid", MetricConfig::frechet())] {
        let eval = Evaluator::new(&pool, cfg, 0).unwrap();
        let exhaustive = search(&eval, &SearchConfig::exhaustive()).unwrap();
        check!(exhaustive.archive.len() == full, "{name}: exhaustive evaluated {}", exhaustive.archive.len());
        let ea = |budget| {
            let cfg = SearchConfig {
                algorithm: SearchAlgorithm::Evolutionary,
                budget,
                seed: 0,
                ..SearchConfig::default()
            };
            search(&eval, &cfg).unwrap()
        };
        let at_2048 = ea(2048);
        for (g, o) in &at_2048.front.entries {
            check!(
                !exhaustive.front.entries.iter().any(|(_, e)| dominates(e, o)),
                "{name}: evolutionary point {g} ({}, {}) is dominated",
                o.intra,
                o.inter
            );
        }
        let at_full = ea(full);
        check!(
            objective_points(&at_full.front) == objective_points(&exhaustive.front),
            "{name}: fronts differ at budget {full}: {} vs {} points",
            at_full.front.len(),
            exhaustive.front.len()
        );
        parts.push(format!(
            "{name}: budget 2048 front of {} with none dominated ({} distinct evaluations), budget {full} front identical ({} points)",
            at_2048.front.len(),
            at_2048.archive.len(),
            exhaustive.front.len()
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    check!(secs < 10.0, "took {secs:.1} s");
    Ok(format!("{}; {secs:.1} s", parts.join("; ")))
}

fn mode_recovery() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, ganens::toy::MODE_RECOVERY_FIXTURE).unwrap();
    let base = ToySpec::mode_recovery().seed;
    let mut coverages = Vec::new();
    let mut both_ac = 0;
    for i in 0..10u64 {
        let seed = (base + i).to_string();
        let run = dir.path().join(format!("run{i}"));
        let out = run.join("out");
        ganens(&["toy", "--spec", p(&spec), "--out", p(&run), "--seed", &seed])?;
        let manifest = run.join("manifest.json");
        ganens(&["select", "--manifest", p(&manifest), "--seed", &seed, "--k", "5", "--out", p(&out)])?;
        let sel_path = out.join("selection.json");
        ganens(&[
            "quality", "--manifest", p(&manifest), "--selection", p(&sel_path), "--k", "5", "--seed", &seed, "--out", p(&out),
        ])?;
        let sel = read_json(&sel_path);
        let chosen: Vec<String> = sel["chosen"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_owned())
            .collect();
        check!(!chosen.iter().any(|c| c == "E"), "seed {seed}: E selected in {chosen:?}");
        let rows = read_json(&out.join("quality.json"));
        let selected = rows["rows"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["label"] == "selected")
            .unwrap();
        coverages.push(selected["coverage"].as_f64().unwrap());

        if chosen.iter().any(|c| c == "A") && chosen.iter().any(|c| c == "C") {
            both_ac += 1;
            let pool = load_pool(&manifest).unwrap();
            let eval = Evaluator::new(&pool, MetricConfig::density_coverage(5), base + i).unwrap();
            let all = search(&eval, &SearchConfig::exhaustive()).unwrap();
            let best = sel["objectives"]["intra"].as_f64().unwrap();
            if let Some((g, o)) = all
                .archive
                .iter()
                .find(|(g, o)| g.popcount() < chosen.len() && o.effective_intra() >= best)
            {
                return Err(format!(
                    "seed {seed}: chose {chosen:?} although {:?} has delta {} >= {best}",
                    g.ids(&pool),
                    o.intra
                ));
            }
        }
    }
    let mean = coverages.iter().sum::<f64>() / coverages.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    check!(mean >= 0.95, "mean coverage {mean:.4} over seeds {coverages:?}");
    check!(secs < 60.0, "took {secs:.1} s");
    Ok(format!(
        "mean coverage {mean:.4} (min {:.4}); E never chosen; A and C chosen together in {both_ac}/10 runs (each checked for a smaller ensemble with equal delta); {secs:.1} s",
        coverages.iter().cloned().fold(f64::INFINITY, f64::min)
    ))
}

fn fewer_generators() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_pool(&ToySpec::mode_recovery(), dir.path(), None).unwrap();
    let pool = load_pool(&manifest).unwrap();
    let mut parts = Vec::new();
    for (name, cfg) in [("dnc", MetricConfig::density_coverage(5)), ("fid", MetricConfig::frechet())] {
        let eval = Evaluator::new(&pool, cfg, 0).unwrap();
        let (_, (gm, om)) = multiobjective_search(&eval, &SearchConfig::exhaustive()).unwrap();
        let (_, (gu, ou)) = uniobjective_search(&eval, &SearchConfig::exhaustive()).unwrap();
        check!(
            gm.popcount() <= gu.popcount(),
            "{name}: multi uses {} generators, uni {}",
            gm.popcount(),
            gu.popcount()
        );
        check!(
            om.effective_intra() >= ou.effective_intra(),
            "{name}: multi delta {} worse than uni {}",
            om.intra,
            ou.intra
        );
        parts.push(format!(
            "{name}: multi {{{}}} ({} members, delta {:.4}) vs uni {{{}}} ({} members, delta {:.4})",
            gm.ids(&pool).join(","),
            gm.popcount(),
            om.intra,
            gu.ids(&pool).join(","),
            gu.popcount(),
            ou.intra
        ));
    }
    Ok(parts.join("; "))
}

/// (real, synth, printed gap) for every row and dataset of the downstream table.
const TABLE: [(f64, f64, f64); 21] = [
    (0.822, 0.854, 3.9),
    (0.822, 0.842, 2.4),
    (0.822, 0.652, -20.7),
    (0.822, 0.822, 0.0),
    (0.822, 0.823, 0.1),
    (0.822, 0.867, 5.5),
    (0.822, 0.881, 7.2),
    (0.817, 0.707, -13.5),
    (0.817, 0.697, -14.7),
    (0.817, 0.407, -50.2),
    (0.817, 0.664, -18.7),
    (0.817, 0.714, -12.6),
    (0.817, 0.755, -7.6),
    (0.817, 0.755, -7.6),
    (0.607, 0.588, -3.1),
    (0.607, 0.555, -8.6),
    (0.607, 0.339, -44.2),
    (0.607, 0.533, -12.2),
    (0.607, 0.487, -19.8),
    (0.607, 0.573, -5.6),
    (0.607, 0.573, -5.6),
];

fn gap_reproduction() -> Outcome {
    let mut worst = 0.0f64;
    for (real, synth, printed) in TABLE {
        let out = ganens(&["gap", "--real", &real.to_string(), "--synth", &synth.to_string()])?;
        let got: f64 = out.trim().parse().map_err(|e| format!("cannot parse {out:?}: {e}"))?;
        let err = (got - printed).abs();
        check!(err <= 0.05 + 1e-9, "({real}, {synth}) printed {out:?}, expected {printed:+.1}");
        worst = worst.max(err);
    }
    Ok(format!("{} pairs within 0.05 (max error {worst:.3})", TABLE.len()))
}

fn quota_arithmetic() -> Outcome {
    let plan = |total, n| -> Vec<usize> {
        quota_plan(&EnsembleGenome::all(n).unwrap(), total)
            .unwrap()
            .into_iter()
            .map(|q| q.1)
            .collect()
    };
    let big = plan(4708, 38);
    check!(big.iter().sum::<usize>() == 4708, "sum {}", big.iter().sum::<usize>());
    let small = plan(100, 3);
    check!(small == [34, 33, 33], "{small:?}");
    Ok(format!(
        "4708/38 -> {}x{} + {}x{}; 100/3 -> {small:?}",
        big.iter().filter(|&&q| q == big[0]).count(),
        big[0],
        big.iter().filter(|&&q| q != big[0]).count(),
        big[big.len() - 1]
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_pool(&ToySpec::ten_pool(), dir.path(), None).unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        ganens(&["optimize", "--manifest", p(&manifest), "--seed", "42", "--budget", "400", "--out", p(&out)])?;
        outputs.push(fs::read(out.join("front.json")).unwrap());
    }
    check!(outputs[0] == outputs[1], "front.json differs between runs");
    Ok(format!("front.json identical across runs ({} bytes)", outputs[0].len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("metric identities", metric_identities),
        ("FID scalar cases", fid_scalar_cases),
        ("Pareto correctness", pareto_correctness),
        ("mode recovery", mode_recovery),
        ("fewer generators", fewer_generators),
        ("gap reproduction", gap_reproduction),
        ("quota arithmetic", quota_arithmetic),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
