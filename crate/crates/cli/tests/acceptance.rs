//! Acceptance suite. Runs each criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fail.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mifs_cli::commands::repro::{precision, run_benchmark, Benchmark};
use mifs_core::gaussian_lab::{
    isotropic_pair_mi, run_validation_1d, run_validation_2d, scalar_pair_mi, true_mi_gaussian,
    GaussianSpec, MIEstimateRecord, ValidationConfig,
};
use mifs_core::importance::{mi_importance, norm_importance, MiConfig};
use mifs_core::multiobjective::{
    compositions, sweep_simplex, task_distortion, total_distortion, AccuracyRecord,
    Direction, Metric, SelectionKey, TIE,
};
use mifs_core::rng::Stream;
use mifs_core::selection_codec::{hard_select, keep_count, soft_select, Keep, SelectionPlan};
use mifs_core::synth_bench::{dataset, SynthSpec};
use mifs_core::{Dataset, FeatureTensor};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn oracle_scalar(rho: f64) -> f64 {
    -0.5 * (1.0 - rho * rho).ln()
}

/// Mean estimate per (ρ, K), keyed by the bit pattern of ρ.
fn means(records: &[MIEstimateRecord]) -> BTreeMap<(i64, usize), f64> {
    let mut acc: BTreeMap<(i64, usize), (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(((r.rho * 1e6).round() as i64, r.k)).or_default();
        e.0 += r.estimate_nats;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn criterion_1(records: &[MIEstimateRecord], seconds: f64) -> Outcome {
    let mut excess = f64::NEG_INFINITY;
    for r in records {
        let truth = oracle_scalar(r.rho);
        check((r.true_mi_nats - truth).abs() < 1e-12, format!("truth mismatch at rho {}", r.rho))?;
        excess = excess.max(r.estimate_nats - truth);
        check(
            r.estimate_nats <= truth + 0.01,
            format!("rho {} K {} estimate {} above truth {}", r.rho, r.k, r.estimate_nats, truth),
        )?;
    }
    let truth = oracle_scalar(0.9);
    let worst = records
        .iter()
        .filter(|r| r.rho == 0.9 && r.k == 32)
        .map(|r| r.estimate_nats)
        .fold(f64::INFINITY, f64::min);
    check(worst >= 0.80 * truth, format!("rho 0.9 K 32 reaches only {:.3} of truth", worst / truth))?;
    check(seconds < 120.0, format!("took {seconds:.1} s"))?;
    Ok(format!(
        "max excess {excess:.4} nats, K=32 at rho 0.9 reaches {:.3} of truth, {seconds:.1} s",
        worst / truth
    ))
}

fn criterion_2(records: &[MIEstimateRecord]) -> Outcome {
    let e: Vec<f64> = records
        .iter()
        .filter(|r| r.rho == 0.9 && r.k == 8)
        .map(|r| r.estimate_nats)
        .collect();
    check(e.len() == 5, format!("{} repeats, expected 5", e.len()))?;
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (e.len() - 1) as f64;
    check(var <= 1e-6, format!("variance {var:e}"))?;
    Ok(format!("variance {var:.3e} nats^2 over 5 seeds"))
}

fn criterion_3(records: &[MIEstimateRecord]) -> Outcome {
    let mut excess = f64::NEG_INFINITY;
    for r in records {
        let truth = oracle_scalar(r.rho);
        excess = excess.max(r.estimate_nats - truth);
        check(
            r.estimate_nats <= truth + 0.01,
            format!("rho {} K {} estimate {} above {}", r.rho, r.k, r.estimate_nats, truth),
        )?;
    }
    let grid: Vec<f64> = (-99..=99).map(|i| i as f64 / 100.0).collect();
    for &rho in &grid {
        let scalar = scalar_pair_mi(rho);
        let full = isotropic_pair_mi(rho);
        check((scalar - oracle_scalar(rho)).abs() < 1e-12, format!("scalar MI wrong at {rho}"))?;
        check((full - 2.0 * oracle_scalar(rho)).abs() < 1e-12, format!("2-D MI wrong at {rho}"))?;
        check(scalar <= full + 1e-12, format!("patched truth exceeds full truth at {rho}"))?;
        let det = true_mi_gaussian(&GaussianSpec::paired(2, rho, 0).unwrap()).unwrap();
        check((det - full).abs() < 1e-12, format!("determinant form disagrees at {rho}"))?;
    }
    Ok(format!(
        "max excess {excess:.4} nats over {} estimates; patched <= full on {} grid points",
        records.len(),
        grid.len()
    ))
}

fn criterion_4(one: &[MIEstimateRecord], two: &[MIEstimateRecord]) -> Outcome {
    let mut worst = f64::INFINITY;
    for (label, recs) in [("1-D", one), ("2-D", two)] {
        let m = means(recs);
        let rhos: BTreeSet<i64> = m.keys().map(|k| k.0).filter(|&r| r >= 300_000).collect();
        for rho in rhos {
            let curve: Vec<(usize, f64)> =
                m.iter().filter(|(k, _)| k.0 == rho).map(|(k, &v)| (k.1, v)).collect();
            for w in curve.windows(2) {
                let step = w[1].1 - w[0].1;
                worst = worst.min(step);
                check(
                    step >= -0.005,
                    format!("{label} rho {} drops {step} from K={} to K={}", rho as f64 / 1e6, w[0].0, w[1].0),
                )?;
            }
        }
    }
    Ok(format!("smallest step between consecutive K is {worst:+.4} nats"))
}

fn top_set(ordering: &[u32], n: usize) -> BTreeSet<u32> {
    ordering[..n].iter().copied().collect()
}

fn scaled(ds: &Dataset, c: usize, s: f32) -> Dataset {
    let mut out = ds.clone();
    for t in &mut out.features {
        t.scale_channel(c, s);
    }
    out
}

fn criterion_5(spec: &SynthSpec, bench: &Benchmark) -> Outcome {
    let ds = dataset(spec).map_err(|e| e.to_string())?;
    let cfg = MiConfig::default();
    let l2 = &bench.rankings.l2;
    let mut checked = 0;
    for c in 0..spec.channels {
        for s in [0.01f32, 100.0] {
            let ds2 = scaled(&ds, c, s);
            for (j, task) in spec.tasks.iter().enumerate() {
                let before = top_set(&bench.rankings.mi[&(j as u32)].ordering, task.relevant.len());
                let after = mi_importance(&ds2, j as u32, &cfg).map_err(|e| e.to_string())?;
                check(
                    top_set(&after.ordering, task.relevant.len()) == before,
                    format!("scaling channel {c} by {s} changed task {j}'s MI top set"),
                )?;
            }
            let l2b = norm_importance(&ds2.features, 2).map_err(|e| e.to_string())?;
            let ratio = l2b.scores[&(c as u32)] / l2.scores[&(c as u32)];
            check(
                (ratio / s as f64 - 1.0).abs() < 1e-6,
                format!("l2 of channel {c} scaled by {ratio}, expected {s}"),
            )?;
            for (id, &v) in &l2.scores {
                if *id != c as u32 {
                    check(l2b.scores[id] == v, format!("l2 of untouched channel {id} moved"))?;
                }
            }
            checked += 1;
        }
    }
    // An irrelevant, weak channel blown up by 100 overtakes every relevant one under l2.
    let relevant: BTreeSet<u32> = spec.tasks.iter().flat_map(|t| t.relevant.iter().map(|&c| c as u32)).collect();
    let weak = *l2.ordering.iter().rev().find(|c| !relevant.contains(c)).expect("irrelevant channel");
    let ds2 = scaled(&ds, weak as usize, 100.0);
    let l2b = norm_importance(&ds2.features, 2).map_err(|e| e.to_string())?;
    let rank = |o: &[u32], c: u32| o.iter().position(|&x| x == c).unwrap();
    let s0 = spec.tasks[0].relevant[0] as u32;
    check(rank(&l2.ordering, weak) > rank(&l2.ordering, s0), "weak channel already above")?;
    check(rank(&l2b.ordering, weak) < rank(&l2b.ordering, s0), "no l2 rank flip")?;
    let mi = mi_importance(&ds2, 0, &cfg).map_err(|e| e.to_string())?;
    check(
        top_set(&mi.ordering, 4) == top_set(&bench.rankings.mi[&0].ordering, 4),
        "MI top set moved in the flip case",
    )?;
    Ok(format!(
        "{checked} channel scalings leave MI top sets unchanged; l2 scales by |s|; channel {weak} flips from l2 rank {} to {}",
        rank(&l2.ordering, weak),
        rank(&l2b.ordering, weak)
    ))
}

fn criterion_6(spec: &SynthSpec, bench: &Benchmark) -> Outcome {
    let clean: Vec<f64> = spec
        .tasks
        .iter()
        .enumerate()
        .map(|(j, t)| precision(&bench.rankings.mi[&(j as u32)].ordering, &t.relevant))
        .collect();
    check(clean.iter().all(|&p| p == 1.0), format!("noise-free precision {clean:?}"))?;
    let noisy_spec = spec.clone().with_noise_fraction(0.1);
    let ds = dataset(&noisy_spec).map_err(|e| e.to_string())?;
    let mut noisy = Vec::new();
    for (j, t) in noisy_spec.tasks.iter().enumerate() {
        let table = mi_importance(&ds, j as u32, &MiConfig::default()).map_err(|e| e.to_string())?;
        noisy.push(precision(&table.ordering, &t.relevant));
    }
    check(noisy.iter().all(|&p| p >= 0.75), format!("10% noise precision {noisy:?}"))?;
    Ok(format!("precision {clean:?} noise-free, {noisy:?} at 10% noise power"))
}

fn criterion_7() -> Outcome {
    let fractions = [1.0, 0.9375, 0.875, 0.75, 0.5];
    let expected = [256usize, 240, 224, 192, 128];
    let mut s = Stream::new(5);
    let values: Vec<f32> = (0..256 * 4).map(|_| s.normal() as f32).collect();
    let t = FeatureTensor::new(256, 2, 2, values).unwrap();
    let ordering: Vec<u32> = (0..256).rev().collect();
    let mut got = Vec::new();
    for f in fractions {
        let n = keep_count(f, 256).map_err(|e| e.to_string())?;
        let sel = hard_select(&t, &SelectionPlan::hard(ordering.clone(), Keep::Fraction(f)))
            .map_err(|e| e.to_string())?;
        check(sel.selected.channels() == n, "plan and keep_count disagree")?;
        got.push(n);
    }
    check(got == expected, format!("{got:?}"))?;
    Ok(format!("C' = {got:?}"))
}

fn criterion_8(spec: &SynthSpec, bench: &Benchmark) -> Outcome {
    let ds = dataset(spec).map_err(|e| e.to_string())?;
    let ordering = bench.rankings.mi[&0].ordering.clone();
    let mut bytes = Vec::new();
    let mut mses = Vec::new();
    let mut worst_ratio = 0f64;
    for qp in [10u8, 20, 30, 40] {
        let plan = SelectionPlan::soft(ordering.clone(), Keep::Fraction(0.5), qp);
        let (mut total, mut sq, mut n) = (0usize, 0f64, 0usize);
        for t in &ds.features {
            let p = soft_select(t, &plan).map_err(|e| e.to_string())?;
            total += p.to_bytes().len();
            let r = p.reconstruct().map_err(|e| e.to_string())?;
            for (a, b) in t.values().iter().zip(r.values()) {
                sq += (*a as f64 - *b as f64).powi(2);
                n += 1;
            }
            for &id in &ordering[..16] {
                let i = id as usize;
                let plane = t.channel(i);
                let lo = plane.iter().copied().fold(f32::INFINITY, f32::min) as f64;
                let hi = plane.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
                let bound = (hi - lo) / 510.0;
                let slack = f32::EPSILON as f64 * lo.abs().max(hi.abs());
                for (a, b) in plane.iter().zip(r.channel(i)) {
                    let err = (*a as f64 - *b as f64).abs();
                    check(err <= bound + slack, format!("qp {qp}: base channel {id} error {err} > {bound}"))?;
                    if bound > 0.0 {
                        worst_ratio = worst_ratio.max(err / bound);
                    }
                }
            }
        }
        bytes.push(total);
        mses.push(sq / n as f64);
    }
    check(bytes.windows(2).all(|w| w[0] > w[1]), format!("bytes {bytes:?}"))?;
    check(mses.windows(2).all(|w| w[0] <= w[1]), format!("mse {mses:?}"))?;
    Ok(format!(
        "bytes {bytes:?}, mse {:?}, worst base error {worst_ratio:.4} of (max-min)/510",
        mses.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>()
    ))
}

fn criterion_9(bench: &Benchmark) -> Outcome {
    let full: BTreeMap<u32, f64> = bench
        .accuracy
        .iter()
        .filter(|r| r.criterion == "full")
        .map(|r| (r.task_id, r.accuracy))
        .collect();
    let mut parts = Vec::new();
    for r in bench.rate.iter().filter(|r| r.criterion == "mi" && r.qp == 10 && r.keep_count == 16) {
        let f = full[&r.task_id];
        check(
            r.accuracy >= r.base_only_accuracy,
            format!("task {}: soft {} below hard {}", r.task_id, r.accuracy, r.base_only_accuracy),
        )?;
        check(r.accuracy <= f + 0.1, format!("task {}: soft {} above full {f}", r.task_id, r.accuracy))?;
        parts.push(format!("t{} {:.2}/{:.2}/{:.2}", r.task_id, r.base_only_accuracy, r.accuracy, f));
    }
    check(parts.len() == 3, "missing benchmark rows")?;
    let l2: Vec<String> = bench
        .rate
        .iter()
        .filter(|r| r.criterion == "l2" && r.qp == 10)
        .map(|r| format!("t{} {:.2}/{:.2}", r.task_id, r.base_only_accuracy, r.accuracy))
        .collect();
    Ok(format!(
        "MI hard/soft/full dB: {}; l2 hard/soft dB: {}",
        parts.join(", "),
        l2.join(", ")
    ))
}

fn record(task: u32, full: f64, entries: &[(&str, f64)]) -> AccuracyRecord {
    let mut r = AccuracyRecord::new(task, Metric::Proxy, Direction::HigherBetter, full).unwrap();
    for (c, a) in entries {
        r.insert(c, SelectionKey::hard(4), *a).unwrap();
    }
    r
}

fn criterion_10() -> Outcome {
    let key = SelectionKey::hard(4);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let d = |full, sel| task_distortion(&record(0, full, &[("a", sel)]), "a", key).unwrap();
    check(close(d(100.0, 90.0), 0.1), "100 -> 90")?;
    check(close(d(30.0, 33.0), 0.1), "30 -> 33")?;
    check(d(42.0, 42.0) == 0.0, "equal accuracies")?;
    let t = |ds: &[f64], w: &[f64]| total_distortion(ds, w).unwrap();
    check(close(t(&[0.1, 0.2, 0.3], &[0.5, 0.3, 0.2]), 0.17), "weighted sum")?;
    check(t(&[0.1, 0.2, 0.3], &[1.0, 0.0, 0.0]) == 0.1, "vertex")?;
    check(close(t(&[0.25; 3], &[0.2, 0.5, 0.3]), 0.25), "equal distortions")?;
    check(total_distortion(&[0.1, 0.2, 0.3], &[0.5, 0.5, 0.1]).is_err(), "bad weights accepted")?;

    // a wins task 0, b task 1, c task 2.
    let records = vec![
        record(0, 100.0, &[("a", 99.0), ("b", 90.0), ("c", 80.0)]),
        record(1, 100.0, &[("a", 70.0), ("b", 95.0), ("c", 90.0)]),
        record(2, 100.0, &[("a", 60.0), ("b", 70.0), ("c", 98.0)]),
    ];
    let criteria: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let map = sweep_simplex(&records, &criteria, key, 100).map_err(|e| e.to_string())?;
    check(map.points.len() == 5151, format!("{} points at r=100", map.points.len()))?;
    for (vertex, want) in [([100, 0, 0], "a"), ([0, 100, 0], "b"), ([0, 0, 100], "c")] {
        let p = map.points.iter().find(|p| p.counts == vertex).unwrap();
        check(p.winner == want, format!("vertex {vertex:?} won by {}", p.winner))?;
    }
    let sum: f64 = map.win_fractions.values().sum();
    check(close(sum, 1.0), format!("fractions sum to {sum}"))?;
    check(map.win_fractions.contains_key(TIE), "no tie entry")?;
    let small = sweep_simplex(&records, &criteria, key, 2).map_err(|e| e.to_string())?;
    check(small.points.len() == 6 && compositions(2, 3).len() == 6, "r=2 grid is not 6 points")?;
    Ok(format!("unit cases exact; vertex winners a/b/c; r=2 gives 6 points; fractions sum {sum}"))
}

fn mifs(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mifs"))
        .args(args)
        .env_remove("MIFS_OUT")
        .env_remove("MIFS_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        format!("mifs {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = tmp.path();
    let p = |s: &str| base.join(s).to_string_lossy().into_owned();
    mifs(&["--out", &p("ds"), "synth", "--samples", "24"])?;
    mifs(&["--out", &p("rank"), "rank", "--manifest", &p("ds/manifest.json")])?;
    mifs(&["--out", &p("bench"), "repro", "--quick", "--skip-gaussian"])?;
    let manifest = p("ds/manifest.json");
    let ranking = p("rank/importance_mi_t0.json");
    let accuracy = p("bench/synth/accuracy.csv");
    mifs(&["--out", &p("soft"), "select-soft", "--input", &manifest, "--ranking", &ranking, "--qp", "10"])?;
    let index = p("soft/soft_c16_qp10/payloads.json");
    let single = p("ds/features/s00000.ften");
    let runs: Vec<Vec<&str>> = vec![
        vec!["synth", "--samples", "12", "--noise-fraction", "0.1"],
        vec!["validate-gaussian", "--samples", "3000", "--repeats", "2", "--rhos", "-0.5,0.5", "--ks", "2,4"],
        vec!["estimate-mi", "--manifest", &manifest],
        vec!["rank", "--manifest", &manifest, "--criterion", "mi"],
        vec!["rank", "--manifest", &manifest, "--criterion", "l1"],
        vec!["rank", "--manifest", &manifest, "--criterion", "l2"],
        vec!["rank", "--manifest", &manifest, "--criterion", "gm"],
        vec!["select-hard", "--input", &manifest, "--ranking", &ranking],
        vec!["select-hard", "--input", &single, "--ranking", &ranking, "--keep", "0.75"],
        vec!["select-soft", "--input", &manifest, "--ranking", &ranking, "--qp", "10,40"],
        vec!["select-soft", "--input", &single, "--ranking", &ranking],
        vec!["reconstruct", "--input", &index],
        vec!["distortion", "--accuracy", &accuracy, "--keep-count", "16"],
        vec!["sweep-simplex", "--accuracy", &accuracy, "--keep-count", "16", "--qp", "10", "--resolution", "20"],
        vec!["repro", "--quick"],
    ];
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        for format in ["csv", "json"] {
            if format == "json" && matches!(args[0], "repro" | "synth" | "validate-gaussian") {
                continue;
            }
            let a = p(&format!("run{i}_{format}_a"));
            let b = p(&format!("run{i}_{format}_b"));
            let c = p(&format!("run{i}_{format}_c"));
            let mut first = vec!["--out", &a, "--threads", "1", "--format", format];
            first.extend(args.iter().copied());
            mifs(&first)?;
            let run = format!("{a}/run.json");
            mifs(&["--out", &b, "--threads", "4", "replay", "--run", &run])?;
            let mut again = vec!["--out", &c, "--threads", "3", "--format", format];
            again.extend(args.iter().copied());
            mifs(&again)?;
            let ta = tree(Path::new(&a));
            check(ta.len() > 1, format!("{} wrote nothing", args[0]))?;
            check(ta == tree(Path::new(&b)), format!("replay of {} {format} differs", args[0]))?;
            check(ta == tree(Path::new(&c)), format!("rerun of {} {format} differs", args[0]))?;
            files += ta.len();
        }
    }
    Ok(format!("{} invocations replayed byte-exactly across 1, 3 and 4 threads ({files} files)", runs.len()))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let t0 = Instant::now();
    let one = run_validation_1d(&ValidationConfig::scalar_defaults());
    let one_secs = t0.elapsed().as_secs_f64();
    let two = run_validation_2d(&ValidationConfig::patched_defaults());
    let (one, two) = match (one, two) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            let e = format!("{:?} {:?}", a.err(), b.err());
            for n in 1..=4 {
                results.push((n, "gaussian", Err(e.clone())));
            }
            (Vec::new(), Vec::new())
        }
    };
    if !one.is_empty() {
        results.push((1, "gaussian 1-D lower bound", criterion_1(&one, one_secs)));
        results.push((2, "estimator stability", criterion_2(&one)));
        results.push((3, "gaussian 2-D patching", criterion_3(&two)));
        results.push((4, "monotonicity in K", criterion_4(&one, &two)));
    }
    let spec = SynthSpec::default();
    match run_benchmark(&spec, &MiConfig::default(), &[10, 20, 30, 40]) {
        Ok(bench) => {
            results.push((5, "scale-invariance contrast", criterion_5(&spec, &bench)));
            results.push((6, "planted-relevance recovery", criterion_6(&spec, &bench)));
            results.push((7, "hard-selection percentages", criterion_7()));
            results.push((8, "soft rate-distortion", criterion_8(&spec, &bench)));
            results.push((9, "soft closes the hard gap", criterion_9(&bench)));
        }
        Err(e) => {
            for n in 5..=9 {
                results.push((n, "synthetic benchmark", Err(e.to_string())));
            }
        }
    }
    results.push((10, "multi-objective algebra", criterion_10()));
    results.push((11, "CLI determinism and replay", criterion_11()));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
