//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p ttnborn-cli --test acceptance`.

use std::path::Path;
use std::time::{Duration, Instant};

use statrs::distribution::{ChiSquared, ContinuousCDF};
use ttn_born::data::{gen_random_patterns, load_binarized_text, Ordering, OrderingKind};
use ttn_born::factor_graph::{fg_to_ttn, TreeFactorGraph};
use ttn_born::sample::{sample_batch, stream, Sampler};
use ttn_born::train::{
    gradient_merged, gradient_one_site, merge_pair, split_pair, sweep_epoch, sweep_epoch_observed, MergedPair, Scheme,
    SweepEvent, TrainConfig,
};
use ttn_born::{Model, ModelKind, Tensor};

struct Outcome {
    ok: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        ok: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        ok: false,
        detail: detail.into(),
    }
}

fn bits(x: usize, n: usize) -> Vec<u8> {
    (0..n).map(|p| ((x >> p) & 1) as u8).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-8 || (a - b).abs() <= 1e-5 * b.abs()
}

fn timed(limit: Duration, start: Instant, mut o: Outcome) -> Outcome {
    let t = start.elapsed();
    o.detail = format!("{} [{:.1}s, limit {}s]", o.detail, t.as_secs_f64(), limit.as_secs());
    if t > limit {
        o.ok = false;
    }
    o
}

/// Ψ(x)² for every configuration.
fn weights(m: &Model) -> Vec<f64> {
    (0..1usize << m.n_pixels())
        .map(|x| m.amplitude(&bits(x, m.n_pixels())).unwrap().value().powi(2))
        .collect()
}

fn exactness() -> Outcome {
    let start = Instant::now();
    let n = 8;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        for kind in [ModelKind::Ttn, ModelKind::Mps] {
            let d = 2 + (seed as usize % 3);
            let m = Model::random(kind, n, d, seed).unwrap();
            let w = weights(&m);
            let z: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / z).collect();
            worst = worst.max((m.log_partition().unwrap() - z.ln()).abs());
            let total: f64 = (0..256).map(|x| m.log_prob(&bits(x, n)).unwrap().exp()).sum();
            worst = worst.max((total - 1.0).abs());
            let mass = |pred: &dyn Fn(&[u8]) -> bool| -> f64 {
                (0..256).filter(|&x| pred(&bits(x, n))).map(|x| p[x]).sum()
            };
            let free = m.all_marginals(&[None; 8]).unwrap();
            for k in 0..n {
                let want = mass(&|s| s[k] == 1);
                worst = worst.max((m.marginal(&[], k).unwrap()[1] - want).abs());
                worst = worst.max((free[k][1] - want).abs());
            }
            let (i, j) = ((seed as usize) % n, (seed as usize + 3) % n);
            for (vi, vj) in [(0u8, 1u8), (1, 1)] {
                let ev = mass(&|s| s[i] == vi && s[j] == vj);
                let mut clamps = [None; 8];
                clamps[i] = Some(vi);
                clamps[j] = Some(vj);
                let cond = m.all_marginals(&clamps).unwrap();
                for k in (0..n).filter(|&k| k != i && k != j) {
                    let want = mass(&|s| s[i] == vi && s[j] == vj && s[k] == 1) / ev;
                    worst = worst.max((m.marginal(&[(i, vi), (j, vj)], k).unwrap()[1] - want).abs());
                    worst = worst.max((cond[k][1] - want).abs());
                }
            }
            let spin = |v: u8| 2.0 * v as f64 - 1.0;
            for a in 0..n {
                let map = m.correlation_map(a).unwrap();
                for b in 0..n {
                    let e_ab: f64 = (0..256).map(|x| {
                        let s = bits(x, n);
                        p[x] * spin(s[a]) * spin(s[b])
                    }).sum();
                    let e_a: f64 = (0..256).map(|x| p[x] * spin(bits(x, n)[a])).sum();
                    let e_b: f64 = (0..256).map(|x| p[x] * spin(bits(x, n)[b])).sum();
                    let want = e_ab - e_a * e_b;
                    worst = worst.max((map[b] - want).abs());
                    if a != b {
                        worst = worst.max((m.correlation(a, b).unwrap() - want).abs());
                    }
                }
            }
        }
    }
    let o = if worst < 1e-10 { pass } else { fail }(format!("worst deviation {worst:.2e} over 20 seeds, ttn and mps"));
    timed(Duration::from_secs(10), start, o)
}

fn patterns(count: usize, n: usize, seed: u64) -> Vec<Vec<u8>> {
    gen_random_patterns(n, count, seed, true).unwrap().samples
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut bad = Vec::new();
    let h = 1e-5;
    for seed in 0..5u64 {
        let data = patterns(6, 8, 100 + seed);
        for kind in [ModelKind::Ttn, ModelKind::Mps] {
            let mut m = Model::random(kind, 8, 3, seed).unwrap();
            for k in 0..m.n_nodes() {
                m.canonicalize(k).unwrap();
                let g = gradient_one_site(&m, &data, k).unwrap().represented();
                let t = m.tensor(k).clone();
                let base = t.represented();
                for i in 0..base.len() {
                    let eval = |d: f64| {
                        let mut v = base.clone();
                        v[i] += d;
                        let mut mm = m.clone();
                        mm.network_mut().replace_tensor(k, Tensor::new(t.shape().to_vec(), v).unwrap()).unwrap();
                        mm.nll(&data).unwrap()
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    checked += 1;
                    if !close(g[i], fd) {
                        bad.push(format!("{kind:?} one-site node {k} entry {i}: {} vs {fd}", g[i]));
                    }
                }
                let neighbors: Vec<usize> = m.neighbors(k).collect();
                for b in neighbors {
                    let pair = merge_pair(&m, k, b).unwrap();
                    let g = gradient_merged(&m, &pair, &data).unwrap().represented();
                    let base = pair.tensor.represented();
                    let shape = pair.tensor.shape().to_vec();
                    let exact = TrainConfig {
                        d_max: 1 << 20,
                        svd_cutoff: 0.0,
                        ..TrainConfig::default()
                    };
                    for i in 0..base.len() {
                        let eval = |d: f64| {
                            let mut v = base.clone();
                            v[i] += d;
                            let p = MergedPair {
                                tensor: Tensor::new(shape.clone(), v).unwrap(),
                                center: k,
                                neighbor: b,
                            };
                            let mut mm = m.clone();
                            split_pair(&mut mm, &p, &exact).unwrap();
                            mm.nll(&data).unwrap()
                        };
                        let fd = (eval(h) - eval(-h)) / (2.0 * h);
                        checked += 1;
                        if !close(g[i], fd) {
                            bad.push(format!("{kind:?} two-site ({k},{b}) entry {i}: {} vs {fd}", g[i]));
                        }
                    }
                }
            }
        }
    }
    let o = if bad.is_empty() {
        pass(format!("{checked} entries within 1e-5 rel / 1e-8 abs"))
    } else {
        fail(format!("{} of {checked} entries off, first: {}", bad.len(), bad[0]))
    };
    timed(Duration::from_secs(30), start, o)
}

fn canonical_forms() -> Outcome {
    let start = Instant::now();
    let data = patterns(6, 8, 7);
    let mut worst_defect = 0.0f64;
    let mut worst_lp = 0.0f64;
    let mut splits = 0;
    for seed in 0..5u64 {
        for kind in [ModelKind::Ttn, ModelKind::Mps] {
            let mut m = Model::random(kind, 8, 4, seed).unwrap();
            worst_defect = worst_defect.max(m.canonical_defect().unwrap());
            let base: Vec<f64> = (0..256).map(|x| m.log_prob(&bits(x, 8)).unwrap()).collect();
            for c in 0..m.n_nodes() {
                m.canonicalize(c).unwrap();
                worst_defect = worst_defect.max(m.canonical_defect().unwrap());
                for (x, b) in base.iter().enumerate() {
                    worst_lp = worst_lp.max((m.log_prob(&bits(x, 8)).unwrap() - b).abs());
                }
            }
            for scheme in [Scheme::OneSite, Scheme::TwoSite] {
                let cfg = TrainConfig {
                    scheme,
                    d_max: 4,
                    ..TrainConfig::default()
                };
                let mut mm = m.clone();
                mm.canonicalize(mm.sweep_anchor()).unwrap();
                for epoch in 1..=2 {
                    sweep_epoch_observed(&mut mm, &data, &cfg, epoch, &mut |s, e| {
                        if matches!(e, SweepEvent::Split(..)) {
                            splits += 1;
                        }
                        worst_defect = worst_defect.max(s.canonical_defect().unwrap());
                    })
                    .unwrap();
                }
            }
        }
    }
    let o = if worst_defect < 1e-10 && worst_lp < 1e-10 { pass } else { fail }(format!(
        "max identity defect {worst_defect:.2e} (incl. {splits} splits), max log-prob drift under center moves {worst_lp:.2e}"
    ));
    timed(Duration::from_secs(60), start, o)
}

/// Trains until the gap to `ln|T|` drops below `target` or `epochs` run out.
fn fit(m: &mut Model, data: &[Vec<u8>], d_max: usize, epochs: usize, target: f64) -> (f64, usize) {
    let cfg = TrainConfig {
        d_max,
        scheme: Scheme::TwoSite,
        ..TrainConfig::default()
    };
    m.set_d_max(d_max).unwrap();
    m.canonicalize(m.sweep_anchor()).unwrap();
    let floor = (data.len() as f64).ln();
    let mut gap = m.nll(data).unwrap() - floor;
    for epoch in 1..=epochs {
        gap = sweep_epoch(m, data, &cfg, epoch).unwrap().nll - floor;
        if gap < target {
            return (gap, epoch);
        }
    }
    (gap, epochs)
}

fn memorization() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [10usize, 30, 50] {
        let data = patterns(t, 16, t as u64);
        let mut m = Model::random(ModelKind::Ttn, 16, t, 1).unwrap();
        let (gap, used) = fit(&mut m, &data, t, 200, 0.02);
        ok &= gap < 0.02;
        let mut small = Model::random(ModelKind::Ttn, 16, t / 2, 1).unwrap();
        let (gap_small, _) = fit(&mut small, &data, t / 2, 200, 0.0);
        ok &= gap_small > 0.1;
        parts.push(format!("|T|={t}: gap {gap:.4} after {used} epochs, D={} gap {gap_small:.3}", t / 2));
    }
    let o = if ok { pass } else { fail }(parts.join("; "));
    timed(Duration::from_secs(300), start, o)
}

const SIZE_EPOCHS: usize = 20;

fn system_size() -> Vec<Outcome> {
    let start = Instant::now();
    let mut ttn_ok = true;
    let mut parts = Vec::new();
    let mut data_1024 = Vec::new();
    for n in [64usize, 256, 1024] {
        let data = patterns(10, n, 5);
        let mut m = Model::random(ModelKind::Ttn, n, 10, 2).unwrap();
        let (gap, used) = fit(&mut m, &data, 10, SIZE_EPOCHS, 0.0);
        ttn_ok &= gap < 0.05;
        parts.push(format!("n={n} gap {gap:.4} ({used} epochs)"));
        if n == 1024 {
            data_1024 = data;
        }
    }
    let ttn_gap_1024 = parts.last().cloned().unwrap_or_default();
    let mut mps = Model::random(ModelKind::Mps, 1024, 12, 2).unwrap();
    let (mps_gap, _) = fit(&mut mps, &data_1024, 12, SIZE_EPOCHS, 0.0);
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(1800);
    vec![
        timed(
            limit,
            start,
            if ttn_ok { pass } else { fail }(format!("ttn D=10, {SIZE_EPOCHS} epochs: {}", parts.join(", "))),
        ),
        Outcome {
            ok: mps_gap > 0.1 && elapsed <= limit,
            detail: format!(
                "mps D=12 n=1024 gap {mps_gap:.4} vs ttn {ttn_gap_1024} under the same {SIZE_EPOCHS}-epoch budget"
            ),
        },
    ]
}

fn sampler() -> Outcome {
    let start = Instant::now();
    let m = Model::random(ModelKind::Ttn, 8, 4, 17).unwrap();
    let w = weights(&m);
    let z: f64 = w.iter().sum();
    let draws = 1_000_000usize;
    let samples = sample_batch(&m, draws, 99).unwrap();
    let mut counts = vec![0f64; 256];
    for s in &samples {
        counts[s.iter().enumerate().map(|(p, &b)| (b as usize) << p).sum::<usize>()] += 1.0;
    }
    let mut cells: Vec<(f64, f64)> = w.iter().map(|x| x / z * draws as f64).zip(counts).collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pooled = Vec::new();
    let (mut e, mut o) = (0.0, 0.0);
    for (ei, oi) in cells {
        e += ei;
        o += oi;
        if e >= 5.0 {
            pooled.push((e, o));
            e = 0.0;
            o = 0.0;
        }
    }
    if let Some(last) = pooled.last_mut() {
        last.0 += e;
        last.1 += o;
    }
    let stat: f64 = pooled.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let df = (pooled.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);

    let sampler = Sampler::new(&m).unwrap();
    let mut worst = 0.0f64;
    for i in 0..1000u64 {
        let tr = sampler.sample_traced(&mut stream(5, i)).unwrap();
        let product: f64 = tr.conditionals.iter().product();
        worst = worst.max((product - m.log_prob(&tr.sample).unwrap().exp()).abs());
    }
    let o = if p_value > 0.01 && worst < 1e-10 { pass } else { fail }(format!(
        "chi-square {stat:.1} on {df} dof, p = {p_value:.3}; chain-rule worst {worst:.2e} on 1000 draws"
    ));
    timed(Duration::from_secs(120), start, o)
}

const MNIST_EPOCHS: usize = 30;

fn mnist() -> Outcome {
    let start = Instant::now();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mnist20.txt");
    let set = load_binarized_text(&path).unwrap();
    let ordering = Ordering::new(OrderingKind::Hierarchical2d, set.shape).unwrap();
    let xs = ordering.apply(&set).unwrap();
    let mut m = Model::random(ModelKind::Ttn, ordering.padded_len(), 20, 3).unwrap();
    let (gap, used) = fit(&mut m, &xs, 20, MNIST_EPOCHS, 0.0);
    let samples = sample_batch(&m, 200, 11).unwrap();
    let hits = samples.iter().filter(|s| xs.contains(s)).count();
    let o = if gap < 0.1 && hits == 200 { pass } else { fail }(format!(
        "20 images on a 32x32 canvas, D=20: NLL - ln 20 = {gap:.4} after {used} epochs; {hits}/200 samples are training images"
    ));
    timed(Duration::from_secs(1800), start, o)
}

fn factor_graphs() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut clampings = 0;
    for k in 0..100u64 {
        let n = [2usize, 4, 8, 16][k as usize % 4];
        let fg = TreeFactorGraph::heap_random(n, 1.5, k).unwrap();
        let model = fg_to_ttn(&fg).unwrap();
        let contract = |c: &[Option<u8>]| {
            model
                .contract_with(|p| match c[p] {
                    None => [1.0, 1.0],
                    Some(0) => [1.0, 0.0],
                    Some(_) => [0.0, 1.0],
                })
                .log_abs
        };
        let mut c = vec![None; n];
        worst = worst.max((contract(&c) - fg.log_z_pixels(&c).unwrap()).abs());
        for p in 0..n {
            for v in 0..2u8 {
                c[p] = Some(v);
                worst = worst.max((contract(&c) - fg.log_z_pixels(&c).unwrap()).abs());
                clampings += 1;
            }
            c[p] = None;
        }
    }
    let o = if worst < 1e-10 { pass } else { fail }(format!(
        "100 graphs with 2 to 16 pixels, free Z and {clampings} single-pixel clampings: worst |Δ ln Z| {worst:.2e}"
    ));
    timed(Duration::from_secs(60), start, o)
}

fn cli(args: &[&str]) {
    let mut sink = Vec::new();
    ttnborn_cli::run(std::iter::once("ttnborn").chain(args.iter().copied()), &mut sink).unwrap();
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("pats.txt");
    cli(&["gen-random", "--n", "16", "--count", "12", "--seed", "4", "--out", data.to_str().unwrap()]);
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for model in ["ttn", "mps", "treefg"] {
        let mut outputs = Vec::new();
        for (run, threads) in [(0, "1"), (1, "1"), (2, "4")] {
            let out = root.join(format!("{model}-{run}"));
            let o = out.to_str().unwrap();
            cli(&[
                "train", "--model", model, "--data", data.to_str().unwrap(), "--dmax", "6", "--epochs", "4",
                "--batch-size", "8", "--seed", "21", "--checkpoint-every", "2", "--out", o, "--threads", threads,
            ]);
            if model != "treefg" {
                let ck = out.join("model.ttnborn");
                let c = ck.to_str().unwrap();
                cli(&["correlate", "--checkpoint", c, "--pixels", "0,5", "--out", o, "--threads", threads]);
                cli(&["sample", "--checkpoint", c, "--count", "8", "--seed", "3", "--out", o, "--threads", threads]);
            }
            let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
            files.sort();
            outputs.push(
                files
                    .into_iter()
                    .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(&p).unwrap()))
                    .collect::<Vec<_>>(),
            );
        }
        for other in &outputs[1..] {
            compared += other.len();
            if other != &outputs[0] {
                mismatches.push(model);
            }
        }
    }
    let o = if mismatches.is_empty() {
        pass(format!("{compared} files byte-identical across reruns and 1 vs 4 threads"))
    } else {
        fail(format!("outputs differ for {mismatches:?}"))
    };
    timed(Duration::from_secs(120), start, o)
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| id.contains(f.as_str()));
    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut run = |id: &str, f: &dyn Fn() -> Vec<Outcome>| {
        if wanted(id) {
            for (k, o) in f().into_iter().enumerate() {
                let label = if k == 0 { id.to_string() } else { format!("{id} (directional)") };
                println!("[{}] {label}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
                results.push((label, o));
            }
        }
    };
    run("1-exactness", &|| vec![exactness()]);
    run("2-gradients", &|| vec![gradients()]);
    run("3-canonical", &|| vec![canonical_forms()]);
    run("4-memorization", &|| vec![memorization()]);
    run("5-system-size", &system_size);
    run("6-sampler", &|| vec![sampler()]);
    run("7-mnist", &|| vec![mnist()]);
    run("8-factor-graph", &|| vec![factor_graphs()]);
    run("9-determinism", &|| vec![determinism()]);
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.ok).map(|(l, _)| l.as_str()).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
