//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails that is not listed in `KNOWN_FAILURES`.
//!
//! Run with `cargo test -p umap-spectral --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use umap_spectral::data::{gen_blobs, two_blob_fixture};
use umap_spectral::fuzzy::{calibration_residual, fuzzy_graph, smooth_knn_params};
use umap_spectral::kernel::{
    fit_ab, grad_log_one_minus_phi, grad_log_phi, log_one_minus_phi_regularized, log_phi, sq_dist,
};
use umap_spectral::knn::{knn_search, KnnGraph};
use umap_spectral::lab::{
    cauchy_first_order_on, cauchy_scale_sweep, check_a3_relaxation, check_expected_loss,
    check_expected_loss_enumerated, check_gaussian_exactness, check_quadratic_identity,
    check_spectral_optimality, pipeline_graph, random_connected_graph, random_embedding, run_suite,
    SuiteConfig,
};
use umap_spectral::objective::{cross_entropy_loss, laplacian_comparison};
use umap_spectral::sgd::{init_embedding, optimize, InitMode};
use umap_spectral::{
    DataMatrix, Embedding, KernelParams, Metric, OptimizerConfig, Provenance, SimilarityGraph,
};

/// Criteria expected to fail, each analysed in the project's decision notes:
/// 6: least squares on the min-dist curve gives (1.577, 0.895) at
/// min_dist = 0.1; the customary (1.929, 0.7915) is what min_dist = 0.001
/// produces (asserted separately below).
const KNOWN_FAILURES: &[u32] = &[6];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let instances = 240;
    for i in 0..instances {
        let n = rng.random_range(3..=60);
        let d = rng.random_range(1..=5);
        let tau = [0.5, 1.0, 2.0][i % 3];
        let r = check_gaussian_exactness(n, d, tau, rng.random()).expect("instance builds");
        worst = worst.max(r.residual);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(30),
        format!("{instances} instances, max relative gap {worst:.2e}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bound_ok = true;
    let mut max_ratio = 0.0f64;
    let mut small_ok = true;
    let mut max_small = 0.0f64;
    for _ in 0..40 {
        let n = rng.random_range(5..=50);
        let d = rng.random_range(1..=4);
        let seed: u64 = rng.random();
        let v = pipeline_graph(n, seed).unwrap();
        let y = random_embedding(n, d, seed ^ 1).unwrap();
        let a = rng.random_range(0.5..=2.0);
        for scale in [3.0, 1.0, 0.1, 1e-2, 1e-3, 1e-4] {
            let r = cauchy_first_order_on(&v, &y, a, scale, seed).unwrap();
            let m = &r[0].context.measurements;
            bound_ok &= m["gap"] <= m["bound"];
            max_ratio = max_ratio.max(r[1].residual);
            if a * scale <= 1e-3 || scale <= 1e-3 / a.max(1.0) {
                small_ok &= r[0].residual <= 1e-3;
                max_small = max_small.max(r[0].residual);
            }
        }
        // Unit a keeps the threshold on distances, as stated.
        let r = cauchy_first_order_on(&v, &y, 1.0, 1e-3, seed).unwrap();
        small_ok &= r[0].residual <= 1e-3;
        max_small = max_small.max(r[0].residual);
    }
    let sweep_ok = cauchy_scale_sweep(30, 2, 1.0, 7)
        .unwrap()
        .iter()
        .all(|r| r.passed);

    // A single edge at t = a s = 0.48.
    let v = SimilarityGraph::from_edges(2, vec![(0, 1, 1.0)]).unwrap();
    let y = Embedding::new(vec![0.0, 0.48f64.sqrt()], 2, 1, Provenance::External).unwrap();
    let (attract, _, gap) =
        laplacian_comparison(&v, &y, &KernelParams::cauchy(1.0, 1.0).unwrap()).unwrap();
    let per_edge = gap / attract;
    let edge_ok = per_edge < 0.25 && (per_edge - 0.224).abs() < 5e-4;

    outcome(
        bound_ok && small_ok && sweep_ok && edge_ok,
        format!(
            "gap <= bound on all {} (max gap/bound {max_ratio:.6}); small-scale max relative gap {max_small:.2e}; \
             sweep monotone {sweep_ok}; t=0.48 relative error {:.2}%",
            40 * 6,
            per_edge * 100.0
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut graphs: Vec<(String, SimilarityGraph)> = Vec::new();
    let blobs = two_blob_fixture(50, 42).unwrap();
    let knn = knn_search(&blobs.data, 15, Metric::Euclidean).unwrap();
    graphs.push(("two-blob".into(), fuzzy_graph(&knn).unwrap().0));
    // Pipeline graphs whose random blob centers came out close enough to connect.
    let connected = (0u64..)
        .map(|seed| (seed, pipeline_graph(40, seed).unwrap()))
        .filter(|(_, g)| g.components().1 == 1)
        .take(4);
    for (seed, g) in connected {
        graphs.push((format!("pipeline seed {seed}"), g));
    }
    let mut worst_frame = f64::NEG_INFINITY;
    let mut worst_trace = 0.0f64;
    for (_, g) in &graphs {
        for d in 1..=3 {
            let r = check_spectral_optimality(g, d, 100, d as u64).unwrap();
            worst_frame = worst_frame.max(r[0].residual);
            worst_trace = worst_trace.max(r[1].residual);
        }
    }
    outcome(
        worst_trace <= 1e-8 && worst_frame <= 1e-9,
        format!(
            "{} graphs x d=1..3; |trace - eigen sum| max {worst_trace:.2e}; max(trace_sp - trace_Q) {worst_frame:.3e}",
            graphs.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let r = check_quadratic_identity(1000, 40, 4).unwrap();
    outcome(
        r.passed,
        format!("1000 random (W, Z), max relative gap {:.2e}", r.residual),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random_connected_graph(8, 0.4, &mut rng).unwrap();
    let y = random_embedding(8, 2, 55).unwrap();
    let p = KernelParams::cauchy(1.929, 0.7915).unwrap();
    let mc = check_expected_loss(&v, &y, &p, 5, 1_000_000, 5).unwrap();

    let k2 = SimilarityGraph::from_edges(2, vec![(0, 1, 0.6)]).unwrap();
    let y2 = random_embedding(2, 2, 56).unwrap();
    let exact = (0..=4)
        .map(|n_neg| check_expected_loss_enumerated(&k2, &y2, &p, n_neg).unwrap())
        .fold(0.0f64, |m, r| m.max(r.residual));
    outcome(
        mc.passed && exact <= 1e-12,
        format!(
            "8 nodes, 1e6 draws: {:.2} standard errors; K2 enumeration max relative gap {exact:.1e}",
            mc.residual
        ),
    )
}

fn criterion_6() -> Outcome {
    let fit = fit_ab(0.1).unwrap();
    let da = (fit.fitted_a - 1.929).abs() / 1.929;
    let db = (fit.fitted_b - 0.7915).abs() / 0.7915;
    outcome(
        da <= 0.02 && db <= 0.02,
        format!(
            "fit_ab(0.1) = ({:.5}, {:.5}); off by {:.1}% / {:.1}%",
            fit.fitted_a,
            fit.fitted_b,
            da * 100.0,
            db * 100.0
        ),
    )
}

/// Row 0 carries `distances`; the other rows are filler.
fn single_row(distances: &[f64]) -> KnnGraph {
    let k = distances.len();
    let n = k + 1;
    let idx = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).collect())
        .collect();
    let dst = (0..n)
        .map(|i| {
            if i == 0 {
                distances.to_vec()
            } else {
                (1..=k).map(|d| d as f64).collect()
            }
        })
        .collect();
    KnnGraph::from_rows(k, idx, dst).unwrap()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut rows, mut flagged, mut worst) = (0usize, 0usize, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(10..=80);
        let dim = rng.random_range(1..=6);
        let k = rng.random_range(2..=15.min(n - 1));
        let values: Vec<f64> = if rng.random_bool(0.2) {
            // Integer grid: many tied and duplicate distances.
            (0..n * dim)
                .map(|_| rng.random_range(0..4) as f64)
                .collect()
        } else {
            (0..n * dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        };
        let x = DataMatrix::from_flat(values, n, dim).unwrap();
        let knn = knn_search(&x, k, Metric::Euclidean).unwrap();
        let p = smooth_knn_params(&knn).unwrap();
        for i in 0..n {
            if p.flagged[i] {
                flagged += 1;
                continue;
            }
            rows += 1;
            worst = worst.max(calibration_residual(knn.distances(i), p.rho[i], p.sigma[i]));
        }
    }
    let p = smooth_knn_params(&single_row(&[1.0, 2.0, 2.0, 2.0])).unwrap();
    let sigma_err = (p.sigma[0] - 1.0 / 3f64.ln()).abs();
    outcome(
        worst <= 1e-5 && sigma_err <= 1e-6,
        format!("{rows} calibrated rows ({flagged} flagged), max residual {worst:.2e}; sigma fixture error {sigma_err:.1e}"),
    )
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[k] += h;
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let eps = 1e-3;
    let mut worst = 0.0f64;
    for t in 0..500 {
        let d = rng.random_range(1..=5);
        let p = if t % 2 == 0 {
            KernelParams::cauchy(rng.random_range(0.5..3.0), rng.random_range(0.5..1.5)).unwrap()
        } else {
            KernelParams::gaussian(rng.random_range(0.3..3.0)).unwrap()
        };
        let ya: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let yb: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (analytic, numeric) = if (t / 2) % 2 == 0 {
            (
                grad_log_phi(&ya, &yb, &p),
                central_difference(|x| log_phi(sq_dist(x, &yb), &p), &ya, 1e-6),
            )
        } else {
            (
                grad_log_one_minus_phi(&ya, &yb, &p, eps),
                central_difference(
                    |x| log_one_minus_phi_regularized(sq_dist(x, &yb), &p, eps),
                    &ya,
                    1e-6,
                ),
            )
        };
        let diff = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = numeric.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-8);
        worst = worst.max(diff / scale);
    }
    outcome(
        worst <= 1e-5,
        format!("500 checks, max relative error {worst:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let mut values = 0.0f64;
    let mut angles = 0.0f64;
    let mut split = 0.0f64;
    for (d, seed) in [(1, 90u64), (2, 91), (3, 92)] {
        let r = check_a3_relaxation(20, d, seed).unwrap();
        values = values.max(r[0].residual);
        angles = angles.max(r[1].residual);
        split = split.max(r[2].residual);
    }
    outcome(
        values <= 1e-8 && angles <= 1e-6 && split == 0.0,
        format!("3 x 20 graphs: eigenvalue gap {values:.2e}, angle {angles:.2e} rad, split NCut {split}"),
    )
}

struct EndToEnd {
    embedding: Embedding,
    initial: f64,
    final_loss: f64,
    trace_json: String,
}

fn end_to_end(init: InitMode) -> EndToEnd {
    let data = two_blob_fixture(50, 42).unwrap();
    let knn = knn_search(&data.data, 15, Metric::Euclidean).unwrap();
    let (v, _) = fuzzy_graph(&knn).unwrap();
    let fit = fit_ab(0.1).unwrap();
    let p = KernelParams::cauchy(fit.fitted_a, fit.fitted_b).unwrap();
    let y0 = init_embedding(&v, 2, init, 42).unwrap();
    let out = optimize(&v, &y0, &p, &OptimizerConfig::default()).unwrap();
    let final_loss = cross_entropy_loss(&v, &out.embedding, &p).unwrap().total;
    EndToEnd {
        trace_json: serde_json::to_string(&out.trace).unwrap(),
        initial: out.initial.unwrap().total,
        final_loss,
        embedding: out.embedding,
    }
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let run = end_to_end(InitMode::Spectral);
    let labels = two_blob_fixture(50, 42).unwrap().labels;
    let y = &run.embedding;
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..y.n() {
        for j in (i + 1)..y.n() {
            let dist = sq_dist(y.row(i), y.row(j)).sqrt();
            if labels[i] == labels[j] {
                within += dist;
                nw += 1;
            } else {
                between += dist;
                nb += 1;
            }
        }
    }
    let (within, between) = (within / nw as f64, between / nb as f64);
    let diameter = y.diameter();
    let elapsed = start.elapsed();
    outcome(
        run.final_loss < run.initial
            && diameter >= 0.1
            && between > within
            && elapsed < Duration::from_secs(60),
        format!(
            "loss {:.3} -> {:.3}, diameter {diameter:.3}, between {between:.3} vs within {within:.3}, {elapsed:.2?}",
            run.initial, run.final_loss
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut same = true;
    for init in [InitMode::Spectral, InitMode::Random] {
        let a = end_to_end(init);
        let b = end_to_end(init);
        let bits = |e: &Embedding| e.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        same &= bits(&a.embedding) == bits(&b.embedding) && a.trace_json == b.trace_json;
    }
    let cfg = SuiteConfig {
        seed: 11,
        ..Default::default()
    };
    let first = run_suite(&cfg).unwrap().to_json();
    let second = run_suite(&cfg).unwrap().to_json();
    same &= first == second;
    let data = gen_blobs(30, &[vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]], 0.7, 3).unwrap();
    same &= data == gen_blobs(30, &[vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]], 0.7, 3).unwrap();
    outcome(
        same,
        "embeddings, traces and full suite report bit-identical across repeated runs",
    )
}

/// The customary defaults do come out of the fit, at a smaller min-dist.
fn companion_6() -> Outcome {
    let fit = fit_ab(0.001).unwrap();
    let ok = (fit.fitted_a - 1.929).abs() / 1.929 <= 0.02
        && (fit.fitted_b - 0.7915).abs() / 0.7915 <= 0.02;
    outcome(
        ok,
        format!("fit_ab(0.001) = ({:.5}, {:.5})", fit.fitted_a, fit.fitted_b),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "gaussian attraction equals tr(Y^T L Y)/tau", criterion_1),
        (
            2,
            "cauchy first-order gap and second-order bound",
            criterion_2,
        ),
        (3, "spectral initialization is trace-optimal", criterion_3),
        (4, "quadratic form identity", criterion_4),
        (5, "negative-sampling expectation", criterion_5),
        (6, "fitted (a, b) at min_dist 0.1", criterion_6),
        (7, "smooth-kNN calibration", criterion_7),
        (8, "gradients against finite differences", criterion_8),
        (9, "relaxed normalized cut", criterion_9),
        (10, "two-blob end-to-end behaviour", criterion_10),
        (11, "determinism", criterion_11),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let tag = match (o.passed, KNOWN_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!(
            "[{tag}] criterion {id:>2}: {name}: {} ({:.2?})",
            o.detail,
            start.elapsed()
        );
        if o.passed {
            passed += 1;
        } else if !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    let c = companion_6();
    println!(
        "[{}] companion to 6: {}",
        if c.passed { "PASS" } else { "FAIL" },
        c.detail
    );
    if !c.passed {
        unexpected.push(6);
    }
    println!("{passed}/11 criteria passed");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
