//! Numerical checks that UMAP's objective, initialization and optimizer
//! coincide with spectral clustering on the fuzzy graph.
//!
//! Every check returns [`EquivalenceReport`]s carrying the measured residual
//! and the tolerance it was held to. Instances are built through the real
//! pipeline (blobs, k-NN, fuzzy graph) unless stated otherwise.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::{gen_blobs, two_blob_fixture};
use crate::error::{Error, Result};
use crate::fuzzy::{fuzzy_graph, SimilarityGraph};
use crate::kernel::{sq_dist, KernelParams};
use crate::knn::{knn_search, Metric};
use crate::objective::{
    attractive_term, expected_sgd_loss, laplacian_comparison, stochastic_step_loss,
    taylor_error_bound,
};
use crate::sgd::{sample_step_losses, EdgeSampler, Embedding, Provenance};
use crate::spectra::{
    build_laplacians, laplacian_quadratic, ncut, ncut_relaxation_check, rayleigh_trace,
    sorted_eigen, spectral_init, Partition, NULL_THRESHOLD,
};

pub const EXACT_TOLERANCE: f64 = 1e-10;
pub const SPECTRAL_TOLERANCE: f64 = 1e-9;
pub const TRACE_TOLERANCE: f64 = 1e-8;
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const ANGLE_TOLERANCE: f64 = 1e-6;
/// Monte Carlo tolerance, in standard errors.
pub const SIGMA_UNITS: f64 = 3.0;
pub const MIN_DRAWS: usize = 100_000;
pub const SCALE_SWEEP: [f64; 3] = [0.1, 0.01, 0.001];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ClaimId {
    #[serde(rename = "thm3.1a")]
    GaussianExact,
    #[serde(rename = "thm3.1b")]
    CauchyFirstOrder,
    #[serde(rename = "thm3.1c")]
    SpectralOptimal,
    #[serde(rename = "eq13_montecarlo")]
    ExpectedLoss,
    #[serde(rename = "lemmaA1")]
    QuadraticIdentity,
    #[serde(rename = "eq20_bound")]
    TaylorBound,
    #[serde(rename = "a3_relaxation")]
    NcutRelaxation,
}

impl ClaimId {
    pub const ALL: [ClaimId; 7] = [
        ClaimId::GaussianExact,
        ClaimId::CauchyFirstOrder,
        ClaimId::SpectralOptimal,
        ClaimId::ExpectedLoss,
        ClaimId::QuadraticIdentity,
        ClaimId::TaylorBound,
        ClaimId::NcutRelaxation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimId::GaussianExact => "thm3.1a",
            ClaimId::CauchyFirstOrder => "thm3.1b",
            ClaimId::SpectralOptimal => "thm3.1c",
            ClaimId::ExpectedLoss => "eq13_montecarlo",
            ClaimId::QuadraticIdentity => "lemmaA1",
            ClaimId::TaylorBound => "eq20_bound",
            ClaimId::NcutRelaxation => "a3_relaxation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown claim id {s:?}")))
    }
}

impl std::fmt::Display for ClaimId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Instance descriptor plus any named side measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Context {
    pub n: usize,
    pub d: usize,
    pub kernel: String,
    pub seed: u64,
    pub label: String,
    pub measurements: BTreeMap<String, f64>,
}

impl Context {
    pub fn new(
        n: usize,
        d: usize,
        kernel: impl Into<String>,
        seed: u64,
        label: impl Into<String>,
    ) -> Self {
        Self {
            n,
            d,
            kernel: kernel.into(),
            seed,
            label: label.into(),
            measurements: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.measurements.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub claim: ClaimId,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub context: Context,
}

impl EquivalenceReport {
    /// `passed` is derived here and nowhere else. NaN never passes.
    pub fn new(claim: ClaimId, residual: f64, tolerance: f64, context: Context) -> Self {
        Self {
            claim,
            residual,
            tolerance,
            passed: residual <= tolerance,
            context,
        }
    }
}

/// Deliberate faults for mutation-testing the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sabotage {
    /// Flip the sign of the Laplacian quadratic form in the Gaussian check.
    LaplacianSign,
}

impl Sabotage {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "laplacian-sign" => Ok(Sabotage::LaplacianSign),
            other => Err(Error::Config(format!("unknown sabotage mode {other:?}"))),
        }
    }
}

/// Seed for one claim, derived from the master seed and the claim name.
pub fn claim_seed(master: u64, claim: ClaimId) -> u64 {
    // FNV-1a over the claim name, mixed with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ master;
    for byte in claim.as_str().bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn relative_gap(reference: f64, other: f64) -> f64 {
    let gap = (reference - other).abs();
    if gap == 0.0 {
        0.0
    } else {
        gap / reference.abs()
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Standard-normal embedding of `n` points in `d` dimensions.
pub fn random_embedding(n: usize, d: usize, seed: u64) -> Result<Embedding> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Embedding::new(coords, n, d, Provenance::Random)
}

/// Fuzzy graph of `n` points from two unit-variance blobs in three dimensions
/// with random centers; `k = min(10, n - 1)`.
pub fn pipeline_graph(n: usize, seed: u64) -> Result<SimilarityGraph> {
    if n < 3 {
        return Err(Error::Config(format!(
            "pipeline instances need n >= 3, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let per = n.div_ceil(2);
    let blobs = gen_blobs(per, &centers, 1.0, rng.random())?;
    let x = crate::data::DataMatrix::from_flat(blobs.data.as_slice()[..n * 3].to_vec(), n, 3)?;
    let knn = knn_search(&x, 10.min(n - 1), Metric::Euclidean)?;
    Ok(fuzzy_graph(&knn)?.0)
}

/// Connected graph on `n` vertices: a path through a random permutation plus
/// extra edges with probability `density`, all weights uniform in `(0, 1]`.
pub fn random_connected_graph(
    n: usize,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SimilarityGraph> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut weights = vec![0.0; n * n];
    let mut put = |i: usize, j: usize, w: f64| {
        let (i, j) = (i.min(j), i.max(j));
        weights[i * n + j] = w;
    };
    for pair in order.windows(2) {
        put(pair[0], pair[1], 1.0 - rng.random::<f64>());
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                put(i, j, 1.0 - rng.random::<f64>());
            }
        }
    }
    let edges = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let w = weights[i * n + j];
            (w > 0.0).then_some((i, j, w))
        });
    SimilarityGraph::from_edges(n, edges.collect::<Vec<_>>())
}

fn gaussian_exactness(
    n: usize,
    d: usize,
    tau: f64,
    seed: u64,
    sabotage: Option<Sabotage>,
) -> Result<EquivalenceReport> {
    let v = pipeline_graph(n, seed)?;
    let y = random_embedding(n, d, seed.wrapping_add(1))?;
    gaussian_exactness_on(&v, &y, tau, seed, sabotage)
}

fn gaussian_exactness_on(
    v: &SimilarityGraph,
    y: &Embedding,
    tau: f64,
    seed: u64,
    sabotage: Option<Sabotage>,
) -> Result<EquivalenceReport> {
    let p = KernelParams::gaussian(tau)?;
    let (attract, mut form, _) = laplacian_comparison(v, y, &p)?;
    if sabotage == Some(Sabotage::LaplacianSign) {
        form = -form;
    }
    let ctx = Context::new(v.n(), y.dim(), p.to_string(), seed, "gaussian exactness")
        .with("attract", attract)
        .with("laplacian_form", form);
    Ok(EquivalenceReport::new(
        ClaimId::GaussianExact,
        relative_gap(attract, form),
        EXACT_TOLERANCE,
        ctx,
    ))
}

/// Relative gap between the Gaussian attraction and `tr(Y^T L Y) / tau` on a
/// pipeline graph with a standard-normal embedding.
pub fn check_gaussian_exactness(
    n: usize,
    d: usize,
    tau: f64,
    seed: u64,
) -> Result<EquivalenceReport> {
    gaussian_exactness(n, d, tau, seed, None)
}

/// As [`check_gaussian_exactness`] on a caller-supplied graph and embedding.
pub fn check_gaussian_exactness_on(
    v: &SimilarityGraph,
    y: &Embedding,
    tau: f64,
) -> Result<EquivalenceReport> {
    gaussian_exactness_on(v, y, tau, 0, None)
}

/// Rescales `y` so the largest squared distance across an edge is `scale`.
pub fn scale_to_neighbors(v: &SimilarityGraph, y: &Embedding, scale: f64) -> Result<Embedding> {
    let max_sq = v
        .edges()
        .iter()
        .map(|&(i, j, _)| sq_dist(y.row(i), y.row(j)))
        .fold(0.0, f64::max);
    if max_sq == 0.0 {
        return Err(Error::Config(
            "all neighbors coincide; cannot rescale".into(),
        ));
    }
    let f = (scale / max_sq).sqrt();
    Embedding::new(
        y.as_slice().iter().map(|c| c * f).collect(),
        y.n(),
        y.dim(),
        y.provenance,
    )
}

/// One scale of the Cauchy (`b = 1`) comparison. Returns two reports:
///
/// * `thm3.1b`: relative gap between the attraction and `2a tr(Y^T L Y)`,
///   held to `a * scale` (each edge's relative error is at most `t / 2` for
///   `t = a s <= a * scale`);
/// * `eq20_bound`: `gap / bound`, held to 1.
pub fn check_cauchy_first_order(
    n: usize,
    d: usize,
    a: f64,
    scale: f64,
    seed: u64,
) -> Result<Vec<EquivalenceReport>> {
    let v = pipeline_graph(n, seed)?;
    let y = random_embedding(n, d, seed.wrapping_add(1))?;
    cauchy_first_order_on(&v, &y, a, scale, seed)
}

pub fn cauchy_first_order_on(
    v: &SimilarityGraph,
    y: &Embedding,
    a: f64,
    scale: f64,
    seed: u64,
) -> Result<Vec<EquivalenceReport>> {
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::Config(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let p = KernelParams::cauchy(a, 1.0)?;
    let y = scale_to_neighbors(v, y, scale)?;
    let (attract, form, gap) = laplacian_comparison(v, &y, &p)?;
    let bound = taylor_error_bound(v, &y, a)?;
    let ctx = Context::new(
        v.n(),
        y.dim(),
        p.to_string(),
        seed,
        format!("scale {scale}"),
    )
    .with("scale", scale)
    .with("attract", attract)
    .with("laplacian_form", form)
    .with("gap", gap)
    .with("bound", bound);
    let ratio = if gap == 0.0 { 0.0 } else { gap / bound };
    Ok(vec![
        EquivalenceReport::new(
            ClaimId::CauchyFirstOrder,
            relative_gap(attract, form),
            a * scale,
            ctx.clone(),
        ),
        EquivalenceReport::new(ClaimId::TaylorBound, ratio, 1.0, ctx),
    ])
}

/// Relative gaps across [`SCALE_SWEEP`], plus one report asserting they
/// strictly decrease (residual 0 when they do, 1 otherwise; tolerance 0).
pub fn cauchy_scale_sweep(n: usize, d: usize, a: f64, seed: u64) -> Result<Vec<EquivalenceReport>> {
    let v = pipeline_graph(n, seed)?;
    let y = random_embedding(n, d, seed.wrapping_add(1))?;
    let mut out = Vec::new();
    let mut gaps = Vec::new();
    for scale in SCALE_SWEEP {
        let reports = cauchy_first_order_on(&v, &y, a, scale, seed)?;
        gaps.push(reports[0].residual);
        out.extend(reports);
    }
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let mut ctx = Context::new(
        n,
        d,
        format!("cauchy(a={a}, b=1)"),
        seed,
        "relative gap decreases with scale",
    );
    for (s, g) in SCALE_SWEEP.iter().zip(&gaps) {
        ctx = ctx.with(&format!("gap_at_{s}"), *g);
    }
    out.push(EquivalenceReport::new(
        ClaimId::CauchyFirstOrder,
        if monotone { 0.0 } else { 1.0 },
        0.0,
        ctx,
    ));
    Ok(out)
}

/// Orthonormal `n x d` frame orthogonal to the columns of `null`.
fn random_frame(rng: &mut ChaCha8Rng, null: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let g = normal_matrix(rng, null.nrows(), d);
    let projected = &g - null * (null.transpose() * &g);
    projected.qr().q()
}

/// Spectral initialization against random competitors. Returns two reports
/// (both `thm3.1c`):
///
/// * the largest `tr(Y_sp^T L~ Y_sp) - tr(Q^T L~ Q)` over `trials` random
///   orthonormal frames orthogonal to the null space, held to 1e-9;
/// * `|tr(Y_sp^T L~ Y_sp) - sum of the d smallest non-null eigenvalues|`,
///   held to 1e-8.
pub fn check_spectral_optimality(
    v: &SimilarityGraph,
    d: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<EquivalenceReport>> {
    let (_, components) = v.components();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let sol = spectral_init(v, d)?;
    let lap = build_laplacians(v)?.normalized.to_dense();
    let (values, vectors) = sorted_eigen(lap.clone());
    let n_null = values
        .iter()
        .take_while(|&&l| l.abs() <= NULL_THRESHOLD)
        .count();
    let null = vectors.columns(0, n_null).into_owned();

    let optimum = rayleigh_trace(&lap, &sol.vectors);
    let eigen_sum: f64 = values[n_null..n_null + d].iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let q = random_frame(&mut rng, &null, d);
        worst = worst.max(optimum - rayleigh_trace(&lap, &q));
    }
    let ctx = Context::new(
        v.n(),
        d,
        "normalized laplacian",
        seed,
        format!("{trials} random frames"),
    )
    .with("optimum", optimum)
    .with("eigen_sum", eigen_sum)
    .with("trials", trials as f64);
    Ok(vec![
        EquivalenceReport::new(
            ClaimId::SpectralOptimal,
            worst,
            SPECTRAL_TOLERANCE,
            ctx.clone(),
        ),
        EquivalenceReport::new(
            ClaimId::SpectralOptimal,
            (optimum - eigen_sum).abs(),
            TRACE_TOLERANCE,
            ctx.with("label_trace", 1.0),
        ),
    ])
}

/// Sum of all edge weights over ordered pairs, `sum_a d_a`.
fn total_weight(v: &SimilarityGraph) -> f64 {
    v.degrees().iter().sum()
}

/// Monte Carlo estimate of one epoch's loss against [`expected_sgd_loss`].
///
/// The per-step mean is rescaled by `W = sum_a d_a` (the epoch aggregate)
/// and the residual is expressed in standard errors. When the samples carry
/// no variance the comparison is relative, at 1e-12.
pub fn check_expected_loss(
    v: &SimilarityGraph,
    y: &Embedding,
    p: &KernelParams,
    n_neg: usize,
    n_draws: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    if n_draws < MIN_DRAWS {
        return Err(Error::Config(format!(
            "need at least {MIN_DRAWS} draws, got {n_draws}"
        )));
    }
    let mut sampler = EdgeSampler::new(v, seed)?;
    let losses = sample_step_losses(&mut sampler, y, p, n_neg, n_draws);
    let m = n_draws as f64;
    // Shifted by the first sample so identical draws average exactly.
    let shift = losses[0];
    let offset = losses.iter().map(|l| l - shift).sum::<f64>() / m;
    let mean = shift + offset;
    let var = losses
        .iter()
        .map(|l| (l - shift - offset).powi(2))
        .sum::<f64>()
        / (m - 1.0);
    let w = total_weight(v);
    let estimate = w * mean;
    let stderr = w * (var / m).sqrt();
    let expected = expected_sgd_loss(v, y, p, n_neg)?;

    let ctx = Context::new(
        v.n(),
        y.dim(),
        p.to_string(),
        seed,
        format!("{n_draws} draws, n_neg {n_neg}"),
    )
    .with("estimate", estimate)
    .with("expected", expected)
    .with("stderr", stderr);
    let gap = (estimate - expected).abs();
    Ok(if stderr <= IDENTITY_TOLERANCE * expected.abs() {
        EquivalenceReport::new(
            ClaimId::ExpectedLoss,
            relative_gap(expected, estimate),
            IDENTITY_TOLERANCE,
            ctx,
        )
    } else {
        EquivalenceReport::new(ClaimId::ExpectedLoss, gap / stderr, SIGMA_UNITS, ctx)
    })
}

/// Exact epoch expectation by enumerating every ordered positive pair and
/// every tuple of `n_neg` negatives. Cost is `|E| * n^n_neg`.
pub fn enumerate_expected_loss(
    v: &SimilarityGraph,
    y: &Embedding,
    p: &KernelParams,
    n_neg: usize,
) -> Result<f64> {
    let n = v.n();
    let tuples = (n as u64)
        .checked_pow(n_neg as u32)
        .filter(|&t| t <= 1_000_000)
        .ok_or_else(|| {
            Error::Config(format!(
                "{n}^{n_neg} negative tuples is too many to enumerate"
            ))
        })?;
    let w = total_weight(v);
    let mut negs = vec![0usize; n_neg];
    let mut total = 0.0;
    for &(i, j, vij) in v.edges() {
        for (a, b) in [(i, j), (j, i)] {
            let mut sum = 0.0;
            for t in 0..tuples {
                let mut rest = t;
                for slot in negs.iter_mut() {
                    *slot = (rest % n as u64) as usize;
                    rest /= n as u64;
                }
                sum += stochastic_step_loss(a, b, &negs, y, p);
            }
            total += vij / w * sum / tuples as f64;
        }
    }
    Ok(w * total)
}

/// [`enumerate_expected_loss`] against [`expected_sgd_loss`], relative, at 1e-12.
pub fn check_expected_loss_enumerated(
    v: &SimilarityGraph,
    y: &Embedding,
    p: &KernelParams,
    n_neg: usize,
) -> Result<EquivalenceReport> {
    let exact = enumerate_expected_loss(v, y, p, n_neg)?;
    let expected = expected_sgd_loss(v, y, p, n_neg)?;
    let ctx = Context::new(
        v.n(),
        y.dim(),
        p.to_string(),
        0,
        format!("full enumeration, n_neg {n_neg}"),
    )
    .with("enumerated", exact)
    .with("expected", expected);
    Ok(EquivalenceReport::new(
        ClaimId::ExpectedLoss,
        relative_gap(expected, exact),
        IDENTITY_TOLERANCE,
        ctx,
    ))
}

/// `tr(Z^T L Z) = 1/2 sum_ij W_ij |Z_i - Z_j|^2` on `trials` random weight
/// matrices (sizes 2..=`n_max`, random sparsity) and random `Z`. The matrix
/// side builds `L = D - W` densely, independent of the graph code.
pub fn check_quadratic_identity(
    trials: usize,
    n_max: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    if n_max < 2 {
        return Err(Error::Config("n_max must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.random_range(2..=n_max);
        let d = rng.random_range(1..=5);
        let density: f64 = rng.random_range(0.1..=1.0);
        let mut w = DMatrix::zeros(n, n);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < density {
                    let x = 1.0 - rng.random::<f64>();
                    w[(i, j)] = x;
                    w[(j, i)] = x;
                    edges.push((i, j, x));
                }
            }
        }
        let z = normal_matrix(&mut rng, n, d);
        let mut lap = -w.clone();
        for i in 0..n {
            lap[(i, i)] = w.row(i).sum();
        }
        let matrix_form = rayleigh_trace(&lap, &z);

        let graph = SimilarityGraph::from_edges(n, edges)?;
        let row_major: Vec<f64> = (0..n)
            .flat_map(|r| (0..d).map(move |c| (r, c)))
            .map(|(r, c)| z[(r, c)])
            .collect();
        let edge_sum = laplacian_quadratic(&graph, &row_major, d)?;
        worst = worst.max(relative_gap(edge_sum, matrix_form));
    }
    let ctx = Context::new(n_max, 5, "none", seed, format!("{trials} random (W, Z)"));
    Ok(EquivalenceReport::new(
        ClaimId::QuadraticIdentity,
        worst,
        IDENTITY_TOLERANCE,
        ctx,
    ))
}

/// Relaxed normalized cut on `graphs` random connected graphs. Returns three
/// `a3_relaxation` reports: largest eigenvalue difference between the
/// generalized `(L, D)` problem and `L~` (1e-8), largest principal angle
/// between the eigenspaces (1e-6), and the largest NCut of a two-component
/// graph split along its components (exactly 0).
pub fn check_a3_relaxation(graphs: usize, d: usize, seed: u64) -> Result<Vec<EquivalenceReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut value_diff, mut angle, mut split_cut) = (0.0f64, 0.0f64, 0.0f64);
    let mut max_n = 0;
    for _ in 0..graphs {
        let n = rng.random_range((d + 4)..=30);
        max_n = max_n.max(n);
        let density = rng.random_range(0.05..0.5);
        let g = random_connected_graph(n, density, &mut rng)?;
        let check = ncut_relaxation_check(&g, d)?;
        value_diff = value_diff.max(check.max_value_diff);
        angle = angle.max(check.max_principal_angle);

        let left = rng.random_range(2..=n / 2);
        let a = random_connected_graph(left, density, &mut rng)?;
        let b = random_connected_graph(n - left, density, &mut rng)?;
        let joined = SimilarityGraph::from_edges(
            n,
            a.edges()
                .iter()
                .copied()
                .chain(b.edges().iter().map(|&(i, j, w)| (i + left, j + left, w)))
                .collect::<Vec<_>>(),
        )?;
        let split = Partition::new((0..n).map(|i| i < left).collect())?;
        split_cut = split_cut.max(ncut(&joined, &split)?);
    }
    let ctx = Context::new(
        max_n,
        d,
        "normalized laplacian",
        seed,
        format!("{graphs} random connected graphs"),
    );
    Ok(vec![
        EquivalenceReport::new(
            ClaimId::NcutRelaxation,
            value_diff,
            TRACE_TOLERANCE,
            ctx.clone().with("label_values", 1.0),
        ),
        EquivalenceReport::new(
            ClaimId::NcutRelaxation,
            angle,
            ANGLE_TOLERANCE,
            ctx.clone().with("label_angle", 1.0),
        ),
        EquivalenceReport::new(
            ClaimId::NcutRelaxation,
            split_cut,
            0.0,
            ctx.with("label_split_ncut", 1.0),
        ),
    ])
}

/// Finite-difference check that `t -> log(1 + a t)` is increasing and
/// concave on `[0, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityCheck {
    pub points: usize,
    pub min_slope: f64,
    pub max_second_difference: f64,
    pub holds: bool,
}

pub fn check_log1p_concavity(a: f64, t_max: f64, points: usize) -> ConcavityCheck {
    let h = t_max / (points - 1) as f64;
    let f: Vec<f64> = (0..points).map(|k| (a * k as f64 * h).ln_1p()).collect();
    let min_slope = f
        .windows(2)
        .map(|w| (w[1] - w[0]) / h)
        .fold(f64::INFINITY, f64::min);
    let max_second_difference = f
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]) / (h * h))
        .fold(f64::NEG_INFINITY, f64::max);
    ConcavityCheck {
        points,
        min_slope,
        max_second_difference,
        holds: min_slope > 0.0 && max_second_difference < 0.0,
    }
}

/// One row of the kernel comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub kernel: String,
    pub regime: String,
    pub equivalence: String,
    /// Relative gap to the Laplacian form, when one exists.
    pub residual: Option<f64>,
    pub attract: f64,
    pub note: String,
}

/// The three kernel regimes on one shared pipeline instance.
pub fn table1_rows(n: usize, d: usize, seed: u64) -> Result<Vec<Table1Row>> {
    let v = pipeline_graph(n, seed)?;
    let y = random_embedding(n, d, seed.wrapping_add(1))?;

    let gauss = check_gaussian_exactness_on(&v, &y, 1.0)?;
    let default = KernelParams::umap_default();
    let kernel_attract = attractive_term(&v, &y, &default)?;
    let concave = check_log1p_concavity(default.a, 10.0, 1001);
    let small = cauchy_first_order_on(&v, &y, 1.0, 1e-3, seed)?;

    Ok(vec![
        Table1Row {
            kernel: "gaussian (tau=1)".into(),
            regime: "any".into(),
            equivalence: "exact".into(),
            residual: Some(gauss.residual),
            attract: gauss.context.measurements["attract"],
            note: "attract = tr(Y^T L Y) / tau".into(),
        },
        Table1Row {
            kernel: format!("cauchy (a={}, b={})", default.a, default.b),
            regime: "general".into(),
            equivalence: "kernelized".into(),
            residual: None,
            attract: kernel_attract,
            note: format!(
                "no quadratic form; log(1+at) increasing={} concave={}",
                concave.min_slope > 0.0,
                concave.max_second_difference < 0.0
            ),
        },
        Table1Row {
            kernel: "cauchy (a=1, b=1)".into(),
            regime: "small distances (max neighbor sq-dist 1e-3)".into(),
            equivalence: "first order".into(),
            residual: Some(small[0].residual),
            attract: small[0].context.measurements["attract"],
            note: format!("gap / second-order bound = {:.3e}", small[1].residual),
        },
    ])
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"))
}

/// Plain-text rendering of the kernel table.
pub fn emit_table1(rows: &[Table1Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:<44} {:<12} {:>10} {:>12}  note",
        "kernel", "regime", "equivalence", "residual", "attract"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<28} {:<44} {:<12} {:>10} {:>12.5e}  {}",
            r.kernel,
            r.regime,
            r.equivalence,
            fmt_opt(r.residual),
            r.attract,
            r.note
        );
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Claims to run; `None` runs all.
    pub claims: Option<Vec<ClaimId>>,
    pub sabotage: Option<Sabotage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub reports: Vec<EquivalenceReport>,
    pub table1: Vec<Table1Row>,
    pub all_passed: bool,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            let _ = writeln!(
                out,
                "{} {:<16} residual {:>11.4e}  tolerance {:>9.2e}  n={} d={} {} [{}]",
                if r.passed { "PASS" } else { "FAIL" },
                r.claim.as_str(),
                r.residual,
                r.tolerance,
                r.context.n,
                r.context.d,
                r.context.kernel,
                r.context.label
            );
        }
        if !self.table1.is_empty() {
            out.push('\n');
            out.push_str(&emit_table1(&self.table1));
        }
        let _ = writeln!(
            out,
            "\n{}",
            if self.all_passed {
                "all claims passed"
            } else {
                "some claims FAILED"
            }
        );
        out
    }
}

fn run_claim(
    claim: ClaimId,
    seed: u64,
    sabotage: Option<Sabotage>,
) -> Result<Vec<EquivalenceReport>> {
    match claim {
        ClaimId::GaussianExact => [0.5, 1.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &tau)| gaussian_exactness(30, 2, tau, seed.wrapping_add(i as u64), sabotage))
            .collect(),
        ClaimId::CauchyFirstOrder => cauchy_scale_sweep(30, 2, 1.0, seed).map(|r| {
            r.into_iter()
                .filter(|r| r.claim == ClaimId::CauchyFirstOrder)
                .collect()
        }),
        ClaimId::TaylorBound => {
            let v = pipeline_graph(30, seed)?;
            let y = random_embedding(30, 2, seed.wrapping_add(1))?;
            let mut out = Vec::new();
            for (i, scale) in [1.0, 0.1, 0.01, 0.001].into_iter().enumerate() {
                let a = [1.0, 1.929][i % 2];
                out.extend(
                    cauchy_first_order_on(&v, &y, a, scale, seed)?
                        .into_iter()
                        .filter(|r| r.claim == claim),
                );
            }
            Ok(out)
        }
        ClaimId::SpectralOptimal => {
            let data = two_blob_fixture(50, seed)?;
            let knn = knn_search(&data.data, 15, Metric::Euclidean)?;
            let (v, _) = fuzzy_graph(&knn)?;
            check_spectral_optimality(&v, 2, 100, seed)
        }
        ClaimId::ExpectedLoss => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_connected_graph(8, 0.4, &mut rng)?;
            let y = random_embedding(8, 2, seed.wrapping_add(1))?;
            let p = KernelParams::umap_default();
            let k2 = SimilarityGraph::from_edges(2, vec![(0, 1, 0.7)])?;
            let y2 = random_embedding(2, 2, seed.wrapping_add(2))?;
            Ok(vec![
                check_expected_loss(&v, &y, &p, 5, 1_000_000, seed)?,
                check_expected_loss_enumerated(&k2, &y2, &p, 3)?,
            ])
        }
        ClaimId::QuadraticIdentity => Ok(vec![check_quadratic_identity(1000, 40, seed)?]),
        ClaimId::NcutRelaxation => check_a3_relaxation(20, 2, seed),
    }
}

/// Runs the selected claims, each with its own seed derived from the master
/// seed, and the kernel table when every claim is selected.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let claims = cfg.claims.clone().unwrap_or_else(|| ClaimId::ALL.to_vec());
    let mut reports = Vec::new();
    for claim in &claims {
        reports.extend(run_claim(
            *claim,
            claim_seed(cfg.seed, *claim),
            cfg.sabotage,
        )?);
    }
    let table1 = if cfg.claims.is_none() {
        table1_rows(30, 2, cfg.seed)?
    } else {
        Vec::new()
    };
    let all_passed = reports.iter().all(|r| r.passed);
    Ok(SuiteReport {
        seed: cfg.seed,
        reports,
        table1,
        all_passed,
    })
}
