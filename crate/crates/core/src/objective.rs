//! Full-batch losses and the pieces of their Laplacian decomposition.
//!
//! Sums over ordered pairs `i != j` are evaluated over unordered pairs and
//! doubled. The attractive side uses `log phi` in closed form (finite for
//! every finite distance, exactly 0 at coincidence); only `log(1 - phi)`
//! needs clamping, since it diverges as points meet.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fuzzy::SimilarityGraph;
use crate::kernel::{log_phi, one_minus_phi, sq_dist, KernelFamily, KernelParams};
use crate::sgd::Embedding;
use crate::spectra::laplacian_quadratic;

/// Bounds applied to `phi` (equivalently `1 - phi`) before taking
/// `log(1 - phi)`.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeTerm {
    pub i: usize,
    pub j: usize,
    pub attract: f64,
    pub repel: f64,
}

/// Loss value with its attraction/repulsion split and, where the kernel
/// admits one, the Laplacian quadratic form `c tr(Y^T L Y)` and the
/// first-order error bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub total: f64,
    pub attract: f64,
    pub repel: f64,
    /// `tr(Y^T L Y) / tau` (Gaussian) or `2a tr(Y^T L Y)` (Cauchy, `b = 1`).
    pub laplacian_form: Option<f64>,
    /// Second-order bound on `|attract - laplacian_form|` (Cauchy, `b = 1`).
    pub taylor_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_edge_terms: Option<Vec<EdgeTerm>>,
}

/// `-log(1 - phi)` with `1 - phi` held inside `[LOG_CLAMP, 1 - LOG_CLAMP]`.
pub fn neg_log_one_minus_phi(sq: f64, p: &KernelParams) -> f64 {
    -one_minus_phi(sq, p).clamp(LOG_CLAMP, 1.0 - LOG_CLAMP).ln()
}

fn check_shape(v: &SimilarityGraph, y: &Embedding) -> Result<()> {
    if y.n() != v.n() {
        return Err(Error::Config(format!(
            "embedding has {} points, graph has {}",
            y.n(),
            v.n()
        )));
    }
    Ok(())
}

fn is_linear_cauchy(p: &KernelParams) -> bool {
    p.family == KernelFamily::CauchyAb && p.b == 1.0
}

/// `-sum_{i != j} v_ij log phi(y_i, y_j)`.
pub fn attractive_term(v: &SimilarityGraph, y: &Embedding, p: &KernelParams) -> Result<f64> {
    check_shape(v, y)?;
    Ok(2.0
        * v.edges()
            .iter()
            .map(|&(i, j, w)| -w * log_phi(sq_dist(y.row(i), y.row(j)), p))
            .sum::<f64>())
}

/// `(a^2 / 2) sum_{i != j} v_ij |y_i - y_j|^4`.
pub fn taylor_error_bound(v: &SimilarityGraph, y: &Embedding, a: f64) -> Result<f64> {
    check_shape(v, y)?;
    Ok(a * a
        * v.edges()
            .iter()
            .map(|&(i, j, w)| w * sq_dist(y.row(i), y.row(j)).powi(2))
            .sum::<f64>())
}

fn laplacian_form_for(v: &SimilarityGraph, y: &Embedding, p: &KernelParams) -> Result<Option<f64>> {
    let trace = || laplacian_quadratic(v, y.as_slice(), y.dim());
    Ok(match p.family {
        KernelFamily::Gaussian => Some(trace()? / p.tau),
        KernelFamily::CauchyAb if p.b == 1.0 => Some(2.0 * p.a * trace()?),
        KernelFamily::CauchyAb => None,
    })
}

/// `(attract, laplacian_form, |attract - laplacian_form|)`.
pub fn laplacian_comparison(
    v: &SimilarityGraph,
    y: &Embedding,
    p: &KernelParams,
) -> Result<(f64, f64, f64)> {
    let form = laplacian_form_for(v, y, p)?.ok_or_else(|| {
        Error::Unsupported(format!(
            "no Laplacian quadratic form for the cauchy kernel with b = {}",
            p.b
        ))
    })?;
    let attract = attractive_term(v, y, p)?;
    Ok((attract, form, (attract - form).abs()))
}

fn cross_entropy_impl(
    v: &SimilarityGraph,
    y: &Embedding,
    p: &KernelParams,
    per_edge: bool,
) -> Result<LossReport> {
    check_shape(v, y)?;
    let n = v.n();
    let mut weights = vec![0.0f64; n];
    let mut repel = 0.0;
    for i in 0..n {
        for (j, w) in v.neighbors(i) {
            weights[j] = w;
        }
        let yi = y.row(i);
        for (j, &w) in weights.iter().enumerate().skip(i + 1) {
            if w < 1.0 {
                repel += (1.0 - w) * neg_log_one_minus_phi(sq_dist(yi, y.row(j)), p);
            }
        }
        for (j, _) in v.neighbors(i) {
            weights[j] = 0.0;
        }
    }
    let repel = 2.0 * repel;
    let attract = attractive_term(v, y, p)?;

    let per_edge_terms = per_edge.then(|| {
        v.edges()
            .iter()
            .map(|&(i, j, w)| {
                let s = sq_dist(y.row(i), y.row(j));
                EdgeTerm {
                    i,
                    j,
                    attract: -2.0 * w * log_phi(s, p),
                    repel: 2.0 * (1.0 - w) * neg_log_one_minus_phi(s, p),
                }
            })
            .collect()
    });

    Ok(LossReport {
        total: attract + repel,
        attract,
        repel,
        laplacian_form: laplacian_form_for(v, y, p)?,
        taylor_bound: if is_linear_cauchy(p) {
            Some(taylor_error_bound(v, y, p.a)?)
        } else {
            None
        },
        per_edge_terms,
    })
}

/// Fuzzy set cross-entropy between `V` and the embedding similarities.
pub fn cross_entropy_loss(
    v: &SimilarityGraph,
    y: &Embedding,
    p: &KernelParams,
) -> Result<LossReport> {
    cross_entropy_impl(v, y, p, false)
}

/// As [`cross_entropy_loss`], with the per-edge breakdown filled in.
pub fn cross_entropy_loss_detailed(
    v: &SimilarityGraph,
    y: &Embedding,
    p: &KernelParams,
) -> Result<LossReport> {
    cross_entropy_impl(v, y, p, true)
}

/// Expected negative-sampling loss for one pass:
/// `-sum_{(a,b)} v_ab log phi_ab - (n_neg / n) sum_a d_a sum_{c != a} log(1 - phi_ac)`,
/// with `(a, b)` ranging over ordered edge pairs.
pub fn expected_sgd_loss(
    v: &SimilarityGraph,
    y: &Embedding,
    p: &KernelParams,
    n_neg: usize,
) -> Result<f64> {
    let attract = attractive_term(v, y, p)?;
    if n_neg == 0 {
        return Ok(attract);
    }
    let n = v.n();
    let degree = v.degrees();
    let mut repel = 0.0;
    for (a, &d_a) in degree.iter().enumerate() {
        if d_a == 0.0 {
            continue;
        }
        let ya = y.row(a);
        let inner: f64 = (0..n)
            .filter(|&c| c != a)
            .map(|c| neg_log_one_minus_phi(sq_dist(ya, y.row(c)), p))
            .sum();
        repel += d_a * inner;
    }
    Ok(attract + n_neg as f64 / n as f64 * repel)
}

/// Loss of one positive event `(a, b)` and its negatives. A negative equal to
/// `a` contributes nothing.
pub fn stochastic_step_loss(
    a: usize,
    b: usize,
    negs: &[usize],
    y: &Embedding,
    p: &KernelParams,
) -> f64 {
    let ya = y.row(a);
    let pos = -log_phi(sq_dist(ya, y.row(b)), p);
    let neg: f64 = negs
        .iter()
        .filter(|&&c| c != a)
        .map(|&c| neg_log_one_minus_phi(sq_dist(ya, y.row(c)), p))
        .sum();
    pos + neg
}
