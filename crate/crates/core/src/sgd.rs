//! Negative-sampling SGD.
//!
//! Each epoch draws `samples_per_epoch` positive edges with probability
//! proportional to their weight (alias table over undirected edges, random
//! orientation), pulls the tail toward the head along `grad log phi`, then
//! pushes it away from `n_neg` uniformly drawn vertices along
//! `grad log(1 - phi)`. The learning rate decays linearly to zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fuzzy::SimilarityGraph;
use crate::kernel::{grad_log_one_minus_phi, grad_log_phi, KernelParams};
use crate::objective::{cross_entropy_loss, stochastic_step_loss, LossReport};
use crate::spectra::spectral_init;

/// Largest point count for which the full loss is traced every epoch.
pub const TRACE_LIMIT: usize = 5000;
/// Initial embeddings are scaled to this largest absolute coordinate.
pub const INIT_EXTENT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Spectral,
    Random,
    External,
}

/// Row-major `n x dim` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    coords: Vec<f64>,
    n: usize,
    dim: usize,
    pub provenance: Provenance,
}

impl Embedding {
    pub fn new(coords: Vec<f64>, n: usize, dim: usize, provenance: Provenance) -> Result<Self> {
        if dim == 0 || coords.len() != n * dim {
            return Err(Error::Config(format!(
                "{} coordinates do not form {n}x{dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("embedding has non-finite coordinates".into()));
        }
        Ok(Self {
            coords,
            n,
            dim,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.dim, &self.coords)
    }

    pub fn from_matrix(m: &nalgebra::DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let coords = (0..m.nrows())
            .flat_map(|r| m.row(r).iter().copied().collect::<Vec<_>>())
            .collect();
        Self::new(coords, m.nrows(), m.ncols(), provenance)
    }

    /// Largest Euclidean distance between any two points.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                best = best.max(crate::kernel::sq_dist(self.row(i), self.row(j)));
            }
        }
        best.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Spectral,
    Random,
}

/// Spectral mode: bottom non-null eigenvectors of the normalized Laplacian,
/// scaled so the largest absolute coordinate is [`INIT_EXTENT`]. Random mode:
/// uniform in `[-INIT_EXTENT, INIT_EXTENT]^d`.
pub fn init_embedding(
    v: &SimilarityGraph,
    d: usize,
    mode: InitMode,
    seed: u64,
) -> Result<Embedding> {
    match mode {
        InitMode::Spectral => {
            let sol = spectral_init(v, d)?;
            let max_abs = sol.vectors.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let scaled = &sol.vectors * (INIT_EXTENT / max_abs);
            Embedding::from_matrix(&scaled, Provenance::Spectral)
        }
        InitMode::Random => {
            if d < 1 {
                return Err(Error::Config("target dimension must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coords = (0..v.n() * d)
                .map(|_| rng.random_range(-INIT_EXTENT..=INIT_EXTENT))
                .collect();
            Embedding::new(coords, v.n(), d, Provenance::Random)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub n_epochs: usize,
    pub n_neg: usize,
    pub initial_lr: f64,
    /// Per-coordinate gradient clip, applied before scaling by the rate.
    pub clip: f64,
    /// Regularizer in the repulsive `1/s` factor.
    pub eps: f64,
    pub seed: u64,
    /// Also move the head of each positive edge (mirrored update).
    pub move_other: bool,
    /// Positive events per epoch; `None` means one per undirected edge.
    pub samples_per_epoch: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_epochs: 200,
            n_neg: 5,
            initial_lr: 1.0,
            clip: 4.0,
            eps: 1e-3,
            seed: 42,
            move_other: false,
            samples_per_epoch: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_epochs < 1 {
            return Err(Error::Config("n_epochs must be at least 1".into()));
        }
        for (name, v) in [
            ("initial_lr", self.initial_lr),
            ("clip", self.clip),
            ("eps", self.eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Learning rate for 0-indexed epoch `e`.
    pub fn alpha(&self, epoch: usize) -> f64 {
        self.initial_lr * (1.0 - epoch as f64 / self.n_epochs as f64)
    }
}

/// Weighted positive-edge sampler with its own random stream.
pub struct EdgeSampler {
    edges: Vec<(usize, usize)>,
    table: WeightedAliasIndex<f64>,
    rng: ChaCha8Rng,
}

impl EdgeSampler {
    pub fn new(v: &SimilarityGraph, seed: u64) -> Result<Self> {
        if v.edges().is_empty() {
            return Err(Error::Config(
                "cannot sample from a graph with no edges".into(),
            ));
        }
        let weights: Vec<f64> = v.edges().iter().map(|e| e.2).collect();
        let table = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::Config(format!("alias table: {e}")))?;
        Ok(Self {
            edges: v.edges().iter().map(|e| (e.0, e.1)).collect(),
            table,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// An ordered pair `(a, b)`; the undirected edge is chosen with
    /// probability proportional to its weight, the orientation uniformly.
    pub fn sample_positive(&mut self) -> (usize, usize) {
        let (i, j) = self.edges[self.table.sample(&mut self.rng)];
        if self.rng.random::<bool>() {
            (i, j)
        } else {
            (j, i)
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// `n_neg` vertices drawn uniformly from `0..n`, with replacement.
pub fn sample_negatives<R: Rng>(n: usize, n_neg: usize, rng: &mut R) -> Vec<usize> {
    (0..n_neg).map(|_| rng.random_range(0..n)).collect()
}

/// Per-step losses of `draws` sampled events with the embedding held fixed.
pub fn sample_step_losses(
    sampler: &mut EdgeSampler,
    y: &Embedding,
    p: &KernelParams,
    n_neg: usize,
    draws: usize,
) -> Vec<f64> {
    (0..draws)
        .map(|_| {
            let (a, b) = sampler.sample_positive();
            let negs = sample_negatives(y.n(), n_neg, sampler.rng_mut());
            stochastic_step_loss(a, b, &negs, y, p)
        })
        .collect()
}

/// One line of the per-epoch trace; loss fields are absent above
/// [`TRACE_LIMIT`] points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub alpha: f64,
    pub total: Option<f64>,
    pub attract: Option<f64>,
    pub repel: Option<f64>,
    pub laplacian_form: Option<f64>,
    pub taylor_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub embedding: Embedding,
    /// Loss of the starting embedding.
    pub initial: Option<LossReport>,
    /// Loss after each epoch's updates.
    pub trace: Vec<EpochRecord>,
    /// Negative draws that hit the moving point itself and were skipped.
    pub self_negatives: usize,
}

fn clipped_step(grad: &[f64], clip: f64, alpha: f64) -> impl Iterator<Item = f64> + '_ {
    grad.iter().map(move |g| alpha * g.clamp(-clip, clip))
}

pub fn optimize(
    v: &SimilarityGraph,
    y0: &Embedding,
    p: &KernelParams,
    cfg: &OptimizerConfig,
) -> Result<OptimizeOutcome> {
    cfg.validate()?;
    if y0.n() != v.n() {
        return Err(Error::Config(format!(
            "initial embedding has {} points, graph has {}",
            y0.n(),
            v.n()
        )));
    }
    let n = v.n();
    let dim = y0.dim();
    let traced = n <= TRACE_LIMIT;
    let mut coords = y0.as_slice().to_vec();
    let samples = cfg.samples_per_epoch.unwrap_or(v.edges().len());

    let loss_of = |coords: &[f64]| -> Result<LossReport> {
        let y = Embedding::new(coords.to_vec(), n, dim, y0.provenance)?;
        cross_entropy_loss(v, &y, p)
    };
    let initial = if traced {
        Some(loss_of(&coords)?)
    } else {
        None
    };

    let mut sampler = if samples > 0 {
        Some(EdgeSampler::new(v, cfg.seed)?)
    } else {
        None
    };
    let mut trace = Vec::with_capacity(cfg.n_epochs);
    let mut self_negatives = 0usize;
    let mut ya = vec![0.0; dim];

    for epoch in 0..cfg.n_epochs {
        let alpha = cfg.alpha(epoch);
        if let Some(sampler) = sampler.as_mut() {
            for step in 0..samples {
                let (a, b) = sampler.sample_positive();
                ya.copy_from_slice(&coords[a * dim..(a + 1) * dim]);
                let grad = grad_log_phi(&ya, &coords[b * dim..(b + 1) * dim], p);
                for (k, delta) in clipped_step(&grad, cfg.clip, alpha).enumerate() {
                    coords[a * dim + k] += delta;
                    if cfg.move_other {
                        coords[b * dim + k] -= delta;
                    }
                }

                for _ in 0..cfg.n_neg {
                    let c = sampler.rng_mut().random_range(0..n);
                    if c == a {
                        self_negatives += 1;
                        continue;
                    }
                    ya.copy_from_slice(&coords[a * dim..(a + 1) * dim]);
                    let grad =
                        grad_log_one_minus_phi(&ya, &coords[c * dim..(c + 1) * dim], p, cfg.eps);
                    for (k, delta) in clipped_step(&grad, cfg.clip, alpha).enumerate() {
                        coords[a * dim + k] += delta;
                    }
                }

                let moved = &coords[a * dim..(a + 1) * dim];
                if moved.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite {
                        epoch,
                        step,
                        vertex: a,
                    });
                }
                if cfg.move_other
                    && coords[b * dim..(b + 1) * dim]
                        .iter()
                        .any(|x| !x.is_finite())
                {
                    return Err(Error::NonFinite {
                        epoch,
                        step,
                        vertex: b,
                    });
                }
            }
        }

        let record = if traced {
            let loss = loss_of(&coords)?;
            EpochRecord {
                epoch,
                alpha,
                total: Some(loss.total),
                attract: Some(loss.attract),
                repel: Some(loss.repel),
                laplacian_form: loss.laplacian_form,
                taylor_bound: loss.taylor_bound,
            }
        } else {
            EpochRecord {
                epoch,
                alpha,
                total: None,
                attract: None,
                repel: None,
                laplacian_form: None,
                taylor_bound: None,
            }
        };
        trace.push(record);
    }

    Ok(OptimizeOutcome {
        embedding: Embedding::new(coords, n, dim, y0.provenance)?,
        initial,
        trace,
        self_negatives,
    })
}
