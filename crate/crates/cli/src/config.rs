//! Flag/config-file merging. Every tunable appears once, as an optional
//! field usable both as a command-line flag and as a key in a TOML file;
//! flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use umap_spectral::kernel::{fit_ab, MinDistFit};
use umap_spectral::KernelParams;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Input CSV (one point per row)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Treat the last input column as an integer label
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub labels: Option<bool>,
    /// Synthetic data generator when no input is given: blobs or moons
    #[arg(long)]
    pub gen: Option<String>,
    /// Number of generated points
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise level for the moons generator
    #[arg(long)]
    pub noise: Option<f64>,
    /// Neighbors per point
    #[arg(long)]
    pub k: Option<usize>,
    /// Embedding dimension
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub min_dist: Option<f64>,
    /// cauchy or gaussian
    #[arg(long)]
    pub kernel: Option<String>,
    /// Gaussian bandwidth
    #[arg(long)]
    pub tau: Option<f64>,
    /// Cauchy `a`; with `b`, skips the min-dist fit
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Negative samples per positive edge
    #[arg(long)]
    pub neg: Option<usize>,
    /// Initial learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Move both endpoints of each positive edge
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub move_other: Option<bool>,
    /// spectral or random
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Comma-separated claim ids for `verify`
    #[arg(long)]
    pub claims: Option<String>,
    /// Write the fuzzy graph as an edge list
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dump_graph: Option<bool>,
    /// Append the label column to the embedding CSV
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub with_labels: Option<bool>,
    #[cfg(debug_assertions)]
    #[arg(long, hide = true)]
    #[serde(skip)]
    pub sabotage: Option<String>,
}

macro_rules! overlay {
    ($top:ident, $base:ident; $($field:ident),*) => {
        {
            let mut merged = $top;
            $(merged.$field = merged.$field.or($base.$field);)*
            merged
        }
    };
}

impl Settings {
    /// Field-wise `self.or(base)`.
    pub fn overlay(self, base: Settings) -> Settings {
        let top = self;
        overlay!(top, base; input, labels, gen, n, noise, k, dim, min_dist, kernel, tau, a, b, epochs,
            neg, lr, move_other, init, seed, out_dir, claims, dump_graph, with_labels)
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Blobs,
    Moons,
}

/// Effective values after defaults, echoed into every run report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub input: Option<PathBuf>,
    pub labels: bool,
    pub gen: Generator,
    pub n: usize,
    pub noise: f64,
    pub k: usize,
    pub dim: usize,
    pub min_dist: f64,
    pub kernel: KernelParams,
    /// Present when `(a, b)` came from the min-dist fit.
    pub fit: Option<MinDistFit>,
    pub epochs: usize,
    pub neg: usize,
    pub lr: f64,
    pub move_other: bool,
    pub init: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub claims: Option<Vec<String>>,
    pub dump_graph: bool,
    pub with_labels: bool,
    pub sabotage: Option<String>,
}

impl RunConfig {
    pub fn resolve(subcommand: &str, s: &Settings) -> Result<RunConfig> {
        let gen = match s.gen.as_deref().unwrap_or("blobs") {
            "blobs" => Generator::Blobs,
            "moons" => Generator::Moons,
            other => bail!("--gen must be blobs or moons, got {other:?}"),
        };
        let min_dist = s.min_dist.unwrap_or(0.1);
        let (kernel, fit) = match s.kernel.as_deref().unwrap_or("cauchy") {
            "gaussian" => (KernelParams::gaussian(s.tau.unwrap_or(1.0))?, None),
            "cauchy" => match (s.a, s.b) {
                (Some(a), Some(b)) => (KernelParams::cauchy(a, b)?, None),
                (None, None) => {
                    let fit = fit_ab(min_dist).with_context(|| {
                        format!("embedding_kernel: fit_ab(min_dist={min_dist})")
                    })?;
                    (KernelParams::cauchy(fit.fitted_a, fit.fitted_b)?, Some(fit))
                }
                _ => bail!("--a and --b must be given together"),
            },
            other => bail!("--kernel must be cauchy or gaussian, got {other:?}"),
        };
        let init = s.init.clone().unwrap_or_else(|| "spectral".into());
        if init != "spectral" && init != "random" {
            bail!("--init must be spectral or random, got {init:?}");
        }
        #[cfg(debug_assertions)]
        let sabotage = s.sabotage.clone();
        #[cfg(not(debug_assertions))]
        let sabotage = None;
        Ok(RunConfig {
            subcommand: subcommand.to_string(),
            input: s.input.clone(),
            labels: s.labels.unwrap_or(false),
            gen,
            n: s.n.unwrap_or(100),
            noise: s.noise.unwrap_or(0.05),
            k: s.k.unwrap_or(15),
            dim: s.dim.unwrap_or(2),
            min_dist,
            kernel,
            fit,
            epochs: s.epochs.unwrap_or(200),
            neg: s.neg.unwrap_or(5),
            lr: s.lr.unwrap_or(1.0),
            move_other: s.move_other.unwrap_or(false),
            init,
            seed: s.seed.unwrap_or(42),
            out_dir: s.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            claims: s.claims.as_ref().map(|c| {
                c.split(',')
                    .map(|x| x.trim().to_string())
                    .filter(|x| !x.is_empty())
                    .collect()
            }),
            dump_graph: s.dump_graph.unwrap_or(false),
            with_labels: s.with_labels.unwrap_or(false),
            sabotage,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: Settings = toml::from_str("k = 7\nseed = 3\nkernel = \"gaussian\"\n").unwrap();
        let flags = Settings {
            k: Some(9),
            ..Default::default()
        };
        let merged = flags.overlay(file);
        assert_eq!(merged.k, Some(9));
        assert_eq!(merged.seed, Some(3));
        assert_eq!(merged.kernel.as_deref(), Some("gaussian"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Settings>("kk = 1").is_err());
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve("embed", &Settings::default()).unwrap();
        assert_eq!((c.k, c.dim, c.epochs, c.neg, c.seed), (15, 2, 200, 5, 42));
        assert_eq!(c.min_dist, 0.1);
        assert_eq!(c.init, "spectral");
        assert!(c.fit.is_some());
    }

    #[test]
    fn bad_choices() {
        for s in [
            Settings {
                kernel: Some("cosine".into()),
                ..Default::default()
            },
            Settings {
                init: Some("pca".into()),
                ..Default::default()
            },
            Settings {
                a: Some(1.0),
                ..Default::default()
            },
            Settings {
                gen: Some("swiss".into()),
                ..Default::default()
            },
        ] {
            assert!(RunConfig::resolve("embed", &s).is_err());
        }
    }
}
