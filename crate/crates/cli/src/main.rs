//! `umap-spectral`: synthetic data, embeddings, and the equivalence checks
//! from the command line.

mod config;
mod svg;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use umap_spectral::data::{gen_two_moons, load_csv, save_csv, two_blob_fixture, write_csv};
use umap_spectral::kernel::{curve_rmse, fit_ab};
use umap_spectral::knn::knn_search;
use umap_spectral::lab::{run_suite, ClaimId, Sabotage, SuiteConfig};
use umap_spectral::sgd::{init_embedding, optimize, InitMode};
use umap_spectral::{fuzzy, DataMatrix, LabeledDataset, LossReport, Metric, OptimizerConfig};

use config::{Generator, RunConfig, Settings};

#[derive(Parser)]
#[command(
    name = "umap-spectral",
    version,
    about = "UMAP as spectral clustering: embed and verify"
)]
struct Cli {
    /// TOML file of `key = value` defaults; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (with labels) to <out-dir>/data.csv
    GenData(Settings),
    /// Embed a dataset and write CSV, loss trace, SVG and run report
    Embed(Settings),
    /// Run the equivalence checks; exit status 1 if any fails
    Verify(Settings),
    /// Fit the Cauchy (a, b) to a min-dist curve
    FitAb(Settings),
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    let (name, flags) = match cli.command {
        Command::GenData(s) => ("gen-data", s),
        Command::Embed(s) => ("embed", s),
        Command::Verify(s) => ("verify", s),
        Command::FitAb(s) => ("fit-ab", s),
    };
    let settings = match &cli.config {
        Some(path) => flags.overlay(Settings::from_file(path)?),
        None => flags,
    };
    let cfg = RunConfig::resolve(name, &settings)?;
    match name {
        "gen-data" => gen_data(&cfg),
        "embed" => embed(&cfg),
        "verify" => verify(&cfg),
        _ => fit(&cfg),
    }
}

fn generate(cfg: &RunConfig) -> Result<LabeledDataset> {
    match cfg.gen {
        Generator::Blobs => {
            let full = two_blob_fixture(cfg.n.div_ceil(2), cfg.seed).with_context(|| {
                format!("synth_data: gen_blobs(n={}, seed={})", cfg.n, cfg.seed)
            })?;
            let dim = full.data.dim();
            let data =
                DataMatrix::from_flat(full.data.as_slice()[..cfg.n * dim].to_vec(), cfg.n, dim)
                    .with_context(|| format!("synth_data: gen_blobs(n={})", cfg.n))?;
            Ok(LabeledDataset::new(data, full.labels[..cfg.n].to_vec())?)
        }
        Generator::Moons => gen_two_moons(cfg.n, cfg.noise, cfg.seed).with_context(|| {
            format!(
                "synth_data: gen_two_moons(n={}, noise={}, seed={})",
                cfg.n, cfg.noise, cfg.seed
            )
        }),
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn gen_data(cfg: &RunConfig) -> Result<ExitCode> {
    let data = generate(cfg)?;
    create_out_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("data.csv");
    save_csv(&path, &data, true).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} points to {}", data.data.n(), path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EmbedReport<'a> {
    config: &'a RunConfig,
    n_points: usize,
    n_edges: usize,
    flagged_rows: usize,
    self_negatives: usize,
    initial_loss: Option<LossReport>,
    final_loss: Option<LossReport>,
    outputs: Vec<PathBuf>,
}

fn embed(cfg: &RunConfig) -> Result<ExitCode> {
    let data = match &cfg.input {
        Some(path) => load_csv(path, cfg.labels)
            .with_context(|| format!("synth_data: load_csv({})", path.display()))?,
        None => generate(cfg)?,
    };
    let labels = (cfg.input.is_none() || cfg.labels).then_some(data.labels.as_slice());
    let n = data.data.n();

    let knn = knn_search(&data.data, cfg.k, Metric::Euclidean)
        .with_context(|| format!("neighbor_graph: knn_search(n={n}, k={})", cfg.k))?;
    let (graph, params) =
        fuzzy::fuzzy_graph(&knn).with_context(|| format!("fuzzy_graph: k={}", cfg.k))?;
    let mode = if cfg.init == "random" {
        InitMode::Random
    } else {
        InitMode::Spectral
    };
    let y0 = init_embedding(&graph, cfg.dim, mode, cfg.seed).with_context(|| {
        format!(
            "graph_spectra: init_embedding(d={}, init={})",
            cfg.dim, cfg.init
        )
    })?;
    let opt = OptimizerConfig {
        n_epochs: cfg.epochs,
        n_neg: cfg.neg,
        initial_lr: cfg.lr,
        seed: cfg.seed,
        move_other: cfg.move_other,
        ..Default::default()
    };
    let out = optimize(&graph, &y0, &cfg.kernel, &opt).with_context(|| {
        format!(
            "contrastive_sgd: optimize(epochs={}, neg={}, lr={}, kernel={})",
            cfg.epochs, cfg.neg, cfg.lr, cfg.kernel
        )
    })?;

    create_out_dir(&cfg.out_dir)?;
    let mut outputs = Vec::new();
    let emb = &out.embedding;

    let path = cfg.out_dir.join("embedding.csv");
    let mut w = BufWriter::new(
        fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    write_csv(
        &mut w,
        emb.as_slice(),
        emb.dim(),
        labels.filter(|_| cfg.with_labels),
    )?;
    w.flush()?;
    outputs.push(path);

    let path = cfg.out_dir.join("trace.jsonl");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    for record in &out.trace {
        writeln!(w, "{}", serde_json::to_string(record)?)?;
    }
    w.flush()?;
    outputs.push(path);

    let path = cfg.out_dir.join("embedding.svg");
    let title = format!("{n} points, {} epochs, {}", cfg.epochs, cfg.kernel);
    fs::write(
        &path,
        svg::scatter(emb.as_slice(), emb.dim(), labels, &title),
    )?;
    outputs.push(path);

    if cfg.dump_graph {
        let path = cfg.out_dir.join("graph.txt");
        let mut w = BufWriter::new(fs::File::create(&path)?);
        graph.write_edge_list(&mut w)?;
        w.flush()?;
        outputs.push(path);
    }

    let path = cfg.out_dir.join("run.json");
    outputs.push(path.clone());
    let final_loss = match out.trace.last() {
        Some(_) if out.initial.is_some() => Some(umap_spectral::objective::cross_entropy_loss(
            &graph,
            emb,
            &cfg.kernel,
        )?),
        _ => None,
    };
    let report = EmbedReport {
        config: cfg,
        n_points: n,
        n_edges: graph.edges().len(),
        flagged_rows: params.n_flagged(),
        self_negatives: out.self_negatives,
        initial_loss: out.initial.clone(),
        final_loss: final_loss.clone(),
        outputs: outputs.clone(),
    };
    write_json(&path, &report)?;

    match (&out.initial, &final_loss) {
        (Some(a), Some(b)) => println!("loss {:.6} -> {:.6}", a.total, b.total),
        _ => println!("loss trace disabled for n = {n}"),
    }
    for p in &outputs {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(cfg: &RunConfig) -> Result<ExitCode> {
    let claims = cfg
        .claims
        .as_ref()
        .map(|ids| {
            ids.iter()
                .map(|id| ClaimId::parse(id))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    let sabotage = cfg.sabotage.as_deref().map(Sabotage::parse).transpose()?;
    let suite = run_suite(&SuiteConfig {
        seed: cfg.seed,
        claims,
        sabotage,
    })
    .context("equivalence_lab: run_suite")?;

    create_out_dir(&cfg.out_dir)?;
    #[derive(Serialize)]
    struct VerifyReport<'a> {
        config: &'a RunConfig,
        #[serde(flatten)]
        suite: &'a umap_spectral::lab::SuiteReport,
    }
    write_json(
        &cfg.out_dir.join("verify.json"),
        &VerifyReport {
            config: cfg,
            suite: &suite,
        },
    )?;
    let text = suite.to_text();
    fs::write(cfg.out_dir.join("verify.txt"), &text)?;
    print!("{text}");
    Ok(if suite.all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn fit(cfg: &RunConfig) -> Result<ExitCode> {
    let fit = fit_ab(cfg.min_dist)
        .with_context(|| format!("embedding_kernel: fit_ab(min_dist={})", cfg.min_dist))?;
    println!("min_dist = {}", fit.min_dist);
    println!("a = {:.6}", fit.fitted_a);
    println!("b = {:.6}", fit.fitted_b);
    println!("rmse = {:.6e}", fit.fit_rmse);
    println!(
        "baseline rmse (a = 1, b = 1) = {:.6e}",
        curve_rmse(cfg.min_dist, 1.0, 1.0)
    );
    Ok(ExitCode::SUCCESS)
}
