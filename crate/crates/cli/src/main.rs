use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use ckmeans::dataset::BlobSpec;
use ckmeans::PipelineConfig;
use ckmeans_cli::{cmd_case, cmd_generate, cmd_run, InputSource, Outcome, RunManifest};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ckmeans",
    version,
    about = "Cluster the data lying at the intersection of fuzzy clusters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded Gaussian-blob dataset as CSV.
    Generate {
        #[command(flatten)]
        blobs: BlobArgs,
        /// Destination CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the pipeline on a CSV file or a generated dataset.
    Run {
        /// Input CSV file. Without it, a dataset is generated from the blob options.
        #[arg(long, conflicts_with = "spec")]
        input: Option<PathBuf>,
        /// The input CSV has no header line.
        #[arg(long, requires = "input")]
        no_header: bool,
        #[command(flatten)]
        blobs: BlobArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Emit SVG figures.
        #[arg(long)]
        plots: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay one of the six reference cases.
    Case {
        /// Case number, 1 to 6.
        #[arg(value_parser = clap::value_parser!(u8).range(1..=6))]
        id: u8,
        /// Skip the SVG figures.
        #[arg(long)]
        no_plots: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BlobArgs {
    /// JSON file holding a blob spec (n_samples, n_features, n_centroids, cluster_std, seed).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    n_samples: usize,
    #[arg(long, default_value_t = 2)]
    n_features: usize,
    #[arg(long, default_value_t = 2)]
    n_centroids: usize,
    #[arg(long, default_value_t = 1.0)]
    cluster_std: f64,
    /// Generator seed; defaults to --seed when running the pipeline.
    #[arg(long)]
    data_seed: Option<u64>,
}

impl BlobArgs {
    fn resolve(&self, fallback_seed: u64) -> Result<BlobSpec> {
        if let Some(path) = &self.spec {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            return serde_json::from_str(&text)
                .with_context(|| format!("parsing blob spec {}", path.display()));
        }
        Ok(BlobSpec {
            n_samples: self.n_samples,
            n_features: self.n_features,
            n_centroids: self.n_centroids,
            cluster_std: self.cluster_std,
            seed: self.data_seed.unwrap_or(fallback_seed),
        })
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// Width of the kept membership band around 0.5.
    #[arg(long, default_value_t = 0.4)]
    mu: f64,
    /// FCM fuzziness index.
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// Fixed FCM cluster count, overriding the silhouette scan.
    #[arg(long)]
    c: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration cap for both FCM and k-means.
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            mu: self.mu,
            m: self.m,
            k_min: self.k_min,
            k_max: self.k_max,
            c: self.c,
            seed: self.seed,
            fcm_max_iter: self.max_iter,
            kmeans_max_iter: self.max_iter,
            tol: self.tol,
            ..PipelineConfig::default()
        }
    }
}

fn report(manifest: &RunManifest) {
    if let Some(k) = manifest.initial_k {
        println!("initial k: {k}");
    }
    match manifest.outcome {
        Outcome::NoIntersection => {
            if let Some(msg) = &manifest.message {
                println!("{msg}");
            }
        }
        _ => {
            if let Some(k) = manifest.final_k {
                println!("final k: {k}");
            }
            match manifest.mean_si {
                Some(si) => println!("mean SI: {si:.4}"),
                None if manifest.final_k.is_some() => println!("mean SI: undefined"),
                None => {}
            }
        }
    }
    for path in &manifest.outputs {
        println!("wrote {}", path.display());
    }
}

fn execute(cli: Cli) -> Result<RunManifest> {
    match cli.command {
        Command::Generate { blobs, out } => cmd_generate(&blobs.resolve(0)?, &out),
        Command::Run {
            input,
            no_header,
            blobs,
            pipeline,
            plots,
            out,
        } => {
            let config = pipeline.config();
            let source = match input {
                Some(path) => InputSource::Csv {
                    path,
                    has_header: !no_header,
                },
                None => InputSource::Blobs(blobs.resolve(config.seed)?),
            };
            cmd_run(&source, &config, &out, plots)
        }
        Command::Case { id, no_plots, out } => cmd_case(id, &out, !no_plots),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(manifest) => {
            report(&manifest);
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
