use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use semref_cli::config::PipelineConfig;
use semref_cli::io::{load_json, save_json, DatasetManifest};
use semref_cli::pipeline::{evaluate_paths, generate_dataset, manifest_path, run_pipeline, write_run, GenSpec};

#[derive(Parser)]
#[command(
    name = "semref",
    version,
    about = "Joint geometric and semantic refinement of labeled meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset from a scene and noise spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine the mesh of a dataset.
    Refine {
        #[arg(long)]
        manifest: PathBuf,
        /// Pipeline config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a result against the ground truth of a dataset.
    Eval {
        /// Run directory, dataset directory or mesh file.
        #[arg(long)]
        pred: PathBuf,
        /// Dataset directory or manifest with a ground-truth mesh.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| semref::Error::io(path, e))
        .with_context(|| format!("reading config {}", path.display()))?;
    PipelineConfig::from_json(&text).with_context(|| format!("config {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { spec, out } => {
            let spec: GenSpec = load_json(&spec)?;
            let m = generate_dataset(&spec, &out)?;
            info!("wrote {} views to {}", m.cameras.len(), out.display());
        }
        Command::Refine { manifest, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let path = manifest_path(&manifest);
            let data = DatasetManifest::load(&path)?
                .read_dataset(path.parent().unwrap_or(Path::new(".")))
                .context("loading dataset")?;
            let result = run_pipeline(&data, &cfg)?;
            write_run(&result, &cfg, &out)?;
            if let Some(ev) = &result.report.evaluation {
                info!(
                    "accuracy {:.4}, mean geometric error {:.4e}",
                    ev.overall_accuracy, ev.mean_geometric_error
                );
            }
        }
        Command::Eval {
            pred,
            truth,
            out,
            samples,
            seed,
        } => {
            if samples == 0 {
                return Err(semref::Error::Config("--samples must be at least 1".into()).into());
            }
            let report = evaluate_paths(&pred, &truth, samples, seed)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                semref_cli::io::ensure_dir(dir)?;
            }
            save_json(&report, &out)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err
        .chain()
        .filter_map(|e| e.downcast_ref::<semref::Error>())
        .any(|e| e.is_validation());
    if validation {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
