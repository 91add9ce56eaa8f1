use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radisurv::classifiers::{ModelKind, ModelSpec};
use radisurv::config::RunConfig;
use radisurv::eval::FoldMode;
use radisurv::phantom::PhantomSpec;
use radisurv::pipeline::{self, CliError};
use radisurv::volume::Dims;

/// Slice-level radiomics and survival-class prediction for brain tumor MR.
///
/// Exit codes: 0 success, 1 other failure, 2 config error, 3 I/O error,
/// 4 empty output, 5 too few rows or subjects per class for the fold count.
#[derive(Parser)]
#[command(name = "radisurv", version)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the fold seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Feature CSV (default: <output_dir>/features.csv).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Use this model family with default hyperparameters instead of the config's.
    #[arg(long)]
    model: Option<ModelKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-slice features for every subject in the clinical CSV.
    Extract {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Override `data_root`.
        #[arg(long)]
        data_root: Option<PathBuf>,
    },
    /// Cross-validate a model on a feature CSV and write the report.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Override the number of folds.
        #[arg(long)]
        folds: Option<usize>,
        /// Override the CV mode: slice-level or subject-grouped.
        #[arg(long)]
        mode: Option<FoldMode>,
    },
    /// Random-forest out-of-bag permutation importance of every feature.
    Importance {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Feature CSV (default: <output_dir>/features.csv).
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Fit a model on the whole feature CSV and save it as JSON.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Model file (default: <output_dir>/model.json).
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Predict a feature CSV with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
    /// Write synthetic subjects, a clinical CSV and a config.toml into a directory.
    PhantomGen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        subjects: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Volume size as NXxNYxNZ.
        #[arg(long, default_value = "48x48x24", value_parser = parse_dims)]
        size: Dims,
    },
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [nx, ny, nz] if nx >= 8 && ny >= 8 && nz >= 1 => Ok(Dims::new(nx, ny, nz)),
        _ => Err(format!("expected NXxNYxNZ with NX, NY >= 8, got '{s}'")),
    }
}

fn load_config(a: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &a.out {
        cfg.output_dir = absolute(o);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Command-line paths are relative to the working directory, not the config file.
fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn apply_model(cfg: &mut RunConfig, m: &ModelArgs) -> PathBuf {
    if let Some(kind) = m.model {
        cfg.model = ModelSpec::default_for(kind);
    }
    m.features
        .as_deref()
        .map(absolute)
        .unwrap_or_else(|| pipeline::default_features_path(cfg))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    match cli.command {
        Command::Extract { cfg, data_root } => {
            let mut cfg = load_config(&cfg)?;
            if let Some(d) = data_root {
                cfg.data_root = absolute(&d);
            }
            cfg.validate().map_err(CliError::Config)?;
            let s = pipeline::with_threads(threads, || pipeline::run_extract(&cfg))??;
            for (subject, n) in &s.per_subject {
                println!("{subject}\t{n} slices");
            }
            for msg in &s.skipped {
                eprintln!("skipped {msg}");
            }
            println!(
                "wrote {} rows x {} features to {}",
                s.dataset.len(),
                s.dataset.n_features(),
                s.csv.display()
            );
        }
        Command::Evaluate { cfg, model, folds, mode } => {
            let mut cfg = load_config(&cfg)?;
            let features = apply_model(&mut cfg, &model);
            if let Some(f) = folds {
                cfg.cv.n_folds = f;
            }
            if let Some(m) = mode {
                cfg.cv.mode = m;
            }
            cfg.validate().map_err(CliError::Config)?;
            let s = pipeline::with_threads(threads, || pipeline::run_evaluate(&cfg, &features))??;
            print!("{}", s.report.to_table());
            for p in &s.outputs {
                println!("wrote {}", p.display());
            }
        }
        Command::Importance { cfg, features } => {
            let cfg = load_config(&cfg)?;
            cfg.validate().map_err(CliError::Config)?;
            let features = features
                .as_deref()
                .map(absolute)
                .unwrap_or_else(|| pipeline::default_features_path(&cfg));
            let rows = pipeline::with_threads(threads, || pipeline::run_importance(&cfg, &features))??;
            println!("wrote {} scores to {}", rows.len(), cfg.output_dir().join(pipeline::IMPORTANCE_FILE).display());
        }
        Command::Train { cfg, model, model_out } => {
            let mut cfg = load_config(&cfg)?;
            let features = apply_model(&mut cfg, &model);
            cfg.validate().map_err(CliError::Config)?;
            let path = pipeline::with_threads(threads, || {
                pipeline::run_train(&cfg, &features, model_out.as_deref())
            })??;
            println!("wrote {}", path.display());
        }
        Command::Predict { model, features, out } => {
            let n = pipeline::with_threads(threads, || pipeline::run_predict(&model, &features, &out))??;
            println!("wrote {n} predictions to {}", out.display());
        }
        Command::PhantomGen { out, subjects, seed, size } => {
            let spec = PhantomSpec {
                n_subjects: subjects,
                dims: size,
                seed,
            };
            let made = pipeline::run_phantom_gen(&out, &spec)?;
            for s in &made {
                println!("{}\t{}\t{} days", s.subject_id, s.class, s.survival_days);
            }
            println!("wrote {} subjects and config.toml to {}", made.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("radisurv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
