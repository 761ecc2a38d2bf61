//! `fpgan`: convert datasets, train the estimators, augment the radio map
//! with cGAN fingerprints, evaluate, and export plot coordinates.
//!
//! Exit codes: 0 ok, 1 I/O, 2 schema or config, 3 numeric, 4 non-finite
//! loss, 5 nothing accepted, 6 mixed or empty test split.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpgan_core::augmentation::{coords_csv, read_coords, Method};
use fpgan_core::evaluation::{merge_reports, report_table, EvalReport};
use fpgan_core::pipeline::{convert, run_augment, run_evaluate, run_train, RunConfig};
use fpgan_core::radiomap::{write_csv, DatasetSchema, DEFAULT_BETA};
use fpgan_core::synthgen::{write_fixture, SynthConfig};
use fpgan_core::{CoreError, Result};

#[derive(Parser)]
#[command(name = "fpgan", version, about = "Fingerprint radio-map augmentation with conditional GANs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw dBm CSV into the powed representation.
    Convert {
        input: PathBuf,
        output: PathBuf,
        /// JSON dataset schema; defaults to AP-prefixed columns.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Take the minimum RSS from this split (use the training split when converting a test split).
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
    },
    /// Train the position, floor and building estimators.
    Train(RunArgs),
    /// Train the cGANs, select synthetic fingerprints and retrain.
    Augment {
        #[command(flatten)]
        run: RunArgs,
        /// M1 per building, M2 per floor conditioned on building, M3 whole map conditioned on floor.
        #[arg(long)]
        method: Option<Method>,
    },
    /// Compare 1-NN, CNN-LSTM and the augmented estimator, or merge saved reports.
    Evaluate {
        #[arg(long, required_unless_present = "merge")]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Merge these report.json files into one table with an average row.
        #[arg(long, num_args = 1.., conflicts_with = "config")]
        merge: Vec<PathBuf>,
        /// Where merged output goes (merged.json and merged.txt).
        #[arg(long, requires = "merge", default_value = ".")]
        merge_out: PathBuf,
    },
    /// Write x, y, floor, building, source rows from an augmented CSV.
    ExportCoords {
        augmented: PathBuf,
        output: PathBuf,
        /// Source building id to keep.
        #[arg(long)]
        building: Option<i64>,
        /// Source floor id to keep.
        #[arg(long)]
        floor: Option<i64>,
    },
    /// Write a synthetic train/test fixture.
    Synth {
        out_dir: PathBuf,
        /// JSON overrides for the generator.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_json_file(path)?;
    if let Some(out) = out {
        cfg.out = out;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CoreError::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert { input, output, schema, reference, beta } => {
            let schema = match schema {
                Some(p) => DatasetSchema::from_json_file(&p)?,
                None => DatasetSchema::default(),
            };
            let rm = convert(&input, &schema, beta, reference.as_deref())?;
            write_csv(&rm, &output)?;
            log::info!("{} fingerprints x {} APs -> {}", rm.m(), rm.n(), output.display());
        }
        Command::Train(a) => {
            run_train(&load_config(&a.config, a.out, a.seed)?)?;
        }
        Command::Augment { run, method } => {
            let mut cfg = load_config(&run.config, run.out, run.seed)?;
            if let Some(m) = method {
                cfg.cgan.method = m;
                cfg.validate()?;
            }
            let outcome = run_augment(&cfg)?;
            println!("phi {}", outcome.summary.stats.accepted);
        }
        Command::Evaluate { config, out, seed, merge, merge_out } => {
            if merge.is_empty() {
                let cfg = load_config(&config.expect("clap requires --config without --merge"), out, seed)?;
                let report = run_evaluate(&cfg)?;
                print!("{}", report_table(std::slice::from_ref(&report), None));
            } else {
                let reports = merge
                    .iter()
                    .map(|p| EvalReport::from_json(&std::fs::read_to_string(p).map_err(|e| CoreError::io(p, e))?))
                    .collect::<Result<Vec<_>>>()?;
                let merged = merge_reports(reports)?;
                let table = report_table(&merged.reports, Some(&merged.average));
                write(&merge_out.join("merged.json"), serde_json::to_string_pretty(&merged)? + "\n")?;
                write(&merge_out.join("merged.txt"), &table)?;
                print!("{table}");
            }
        }
        Command::ExportCoords { augmented, output, building, floor } => {
            let rows = read_coords(&augmented, building, floor)?;
            write(&output, coords_csv(&rows)?)?;
            log::info!("{} rows -> {}", rows.len(), output.display());
        }
        Command::Synth { out_dir, config } => {
            let cfg: SynthConfig = match config {
                Some(p) => read_json(&p)?,
                None => SynthConfig::default(),
            };
            write_fixture(&cfg, &out_dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
