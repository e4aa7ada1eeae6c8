use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use survbench::harness::{
    emit_ablation, emit_report, ingest_csv, load_report, read_prediction_csv, run_ablation, run_benchmark,
    write_dataset_csv, write_truth_json, BenchConfig, CsvSchema, ReportFormat,
};
use survbench::metrics::evaluate;
use survbench::synthetic::{generate, GeneratorKind, GeneratorSpec};
use survbench::Error;

#[derive(Parser)]
#[command(name = "survbench", version, about = "Benchmark survival models on censored time-to-event data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV plus a ground-truth JSON sidecar.
    Generate {
        #[arg(long)]
        kind: GeneratorKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        censoring: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run nested cross-validation over every dataset and method in a config.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the training-size ablation declared in a config.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score an externally produced prediction matrix against a dataset CSV.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Event-time quantiles for Brier and AUROC.
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75])]
        quantiles: Vec<f64>,
    },
    /// Re-emit a saved benchmark report in another format.
    Report {
        /// Directory holding report.json.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        format: ReportFormat,
        /// Defaults to the input directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// What a successful command left behind.
enum Status {
    Ok,
    Partial(usize),
}

fn truth_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into());
    out.with_file_name(format!("{stem}.truth.json"))
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<Status, Error> {
    match cli.command {
        Command::Generate { kind, n, seed, censoring, out } => {
            let (d, truth) = generate(&GeneratorSpec::new(kind, n, seed, censoring))?;
            write_dataset_csv(&out, &d)?;
            let side = truth_path(&out);
            write_truth_json(&side, &truth)?;
            print_written(&[out, side]);
            Ok(Status::Ok)
        }
        Command::Benchmark { config, out_dir } => {
            let cfg = BenchConfig::load(&config)?;
            let mut datasets = Vec::new();
            for (ds, dropped) in cfg.datasets()? {
                if !dropped.is_empty() {
                    eprintln!("{}: dropped rows with missing values: {dropped:?}", ds.name);
                }
                datasets.push(ds);
            }
            let report = run_benchmark(&datasets, &cfg.specs()?, &cfg.plan(), &cfg.quantiles)?;
            for a in report.aggregates.iter().filter(|a| a.metric == "antolini") {
                match (a.mean, a.min, a.max) {
                    (Some(m), Some(lo), Some(hi)) => {
                        println!("{:<12} {:<7} antolini {m:.4} [{lo:.4}, {hi:.4}]", a.dataset, a.method.name())
                    }
                    _ => println!("{:<12} {:<7} antolini failed", a.dataset, a.method.name()),
                }
            }
            let mut written = emit_report(&report, ReportFormat::Csv, &out_dir)?;
            written.extend(emit_report(&report, ReportFormat::Json, &out_dir)?);
            print_written(&written);
            for r in report.rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("{}/{} fold {}: {}", r.dataset, r.method, r.fold, r.error.as_deref().unwrap_or_default());
            }
            Ok(match report.n_failed() {
                0 => Status::Ok,
                k => Status::Partial(k),
            })
        }
        Command::Ablate { config, out_dir } => {
            let cfg = BenchConfig::load(&config)?;
            let table = run_ablation(&cfg.ablation_plan()?, &cfg.specs()?, &cfg.quantiles)?;
            for r in &table.rows {
                match &r.metrics {
                    Some(m) => println!("{:<7} n={:<5} antolini {:.4}", r.method.name(), r.size, m.antolini),
                    None => println!("{:<7} n={:<5} failed: {}", r.method.name(), r.size, r.error.as_deref().unwrap_or_default()),
                }
            }
            let mut written = emit_ablation(&table, ReportFormat::Csv, &out_dir)?;
            written.extend(emit_ablation(&table, ReportFormat::Json, &out_dir)?);
            print_written(&written);
            Ok(match table.n_failed() {
                0 => Status::Ok,
                k => Status::Partial(k),
            })
        }
        Command::Evaluate { pred, data, quantiles } => {
            let d = ingest_csv(&data, &CsvSchema::default())?;
            if !d.dropped_rows.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "rows {:?} have missing values; predictions must align with every row",
                    d.dropped_rows
                )));
            }
            let pred = read_prediction_csv(&pred)?;
            let report = evaluate(&pred, &d.data, &quantiles)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(Status::Ok)
        }
        Command::Report { input, format, out_dir } => {
            let report = load_report(&input)?;
            let out = out_dir.unwrap_or(input);
            print_written(&emit_report(&report, format, &out)?);
            Ok(match report.n_failed() {
                0 => Status::Ok,
                k => Status::Partial(k),
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial(k)) => {
            eprintln!("{k} failed cells recorded in the report");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
