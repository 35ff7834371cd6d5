//! `fogfair` command-line interface.
//!
//! Exit codes: 0 success, 1 invalid input data, 2 configuration or usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::evaluation::{run_experiment, ExperimentConfig};
use crate::ingest::{load_dataset, DatasetFormat, DatasetSpec};
use crate::mitigation::MitigationKind;
use crate::report::{compare, render_report, FairnessReport, Pairing, ReportFormat};
use crate::synth::{write_fixture, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fogfair", version, about = "Group-fairness audits of freezing-of-gait detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of cross-validation iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Rendering printed to standard output.
    #[arg(long, default_value = "text")]
    format: ReportFormat,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check dataset files against the format invariants.
    ValidateData {
        /// Validate every dataset listed in this experiment configuration.
        #[arg(long, conflicts_with = "dataset")]
        config: Option<PathBuf>,
        /// A single dataset directory.
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        dataset_format: DatasetFormat,
    },
    /// Cross-validated fairness audit without mitigation.
    Audit(RunArgs),
    /// Cross-validated run with a mitigation strategy.
    Mitigate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        mitigation: MitigationKind,
    },
    /// Paired one-sided Wilcoxon tests between two result files.
    Compare {
        before: PathBuf,
        after: PathBuf,
        #[arg(long, default_value = "fold")]
        pairing: Pairing,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "text")]
        format: ReportFormat,
    },
    /// Render a JSON result file.
    Report {
        results: PathBuf,
        #[arg(long, default_value = "text")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset with injected group bias plus an experiment config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiple of 8.
        #[arg(long, default_value_t = 24)]
        subjects: usize,
        #[arg(long, default_value_t = 300.0)]
        duration_s: f64,
        /// Male over female tremor amplitude; 1 disables the bias.
        #[arg(long, default_value_t = 2.0)]
        bias_ratio: f64,
        #[arg(long, default_value_t = 0.5)]
        tremulous_fraction: f64,
    },
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "daphnet" => Ok(Self::Daphnet),
            _ => Err(Error::Config(format!("unknown dataset format `{s}`"))),
        }
    }
}

/// Map an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_CONFIG
    }
}

/// Parse `argv` and run; diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    crate::ingest::write_file(path, bytes)
}

fn print(bytes: &[u8]) -> Result<()> {
    std::io::stdout().write_all(bytes).map_err(|e| Error::io("<stdout>", e))
}

fn emit(report: &FairnessReport, out: Option<&Path>, format: ReportFormat) -> Result<()> {
    if let Some(p) = out {
        write_out(p, &render_report(report, ReportFormat::Json)?)?;
    }
    print(&render_report(report, format)?)
}

fn read_report(path: &Path) -> Result<FairnessReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    FairnessReport::from_json(&bytes)
}

fn run_configured(args: &RunArgs, mitigation: MitigationKind) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.iterations {
        cfg.iterations = n;
    }
    cfg.mitigation = mitigation;
    let runs = run_experiment(&cfg)?;
    let report = FairnessReport::from_runs(&cfg, runs)?;
    emit(&report, args.out.as_deref(), args.format)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::ValidateData {
            config,
            dataset,
            dataset_format,
        } => {
            let specs = match (config, dataset) {
                (Some(c), _) => ExperimentConfig::from_file(&c)?.datasets,
                (None, Some(d)) => vec![DatasetSpec {
                    path: d,
                    format: dataset_format,
                }],
                (None, None) => return Err(Error::Config("pass a dataset directory or --config".into())),
            };
            for s in &specs {
                let (recs, meta) = load_dataset(&s.path, s.format)?;
                let samples: usize = recs.iter().map(|r| r.len()).sum();
                println!("{}: {} recordings, {} subjects, {samples} samples: ok", s.path.display(), recs.len(), meta.len());
            }
            Ok(())
        }
        Command::Audit(args) => run_configured(&args, MitigationKind::None),
        Command::Mitigate { run, mitigation } => run_configured(&run, mitigation),
        Command::Compare {
            before,
            after,
            pairing,
            out,
            format,
        } => {
            let b = read_report(&before)?;
            let a = read_report(&after)?;
            let comparisons = compare(&b, &a, pairing)?;
            let mut report = FairnessReport {
                entries: b.entries.into_iter().chain(a.entries).collect(),
                comparisons,
                ..a
            };
            report.schema_version = crate::report::SCHEMA_VERSION;
            emit(&report, out.as_deref(), format)
        }
        Command::Report { results, format, out } => {
            let bytes = render_report(&read_report(&results)?, format)?;
            match out {
                Some(p) => write_out(&p, &bytes),
                None => print(&bytes),
            }
        }
        Command::Synth {
            out,
            seed,
            subjects,
            duration_s,
            bias_ratio,
            tremulous_fraction,
        } => {
            let cfg = SynthConfig {
                seed,
                n_subjects: subjects,
                duration_s,
                bias_ratio,
                tremulous_fraction,
                ..Default::default()
            };
            let path = write_fixture(&out, &cfg)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
