//! `dreval`: generate data, run replicated estimator experiments, and write
//! plot-ready CSV tables with a rerunnable manifest.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 data capacity
//! exceeded, 1 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dreval::datagen::{
    make_discrete_dgp, render_multiclass_csv, render_multilabel_sparse, render_regression_csv,
    sample_log, synthetic_multiclass, synthetic_multilabel, synthetic_regression, DgpSpec,
    MulticlassSpec, MultilabelSpec, RegressionSpec,
};
use dreval::harness::{
    config_hash, run_experiment, write_report, ExperimentConfig, Manifest, Mode,
};
use dreval::log::{write_log_with_meta, LogMeta};
use dreval::{Error, OutcomeMode};
use serde::de::DeserializeOwned;

mod overrides;

use overrides::{apply_overrides, parse_config_text};

#[derive(Parser)]
#[command(
    name = "dreval",
    version,
    about = "Doubly robust off-policy evaluation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset or exploration log.
    Gen(GenArgs),
    /// Stationary evaluation: DM/IPS/DR bias and RMSE over replicates.
    Eval(RunArgs),
    /// Policy optimization from IPS- or DR-imputed costs.
    Optimize(RunArgs),
    /// Population-mean estimation under covariate shift.
    Shift(RunArgs),
    /// Nonstationary evaluation sweep: DM, RS, WC and DR-ns.
    Drns(RunArgs),
    /// Rerun an experiment from its manifest.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set drns.rhos=[0,0.01]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory (defaults to `results/<mode>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    /// Multiclass CSV (features then label).
    Multiclass,
    /// Sparse multilabel text file.
    Multilabel,
    /// Regression CSV (features then response).
    Regression,
    /// JSON Lines exploration log sampled from a random discrete DGP.
    DgpLog,
}

#[derive(Args)]
struct GenArgs {
    kind: GenKind,
    /// TOML generator specification.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Events to sample (dgp-log only).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// `manifest.json` of a previous run.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Fail unless the regenerated CSVs are byte-identical to the originals.
    #[arg(long)]
    check: bool,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Config(String),
    Mismatch(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => e.exit_code() as u8,
            CliError::Config(_) | CliError::Mismatch(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Mismatch(m) => write!(f, "report mismatch: {m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io {
            path: path.into(),
            source: e,
        }
        .into()
    })
}

fn build<T: DeserializeOwned>(config: Option<&Path>, overrides: &[String]) -> CliResult<T> {
    let mut table = match config {
        Some(p) => parse_config_text(&read_text(p)?).map_err(CliError::Config)?,
        None => toml::Table::new(),
    };
    apply_overrides(&mut table, overrides).map_err(CliError::Config)?;
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| {
        Error::Io {
            path: path.into(),
            source: e,
        }
        .into()
    })
}

fn gen(args: &GenArgs) -> CliResult<()> {
    let cfg = args.config.as_deref();
    match args.kind {
        GenKind::Multiclass => {
            let spec: MulticlassSpec = build(cfg, &args.overrides)?;
            write_file(
                &args.out,
                &render_multiclass_csv(&synthetic_multiclass(&spec, args.seed)?),
            )
        }
        GenKind::Multilabel => {
            let spec: MultilabelSpec = build(cfg, &args.overrides)?;
            write_file(
                &args.out,
                &render_multilabel_sparse(&synthetic_multilabel(&spec, args.seed)?),
            )
        }
        GenKind::Regression => {
            let spec: RegressionSpec = build(cfg, &args.overrides)?;
            write_file(
                &args.out,
                &render_regression_csv(&synthetic_regression(&spec, args.seed)?),
            )
        }
        GenKind::DgpLog => {
            let mut spec: DgpSpec = build(cfg, &args.overrides)?;
            spec.seed = args.seed;
            let dgp = make_discrete_dgp(&spec)?;
            let events = sample_log(&dgp, args.n, args.seed);
            let meta = LogMeta {
                k: dgp.num_actions(),
                mode: OutcomeMode::Reward,
            };
            Ok(write_log_with_meta(&events, Some(meta), &args.out)?)
        }
    }
}

fn run(mode: Mode, args: &RunArgs) -> CliResult<()> {
    let mut config: ExperimentConfig = build(args.config.as_deref(), &args.overrides)?;
    config.mode = mode;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(r) = args.replicates {
        config.replicates = Some(r);
    }
    let out = args.out.clone().unwrap_or_else(|| {
        let name = serde_json::to_value(mode).expect("mode serializes");
        PathBuf::from("results").join(name.as_str().unwrap_or("run"))
    });
    let output = run_experiment(&config, args.workers)?;
    let manifest = write_report(&out, &config, &output)?;
    print!("{}", output.tables[0].to_csv());
    eprintln!(
        "wrote {} tables to {} (config {})",
        manifest.tables.len(),
        out.display(),
        &manifest.config_hash[..12]
    );
    Ok(())
}

fn report(args: &ReportArgs) -> CliResult<()> {
    let text = read_text(&args.manifest)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad manifest: {e}")))?;
    if config_hash(&manifest.config) != manifest.config_hash {
        return Err(CliError::Mismatch(
            "manifest config does not match its recorded hash".into(),
        ));
    }
    let output = run_experiment(&manifest.config, args.workers)?;
    write_report(&args.out, &manifest.config, &output)?;
    if args.check {
        let original = args.manifest.parent().unwrap_or(Path::new("."));
        for t in &output.tables {
            let before = read_text(&original.join(t.file_name()))?;
            if before != t.to_csv() {
                return Err(CliError::Mismatch(format!(
                    "{} differs from the original run",
                    t.file_name()
                )));
            }
        }
        eprintln!(
            "all {} tables reproduced byte-for-byte",
            output.tables.len()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Eval(a) => run(Mode::EvalStationary, a),
        Command::Optimize(a) => run(Mode::Optimize, a),
        Command::Shift(a) => run(Mode::CovariateShift, a),
        Command::Drns(a) => run(Mode::Drns, a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
