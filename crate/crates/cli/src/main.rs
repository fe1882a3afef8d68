use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use entmeas::experiments::{self, ExperimentConfig, Grid, OutputFormat, Strategy};
use entmeas::Error;

/// Precision of entanglement estimation from local measurements.
#[derive(Debug, Parser)]
#[command(name = "entmeas", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Average uncertainty of local tomography versus the angle between m and n.
    #[command(name = "sweep-fig1")]
    SweepFig1(Common),
    /// Fit δ = c/√N for both strategies.
    Scaling(Common),
    /// Monte Carlo error of the estimators against the analytic propagation.
    Empirical(Common),
    /// Verify the K-matrix identities and search for indistinguishable pairs.
    Nogo(Common),
    /// Single-state end-to-end estimate from a state file.
    Estimate(EstimateArgs),
    /// Check the reflection symmetries of δ_av and the optimality of orthogonal axes.
    Symmetry(Common),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// File with 8 reals: re/im of a₀..a₃.
    state: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Default)]
struct Common {
    /// Flat JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ensemble size M.
    #[arg(long)]
    states: Option<usize>,
    /// Pair budget N.
    #[arg(long)]
    pairs: Option<u64>,
    /// start:stop:steps
    #[arg(long)]
    grid: Option<Grid>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// local | cc
    #[arg(long)]
    strategy: Option<Strategy>,
    /// csv | json
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Simulated experiments per state (empirical).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    theta_m: Option<f64>,
    #[arg(long)]
    theta_n: Option<f64>,
    #[arg(long)]
    phi_nm: Option<f64>,
    #[arg(long)]
    c2_min: Option<f64>,
    #[arg(long)]
    c2_max: Option<f64>,
}

impl Common {
    fn resolve(&self, experiment: &str) -> Result<ExperimentConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))
                    .map_err(Failure::Usage)?;
                serde_json::from_str::<ExperimentConfig>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
                    .map_err(Failure::Usage)?
            }
            None => ExperimentConfig::default(),
        };
        c.experiment = experiment.to_string();
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = Some(v); } )* };
        }
        take!(states, pairs, grid, out, format, trials, theta_m, theta_n, phi_nm, c2_min, c2_max);
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(s) = self.strategy {
            c.strategy = s;
        }
        c.validate().map_err(|e| Failure::Usage(e.into()))?;
        Ok(c)
    }
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::InsufficientBudget { .. } => Failure::Usage(e.into()),
            other => Failure::Numerical(other.into()),
        }
    }
}

fn emit(
    config: &ExperimentConfig,
    default: OutputFormat,
    csv: impl FnOnce() -> entmeas::Result<String>,
    json: impl FnOnce() -> String,
) -> Result<(), Failure> {
    let text = match config.format.unwrap_or(default) {
        OutputFormat::Csv => csv()?,
        OutputFormat::Json => json(),
    };
    experiments::write_output(config.out.as_deref(), &text)?;
    Ok(())
}

fn json_only(config: &ExperimentConfig, name: &str) -> Result<(), Failure> {
    if config.format == Some(OutputFormat::Csv) {
        return Err(Failure::Usage(anyhow::anyhow!("{name} only writes json")));
    }
    Ok(())
}

fn read_state(path: &Path) -> Result<entmeas::PureState64, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    entmeas::literal::parse_state::<f64>(&text)
        .with_context(|| format!("state file {}", path.display()))
        .map_err(Failure::Usage)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::SweepFig1(a) => {
            let c = a.resolve("sweep-fig1")?;
            let t = experiments::run_fig1_sweep(&c)?;
            emit(
                &c,
                OutputFormat::Csv,
                || t.to_csv(),
                || experiments::to_json(&t.rows),
            )
        }
        Command::Scaling(a) => {
            let c = a.resolve("scaling")?;
            let r = experiments::run_scaling(&c)?;
            emit(
                &c,
                OutputFormat::Csv,
                || r.to_csv(),
                || experiments::to_json(&r),
            )
        }
        Command::Empirical(a) => {
            let c = a.resolve("empirical")?;
            let t = experiments::run_empirical(&c)?;
            emit(
                &c,
                OutputFormat::Csv,
                || t.to_csv(),
                || experiments::to_json(&t),
            )
        }
        Command::Nogo(a) => {
            let c = a.resolve("nogo")?;
            json_only(&c, "nogo")?;
            let r = experiments::run_nogo(&c)?;
            experiments::write_output(c.out.as_deref(), &experiments::to_json(&r))?;
            if !r.all_passed() {
                return Err(Failure::Numerical(anyhow::anyhow!(
                    "lemma held for {}/{} bases, counterexamples found for {}/{}",
                    r.lemma_passed,
                    r.bases,
                    r.counterexamples_found,
                    r.searches
                )));
            }
            Ok(())
        }
        Command::Symmetry(a) => {
            let c = a.resolve("symmetry")?;
            json_only(&c, "symmetry")?;
            let r = experiments::run_symmetry(&c)?;
            experiments::write_output(c.out.as_deref(), &experiments::to_json(&r))?;
            if !r.symmetric {
                return Err(Failure::Numerical(anyhow::anyhow!(
                    "symmetry images deviate by {:.2} standard errors",
                    r.max_deviation_se
                )));
            }
            Ok(())
        }
        Command::Estimate(a) => {
            let c = a.common.resolve("estimate")?;
            json_only(&c, "estimate")?;
            let state = read_state(&a.state)?;
            let r = experiments::run_estimate(&state, c.strategy, c.pairs_or_default(), c.seed)?;
            experiments::write_output(c.out.as_deref(), &experiments::to_json(&r))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical check failed: {e:#}");
            ExitCode::from(2)
        }
    }
}
