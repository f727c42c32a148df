//! `bvmlab` command-line front end: one subcommand per experiment.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 a `--check` threshold failed.

use std::path::PathBuf;
use std::process::ExitCode;

use bvmlab::harness::{self, Experiment, ExperimentConfig, Format, Outcome};
use clap::{Args, Parser, Subcommand};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bvmlab",
    version,
    about = "Monte Carlo experiments for adaptive nonparametric credible sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frequentist coverage of the default credible set for the prior.
    Coverage(Common),
    /// Credibility of C̃ₙ and of its intersection with the ℓ₂ ball.
    CredTable(Common),
    /// Independence of C̃ₙ and the ℓ₂ ball under the posterior.
    IndepL2(Common),
    /// Independence of the multiscale band and the sup-norm ball.
    IndepMs(Common),
    /// Escaping multiscale mass under the thresholded and unthresholded slab-and-spike priors.
    NegBvm(Common),
    /// Dirichlet histogram credible set and envelopes.
    Dirichlet(Common),
    /// Log-log scaling of credible radii and diameters in n.
    RadiusScaling(Common),
    /// Coverage of an oversmoothing fixed-α posterior.
    Oversmooth(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Comma-separated sample sizes.
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated significance levels.
    #[arg(long)]
    gamma: Option<String>,
    /// Calibration draws per replication.
    #[arg(long)]
    draws: Option<String>,
    /// Fresh evaluation draws per replication.
    #[arg(long)]
    fresh_draws: Option<String>,
    /// Monte Carlo replications.
    #[arg(long)]
    reps: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    /// eb, hb, hb-exp:r, hb-gamma:a,b, hb-invgamma:a,b, fixed:α, slab-spike[:j0], pi-prime.
    #[arg(long)]
    prior: Option<String>,
    /// power-sine:a,b, laplace[:loc,rate], holder:β,R.
    #[arg(long)]
    signal: Option<String>,
    /// Compute diameter estimates (true/false).
    #[arg(long)]
    diameter: Option<String>,
    /// Output directory; reports go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Exit with status 3 if any acceptance threshold fails.
    #[arg(long)]
    check: bool,
    /// Plain-text `key = value` file supplying any of the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::Coverage(c) => (Experiment::Coverage, c),
            Command::CredTable(c) => (Experiment::CredibilityTable, c),
            Command::IndepL2(c) => (Experiment::IndependenceL2, c),
            Command::IndepMs(c) => (Experiment::IndependenceMultiscale, c),
            Command::NegBvm(c) => (Experiment::NegativeBvm, c),
            Command::Dirichlet(c) => (Experiment::DirichletDemo, c),
            Command::RadiusScaling(c) => (Experiment::RadiusScaling, c),
            Command::Oversmooth(c) => (Experiment::OversmoothingDemo, c),
        }
    }
}

/// Defaults, then the config file, then command-line flags.
fn build_config(
    experiment: Experiment,
    args: &Common,
) -> Result<(ExperimentConfig, Format), String> {
    let mut cfg = ExperimentConfig::defaults(experiment);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let map = harness::parse_config_text(&text).map_err(|e| e.to_string())?;
        if let Some(e) = map.get("experiment") {
            if Experiment::parse(e).map_err(|e| e.to_string())? != experiment {
                return Err(format!(
                    "config file names experiment '{e}' but the subcommand is '{}'",
                    experiment.name()
                ));
            }
        }
        for (k, v) in map.iter().filter(|(k, _)| k.as_str() != "experiment") {
            cfg.apply(k, v).map_err(|e| e.to_string())?;
        }
    }
    let flags = [
        ("n", &args.n),
        ("gamma", &args.gamma),
        ("draws", &args.draws),
        ("fresh_draws", &args.fresh_draws),
        ("reps", &args.reps),
        ("seed", &args.seed),
        ("prior", &args.prior),
        ("signal", &args.signal),
        ("diameter", &args.diameter),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.apply(key, v).map_err(|e| e.to_string())?;
        }
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let format = Format::parse(&args.format).map_err(|e| e.to_string())?;
    Ok((cfg, format))
}

fn print_reports(outcome: &Outcome, format: Format) -> bvmlab::Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let bytes = match outcome {
        Outcome::Coverage(r) => harness::render(r, format)?,
        Outcome::Independence(r) => harness::render(r, format)?,
        Outcome::Scaling(r) => harness::render(r, format)?,
        Outcome::NegativeBvm(r) => harness::render(r, format)?,
        Outcome::Dirichlet(d) => {
            let mut b = harness::render(&d.coverage, format)?;
            b.extend(harness::render(&d.envelope, format)?);
            b
        }
    };
    out.write_all(&bytes)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = cli.command.split();
    let (cfg, format) = match build_config(experiment, &args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("bvmlab: configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match harness::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("bvmlab: {} failed: {e}", experiment.name());
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let written = match &cfg.out {
        Some(dir) => outcome.emit(dir, format).map(Some),
        None => print_reports(&outcome, format).map(|_| None),
    };
    match written {
        Ok(Some(files)) => {
            for (path, sum) in files {
                eprintln!("wrote {} sha256={sum}", path.display());
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("bvmlab: cannot write reports: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    if args.check {
        let checks = outcome.checks();
        for c in &checks {
            eprintln!(
                "[{}] {} value={:.4} target {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.target
            );
        }
        if checks.iter().any(|c| !c.pass) {
            return ExitCode::from(EXIT_CHECK);
        }
    }
    ExitCode::SUCCESS
}
