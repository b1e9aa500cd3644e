use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsrep::config::parse_config_with;
use nsrep::experiments::{self, exit};

#[derive(Parser)]
#[command(name = "nsrep", version, about = "N-replica stochastic-Lagrangian Navier-Stokes experiments")]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Subcommand)]
enum Experiment {
    /// Long run from random band-limited data; enstrophy plateau and energy balance.
    Figure1(Common),
    /// Error against a reference solution as the copy count grows.
    #[command(name = "convergence_N")]
    ConvergenceN(Common),
    /// Long run from shear data; plateau against its closed form.
    #[command(name = "shear_limit")]
    ShearLimit(Common),
    /// Long run checked against the gradient lower bound.
    #[command(name = "lower_bound")]
    LowerBound(Common),
    /// One-dimensional Burgers analogue and its shock times.
    #[command(name = "burgers_probe")]
    BurgersProbe(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set sim.N=8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG as u8 } else { 0 });
        }
    };
    let (name, args) = match cli.experiment {
        Experiment::Figure1(a) => ("figure1", a),
        Experiment::ConvergenceN(a) => ("convergence_N", a),
        Experiment::ShearLimit(a) => ("shear_limit", a),
        Experiment::LowerBound(a) => ("lower_bound", a),
        Experiment::BurgersProbe(a) => ("burgers_probe", a),
    };
    let code = match go(name, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            experiments::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn go(name: &str, args: Common) -> nsrep::Result<i32> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| nsrep::Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut overrides = vec![format!("experiment.name={name}")];
    overrides.extend(args.set);
    let cfg = parse_config_with(&text, &overrides)?;
    let threads = match std::env::var("NSREP_THREADS") {
        Ok(v) => Some(
            v.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| nsrep::Error::Config(format!("NSREP_THREADS must be a positive integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    let outcome = experiments::run(&cfg, args.out.as_deref(), threads)?;
    for c in &outcome.checks {
        let tag = match (c.asserted, c.passed) {
            (false, _) => "report",
            (true, true) => "pass",
            (true, false) => "FAIL",
        };
        println!("{tag:>6}  {} = {} (target {})", c.name, c.value, c.target);
    }
    println!("artifacts in {}", outcome.out_dir.display());
    Ok(outcome.exit_code())
}
