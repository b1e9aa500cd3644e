//! Experiment drivers behind the `nsrep` binary.
//!
//! Every experiment runs its Monte-Carlo replications on a private worker
//! pool, collects results in replication order and only then writes files,
//! so the output bytes depend on the configuration alone.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::burgers::{self, BurgersSettings, BurgersState};
use crate::config::{ExperimentKind, InitKind, RunConfig};
use crate::diagnostics::{self, DiagnosticsRecord, LowerBoundReport};
use crate::ensemble::{random_bandlimited_vorticity, shear_cos_velocity, EnsembleSettings, EnsembleState};
use crate::error::{Error, Result};
use crate::flowmap::StepOptions;
use crate::grid::{PeriodicGrid, VectorField};
use crate::norm::mean_square;
use crate::reference::{PeriodicProfile, ReferenceState};
use crate::{snapshot, spectral, stats};

/// Process exit codes of the CLI.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const IO: i32 = 1;
    pub const ASSERTION: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const CONFIG: i32 = 4;
}

/// Exit code for an error escaping `run`.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::ConfigLine { .. } => exit::CONFIG,
        Error::Io(_) => exit::IO,
        _ => exit::NUMERICAL,
    }
}

/// One pass/fail (or report-only) line of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub passed: bool,
    /// Report-only checks never fail a run.
    pub asserted: bool,
}

impl Check {
    fn hard(name: &str, value: f64, target: String, passed: bool) -> Self {
        Self { name: name.into(), value, target, passed, asserted: true }
    }

    fn report(name: &str, value: f64, target: String) -> Self {
        Self { name: name.into(), value, target, passed: true, asserted: false }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub out_dir: PathBuf,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.asserted)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            exit::PASS
        } else {
            exit::ASSERTION
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = match (c.asserted, c.passed) {
                (false, _) => "REPORT",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            let _ = writeln!(s, "{tag} {} = {} (target {})", c.name, c.value, c.target);
        }
        s
    }
}

/// Grid of a 2D configuration.
pub fn grid_of(cfg: &RunConfig) -> Result<PeriodicGrid> {
    PeriodicGrid::square(cfg.grid_n, cfg.length).map_err(|e| Error::Config(e.to_string()))
}

/// Initial velocity of a 2D configuration.
pub fn initial_velocity(cfg: &RunConfig, grid: &PeriodicGrid) -> Result<VectorField> {
    match &cfg.init {
        InitKind::RandomBandlimited => spectral::biot_savart(&random_bandlimited_vorticity(grid, cfg.init_kmax, cfg.init_seed)?),
        InitKind::ShearCos => Ok(shear_cos_velocity(grid)),
        InitKind::Snapshot(p) => {
            let u = snapshot::load(p)
                .and_then(|s| s.into_vector())
                .map_err(|e| Error::Config(format!("init snapshot {}: {e}", p.display())))?;
            if u.grid() != grid {
                return Err(Error::Config(format!("init snapshot {} is on {:?}, expected {grid:?}", p.display(), u.grid())));
            }
            Ok(u)
        }
        InitKind::NegSin => Err(Error::Config("neg_sin is one-dimensional data".into())),
    }
}

pub fn ensemble_settings(cfg: &RunConfig) -> EnsembleSettings {
    EnsembleSettings {
        nu: cfg.nu,
        reconstruction: cfg.reconstruction,
        step: StepOptions { integrator: cfg.integrator, interp: cfg.interp, ..Default::default() },
        crosscheck_every: cfg.crosscheck_every,
        tol_comp: cfg.tol_comp,
        eps_j: cfg.eps_j,
        abort_on_fold: cfg.abort_on_fold,
        ..Default::default()
    }
}

fn step_count(cfg: &RunConfig) -> u64 {
    (cfg.t_end / cfg.dt).round().max(1.0) as u64
}

/// A single replication: records at `t = 0`, every `record_every` steps and
/// at the end, plus the final state.
pub fn simulate(cfg: &RunConfig, u0: &VectorField, n_copies: usize, replication: u64) -> Result<(Vec<DiagnosticsRecord>, EnsembleState)> {
    let mut s = EnsembleState::uniform(u0, n_copies, ensemble_settings(cfg), cfg.master_seed, replication)?;
    let steps = step_count(cfg);
    let mut records = vec![diagnostics::record(&s)];
    for k in 1..=steps {
        s.advance_adaptive(cfg.dt)?;
        if k % cfg.record_every as u64 == 0 || k == steps {
            records.push(diagnostics::record(&s));
        }
    }
    Ok((records, s))
}

/// All replications of a long-run experiment.
#[derive(Clone, Debug)]
pub struct LongRuns {
    pub runs: Vec<Vec<DiagnosticsRecord>>,
    pub states: Vec<EnsembleState>,
    pub mean: Vec<DiagnosticsRecord>,
    pub stderr: Vec<DiagnosticsRecord>,
    pub u0: VectorField,
}

pub fn long_runs(cfg: &RunConfig) -> Result<LongRuns> {
    let grid = grid_of(cfg)?;
    let u0 = initial_velocity(cfg, &grid)?;
    let results: Vec<_> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| simulate(cfg, &u0, cfg.n_copies, r))
        .collect::<Result<_>>()?;
    let (runs, states): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let (mean, stderr) = diagnostics::aggregate(&runs)?;
    Ok(LongRuns { runs, states, mean, stderr, u0 })
}

/// Largest relative drift of any per-copy `||u^i||` over all records.
pub fn per_copy_drift(runs: &[Vec<DiagnosticsRecord>]) -> f64 {
    let mut worst = 0.0f64;
    for run in runs {
        let e0 = &run[0].per_copy_energy;
        for r in run {
            for (e, e0) in r.per_copy_energy.iter().zip(e0) {
                if *e0 > 0.0 {
                    worst = worst.max((e.sqrt() / e0.sqrt() - 1.0).abs());
                }
            }
        }
    }
    worst
}

/// Energy-balance residual summary across replications.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceReport {
    /// Largest `|mean windowed residual| - 2 stderr`, floored at zero.
    pub max_excess: f64,
    /// Largest `|mean windowed residual|`.
    pub max_abs: f64,
    /// Largest `|mean centered-difference residual|` over interior records.
    pub pointwise_max_abs: f64,
}

/// Window length, in time units, of the gated energy-balance residual.
pub const BALANCE_WINDOW: f64 = 1.0;

fn mean_series(per_rep: &[Vec<(f64, f64)>]) -> Vec<(f64, f64)> {
    (0..per_rep[0].len())
        .map(|k| stats::mean_stderr(&per_rep.iter().map(|r| r[k].1).collect::<Vec<_>>()))
        .collect()
}

pub fn energy_balance(runs: &[Vec<DiagnosticsRecord>], nu: f64) -> Result<BalanceReport> {
    let windows: Vec<_> = runs
        .iter()
        .map(|r| diagnostics::energy_balance_windows(r, nu, BALANCE_WINDOW))
        .collect::<Result<_>>()?;
    let points: Vec<_> = runs.iter().map(|r| diagnostics::energy_balance_residual(r, nu)).collect::<Result<_>>()?;
    let w = mean_series(&windows);
    Ok(BalanceReport {
        max_excess: w.iter().map(|(m, se)| m.abs() - 2.0 * se).fold(0.0, f64::max),
        max_abs: w.iter().map(|(m, _)| m.abs()).fold(0.0, f64::max),
        pointwise_max_abs: mean_series(&points).iter().map(|(m, _)| m.abs()).fold(0.0, f64::max),
    })
}

fn triangle_holds(runs: &[Vec<DiagnosticsRecord>]) -> bool {
    runs.iter().flatten().all(DiagnosticsRecord::triangle_bound_holds)
}

fn plateau_checks(cfg: &RunConfig, lr: &LongRuns, omega0_sq: f64, tol: (f64, f64), checks: &mut Vec<Check>) -> Result<()> {
    let target = omega0_sq / cfg.n_copies as f64;
    match diagnostics::plateau_estimate(&lr.mean, cfg.nu, cfg.length) {
        Ok(p) => {
            let ratio = p / target;
            checks.push(Check::report("plateau_enstrophy", p, format!("{target}")));
            checks.push(Check::hard(
                "plateau_ratio",
                ratio,
                format!("[{}, {}]", tol.0, tol.1),
                ratio >= tol.0 && ratio <= tol.1,
            ));
        }
        Err(Error::Precondition(m)) => {
            log::warn!("plateau not assessed: {m}");
            checks.push(Check::report("plateau_ratio", f64::NAN, "not assessed, nu * T < 2 L^2".into()));
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

fn lower_bound_checks(cfg: &RunConfig, lr: &LongRuns, checks: &mut Vec<Check>) -> Result<Option<LowerBoundReport>> {
    let u0_energy = mean_square(&lr.u0);
    match diagnostics::lower_bound_check(&lr.mean, Some(&lr.stderr), u0_energy, cfg.n_copies, cfg.length) {
        Ok(r) => {
            checks.push(Check::report("lower_bound_bound", r.bound, "||u0||^2 / (N L^2)".into()));
            checks.push(Check::hard("lower_bound_running_max", r.running_max, format!(">= {} - 2 se ({})", r.bound, r.stderr_at_max), !r.violated));
            checks.push(Check::report("lower_bound_liminf", r.liminf, "reported".into()));
            Ok(Some(r))
        }
        Err(Error::Precondition(m)) => {
            log::warn!("lower bound not assessed: {m}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn write_long(dir: &Path, lr: &LongRuns) -> Result<()> {
    for (r, run) in lr.runs.iter().enumerate() {
        let mut buf = Vec::new();
        diagnostics::write_csv(run, &mut buf)?;
        fs::write(dir.join(format!("rep_{r:03}.csv")), buf)?;
    }
    fs::write(dir.join("aggregate.csv"), aggregate_csv(&lr.mean, &lr.stderr))?;
    let ck = dir.join("checkpoints");
    fs::create_dir_all(&ck)?;
    for (r, s) in lr.states.iter().enumerate() {
        fs::write(ck.join(format!("rep_{r:03}.ckpt")), s.checkpoint())?;
    }
    Ok(())
}

fn aggregate_csv(mean: &[DiagnosticsRecord], se: &[DiagnosticsRecord]) -> String {
    let n = mean.first().map_or(0, |r| r.n_copies());
    let head = diagnostics::csv_header(n);
    let mut s = String::from("t");
    for h in &head[1..] {
        let _ = write!(s, ",{h}_mean,{h}_stderr");
    }
    s.push('\n');
    for (m, e) in mean.iter().zip(se) {
        let (mv, ev) = (m.values(), e.values());
        s.push_str(&mv[0].to_string());
        for c in 1..mv.len() {
            let _ = write!(s, ",{},{}", mv[c], ev[c]);
        }
        s.push('\n');
    }
    s
}

fn run_long(cfg: &RunConfig, dir: &Path) -> Result<Vec<Check>> {
    let lr = long_runs(cfg)?;
    write_long(dir, &lr)?;
    let omega0_sq = mean_square(&spectral::curl2d(&lr.u0)?);
    let mut checks = Vec::new();
    match cfg.experiment {
        ExperimentKind::Figure1 => {
            plateau_checks(cfg, &lr, omega0_sq, (0.5, 2.0), &mut checks)?;
            match energy_balance(&lr.runs, cfg.nu) {
                Ok(b) => {
                    checks.push(Check::hard("energy_balance_max_excess", b.max_excess, "<= 0.05".into(), b.max_excess <= 0.05));
                    checks.push(Check::report("energy_balance_max_abs", b.max_abs, "reported".into()));
                    checks.push(Check::report("energy_balance_pointwise_max_abs", b.pointwise_max_abs, "reported".into()));
                }
                Err(Error::Precondition(m)) => {
                    log::warn!("energy balance not assessed: {m}");
                    checks.push(Check::report("energy_balance_max_excess", f64::NAN, format!("not assessed, {m}")));
                }
                Err(e) => return Err(e),
            }
            checks.push(Check::hard("triangle_bound", triangle_holds(&lr.runs) as u8 as f64, "1".into(), triangle_holds(&lr.runs)));
            checks.push(Check::report("per_copy_drift", per_copy_drift(&lr.runs), "<= 0.01".into()));
            lower_bound_checks(cfg, &lr, &mut checks)?;
        }
        ExperimentKind::ShearLimit => {
            plateau_checks(cfg, &lr, omega0_sq, (0.9, 1.1), &mut checks)?;
            lower_bound_checks(cfg, &lr, &mut checks)?;
        }
        ExperimentKind::LowerBound => {
            if lower_bound_checks(cfg, &lr, &mut checks)?.is_none() {
                return Err(Error::Config("lower_bound needs mean-zero initial data".into()));
            }
        }
        _ => unreachable!(),
    }
    let s = lr.states.iter().map(|s| s.monitors().comp_residual).fold(0.0, f64::max);
    checks.push(Check::report("final_comp_residual_max", s, format!("tol {}", cfg.tol_comp * cfg.length)));
    Ok(checks)
}

/// Errors of the ensemble velocity at `T` against a dealiased reference on
/// the doubled grid with half the step, per copy count.
#[derive(Clone, Debug)]
pub struct ConvergenceResult {
    pub n_values: Vec<usize>,
    /// `errors[i][r]` for `n_values[i]` and replication `r`.
    pub errors: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub slope: f64,
    pub states: Vec<EnsembleState>,
}

pub fn convergence(cfg: &RunConfig) -> Result<ConvergenceResult> {
    let grid = grid_of(cfg)?;
    let fine = PeriodicGrid::square(2 * cfg.grid_n, cfg.length)?;
    let u0 = initial_velocity(cfg, &grid)?;
    let u0_fine = match cfg.init {
        InitKind::Snapshot(_) => spectral::resample_vector(&u0, &fine)?,
        _ => initial_velocity(cfg, &fine)?,
    };
    let reference = ReferenceState::from_velocity(&u0_fine, cfg.nu, true)?.run_to(step_count(cfg) as f64 * cfg.dt, cfg.dt / 2.0)?;
    let u_ref = reference.velocity();
    let mut errors = Vec::new();
    let mut states = Vec::new();
    for &n in &cfg.n_values {
        let res: Vec<(f64, EnsembleState)> = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|r| {
                let (_, s) = simulate(cfg, &u0, n, r)?;
                Ok((diagnostics::convergence_error(s.u(), &u_ref, true)?, s))
            })
            .collect::<Result<_>>()?;
        let mut it = res.into_iter();
        let (e0, s0) = it.next().expect("at least one replication");
        states.push(s0);
        errors.push(std::iter::once(e0).chain(it.map(|(e, _)| e)).collect::<Vec<_>>());
    }
    let (mean, stderr): (Vec<f64>, Vec<f64>) = errors.iter().map(|e| stats::mean_stderr(e)).unzip();
    let ns: Vec<f64> = cfg.n_values.iter().map(|&n| n as f64).collect();
    let slope = stats::loglog_slope(&ns, &mean);
    Ok(ConvergenceResult { n_values: cfg.n_values.clone(), errors, mean, stderr, slope, states })
}

fn run_convergence(cfg: &RunConfig, dir: &Path) -> Result<Vec<Check>> {
    let c = convergence(cfg)?;
    for r in 0..cfg.replications {
        let mut s = String::from("N,error\n");
        for (i, n) in c.n_values.iter().enumerate() {
            let _ = writeln!(s, "{n},{}", c.errors[i][r]);
        }
        fs::write(dir.join(format!("rep_{r:03}.csv")), s)?;
    }
    let mut s = String::from("N,error_mean,error_stderr,slope\n");
    for (i, n) in c.n_values.iter().enumerate() {
        let _ = writeln!(s, "{n},{},{},{}", c.mean[i], c.stderr[i], c.slope);
    }
    fs::write(dir.join("aggregate.csv"), s)?;
    let ck = dir.join("checkpoints");
    fs::create_dir_all(&ck)?;
    for (n, st) in c.n_values.iter().zip(&c.states) {
        fs::write(ck.join(format!("N{n:03}_rep_000.ckpt")), st.checkpoint())?;
    }
    let monotone = c.mean.windows(2).all(|w| w[1] < w[0]);
    Ok(vec![
        Check::hard("slope", c.slope, "[-0.65, -0.35]".into(), (-0.65..=-0.35).contains(&c.slope)),
        Check::hard("monotone_decrease", monotone as u8 as f64, "1".into(), monotone),
    ])
}

/// Shock times (`None` when a run reaches `T` intact) per replication.
pub fn burgers_runs(cfg: &RunConfig) -> Result<Vec<burgers::BurgersRun>> {
    let k = 2.0 * std::f64::consts::PI / cfg.length;
    let u0 = PeriodicProfile::from_fn(cfg.length, 64, |y| -(k * y).sin())?;
    let settings = BurgersSettings { nu: cfg.nu, eps_shock: cfg.eps_shock };
    let every = cfg.record_every;
    (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            BurgersState::new(u0.clone(), cfg.n_copies, cfg.burgers_n, settings, cfg.master_seed, r)?.run(cfg.t_end, cfg.dt, every)
        })
        .collect()
}

fn run_burgers(cfg: &RunConfig, dir: &Path) -> Result<Vec<Check>> {
    let runs = burgers_runs(cfg)?;
    let mut agg = String::from("replication,shock_time\n");
    for (r, run) in runs.iter().enumerate() {
        let mut buf = Vec::new();
        burgers::write_csv(&run.records, run.shock_time, &mut buf)?;
        fs::write(dir.join(format!("rep_{r:03}.csv")), buf)?;
        let _ = writeln!(agg, "{r},{}", run.shock_time.map_or(String::new(), |t| t.to_string()));
    }
    fs::write(dir.join("aggregate.csv"), agg)?;
    let times: Vec<f64> = runs.iter().filter_map(|r| r.shock_time).collect();
    let frac = times.len() as f64 / runs.len() as f64;
    let mut checks = vec![Check::report("shock_fraction", frac, format!("by T = {}", cfg.t_end))];
    if !times.is_empty() {
        let (m, se) = stats::mean_stderr(&times);
        checks.push(Check::report("shock_time_mean", m, format!("stderr {se}")));
    }
    if cfg.nu == 0.0 && cfg.n_copies == 1 {
        let expected = cfg.length / (2.0 * std::f64::consts::PI);
        let t = runs[0].shock_time.unwrap_or(f64::INFINITY);
        checks.push(Check::hard("deterministic_shock_time", t, format!("{expected} +- 0.02"), (t - expected).abs() <= 0.02));
    }
    Ok(checks)
}

/// Text of `manifest.txt`: version header and the resolved configuration.
/// It parses back to the same configuration minus the output directory.
pub fn manifest(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.out_dir = None;
    format!(
        "# nsrep {}\n# experiment {} master_seed {}\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.experiment.name(),
        cfg.master_seed,
        c.to_text()
    )
}

/// Runs an experiment on a pool of `threads` workers (all cores when
/// `None`) and writes its artifacts into `out` (or `cfg.out_dir`).
pub fn run(cfg: &RunConfig, out: Option<&Path>, threads: Option<usize>) -> Result<Outcome> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::Config("no output directory (use --out or output.dir)".into()))?;
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("manifest.txt"), manifest(cfg))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    log::info!("running {} with {} worker(s)", cfg.experiment.name(), pool.current_num_threads());
    let checks = pool.install(|| match cfg.experiment {
        ExperimentKind::ConvergenceN => run_convergence(cfg, &dir),
        ExperimentKind::BurgersProbe => run_burgers(cfg, &dir),
        _ => run_long(cfg, &dir),
    })?;
    let outcome = Outcome { checks, out_dir: dir };
    fs::write(outcome.out_dir.join("summary.txt"), outcome.summary())?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn tiny_figure1_writes_artifacts() {
        let cfg = parse_config(
            "experiment.name = figure1\nsim.N = 2\ngrid.n = 16\ninit.kmax = 3\nsim.T = 0.1\nsim.dt = 0.02\n\
             sim.record_every = 1\nmc.replications = 2\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let o = run(&cfg, Some(dir.path()), Some(1)).unwrap();
        for f in ["manifest.txt", "summary.txt", "aggregate.csv", "rep_000.csv", "rep_001.csv", "checkpoints/rep_001.ckpt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(o.check("plateau_ratio").unwrap().asserted, false);
        assert!(o.check("triangle_bound").unwrap().passed);
        let m = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert_eq!(parse_config(&m).unwrap(), cfg);
        let agg = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
        assert!(agg.starts_with("t,energy_mean,energy_stderr,"));
        assert_eq!(agg.lines().count(), 7);
    }

    #[test]
    fn burgers_deterministic_check() {
        let cfg = parse_config("experiment.name = burgers_probe\nsim.N = 1\nsim.T = 1.5\nmc.replications = 1\nburgers.n = 128\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let o = run(&cfg, Some(dir.path()), Some(1)).unwrap();
        assert!(o.passed(), "{:?}", o.checks);
        assert_eq!(o.check("shock_fraction").unwrap().value, 1.0);
    }

    #[test]
    fn missing_output_is_config_error() {
        let cfg = parse_config("experiment.name = burgers_probe\nsim.N = 1\n").unwrap();
        let e = run(&cfg, None, Some(1)).unwrap_err();
        assert_eq!(exit_code(&e), exit::CONFIG);
    }
}
