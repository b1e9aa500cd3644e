//! Run configuration: a small sectioned `key = value` format.
//!
//! ```text
//! # comment
//! [experiment]
//! name = figure1
//! [sim]
//! N = 2
//! nu = 0.1
//! ```
//!
//! Keys may also be written fully qualified (`sim.N = 2`) outside any
//! section. Unknown keys and duplicates are errors, reported with the line
//! number. Overrides given as `key=value` pairs take precedence over the
//! file, which takes precedence over the defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::ensemble::Reconstruction;
use crate::error::{Error, Result};
use crate::flowmap::Integrator;
use crate::interp::Interpolation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Figure1,
    ConvergenceN,
    ShearLimit,
    LowerBound,
    BurgersProbe,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Figure1,
        ExperimentKind::ConvergenceN,
        ExperimentKind::ShearLimit,
        ExperimentKind::LowerBound,
        ExperimentKind::BurgersProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Figure1 => "figure1",
            ExperimentKind::ConvergenceN => "convergence_N",
            ExperimentKind::ShearLimit => "shear_limit",
            ExperimentKind::LowerBound => "lower_bound",
            ExperimentKind::BurgersProbe => "burgers_probe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Experiments that need `nu * T >= 2 L^2`.
    pub fn is_long_run(self) -> bool {
        matches!(self, ExperimentKind::Figure1 | ExperimentKind::ShearLimit | ExperimentKind::LowerBound)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitKind {
    RandomBandlimited,
    ShearCos,
    /// `u0(y) = -sin(2 pi y / L)`, the Burgers probe's data.
    NegSin,
    /// Velocity snapshot file.
    Snapshot(PathBuf),
}

impl InitKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "random_bandlimited" => Some(InitKind::RandomBandlimited),
            "shear_cos" => Some(InitKind::ShearCos),
            "neg_sin" => Some(InitKind::NegSin),
            _ => s.strip_prefix("snapshot:").filter(|p| !p.is_empty()).map(|p| InitKind::Snapshot(p.into())),
        }
    }

    fn render(&self) -> String {
        match self {
            InitKind::RandomBandlimited => "random_bandlimited".into(),
            InitKind::ShearCos => "shear_cos".into(),
            InitKind::NegSin => "neg_sin".into(),
            InitKind::Snapshot(p) => format!("snapshot:{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub grid_n: usize,
    pub length: f64,
    pub nu: f64,
    /// Copies per ensemble; unused by `convergence_N`.
    pub n_copies: usize,
    /// Copy counts swept by `convergence_N`.
    pub n_values: Vec<usize>,
    pub dt: f64,
    pub t_end: f64,
    pub reconstruction: Reconstruction,
    pub interp: Interpolation,
    pub integrator: Integrator,
    pub record_every: usize,
    pub master_seed: u64,
    pub replications: usize,
    pub init: InitKind,
    pub init_kmax: usize,
    pub init_seed: u64,
    pub crosscheck_every: usize,
    pub tol_comp: f64,
    pub eps_j: f64,
    pub abort_on_fold: bool,
    pub burgers_n: usize,
    pub eps_shock: f64,
    pub out_dir: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "experiment.name",
    "grid.n",
    "domain.L",
    "sim.nu",
    "sim.N",
    "sim.N_values",
    "sim.dt",
    "sim.T",
    "sim.reconstruction",
    "sim.interp",
    "sim.integrator",
    "sim.record_every",
    "rng.master_seed",
    "mc.replications",
    "init.kind",
    "init.kmax",
    "init.seed",
    "monitor.crosscheck_every",
    "monitor.tol_comp",
    "monitor.eps_j",
    "monitor.abort_on_fold",
    "burgers.n",
    "burgers.eps_shock",
    "output.dir",
];

/// Raw key/value pairs with the line each came from (0 for overrides).
#[derive(Clone, Debug, Default)]
struct Entries(BTreeMap<String, (String, usize)>);

fn lex(text: &str) -> Result<Entries> {
    let mut out = Entries::default();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty() && !n.contains(['[', ']', '.', ' ']))
                .ok_or_else(|| Error::ConfigLine { line, msg: format!("malformed section header `{s}`") })?;
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::ConfigLine { line, msg: format!("expected `key = value`, got `{s}`") })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::ConfigLine { line, msg: "empty key".into() });
        }
        let key = match (&section, k.contains('.')) {
            (Some(sec), false) => format!("{sec}.{k}"),
            (_, true) => k.to_string(),
            (None, false) => {
                return Err(Error::ConfigLine { line, msg: format!("key `{k}` needs a section or a dotted name") })
            }
        };
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::ConfigLine { line, msg: format!("unknown key `{key}`") });
        }
        if let Some((_, first)) = out.0.get(&key) {
            return Err(Error::ConfigLine { line, msg: format!("duplicate key `{key}` (first set on line {first})") });
        }
        out.0.insert(key, (v.to_string(), line));
    }
    Ok(out)
}

fn err_at(line: usize, key: &str, msg: impl std::fmt::Display) -> Error {
    if line == 0 {
        Error::Config(format!("override `{key}`: {msg}"))
    } else {
        Error::ConfigLine { line, msg: format!("`{key}`: {msg}") }
    }
}

impl Entries {
    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some((v, line)) => parse(v).map(Some).ok_or_else(|| err_at(*line, key, format!("expected {what}, got `{v}`"))),
        }
    }

    fn line(&self, key: &str) -> usize {
        self.0.get(key).map_or(0, |e| e.1)
    }
}

/// Reads a float, also accepting multiples of pi such as `2pi` or `0.5*pi`.
fn parse_f64(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some(m) = s.strip_suffix("pi") {
        let m = m.trim().trim_end_matches('*').trim();
        let f = if m.is_empty() { 1.0 } else { m.parse::<f64>().ok()? };
        return Some(f * std::f64::consts::PI);
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_usize(s: &str) -> Option<usize> {
    s.parse().ok()
}

fn parse_u64(s: &str) -> Option<u64> {
    s.parse().ok()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn parse_list(s: &str) -> Option<Vec<usize>> {
    s.split(',').map(|p| p.trim().parse().ok()).collect()
}

fn parse_reconstruction(s: &str) -> Option<Reconstruction> {
    match s {
        "vorticity" => Some(Reconstruction::Vorticity),
        "weber" => Some(Reconstruction::Weber),
        _ => None,
    }
}

fn parse_interp(s: &str) -> Option<Interpolation> {
    match s {
        "cubic" => Some(Interpolation::Cubic),
        "linear" => Some(Interpolation::Linear),
        _ => None,
    }
}

fn parse_integrator(s: &str) -> Option<Integrator> {
    match s {
        "euler_maruyama" => Some(Integrator::EulerMaruyama),
        "heun" => Some(Integrator::Heun),
        _ => None,
    }
}

/// Parses and validates a configuration with no overrides.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

/// Parses `text`, then applies `key=value` overrides on top.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut e = lex(text)?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` is not `key=value`")))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("unknown override key `{k}`")));
        }
        e.0.insert(k.to_string(), (v.trim().to_string(), 0));
    }
    resolve(&e)
}

fn resolve(e: &Entries) -> Result<RunConfig> {
    let experiment = e
        .get("experiment.name", ExperimentKind::parse, "one of figure1, convergence_N, shear_limit, lower_bound, burgers_probe")?
        .ok_or_else(|| Error::Config("`experiment.name` is required".into()))?;
    let length = e.get("domain.L", parse_f64, "a number")?.unwrap_or(2.0 * std::f64::consts::PI);
    let nu = e.get("sim.nu", parse_f64, "a number")?.unwrap_or(match experiment {
        ExperimentKind::BurgersProbe => 0.0,
        _ => 0.1,
    });
    let n_copies = e.get("sim.N", parse_usize, "a non-negative integer")?;
    let n_copies = match (experiment, n_copies) {
        (ExperimentKind::ConvergenceN, n) => n.unwrap_or(0),
        (_, Some(n)) => n,
        (_, None) => return Err(Error::Config(format!("`sim.N` is required for {}", experiment.name()))),
    };
    let t_default = match experiment {
        ExperimentKind::ConvergenceN => 0.5,
        ExperimentKind::BurgersProbe => 5.0,
        _ if nu > 0.0 => 2.0 * length * length / nu,
        _ => 1.0,
    };
    let default_init = match experiment {
        ExperimentKind::ShearLimit => InitKind::ShearCos,
        ExperimentKind::BurgersProbe => InitKind::NegSin,
        _ => InitKind::RandomBandlimited,
    };
    let cfg = RunConfig {
        experiment,
        grid_n: e.get("grid.n", parse_usize, "an integer")?.unwrap_or(24),
        length,
        nu,
        n_copies,
        n_values: e.get("sim.N_values", parse_list, "a comma-separated list of integers")?.unwrap_or(vec![2, 4, 8, 16, 32]),
        dt: e.get("sim.dt", parse_f64, "a number")?.unwrap_or(match experiment {
            ExperimentKind::BurgersProbe => 1e-3,
            _ => 0.01,
        }),
        t_end: e.get("sim.T", parse_f64, "a number")?.unwrap_or(t_default),
        reconstruction: e.get("sim.reconstruction", parse_reconstruction, "vorticity or weber")?.unwrap_or_default(),
        interp: e.get("sim.interp", parse_interp, "cubic or linear")?.unwrap_or_default(),
        integrator: e.get("sim.integrator", parse_integrator, "euler_maruyama or heun")?.unwrap_or_default(),
        record_every: e.get("sim.record_every", parse_usize, "an integer")?.unwrap_or(10),
        master_seed: e.get("rng.master_seed", parse_u64, "an unsigned integer")?.unwrap_or(0),
        replications: e.get("mc.replications", parse_usize, "an integer")?.unwrap_or(match experiment {
            ExperimentKind::ConvergenceN => 20,
            ExperimentKind::BurgersProbe => 100,
            _ => 20,
        }),
        init: e.get("init.kind", InitKind::parse, "random_bandlimited, shear_cos, neg_sin or snapshot:<path>")?.unwrap_or(default_init),
        init_kmax: e.get("init.kmax", parse_usize, "an integer")?.unwrap_or(6),
        init_seed: e.get("init.seed", parse_u64, "an unsigned integer")?.unwrap_or(1),
        crosscheck_every: e.get("monitor.crosscheck_every", parse_usize, "an integer")?.unwrap_or(10),
        tol_comp: e.get("monitor.tol_comp", parse_f64, "a number")?.unwrap_or(1e-6),
        eps_j: e.get("monitor.eps_j", parse_f64, "a number")?.unwrap_or(1e-2),
        abort_on_fold: e.get("monitor.abort_on_fold", parse_bool, "true or false")?.unwrap_or(false),
        burgers_n: e.get("burgers.n", parse_usize, "an integer")?.unwrap_or(256),
        eps_shock: e.get("burgers.eps_shock", parse_f64, "a number")?.unwrap_or(crate::burgers::EPS_SHOCK),
        out_dir: e.get("output.dir", |s| Some(PathBuf::from(s)), "a path")?,
    };
    cfg.validate(e)?;
    Ok(cfg)
}

impl RunConfig {
    fn validate(&self, e: &Entries) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(err_at(e.line(key), key, msg));
        if self.grid_n < 8 || self.grid_n % 2 != 0 {
            return bad("grid.n", "must be an even integer >= 8");
        }
        if !(self.length > 0.0) {
            return bad("domain.L", "must be positive");
        }
        if !(self.nu >= 0.0) {
            return bad("sim.nu", "must be non-negative");
        }
        if self.experiment != ExperimentKind::ConvergenceN && self.n_copies == 0 {
            return bad("sim.N", "must be positive");
        }
        if self.experiment == ExperimentKind::ConvergenceN && (self.n_values.len() < 2 || self.n_values.contains(&0)) {
            return bad("sim.N_values", "needs at least two positive entries");
        }
        if !(self.dt > 0.0) {
            return bad("sim.dt", "must be positive");
        }
        if !(self.t_end > 0.0) {
            return bad("sim.T", "must be positive");
        }
        if self.record_every == 0 {
            return bad("sim.record_every", "must be positive");
        }
        if self.replications == 0 {
            return bad("mc.replications", "must be positive");
        }
        if self.init_kmax == 0 || 2 * self.init_kmax >= self.grid_n {
            return bad("init.kmax", "must be positive and below grid.n / 2");
        }
        let is_burgers = self.experiment == ExperimentKind::BurgersProbe;
        if is_burgers != (self.init == InitKind::NegSin) {
            return bad("init.kind", "neg_sin is the Burgers probe's data and only valid there");
        }
        if !(self.tol_comp > 0.0) {
            return bad("monitor.tol_comp", "must be positive");
        }
        if !(self.eps_j > 0.0) {
            return bad("monitor.eps_j", "must be positive");
        }
        if self.burgers_n < 4 {
            return bad("burgers.n", "must be at least 4");
        }
        if !(self.eps_shock > 0.0) {
            return bad("burgers.eps_shock", "must be positive");
        }
        Ok(())
    }

    /// Fully resolved configuration in the input format. Parsing the result
    /// gives back an equal `RunConfig`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[usize]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "[experiment]\nname = {}\n", self.experiment.name());
        let _ = writeln!(s, "[grid]\nn = {}\n", self.grid_n);
        let _ = writeln!(s, "[domain]\nL = {}\n", self.length);
        let _ = writeln!(s, "[sim]");
        let _ = writeln!(s, "nu = {}", self.nu);
        if self.experiment == ExperimentKind::ConvergenceN {
            let _ = writeln!(s, "N_values = {}", list(&self.n_values));
        } else {
            let _ = writeln!(s, "N = {}", self.n_copies);
        }
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "T = {}", self.t_end);
        let _ = writeln!(s, "reconstruction = {}", self.reconstruction.name());
        let _ = writeln!(
            s,
            "interp = {}",
            match self.interp {
                Interpolation::Cubic => "cubic",
                Interpolation::Linear => "linear",
            }
        );
        let _ = writeln!(
            s,
            "integrator = {}",
            match self.integrator {
                Integrator::EulerMaruyama => "euler_maruyama",
                Integrator::Heun => "heun",
            }
        );
        let _ = writeln!(s, "record_every = {}\n", self.record_every);
        let _ = writeln!(s, "[rng]\nmaster_seed = {}\n", self.master_seed);
        let _ = writeln!(s, "[mc]\nreplications = {}\n", self.replications);
        let _ = writeln!(s, "[init]\nkind = {}\nkmax = {}\nseed = {}\n", self.init.render(), self.init_kmax, self.init_seed);
        let _ = writeln!(
            s,
            "[monitor]\ncrosscheck_every = {}\ntol_comp = {}\neps_j = {}\nabort_on_fold = {}\n",
            self.crosscheck_every, self.tol_comp, self.eps_j, self.abort_on_fold
        );
        let _ = writeln!(s, "[burgers]\nn = {}\neps_shock = {}", self.burgers_n, self.eps_shock);
        if let Some(d) = &self.out_dir {
            let _ = writeln!(s, "\n[output]\ndir = {}", d.display());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line_of(e: Error) -> usize {
        match e {
            Error::ConfigLine { line, .. } => line,
            e => panic!("expected a line error, got {e}"),
        }
    }

    #[test]
    fn empty_file_needs_experiment() {
        assert!(matches!(parse_config(""), Err(Error::Config(m)) if m.contains("experiment.name")));
    }

    #[test]
    fn figure1_requires_n_then_fills_defaults() {
        let e = parse_config("[experiment]\nname = figure1\n").unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("sim.N")));
        let c = parse_config("[experiment]\nname = figure1\n[sim]\nN = 2\n").unwrap();
        assert_eq!(c.grid_n, 24);
        assert_eq!(c.length, 2.0 * PI);
        assert_eq!(c.nu, 0.1);
        assert_eq!(c.n_copies, 2);
        assert_eq!(c.init, InitKind::RandomBandlimited);
        assert!((c.nu * c.t_end - 2.0 * c.length * c.length).abs() < 1e-9);
    }

    #[test]
    fn zero_copies_rejected_with_line() {
        let e = parse_config("experiment.name = figure1\n\nsim.N = 0\n").unwrap_err();
        assert_eq!(line_of(e), 3);
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert_eq!(line_of(parse_config("[sim]\nN = 2\nfoo = 1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_config("[sim]\nN = 2\nN = 3\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_config("[sim\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_config("loose\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_config("N = 2\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_config("experiment.name = figure1\nsim.N = two\n").unwrap_err()), 2);
    }

    #[test]
    fn overrides_win() {
        let text = "[experiment]\nname = figure1\n[sim]\nN = 2\nnu = 0.5\n";
        let c = parse_config_with(text, &["sim.nu=1".into(), "grid.n=32".into()]).unwrap();
        assert_eq!(c.nu, 1.0);
        assert_eq!(c.grid_n, 32);
        assert!(parse_config_with(text, &["sim.bogus=1".into()]).is_err());
        assert!(parse_config_with(text, &["sim.N=0".into()]).is_err());
    }

    #[test]
    fn pi_values() {
        assert_eq!(parse_f64("2pi"), Some(2.0 * PI));
        assert_eq!(parse_f64("0.5 * pi"), Some(0.5 * PI));
        assert_eq!(parse_f64("pi"), Some(PI));
        assert_eq!(parse_f64("1e-3"), Some(1e-3));
        assert_eq!(parse_f64("inf"), None);
    }

    #[test]
    fn manifest_round_trip() {
        for text in [
            "experiment.name = figure1\nsim.N = 2\nsim.T = 3\noutput.dir = /tmp/x\n",
            "experiment.name = convergence_N\nsim.N_values = 2,4\ninit.kind = snapshot:/tmp/u.bin\n",
            "experiment.name = burgers_probe\nsim.N = 4\nsim.nu = 0.05\nsim.integrator = heun\n",
            "experiment.name = shear_limit\nsim.N = 8\nsim.interp = linear\nsim.reconstruction = weber\n",
        ] {
            let c = parse_config(text).unwrap();
            assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        }
    }

    #[test]
    fn burgers_defaults_and_init_guard() {
        let c = parse_config("experiment.name = burgers_probe\nsim.N = 1\n").unwrap();
        assert_eq!(c.init, InitKind::NegSin);
        assert_eq!(c.nu, 0.0);
        assert!(parse_config("experiment.name = figure1\nsim.N = 1\ninit.kind = neg_sin\n").is_err());
    }
}
