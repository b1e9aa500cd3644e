//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion outside `KNOWN_FAILURES` fails.
//!
//! Run alone with `cargo test --release --test acceptance`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nsrep::config::parse_config;
use nsrep::diagnostics;
use nsrep::ensemble::{random_bandlimited_vorticity, EnsembleSettings, EnsembleState};
use nsrep::experiments::{self, LongRuns};
use nsrep::flowmap::FlowMap;
use nsrep::norm::{mean_square, nondim_norm, Lp};
use nsrep::reference::ReferenceState;
use nsrep::rng::{Domain, ReplicaStream, StreamKey};
use nsrep::stats::loglog_slope;
use nsrep::{spectral, PeriodicGrid, ScalarField, VectorField};

const L: f64 = 2.0 * PI;

/// Criteria that cannot hold for the system as specified. Each still runs
/// and prints its measured values; see the README for the analysis.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    3,
    "||u^i|| is conserved only when u^i = u (N = 1); for N >= 2 it changes at rate -2 int u^i.S(u)u^i",
)];

struct Outcome {
    id: u32,
    passed: bool,
    detail: String,
}

fn outcome(id: u32, passed: bool, detail: String) -> Outcome {
    Outcome { id, passed, detail }
}

fn grid(n: usize) -> PeriodicGrid {
    PeriodicGrid::square(n, L).unwrap()
}

fn rel(a: &VectorField, b: &VectorField) -> f64 {
    nondim_norm(&a.sub(b), Lp::L2) / nondim_norm(b, Lp::L2)
}

fn c1_spectral() -> Outcome {
    let mut worst = [0.0f64; 4];
    for (n1, n2) in [(24, 24), (32, 48), (64, 64)] {
        let g = PeriodicGrid::new(n1, n2, L).unwrap();
        // single mode omega = sin(a x + b y): psi = omega / k^2, u = (d2 psi, -d1 psi)
        for (a, b) in [(1.0, 0.0), (2.0, 3.0), (-5.0, 1.0)] {
            let k2: f64 = a * a + b * b;
            let w = ScalarField::from_fn(&g, |[x, y]| (a * x + b * y).sin());
            let want = VectorField::from_fn(&g, |[x, y]| {
                let c = (a * x + b * y).cos() / k2;
                [b * c, -a * c]
            });
            let u = spectral::biot_savart(&w).unwrap();
            worst[0] = worst[0].max(u.sub(&want).max_abs());
        }
        let mut rng = ReplicaStream::new(StreamKey::new(5, 0, 0, Domain::Init));
        let noise: Vec<f64> = (0..2 * g.len()).map(|_| rng.normal()).collect();
        let v = VectorField::from_values(&g, noise[..g.len()].to_vec(), noise[g.len()..].to_vec()).unwrap();
        let p = spectral::leray_project(&v);
        worst[1] = worst[1].max(spectral::leray_project(&p).sub(&p).max_abs());
        let phi = ScalarField::from_fn(&g, |[x, y]| (2.0 * x).sin() * (3.0 * y).cos() + (x + y).cos());
        worst[2] = worst[2].max(spectral::leray_project(&spectral::gradient(&phi)).max_abs());
        let w = random_bandlimited_vorticity(&g, 6, 3).unwrap();
        let back = spectral::curl2d(&spectral::biot_savart(&w).unwrap()).unwrap();
        worst[3] = worst[3].max(back.sub(&w).max_abs());
    }
    let ok = worst[0] <= 1e-12 && worst[1] <= 1e-12 && worst[2] <= 1e-12 && worst[3] <= 1e-10;
    outcome(
        1,
        ok,
        format!(
            "biot_savart {:.1e} (1e-12), leray idempotence {:.1e} (1e-12), gradient annihilation {:.1e} (1e-12), curl round trip {:.1e} (1e-10)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

/// Two-shear composition `X(y) = (y1 + a(y2), y2 + b(y1 + a(y2)))`, with
/// exact inverse, area preserving.
fn sheared_map(g: &PeriodicGrid, a: &dyn Fn(f64) -> f64, b: &dyn Fn(f64) -> f64) -> FlowMap {
    let lambda = VectorField::from_fn(g, |[y1, y2]| [a(y2), b(y1 + a(y2))]);
    let mu = VectorField::from_fn(g, |[x1, x2]| {
        let z2 = x2 - b(x1);
        [-a(z2), z2 - x2]
    });
    FlowMap { lambda, mu, brownian: [0.0; 2], t: 0.0 }
}

fn random_profile(rng: &mut ReplicaStream, amp: f64) -> impl Fn(f64) -> f64 {
    let c: Vec<(f64, f64, f64)> = (1..=3).map(|m| (m as f64, amp * rng.normal() / m as f64, 2.0 * PI * rng.uniform())).collect();
    move |s| c.iter().map(|&(m, a, p)| a * (m * s + p).sin()).sum()
}

fn c2_equivalence() -> Outcome {
    let ns = [24usize, 48, 96];
    let (mut worst_order, mut worst48, mut monotone) = (f64::INFINITY, 0.0f64, true);
    for state in 0..10u64 {
        let mut rng = ReplicaStream::new(StreamKey::new(state, 0, 0, Domain::Init));
        let profiles: Vec<_> = (0..4).map(|_| random_profile(&mut rng, 0.3)).collect();
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let g = grid(n);
                let maps = vec![sheared_map(&g, &profiles[0], &profiles[1]), sheared_map(&g, &profiles[2], &profiles[3])];
                let u0: Vec<VectorField> = (0..2)
                    .map(|c| spectral::biot_savart(&random_bandlimited_vorticity(&g, 6, 100 + 2 * state + c).unwrap()).unwrap())
                    .collect();
                let s = EnsembleState::from_maps(u0, maps, EnsembleSettings::default(), 0, 0).unwrap();
                rel(&s.reconstruct_velocity_weber(), &s.reconstruct_velocity_vorticity().1)
            })
            .collect();
        let order = -loglog_slope(&ns.map(|n| n as f64), &errs);
        worst_order = worst_order.min(order);
        worst48 = worst48.max(errs[1]);
        monotone &= errs[1] < errs[0] && errs[2] < errs[1];
    }
    outcome(
        2,
        monotone && worst_order >= 2.5 && worst48 <= 1e-3,
        format!("10 states: min fitted order {worst_order:.2} (>= 2.5), max error at 48^2 {worst48:.2e} (<= 1e-3), monotone {monotone}"),
    )
}

fn c3_per_copy(fig: &LongRuns) -> Outcome {
    let drift = experiments::per_copy_drift(&fig.runs);
    let triangle = fig.runs.iter().flatten().all(|r| r.triangle_bound_holds());
    outcome(
        3,
        drift <= 0.01 && triangle,
        format!("max per-copy ||u^i|| drift {drift:.3} (<= 0.01); triangle bound on every record: {triangle}"),
    )
}

fn c4_reference() -> Outcome {
    let g = grid(32);
    let w0 = ScalarField::from_fn(&g, |[x, _]| x.cos());
    let r = ReferenceState::new(w0.clone(), 0.1, true).unwrap().run_to(1.0, 0.01).unwrap();
    let decay = r.omega.sub(&w0.scaled((-0.1f64).exp())).max_abs();
    let (nu, h) = (0.05, 0.01);
    let mut s = ReferenceState::new(random_bandlimited_vorticity(&g, 6, 4).unwrap(), nu, true).unwrap();
    let mut series = vec![(mean_square(&s.velocity()), mean_square(&s.omega))];
    for _ in 0..100 {
        s = s.ns_step(h).unwrap();
        series.push((mean_square(&s.velocity()), mean_square(&s.omega)));
    }
    let e0 = series[0].0;
    let e = |k: usize| series[k].0;
    let law = (2..series.len() - 2).fold(0.0f64, |m, k| {
        let dedt = (e(k - 2) - 8.0 * e(k - 1) + 8.0 * e(k + 1) - e(k + 2)) / (12.0 * h);
        m.max((dedt + 2.0 * nu * series[k].1).abs())
    }) / e0;
    outcome(4, decay <= 1e-8 && law <= 1e-6, format!("single-mode decay error {decay:.1e} (1e-8), energy-law residual {law:.1e} E0 (1e-6)"))
}

fn c5_inviscid() -> Outcome {
    let g = grid(48);
    let u0 = spectral::biot_savart(&random_bandlimited_vorticity(&g, 6, 1).unwrap()).unwrap();
    let dt = 1e-3;
    let r = ReferenceState::from_velocity(&u0, 0.0, true).unwrap().run_to(0.5, dt).unwrap();
    let settings = EnsembleSettings { nu: 0.0, crosscheck_every: 0, ..Default::default() };
    let mut s = EnsembleState::uniform(&u0, 1, settings, 0, 0).unwrap();
    for _ in 0..500 {
        s.advance(dt).unwrap();
    }
    let err = nondim_norm(&s.u().sub(&r.velocity()), Lp::L2);
    outcome(5, err <= 1e-3, format!("||u - u_ref|| = {err:.2e} at t = {:.3} (<= 1e-3)", s.t()))
}

fn c6_convergence() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for kind in ["shear_cos", "random_bandlimited"] {
        let cfg = parse_config(&format!(
            "experiment.name = convergence_N\ninit.kind = {kind}\nsim.nu = 0.1\nsim.T = 0.5\nsim.dt = 0.01\n\
             mc.replications = 20\nsim.N_values = 2,4,8,16,32\nmonitor.crosscheck_every = 0\nrng.master_seed = 7\n"
        ))
        .unwrap();
        let c = experiments::convergence(&cfg).unwrap();
        let monotone = c.mean.windows(2).all(|w| w[1] < w[0]);
        let in_window = (-0.65..=-0.35).contains(&c.slope);
        ok &= monotone && in_window;
        let errs: Vec<String> = c.mean.iter().map(|e| format!("{e:.4}")).collect();
        detail.push(format!("{kind}: slope {:.3} ([-0.65, -0.35]), errors [{}], monotone {monotone}", c.slope, errs.join(", ")));
    }
    outcome(6, ok, detail.join("; "))
}

fn long_cfg(name: &str, n: usize, m: usize, record_every: usize) -> nsrep::config::RunConfig {
    parse_config(&format!(
        "experiment.name = {name}\nsim.N = {n}\nsim.nu = 1\nsim.dt = 0.1\nmc.replications = {m}\nsim.record_every = {record_every}\n"
    ))
    .unwrap()
}

fn plateau_ratio(lr: &LongRuns, n: usize) -> f64 {
    let w0 = mean_square(&spectral::curl2d(&lr.u0).unwrap());
    diagnostics::plateau_estimate(&lr.mean, 1.0, L).unwrap() / (w0 / n as f64)
}

fn c7_plateau(shear: &[(usize, &LongRuns)], random: &[(usize, &LongRuns)]) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for &(n, lr) in shear {
        let r = plateau_ratio(lr, n);
        ok &= (0.9..=1.1).contains(&r);
        detail.push(format!("shear N={n}: plateau / (||w0||^2/N) = {r:.3} ([0.9, 1.1])"));
    }
    for &(n, lr) in random {
        let r = plateau_ratio(lr, n);
        ok &= (0.5..=2.0).contains(&r);
        detail.push(format!("random N={n}: {r:.3} ([0.5, 2])"));
    }
    outcome(7, ok, detail.join("; "))
}

fn c8_lower_bound(runs: &[(&str, usize, &LongRuns)]) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for &(name, n, lr) in runs {
        let r = diagnostics::lower_bound_check(&lr.mean, Some(&lr.stderr), mean_square(&lr.u0), n, L).unwrap();
        ok &= !r.violated;
        detail.push(format!("{name} N={n}: max {:.3e} vs bound {:.3e}", r.running_max, r.bound));
    }
    outcome(8, ok, detail.join("; "))
}

fn c9_balance(fig: &LongRuns) -> Outcome {
    let b = experiments::energy_balance(&fig.runs, 1.0).unwrap();
    outcome(
        9,
        b.max_excess <= 0.05,
        format!(
            "unit-time windows: max |residual| {:.3}, max excess over 2 SE {:.3} (<= 0.05); pointwise centered-difference max {:.3} (reported)",
            b.max_abs, b.max_excess, b.pointwise_max_abs
        ),
    )
}

fn c10_restart() -> Outcome {
    let g = grid(24);
    let u0 = spectral::biot_savart(&random_bandlimited_vorticity(&g, 6, 1).unwrap()).unwrap();
    let mut a = EnsembleState::uniform(&u0, 3, EnsembleSettings::default(), 11, 2).unwrap();
    for _ in 0..10 {
        a.advance_adaptive(0.05).unwrap();
    }
    let mut b = EnsembleState::restart(&a.checkpoint()).unwrap();
    for _ in 0..10 {
        a.advance_adaptive(0.05).unwrap();
        b.advance_adaptive(0.05).unwrap();
    }
    let same_u = a.u().component(0) == b.u().component(0) && a.u().component(1) == b.u().component(1);
    let same = same_u && a.checkpoint() == b.checkpoint();
    outcome(10, same, format!("restart at step 10, compared at step 20: velocity and checkpoint bytes identical: {same}"))
}

fn c11_burgers() -> Outcome {
    let det = parse_config("experiment.name = burgers_probe\nsim.N = 1\nsim.T = 2\nmc.replications = 1\n").unwrap();
    let t = experiments::burgers_runs(&det).unwrap()[0].shock_time;
    let ok = t.is_some_and(|t| (t - 1.0).abs() <= 0.02);
    let sto = parse_config(
        "experiment.name = burgers_probe\nsim.N = 4\nsim.nu = 0.05\nsim.T = 5\nsim.dt = 0.005\nburgers.n = 128\n\
         mc.replications = 100\nsim.record_every = 20\n",
    )
    .unwrap();
    let runs = experiments::burgers_runs(&sto).unwrap();
    let times: Vec<f64> = runs.iter().filter_map(|r| r.shock_time).collect();
    let (mean, se) = nsrep::stats::mean_stderr(&times);
    outcome(
        11,
        ok,
        format!(
            "deterministic shock at {} (1.00 +- 0.02); stochastic N=4 nu=0.05: {}/100 shocked by T=5, mean time {mean:.3} +- {se:.3} (reported)",
            t.map_or("none".into(), |t| format!("{t:.4}")),
            times.len()
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn c12_determinism() -> Outcome {
    let configs = [
        "experiment.name = figure1\nsim.N = 3\ngrid.n = 16\ninit.kmax = 3\nsim.T = 0.3\nsim.dt = 0.05\nmc.replications = 3\nsim.record_every = 1\n",
        "experiment.name = convergence_N\ngrid.n = 16\ninit.kmax = 3\nsim.T = 0.1\nsim.dt = 0.05\nmc.replications = 3\nsim.N_values = 2,4\n",
        "experiment.name = shear_limit\nsim.N = 2\ngrid.n = 16\nsim.T = 0.3\nsim.dt = 0.1\nmc.replications = 3\n",
        "experiment.name = lower_bound\nsim.N = 2\ngrid.n = 16\ninit.kmax = 3\nsim.T = 0.3\nsim.dt = 0.1\nmc.replications = 3\n",
        "experiment.name = burgers_probe\nsim.N = 3\nsim.nu = 0.05\nsim.T = 0.5\nsim.dt = 0.01\nburgers.n = 64\nmc.replications = 4\n",
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut bad = Vec::new();
    let mut files = 0;
    for (i, text) in configs.iter().enumerate() {
        let cfg = parse_config(text).unwrap();
        let outs: Vec<_> = [Some(1), Some(3), Some(1)]
            .iter()
            .enumerate()
            .map(|(k, &threads)| {
                let d = tmp.path().join(format!("{i}_{k}"));
                experiments::run(&cfg, Some(&d), threads).unwrap();
                csv_files(&d)
            })
            .collect();
        files += outs[0].len();
        if outs[0] != outs[1] || outs[0] != outs[2] {
            bad.push(cfg.experiment.name());
        }
    }
    outcome(
        12,
        bad.is_empty(),
        format!("5 experiments at 1, 3 and 1 worker(s): {files} CSV files compared, mismatches {bad:?}"),
    )
}

fn main() {
    let start = Instant::now();
    let mut results = Vec::new();
    let mut push = |o: Outcome| {
        let known = KNOWN_FAILURES.iter().find(|k| k.0 == o.id);
        let tag = match (o.passed, known) {
            (true, _) => "PASS",
            (false, Some(_)) => "FAIL (known)",
            (false, None) => "FAIL",
        };
        println!("criterion {:>2}: {tag}: {} [{:.0} s]", o.id, o.detail, start.elapsed().as_secs_f64());
        results.push(o);
    };

    push(c1_spectral());
    push(c2_equivalence());
    push(c4_reference());
    push(c5_inviscid());
    push(c10_restart());
    push(c11_burgers());
    push(c12_determinism());
    push(c6_convergence());

    let fig2 = experiments::long_runs(&long_cfg("figure1", 2, 20, 1)).unwrap();
    push(c3_per_copy(&fig2));
    push(c9_balance(&fig2));
    let fig8 = experiments::long_runs(&long_cfg("figure1", 8, 20, 5)).unwrap();
    let sh2 = experiments::long_runs(&long_cfg("shear_limit", 2, 50, 5)).unwrap();
    let sh8 = experiments::long_runs(&long_cfg("shear_limit", 8, 50, 5)).unwrap();
    push(c7_plateau(&[(2, &sh2), (8, &sh8)], &[(2, &fig2), (8, &fig8)]));
    push(c8_lower_bound(&[("random", 2, &fig2), ("random", 8, &fig8), ("shear", 2, &sh2), ("shear", 8, &sh8)]));

    results.sort_by_key(|o| o.id);
    let failed: Vec<u32> = results.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    let unexpected: Vec<u32> = failed.iter().copied().filter(|id| !KNOWN_FAILURES.iter().any(|k| k.0 == *id)).collect();
    println!("\nacceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    for (id, why) in KNOWN_FAILURES {
        if failed.contains(id) {
            println!("criterion {id} fails as documented: {why}");
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
