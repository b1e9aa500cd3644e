//! Measured quantities and inequality monitors.
//!
//! All norms are non-dimensional: squared norms are grid averages of the
//! pointwise squared magnitude.

use std::io::Write;

use crate::ensemble::EnsembleState;
use crate::error::{Error, Result};
use crate::grid::{check_same_grid, ScalarField, VectorField};
use crate::norm::{mean_square, nondim_norm, Lp};
use crate::reference::ReferenceState;
use crate::spectral;
use crate::stats::mean_stderr;

/// Default Holder exponent of the BKM monitor.
pub const BKM_ALPHA: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `||u||^2`
    pub energy: f64,
    /// `||omega||^2`
    pub enstrophy: f64,
    /// `||grad u||^2`
    pub grad_energy: f64,
    pub omega_inf: f64,
    pub mean_u: [f64; 2],
    pub comp_residual: f64,
    /// 0 when the monitor is skipped.
    pub bkm_ratio: f64,
    pub per_copy_energy: Vec<f64>,
    pub per_copy_grad: Vec<f64>,
}

fn grad_energy(u: &VectorField) -> f64 {
    mean_square(&spectral::jacobian(u))
}

/// One row for the current ensemble state.
pub fn record(s: &EnsembleState) -> DiagnosticsRecord {
    let u = s.u();
    let omega = s.omega();
    let copies = s.per_copy_velocities();
    DiagnosticsRecord {
        t: s.t(),
        energy: mean_square(u),
        enstrophy: mean_square(omega),
        grad_energy: grad_energy(u),
        omega_inf: omega.max_abs(),
        mean_u: u.mean(),
        comp_residual: s.monitors().comp_residual,
        bkm_ratio: bkm_monitor(u, BKM_ALPHA).unwrap_or(0.0),
        per_copy_energy: copies.iter().map(mean_square).collect(),
        per_copy_grad: copies.iter().map(grad_energy).collect(),
    }
}

/// Row for a reference solution (no copies).
pub fn record_reference(r: &ReferenceState) -> DiagnosticsRecord {
    let u = r.velocity();
    DiagnosticsRecord {
        t: r.t,
        energy: mean_square(&u),
        enstrophy: mean_square(&r.omega),
        grad_energy: grad_energy(&u),
        omega_inf: r.omega.max_abs(),
        mean_u: u.mean(),
        comp_residual: 0.0,
        bkm_ratio: bkm_monitor(&u, BKM_ALPHA).unwrap_or(0.0),
        per_copy_energy: vec![],
        per_copy_grad: vec![],
    }
}

impl DiagnosticsRecord {
    pub fn n_copies(&self) -> usize {
        self.per_copy_energy.len()
    }

    /// Flat numeric row in CSV column order.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.t,
            self.energy,
            self.enstrophy,
            self.grad_energy,
            self.omega_inf,
            self.mean_u[0],
            self.mean_u[1],
            self.comp_residual,
            self.bkm_ratio,
        ];
        v.extend(&self.per_copy_energy);
        v.extend(&self.per_copy_grad);
        v
    }

    fn from_values(v: &[f64], n: usize) -> Self {
        Self {
            t: v[0],
            energy: v[1],
            enstrophy: v[2],
            grad_energy: v[3],
            omega_inf: v[4],
            mean_u: [v[5], v[6]],
            comp_residual: v[7],
            bkm_ratio: v[8],
            per_copy_energy: v[9..9 + n].to_vec(),
            per_copy_grad: v[9 + n..9 + 2 * n].to_vec(),
        }
    }

    /// `||u|| <= (1/N) sum ||u^i||`, up to rounding.
    pub fn triangle_bound_holds(&self) -> bool {
        if self.per_copy_energy.is_empty() {
            return true;
        }
        let avg = self.per_copy_energy.iter().map(|e| e.sqrt()).sum::<f64>() / self.n_copies() as f64;
        self.energy.sqrt() <= avg * (1.0 + 1e-12)
    }
}

pub fn csv_header(n_copies: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "t",
        "energy",
        "enstrophy",
        "grad_energy",
        "omega_inf",
        "mean_u_x",
        "mean_u_y",
        "comp_residual",
        "bkm_ratio",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..n_copies).map(|i| format!("per_copy_energy_{i}")));
    h.extend((0..n_copies).map(|i| format!("per_copy_grad_{i}")));
    h
}

/// Time series as CSV, one row per record. Numbers use the shortest
/// round-trip representation, so output is a pure function of the values.
pub fn write_csv<W: Write>(series: &[DiagnosticsRecord], mut w: W) -> Result<()> {
    let n = series.first().map_or(0, |r| r.n_copies());
    writeln!(w, "{}", csv_header(n).join(","))?;
    for r in series {
        if r.n_copies() != n {
            return Err(Error::Precondition("records disagree on the copy count".into()));
        }
        let row: Vec<String> = r.values().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Field-wise mean and standard error over replications with aligned times.
pub fn aggregate(runs: &[Vec<DiagnosticsRecord>]) -> Result<(Vec<DiagnosticsRecord>, Vec<DiagnosticsRecord>)> {
    let Some(first) = runs.first() else {
        return Err(Error::Precondition("no runs to aggregate".into()));
    };
    let len = first.len();
    let n = first.first().map_or(0, |r| r.n_copies());
    if runs.iter().any(|r| r.len() != len) {
        return Err(Error::Precondition("runs have different lengths".into()));
    }
    let mut mean = Vec::with_capacity(len);
    let mut se = Vec::with_capacity(len);
    for k in 0..len {
        let rows: Vec<Vec<f64>> = runs.iter().map(|r| r[k].values()).collect();
        if rows.iter().any(|r| r.len() != rows[0].len()) || (rows[0][0] - rows.iter().map(|r| r[0]).fold(f64::MIN, f64::max)).abs() > 1e-9 {
            return Err(Error::Precondition(format!("record {k} is not aligned across runs")));
        }
        let cols = rows[0].len();
        let (mut m, mut s) = (Vec::with_capacity(cols), Vec::with_capacity(cols));
        for c in 0..cols {
            let xs: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            let (a, b) = mean_stderr(&xs);
            m.push(a);
            s.push(b);
        }
        s[0] = m[0];
        mean.push(DiagnosticsRecord::from_values(&m, n));
        se.push(DiagnosticsRecord::from_values(&s, n));
    }
    Ok((mean, se))
}

fn check_uniform(series: &[DiagnosticsRecord]) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::Precondition(format!("need at least 3 records, got {}", series.len())));
    }
    let dt = series[1].t - series[0].t;
    for w in series.windows(2) {
        let d = w[1].t - w[0].t;
        if !(d > 0.0) || (d - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::Precondition("records are not uniformly spaced in time".into()));
        }
    }
    Ok(dt)
}

/// Residual of `d_t ||u||^2 = 2 nu [(1/N^2) sum ||grad u^i||^2 - ||grad u||^2]`
/// at interior records (centered differences), divided by the initial
/// energy. Feed replication-averaged records to estimate the expectation.
/// Returns `(t, residual)` pairs.
pub fn energy_balance_residual(series: &[DiagnosticsRecord], nu: f64) -> Result<Vec<(f64, f64)>> {
    check_uniform(series)?;
    let n = series[0].n_copies();
    if n == 0 {
        return Err(Error::Precondition("records carry no per-copy data".into()));
    }
    let e0 = series[0].energy;
    let norm = if e0 > 0.0 { e0 } else { 1.0 };
    let rhs = |r: &DiagnosticsRecord| r.per_copy_grad.iter().sum::<f64>() / (n * n) as f64 - r.grad_energy;
    Ok((1..series.len() - 1)
        .map(|k| {
            let (a, b) = (&series[k - 1], &series[k + 1]);
            let dedt = (b.energy - a.energy) / (b.t - a.t);
            (series[k].t, (dedt - 2.0 * nu * rhs(&series[k])) / norm)
        })
        .collect())
}

/// Integral form of the energy balance over consecutive windows of
/// `window` time units: `[E(b) - E(a) - int_a^b 2 nu rhs dt] / (E0 (b - a))`,
/// with the trapezoid rule on the records. Returns `(window start, residual)`.
/// Much less noisy than the centered difference, whose martingale part grows
/// as the record spacing shrinks.
pub fn energy_balance_windows(series: &[DiagnosticsRecord], nu: f64, window: f64) -> Result<Vec<(f64, f64)>> {
    let dt = check_uniform(series)?;
    let n = series[0].n_copies();
    if n == 0 {
        return Err(Error::Precondition("records carry no per-copy data".into()));
    }
    let step = ((window / dt).round() as usize).max(1);
    if step >= series.len() {
        return Err(Error::Precondition(format!("window {window} longer than the series")));
    }
    let e0 = series[0].energy;
    let norm = if e0 > 0.0 { e0 } else { 1.0 };
    let rhs: Vec<f64> = series
        .iter()
        .map(|r| 2.0 * nu * (r.per_copy_grad.iter().sum::<f64>() / (n * n) as f64 - r.grad_energy))
        .collect();
    Ok((0..series.len() - step)
        .step_by(step)
        .map(|s| {
            let integral: f64 = (s..s + step).map(|k| 0.5 * (rhs[k] + rhs[k + 1]) * (series[k + 1].t - series[k].t)).sum();
            let span = series[s + step].t - series[s].t;
            (series[s].t, (series[s + step].energy - series[s].energy - integral) / (norm * span))
        })
        .collect())
}

/// Time-average of the enstrophy over the final third of a run that
/// satisfies `nu * t_end >= 2 L^2`.
pub fn plateau_estimate(series: &[DiagnosticsRecord], nu: f64, length: f64) -> Result<f64> {
    let t_end = series.last().map_or(0.0, |r| r.t);
    if nu * t_end < 2.0 * length * length * (1.0 - 1e-9) {
        return Err(Error::Precondition(format!(
            "run too short for a plateau: nu * T = {:.3} < 2 L^2 = {:.3}",
            nu * t_end,
            2.0 * length * length
        )));
    }
    Ok(final_third_mean(series, |r| r.enstrophy))
}

fn final_third(series: &[DiagnosticsRecord]) -> impl Iterator<Item = &DiagnosticsRecord> {
    let t0 = series.first().map_or(0.0, |r| r.t);
    let t_end = series.last().map_or(0.0, |r| r.t);
    let cut = t0 + 2.0 * (t_end - t0) / 3.0;
    series.iter().filter(move |r| r.t >= cut - 1e-12)
}

fn final_third_mean(series: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    let (s, c) = final_third(series).fold((0.0, 0usize), |(s, c), r| (s + f(r), c + 1));
    s / c as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundReport {
    /// `||u0||^2 / (N L^2)`
    pub bound: f64,
    /// Largest estimated `E||grad u||^2` over the final third.
    pub running_max: f64,
    /// Standard error at the maximising record (0 without error data).
    pub stderr_at_max: f64,
    /// Smallest estimate over the final third (reported only).
    pub liminf: f64,
    /// `running_max - bound`
    pub margin: f64,
    pub violated: bool,
}

/// Compares the final-third maximum of `E||grad u||^2` with `||u0||^2/(N L^2)`.
/// A violation is flagged only when the maximum lies more than `2` standard
/// errors below the bound.
pub fn lower_bound_check(
    mean: &[DiagnosticsRecord],
    stderr: Option<&[DiagnosticsRecord]>,
    u0_energy: f64,
    n: usize,
    length: f64,
) -> Result<LowerBoundReport> {
    let Some(first) = mean.first() else {
        return Err(Error::Precondition("empty series".into()));
    };
    let scale = u0_energy.sqrt().max(f64::MIN_POSITIVE);
    if first.mean_u.iter().any(|m| m.abs() > 1e-10 * scale.max(1.0)) {
        return Err(Error::Precondition(format!("initial data has nonzero mean {:?}", first.mean_u)));
    }
    if n == 0 {
        return Err(Error::Precondition("N must be positive".into()));
    }
    if let Some(se) = stderr {
        if se.len() != mean.len() {
            return Err(Error::Precondition("stderr series has a different length".into()));
        }
    }
    let bound = u0_energy / (n as f64 * length * length);
    let offset = mean.len() - final_third(mean).count();
    let (mut best, mut best_k, mut low) = (f64::MIN, offset, f64::MAX);
    for (k, r) in mean.iter().enumerate().skip(offset) {
        if r.grad_energy > best {
            best = r.grad_energy;
            best_k = k;
        }
        low = low.min(r.grad_energy);
    }
    let se = stderr.map_or(0.0, |s| s[best_k].grad_energy);
    Ok(LowerBoundReport {
        bound,
        running_max: best,
        stderr_at_max: se,
        liminf: low,
        margin: best - bound,
        violated: best < bound - 2.0 * se,
    })
}

/// `||grad u||_inf / [||omega||_inf (1 + ln+(<omega>_alpha / ||omega||_inf))]`,
/// with `<omega>_alpha` the largest `|omega(x) - omega(y)| (L/|x - y|)^alpha`
/// over node pairs at minimal-image separation up to `L/4`. `None` when
/// `omega` vanishes.
pub fn bkm_monitor(u: &VectorField, alpha: f64) -> Option<f64> {
    let omega = spectral::curl2d(u).ok()?;
    let winf = omega.max_abs();
    if winf <= 0.0 {
        return None;
    }
    let holder = holder_seminorm(&omega, alpha);
    let grad = spectral::jacobian(u).max_operator_norm();
    let log = (holder / winf).ln().max(0.0);
    Some(grad / (winf * (1.0 + log)))
}

fn holder_seminorm(f: &ScalarField, alpha: f64) -> f64 {
    let g = f.grid();
    let (n1, n2) = (g.n1() as i64, g.n2() as i64);
    let [h1, h2] = g.spacing();
    let l = g.length();
    let rmax = l / 4.0;
    let mut offsets = Vec::new();
    // half plane of offsets; the pair (x, y) and (y, x) give the same term
    for a in 0..=n1 / 2 {
        for b in -(n2 / 2)..=n2 / 2 {
            if a == 0 && b <= 0 {
                continue;
            }
            let r = ((a as f64 * h1).powi(2) + (b as f64 * h2).powi(2)).sqrt();
            if r <= rmax * (1.0 + 1e-12) {
                offsets.push((a, b, (l / r).powf(alpha)));
            }
        }
    }
    let v = f.values();
    let mut best = 0.0f64;
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let x = v[(i1 * n2 + i2) as usize];
            for &(a, b, w) in &offsets {
                let j1 = (i1 + a).rem_euclid(n1);
                let j2 = (i2 + b).rem_euclid(n2);
                best = best.max((x - v[(j1 * n2 + j2) as usize]).abs() * w);
            }
        }
    }
    best
}

/// Non-dimensional L2 distance between an ensemble velocity and a reference.
/// With `resample`, a reference on another grid of the same box is first
/// spectrally resampled onto the ensemble grid.
pub fn convergence_error(u_n: &VectorField, u_ref: &VectorField, resample: bool) -> Result<f64> {
    if u_n.grid() == u_ref.grid() {
        return Ok(nondim_norm(&u_n.sub(u_ref), Lp::L2));
    }
    if !resample {
        check_same_grid(u_n.grid(), u_ref.grid())?;
    }
    let r = spectral::resample_vector(u_ref, u_n.grid())?;
    Ok(nondim_norm(&u_n.sub(&r), Lp::L2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{random_bandlimited_vorticity, shear_cos_velocity, EnsembleSettings};
    use crate::grid::PeriodicGrid;
    use std::f64::consts::PI;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::square(n, 2.0 * PI).unwrap()
    }

    fn rec(t: f64, energy: f64, grad: f64, pc_grad: Vec<f64>) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            energy,
            enstrophy: grad,
            grad_energy: grad,
            omega_inf: 0.0,
            mean_u: [0.0; 2],
            comp_residual: 0.0,
            bkm_ratio: 0.0,
            per_copy_energy: vec![energy; pc_grad.len()],
            per_copy_grad: pc_grad,
        }
    }

    #[test]
    fn zero_state_record() {
        let g = grid(8);
        let s = EnsembleState::uniform(&VectorField::zeros(&g), 2, EnsembleSettings::default(), 0, 0).unwrap();
        let r = record(&s);
        assert!(r.values().iter().all(|&v| v == 0.0));
        assert_eq!(r.n_copies(), 2);
    }

    #[test]
    fn normalized_initial_record() {
        let g = grid(24);
        let w = random_bandlimited_vorticity(&g, 6, 2).unwrap();
        let u0 = spectral::biot_savart(&w).unwrap();
        let s = EnsembleState::uniform(&u0, 3, EnsembleSettings::default(), 0, 0).unwrap();
        let r = record(&s);
        assert!((r.enstrophy - 1.0).abs() < 1e-10);
        assert!((r.grad_energy - 1.0).abs() < 1e-10);
        for e in &r.per_copy_energy {
            assert!((e - mean_square(&u0)).abs() < 1e-12);
        }
        assert!(r.triangle_bound_holds());
    }

    #[test]
    fn csv_header_and_rows() {
        let series = vec![rec(0.0, 1.0, 2.0, vec![3.0, 4.0]), rec(0.5, 0.25, 1e-20, vec![3.0, 4.0])];
        let mut buf = Vec::new();
        write_csv(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "t,energy,enstrophy,grad_energy,omega_inf,mean_u_x,mean_u_y,comp_residual,bkm_ratio,\
             per_copy_energy_0,per_copy_energy_1,per_copy_grad_0,per_copy_grad_1"
        );
        assert_eq!(lines[2], "0.5,0.25,0.00000000000000000001,0.00000000000000000001,0,0,0,0,0,0.25,0.25,3,4");
    }

    #[test]
    fn energy_balance_of_exact_series_vanishes() {
        // E(t) = e^{-2 nu t}, N = 1 with per-copy gradient 1 + grad, so that
        // 2 nu (pc - grad) = -2 nu E when pc - grad = -E
        let nu = 0.3;
        let series: Vec<_> = (0..50)
            .map(|k| {
                let t = 0.01 * k as f64;
                let e = (-2.0 * nu * t).exp();
                rec(t, e, 5.0, vec![5.0 - e])
            })
            .collect();
        let res = energy_balance_residual(&series, nu).unwrap();
        assert!(res.iter().all(|&(_, r)| r.abs() < 1e-4));
        let win = energy_balance_windows(&series, nu, 0.1).unwrap();
        assert_eq!(win.len(), 4);
        assert!(win.iter().all(|&(_, r)| r.abs() < 1e-4));
        assert!(energy_balance_residual(&series[..2], nu).is_err());
        assert!(energy_balance_windows(&series, nu, 1.0).is_err());
        let zero: Vec<_> = (0..5).map(|k| rec(k as f64, 0.0, 0.0, vec![0.0])).collect();
        assert!(energy_balance_residual(&zero, nu).unwrap().iter().all(|&(_, r)| r == 0.0));
    }

    #[test]
    fn plateau_window_and_length_check() {
        let l = 2.0 * PI;
        let series: Vec<_> = (0..=90).map(|k| rec(k as f64, 1.0, if k < 60 { 9.0 } else { 0.5 }, vec![1.0])).collect();
        assert!((plateau_estimate(&series, 1.0, l).unwrap() - 0.5).abs() < 1e-12);
        assert!(plateau_estimate(&series, 0.1, l).is_err());
    }

    #[test]
    fn lower_bound_flags_and_preconditions() {
        let l = 2.0 * PI;
        let series: Vec<_> = (0..9).map(|k| rec(k as f64, 0.5, 0.25, vec![1.0, 1.0])).collect();
        let r = lower_bound_check(&series, None, 0.5, 2, l).unwrap();
        assert!(!r.violated);
        assert!((r.bound - 0.5 / (2.0 * l * l)).abs() < 1e-15);
        let low: Vec<_> = (0..9).map(|k| rec(k as f64, 0.5, 1e-4, vec![1.0, 1.0])).collect();
        assert!(lower_bound_check(&low, None, 0.5, 2, l).unwrap().violated);
        let mut shifted = series.clone();
        shifted[0].mean_u = [0.1, 0.0];
        assert!(matches!(lower_bound_check(&shifted, None, 0.5, 2, l), Err(Error::Precondition(_))));
    }

    #[test]
    fn bkm_cases() {
        let g = grid(32);
        let u = VectorField::from_fn(&g, |[_, y]| [-y.cos(), 0.0]);
        let r = bkm_monitor(&u, BKM_ALPHA).unwrap();
        assert!(r > 0.1 && r < 10.0, "{r}");
        let r10 = bkm_monitor(&u.scaled(10.0), BKM_ALPHA).unwrap();
        assert!((r - r10).abs() < 1e-12 * r);
        assert!(bkm_monitor(&VectorField::zeros(&g), BKM_ALPHA).is_none());
    }

    #[test]
    fn convergence_error_cases() {
        let g = grid(16);
        let u = shear_cos_velocity(&g);
        assert_eq!(convergence_error(&u, &u, false).unwrap(), 0.0);
        let eps = 0.01;
        let v = {
            let mut v = u.clone();
            v.axpy(eps, &VectorField::from_fn(&g, |[_, y]| [y.sin(), 0.0]));
            v
        };
        assert!((convergence_error(&v, &u, false).unwrap() - eps / 2f64.sqrt()).abs() < 1e-14);
        let fine = shear_cos_velocity(&grid(32));
        assert!(convergence_error(&u, &fine, false).is_err());
        assert!(convergence_error(&u, &fine, true).unwrap() < 1e-14);
    }

    #[test]
    fn aggregate_means_and_errors() {
        let a = vec![rec(0.0, 1.0, 2.0, vec![1.0]), rec(1.0, 3.0, 2.0, vec![1.0])];
        let b = vec![rec(0.0, 3.0, 2.0, vec![1.0]), rec(1.0, 5.0, 2.0, vec![1.0])];
        let (m, s) = aggregate(&[a, b]).unwrap();
        assert_eq!(m[1].energy, 4.0);
        assert_eq!(m[1].t, 1.0);
        assert!((s[1].energy - 1.0).abs() < 1e-15);
        assert_eq!(s[1].t, 1.0);
    }
}
