//! One-dimensional replica system for viscous Burgers.
//!
//! Each copy carries a monotone forward map `X(y) = y + lambda(y)` on a
//! periodic line. The shared velocity is `u = (1/N) sum u0(Y^i)` with no
//! projection, and `Y^i` is the monotone cubic (PCHIP) inverse of the
//! forward samples. Runs stop at the first shock; there is no continuation.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reference::PeriodicProfile;
use crate::rng::{Domain, ReplicaStream, StreamKey};

/// Default threshold on `min d_y X` that counts as a shock.
pub const EPS_SHOCK: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct LineMap {
    length: f64,
    pub lambda: Vec<f64>,
    pub t: f64,
    pub brownian: f64,
}

impl LineMap {
    pub fn identity(n: usize, length: f64) -> Result<Self> {
        if n < 4 || !(length > 0.0) {
            return Err(Error::InvalidGrid(format!("line needs n >= 4 and L > 0, got n = {n}, L = {length}")));
        }
        Ok(Self { length, lambda: vec![0.0; n], t: 0.0, brownian: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.len() as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    /// `X(y_j)`, unwrapped.
    pub fn forward(&self, j: usize) -> f64 {
        self.node(j) + self.lambda[j]
    }

    /// Forward differences `(X(y_{j+1}) - X(y_j)) / dy`, periodic.
    pub fn jacobian(&self) -> Vec<f64> {
        let n = self.len();
        let dy = self.spacing();
        (0..n)
            .map(|j| {
                let next = if j + 1 == n { self.forward(0) + self.length } else { self.forward(j + 1) };
                (next - self.forward(j)) / dy
            })
            .collect()
    }

    pub fn min_jacobian(&self) -> f64 {
        self.jacobian().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Inverse map, valid while the forward samples are strictly increasing.
    pub fn inverse(&self) -> Result<Pchip> {
        let n = self.len();
        let xs: Vec<f64> = (0..n).map(|j| self.forward(j)).collect();
        let ys: Vec<f64> = (0..n).map(|j| self.node(j)).collect();
        Pchip::periodic(xs, ys, self.length)
    }
}

/// Periodic monotone cubic Hermite interpolant of `y(x)` with
/// `y(x + L) = y(x) + L`, built from strictly increasing knots.
#[derive(Clone, Debug)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    length: f64,
}

impl Pchip {
    fn periodic(xs: Vec<f64>, ys: Vec<f64>, length: f64) -> Result<Self> {
        let n = xs.len();
        let knot = |j: isize| -> (f64, f64) {
            let w = j.rem_euclid(n as isize) as usize;
            let shift = ((j - w as isize) / n as isize) as f64 * length;
            (xs[w] + shift, ys[w] + shift)
        };
        let secant = |j: isize| {
            let (x0, y0) = knot(j);
            let (x1, y1) = knot(j + 1);
            (y1 - y0) / (x1 - x0)
        };
        for j in 0..n as isize {
            let (x0, _) = knot(j);
            let (x1, _) = knot(j + 1);
            if !(x1 > x0) {
                return Err(Error::MeshDegenerate(format!("forward samples not increasing at node {j}")));
            }
        }
        // Fritsch-Carlson weighted harmonic mean of neighbouring secants
        let slopes = (0..n as isize)
            .map(|j| {
                let (a, b) = (secant(j - 1), secant(j));
                let ha = knot(j).0 - knot(j - 1).0;
                let hb = knot(j + 1).0 - knot(j).0;
                if a * b <= 0.0 {
                    0.0
                } else {
                    let (w1, w2) = (2.0 * hb + ha, hb + 2.0 * ha);
                    (w1 + w2) / (w1 / a + w2 / b)
                }
            })
            .collect();
        Ok(Self { xs, ys, slopes, length })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let x0 = self.xs[0];
        let wraps = ((x - x0) / self.length).floor();
        let xr = x - wraps * self.length;
        // last knot with xs[j] <= xr
        let j = self.xs.partition_point(|&k| k <= xr).saturating_sub(1);
        let (xa, ya, da) = (self.xs[j], self.ys[j], self.slopes[j]);
        let (xb, yb, db) = if j + 1 == n {
            (self.xs[0] + self.length, self.ys[0] + self.length, self.slopes[0])
        } else {
            (self.xs[j + 1], self.ys[j + 1], self.slopes[j + 1])
        };
        let h = xb - xa;
        let s = (xr - xa) / h;
        let (s2, s3) = (s * s, s * s * s);
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * ya
            + (s3 - 2.0 * s2 + s) * h * da
            + (-2.0 * s3 + 3.0 * s2) * yb
            + (s3 - s2) * h * db;
        y + wraps * self.length
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BurgersSettings {
    pub nu: f64,
    pub eps_shock: f64,
}

impl Default for BurgersSettings {
    fn default() -> Self {
        Self { nu: 0.0, eps_shock: EPS_SHOCK }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BurgersRecord {
    pub t: f64,
    /// `(1/L) int u^2` on the map grid.
    pub energy: f64,
    pub min_jacobian: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BurgersState {
    maps: Vec<LineMap>,
    u0: PeriodicProfile,
    settings: BurgersSettings,
    streams: Vec<ReplicaStream>,
    t: f64,
    steps: u64,
}

#[derive(Clone, Debug)]
pub struct BurgersRun {
    pub records: Vec<BurgersRecord>,
    pub shock_time: Option<f64>,
    pub state: BurgersState,
}

impl BurgersState {
    /// `n_copies` identity maps on an `n`-point line of the profile's length.
    pub fn new(
        u0: PeriodicProfile,
        n_copies: usize,
        n: usize,
        settings: BurgersSettings,
        master_seed: u64,
        replication: u64,
    ) -> Result<Self> {
        if n_copies == 0 {
            return Err(Error::Precondition("N must be positive".into()));
        }
        if !(settings.nu >= 0.0) || !(settings.eps_shock > 0.0) {
            return Err(Error::Precondition("need nu >= 0 and eps_shock > 0".into()));
        }
        let map = LineMap::identity(n, u0.length())?;
        let streams = (0..n_copies as u64)
            .map(|c| ReplicaStream::new(StreamKey::new(master_seed, replication, c, Domain::Burgers)))
            .collect();
        Ok(Self { maps: vec![map; n_copies], u0, settings, streams, t: 0.0, steps: 0 })
    }

    pub fn maps(&self) -> &[LineMap] {
        &self.maps
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn settings(&self) -> BurgersSettings {
        self.settings
    }

    fn inverses(&self) -> Result<Vec<Pchip>> {
        self.maps.iter().map(LineMap::inverse).collect()
    }

    fn velocity_with(&self, inv: &[Pchip], x: f64) -> f64 {
        inv.iter().map(|y| self.u0.eval(y.eval(x))).sum::<f64>() / inv.len() as f64
    }

    /// `u(x) = (1/N) sum u0(Y^i(x))` at arbitrary points.
    pub fn velocity_at(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let inv = self.inverses()?;
        Ok(xs.iter().map(|&x| self.velocity_with(&inv, x)).collect())
    }

    /// `u` on the map grid.
    pub fn velocity(&self) -> Result<Vec<f64>> {
        let m = &self.maps[0];
        let xs: Vec<f64> = (0..m.len()).map(|j| m.node(j)).collect();
        self.velocity_at(&xs)
    }

    /// `u0(Y^i)` on the map grid for one copy.
    pub fn pullback(&self, i: usize) -> Result<Vec<f64>> {
        let m = self.maps.get(i).ok_or(Error::IndexOutOfRange { index: i, len: self.maps.len() })?;
        let inv = m.inverse()?;
        Ok((0..m.len()).map(|j| self.u0.eval(inv.eval(m.node(j)))).collect())
    }

    pub fn record(&self) -> Result<BurgersRecord> {
        let u = self.velocity()?;
        Ok(BurgersRecord {
            t: self.t,
            energy: u.iter().map(|v| v * v).sum::<f64>() / u.len() as f64,
            min_jacobian: self.maps.iter().map(LineMap::min_jacobian).collect(),
        })
    }

    fn min_jacobian(&self) -> f64 {
        self.maps.iter().map(LineMap::min_jacobian).fold(f64::INFINITY, f64::min)
    }

    /// One Euler-Maruyama step of every copy with the velocity frozen at
    /// the start of the step. The step is kept when it produces a shock,
    /// and `ShockDetected` is returned; a shocked state refuses to advance.
    pub fn advance(&mut self, h: f64) -> Result<()> {
        if !(h > 0.0) {
            return Err(Error::Precondition(format!("step must be positive, got {h}")));
        }
        let before = self.min_jacobian();
        if before <= self.settings.eps_shock {
            return Err(Error::ShockDetected { t: self.t, min_jacobian: before });
        }
        let inv = self.inverses()?;
        let amp = (2.0 * self.settings.nu * h).sqrt();
        let kicks: Vec<f64> = self
            .streams
            .iter_mut()
            .map(|s| if amp > 0.0 { amp * s.normal() } else { 0.0 })
            .collect();
        let this = &*self;
        let lambdas: Vec<Vec<f64>> = this
            .maps
            .par_iter()
            .zip(&kicks)
            .map(|(m, &kick)| {
                (0..m.len())
                    .map(|j| m.lambda[j] + h * this.velocity_with(&inv, m.forward(j)) + kick)
                    .collect()
            })
            .collect();
        let t = self.t + h;
        for ((m, l), kick) in self.maps.iter_mut().zip(lambdas).zip(kicks) {
            if l.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "burgers displacement".into(), index: 0 });
            }
            m.lambda = l;
            m.t = t;
            m.brownian += kick;
        }
        self.t = t;
        self.steps += 1;
        let after = self.min_jacobian();
        if after <= self.settings.eps_shock {
            return Err(Error::ShockDetected { t, min_jacobian: after });
        }
        Ok(())
    }

    /// Steps to `t_end` (or the first shock), recording every
    /// `record_every` steps plus the final state.
    pub fn run(mut self, t_end: f64, h: f64, record_every: usize) -> Result<BurgersRun> {
        let every = record_every.max(1) as u64;
        let mut records = vec![self.record()?];
        let steps = ((t_end - self.t) / h - 1e-9).ceil().max(0.0) as u64;
        let mut shock = None;
        for k in 1..=steps {
            match self.advance(h) {
                Ok(()) => {}
                Err(Error::ShockDetected { t, .. }) => {
                    shock = Some(t);
                    break;
                }
                Err(e) => return Err(e),
            }
            if k % every == 0 || k == steps {
                records.push(self.record()?);
            }
        }
        if shock.is_some() && records.last().map(|r| r.t) != Some(self.t) {
            // the map is still monotone at the threshold, so this succeeds
            // unless the step overshot to a fold
            match self.record() {
                Ok(r) => records.push(r),
                Err(_) => records.push(BurgersRecord {
                    t: self.t,
                    energy: f64::NAN,
                    min_jacobian: self.maps.iter().map(LineMap::min_jacobian).collect(),
                }),
            }
        }
        Ok(BurgersRun { records, shock_time: shock, state: self })
    }
}

/// First recorded time at which any copy has `min d_y X <= eps`.
pub fn shock_time(records: &[BurgersRecord], eps: f64) -> Option<f64> {
    records.iter().find(|r| r.min_jacobian.iter().any(|&j| j <= eps)).map(|r| r.t)
}

/// CSV with columns `t, energy, min_jacobian_<i>..., shock_time`; the
/// shock time repeats on every row and is empty when there is none.
pub fn write_csv<W: Write>(records: &[BurgersRecord], shock: Option<f64>, mut w: W) -> Result<()> {
    let n = records.first().map_or(0, |r| r.min_jacobian.len());
    let mut head = vec!["t".to_string(), "energy".to_string()];
    head.extend((0..n).map(|i| format!("min_jacobian_{i}")));
    head.push("shock_time".into());
    writeln!(w, "{}", head.join(","))?;
    let st = shock.map_or(String::new(), |t| t.to_string());
    for r in records {
        let mut row = vec![r.t.to_string(), r.energy.to_string()];
        row.extend(r.min_jacobian.iter().map(|v| v.to_string()));
        row.push(st.clone());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const L: f64 = 2.0 * PI;

    fn profile(f: impl Fn(f64) -> f64) -> PeriodicProfile {
        PeriodicProfile::from_fn(L, 64, f).unwrap()
    }

    #[test]
    fn pchip_identity_and_monotone() {
        let mut m = LineMap::identity(16, L).unwrap();
        let inv = m.inverse().unwrap();
        for k in 0..50 {
            let x = -3.0 + 0.37 * k as f64;
            assert!((inv.eval(x) - x).abs() < 1e-12);
        }
        m.lambda = (0..16).map(|j| 0.9 * (m.node(j)).sin()).collect();
        let inv = m.inverse().unwrap();
        for j in 0..16 {
            assert!((inv.eval(m.forward(j)) - m.node(j)).abs() < 1e-12);
        }
        let mut prev = inv.eval(-1.0);
        for k in 1..2000 {
            let y = inv.eval(-1.0 + k as f64 * 0.005);
            assert!(y >= prev);
            prev = y;
        }
    }

    #[test]
    fn fold_is_rejected() {
        let mut m = LineMap::identity(8, L).unwrap();
        m.lambda[3] = -2.0;
        assert!(matches!(m.inverse(), Err(Error::MeshDegenerate(_))));
    }

    #[test]
    fn constant_data_translates() {
        let c = 0.7;
        let s = BurgersState::new(profile(|_| c), 1, 32, BurgersSettings::default(), 0, 0).unwrap();
        let run = s.run(10.0, 0.05, 10).unwrap();
        assert_eq!(run.shock_time, None);
        let m = &run.state.maps()[0];
        for v in &m.lambda {
            assert!((v - c * 10.0).abs() < 1e-9);
        }
        assert!(run.records.iter().all(|r| (r.energy - c * c).abs() < 1e-12));
    }

    #[test]
    fn deterministic_shock_at_one() {
        let s = BurgersState::new(profile(|y| -y.sin()), 1, 256, BurgersSettings::default(), 0, 0).unwrap();
        let run = s.run(2.0, 1e-3, 50).unwrap();
        let t = run.shock_time.unwrap();
        assert!((t - 1.0).abs() <= 0.02, "{t}");
        assert_eq!(shock_time(&run.records, EPS_SHOCK), Some(t));
    }

    #[test]
    fn characteristics_before_shock() {
        let s = BurgersState::new(profile(|y| -y.sin()), 1, 128, BurgersSettings::default(), 0, 0).unwrap();
        let run = s.run(0.5, 1e-2, 10).unwrap();
        let m = &run.state.maps()[0];
        for j in 0..m.len() {
            let y = m.node(j);
            assert!((m.forward(j) - (y - 0.5 * y.sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn rarefaction_never_shocks() {
        // periodic data cannot increase everywhere; min u0' = -0.08 > -1/T keeps
        // 1 + t u0' positive up to T = 10
        let s = BurgersState::new(profile(|y| 0.08 * y.sin()), 1, 128, BurgersSettings::default(), 0, 0).unwrap();
        let run = s.run(10.0, 0.01, 100).unwrap();
        assert_eq!(run.shock_time, None);
        let j = run.records.last().unwrap().min_jacobian[0];
        assert!((j - 0.2).abs() < 0.01, "{j}");
    }

    #[test]
    fn pullback_keeps_sup_norm() {
        let u0 = profile(|y| -y.sin() + 0.3 * (2.0 * y).cos());
        let sup0 = (0..4096).map(|k| u0.eval(k as f64 * L / 4096.0).abs()).fold(0.0, f64::max);
        let settings = BurgersSettings { nu: 0.05, ..Default::default() };
        let run = BurgersState::new(u0, 3, 128, settings, 9, 0).unwrap().run(0.4, 1e-2, 10).unwrap();
        for i in 0..3 {
            let p = run.state.pullback(i).unwrap();
            assert!(p.iter().all(|v| v.abs() <= sup0 + 1e-12));
        }
    }

    #[test]
    fn stochastic_runs_are_seeded() {
        let settings = BurgersSettings { nu: 0.05, ..Default::default() };
        let go = |seed| {
            BurgersState::new(profile(|y| -y.sin()), 4, 64, settings, seed, 0).unwrap().run(3.0, 1e-2, 25).unwrap()
        };
        let (a, b, c) = (go(1), go(1), go(2));
        assert_eq!(a.records, b.records);
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn csv_columns() {
        let r = vec![BurgersRecord { t: 0.0, energy: 0.5, min_jacobian: vec![1.0, 1.0] }];
        let mut buf = Vec::new();
        write_csv(&r, Some(1.25), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,energy,min_jacobian_0,min_jacobian_1,shock_time\n0,0.5,1,1,1.25\n");
    }
}
