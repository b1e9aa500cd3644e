//! The coupled N-replica system.
//!
//! Every copy `i` carries its own stochastic flow `X^i` with independent
//! noise, its own initial velocity `u0^i`, and contributes one summand to the
//! shared velocity, either
//!
//! ```text
//! u = (1/N) sum_i P[(grad^T Y^i)(u0^i o Y^i)]        (Weber form)
//! u = (1/N) sum_i BS(omega0^i o Y^i) + mean(u0^i)    (vorticity form)
//! ```
//!
//! The velocity is frozen over a step, all maps are advanced in parallel,
//! and the velocity is rebuilt from the new maps.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flowmap::{max_velocity_gradient, FixedPoint, FlowMap, GradientRoute, Integrator, StepOptions};
use crate::grid::{check_same_grid, PeriodicGrid, ScalarField, VectorField};
use crate::interp::Interpolation;
use crate::norm::{nondim_norm, Lp};
use crate::rng::{Domain, ReplicaStream, StreamKey};
use crate::snapshot::{read_snapshot, snapshot_bytes};
use crate::spectral;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reconstruction {
    #[default]
    Vorticity,
    Weber,
}

impl Reconstruction {
    pub fn name(self) -> &'static str {
        match self {
            Reconstruction::Vorticity => "vorticity",
            Reconstruction::Weber => "weber",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSettings {
    pub nu: f64,
    pub reconstruction: Reconstruction,
    pub step: StepOptions,
    pub gradient_route: GradientRoute,
    /// Compare the two reconstructions every this many steps (0 disables).
    pub crosscheck_every: usize,
    /// Flag threshold for `max |X(Y(x)) - x|`, as a fraction of `L`.
    pub tol_comp: f64,
    /// Flag threshold for `|det grad X - 1|`.
    pub eps_j: f64,
    /// Relative vorticity overshoot tolerated before the max-principle flag.
    pub overshoot_tol: f64,
    /// Abort with `MeshDegenerate` when a forward cell folds.
    pub abort_on_fold: bool,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            nu: 0.1,
            reconstruction: Reconstruction::default(),
            step: StepOptions::default(),
            gradient_route: GradientRoute::default(),
            crosscheck_every: 10,
            tol_comp: 1e-6,
            eps_j: 1e-2,
            overshoot_tol: 0.1,
            abort_on_fold: false,
        }
    }
}

/// Soft runtime checks. Values are the latest measurements, counters record
/// how many steps exceeded their threshold.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Monitors {
    pub comp_residual: f64,
    pub jacobian_deviation: f64,
    pub crosscheck: Option<f64>,
    pub comp_flags: u64,
    pub jacobian_flags: u64,
    pub max_principle_flags: u64,
}

#[derive(Clone, Debug)]
pub struct EnsembleState {
    grid: PeriodicGrid,
    maps: Vec<FlowMap>,
    u: VectorField,
    omega: ScalarField,
    u0: Vec<VectorField>,
    omega0: Vec<ScalarField>,
    omega0_bound: f64,
    settings: EnsembleSettings,
    streams: Vec<ReplicaStream>,
    t: f64,
    steps: u64,
    monitors: Monitors,
}

/// Random mean-zero vorticity with isotropic Fourier support `0 < |m| <= kmax`
/// (integer wavenumbers), amplitudes proportional to `1/|m|` and unit
/// non-dimensional L2 norm. The field is a fixed trigonometric polynomial, so
/// the same seed gives the same function on every grid that resolves it.
pub fn random_bandlimited_vorticity(grid: &PeriodicGrid, kmax: usize, seed: u64) -> Result<ScalarField> {
    if kmax == 0 || 2 * kmax >= grid.n1().min(grid.n2()) {
        return Err(Error::Precondition(format!(
            "kmax = {kmax} must be positive and below half the grid size"
        )));
    }
    let mut rng = ReplicaStream::new(StreamKey::new(seed, u64::MAX, 0, Domain::Init));
    let km = kmax as i64;
    // one representative per conjugate pair
    let mut modes = Vec::new();
    for m1 in 0..=km {
        for m2 in -km..=km {
            if (m1 == 0 && m2 <= 0) || m1 * m1 + m2 * m2 > km * km {
                continue;
            }
            let amp = 1.0 / ((m1 * m1 + m2 * m2) as f64).sqrt();
            let [a, b] = rng.normal2();
            modes.push((m1 as f64, m2 as f64, amp * a, amp * b));
        }
    }
    let power: f64 = modes.iter().map(|&(_, _, a, b)| 2.0 * (a * a + b * b)).sum();
    let scale = 1.0 / power.sqrt();
    let k0 = 2.0 * std::f64::consts::PI / grid.length();
    Ok(ScalarField::from_fn(grid, |[x, y]| {
        modes.iter().fold(0.0, |s, &(m1, m2, a, b)| {
            let th = k0 * (m1 * x + m2 * y);
            s + 2.0 * scale * (a * th.cos() - b * th.sin())
        })
    }))
}

/// Shear initial velocity `(cos(2 pi x2 / L), 0)`.
pub fn shear_cos_velocity(grid: &PeriodicGrid) -> VectorField {
    let k = 2.0 * std::f64::consts::PI / grid.length();
    VectorField::from_fn(grid, |[_, y]| [(k * y).cos(), 0.0])
}

fn nonfinite_to_degenerate(e: Error) -> Error {
    match e {
        Error::NonFinite { what, index } => {
            Error::MeshDegenerate(format!("{what} became non-finite at sample {index}"))
        }
        e => e,
    }
}

impl EnsembleState {
    /// Identity maps at `t = 0` with the given per-copy initial velocities.
    /// Each copy's noise stream is keyed by `(master_seed, replication, copy)`.
    pub fn new(u0: Vec<VectorField>, settings: EnsembleSettings, master_seed: u64, replication: u64) -> Result<Self> {
        let streams = (0..u0.len() as u64)
            .map(|c| ReplicaStream::new(StreamKey::new(master_seed, replication, c, Domain::Noise)))
            .collect();
        Self::from_parts(u0, None, settings, streams, 0.0, 0)
    }

    /// `n` copies sharing one initial velocity.
    pub fn uniform(u0: &VectorField, n: usize, settings: EnsembleSettings, master_seed: u64, replication: u64) -> Result<Self> {
        Self::new(vec![u0.clone(); n], settings, master_seed, replication)
    }

    /// State with prescribed maps, e.g. analytic test flows. Streams start at
    /// their origin.
    pub fn from_maps(
        u0: Vec<VectorField>,
        maps: Vec<FlowMap>,
        settings: EnsembleSettings,
        master_seed: u64,
        replication: u64,
    ) -> Result<Self> {
        if maps.len() != u0.len() {
            return Err(Error::Precondition(format!("{} maps for {} copies", maps.len(), u0.len())));
        }
        let t = maps[0].t;
        for m in &maps {
            check_same_grid(u0[0].grid(), m.grid())?;
            m.lambda.check_finite()?;
            m.mu.check_finite()?;
            if m.t != t {
                return Err(Error::Precondition("maps disagree on the time".into()));
            }
        }
        let streams = (0..u0.len() as u64)
            .map(|c| ReplicaStream::new(StreamKey::new(master_seed, replication, c, Domain::Noise)))
            .collect();
        Self::from_parts(u0, Some(maps), settings, streams, t, 0)
    }

    fn from_parts(
        u0: Vec<VectorField>,
        maps: Option<Vec<FlowMap>>,
        settings: EnsembleSettings,
        streams: Vec<ReplicaStream>,
        t: f64,
        steps: u64,
    ) -> Result<Self> {
        let Some(first) = u0.first() else {
            return Err(Error::Precondition("ensemble needs at least one copy".into()));
        };
        if !(settings.nu >= 0.0 && settings.nu.is_finite()) {
            return Err(Error::Precondition(format!("viscosity must be non-negative, got {}", settings.nu)));
        }
        let grid = first.grid().clone();
        let mut omega0 = Vec::with_capacity(u0.len());
        for v in &u0 {
            check_same_grid(&grid, v.grid())?;
            v.check_finite()?;
            let div = spectral::divergence(v).max_abs();
            if div > 1e-8 * v.max_abs().max(1.0) {
                return Err(Error::Precondition(format!("initial velocity is not divergence-free (|div| = {div:.3e})")));
            }
            omega0.push(spectral::curl2d(v)?);
        }
        let omega0_bound = omega0.iter().map(|w| w.max_abs()).sum::<f64>() / u0.len() as f64;
        let maps = maps.unwrap_or_else(|| vec![FlowMap::identity(&grid); u0.len()]);
        let mut s = Self {
            u: VectorField::zeros(&grid),
            omega: ScalarField::zeros(&grid),
            grid,
            maps,
            u0,
            omega0,
            omega0_bound,
            settings,
            streams,
            t,
            steps,
            monitors: Monitors::default(),
        };
        s.refresh();
        Ok(s)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn n_copies(&self) -> usize {
        self.maps.len()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn nu(&self) -> f64 {
        self.settings.nu
    }

    pub fn settings(&self) -> &EnsembleSettings {
        &self.settings
    }

    pub fn maps(&self) -> &[FlowMap] {
        &self.maps
    }

    pub fn u0(&self) -> &[VectorField] {
        &self.u0
    }

    pub fn omega0(&self) -> &[ScalarField] {
        &self.omega0
    }

    /// Current reconstructed velocity.
    pub fn u(&self) -> &VectorField {
        &self.u
    }

    /// Current vorticity `curl u`.
    pub fn omega(&self) -> &ScalarField {
        &self.omega
    }

    pub fn monitors(&self) -> &Monitors {
        &self.monitors
    }

    pub fn stream_positions(&self) -> Vec<u128> {
        self.streams.iter().map(|s| s.word_pos()).collect()
    }

    /// Replica average of the initial means, which the dynamics conserve.
    pub fn mean_velocity0(&self) -> [f64; 2] {
        let n = self.u0.len() as f64;
        let (a, b) = self.u0.iter().fold((0.0, 0.0), |(a, b), v| {
            let m = v.mean();
            (a + m[0], b + m[1])
        });
        [a / n, b / n]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.maps.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, len: self.maps.len() })
        }
    }

    fn pin_mean(mut v: VectorField, target: [f64; 2]) -> VectorField {
        let m = v.mean();
        v.add_constant([target[0] - m[0], target[1] - m[1]]);
        v
    }

    /// Copy `i`'s Weber summand `P[(grad^T Y^i)(u0^i o Y^i)]`, with its mean
    /// pinned to that of `u0^i`.
    pub fn per_copy_velocity_weber(&self, i: usize) -> Result<VectorField> {
        self.check_index(i)?;
        Ok(self.weber_summand(i))
    }

    fn weber_summand(&self, i: usize) -> VectorField {
        let m = &self.maps[i];
        let scheme = self.settings.step.interp;
        let gt = m.grad_transpose_inverse(self.settings.gradient_route, scheme);
        let w = gt.apply(&m.pullback_vector(&self.u0[i], scheme));
        Self::pin_mean(spectral::leray_project(&w), self.u0[i].mean())
    }

    /// Copy `i`'s pulled-back vorticity `omega0^i o Y^i`.
    pub fn per_copy_vorticity(&self, i: usize) -> Result<ScalarField> {
        self.check_index(i)?;
        Ok(self.maps[i].pullback(&self.omega0[i], self.settings.step.interp))
    }

    fn vorticity_summand(&self, i: usize) -> VectorField {
        let w = self.maps[i].pullback(&self.omega0[i], self.settings.step.interp);
        let mut v = spectral::velocity_from_vorticity_spec(&self.grid, &self.grid.forward(w.values()));
        v.add_constant(self.u0[i].mean());
        v
    }

    fn summand(&self, i: usize, form: Reconstruction) -> VectorField {
        match form {
            Reconstruction::Weber => self.weber_summand(i),
            Reconstruction::Vorticity => self.vorticity_summand(i),
        }
    }

    /// Copy `i`'s velocity in the configured reconstruction form. The shared
    /// velocity is the in-order average of these.
    pub fn per_copy_velocity(&self, i: usize) -> Result<VectorField> {
        self.check_index(i)?;
        Ok(self.summand(i, self.settings.reconstruction))
    }

    pub fn per_copy_velocities(&self) -> Vec<VectorField> {
        let form = self.settings.reconstruction;
        (0..self.n_copies()).into_par_iter().map(|i| self.summand(i, form)).collect()
    }

    fn average(&self, parts: &[VectorField]) -> VectorField {
        let mut acc = VectorField::zeros(&self.grid);
        for p in parts {
            acc.axpy(1.0, p);
        }
        acc.scaled(1.0 / parts.len() as f64)
    }

    fn reconstruct(&self, form: Reconstruction) -> VectorField {
        let parts: Vec<VectorField> = (0..self.n_copies()).into_par_iter().map(|i| self.summand(i, form)).collect();
        Self::pin_mean(self.average(&parts), self.mean_velocity0())
    }

    pub fn reconstruct_velocity_weber(&self) -> VectorField {
        self.reconstruct(Reconstruction::Weber)
    }

    /// Averaged pulled-back vorticity and its Biot-Savart velocity.
    pub fn reconstruct_velocity_vorticity(&self) -> (ScalarField, VectorField) {
        let scheme = self.settings.step.interp;
        let parts: Vec<ScalarField> =
            self.maps.par_iter().zip(&self.omega0).map(|(m, w)| m.pullback(w, scheme)).collect();
        let mut omega = ScalarField::zeros(&self.grid);
        for p in &parts {
            omega.axpy(1.0, p);
        }
        let omega = omega.scaled(1.0 / parts.len() as f64);
        (omega, self.reconstruct(Reconstruction::Vorticity))
    }

    /// Relative L2 distance between the two reconstructions.
    pub fn crosscheck(&self) -> f64 {
        let a = self.reconstruct(Reconstruction::Weber);
        let b = self.reconstruct(Reconstruction::Vorticity);
        let d = nondim_norm(&a.sub(&b), Lp::L2);
        let s = nondim_norm(&b, Lp::L2);
        if s > 0.0 {
            d / s
        } else {
            d
        }
    }

    fn refresh(&mut self) {
        self.u = self.reconstruct(self.settings.reconstruction);
        self.omega = spectral::curl2d(&self.u).unwrap_or_else(|_| ScalarField::zeros(&self.grid));
    }

    /// Largest `h * max|grad u|` the current velocity allows.
    pub fn max_stable_step(&self) -> f64 {
        let g = max_velocity_gradient(&self.u);
        if g > 0.0 {
            self.settings.step.contraction_limit / g
        } else {
            f64::INFINITY
        }
    }

    /// One coupled step of size `h`. On error the state is left unchanged.
    pub fn advance(&mut self, h: f64) -> Result<()> {
        let grad = max_velocity_gradient(&self.u);
        let opts = self.settings.step;
        let product = h * grad;
        if product > opts.contraction_limit {
            return Err(Error::StepRejected { product, limit: opts.contraction_limit, max_h: opts.contraction_limit / grad });
        }
        let amp = (2.0 * self.settings.nu * h).sqrt();
        let mut streams = self.streams.clone();
        let noise: Vec<[f64; 2]> = streams
            .iter_mut()
            .map(|s| {
                let [a, b] = s.normal2();
                [amp * a, amp * b]
            })
            .collect();
        let u = &self.u;
        let maps: Vec<FlowMap> = self
            .maps
            .par_iter()
            .zip(&noise)
            .map(|(m, &dw)| m.step_with_gradient_bound(u, grad, h, dw, &opts))
            .collect::<Result<_>>()
            .map_err(nonfinite_to_degenerate)?;
        if self.settings.abort_on_fold {
            maps.par_iter().try_for_each(|m| m.check_forward_mesh())?;
        }
        let old_maps = std::mem::replace(&mut self.maps, maps);
        let (old_u, old_omega) = (self.u.clone(), self.omega.clone());
        self.refresh();
        if let Err(e) = self.u.check_finite() {
            self.maps = old_maps;
            self.u = old_u;
            self.omega = old_omega;
            return Err(nonfinite_to_degenerate(e));
        }
        self.streams = streams;
        self.t += h;
        self.steps += 1;
        self.update_monitors();
        Ok(())
    }

    /// Advances by `h`, splitting into equal substeps when the contraction
    /// condition requires it. Returns the number of substeps taken.
    pub fn advance_adaptive(&mut self, h: f64) -> Result<usize> {
        let mut done = 0.0;
        let mut count = 0;
        while done < h * (1.0 - 1e-12) {
            let rest = h - done;
            let k = (rest / self.max_stable_step()).ceil().max(1.0);
            let sub = rest / k;
            self.advance(sub)?;
            done += sub;
            count += 1;
        }
        Ok(count)
    }

    fn update_monitors(&mut self) {
        let scheme = self.settings.step.interp;
        let (res, jac) = self
            .maps
            .par_iter()
            .map(|m| {
                let det = m.forward_jacobian_det();
                let dev = det.values().iter().fold(0.0f64, |a, d| a.max((d - 1.0).abs()));
                (m.composition_residual(scheme), dev)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        let mon = &mut self.monitors;
        mon.comp_residual = res;
        mon.jacobian_deviation = jac;
        if res > self.settings.tol_comp * self.grid.length() {
            mon.comp_flags += 1;
            log::debug!("t = {:.4}: composition residual {res:.3e} above tolerance", self.t);
        }
        if jac > self.settings.eps_j {
            mon.jacobian_flags += 1;
            log::debug!("t = {:.4}: |det grad X - 1| = {jac:.3e} above tolerance", self.t);
        }
        let over = self.omega.max_abs() - self.omega0_bound * (1.0 + self.settings.overshoot_tol);
        if over > 1e-12 {
            mon.max_principle_flags += 1;
            log::debug!("t = {:.4}: vorticity max principle exceeded by {over:.3e}", self.t);
        }
        let k = self.settings.crosscheck_every as u64;
        if k > 0 && self.steps % k == 0 {
            let c = self.crosscheck();
            log::debug!("t = {:.4}: weber/vorticity relative difference {c:.3e}", self.t);
            self.monitors.crosscheck = Some(c);
        }
    }

    /// Serialized state: header, per-copy maps and initial data, stream
    /// positions, trailing SHA-256 of everything before it.
    pub fn checkpoint(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u64(CHECKPOINT_VERSION);
        w.u64(self.maps.len() as u64);
        w.f64(self.t);
        w.u64(self.steps);
        encode_settings(&mut w, &self.settings);
        for i in 0..self.maps.len() {
            let m = &self.maps[i];
            let key = self.streams[i].key();
            w.u64(key.master);
            w.u64(key.replication);
            w.u64(key.copy);
            w.u64(key.domain as u64);
            let pos = self.streams[i].word_pos();
            w.u64(pos as u64);
            w.u64((pos >> 64) as u64);
            w.f64(m.t);
            w.f64(m.brownian[0]);
            w.f64(m.brownian[1]);
            w.blob(&snapshot_bytes(&m.lambda));
            w.blob(&snapshot_bytes(&m.mu));
            w.blob(&snapshot_bytes(&self.u0[i]));
        }
        let digest = Sha256::digest(&w.buf);
        w.bytes(&digest);
        w.buf
    }

    pub fn restart(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < CHECKPOINT_MAGIC.len() + 32 {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u64()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n = r.u64()? as usize;
        if n == 0 || n > 1 << 20 {
            return Err(Error::Checkpoint(format!("implausible copy count {n}")));
        }
        let t = r.f64()?;
        let steps = r.u64()?;
        let settings = decode_settings(&mut r)?;
        let mut maps = Vec::with_capacity(n);
        let mut u0 = Vec::with_capacity(n);
        let mut streams = Vec::with_capacity(n);
        for _ in 0..n {
            let (master, replication, copy) = (r.u64()?, r.u64()?, r.u64()?);
            let domain = match r.u64()? {
                1 => Domain::Noise,
                2 => Domain::Init,
                3 => Domain::Burgers,
                d => return Err(Error::Checkpoint(format!("unknown stream domain {d}"))),
            };
            let pos = r.u64()? as u128 | (r.u64()? as u128) << 64;
            streams.push(ReplicaStream::at_position(StreamKey { master, replication, copy, domain }, pos));
            let mt = r.f64()?;
            let brownian = [r.f64()?, r.f64()?];
            let lambda = read_snapshot(r.blob()?)?.into_vector()?;
            let mu = read_snapshot(r.blob()?)?.into_vector()?;
            u0.push(read_snapshot(r.blob()?)?.into_vector()?);
            maps.push(FlowMap { lambda, mu, brownian, t: mt });
        }
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        let g = u0[0].grid().clone();
        for (m, v) in maps.iter().zip(&u0) {
            if *m.lambda.grid() != g || *m.mu.grid() != g || *v.grid() != g {
                return Err(Error::Checkpoint("copies disagree on the grid".into()));
            }
        }
        Self::from_parts(u0, Some(maps), settings, streams, t, steps)
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NSRCKPT\0";
pub const CHECKPOINT_VERSION: u64 = 1;

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn blob(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.bytes(b);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Checkpoint("truncated".into()));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn blob(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()? as usize;
        self.take(n)
    }
}

fn encode_settings(w: &mut Writer, s: &EnsembleSettings) {
    w.f64(s.nu);
    w.u64(match s.reconstruction {
        Reconstruction::Vorticity => 0,
        Reconstruction::Weber => 1,
    });
    w.u64(match s.step.integrator {
        Integrator::EulerMaruyama => 0,
        Integrator::Heun => 1,
    });
    w.u64(match s.step.interp {
        Interpolation::Cubic => 0,
        Interpolation::Linear => 1,
    });
    w.f64(s.step.fixed_point.tol);
    w.u64(s.step.fixed_point.max_iter as u64);
    w.f64(s.step.contraction_limit);
    w.u64(match s.gradient_route {
        GradientRoute::SpectralInverse => 0,
        GradientRoute::ForwardAdjugate => 1,
    });
    w.u64(s.crosscheck_every as u64);
    w.f64(s.tol_comp);
    w.f64(s.eps_j);
    w.f64(s.overshoot_tol);
    w.u64(s.abort_on_fold as u64);
}

fn decode_settings(r: &mut Reader) -> Result<EnsembleSettings> {
    let bad = |what: &str| Error::Checkpoint(format!("invalid {what}"));
    let nu = r.f64()?;
    let reconstruction = match r.u64()? {
        0 => Reconstruction::Vorticity,
        1 => Reconstruction::Weber,
        _ => return Err(bad("reconstruction")),
    };
    let integrator = match r.u64()? {
        0 => Integrator::EulerMaruyama,
        1 => Integrator::Heun,
        _ => return Err(bad("integrator")),
    };
    let interp = match r.u64()? {
        0 => Interpolation::Cubic,
        1 => Interpolation::Linear,
        _ => return Err(bad("interpolation")),
    };
    let fixed_point = FixedPoint { tol: r.f64()?, max_iter: r.u64()? as usize };
    let contraction_limit = r.f64()?;
    let gradient_route = match r.u64()? {
        0 => GradientRoute::SpectralInverse,
        1 => GradientRoute::ForwardAdjugate,
        _ => return Err(bad("gradient route")),
    };
    Ok(EnsembleSettings {
        nu,
        reconstruction,
        step: StepOptions { integrator, interp, fixed_point, contraction_limit },
        gradient_route,
        crosscheck_every: r.u64()? as usize,
        tol_comp: r.f64()?,
        eps_j: r.f64()?,
        overshoot_tol: r.f64()?,
        abort_on_fold: r.u64()? != 0,
    })
}
