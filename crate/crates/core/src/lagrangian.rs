//! Particle advection in recorded flows, the coarse-flow Gronwall check and
//! trajectory Hölder estimates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::bank::LPBank;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::ns::SnapshotSeries;
use crate::report::{BoundParams, BoundReport, EstimateId};
use crate::rng;
use crate::stats::{loglog, LineFit};
use crate::trig::TrigPoly;

/// Above this many active modes, evaluation goes through a padded grid.
pub const DIRECT_MODE_LIMIT: usize = 10_000;
const PAD: usize = 4;
const STENCIL: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMethod {
    Auto,
    Direct,
    Padded,
}

/// Off-grid evaluator for one field.
#[derive(Clone, Debug)]
pub enum VelocityEvaluator {
    Direct(TrigPoly),
    Padded { grid: GridSpec, comps: usize, values: Vec<f64>, weights: [f64; STENCIL] },
}

fn binomial_weights() -> [f64; STENCIL] {
    // barycentric weights of equispaced nodes: (−1)^j C(15, j)
    let mut w = [0.0; STENCIL];
    let mut c = 1.0;
    for (j, wj) in w.iter_mut().enumerate() {
        *wj = if j % 2 == 0 { c } else { -c };
        c = c * (STENCIL - 1 - j) as f64 / (j + 1) as f64;
    }
    w
}

impl VelocityEvaluator {
    pub fn new(f: &SpectralField, method: EvalMethod) -> Self {
        let tp = TrigPoly::new(f);
        let direct = match method {
            EvalMethod::Direct => true,
            EvalMethod::Padded => false,
            EvalMethod::Auto => tp.modes() <= DIRECT_MODE_LIMIT,
        };
        if direct {
            return VelocityEvaluator::Direct(tp);
        }
        let fine = f.resample(f.grid().n() * PAD).expect("padded grid");
        VelocityEvaluator::Padded {
            grid: fine.grid(),
            comps: f.components(),
            values: fine.to_physical(),
            weights: binomial_weights(),
        }
    }

    pub fn components(&self) -> usize {
        match self {
            VelocityEvaluator::Direct(tp) => tp.components(),
            VelocityEvaluator::Padded { comps, .. } => *comps,
        }
    }

    pub fn eval(&self, x: [f64; 2], out: &mut [f64]) {
        match self {
            VelocityEvaluator::Direct(tp) => tp.eval(x, out),
            VelocityEvaluator::Padded { grid, comps, values, weights } => {
                let m = grid.n();
                let d = grid.d();
                let len = grid.len();
                let axis = |xv: f64| -> (isize, [f64; STENCIL]) {
                    let s = xv.rem_euclid(1.0) * m as f64;
                    let base = libm::floor(s) as isize - (STENCIL as isize / 2 - 1);
                    let t = s - base as f64;
                    let mut l = [0.0; STENCIL];
                    let mut exact = None;
                    let mut sum = 0.0;
                    for j in 0..STENCIL {
                        let dx = t - j as f64;
                        if dx == 0.0 {
                            exact = Some(j);
                            break;
                        }
                        l[j] = weights[j] / dx;
                        sum += l[j];
                    }
                    if let Some(j) = exact {
                        l = [0.0; STENCIL];
                        l[j] = 1.0;
                    } else {
                        l.iter_mut().for_each(|v| *v /= sum);
                    }
                    (base, l)
                };
                let wrap = |i: isize| i.rem_euclid(m as isize) as usize;
                let (b0, l0) = axis(x[0]);
                out[..*comps].iter_mut().for_each(|v| *v = 0.0);
                if d == 1 {
                    for c in 0..*comps {
                        for j in 0..STENCIL {
                            out[c] += l0[j] * values[c * len + wrap(b0 + j as isize)];
                        }
                    }
                } else {
                    let (b1, l1) = axis(x[1]);
                    for c in 0..*comps {
                        let mut acc = 0.0;
                        for i in 0..STENCIL {
                            let row = c * len + wrap(b0 + i as isize) * m;
                            let mut r = 0.0;
                            for j in 0..STENCIL {
                                r += l1[j] * values[row + wrap(b1 + j as isize)];
                            }
                            acc += l0[i] * r;
                        }
                        out[c] = acc;
                    }
                }
            }
        }
    }
}

/// Values of `u` at each point (first `d` entries of each returned array).
pub fn eval_velocity(u_hat: &SpectralField, points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    eval_velocity_with(u_hat, points, EvalMethod::Auto)
}

pub fn eval_velocity_with(u_hat: &SpectralField, points: &[[f64; 2]], method: EvalMethod) -> Vec<[f64; 2]> {
    let ev = VelocityEvaluator::new(u_hat, method);
    let mut buf = vec![0.0; ev.components().max(2)];
    points
        .iter()
        .map(|&p| {
            ev.eval(p, &mut buf);
            [buf[0], if ev.components() > 1 { buf[1] } else { 0.0 }]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Track {
    /// Positions in `[0,1)^d`.
    pub x: Vec<[f64; 2]>,
    /// `u(t, x(t))`
    pub u: Vec<[f64; 2]>,
    /// Coarse-flow twin positions, when integrated.
    pub twin: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub d: usize,
    pub k_coarse: Option<i32>,
    /// Starting points (used when there is no history yet).
    pub start: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    pub tracks: Vec<Track>,
}

impl ParticleSet {
    pub fn new(d: usize, start: Vec<[f64; 2]>) -> Self {
        let start: Vec<[f64; 2]> = start.into_iter().map(|p| wrap(d, p)).collect();
        let tracks = vec![Track::default(); start.len()];
        ParticleSet { d, k_coarse: None, start, times: Vec::new(), tracks }
    }

    /// Uniform random points in the torus.
    pub fn random(d: usize, count: usize, seed: u64) -> Self {
        let mut r = rng::rng_for(seed, 0x9A27);
        let pts = (0..count)
            .map(|_| {
                let a: f64 = r.gen();
                let b: f64 = r.gen();
                [a, if d == 2 { b } else { 0.0 }]
            })
            .collect();
        ParticleSet::new(d, pts)
    }

    /// Build from recorded samples (e.g. synthetic trajectories).
    pub fn from_samples(d: usize, times: Vec<f64>, tracks: Vec<Track>) -> Result<Self> {
        for t in &tracks {
            if t.x.len() != times.len() || t.u.len() != times.len() {
                return Err(Error::Shape("track length differs from the time axis".into()));
            }
        }
        let start = tracks.iter().map(|t| t.x.first().copied().unwrap_or([0.0; 2])).collect();
        Ok(ParticleSet { d, k_coarse: None, start, times, tracks })
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn has_twins(&self) -> bool {
        !self.tracks.is_empty() && self.tracks.iter().all(|t| !t.twin.is_empty() && t.twin.len() == t.x.len())
    }

    /// Current positions.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.tracks.iter().zip(&self.start).map(|(t, s)| t.x.last().copied().unwrap_or(*s)).collect()
    }

    /// Split into consecutive chunks of at most `size` particles.
    pub fn split(&self, size: usize) -> Vec<ParticleSet> {
        let size = size.max(1);
        self.tracks
            .chunks(size)
            .zip(self.start.chunks(size))
            .map(|(t, s)| ParticleSet {
                d: self.d,
                k_coarse: self.k_coarse,
                start: s.to_vec(),
                times: self.times.clone(),
                tracks: t.to_vec(),
            })
            .collect()
    }

    /// Inverse of [`split`](Self::split).
    pub fn merge(parts: Vec<ParticleSet>) -> Result<ParticleSet> {
        let mut it = parts.into_iter();
        let mut out = it.next().ok_or_else(|| Error::Missing("no particle sets to merge".into()))?;
        for p in it {
            if p.times != out.times || p.d != out.d || p.k_coarse != out.k_coarse {
                return Err(Error::Shape("particle sets have different histories".into()));
            }
            out.start.extend(p.start);
            out.tracks.extend(p.tracks);
        }
        Ok(out)
    }
}

fn wrap(d: usize, p: [f64; 2]) -> [f64; 2] {
    [p[0].rem_euclid(1.0), if d == 2 { p[1].rem_euclid(1.0) } else { 0.0 }]
}

/// Shortest displacement `b − a` on the torus.
pub fn torus_delta(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let f = |v: f64| v - libm::round(v);
    [f(b[0] - a[0]), f(b[1] - a[1])]
}

pub fn torus_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = torus_delta(a, b);
    libm::sqrt(d[0] * d[0] + d[1] * d[1])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvectOptions {
    /// Also integrate twins in `P_{≤k}u` (needs a bank).
    pub band: Option<i32>,
    /// RK4 substeps per snapshot interval.
    pub substeps: usize,
    /// Snapshot index where integration starts.
    pub start_index: usize,
    /// Last snapshot index (inclusive); `None` means the end of the series.
    pub end_index: Option<usize>,
    pub method: EvalMethod,
    /// Integrate only the `P_{≤k}u` flow for the primary trajectory.
    pub coarse_only: bool,
}

impl Default for AdvectOptions {
    fn default() -> Self {
        AdvectOptions { band: None, substeps: 4, start_index: 0, end_index: None, method: EvalMethod::Auto, coarse_only: false }
    }
}

fn vel(ev0: &VelocityEvaluator, ev1: &VelocityEvaluator, theta: f64, x: [f64; 2], b0: &mut [f64], b1: &mut [f64]) -> [f64; 2] {
    ev0.eval(x, b0);
    ev1.eval(x, b1);
    let c = ev0.components();
    let mut v = [0.0; 2];
    for i in 0..c.min(2) {
        v[i] = (1.0 - theta) * b0[i] + theta * b1[i];
    }
    v
}

fn rk4(
    d: usize,
    x: [f64; 2],
    ev0: &VelocityEvaluator,
    ev1: &VelocityEvaluator,
    th0: f64,
    dth: f64,
    h: f64,
    b0: &mut [f64],
    b1: &mut [f64],
) -> [f64; 2] {
    let add = |p: [f64; 2], v: [f64; 2], s: f64| [p[0] + s * v[0], p[1] + s * v[1]];
    let k1 = vel(ev0, ev1, th0, x, b0, b1);
    let k2 = vel(ev0, ev1, th0 + 0.5 * dth, add(x, k1, 0.5 * h), b0, b1);
    let k3 = vel(ev0, ev1, th0 + 0.5 * dth, add(x, k2, 0.5 * h), b0, b1);
    let k4 = vel(ev0, ev1, th0 + dth, add(x, k3, h), b0, b1);
    let y = [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ];
    wrap(d, y)
}

/// Integrate `dx/dt = u(t,x)` through the series (field linear in time
/// between snapshots). With `band = Some(k)`, twins following `P_{≤k}u` are
/// integrated from the same starting points. History is appended; an
/// existing history must end at the starting snapshot time.
pub fn advect(series: &SnapshotSeries, particles: &ParticleSet, bank: Option<&LPBank>, opts: AdvectOptions) -> Result<ParticleSet> {
    let n_snap = series.len();
    let end = opts.end_index.unwrap_or(n_snap.saturating_sub(1));
    if n_snap == 0 || end >= n_snap || opts.start_index > end {
        return Err(Error::param("end_index", format!("snapshot range [{}, {end}] outside the series", opts.start_index)));
    }
    if particles.d != series.grid.d() {
        return Err(Error::Shape("particle dimension differs from the series grid".into()));
    }
    let substeps = opts.substeps.max(1);
    let needs_bank = opts.band.is_some();
    let bank = match (needs_bank, bank) {
        (true, None) => return Err(Error::Missing("coarse-flow advection needs a filter bank".into())),
        (_, b) => b,
    };
    let t_start = series.times[opts.start_index];
    let mut out = particles.clone();
    if let Some(&last) = out.times.last() {
        if (last - t_start).abs() > 1e-12 * t_start.abs().max(1.0) {
            return Err(Error::Missing(format!("history ends at t = {last}, series segment starts at t = {t_start}")));
        }
    }
    let with_twins = opts.band.is_some();
    if with_twins && !out.times.is_empty() && !out.has_twins() {
        return Err(Error::Missing("existing history has no twin trajectories".into()));
    }
    out.k_coarse = opts.band.or(out.k_coarse);
    let d = series.grid.d();
    let coarse = |i: usize| -> Result<SpectralField> {
        let k = opts.band.expect("band set");
        bank.expect("bank checked").leq(&series.fields[i], k)
    };
    let primary = |i: usize| -> Result<VelocityEvaluator> {
        if opts.coarse_only {
            Ok(VelocityEvaluator::new(&coarse(i)?, opts.method))
        } else {
            Ok(VelocityEvaluator::new(&series.fields[i], opts.method))
        }
    };
    let full_eval = |i: usize| VelocityEvaluator::new(&series.fields[i], opts.method);
    let comps = series.fields[0].components().max(2);
    let (mut b0, mut b1) = (vec![0.0; comps], vec![0.0; comps]);
    let mut xs = particles.positions();
    let mut twins: Vec<[f64; 2]> = if with_twins {
        if out.times.is_empty() {
            xs.clone()
        } else {
            out.tracks.iter().map(|t| *t.twin.last().unwrap()).collect()
        }
    } else {
        Vec::new()
    };
    let record = |out: &mut ParticleSet, t: f64, xs: &[[f64; 2]], tw: &[[f64; 2]], ev: &VelocityEvaluator, buf: &mut [f64]| {
        out.times.push(t);
        for (j, tr) in out.tracks.iter_mut().enumerate() {
            ev.eval(xs[j], buf);
            tr.x.push(xs[j]);
            tr.u.push([buf[0], if d == 2 { buf[1] } else { 0.0 }]);
            if !tw.is_empty() {
                tr.twin.push(tw[j]);
            }
        }
    };
    let mut ev_now = primary(opts.start_index)?;
    let mut tw_now = if with_twins { Some(VelocityEvaluator::new(&coarse(opts.start_index)?, opts.method)) } else { None };
    if out.times.is_empty() {
        let fe = full_eval(opts.start_index);
        record(&mut out, t_start, &xs, &twins, &fe, &mut b0);
    }
    for i in opts.start_index..end {
        let dt = series.times[i + 1] - series.times[i];
        let h = dt / substeps as f64;
        let dth = 1.0 / substeps as f64;
        let ev_next = primary(i + 1)?;
        let tw_next = if with_twins { Some(VelocityEvaluator::new(&coarse(i + 1)?, opts.method)) } else { None };
        for s in 0..substeps {
            let th0 = s as f64 * dth;
            for x in xs.iter_mut() {
                *x = rk4(d, *x, &ev_now, &ev_next, th0, dth, h, &mut b0, &mut b1);
            }
            if let (Some(a), Some(b)) = (&tw_now, &tw_next) {
                for x in twins.iter_mut() {
                    *x = rk4(d, *x, a, b, th0, dth, h, &mut b0, &mut b1);
                }
            }
        }
        let fe = if opts.coarse_only { full_eval(i + 1) } else { ev_next.clone() };
        record(&mut out, series.times[i + 1], &xs, &twins, &fe, &mut b0);
        ev_now = ev_next;
        tw_now = tw_next;
    }
    Ok(out)
}

/// `|x(t) − x_{(k)}(t)|` against `(1+δ)^{−k}(exp((1+δ)^{(1−α)k}‖u‖(t−t₀)) − 1)`,
/// one row per recorded time with the worst particle.
pub fn gronwall_check(particles: &ParticleSet, k: i32, bank: &LPBank, alpha: f64, u_norm: f64, nu: f64) -> Result<BoundReport> {
    if !particles.has_twins() {
        return Err(Error::Missing("particles carry no coarse-flow twins".into()));
    }
    let t0 = particles.times[0];
    let mut rep = BoundReport::new(EstimateId::TrajDiff, BoundParams { alpha, delta: bank.delta(), nu, a: 0.0, m: 0 });
    rep.note("u_norm", u_norm);
    rep.note("t0", t0);
    let rate = bank.pow((1.0 - alpha) * k as f64) * u_norm;
    for (i, &t) in particles.times.iter().enumerate() {
        let rhs = bank.pow(-(k as f64)) * libm::expm1(rate * (t - t0));
        let mut worst: Option<(f64, f64)> = None;
        for tr in &particles.tracks {
            let lhs = torus_distance(tr.x[i], tr.twin[i]);
            let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
            if worst.map_or(true, |(_, r)| ratio > r) {
                worst = Some((lhs, ratio));
            }
        }
        let (lhs, _) = worst.expect("nonempty particle set");
        rep.push(k, t, lhs, rhs);
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajHolderReport {
    pub order: u32,
    /// `1/(1−α) − m`.
    pub exponent_target: f64,
    /// `(τ, max |x^{(m)}(t₁) − x^{(m)}(t₂)|)` per lag.
    pub measured_pairs: Vec<(f64, f64)>,
    /// NaN when every increment vanishes.
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    /// `max inc / ((a^{−m}+1)‖u‖^{1/(1−α)} τ^β)`
    pub constant_estimate: f64,
    pub a_parameter: f64,
    pub log_correction_used: bool,
    /// First admissible time.
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagGrid {
    /// Number of log-spaced lag levels.
    pub count: usize,
    /// Largest lag as a fraction of the admissible span.
    pub max_fraction: f64,
    /// Smallest lag in samples.
    pub min_samples: usize,
}

impl Default for LagGrid {
    fn default() -> Self {
        LagGrid { count: 12, max_fraction: 0.25, min_samples: 1 }
    }
}

/// Integer lags log-spaced between `lo` and `hi` samples.
pub fn log_lags(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let lo = lo.max(1);
    if hi < lo {
        return Vec::new();
    }
    let mut v: Vec<usize> = (0..count.max(1))
        .map(|i| {
            let s = if count <= 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            libm::round(libm::exp(libm::log(lo as f64) + s * (libm::log(hi as f64) - libm::log(lo as f64)))) as usize
        })
        .collect();
    v.dedup();
    v
}

/// `a‖u‖^{−2/(1+α)}ν^{(1−α)/(1+α)}`
pub fn waiting_threshold(a: f64, u_norm: f64, nu: f64, alpha: f64) -> f64 {
    a * libm::pow(u_norm, -2.0 / (1.0 + alpha)) * libm::pow(nu, (1.0 - alpha) / (1.0 + alpha))
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Insufficient("history has fewer than two samples".into()));
    }
    let h = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1e-300) {
            return Err(Error::Missing("history times are not uniformly spaced".into()));
        }
    }
    Ok(h)
}

/// Hölder exponent of `x^{(m)}` along trajectories, fitted in log-log over
/// lags whose both endpoints are past the waiting threshold.
pub fn traj_holder(
    particles: &ParticleSet,
    m: u32,
    alpha: f64,
    a: f64,
    nu: f64,
    u_norm: f64,
    lags: LagGrid,
) -> Result<TrajHolderReport> {
    if m != 1 && m != 2 {
        return Err(Error::param("m", format!("derivative order must be 1 or 2, got {m}")));
    }
    let dt = uniform_step(&particles.times)?;
    let threshold = waiting_threshold(a, u_norm, nu, alpha);
    let half = if m == 2 { 4usize } else { 0 };
    let n = particles.times.len();
    // signal per particle, indexed like `times`, valid on [half, n − half)
    let signals: Vec<Vec<[f64; 2]>> = particles
        .tracks
        .iter()
        .map(|tr| {
            if m == 1 {
                tr.u.clone()
            } else {
                (0..n)
                    .map(|i| {
                        if i < half || i + half >= n {
                            [f64::NAN; 2]
                        } else {
                            let (p, q) = (tr.u[i + half], tr.u[i - half]);
                            let s = 1.0 / (2.0 * half as f64 * dt);
                            [(p[0] - q[0]) * s, (p[1] - q[1]) * s]
                        }
                    })
                    .collect()
            }
        })
        .collect();
    let first = (0..n).find(|&i| i >= half && particles.times[i] >= threshold);
    let Some(first) = first else {
        return Err(Error::Insufficient(format!("no samples past the waiting time {threshold:e}")));
    };
    let last = n - half; // exclusive
    let span = last.saturating_sub(first + 1);
    let max_lag = libm::floor(span as f64 * lags.max_fraction) as usize;
    let lag_list = log_lags(lags.min_samples, max_lag, lags.count);
    if lag_list.len() < 4 {
        return Err(Error::Insufficient(format!(
            "only {} admissible lags between {} and {max_lag} samples",
            lag_list.len(),
            lags.min_samples
        )));
    }
    let inv = 1.0 / (1.0 - alpha);
    let target = inv - m as f64;
    let log_case = libm::fabs(inv - libm::round(inv)) < 1e-9;
    let mut pairs = Vec::new();
    let mut constant: f64 = 0.0;
    let norm = (libm::pow(a, -(m as f64)) + 1.0) * libm::pow(u_norm, inv);
    for &lag in &lag_list {
        let mut worst: f64 = 0.0;
        for sig in &signals {
            for i in first..last - lag {
                let (p, q) = (sig[i + lag], sig[i]);
                let v = libm::sqrt((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2));
                worst = worst.max(v);
            }
        }
        let tau = lag as f64 * dt;
        constant = constant.max(worst / (norm * libm::pow(tau, target)));
        pairs.push((tau, worst));
    }
    let positive: Vec<&(f64, f64)> = pairs.iter().filter(|p| p.1 > 0.0).collect();
    let fit: Option<LineFit> = if positive.len() >= 3 {
        let xs: Vec<f64> = positive
            .iter()
            .map(|p| {
                if log_case {
                    let lm = f64::max(0.0, -libm::log(u_norm * p.0));
                    p.0 * (1.0 + lm)
                } else {
                    p.0
                }
            })
            .collect();
        let ys: Vec<f64> = positive.iter().map(|p| p.1).collect();
        Some(loglog(&xs, &ys)?)
    } else {
        None
    };
    Ok(TrajHolderReport {
        order: m,
        exponent_target: target,
        measured_pairs: pairs,
        fitted_slope: fit.map_or(f64::NAN, |f| f.slope),
        slope_stderr: fit.map_or(f64::NAN, |f| f.stderr),
        constant_estimate: constant,
        a_parameter: a,
        log_correction_used: log_case,
        threshold,
    })
}

/// Determinant of the least-squares affine map taking the initial cloud to
/// the cloud at history index `i` (2D; displacements unwrapped around the
/// first particle).
pub fn cloud_jacobian(particles: &ParticleSet, i: usize) -> Result<f64> {
    if particles.d != 2 || particles.len() < 3 {
        return Err(Error::Insufficient("need a 2D cloud of at least 3 particles".into()));
    }
    let rel = |k: usize| -> Vec<[f64; 2]> {
        let o = particles.tracks[0].x[k];
        particles.tracks.iter().map(|t| torus_delta(o, t.x[k])).collect()
    };
    let (p0, p1) = (rel(0), rel(i));
    let mean = |v: &[[f64; 2]]| {
        let n = v.len() as f64;
        [v.iter().map(|a| a[0]).sum::<f64>() / n, v.iter().map(|a| a[1]).sum::<f64>() / n]
    };
    let (m0, m1) = (mean(&p0), mean(&p1));
    // A = (Σ y xᵀ)(Σ x xᵀ)^{-1}
    let (mut sxx, mut syx) = ([[0.0f64; 2]; 2], [[0.0f64; 2]; 2]);
    for (a, b) in p0.iter().zip(&p1) {
        let x = [a[0] - m0[0], a[1] - m0[1]];
        let y = [b[0] - m1[0], b[1] - m1[1]];
        for r in 0..2 {
            for c in 0..2 {
                sxx[r][c] += x[r] * x[c];
                syx[r][c] += y[r] * x[c];
            }
        }
    }
    let dx = sxx[0][0] * sxx[1][1] - sxx[0][1] * sxx[1][0];
    let dy = syx[0][0] * syx[1][1] - syx[0][1] * syx[1][0];
    Ok(dy / dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ns::Dealias;
    use crate::synth::random_field;
    use core::f64::consts::PI;
    use num_complex::Complex64;

    fn series_of(fields: Vec<SpectralField>, dt: f64) -> SnapshotSeries {
        let grid = fields[0].grid();
        let n = fields.len();
        SnapshotSeries {
            grid,
            nu: 1e-3,
            dt,
            snapshot_every: 1,
            dealias: Dealias::TwoThirds,
            nonlinear: true,
            times: (0..n).map(|i| i as f64 * dt).collect(),
            energies: fields.iter().map(|f| f.energy()).collect(),
            fields,
            initial_projected: false,
        }
    }

    #[test]
    fn single_mode_and_grid_nodes() {
        let g = GridSpec::new(2, 16).unwrap();
        let mut u = SpectralField::zeros(g, 2);
        let i = g.index_of([2, 1]).unwrap();
        let j = g.index_of([-2, -1]).unwrap();
        u.coeffs_mut()[i] = Complex64::new(0.5, 0.0);
        u.coeffs_mut()[j] = Complex64::new(0.5, 0.0);
        let x = [0.1, 0.3];
        let v = eval_velocity(&u, &[x]);
        assert!((v[0][0] - libm::cos(2.0 * PI * (0.2 + 0.3))).abs() < 1e-12);
        let f = random_field(g, 2, 6, 1.0, 1);
        let phys = f.to_physical();
        let pts: Vec<[f64; 2]> = (0..g.len()).step_by(5).map(|p| g.point(p)).collect();
        let vals = eval_velocity(&f, &pts);
        for (q, p) in (0..g.len()).step_by(5).enumerate() {
            assert!((vals[q][0] - phys[p]).abs() < 1e-13);
            assert!((vals[q][1] - phys[g.len() + p]).abs() < 1e-13);
        }
    }

    #[test]
    fn padded_matches_direct() {
        let g = GridSpec::new(2, 64).unwrap();
        let f = random_field(g, 2, 21, 1.5, 3);
        let pts = ParticleSet::random(2, 100, 5).start;
        let a = eval_velocity_with(&f, &pts, EvalMethod::Direct);
        let b = eval_velocity_with(&f, &pts, EvalMethod::Padded);
        let scale = a.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max);
        for (p, q) in a.iter().zip(&b) {
            assert!((p[0] - q[0]).abs() <= 1e-8 * scale.max(1.0));
            assert!((p[1] - q[1]).abs() <= 1e-8 * scale.max(1.0));
        }
    }

    #[test]
    fn constant_and_zero_flows() {
        let g = GridSpec::new(2, 16).unwrap();
        let mut c = SpectralField::zeros(g, 2);
        c.coeffs_mut()[0] = Complex64::new(0.3, 0.0);
        c.coeffs_mut()[g.len()] = Complex64::new(-0.2, 0.0);
        let s = series_of(vec![c.clone(); 11], 0.1);
        let p = ParticleSet::new(2, vec![[0.9, 0.1], [0.5, 0.5]]);
        let out = advect(&s, &p, None, AdvectOptions::default()).unwrap();
        for (tr, x0) in out.tracks.iter().zip(&p.start) {
            let x = tr.x.last().unwrap();
            let ex = [(x0[0] + 0.3).rem_euclid(1.0), (x0[1] - 0.2).rem_euclid(1.0)];
            assert!(torus_distance(*x, ex) < 1e-13);
        }
        let z = series_of(vec![SpectralField::zeros(g, 2); 4], 0.1);
        let out = advect(&z, &p, None, AdvectOptions::default()).unwrap();
        assert_eq!(out.positions(), p.start);
    }

    #[test]
    fn substep_self_convergence_and_twins() {
        let g = GridSpec::new(2, 32).unwrap();
        let fields: Vec<SpectralField> = (0..6)
            .map(|i| {
                let a = random_field(g, 2, 6, 2.0, 10);
                let b = random_field(g, 2, 6, 2.0, 11);
                let th = i as f64 * 0.1;
                crate::ns::leray_project(&a.scaled(libm::cos(th)).plus(&b.scaled(libm::sin(th))).unwrap()).unwrap()
            })
            .collect();
        let s = series_of(fields, 0.02);
        let bank = LPBank::new(g, 0.5).unwrap();
        let p = ParticleSet::random(2, 10, 1);
        let o = AdvectOptions { band: Some(bank.k_max()), substeps: 8, ..Default::default() };
        let a = advect(&s, &p, Some(&bank), o).unwrap();
        let b = advect(&s, &p, Some(&bank), AdvectOptions { substeps: 16, ..o }).unwrap();
        for (x, y) in a.positions().iter().zip(b.positions()) {
            assert!(torus_distance(*x, y) <= 1e-8);
        }
        // coarse flow at the top band is the full flow
        let rep = gronwall_check(&a, bank.k_max(), &bank, 0.3, 1.0, 1e-3).unwrap();
        assert_eq!(rep.rows[0].lhs, 0.0);
        assert_eq!(rep.rows[0].ratio, 0.0);
        assert!(rep.rows.iter().all(|r| r.lhs < 1e-12));
        // appending continues from the last snapshot
        let first = advect(&s, &p, None, AdvectOptions { end_index: Some(2), ..Default::default() }).unwrap();
        let cont = advect(&s, &first, None, AdvectOptions { start_index: 2, ..Default::default() }).unwrap();
        let whole = advect(&s, &p, None, AdvectOptions::default()).unwrap();
        assert_eq!(cont.times, whole.times);
        assert!(advect(&s, &first, None, AdvectOptions { start_index: 3, ..Default::default() }).is_err());
        assert!(gronwall_check(&whole, 1, &bank, 0.3, 1.0, 1e-3).is_err());
    }

    fn synthetic(times: &[f64], f: impl Fn(f64) -> [f64; 2]) -> ParticleSet {
        let tr = Track { x: vec![[0.0; 2]; times.len()], u: times.iter().map(|&t| f(t)).collect(), twin: vec![] };
        ParticleSet::from_samples(2, times.to_vec(), vec![tr]).unwrap()
    }

    #[test]
    fn circular_motion_has_slope_one() {
        let times: Vec<f64> = (0..4001).map(|i| i as f64 * 1e-3).collect();
        let p = synthetic(&times, |t| [-libm::sin(t) / (2.0 * PI), libm::cos(t) / (2.0 * PI)]);
        let r = traj_holder(&p, 1, 1.0 / 3.0, 0.0, 1e-3, 1.0, LagGrid { max_fraction: 0.05, ..Default::default() }).unwrap();
        assert!((r.fitted_slope - 1.0).abs() <= 0.02, "{}", r.fitted_slope);
        let c = synthetic(&times, |_| [0.1, 0.2]);
        let r = traj_holder(&c, 1, 1.0 / 3.0, 0.0, 1e-3, 1.0, LagGrid::default()).unwrap();
        assert!(r.measured_pairs.iter().all(|p| p.1 == 0.0));
        assert!(r.fitted_slope.is_nan());
    }

    #[test]
    fn too_short_history_is_rejected() {
        let times: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let p = synthetic(&times, |t| [t, 0.0]);
        assert!(traj_holder(&p, 1, 0.3, 1.0, 1e-3, 1.0, LagGrid::default()).is_err());
    }
}
