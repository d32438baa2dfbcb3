//! Spatial, Eulerian-temporal and Lagrangian structure functions and their
//! log-log exponent fits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::lagrangian::{eval_velocity, ParticleSet};
use crate::ns::SnapshotSeries;
use crate::rng;
use crate::stats::{loglog, LineFit};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SfKind {
    Spatial,
    EulerianTemporal,
    Lagrangian,
}

impl SfKind {
    pub fn name(&self) -> &'static str {
        match self {
            SfKind::Spatial => "spatial",
            SfKind::EulerianTemporal => "eulerian_temporal",
            SfKind::Lagrangian => "lagrangian",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spatial" => Ok(SfKind::Spatial),
            "eulerian" | "eulerian_temporal" => Ok(SfKind::EulerianTemporal),
            "lagrangian" => Ok(SfKind::Lagrangian),
            other => Err(Error::param("kind", format!("unknown structure function `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SfFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    /// Abscissa range `[lo, hi]` of the fitted points.
    pub window: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureFunctionTable {
    pub kind: SfKind,
    pub p: u32,
    /// Separations `ℓ` or lags `τ`, strictly increasing.
    pub abscissae: Vec<f64>,
    /// `⟨|increment|^p⟩^{1/p}`
    pub values: Vec<f64>,
    pub samples: usize,
    pub fit: Option<SfFit>,
}

impl StructureFunctionTable {
    /// Fill `fit` with the automatic window, if one exists.
    pub fn with_auto_fit(mut self) -> Self {
        self.fit = auto_window(&self).ok().and_then(|w| fit_window(&self, w).ok());
        self
    }
}

fn check_increasing(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() || v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("abscissae", format!("{what} must be nonempty and strictly increasing")));
    }
    Ok(())
}

fn power_mean(sum: f64, count: usize, p: u32) -> f64 {
    if count == 0 {
        return 0.0;
    }
    libm::pow(sum / count as f64, 1.0 / p as f64)
}

/// Latin-hypercube points in `[0,1)^dims`.
fn lhs(count: usize, dims: usize, r: &mut rng::Rng) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(dims);
    for _ in 0..dims {
        let mut perm: Vec<usize> = (0..count).collect();
        perm.shuffle(r);
        cols.push(perm.into_iter().map(|s| (s as f64 + r.gen::<f64>()) / count as f64).collect::<Vec<f64>>());
    }
    (0..count).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialOptions {
    pub samples: usize,
    pub seed: u64,
    /// Shift applied to every sample point.
    pub origin: [f64; 2],
}

impl Default for SpatialOptions {
    fn default() -> Self {
        SpatialOptions { samples: 10_000, seed: 0, origin: [0.0; 2] }
    }
}

/// Sampled `|u(x + ℓe) − u(x)|` for each separation: `out[l][sample]`.
fn spatial_increments(u_hat: &SpectralField, separations: &[f64], opts: SpatialOptions) -> Result<Vec<Vec<f64>>> {
    check_increasing(separations, "separations")?;
    if separations.iter().any(|&l| !(l > 0.0 && l < 0.5)) {
        return Err(Error::param("separations", "every separation must lie in (0, 1/2)"));
    }
    let d = u_hat.grid().d();
    let mut r = rng::rng_for(opts.seed, 0x5F);
    // point coordinates plus the direction angle
    let pts = lhs(opts.samples.max(1), d + 1, &mut r);
    let xs: Vec<[f64; 2]> = pts
        .iter()
        .map(|p| [p[0] + opts.origin[0], if d == 2 { p[1] + opts.origin[1] } else { 0.0 }])
        .collect();
    let dirs: Vec<[f64; 2]> = pts
        .iter()
        .map(|p| {
            if d == 1 {
                [1.0, 0.0]
            } else {
                let th = 2.0 * PI * p[2];
                [libm::cos(th), libm::sin(th)]
            }
        })
        .collect();
    let base = eval_velocity(u_hat, &xs);
    let mut out = Vec::with_capacity(separations.len());
    for &l in separations {
        let shifted: Vec<[f64; 2]> = xs.iter().zip(&dirs).map(|(x, e)| [x[0] + l * e[0], x[1] + l * e[1]]).collect();
        let v = eval_velocity(u_hat, &shifted);
        out.push(
            v.iter()
                .zip(&base)
                .map(|(a, b)| libm::sqrt((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)))
                .collect(),
        );
    }
    Ok(out)
}

fn table_from(kind: SfKind, p: u32, abscissae: Vec<f64>, incs: &[Vec<f64>]) -> StructureFunctionTable {
    let values = incs
        .iter()
        .map(|row| power_mean(row.iter().map(|v| libm::pow(*v, p as f64)).sum(), row.len(), p))
        .collect();
    let samples = incs.first().map_or(0, |r| r.len());
    StructureFunctionTable { kind, p, abscissae, values, samples, fit: None }
}

fn check_p(p: u32) -> Result<()> {
    if !(1..=4).contains(&p) {
        return Err(Error::param("p", format!("moment order must be 1..=4, got {p}")));
    }
    Ok(())
}

/// `⟨|u(x+ℓe) − u(x)|^p⟩^{1/p}` over Latin-hypercube points `x` and
/// directions `e`.
pub fn spatial_sf(u_hat: &SpectralField, p: u32, separations: &[f64], opts: SpatialOptions) -> Result<StructureFunctionTable> {
    check_p(p)?;
    let incs = spatial_increments(u_hat, separations, opts)?;
    Ok(table_from(SfKind::Spatial, p, separations.to_vec(), &incs))
}

/// Several moment orders from the same samples.
pub fn spatial_sf_multi(u_hat: &SpectralField, ps: &[u32], separations: &[f64], opts: SpatialOptions) -> Result<Vec<StructureFunctionTable>> {
    ps.iter().try_for_each(|&p| check_p(p))?;
    let incs = spatial_increments(u_hat, separations, opts)?;
    Ok(ps.iter().map(|&p| table_from(SfKind::Spatial, p, separations.to_vec(), &incs)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalOptions {
    /// Eulerian probe count.
    pub probes: usize,
    pub seed: u64,
    /// Only start times `t ≥ t_min` enter the average.
    pub t_min: f64,
}

impl Default for TemporalOptions {
    fn default() -> Self {
        TemporalOptions { probes: 256, seed: 0, t_min: 0.0 }
    }
}

fn uniform_dt(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Insufficient("fewer than two samples in time".into()));
    }
    let h = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::Missing("samples are not uniformly spaced in time".into()));
    }
    Ok(h)
}

/// Increments for each lag from a `[time][probe]` table of values.
fn temporal_increments(samples: &[Vec<[f64; 2]>], times: &[f64], lags: &[usize], t_min: f64) -> Result<Vec<Vec<f64>>> {
    let n = samples.len();
    let first = times.iter().position(|&t| t >= t_min).ok_or_else(|| {
        Error::Insufficient(format!("no samples at or after t = {t_min}"))
    })?;
    let mut out = Vec::with_capacity(lags.len());
    for &lag in lags {
        if lag == 0 || first + lag >= n {
            return Err(Error::param(
                "lags",
                format!("lag of {lag} samples does not fit the usable span of {} samples", n - first),
            ));
        }
        let mut row = Vec::new();
        for i in first..n - lag {
            for (a, b) in samples[i + lag].iter().zip(&samples[i]) {
                row.push(libm::sqrt((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)));
            }
        }
        out.push(row);
    }
    Ok(out)
}

fn check_lags(lags: &[usize]) -> Result<()> {
    if lags.is_empty() || lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("lags", "lags must be nonempty and strictly increasing"));
    }
    Ok(())
}

/// `⟨|u(t+τ,x) − u(t,x)|^p⟩^{1/p}` over fixed random probes and start times.
pub fn eulerian_sf(series: &SnapshotSeries, p: u32, lags: &[usize], opts: TemporalOptions) -> Result<StructureFunctionTable> {
    check_p(p)?;
    check_lags(lags)?;
    let dt = uniform_dt(&series.times)?;
    let d = series.grid.d();
    let mut r = rng::rng_for(opts.seed, 0xE1);
    let probes: Vec<[f64; 2]> = lhs(opts.probes.max(1), d, &mut r)
        .into_iter()
        .map(|p| [p[0], if d == 2 { p[1] } else { 0.0 }])
        .collect();
    let samples: Vec<Vec<[f64; 2]>> = series.fields.iter().map(|f| eval_velocity(f, &probes)).collect();
    let incs = temporal_increments(&samples, &series.times, lags, opts.t_min)?;
    Ok(table_from(SfKind::EulerianTemporal, p, lags.iter().map(|&l| l as f64 * dt).collect(), &incs))
}

/// `⟨|u(t+τ, X(t+τ)) − u(t, X(t))|^p⟩^{1/p}` along recorded trajectories.
pub fn lagrangian_sf(particles: &ParticleSet, p: u32, lags: &[usize], opts: TemporalOptions) -> Result<StructureFunctionTable> {
    check_p(p)?;
    check_lags(lags)?;
    let dt = uniform_dt(&particles.times)?;
    let n = particles.times.len();
    let samples: Vec<Vec<[f64; 2]>> = (0..n).map(|i| particles.tracks.iter().map(|t| t.u[i]).collect()).collect();
    let incs = temporal_increments(&samples, &particles.times, lags, opts.t_min)?;
    Ok(table_from(SfKind::Lagrangian, p, lags.iter().map(|&l| l as f64 * dt).collect(), &incs))
}

pub enum Frame<'a> {
    Eulerian,
    Lagrangian(&'a ParticleSet),
}

pub fn temporal_sf(series: &SnapshotSeries, p: u32, lags: &[usize], frame: Frame<'_>, opts: TemporalOptions) -> Result<StructureFunctionTable> {
    match frame {
        Frame::Eulerian => eulerian_sf(series, p, lags, opts),
        Frame::Lagrangian(ps) => lagrangian_sf(ps, p, lags, opts),
    }
}

/// Index range `[lo, hi]` (inclusive) of table rows.
pub type Window = (usize, usize);

pub fn fit_window(table: &StructureFunctionTable, w: Window) -> Result<SfFit> {
    let f = fit_exponent(table, w)?;
    Ok(SfFit { slope: f.slope, intercept: f.intercept, stderr: f.stderr, r2: f.r2, window: (table.abscissae[w.0], table.abscissae[w.1]) })
}

/// Least squares in log-log over rows `w.0..=w.1`; needs 4 or more points,
/// all positive.
pub fn fit_exponent(table: &StructureFunctionTable, w: Window) -> Result<LineFit> {
    let (lo, hi) = w;
    if hi >= table.values.len() || lo > hi {
        return Err(Error::param("window", format!("rows {lo}..={hi} outside a table of {} rows", table.values.len())));
    }
    if hi - lo + 1 < 4 {
        return Err(Error::Insufficient(format!("{} points in the fit window, need at least 4", hi - lo + 1)));
    }
    loglog(&table.abscissae[lo..=hi], &table.values[lo..=hi])
}

/// Rows whose abscissae fall in `[a, b]`.
pub fn window_for_range(table: &StructureFunctionTable, a: f64, b: f64) -> Result<Window> {
    let idx: Vec<usize> = (0..table.abscissae.len()).filter(|&i| table.abscissae[i] >= a && table.abscissae[i] <= b).collect();
    match (idx.first(), idx.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::param("window", format!("no abscissae in [{a}, {b}]"))),
    }
}

/// Widest log-interval with `r² ≥ 0.98` and at least 4 positive points;
/// ties go to the higher `r²`.
pub fn auto_window(table: &StructureFunctionTable) -> Result<Window> {
    let n = table.values.len();
    let mut best: Option<(f64, f64, Window)> = None;
    for lo in 0..n {
        for hi in lo + 3..n {
            if table.values[lo..=hi].iter().any(|v| !(*v > 0.0)) {
                break;
            }
            let Ok(f) = fit_exponent(table, (lo, hi)) else { continue };
            if f.r2 < 0.98 {
                continue;
            }
            let width = libm::log(table.abscissae[hi] / table.abscissae[lo]);
            let better = match best {
                None => true,
                Some((bw, br, _)) => width > bw + 1e-12 || ((width - bw).abs() <= 1e-12 && f.r2 > br),
            };
            if better {
                best = Some((width, f.r2, (lo, hi)));
            }
        }
    }
    best.map(|b| b.2).ok_or_else(|| Error::Insufficient("no window of 4+ points with r² ≥ 0.98".into()))
}

/// `count` log-spaced values in `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| libm::exp(libm::log(lo) + (libm::log(hi) - libm::log(lo)) * i as f64 / (count - 1) as f64))
        .collect()
}
