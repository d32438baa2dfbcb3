//! Exact heat semigroup and the thin-annulus experiments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::bank::smooth_step;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::rng;
use crate::trig::TrigPoly;

const FOUR_PI2: f64 = 4.0 * PI * PI;

/// `e^{νtΔ}f`: multiply by `e^{−4π²νt|ξ|²}`.
pub fn heat_evolve(f: &SpectralField, nu: f64, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    if !(nu >= 0.0) {
        return Err(Error::param("nu", format!("must be nonnegative, got {nu}")));
    }
    let grid = f.grid();
    let s = FOUR_PI2 * nu * t;
    Ok(f.apply_symbol(|i| libm::exp(-s * grid.norm2(i))))
}

/// Thin frequency shell `R/(1+δ) < |ξ| < R(1+δ)` on a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnulusSpec {
    pub radius: f64,
    pub delta: f64,
    pub grid: GridSpec,
}

impl AnnulusSpec {
    pub fn new(radius: f64, delta: f64, grid: GridSpec) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::param("R", format!("must be positive, got {radius}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::param("delta", format!("must be nonnegative, got {delta}")));
        }
        let spec = AnnulusSpec { radius, delta, grid };
        if spec.lattice_support().is_empty() {
            return Err(Error::EmptyAnnulus);
        }
        Ok(spec)
    }

    /// Open shell membership; `δ = 0` degenerates to the sphere `|ξ| = R`.
    pub fn contains(&self, r: f64) -> bool {
        if self.delta == 0.0 {
            return (r - self.radius).abs() <= 1e-12 * self.radius;
        }
        let q = 1.0 + self.delta;
        r > self.radius / q && r < self.radius * q
    }

    /// Representable, non-Nyquist lattice points inside the shell, in FFT
    /// order.
    pub fn lattice_support(&self) -> Vec<[i64; 2]> {
        let g = self.grid;
        (0..g.len())
            .filter(|&i| !g.is_nyquist(i) && self.contains(libm::sqrt(g.norm2(i))))
            .map(|i| g.wavevector(i))
            .collect()
    }

    /// One representative of each `±ξ` pair in the support.
    fn half_support(&self) -> Vec<usize> {
        let g = self.grid;
        (0..g.len())
            .filter(|&i| !g.is_nyquist(i) && self.contains(libm::sqrt(g.norm2(i))))
            .filter(|&i| {
                let [a, b] = g.wavevector(i);
                a > 0 || (a == 0 && b > 0)
            })
            .collect()
    }
}

fn field_from_half(spec: &AnnulusSpec, reps: &[usize], params: &[f64]) -> SpectralField {
    let g = spec.grid;
    let mut f = SpectralField::zeros(g, 1);
    for (j, &i) in reps.iter().enumerate() {
        let c = Complex64::new(params[2 * j], params[2 * j + 1]);
        let k = g.conj_index(i);
        f.coeffs_mut()[i] = c;
        f.coeffs_mut()[k] = c.conj();
    }
    f
}

/// Random real scalar field with complex-Gaussian coefficients on the shell.
pub fn annulus_sample(spec: &AnnulusSpec, seed: u64) -> Result<SpectralField> {
    let reps = spec.half_support();
    if reps.is_empty() {
        return Err(Error::EmptyAnnulus);
    }
    let mut r = rng::rng_for(seed, 0xA22);
    let params: Vec<f64> = (0..2 * reps.len()).map(|_| StandardNormal.sample(&mut r)).collect();
    Ok(field_from_half(spec, &reps, &params))
}

/// Norm exponent `p ∈ {2, 4, 8, …} ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormExp {
    Finite(u32),
    Infinity,
}

impl NormExp {
    pub fn finite(p: u32) -> Result<Self> {
        if p < 2 || p % 2 != 0 {
            return Err(Error::param("p", format!("must be an even integer >= 2, got {p}")));
        }
        Ok(NormExp::Finite(p))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(NormExp::Infinity);
        }
        let p: u32 = t.parse().map_err(|_| Error::param("p", format!("cannot parse `{s}`")))?;
        NormExp::finite(p)
    }
}

impl core::fmt::Display for NormExp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NormExp::Finite(p) => write!(f, "{p}"),
            NormExp::Infinity => write!(f, "inf"),
        }
    }
}

const QUAD_CAP_1D: usize = 1 << 16;
const QUAD_CAP_2D: usize = 1 << 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    /// Points per dimension actually used.
    pub n: usize,
    /// `|value(n) − value(n/2)|` when the exact-resolution grid was capped,
    /// else 0.
    pub aliasing_estimate: f64,
}

fn quad_grid(f: &SpectralField, p: u32) -> (usize, bool) {
    let k = f.content_radius(0.0).max(1);
    let want = (p as usize * k + 1).next_power_of_two().max(f.grid().n());
    let cap = if f.grid().d() == 1 { QUAD_CAP_1D } else { QUAD_CAP_2D };
    if want > cap {
        (cap.max(f.grid().n()), true)
    } else {
        (want, false)
    }
}

/// `(∫(−Δf)·f|f|^{p−2}, ∫|f|^p)` on an `m`-point grid (means over the torus).
fn rayleigh_sums(f: &SpectralField, p: u32, m: usize) -> (f64, f64) {
    let up = f.resample(m).expect("quadrature grid");
    let lap = crate::field::laplacian(&up);
    let len = up.grid().len();
    let vals = up.to_physical();
    let lvals = lap.to_physical();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..len {
        let mut mag2 = 0.0;
        let mut dot = 0.0;
        for c in 0..f.components() {
            let v = vals[c * len + i];
            mag2 += v * v;
            dot -= lvals[c * len + i] * v;
        }
        let w = powi_half(mag2, p - 2);
        num += dot * w;
        den += w * mag2;
    }
    (num / len as f64, den / len as f64)
}

/// `|f|^q` from `|f|²` for even `q`.
fn powi_half(mag2: f64, q: u32) -> f64 {
    let mut out = 1.0;
    for _ in 0..q / 2 {
        out *= mag2;
    }
    out
}

/// `∫(−Δf)·f|f|^{p−2} / ∫|f|^p` with quadrature metadata.
pub fn dissipation_detail(f: &SpectralField, p: u32) -> Result<(f64, Quadrature)> {
    NormExp::finite(p)?;
    if f.is_zero() {
        return Err(Error::ZeroField);
    }
    let (m, capped) = quad_grid(f, p);
    let (num, den) = rayleigh_sums(f, p, m);
    let rate = num / den;
    let aliasing_estimate = if capped {
        let (n2, d2) = rayleigh_sums(f, p, m / 2);
        (rate - n2 / d2).abs()
    } else {
        0.0
    };
    Ok((rate, Quadrature { n: m, aliasing_estimate }))
}

/// Instantaneous dissipation rate of `‖f‖_p`; for `p = ∞` this is
/// [`laplacian_at_max`].
pub fn dissipation_rate(f: &SpectralField, p: NormExp) -> Result<f64> {
    match p {
        NormExp::Finite(p) => Ok(dissipation_detail(f, p)?.0),
        NormExp::Infinity => laplacian_at_max(f),
    }
}

/// `Σ 4π²|ξ|²|f̂|² / Σ|f̂|²`
pub fn parseval_rate(f: &SpectralField) -> Result<f64> {
    if f.is_zero() {
        return Err(Error::ZeroField);
    }
    let g = f.grid();
    let len = g.len();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, c) in f.coeffs().iter().enumerate() {
        let a = c.norm_sqr();
        num += FOUR_PI2 * g.norm2(i % len) * a;
        den += a;
    }
    Ok(num / den)
}

/// `‖f‖_p`, quadrature-exact for finite `p`, Newton-refined for `p = ∞`.
pub fn lp_norm(f: &SpectralField, p: NormExp) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    match p {
        NormExp::Finite(p) => {
            NormExp::finite(p)?;
            let (m, _) = quad_grid(f, p);
            let (_, den) = rayleigh_sums(f, p, m);
            Ok(libm::pow(den, 1.0 / p as f64))
        }
        NormExp::Infinity => Ok(refined_max(f)?.magnitude),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxPoint {
    pub x: [f64; 2],
    pub magnitude: f64,
    /// `−Δf·f / |f|²` at `x`.
    pub laplacian_ratio: f64,
}

const NEWTON_ITERS: usize = 20;
const CANDIDATES: usize = 8;

fn half_mag2(tp: &TrigPoly, x: [f64; 2], buf: &mut [f64]) -> f64 {
    tp.eval(x, buf);
    0.5 * buf.iter().map(|v| v * v).sum::<f64>()
}

fn newton_ascent(tp: &TrigPoly, d: usize, start: [f64; 2], h: f64) -> [f64; 2] {
    let mut x = start;
    let mut buf = vec![0.0; tp.components()];
    let mut g0 = half_mag2(tp, x, &mut buf);
    for _ in 0..NEWTON_ITERS {
        let jet = tp.jet(x);
        let (mut gr, mut hs) = ([0.0f64; 2], [0.0f64; 3]);
        for c in 0..tp.components() {
            let (v, dv, hv) = (jet.value[c], jet.grad[c], jet.hess[c]);
            gr[0] += v * dv[0];
            gr[1] += v * dv[1];
            hs[0] += dv[0] * dv[0] + v * hv[0];
            hs[1] += dv[0] * dv[1] + v * hv[1];
            hs[2] += dv[1] * dv[1] + v * hv[2];
        }
        let step = if d == 1 {
            if hs[0] >= 0.0 {
                break;
            }
            [-gr[0] / hs[0], 0.0]
        } else {
            let det = hs[0] * hs[2] - hs[1] * hs[1];
            if hs[0] >= 0.0 || det <= 0.0 {
                break;
            }
            [-(hs[2] * gr[0] - hs[1] * gr[1]) / det, -(-hs[1] * gr[0] + hs[0] * gr[1]) / det]
        };
        let len = libm::sqrt(step[0] * step[0] + step[1] * step[1]);
        if !(len.is_finite()) || len < 1e-16 {
            break;
        }
        // never leave the neighbourhood of the starting cell
        let mut s = if len > h { h / len } else { 1.0 };
        let mut moved = false;
        for _ in 0..12 {
            let y = [x[0] + s * step[0], x[1] + s * step[1]];
            let gy = half_mag2(tp, y, &mut buf);
            if gy >= g0 {
                x = y;
                g0 = gy;
                moved = true;
                break;
            }
            s *= 0.5;
        }
        if !moved {
            break;
        }
    }
    [x[0].rem_euclid(1.0), if d == 2 { x[1].rem_euclid(1.0) } else { 0.0 }]
}

/// Global maximum of `|f|`: grid search on a fine grid, then Newton ascent
/// on `|f|²` from the best few local maxima.
pub fn refined_max(f: &SpectralField) -> Result<MaxPoint> {
    if f.is_zero() {
        return Err(Error::ZeroField);
    }
    let g = f.grid();
    let d = g.d();
    let k = f.content_radius(0.0).max(1);
    let m = (8 * k).next_power_of_two().clamp(16, 4 * g.n()).max(g.n());
    let fine = f.resample(m)?;
    let fg = fine.grid();
    let mag = fine.magnitude_physical();
    let len = fg.len();
    let at = |i0: isize, i1: isize| -> f64 {
        let w = |i: isize| i.rem_euclid(m as isize) as usize;
        if d == 1 {
            mag[w(i0)]
        } else {
            mag[w(i0) * m + w(i1)]
        }
    };
    let mut cands: Vec<(f64, usize)> = Vec::new();
    for i in 0..len {
        let (i0, i1) = if d == 1 { (i as isize, 0) } else { ((i / m) as isize, (i % m) as isize) };
        let v = mag[i];
        let mut is_max = true;
        'nb: for a in -1..=1isize {
            for b in if d == 2 { -1..=1isize } else { 0..=0 } {
                if (a, b) != (0, 0) && at(i0 + a, i1 + b) > v {
                    is_max = false;
                    break 'nb;
                }
            }
        }
        if is_max {
            cands.push((v, i));
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    cands.truncate(CANDIDATES);
    let tp = TrigPoly::new(f);
    let h = 1.0 / m as f64;
    let mut best: Option<([f64; 2], f64)> = None;
    let mut buf = vec![0.0; f.components()];
    for &(v, i) in &cands {
        let start = fg.point(i);
        let x = newton_ascent(&tp, d, start, h);
        let mut val = libm::sqrt(2.0 * half_mag2(&tp, x, &mut buf));
        let mut xb = x;
        if val < v {
            xb = start;
            val = libm::sqrt(2.0 * half_mag2(&tp, start, &mut buf));
        }
        if best.map_or(true, |(_, b)| val > b) {
            best = Some((xb, val));
        }
    }
    let (x, magnitude) = best.expect("a nonzero field has a grid maximum");
    let jet = tp.jet(x);
    let mut dot = 0.0;
    let mut m2 = 0.0;
    for c in 0..f.components() {
        let lap = jet.hess[c][0] + if d == 2 { jet.hess[c][2] } else { 0.0 };
        dot -= lap * jet.value[c];
        m2 += jet.value[c] * jet.value[c];
    }
    Ok(MaxPoint { x, magnitude, laplacian_ratio: dot / m2 })
}

/// `−Δf(x*)·f(x*) / |f(x*)|²` at the maximum point of `|f|`.
pub fn laplacian_at_max(f: &SpectralField) -> Result<f64> {
    Ok(refined_max(f)?.laplacian_ratio)
}

/// Cutoff `φ` with `χ_{|x|≤1} ≤ φ ≤ χ_{|x|≤2}`.
pub fn phi(x: f64) -> f64 {
    1.0 - smooth_step(x.abs() - 1.0)
}

/// `T̂f(ξ) = 4π²(|ξ|²−R²)·φ((|ξ|−R)/(Rδ))·f̂(ξ)`.
pub fn multiplier_t(f: &SpectralField, spec: &AnnulusSpec) -> SpectralField {
    let g = f.grid();
    let (r, rd) = (spec.radius, spec.radius * spec.delta);
    f.apply_symbol(|i| {
        let k2 = g.norm2(i);
        let x = if rd > 0.0 { (libm::sqrt(k2) - r) / rd } else if libm::sqrt(k2) == r { 0.0 } else { f64::INFINITY };
        FOUR_PI2 * (k2 - r * r) * phi(x)
    })
}

/// `max ‖Tf‖_∞ / ‖f‖_∞` over random shell samples.
pub fn multiplier_norm_probe(spec: &AnnulusSpec, samples: usize, seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in 0..samples {
        let f = annulus_sample(spec, rng::derive(seed, s as u64))?;
        let tf = multiplier_t(&f, spec);
        if tf.is_zero() {
            continue;
        }
        worst = worst.max(refined_max(&tf)?.magnitude / refined_max(&f)?.magnitude);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub d: usize,
    pub radius: f64,
    pub delta: f64,
    pub p: NormExp,
    pub seed: u64,
    /// `t = 0` rows carry the instantaneous rate.
    pub t: f64,
    pub lhs_norm: f64,
    pub bound_rhs: f64,
    /// Measured decay rate over `4π²R²`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub radius: f64,
    pub delta: f64,
    pub p: NormExp,
    pub samples: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Lattice frequencies in the shell.
    pub support: Vec<[i64; 2]>,
}

/// `count` log-spaced times in `[10⁻⁴/R², 1/R²]`.
pub fn decay_times(radius: f64, count: usize) -> Vec<f64> {
    let (a, b) = (libm::log(1e-4), 0.0);
    (0..count)
        .map(|i| {
            let s = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            libm::exp(a + s * (b - a)) / (radius * radius)
        })
        .collect()
}

/// Heat decay of `‖e^{tΔ}f‖_p` for shell samples with seeds `seeds`,
/// checked against `e^{−4π²(1−ε)R²t}‖f‖_p`.
pub fn decay_experiment(
    spec: &AnnulusSpec,
    p: NormExp,
    seeds: &[u64],
    times: &[f64],
    epsilon: f64,
) -> Result<(Vec<DecayRow>, DecayReport)> {
    let rr = FOUR_PI2 * spec.radius * spec.radius;
    let mut rows = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &seed in seeds {
        let f = annulus_sample(spec, seed)?;
        let n0 = lp_norm(&f, p)?;
        let inst = dissipation_rate(&f, p)? / rr;
        rows.push(DecayRow {
            d: spec.grid.d(),
            radius: spec.radius,
            delta: spec.delta,
            p,
            seed,
            t: 0.0,
            lhs_norm: n0,
            bound_rhs: n0,
            ratio: inst,
        });
        lo = lo.min(inst);
        hi = hi.max(inst);
        for &t in times {
            let ft = heat_evolve(&f, 1.0, t)?;
            let nt = lp_norm(&ft, p)?;
            let ratio = -libm::log(nt / n0) / (rr * t);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            rows.push(DecayRow {
                d: spec.grid.d(),
                radius: spec.radius,
                delta: spec.delta,
                p,
                seed,
                t,
                lhs_norm: nt,
                bound_rhs: libm::exp(-(1.0 - epsilon) * rr * t) * n0,
                ratio,
            });
        }
    }
    let report = DecayReport {
        radius: spec.radius,
        delta: spec.delta,
        p,
        samples: seeds.len(),
        min_ratio: lo,
        max_ratio: hi,
        support: spec.lattice_support(),
    };
    Ok((rows, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult {
    pub delta_ok: bool,
    pub worst_ratio: f64,
    pub worst_field: SpectralField,
    pub evaluations: usize,
}

/// Adversarial search for shell functions whose maximum is weakly
/// dissipated: minimize `laplacian_at_max(f)/(4π²R²)` by random restarts
/// and coordinate descent on the shell coefficients. `init` (projected onto
/// the shell) seeds the first restart.
pub fn probe_delta(
    epsilon: f64,
    spec: &AnnulusSpec,
    budget: usize,
    seed: u64,
    init: Option<&SpectralField>,
) -> Result<ProbeResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("must lie in (0,1), got {epsilon}")));
    }
    if budget == 0 {
        return Err(Error::param("budget", "must be at least 1"));
    }
    let reps = spec.half_support();
    if reps.is_empty() {
        return Err(Error::EmptyAnnulus);
    }
    if spec.grid.d() != init.map_or(spec.grid.d(), |f| f.grid().d()) {
        return Err(Error::Shape("seed field dimension differs from the annulus grid".into()));
    }
    let rr = FOUR_PI2 * spec.radius * spec.radius;
    let objective = |params: &[f64]| -> f64 {
        let f = field_from_half(spec, &reps, params);
        if f.is_zero() {
            return f64::INFINITY;
        }
        laplacian_at_max(&f).map(|v| v / rr).unwrap_or(f64::INFINITY)
    };
    let dim = 2 * reps.len();
    let mut r = rng::rng_for(seed, 0x9B0BE);
    let mut evals = 0usize;
    let mut best_val = f64::INFINITY;
    let mut best: Vec<f64> = vec![0.0; dim];
    let mut restart = 0usize;
    while evals < budget {
        let mut x: Vec<f64> = match (restart, init) {
            (0, Some(f0)) => {
                let f0 = f0.resample(spec.grid.n())?;
                reps.iter()
                    .flat_map(|&i| {
                        let c = f0.coeffs()[i];
                        [c.re, c.im]
                    })
                    .collect()
            }
            _ => (0..dim).map(|_| StandardNormal.sample(&mut r)).collect(),
        };
        restart += 1;
        let mut fx = objective(&x);
        evals += 1;
        let scale = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / dim as f64).max(1e-3);
        let mut step = 0.5 * scale;
        let mut since_restart = 0usize;
        while evals < budget && step > 1e-6 * scale && since_restart < 40 * dim + 200 {
            let mut improved = false;
            let order: Vec<usize> = {
                let mut o: Vec<usize> = (0..dim).collect();
                for i in (1..dim).rev() {
                    let j = r.gen_range(0..=i);
                    o.swap(i, j);
                }
                o
            };
            for i in order {
                for sgn in [1.0, -1.0] {
                    if evals >= budget {
                        break;
                    }
                    let old = x[i];
                    x[i] = old + sgn * step;
                    let fy = objective(&x);
                    evals += 1;
                    since_restart += 1;
                    if fy < fx {
                        fx = fy;
                        improved = true;
                        break;
                    }
                    x[i] = old;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if fx < best_val {
            best_val = fx;
            best = x.clone();
        }
    }
    let worst_field = field_from_half(spec, &reps, &best);
    Ok(ProbeResult { delta_ok: best_val >= 1.0 - epsilon, worst_ratio: best_val, worst_field, evaluations: evals })
}

/// `∫(−Δf)f|f|^{p−2} / (R²∫|f|^p)` with `R = √(min|ξ|·max|ξ|)` over the
/// support; the support must fit in `C⁻¹R ≤ |ξ| ≤ CR`.
pub fn cp_probe(f: &SpectralField, p: u32, c_shell: f64) -> Result<f64> {
    if f.is_zero() {
        return Err(Error::ZeroField);
    }
    if !(c_shell >= 1.0) {
        return Err(Error::param("C_shell", format!("must be at least 1, got {c_shell}")));
    }
    let g = f.grid();
    let len = g.len();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (i, c) in f.coeffs().iter().enumerate() {
        if c.re != 0.0 || c.im != 0.0 {
            let r = libm::sqrt(g.norm2(i % len));
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if lo == 0.0 {
        return Err(Error::SupportOutsideShell("the mean mode is not in any annulus".into()));
    }
    if hi / lo > c_shell * c_shell * (1.0 + 1e-12) {
        return Err(Error::SupportOutsideShell(format!(
            "support radii [{lo}, {hi}] do not fit a shell of ratio C² = {}",
            c_shell * c_shell
        )));
    }
    let r2 = lo * hi;
    Ok(dissipation_detail(f, p)?.0 / r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(g: GridSpec, k: [i64; 2], a: f64) -> SpectralField {
        let mut f = SpectralField::zeros(g, 1);
        let i = g.index_of(k).unwrap();
        let j = g.index_of([-k[0], -k[1]]).unwrap();
        f.coeffs_mut()[i] += Complex64::new(a / 2.0, 0.0);
        f.coeffs_mut()[j] += Complex64::new(a / 2.0, 0.0);
        f
    }

    pub(crate) fn appendix(g: GridSpec) -> SpectralField {
        cosine(g, [1, 0], 9.0 / 8.0).plus(&cosine(g, [3, 0], -1.0 / 8.0)).unwrap()
    }

    #[test]
    fn heat_single_mode_and_semigroup() {
        let g = GridSpec::new(1, 32).unwrap();
        let f = cosine(g, [1, 0], 1.0);
        let e = heat_evolve(&f, 1.0, 0.01).unwrap();
        let amp = 2.0 * e.coeffs()[1].re;
        assert!((amp - libm::exp(-FOUR_PI2 * 0.01)).abs() < 1e-15);
        assert!((amp - 0.67389).abs() < 1e-4);
        assert_eq!(heat_evolve(&f, 1.0, 0.0).unwrap(), f);
        let two = heat_evolve(&heat_evolve(&f, 1.0, 0.005).unwrap(), 1.0, 0.005).unwrap();
        assert!(two.max_abs_diff(&e).unwrap() <= 1e-13);
        assert!(heat_evolve(&f, 1.0, -1.0).is_err());
    }

    #[test]
    fn annulus_support_and_symmetry() {
        let g = GridSpec::new(2, 32).unwrap();
        let spec = AnnulusSpec::new(4.0, 0.3, g).unwrap();
        let f = annulus_sample(&spec, 3).unwrap();
        assert_eq!(f, annulus_sample(&spec, 3).unwrap());
        assert!(f.hermitian_defect() == 0.0);
        let len = g.len();
        let mut count = 0;
        for i in 0..len {
            if f.coeffs()[i].norm() > 0.0 {
                let r = libm::sqrt(g.norm2(i));
                assert!(r > 4.0 / 1.3 && r < 5.2);
                count += 1;
            }
        }
        assert!(count > 0);
        assert!(matches!(AnnulusSpec::new(4.2, 0.01, g), Err(Error::EmptyAnnulus)));
    }

    #[test]
    fn eigenfunction_rates() {
        let g = GridSpec::new(1, 64).unwrap();
        let f = cosine(g, [7, 0], 1.3);
        let ex = FOUR_PI2 * 49.0;
        assert!((dissipation_rate(&f, NormExp::Finite(2)).unwrap() / ex - 1.0).abs() < 1e-12);
        assert!((dissipation_rate(&f, NormExp::Finite(8)).unwrap() / ex - 1.0).abs() < 1e-12);
        assert!((laplacian_at_max(&f).unwrap() / ex - 1.0).abs() < 1e-12);
        let g2 = GridSpec::new(2, 32).unwrap();
        let f2 = cosine(g2, [3, 4], 1.0);
        assert!((laplacian_at_max(&f2).unwrap() / (FOUR_PI2 * 25.0) - 1.0).abs() < 1e-12);
        assert!(dissipation_rate(&SpectralField::zeros(g, 1), NormExp::Finite(2)).is_err());
    }

    #[test]
    fn parseval_cross_check() {
        let g = GridSpec::new(2, 32).unwrap();
        let spec = AnnulusSpec::new(6.0, 0.2, g).unwrap();
        let f = annulus_sample(&spec, 9).unwrap();
        let a = dissipation_rate(&f, NormExp::Finite(2)).unwrap();
        let b = parseval_rate(&f).unwrap();
        assert!((a / b - 1.0).abs() < 1e-10);
    }

    #[test]
    fn appendix_function_is_flat_at_its_max() {
        let g = GridSpec::new(1, 32).unwrap();
        let f = appendix(g);
        let m = refined_max(&f).unwrap();
        assert!((m.magnitude - 1.0).abs() < 1e-12);
        assert!(m.laplacian_ratio.abs() < 1e-8);
    }

    #[test]
    fn max_found_off_grid() {
        // cos(2π·3(x − 0.0123)) peaks between grid points
        let g = GridSpec::new(1, 16).unwrap();
        let mut f = SpectralField::zeros(g, 1);
        let ph = Complex64::from_polar(0.5, -2.0 * PI * 3.0 * 0.0123);
        f.coeffs_mut()[3] = ph;
        f.coeffs_mut()[13] = ph.conj();
        let m = refined_max(&f).unwrap();
        assert!((m.magnitude - 1.0).abs() < 1e-13);
        assert!((m.laplacian_ratio / (FOUR_PI2 * 9.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn multiplier_matches_shifted_laplacian_on_shell() {
        let g = GridSpec::new(2, 64).unwrap();
        let spec = AnnulusSpec::new(10.0, 0.1, g).unwrap();
        let f = annulus_sample(&spec, 1).unwrap();
        let tf = multiplier_t(&f, &spec);
        let mut ex = crate::field::laplacian(&f).scaled(-1.0);
        ex.axpy(-FOUR_PI2 * 100.0, &f).unwrap();
        assert!(tf.max_abs_diff(&ex).unwrap() <= 1e-12 * FOUR_PI2 * 100.0);
        let g1 = GridSpec::new(1, 64).unwrap();
        let single = AnnulusSpec::new(16.0, 0.02, g1).unwrap();
        assert!(multiplier_t(&annulus_sample(&single, 0).unwrap(), &single).is_zero());
    }

    #[test]
    fn single_shell_probe_is_exact() {
        let g = GridSpec::new(1, 64).unwrap();
        let spec = AnnulusSpec::new(16.0, 0.0, g).unwrap();
        let r = probe_delta(0.5, &spec, 50, 1, None).unwrap();
        assert!((r.worst_ratio - 1.0).abs() < 1e-9);
        assert!(r.delta_ok);
    }

    #[test]
    fn appendix_seed_breaks_wide_annulus() {
        let g = GridSpec::new(1, 32).unwrap();
        let spec = AnnulusSpec::new(libm::sqrt(3.0), 0.75, g).unwrap();
        let f = appendix(g);
        let r = probe_delta(0.01, &spec, 30, 2, Some(&f)).unwrap();
        assert!(r.worst_ratio <= 1e-6);
        assert!(!r.delta_ok);
    }

    #[test]
    fn cp_probe_values() {
        let g = GridSpec::new(1, 64).unwrap();
        let e = cosine(g, [5, 0], 1.0);
        assert!((cp_probe(&e, 2, 1.0).unwrap() / FOUR_PI2 - 1.0).abs() < 1e-12);
        let f = appendix(g);
        let mut prev = f64::INFINITY;
        for p in [2u32, 4, 8, 16, 32, 64] {
            let v = cp_probe(&f, p, libm::sqrt(3.0)).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(matches!(cp_probe(&f, 2, 1.5), Err(Error::SupportOutsideShell(_))));
    }
}
