//! Reynolds stress, LP forcing, material derivatives and the bound reports
//! built from them on solver snapshots.
//!
//! All products are formed on a padded grid (2×, or 4× when a second
//! material derivative or a differentiated stress is needed) so nothing
//! aliases. Right-hand sides use `C = 1`; what is checked is how the ratios
//! behave across `k`, `t` and `ν`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::bank::{holder_norm, LPBank};
use crate::error::{Error, Result};
use crate::field::{advect, gradient, laplacian, outer, row_divergence, sup_norm, SpectralField};
use crate::heat::heat_evolve;
use crate::ns::{pressure, SnapshotSeries};
use crate::report::{BoundParams, BoundReport, EstimateId};

const FOUR_PI2: f64 = 4.0 * PI * PI;

/// Spectral upsampling by an integer power of two.
pub fn pad(f: &SpectralField, factor: usize) -> Result<SpectralField> {
    f.resample(f.grid().n() * factor.max(1).next_power_of_two())
}

/// Sup over the grid points. Callers work on padded grids, so band-limited
/// content is sampled at several points per wavelength.
fn sup(f: &SpectralField) -> f64 {
    sup_norm(f, 1)
}

/// `R_{≤k} = P_{≤k}u⊗P_{≤k}u − P_{≤k}(u⊗u)`, component `i·d + j`.
/// The grid must resolve the products.
pub fn reynolds_stress(u_hat: &SpectralField, bank: &LPBank, k: i32) -> Result<SpectralField> {
    let low = bank.leq(u_hat, k)?;
    let full = bank.leq(&outer(u_hat, u_hat)?, k)?;
    outer(&low, &low)?.minus(&full)
}

/// The four pieces of `R_{≤k}` (high-high, high-low, low-high, low-low).
#[derive(Clone, Debug, PartialEq)]
pub struct StressPieces {
    pub hh: SpectralField,
    pub hl: SpectralField,
    pub lh: SpectralField,
    pub ll: SpectralField,
}

impl StressPieces {
    pub fn sum(&self) -> Result<SpectralField> {
        self.hh.plus(&self.hl)?.plus(&self.lh)?.plus(&self.ll)
    }
}

/// Split `R_{≤k}` by where the factors live. With `L = P_{≤k}u`,
/// `H = P_{>k}u` and the increment `L(·) − L(x)` frozen at the output point:
///
/// - `HH = −P_{≤k}(H⊗H)`
/// - `HL = −P_{≤k}(H⊗(L − L(x)))`, `LH` its transpose
/// - `LL = −P_{≤k}((L − L(x))⊗(L − L(x)))`
///
/// Signs are chosen so the pieces add up to `R_{≤k}` as defined above.
pub fn stress_decomposition(u_hat: &SpectralField, bank: &LPBank, k: i32) -> Result<StressPieces> {
    let low = bank.leq(u_hat, k)?;
    let high = bank.greater(u_hat, k)?;
    let p_high = bank.leq(&high, k)?;
    let p_low = bank.leq(&low, k)?;
    let hh = bank.leq(&outer(&high, &high)?, k)?.scaled(-1.0);
    // P(H⊗(L − c)) at x = P(H⊗L) − P(H)⊗L
    let hl = outer(&p_high, &low)?.minus(&bank.leq(&outer(&high, &low)?, k)?)?;
    let lh = outer(&low, &p_high)?.minus(&bank.leq(&outer(&low, &high)?, k)?)?;
    // P((L−c)⊗(L−c)) at x = P(L⊗L) − P(L)⊗L − L⊗P(L) + L⊗L
    let mut ll = outer(&p_low, &low)?.plus(&outer(&low, &p_low)?)?;
    ll.axpy(-1.0, &bank.leq(&outer(&low, &low)?, k)?)?;
    ll.axpy(-1.0, &outer(&low, &low)?)?;
    Ok(StressPieces { hh, hl, lh, ll })
}

/// `F_k = −P_ku·∇P_{≤k−1}u − ∇P_kp + div R_{≤k} − div R_{≤k−1}`, the
/// forcing in the evolution of `P_ku` along the coarse flow.
pub fn forcing_fk(u_hat: &SpectralField, bank: &LPBank, k: i32) -> Result<SpectralField> {
    if k < bank.k_min() {
        return Err(Error::BandOutOfRange { k: k - 1, lo: bank.k_min() - 1, hi: bank.k_max() });
    }
    let pk = bank.project(u_hat, k)?;
    let below = bank.leq(u_hat, k - 1)?;
    let mut f = advect(&pk, &below)?.scaled(-1.0);
    let p = bank.project(&pressure(u_hat)?, k)?;
    f.axpy(-1.0, &gradient(&p))?;
    f.axpy(1.0, &row_divergence(&reynolds_stress(u_hat, bank, k)?)?)?;
    f.axpy(-1.0, &row_divergence(&reynolds_stress(u_hat, bank, k - 1)?)?)?;
    Ok(f)
}

/// Which LP piece a material derivative starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Piece {
    /// `P_{≤k}u`
    Leq,
    /// `P_ku`
    Band,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialDerivField {
    pub order: u32,
    pub k: i32,
    pub piece: Piece,
    pub t_index: usize,
    pub t: f64,
    /// Half-width of the centered time stencil, in snapshots.
    pub half_width: usize,
    /// Snapshot spacing used by the stencil.
    pub dt: f64,
    /// Lives on the padded grid.
    pub field: SpectralField,
}

fn snapshot_step(series: &SnapshotSeries) -> Result<f64> {
    if series.times.len() < 2 {
        return Ok(series.snapshot_dt());
    }
    let h = series.times[1] - series.times[0];
    for w in series.times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::Missing("snapshot times are not uniformly spaced".into()));
        }
    }
    Ok(h)
}

/// Padded snapshots `center−half ..= center+half`.
fn padded_window(series: &SnapshotSeries, center: usize, half: usize, factor: usize) -> Result<Vec<SpectralField>> {
    if center < half || center + half >= series.len() {
        return Err(Error::StencilBoundary { index: center, half_width: half, len: series.len() });
    }
    (center - half..=center + half).map(|i| pad(&series.fields[i], factor)).collect()
}

/// One application of `∂_t + v·∇` to a family sampled on a uniform time
/// window; the result is two samples shorter (centered differences).
fn d_apply(vel: &[SpectralField], fam: &[SpectralField], dt: f64) -> Result<Vec<SpectralField>> {
    if vel.len() != fam.len() || fam.len() < 3 {
        return Err(Error::Shape("time window too short for a centered difference".into()));
    }
    let mut out = Vec::with_capacity(fam.len() - 2);
    for j in 1..fam.len() - 1 {
        let mut d = fam[j + 1].minus(&fam[j - 1])?.scaled(0.5 / dt);
        d.axpy(1.0, &advect(&vel[j], &fam[j])?)?;
        out.push(d);
    }
    Ok(out)
}

/// `(∂_t + v·∇)^m` at the window center.
fn d_power(vel: &[SpectralField], fam: &[SpectralField], m: u32, dt: f64) -> Result<SpectralField> {
    let mut fam = fam.to_vec();
    let mut vel = vel.to_vec();
    for _ in 0..m {
        fam = d_apply(&vel, &fam, dt)?;
        vel = vel[1..vel.len() - 1].to_vec();
    }
    if fam.len() % 2 == 0 {
        return Err(Error::Shape("time window must have odd length".into()));
    }
    Ok(fam[fam.len() / 2].clone())
}

fn pad_factor(m: u32) -> usize {
    if m >= 2 {
        4
    } else {
        2
    }
}

/// `D_{≤k,t}^m` of `P_{≤k}u` or `P_ku` at snapshot `t_index`, with
/// `D_{≤k,t} = ∂_t + P_{≤k}u·∇` and `∂_t` by centered differences.
pub fn material_derivative(
    series: &SnapshotSeries,
    bank: &LPBank,
    k: i32,
    m: u32,
    t_index: usize,
    piece: Piece,
) -> Result<MaterialDerivField> {
    if m > 2 {
        return Err(Error::param("m", format!("order {m} not supported (at most 2)")));
    }
    let dt = snapshot_step(series)?;
    let half = m as usize;
    let factor = pad_factor(m);
    let window = padded_window(series, t_index, half, factor)?;
    let pbank = LPBank::new(window[0].grid(), bank.delta())?;
    let vel: Vec<SpectralField> = window.iter().map(|u| pbank.leq(u, k)).collect::<Result<_>>()?;
    let fam: Vec<SpectralField> = match piece {
        Piece::Leq => vel.clone(),
        Piece::Band => window.iter().map(|u| pbank.project(u, k)).collect::<Result<_>>()?,
    };
    let field = d_power(&vel, &fam, m, dt)?;
    Ok(MaterialDerivField { order: m, k, piece, t_index, t: series.times[t_index], half_width: half, dt, field })
}

/// Settings shared by the series checks.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub alpha: f64,
    pub a: f64,
    /// Analyse every `stride`-th snapshot.
    pub stride: usize,
    /// Band range; `None` picks the bands the data resolves.
    pub k_lo: Option<i32>,
    pub k_hi: Option<i32>,
    /// Highest material-derivative order for the M-estimates (0 or 1).
    pub m_max: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { alpha: 1.0 / 3.0, a: 1.0, stride: 1, k_lo: None, k_hi: None, m_max: 1 }
    }
}

/// Largest `|ξ|` the series can carry (per-axis cutoff).
fn content_cutoff(series: &SnapshotSeries) -> f64 {
    series.dealias.cutoff(series.grid.n()) as f64
}

/// Bands `k` with `(1+δ)^{k+2}` below `radius`, so `P_{>k}u` and the
/// neighbouring bands are resolved.
pub fn admissible_bands(bank: &LPBank, radius: f64) -> (i32, i32) {
    let mut hi = bank.k_min();
    while hi + 1 <= bank.k_max() && bank.band_center(hi + 3) <= radius {
        hi += 1;
    }
    (bank.k_min() + 1, hi)
}

fn band_range(series: &SnapshotSeries, bank: &LPBank, opts: &VerifyOptions) -> (i32, i32) {
    let (lo, hi) = admissible_bands(bank, content_cutoff(series));
    (opts.k_lo.unwrap_or(lo).max(bank.k_min()), opts.k_hi.unwrap_or(hi).min(bank.k_max()))
}

fn analysis_indices(series: &SnapshotSeries, stride: usize, half: usize) -> Vec<usize> {
    let n = series.len();
    if n <= 2 * half {
        return Vec::new();
    }
    (half..n - half).step_by(stride.max(1)).collect()
}

/// `max_t ‖u(t)‖_{Ċ^α}` over the given snapshots.
pub fn series_holder(series: &SnapshotSeries, bank: &LPBank, alpha: f64, indices: &[usize]) -> f64 {
    indices.iter().map(|&i| holder_norm(&series.fields[i], bank, alpha).value).fold(0.0, f64::max)
}

/// `max_t ‖u(t)‖_{L∞}` over the given snapshots (grid maximum, 2× refined).
pub fn series_sup(series: &SnapshotSeries, indices: &[usize]) -> f64 {
    indices.iter().map(|&i| sup_norm(&series.fields[i], 2)).fold(0.0, f64::max)
}

/// `a‖u‖^{−2/(1+α)}ν^{(1−α)/(1+α)}`
pub fn waiting_time(a: f64, holder: f64, nu: f64, alpha: f64) -> f64 {
    crate::lagrangian::waiting_threshold(a, holder, nu, alpha)
}

/// Smallest `k` with `(1+δ)^{−k} ≤ ‖u‖^{−1/(1+α)}ν^{1/(1+α)}`.
pub fn dissipation_band(bank: &LPBank, holder: f64, nu: f64, alpha: f64) -> i32 {
    let scale = libm::pow(holder / nu, 1.0 / (1.0 + alpha));
    libm::ceil(bank.log_index(scale) - 1e-12) as i32
}

fn params(opts: &VerifyOptions, bank: &LPBank, nu: f64, m: u32) -> BoundParams {
    BoundParams { alpha: opts.alpha, delta: bank.delta(), nu, a: opts.a, m }
}

/// `‖R_{≤k}‖_∞` against `(1+δ)^{−2αk}‖u‖²` on one field (padded internally),
/// over bands `k_lo..=k_hi`.
pub fn commutator_check(u_hat: &SpectralField, bank: &LPBank, alpha: f64, holder: f64, k_lo: i32, k_hi: i32) -> Result<BoundReport> {
    let up = pad(u_hat, 2)?;
    let pbank = LPBank::new(up.grid(), bank.delta())?;
    let mut rep = BoundReport::new(EstimateId::Cet, BoundParams { alpha, delta: bank.delta(), nu: 0.0, a: 0.0, m: 0 });
    rep.note("holder", holder);
    for k in k_lo..=k_hi {
        let r = reynolds_stress(&up, &pbank, k)?;
        rep.push(k, 0.0, sup(&r), holder * holder * bank.pow(-2.0 * alpha * k as f64));
    }
    Ok(rep)
}

/// The commutator bound on every analysed snapshot.
pub fn cet_check(series: &SnapshotSeries, bank: &LPBank, opts: &VerifyOptions) -> Result<BoundReport> {
    let idx = analysis_indices(series, opts.stride, 0);
    let holder = series_holder(series, bank, opts.alpha, &idx);
    let (lo, hi) = band_range(series, bank, opts);
    let mut rep = BoundReport::new(EstimateId::Cet, params(opts, bank, series.nu, 0));
    rep.note("holder", holder);
    for &i in &idx {
        let one = commutator_check(&series.fields[i], bank, opts.alpha, holder, lo, hi)?;
        for r in one.rows {
            rep.push(r.k, series.times[i], r.lhs, r.rhs);
        }
    }
    Ok(rep)
}

/// `‖F_k‖_∞` against `(1+δ)^{(1−2α)k}‖u‖²`.
pub fn fk_check(series: &SnapshotSeries, bank: &LPBank, opts: &VerifyOptions) -> Result<BoundReport> {
    let idx = analysis_indices(series, opts.stride, 0);
    let holder = series_holder(series, bank, opts.alpha, &idx);
    let (lo, hi) = band_range(series, bank, opts);
    let mut rep = BoundReport::new(EstimateId::Fk, params(opts, bank, series.nu, 0));
    rep.note("holder", holder);
    for &i in &idx {
        let up = pad(&series.fields[i], 2)?;
        let pbank = LPBank::new(up.grid(), bank.delta())?;
        for k in lo.max(bank.k_min())..=hi {
            let f = forcing_fk(&up, &pbank, k)?;
            rep.push(k, series.times[i], sup(&f), holder * holder * bank.pow((1.0 - 2.0 * opts.alpha) * k as f64));
        }
    }
    Ok(rep)
}

/// Residual of the `P_ku` evolution equation at one snapshot, with `∂_t`
/// from a centered difference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpResidual {
    pub k: i32,
    pub t: f64,
    pub dt: f64,
    pub abs: f64,
    /// `max(‖∂_tP_ku‖_∞, ‖F_k‖_∞)`
    pub scale: f64,
    pub rel: f64,
}

pub fn lp_residual(series: &SnapshotSeries, bank: &LPBank, k: i32, t_index: usize) -> Result<LpResidual> {
    let dt = snapshot_step(series)?;
    let w = padded_window(series, t_index, 1, 2)?;
    let pbank = LPBank::new(w[0].grid(), bank.delta())?;
    let pk_next = pbank.project(&w[2], k)?;
    let pk_prev = pbank.project(&w[0], k)?;
    let dt_pk = pk_next.minus(&pk_prev)?.scaled(0.5 / dt);
    let u = &w[1];
    let pk = pbank.project(u, k)?;
    let low = pbank.leq(u, k)?;
    let f = forcing_fk(u, &pbank, k)?;
    let mut res = dt_pk.clone();
    res.axpy(1.0, &advect(&low, &pk)?)?;
    res.axpy(-series.nu, &laplacian(&pk))?;
    res.axpy(-1.0, &f)?;
    let abs = sup(&res);
    let scale = sup(&dt_pk).max(sup(&f));
    Ok(LpResidual { k, t: series.times[t_index], dt, abs, scale, rel: if abs == 0.0 { 0.0 } else { abs / scale } })
}

fn admissible_m(id: EstimateId, m: u32, alpha: f64) -> bool {
    let lim = 2.0 * alpha / (1.0 - alpha);
    match id {
        EstimateId::M1 | EstimateId::M2 | EstimateId::M3 => (m as f64) < lim + 1.0,
        EstimateId::M5 | EstimateId::M6 => (m as f64) < lim,
        _ => false,
    }
}

/// The M-estimates at orders `m ≤ m_max`, for `k` in the band range and
/// `t` past the waiting time. Rows outside each estimate's admissible
/// range are never produced; M6 rows also need `k` past the dissipation
/// scale. `P_{≈k}` is `P_{[k−2,k+2]}` and `D = ∂_t + P_{≤k}u·∇`.
pub fn verify_m(series: &SnapshotSeries, bank: &LPBank, opts: &VerifyOptions, which: &[EstimateId]) -> Result<Vec<BoundReport>> {
    if opts.m_max > 1 {
        return Err(Error::param("m_max", format!("at most 1, got {}", opts.m_max)));
    }
    let (alpha, a, nu) = (opts.alpha, opts.a, series.nu);
    let mut wanted: Vec<(EstimateId, u32)> = Vec::new();
    for &id in which {
        if !matches!(id, EstimateId::M1 | EstimateId::M2 | EstimateId::M3 | EstimateId::M5 | EstimateId::M6) {
            return Err(Error::param("estimates", format!("{} is not an M-estimate", id.name())));
        }
        for m in 0..=opts.m_max {
            if admissible_m(id, m, alpha) {
                wanted.push((id, m));
            }
        }
    }
    let top_m = wanted.iter().map(|w| w.1).max().unwrap_or(0);
    let half = top_m as usize;
    let factor = if wanted.iter().any(|&(id, m)| id == EstimateId::M5 && m >= 1) { 4 } else { pad_factor(top_m) };
    let dt = snapshot_step(series)?;
    let all = analysis_indices(series, opts.stride, half);
    // the norm is over the whole run, not just the stencil-complete snapshots
    let holder = series_holder(series, bank, alpha, &analysis_indices(series, opts.stride, 0));
    let t_wait = waiting_time(a, holder, nu, alpha);
    let k_diss = dissipation_band(bank, holder, nu, alpha);
    let (lo, hi) = band_range(series, bank, opts);
    let mut reports: Vec<BoundReport> = wanted
        .iter()
        .map(|&(id, m)| {
            let mut r = BoundReport::new(id, params(opts, bank, nu, m));
            r.note("holder", holder);
            r.note("waiting_time", t_wait);
            r.note("dissipation_band", k_diss as f64);
            r
        })
        .collect();
    let idx: Vec<usize> = all.into_iter().filter(|&i| series.times[i] >= t_wait).collect();
    let cp = |m: u32| libm::pow(a, -(m as f64)) + 1.0;
    for &i in &idx {
        let t = series.times[i];
        let w = padded_window(series, i, half, factor)?;
        let pbank = LPBank::new(w[0].grid(), bank.delta())?;
        let needs_pressure = wanted.iter().any(|w| w.0 == EstimateId::M5);
        let press: Vec<SpectralField> = if needs_pressure { w.iter().map(pressure).collect::<Result<_>>()? } else { Vec::new() };
        for k in lo..=hi {
            let vel: Vec<SpectralField> = w.iter().map(|u| pbank.leq(u, k)).collect::<Result<_>>()?;
            let approx = || -> Result<Vec<SpectralField>> { w.iter().map(|u| pbank.band_clipped(u, k - 2, k + 2)).collect() };
            for (slot, &(id, m)) in wanted.iter().enumerate() {
                let kf = k as f64;
                let (lhs, rhs) = match id {
                    EstimateId::M1 => {
                        let v = d_power(&vel, &approx()?, m, dt)?;
                        (sup(&v), cp(m) * libm::pow(holder, m as f64 + 1.0) * bank.pow((m as f64 * (1.0 - alpha) - alpha) * kf))
                    }
                    EstimateId::M2 => {
                        if k + 1 > bank.k_max() {
                            continue;
                        }
                        let vel1: Vec<SpectralField> = w.iter().map(|u| pbank.leq(u, k + 1)).collect::<Result<_>>()?;
                        let inc = d_power(&vel1, &vel1, m, dt)?.minus(&d_power(&vel, &vel, m, dt)?)?;
                        (sup(&inc), cp(m) * libm::pow(holder, m as f64 + 1.0) * bank.pow((m as f64 * (1.0 - alpha) - alpha) * kf))
                    }
                    EstimateId::M3 => {
                        let lhs = if m == 0 {
                            sup(&gradient(&vel[vel.len() / 2]))
                        } else {
                            let grads: Vec<SpectralField> = vel.iter().map(gradient).collect();
                            let d_grad = d_power(&vel, &grads, m, dt)?;
                            let grad_d = gradient(&d_power(&vel, &vel, m, dt)?);
                            sup(&d_grad).max(sup(&grad_d))
                        };
                        (lhs, cp(m) * libm::pow(holder, m as f64 + 1.0) * bank.pow((m as f64 + 1.0) * (1.0 - alpha) * kf))
                    }
                    EstimateId::M5 => {
                        let gp: Vec<SpectralField> = press
                            .iter()
                            .map(|p| Ok(gradient(&pbank.band_clipped(p, k - 2, k + 2)?)))
                            .collect::<Result<_>>()?;
                        let gr: Vec<SpectralField> =
                            w.iter().map(|u| Ok(gradient(&reynolds_stress(u, &pbank, k)?))).collect::<Result<_>>()?;
                        let lhs = sup(&d_power(&vel, &gp, m, dt)?) + sup(&d_power(&vel, &gr, m, dt)?);
                        let e = (m as f64 + 1.0) * (1.0 - alpha) - alpha;
                        (lhs, cp(m) * libm::pow(holder, m as f64 + 2.0) * bank.pow(e * kf))
                    }
                    EstimateId::M6 => {
                        if k < k_diss {
                            continue;
                        }
                        let pk: Vec<SpectralField> = w.iter().map(|u| pbank.project(u, k)).collect::<Result<_>>()?;
                        let e = (m as f64 + 1.0) * (1.0 - alpha) - alpha - 2.0;
                        (sup(&d_power(&vel, &pk, m, dt)?), cp(m + 1) * libm::pow(holder, m as f64 + 2.0) / nu * bank.pow(e * kf))
                    }
                    _ => unreachable!("filtered above"),
                };
                reports[slot].push(k, t, lhs, rhs);
            }
        }
    }
    if reports.iter().any(|r| r.rows.is_empty()) {
        let empty: Vec<String> = reports.iter().filter(|r| r.rows.is_empty()).map(|r| format!("{}(m={})", r.id.name(), r.params.m)).collect();
        let t_end = series.times.last().copied().unwrap_or(0.0);
        return Err(Error::NoAdmissibleRows(format!(
            "{}: waiting time {t_wait:.4e} vs series end {t_end:.4e}; bands {lo}..={hi}, dissipation band {k_diss} (holder norm {holder:.4e}, nu {nu:e})",
            empty.join(", ")
        )));
    }
    Ok(reports)
}

/// Temporal Hölder check of `ũ = u − e^{νtΔ}u₀`: for each lag `h` (in
/// snapshots) the worst `sup_x|ũ(t+h) − ũ(t)|` against
/// `‖u‖_{L∞}^α‖u‖_{Ċ^α}h^α`. Rows carry the lag count in `k` and `h` in `t`.
/// Notes record the heat-term factor `a^{−α/2}‖u₀‖_{Ċ^α}`.
pub fn eulerian_check(series: &SnapshotSeries, u0: &SpectralField, bank: &LPBank, opts: &VerifyOptions, lags: &[usize]) -> Result<BoundReport> {
    if series.is_empty() || series.times[0] != 0.0 {
        return Err(Error::Missing("the series has no t = 0 snapshot".into()));
    }
    let alpha = opts.alpha;
    let all = analysis_indices(series, 1, 0);
    let holder = series_holder(series, bank, alpha, &analysis_indices(series, opts.stride, 0));
    let usup = series_sup(series, &analysis_indices(series, opts.stride, 0));
    let mut rep = BoundReport::new(EstimateId::E1, params(opts, bank, series.nu, 0));
    rep.note("holder", holder);
    rep.note("u_sup", usup);
    let h0 = holder_norm(u0, bank, alpha).value;
    rep.note("heat_factor", libm::pow(opts.a, -alpha / 2.0) * h0);
    rep.note("heat_onset", opts.a * series.nu);
    let n = all.len();
    for &lag in lags {
        if lag == 0 {
            continue;
        }
        if lag >= n {
            return Err(Error::param("lags", format!("lag of {lag} snapshots exceeds the series ({n} snapshots)")));
        }
        let h = series.times[lag] - series.times[0];
        let mut worst: f64 = 0.0;
        for j in (0..n - lag).step_by(opts.stride.max(1)) {
            let (t1, t2) = (series.times[j], series.times[j + lag]);
            let du = series.fields[j + lag].minus(&series.fields[j])?;
            let heat = heat_evolve(u0, series.nu, t2)?.minus(&heat_evolve(u0, series.nu, t1)?)?;
            worst = worst.max(sup_norm(&du.minus(&heat)?, 2));
        }
        rep.push(lag as i32, h, worst, libm::pow(usup, alpha) * holder * libm::pow(h, alpha));
    }
    Ok(rep)
}

/// The three ingredients of the `L^p` energy argument for band `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpEnergyReport {
    pub k: i32,
    pub p: u32,
    /// `(t, ∫(P_{≤k}u·∇)P_ku·P_ku|P_ku|^{p−2}, ∫|P_{≤k}u||∇P_ku||P_ku|^{p−1})`
    pub transport: Vec<(f64, f64, f64)>,
    /// `(t, Q/(4π²(1+δ)^{2k}))` with `Q = −∫ΔP_ku·P_ku|P_ku|^{p−2} / ∫|P_ku|^p`.
    pub rayleigh: Vec<(f64, f64)>,
    /// Measured `‖P_ku‖_{L^p}` against the Gronwall prediction from the first
    /// analysed time.
    pub gronwall: BoundReport,
    pub quadrature_n: usize,
}

impl LpEnergyReport {
    pub fn max_transport_rel(&self) -> f64 {
        self.transport.iter().map(|&(_, v, s)| if v == 0.0 { 0.0 } else { v.abs() / s }).fold(0.0, f64::max)
    }

    pub fn min_rayleigh(&self) -> f64 {
        self.rayleigh.iter().map(|r| r.1).fold(f64::INFINITY, f64::min)
    }
}

const QUAD_CAP_1D: usize = 1 << 16;
const QUAD_CAP_2D: usize = 2048;

fn integrals(u: &SpectralField, bank: &LPBank, k: i32, p: u32, qn: usize) -> Result<(f64, f64, f64, f64, f64)> {
    // on the quadrature grid the integrands are resolved exactly
    let up = u.resample(qn)?;
    let pk = bank.project(&up, k)?;
    let low = bank.leq(&up, k)?;
    let grid = up.grid();
    let (d, len) = (grid.d(), grid.len());
    let c = u.components();
    let v = pk.to_physical();
    let l = low.to_physical();
    let g = gradient(&pk).to_physical();
    let lap = laplacian(&pk).to_physical();
    let (mut tr, mut tr_scale, mut num, mut den) = (0.0, 0.0, 0.0, 0.0);
    for x in 0..len {
        let mut m2 = 0.0;
        for i in 0..c {
            m2 += v[i * len + x] * v[i * len + x];
        }
        let mag = libm::sqrt(m2);
        let wgt = libm::pow(mag, (p - 2) as f64);
        // (L·∇)P_k u · P_k u
        let mut adv = 0.0;
        let mut gnorm = 0.0;
        for i in 0..c {
            let mut s = 0.0;
            for j in 0..d {
                let gij = g[(i * d + j) * len + x];
                s += l[j * len + x] * gij;
                gnorm += gij * gij;
            }
            adv += s * v[i * len + x];
        }
        let mut lnorm = 0.0;
        for j in 0..d {
            lnorm += l[j * len + x] * l[j * len + x];
        }
        tr += adv * wgt;
        tr_scale += libm::sqrt(lnorm) * libm::sqrt(gnorm) * mag * wgt;
        let mut lv = 0.0;
        for i in 0..c {
            lv += lap[i * len + x] * v[i * len + x];
        }
        num += -lv * wgt;
        den += m2 * wgt;
    }
    let inv = 1.0 / len as f64;
    Ok((tr * inv, tr_scale * inv, num * inv, den * inv, libm::pow(den * inv, 1.0 / p as f64)))
}

/// Quadrature grid for degree-`p` integrands in band `k` (plus one
/// `P_{≤k}u` factor).
pub fn lp_quadrature_n(bank: &LPBank, d: usize, k: i32, p: u32) -> Result<usize> {
    let top = bank.band_center(k + 1);
    let need = libm::ceil((p as f64 + 1.0) * top * libm::sqrt(d as f64)) as usize;
    let n = (2 * need + 2).next_power_of_two().max(8);
    let cap = if d == 1 { QUAD_CAP_1D } else { QUAD_CAP_2D };
    if n > cap {
        return Err(Error::param("p", format!("p = {p} at band {k} needs a {n}-point quadrature grid (cap {cap})")));
    }
    Ok(n)
}

/// Transport cancellation, the dissipation Rayleigh quotient, and the
/// Gronwall bound `g' ≤ −νQ(t)g + ‖F_k‖_∞` for `g = ‖P_ku‖_{L^p}`, integrated
/// from the first analysed snapshot with `C = 1` (normalized measure).
pub fn lp_energy_check(series: &SnapshotSeries, bank: &LPBank, k: i32, p: u32, opts: &VerifyOptions) -> Result<LpEnergyReport> {
    if p < 2 || p % 2 != 0 || p > 16 {
        return Err(Error::param("p", format!("must be even and in [2, 16], got {p}")));
    }
    let d = series.grid.d();
    let qn = lp_quadrature_n(bank, d, k, p)?;
    let idx = analysis_indices(series, opts.stride, 0);
    let mut transport = Vec::new();
    let mut rayleigh = Vec::new();
    let mut g = Vec::new();
    let mut forcing = Vec::new();
    let mut qs = Vec::new();
    let norm = FOUR_PI2 * bank.pow(2.0 * k as f64);
    for &i in &idx {
        let u = &series.fields[i];
        let (tr, scale, num, den, gp) = integrals(u, bank, k, p, qn)?;
        let t = series.times[i];
        transport.push((t, tr, scale));
        let q = if den == 0.0 { 0.0 } else { num / den };
        rayleigh.push((t, q / norm));
        qs.push(q);
        g.push(gp);
        let up = pad(u, 2)?;
        let pbank = LPBank::new(up.grid(), bank.delta())?;
        forcing.push(if series.nonlinear { sup(&forcing_fk(&up, &pbank, k)?) } else { 0.0 });
    }
    let mut rep = BoundReport::new(EstimateId::LpEnergy, params(opts, bank, series.nu, 0));
    rep.note("p", p as f64);
    if let Some(&g0) = g.first() {
        let mut pred = g0;
        rep.push(k, series.times[idx[0]], g0, pred);
        for j in 1..idx.len() {
            let h = series.times[idx[j]] - series.times[idx[j - 1]];
            // conservative on each interval: weakest damping, strongest forcing
            let lam = series.nu * qs[j].min(qs[j - 1]).max(0.0);
            let f = forcing[j].max(forcing[j - 1]);
            pred = if lam > 0.0 {
                pred * libm::exp(-lam * h) + f * (-libm::expm1(-lam * h)) / lam
            } else {
                pred + f * h
            };
            rep.push(k, series.times[idx[j]], g[j], pred);
        }
    }
    Ok(LpEnergyReport { k, p, transport, rayleigh, gronwall: rep, quadrature_n: qn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::grid::GridSpec;
    use crate::ns::{self, leray_project, Dealias, SolverOptions};
    use crate::synth::random_field;
    use num_complex::Complex64;

    fn g(n: usize) -> GridSpec {
        GridSpec::new(2, n).unwrap()
    }

    fn div_free(n: usize, kmax: usize, seed: u64) -> SpectralField {
        leray_project(&random_field(g(n), 2, kmax, 1.5, seed)).unwrap()
    }

    fn frozen(u: &SpectralField, count: usize, dt: f64, nu: f64) -> SnapshotSeries {
        SnapshotSeries {
            grid: u.grid(),
            nu,
            dt,
            snapshot_every: 1,
            dealias: Dealias::TwoThirds,
            nonlinear: true,
            times: (0..count).map(|i| i as f64 * dt).collect(),
            fields: vec![u.clone(); count],
            energies: vec![u.energy(); count],
            initial_projected: false,
        }
    }

    #[test]
    fn stress_vanishes_for_constants_and_passed_modes() {
        let grid = g(32);
        let bank = LPBank::new(grid, 0.5).unwrap();
        let mut c = SpectralField::zeros(grid, 2);
        c.coeffs_mut()[0] = Complex64::new(0.7, 0.0);
        c.coeffs_mut()[grid.len()] = Complex64::new(-0.1, 0.0);
        assert!(sup(&reynolds_stress(&c, &bank, 2).unwrap()) < 1e-14);
        // shear flow (sin 2π·2y, 0): modes 0, ±2, ±4 all pass P_{≤k} for large k
        let mut s = SpectralField::zeros(grid, 2);
        s.coeffs_mut()[grid.index_of([0, 2]).unwrap()] = Complex64::new(0.0, -0.5);
        s.coeffs_mut()[grid.index_of([0, -2]).unwrap()] = Complex64::new(0.0, 0.5);
        let k = bank.k_max();
        assert!(bank.leq(&s, k).unwrap().max_abs_diff(&s).unwrap() == 0.0);
        assert!(sup(&reynolds_stress(&s, &bank, k).unwrap()) < 1e-12);
    }

    #[test]
    fn decomposition_recomposes() {
        let u = div_free(64, 10, 4);
        let bank = LPBank::new(u.grid(), 0.25).unwrap();
        for k in [3, 6, 9] {
            let r = reynolds_stress(&u, &bank, k).unwrap();
            let parts = stress_decomposition(&u, &bank, k).unwrap();
            let err = parts.sum().unwrap().max_abs_diff(&r).unwrap();
            assert!(err <= 1e-10 * r.coeff_norm(), "k={k}: {err}");
            // symmetric tensor, transposed mixed terms
            let rp = r.to_physical();
            let len = u.grid().len();
            for x in 0..len {
                assert!((rp[len + x] - rp[2 * len + x]).abs() < 1e-13);
            }
        }
        // all content low: only LL survives
        let bank = LPBank::new(u.grid(), 1.0).unwrap();
        let parts = stress_decomposition(&u, &bank, bank.k_max()).unwrap();
        assert!(parts.hh.is_zero() || parts.hh.coeff_norm() < 1e-15);
        assert!(parts.hl.coeff_norm() < 1e-15 && parts.lh.coeff_norm() < 1e-15);
    }

    #[test]
    fn stress_alias_guard() {
        let u = div_free(32, 10, 1);
        let bank = LPBank::new(u.grid(), 0.5).unwrap();
        assert!(matches!(reynolds_stress(&u, &bank, 4), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn forcing_matches_direct_form() {
        let u = pad(&div_free(32, 9, 7), 2).unwrap();
        let bank = LPBank::new(u.grid(), 0.3).unwrap();
        assert!(forcing_fk(&SpectralField::zeros(u.grid(), 2), &bank, 4).unwrap().is_zero());
        for k in [2, 5, 8] {
            let f = forcing_fk(&u, &bank, k).unwrap();
            // P_{≤k}u·∇P_ku − P_k(u·∇u) − ∇P_kp
            let pk = bank.project(&u, k).unwrap();
            let mut e = advect(&bank.leq(&u, k).unwrap(), &pk).unwrap();
            e.axpy(-1.0, &bank.project(&advect(&u, &u).unwrap(), k).unwrap()).unwrap();
            e.axpy(-1.0, &gradient(&bank.project(&pressure(&u).unwrap(), k).unwrap())).unwrap();
            assert!(f.max_abs_diff(&e).unwrap() <= 1e-12 * e.coeff_norm().max(1.0));
        }
        assert!(matches!(forcing_fk(&u, &bank, -1), Err(Error::BandOutOfRange { .. })));
    }

    #[test]
    fn material_derivative_of_frozen_series_is_advection() {
        let u = div_free(32, 8, 2);
        let s = frozen(&u, 5, 0.1, 1e-3);
        let bank = LPBank::new(u.grid(), 0.4).unwrap();
        let k = 4;
        let d0 = material_derivative(&s, &bank, k, 0, 2, Piece::Band).unwrap();
        let up = pad(&u, 2).unwrap();
        let pb = LPBank::new(up.grid(), 0.4).unwrap();
        assert_eq!(d0.field, pb.project(&up, k).unwrap());
        let d1 = material_derivative(&s, &bank, k, 1, 2, Piece::Leq).unwrap();
        let low = pb.leq(&up, k).unwrap();
        let direct = advect(&low, &low).unwrap();
        assert!(d1.field.max_abs_diff(&direct).unwrap() <= 1e-10 * direct.coeff_norm().max(1e-300));
        assert_eq!((d1.half_width, d1.order), (1, 1));
        let d2 = material_derivative(&s, &bank, k, 2, 2, Piece::Leq).unwrap();
        let low4 = pad(&u, 4).unwrap();
        let pb4 = LPBank::new(low4.grid(), 0.4).unwrap();
        let l4 = pb4.leq(&low4, k).unwrap();
        let direct2 = advect(&l4, &advect(&l4, &l4).unwrap()).unwrap();
        assert!(d2.field.max_abs_diff(&direct2).unwrap() <= 1e-10 * direct2.coeff_norm());
        assert!(matches!(
            material_derivative(&s, &bank, k, 2, 1, Piece::Leq),
            Err(Error::StencilBoundary { .. })
        ));
    }

    #[test]
    fn material_derivative_tracks_lp_equation() {
        // D P_ku = νΔP_ku + F_k up to the time stencil
        let grid = g(32);
        let u0 = div_free(32, 8, 9).scaled(0.05);
        let s = ns::run(&u0, 1e-2, 0.02, 1e-3, 1, SolverOptions::default()).unwrap();
        let bank = LPBank::new(grid, 0.3).unwrap();
        let k = 5;
        let i = 10;
        let r = lp_residual(&s, &bank, k, i).unwrap();
        assert!(r.rel < 1e-4, "{r:?}");
    }

    #[test]
    fn heat_only_run_has_small_m6_and_zero_eulerian_residue() {
        let grid = g(32);
        let bank = LPBank::new(grid, 0.5).unwrap();
        let u0 = div_free(32, 10, 5).scaled(0.1);
        let opts = SolverOptions { nonlinear: false, ..Default::default() };
        let s = ns::run(&u0, 0.1, 0.5, 0.005, 10, opts).unwrap();
        let vo = VerifyOptions { m_max: 0, a: 0.01, ..Default::default() };
        let reps = verify_m(&s, &bank, &vo, &[EstimateId::M6]).unwrap();
        assert!(reps[0].max_ratio() < 0.1, "{}", reps[0].max_ratio());
        let e = eulerian_check(&s, &s.fields[0], &bank, &vo, &[1, 2, 4]).unwrap();
        assert!(e.rows.iter().all(|r| r.lhs < 1e-12), "{:?}", e.rows);
    }

    #[test]
    fn zero_solution_reports_zero() {
        let grid = g(16);
        let bank = LPBank::new(grid, 0.5).unwrap();
        let z = SpectralField::zeros(grid, 2);
        let s = frozen(&z, 4, 0.1, 1e-2);
        let e = eulerian_check(&s, &z, &bank, &VerifyOptions::default(), &[1, 2]).unwrap();
        assert!(e.rows.iter().all(|r| r.lhs == 0.0 && r.ratio == 0.0));
        let mut late = s.clone();
        late.times.iter_mut().for_each(|t| *t += 1.0);
        assert!(matches!(eulerian_check(&late, &z, &bank, &VerifyOptions::default(), &[1]), Err(Error::Missing(_))));
    }

    #[test]
    fn m_admissibility_and_diagnostics() {
        assert!(admissible_m(EstimateId::M1, 1, 1.0 / 3.0));
        assert!(!admissible_m(EstimateId::M6, 1, 1.0 / 3.0));
        assert!(admissible_m(EstimateId::M6, 0, 1.0 / 3.0));
        assert!(!admissible_m(EstimateId::M1, 2, 1.0 / 3.0));
        let u = div_free(32, 8, 3).scaled(0.01);
        let s = frozen(&u, 4, 0.01, 1e-3);
        let bank = LPBank::new(u.grid(), 0.5).unwrap();
        // waiting time far past the end of the series
        let vo = VerifyOptions { a: 1e6, ..Default::default() };
        assert!(matches!(verify_m(&s, &bank, &vo, &[EstimateId::M1]), Err(Error::NoAdmissibleRows(_))));
        let vo = VerifyOptions { a: 1e-9, ..Default::default() };
        let reps = verify_m(&s, &bank, &vo, &[EstimateId::M1, EstimateId::M3]).unwrap();
        assert_eq!(reps.len(), 4);
        assert!(reps.iter().all(|r| r.rows.iter().all(|row| row.lhs.is_finite())));
    }

    #[test]
    fn m3_at_order_zero_is_the_gradient_bound() {
        let u = div_free(32, 8, 6);
        let s = frozen(&u, 3, 0.01, 1e-3);
        let bank = LPBank::new(u.grid(), 0.5).unwrap();
        let vo = VerifyOptions { a: 1e-9, m_max: 0, ..Default::default() };
        let rep = &verify_m(&s, &bank, &vo, &[EstimateId::M3]).unwrap()[0];
        let row = rep.rows[0];
        let g = sup_norm(&gradient(&bank.leq(&u, row.k).unwrap()), 2);
        assert!((row.lhs - g).abs() <= 1e-2 * g);
    }

    #[test]
    fn lp_energy_ingredients() {
        let grid = g(32);
        let u0 = div_free(32, 9, 8).scaled(0.05);
        let s = ns::run(&u0, 1e-2, 0.05, 1e-3, 5, SolverOptions::default()).unwrap();
        let bank = LPBank::new(grid, 0.2).unwrap();
        let k = 8;
        let rep = lp_energy_check(&s, &bank, k, 2, &VerifyOptions::default()).unwrap();
        assert!(rep.max_transport_rel() < 1e-9, "{}", rep.max_transport_rel());
        assert!(rep.min_rayleigh() >= 1.0 / (1.2f64 * 1.2) - 1e-12);
        assert!(rep.gronwall.max_ratio() <= 1.0 + 1e-6);
        let rep8 = lp_energy_check(&s, &bank, k, 8, &VerifyOptions::default()).unwrap();
        assert!(rep8.max_transport_rel() < 1e-9);
        assert!(lp_energy_check(&s, &bank, k, 3, &VerifyOptions::default()).is_err());
    }
}
