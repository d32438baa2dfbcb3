//! The `(1+δ)`-adic Littlewood-Paley bank.
//!
//! With `s = log_{1+δ}|ξ|` and the smooth step `S` built from `e^{-1/t}`,
//! the band symbols are `m_k(ξ) = S(s−k+1) − S(s−k)`. They telescope, so
//! `P_{≤k}` has symbol `1 − S(s−k)`; `m_k` lives on
//! `(1+δ)^{k−1} < |ξ| < (1+δ)^{k+1}`, and every `ξ ≠ 0` meets at most two
//! bands. The bank stores, per lattice point, the lower band `j = ⌊s⌋` and
//! the weight `w = S(s−j)` so `m_j = 1−w`, `m_{j+1} = w`.

use alloc::borrow::Cow;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::error::{Error, Result};
use crate::field::{gradient, sup_norm, SpectralField};
use crate::grid::GridSpec;

/// Upper limit on the number of realized bands.
pub const MAX_BANDS: i32 = 20_000;

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        libm::exp(-1.0 / t)
    }
}

/// Smooth monotone step: 0 for `s ≤ 0`, 1 for `s ≥ 1`, C^∞ in between.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = bump(s);
    a / (a + bump(1.0 - s))
}

/// The cutoff profile as a function of the log-radius `s`: `S(s+1) − S(s)`.
pub fn m0_log(s: f64) -> f64 {
    smooth_step(s + 1.0) - smooth_step(s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Slot {
    /// `i32::MIN` marks the mean mode.
    lower: i32,
    w: f64,
}

const MEAN: i32 = i32::MIN;

impl Slot {
    #[inline]
    fn band(&self, k: i32) -> f64 {
        if self.lower == MEAN {
            0.0
        } else if k == self.lower {
            1.0 - self.w
        } else if k == self.lower + 1 {
            self.w
        } else {
            0.0
        }
    }

    #[inline]
    fn leq(&self, k: i32) -> f64 {
        if self.lower == MEAN || k > self.lower {
            1.0
        } else if k == self.lower {
            1.0 - self.w
        } else {
            0.0
        }
    }

    #[inline]
    fn range(&self, k1: i32, k2: i32) -> f64 {
        if self.lower == MEAN {
            return 0.0;
        }
        let mut s = 0.0;
        if (k1..=k2).contains(&self.lower) {
            s += 1.0 - self.w;
        }
        if (k1..=k2).contains(&(self.lower + 1)) {
            s += self.w;
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct LPBank {
    delta: f64,
    log_ratio: f64,
    k_min: i32,
    k_max: i32,
    grid: GridSpec,
    slots: Vec<Slot>,
}

impl LPBank {
    /// Realize the bank on `grid`. Bands run from `k_min = 0` (the band that
    /// holds `|ξ| = 1`) to `k_max = ⌈log_{1+δ}((n/2)√d)⌉`.
    pub fn new(grid: GridSpec, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::param("delta", format!("must be a positive finite number, got {delta}")));
        }
        let log_ratio = libm::log1p(delta);
        let top = libm::ceil(libm::log(grid.max_radius()) / log_ratio);
        if !(top < MAX_BANDS as f64) {
            return Err(Error::param(
                "delta",
                format!("{delta} needs {top} bands on this grid (limit {MAX_BANDS})"),
            ));
        }
        let k_max = top as i32;
        let mut bank = LPBank { delta, log_ratio, k_min: 0, k_max, grid, slots: Vec::new() };
        bank.slots = bank.compute_slots(grid);
        let edge = k_max - 1;
        if edge >= 0 && !bank.slots.iter().any(|s| s.band(edge) > 0.0) {
            return Err(Error::param(
                "delta",
                format!("band {edge} holds no lattice frequency; delta = {delta} is too small for n = {}", grid.n()),
            ));
        }
        Ok(bank)
    }

    fn slot_for_norm2(&self, r2: f64) -> Slot {
        if r2 == 0.0 {
            return Slot { lower: MEAN, w: 0.0 };
        }
        let s = 0.5 * libm::log(r2) / self.log_ratio;
        let j = libm::floor(s);
        Slot { lower: j as i32, w: smooth_step(s - j) }
    }

    fn compute_slots(&self, grid: GridSpec) -> Vec<Slot> {
        (0..grid.len()).map(|idx| self.slot_for_norm2(grid.norm2(idx))).collect()
    }

    fn slots(&self, grid: GridSpec) -> Cow<'_, [Slot]> {
        if grid == self.grid {
            Cow::Borrowed(&self.slots)
        } else {
            Cow::Owned(self.compute_slots(grid))
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// `(1+δ)^k`
    pub fn band_center(&self, k: i32) -> f64 {
        libm::exp(self.log_ratio * k as f64)
    }

    /// `(1+δ)^x` for real `x`.
    pub fn pow(&self, x: f64) -> f64 {
        libm::exp(self.log_ratio * x)
    }

    /// `log_{1+δ} r`
    pub fn log_index(&self, r: f64) -> f64 {
        libm::log(r) / self.log_ratio
    }

    /// `m_k` at frequency radius `r` (any real radius, not just lattice).
    pub fn band_symbol(&self, k: i32, r: f64) -> f64 {
        self.slot_for_norm2(r * r).band(k)
    }

    /// Symbol of `P_{≤k}` at radius `r`.
    pub fn leq_symbol(&self, k: i32, r: f64) -> f64 {
        self.slot_for_norm2(r * r).leq(k)
    }

    fn check(&self, k: i32, lo: i32) -> Result<()> {
        if k < lo || k > self.k_max {
            return Err(Error::BandOutOfRange { k, lo, hi: self.k_max });
        }
        Ok(())
    }

    /// `Σ_k m_k(ξ)` over the realized bands at lattice index `idx`.
    pub fn partition_sum(&self, idx: usize) -> f64 {
        let s = self.slots[idx];
        (self.k_min..=self.k_max).map(|k| s.band(k)).sum()
    }

    /// True if band `k` has a nonzero weight on some lattice point of `grid`.
    pub fn occupied(&self, grid: GridSpec, k: i32) -> bool {
        self.slots(grid).iter().any(|s| s.band(k) > 0.0)
    }

    pub fn project(&self, f: &SpectralField, k: i32) -> Result<SpectralField> {
        self.check(k, self.k_min)?;
        let slots = self.slots(f.grid());
        Ok(f.apply_symbol(|i| slots[i].band(k)))
    }

    /// `P_{≤k}`, including the mean and everything below the lowest band.
    pub fn leq(&self, f: &SpectralField, k: i32) -> Result<SpectralField> {
        self.check(k, self.k_min - 1)?;
        let slots = self.slots(f.grid());
        Ok(f.apply_symbol(|i| slots[i].leq(k)))
    }

    /// `P_{>k} = I − P_{≤k}`
    pub fn greater(&self, f: &SpectralField, k: i32) -> Result<SpectralField> {
        self.check(k, self.k_min - 1)?;
        let slots = self.slots(f.grid());
        Ok(f.apply_symbol(|i| 1.0 - slots[i].leq(k)))
    }

    /// `P_{[k1,k2]} = Σ_{k1≤l≤k2} P_l`
    pub fn band(&self, f: &SpectralField, k1: i32, k2: i32) -> Result<SpectralField> {
        if k2 < k1 {
            return Err(Error::param("k2", format!("band range [{k1}, {k2}] is empty")));
        }
        self.check(k1, self.k_min)?;
        self.check(k2, self.k_min)?;
        let slots = self.slots(f.grid());
        Ok(f.apply_symbol(|i| slots[i].range(k1, k2)))
    }

    /// `P_{[k1,k2]}` with the range clipped to the realized bands.
    pub fn band_clipped(&self, f: &SpectralField, k1: i32, k2: i32) -> Result<SpectralField> {
        self.band(f, k1.max(self.k_min), k2.min(self.k_max))
    }
}

/// One band's contribution to a Hölder estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandValue {
    pub k: i32,
    pub center: f64,
    pub sup_norm: f64,
    pub weighted: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderEstimate {
    pub alpha: f64,
    pub value: f64,
    pub per_band: Vec<BandValue>,
}

/// Sup norm of a band-limited piece, sampled on the coarsest grid giving at
/// least 16 points per wavelength of its top frequency (never finer than
/// twice the field's grid).
pub fn band_sup(piece: &SpectralField, top_radius: f64) -> f64 {
    if piece.is_zero() {
        return 0.0;
    }
    let n = piece.grid().n();
    let want = (libm::ceil(16.0 * top_radius) as usize).max(8).next_power_of_two();
    if want >= 2 * n {
        sup_norm(piece, 2)
    } else if want > n {
        sup_norm(piece, want / n)
    } else {
        let coarse = piece.resample(want).expect("coarser valid grid");
        sup_norm(&coarse, 1)
    }
}

/// `sup_k (1+δ)^{αk}‖P_k f‖_∞` with the per-band table.
pub fn holder_norm(f: &SpectralField, bank: &LPBank, alpha: f64) -> HolderEstimate {
    let mut per_band = Vec::new();
    let mut value: f64 = 0.0;
    for k in bank.k_min()..=bank.k_max() {
        let piece = bank.project(f, k).expect("k in range");
        let s = band_sup(&piece, bank.band_center(k + 1));
        let center = bank.band_center(k);
        let weighted = bank.pow(alpha * k as f64) * s;
        value = value.max(weighted);
        per_band.push(BandValue { k, center, sup_norm: s, weighted });
    }
    HolderEstimate { alpha, value, per_band }
}

/// Measured Bernstein constants `‖∇P_k f‖_∞ / ((1+δ)^k ‖P_k f‖_∞)` for the
/// occupied bands.
pub fn bernstein_constants(f: &SpectralField, bank: &LPBank) -> Vec<(i32, f64)> {
    let mut out = vec![];
    for k in bank.k_min()..=bank.k_max() {
        let piece = bank.project(f, k).expect("k in range");
        let top = bank.band_center(k + 1);
        let s = band_sup(&piece, top);
        if s == 0.0 {
            continue;
        }
        let g = band_sup(&gradient(&piece), top);
        out.push((k, g / (bank.band_center(k) * s)));
    }
    out
}
