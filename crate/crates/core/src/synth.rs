//! Synthetic test fields: lacunary Hölder fields with a closed-form
//! seminorm, and smooth random fields.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::bank::LPBank;
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::rng;

/// One Fourier mode of a lacunary synthesis: `a·e·cos(2πξ·x + φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellMode {
    pub xi: [i64; 2],
    pub amplitude: f64,
    pub phase: f64,
    /// Unit polarization (`ξ⊥/|ξ|` in 2D, `[1, 0]` for scalar fields).
    pub polarization: [f64; 2],
    pub shell: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LacunarySynthesis {
    pub d: usize,
    pub alpha: f64,
    pub modes: Vec<ShellMode>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthOptions {
    /// Largest admissible `|ξ|`; `None` means `n/3` of the target grid.
    pub max_radius: Option<f64>,
    /// Overall factor on every amplitude.
    pub amplitude: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { max_radius: None, amplitude: 1.0 }
    }
}

fn norm(xi: [i64; 2]) -> f64 {
    libm::sqrt((xi[0] * xi[0] + xi[1] * xi[1]) as f64)
}

/// Draw the shells. Radii grow by `ρ = max(2, 1.25(1+δ)²)`; a shell closer
/// than `(1+δ)²` to the previous one is dropped so no band straddles two
/// shells, which keeps the per-band sup in closed form.
pub fn lacunary(d: usize, delta: f64, alpha: f64, max_radius: f64, amplitude: f64, seed: u64) -> LacunarySynthesis {
    let sep = (1.0 + delta) * (1.0 + delta);
    let rho = f64::max(2.0, 1.25 * sep);
    let mut r = rng::rng_for(seed, 0x5EED);
    let mut modes = Vec::new();
    let mut last: Option<f64> = None;
    let mut target = 1.0;
    let mut shell = 0;
    while target <= max_radius {
        // always consume the same number of draws per shell so the sequence
        // is shared between different cutoffs
        let jitter: f64 = r.gen_range(0.85..1.15);
        let jitter2: f64 = r.gen_range(0.85..1.15);
        let theta: f64 = r.gen_range(0.0..2.0 * PI);
        let gap: f64 = r.gen_range(PI / 3.0..2.0 * PI / 3.0);
        let ph1: f64 = r.gen_range(0.0..2.0 * PI);
        let ph2: f64 = r.gen_range(0.0..2.0 * PI);
        let picks: Vec<[i64; 2]> = if d == 1 {
            alloc::vec![[libm::round(target) as i64, 0]]
        } else {
            let a = [
                libm::round(target * libm::cos(theta)) as i64,
                libm::round(target * libm::sin(theta)) as i64,
            ];
            let b = [
                libm::round(target * libm::cos(theta + gap)) as i64,
                libm::round(target * libm::sin(theta + gap)) as i64,
            ];
            if a[0] * b[1] - a[1] * b[0] == 0 || a == [0, 0] || b == [0, 0] {
                // too coarse to host two directions: single mode on an axis
                alloc::vec![[libm::round(target) as i64, 0]]
            } else {
                alloc::vec![a, b]
            }
        };
        let lo = picks.iter().map(|x| norm(*x)).fold(f64::INFINITY, f64::min);
        let hi = picks.iter().map(|x| norm(*x)).fold(0.0, f64::max);
        let ok = hi <= max_radius && last.map_or(true, |p| lo >= p * sep);
        if ok {
            for (i, xi) in picks.iter().enumerate() {
                let k = norm(*xi);
                let pol = if d == 1 { [1.0, 0.0] } else { [-(xi[1] as f64) / k, xi[0] as f64 / k] };
                let jit = if i == 0 { jitter } else { jitter2 };
                modes.push(ShellMode {
                    xi: *xi,
                    amplitude: amplitude * libm::pow(k, -alpha) * jit,
                    phase: if i == 0 { ph1 } else { ph2 },
                    polarization: pol,
                    shell,
                });
            }
            last = Some(hi);
            shell += 1;
        }
        target *= rho;
    }
    LacunarySynthesis { d, alpha, modes }
}

impl LacunarySynthesis {
    /// Coefficients on `grid`; modes that are not representable are skipped.
    pub fn field(&self, grid: GridSpec) -> SpectralField {
        let comps = if self.d == 1 { 1 } else { 2 };
        let mut f = SpectralField::zeros(grid, comps);
        let len = grid.len();
        for m in &self.modes {
            let (Some(i), Some(j)) = (grid.index_of(m.xi), grid.index_of([-m.xi[0], -m.xi[1]])) else {
                continue;
            };
            if grid.is_nyquist(i) {
                continue;
            }
            let c = Complex64::from_polar(0.5 * m.amplitude, m.phase);
            for comp in 0..comps {
                let p = m.polarization[comp];
                f.coeffs_mut()[comp * len + i] += c * p;
                f.coeffs_mut()[comp * len + j] += c.conj() * p;
            }
        }
        f
    }

    /// Exact `sup_x |P_k u|` from the synthesis coefficients.
    pub fn band_sup(&self, bank: &LPBank, k: i32) -> f64 {
        let parts: Vec<(f64, [f64; 2])> = self
            .modes
            .iter()
            .filter_map(|m| {
                let b = bank.band_symbol(k, norm(m.xi)) * m.amplitude;
                (b != 0.0).then_some((b, m.polarization))
            })
            .collect();
        match parts.as_slice() {
            [] => 0.0,
            [(b, _)] => b.abs(),
            [(b1, e1), (b2, e2)] => {
                let cg = (e1[0] * e2[0] + e1[1] * e2[1]).abs();
                libm::sqrt(b1 * b1 + b2 * b2 + 2.0 * b1.abs() * b2.abs() * cg)
            }
            // never produced by `lacunary`; fall back to the triangle bound
            many => many.iter().map(|(b, _)| b.abs()).sum(),
        }
    }

    /// `sup_k (1+δ)^{αk} sup|P_k u|` in closed form.
    pub fn analytic_seminorm(&self, bank: &LPBank, alpha: f64) -> f64 {
        (bank.k_min()..=bank.k_max())
            .map(|k| bank.pow(alpha * k as f64) * self.band_sup(bank, k))
            .fold(0.0, f64::max)
    }
}

/// Random lacunary field with per-band amplitude `∼ (1+δ)^{-αk}`,
/// divergence-free in 2D, cut off at `n/3`.
pub fn synth_holder_field(grid: GridSpec, bank: &LPBank, alpha: f64, seed: u64) -> SpectralField {
    synth_holder_field_with(grid, bank, alpha, seed, SynthOptions::default())
}

pub fn synth_holder_field_with(
    grid: GridSpec,
    bank: &LPBank,
    alpha: f64,
    seed: u64,
    opts: SynthOptions,
) -> SpectralField {
    let cutoff = opts.max_radius.unwrap_or(grid.n() as f64 / 3.0);
    lacunary(grid.d(), bank.delta(), alpha, cutoff, opts.amplitude, seed).field(grid)
}

/// Smooth random real field: Gaussian coefficients weighted by
/// `(1+|ξ|²)^{-slope/2}` inside the box `max_j|ξ_j| ≤ kmax`.
pub fn random_field(grid: GridSpec, components: usize, kmax: usize, slope: f64, seed: u64) -> SpectralField {
    let mut r = rng::rng_for(seed, 0xF1E1D);
    let len = grid.len();
    let mut f = SpectralField::zeros(grid, components);
    for comp in 0..components {
        for idx in 0..len {
            let xi = grid.wavevector(idx);
            let re: f64 = StandardNormal.sample(&mut r);
            let im: f64 = StandardNormal.sample(&mut r);
            let inside = xi[0].unsigned_abs() as usize <= kmax && xi[1].unsigned_abs() as usize <= kmax;
            if idx == 0 || !inside || grid.is_nyquist(idx) {
                continue;
            }
            let w = libm::pow(1.0 + grid.norm2(idx), -slope / 2.0);
            f.coeffs_mut()[comp * len + idx] = Complex64::new(re, im) * w;
        }
    }
    f.symmetrize();
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::holder_norm;

    #[test]
    fn deterministic_and_divergence_free() {
        let g = GridSpec::new(2, 64).unwrap();
        let b = LPBank::new(g, 0.1).unwrap();
        let a = synth_holder_field(g, &b, 1.0 / 3.0, 4);
        assert_eq!(a, synth_holder_field(g, &b, 1.0 / 3.0, 4));
        assert!(!a.is_zero());
        assert!(a.divergence_defect().unwrap() <= 1e-10);
        assert!(a.hermitian_defect() < 1e-16);
    }

    #[test]
    fn holder_matches_closed_form() {
        for &(d, n) in &[(1usize, 256usize), (2, 128)] {
            let g = GridSpec::new(d, n).unwrap();
            let b = LPBank::new(g, 0.1).unwrap();
            for seed in 0..3 {
                let syn = lacunary(d, 0.1, 1.0 / 3.0, n as f64 / 3.0, 1.0, seed);
                let f = syn.field(g);
                let exact = syn.analytic_seminorm(&b, 1.0 / 3.0);
                let got = holder_norm(&f, &b, 1.0 / 3.0).value;
                assert!((got / exact - 1.0).abs() < 0.15, "d={d} seed={seed}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn shells_keep_their_distance() {
        let syn = lacunary(2, 0.1, 0.3, 200.0, 1.0, 11);
        let mut prev_hi: Option<f64> = None;
        for s in 0.. {
            let radii: Vec<f64> = syn.modes.iter().filter(|m| m.shell == s).map(|m| norm(m.xi)).collect();
            if radii.is_empty() {
                break;
            }
            let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
            if let Some(p) = prev_hi {
                assert!(lo >= p * 1.21);
            }
            prev_hi = Some(radii.iter().cloned().fold(0.0, f64::max));
        }
    }
}
