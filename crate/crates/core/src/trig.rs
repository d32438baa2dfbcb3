//! Direct evaluation of a field's trigonometric polynomial at arbitrary
//! points, with first and second derivatives.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::field::SpectralField;

#[derive(Clone, Debug)]
pub struct TrigPoly {
    d: usize,
    comps: usize,
    half: i64,
    /// Largest `|ξ_j|` present.
    reach: i64,
    freqs: Vec<[i64; 2]>,
    /// mode-major: `coeffs[mode * comps + c]`
    coeffs: Vec<Complex64>,
}

/// Point values plus derivatives; `hess` holds `(xx, xy, yy)`.
#[derive(Clone, Debug, Default)]
pub struct Jet {
    pub value: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
    pub hess: Vec<[f64; 3]>,
}

impl TrigPoly {
    pub fn new(f: &SpectralField) -> Self {
        let grid = f.grid();
        let len = grid.len();
        let comps = f.components();
        let mut freqs = Vec::new();
        let mut coeffs = Vec::new();
        for idx in 0..len {
            let cs: Vec<Complex64> = (0..comps).map(|c| f.coeffs()[c * len + idx]).collect();
            if cs.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            freqs.push(grid.wavevector(idx));
            coeffs.extend(cs);
        }
        let reach = freqs.iter().map(|f| f[0].abs().max(f[1].abs())).max().unwrap_or(0);
        TrigPoly { d: grid.d(), comps, half: (grid.n() / 2) as i64, reach, freqs, coeffs }
    }

    pub fn modes(&self) -> usize {
        self.freqs.len()
    }

    pub fn components(&self) -> usize {
        self.comps
    }

    fn phases(&self, x: f64) -> Vec<Complex64> {
        // e^{2πi m x} for m in [-half, half], index m + half; only |m| ≤ reach
        // is filled. Powers by recurrence, re-anchored every 32 steps.
        let h = self.half;
        let direct = |m: i64| {
            let th = 2.0 * PI * (m as f64 * x).rem_euclid(1.0);
            Complex64::new(libm::cos(th), libm::sin(th))
        };
        let e1 = direct(1);
        let mut out = vec![Complex64::new(0.0, 0.0); (2 * h + 1) as usize];
        let mut cur = Complex64::new(1.0, 0.0);
        for m in 0..=self.reach.min(h) {
            if m > 0 {
                cur = if m % 32 == 0 { direct(m) } else { cur * e1 };
            }
            out[(h + m) as usize] = cur;
            out[(h - m) as usize] = cur.conj();
        }
        out
    }

    fn phase_tables(&self, x: [f64; 2]) -> (Vec<Complex64>, Vec<Complex64>) {
        let a = self.phases(x[0]);
        let b = if self.d == 2 { self.phases(x[1]) } else { vec![Complex64::new(1.0, 0.0); a.len()] };
        (a, b)
    }

    /// Real part of `Σ_ξ f̂(ξ) e^{2πiξ·x}` for every component.
    pub fn eval(&self, x: [f64; 2], out: &mut [f64]) {
        let (a, b) = self.phase_tables(x);
        let h = self.half;
        out[..self.comps].iter_mut().for_each(|v| *v = 0.0);
        for (m, xi) in self.freqs.iter().enumerate() {
            let e = a[(xi[0] + h) as usize] * b[(xi[1] + h) as usize];
            for c in 0..self.comps {
                let z = self.coeffs[m * self.comps + c];
                out[c] += z.re * e.re - z.im * e.im;
            }
        }
    }

    pub fn jet(&self, x: [f64; 2]) -> Jet {
        let (a, b) = self.phase_tables(x);
        let h = self.half;
        let mut jet = Jet {
            value: vec![0.0; self.comps],
            grad: vec![[0.0; 2]; self.comps],
            hess: vec![[0.0; 3]; self.comps],
        };
        let tp = 2.0 * PI;
        for (m, xi) in self.freqs.iter().enumerate() {
            let e = a[(xi[0] + h) as usize] * b[(xi[1] + h) as usize];
            let (k0, k1) = (tp * xi[0] as f64, tp * xi[1] as f64);
            for c in 0..self.comps {
                let z = self.coeffs[m * self.comps + c] * e;
                // d/dx e^{ikx} = ik e^{ikx}: Re(ik z) = -k Im z
                jet.value[c] += z.re;
                jet.grad[c][0] -= k0 * z.im;
                jet.grad[c][1] -= k1 * z.im;
                jet.hess[c][0] -= k0 * k0 * z.re;
                jet.hess[c][1] -= k0 * k1 * z.re;
                jet.hess[c][2] -= k1 * k1 * z.re;
            }
        }
        jet
    }
}
