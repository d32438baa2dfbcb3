use alloc::format;

use crate::error::{Error, Result};

/// Periodic grid on the unit torus `[0,1)^d` with `n` modes per dimension.
///
/// Storage is FFT order in every dimension and row-major, so for `d = 2` the
/// flat index is `i0 * n + i1` and `x = (i0 / n, i1 / n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    d: usize,
    n: usize,
}

impl GridSpec {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {d}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n must be a power of two >= 8, got {n}")));
        }
        Ok(GridSpec { d, n })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of points (or coefficients) per component.
    #[inline]
    pub fn len(&self) -> usize {
        if self.d == 1 {
            self.n
        } else {
            self.n * self.n
        }
    }

    /// Same dimension, different resolution.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        GridSpec::new(self.d, n)
    }

    /// Signed wavenumber of FFT slot `j`; the Nyquist slot maps to `+n/2`.
    #[inline]
    pub fn freq(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    #[inline]
    fn slot(&self, xi: i64) -> Option<usize> {
        let n = self.n as i64;
        if xi < -n / 2 || xi > n / 2 {
            return None;
        }
        Some(xi.rem_euclid(n) as usize)
    }

    /// Wavevector of flat index `idx`; the second entry is 0 when `d = 1`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        if self.d == 1 {
            [self.freq(idx), 0]
        } else {
            [self.freq(idx / self.n), self.freq(idx % self.n)]
        }
    }

    /// Flat index holding frequency `xi`, if representable.
    pub fn index_of(&self, xi: [i64; 2]) -> Option<usize> {
        if self.d == 1 {
            if xi[1] != 0 {
                return None;
            }
            self.slot(xi[0])
        } else {
            Some(self.slot(xi[0])? * self.n + self.slot(xi[1])?)
        }
    }

    #[inline]
    pub fn norm2(&self, idx: usize) -> f64 {
        let [a, b] = self.wavevector(idx);
        (a * a + b * b) as f64
    }

    /// True if any component of the wavevector sits on the Nyquist slot.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let h = (self.n / 2) as i64;
        let [a, b] = self.wavevector(idx);
        a == h || (self.d == 2 && b == h)
    }

    /// Nyquist test along one axis only (derivative symbols vanish there).
    #[inline]
    pub fn is_nyquist_axis(&self, idx: usize, axis: usize) -> bool {
        self.wavevector(idx)[axis] == (self.n / 2) as i64
    }

    /// Largest lattice radius on the grid, `(n/2)·√d`.
    pub fn max_radius(&self) -> f64 {
        (self.n as f64 / 2.0) * libm::sqrt(self.d as f64)
    }

    /// Wavevector used by first-derivative symbols: a Nyquist component has
    /// no odd partner on the grid, so its derivative is taken to be zero.
    #[inline]
    pub fn deriv_wavevector(&self, idx: usize) -> [f64; 2] {
        let h = (self.n / 2) as i64;
        let [a, b] = self.wavevector(idx);
        let f = |x: i64| if x == h { 0.0 } else { x as f64 };
        [f(a), f(b)]
    }

    /// Physical coordinates of grid point `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = 1.0 / self.n as f64;
        if self.d == 1 {
            [idx as f64 * h, 0.0]
        } else {
            [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h]
        }
    }

    /// Flat index of the conjugate frequency `-ξ`.
    #[inline]
    pub fn conj_index(&self, idx: usize) -> usize {
        let n = self.n;
        let flip = |j: usize| (n - j) % n;
        if self.d == 1 {
            flip(idx)
        } else {
            flip(idx / n) * n + flip(idx % n)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridSpec::new(3, 16).is_err());
        assert!(GridSpec::new(1, 4).is_err());
        assert!(GridSpec::new(2, 24).is_err());
        assert!(GridSpec::new(2, 8).is_ok());
    }

    #[test]
    fn index_roundtrip() {
        let g = GridSpec::new(2, 16).unwrap();
        for idx in 0..g.len() {
            let xi = g.wavevector(idx);
            assert_eq!(g.index_of(xi), Some(idx));
            let c = g.conj_index(idx);
            let xc = g.wavevector(c);
            if !g.is_nyquist(idx) {
                assert_eq!(xc, [-xi[0], -xi[1]]);
            }
        }
        assert_eq!(g.index_of([-8, 0]), g.index_of([8, 0]));
        assert_eq!(g.index_of([9, 0]), None);
        assert_eq!(g.max_radius(), 8.0 * libm::sqrt(2.0));
    }
}
