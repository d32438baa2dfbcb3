//! Iterative radix-2 FFT for power-of-two lengths.
//!
//! Forward: `X_k = Σ_j x_j e^{-2πi jk/n}`; inverse is the unnormalized
//! conjugate transform. Plans are cheap and built per call site, so there is
//! no shared cache to synchronize.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct Fft {
    n: usize,
    // e^{-2πi j/n} for j < n/2
    twiddles: Vec<Complex64>,
    rev: Vec<u32>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "fft length must be a power of two");
        let twiddles = (0..n / 2)
            .map(|j| {
                let th = -2.0 * PI * (j as f64) / (n as f64);
                Complex64::new(libm::cos(th), libm::sin(th))
            })
            .collect();
        let bits = n.trailing_zeros();
        let rev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Fft { n, twiddles, rev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, false);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, true);
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.rev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let mut w = self.twiddles[j * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + j];
                    let b = buf[start + j + half] * w;
                    buf[start + j] = a + b;
                    buf[start + j + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// In-place transform of a `d`-dimensional array of side `n`, last index
/// contiguous. `inverse` selects the unnormalized conjugate transform.
pub fn fft_nd(data: &mut [Complex64], n: usize, d: usize, inverse: bool) {
    let plan = Fft::new(n);
    match d {
        1 => {
            if inverse {
                plan.inverse(data)
            } else {
                plan.forward(data)
            }
        }
        2 => {
            for row in data.chunks_exact_mut(n) {
                if inverse {
                    plan.inverse(row)
                } else {
                    plan.forward(row)
                }
            }
            let mut col = alloc::vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                if inverse {
                    plan.inverse(&mut col)
                } else {
                    plan.forward(&mut col)
                }
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
        _ => panic!("unsupported dimension {d}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, v)| {
                    let th = sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                    acc + v * Complex64::new(libm::cos(th), libm::sin(th))
                })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for &n in &[1usize, 2, 4, 8, 32, 64] {
            let x: Vec<_> = (0..n)
                .map(|j| Complex64::new(libm::sin(j as f64 * 0.7) + 0.1, libm::cos(j as f64 * 1.3)))
                .collect();
            let mut y = x.clone();
            Fft::new(n).forward(&mut y);
            let z = naive(&x, -1.0);
            for (a, b) in y.iter().zip(&z) {
                assert!((a - b).norm() < 1e-11, "n={n}");
            }
            let mut w = x.clone();
            Fft::new(n).inverse(&mut w);
            let z = naive(&x, 1.0);
            for (a, b) in w.iter().zip(&z) {
                assert!((a - b).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn roundtrip_2d() {
        let n = 16;
        let x: Vec<_> = (0..n * n).map(|j| Complex64::new((j % 7) as f64, (j % 5) as f64 - 2.0)).collect();
        let mut y = x.clone();
        fft_nd(&mut y, n, 2, false);
        fft_nd(&mut y, n, 2, true);
        for (a, b) in y.iter().zip(&x) {
            assert!((a / (n * n) as f64 - b).norm() < 1e-12);
        }
        // single 2D mode lands in the right bin
        let mut e = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                let th = 2.0 * PI * ((3 * r + 5 * c) as f64) / n as f64;
                e[r * n + c] = Complex64::new(libm::cos(th), libm::sin(th));
            }
        }
        fft_nd(&mut e, n, 2, false);
        for (i, v) in e.iter().enumerate() {
            let expect = if i == 3 * n + 5 { (n * n) as f64 } else { 0.0 };
            assert!((v.re - expect).abs() < 1e-9 && v.im.abs() < 1e-9);
        }
    }
}
