//! Spectral fields and the exact Fourier-symbol calculus on them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::fft_nd;
use crate::grid::GridSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients below this fraction of the largest one count as round-off
/// when measuring frequency content.
pub const CONTENT_TOL: f64 = 1e-12;

/// Fourier coefficients of a real scalar, vector or tensor field.
///
/// Components are stored one after another, each in the grid's FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec, components: usize) -> Self {
        SpectralField { grid, components, coeffs: vec![ZERO; grid.len() * components] }
    }

    pub fn from_coeffs(grid: GridSpec, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if components == 0 || coeffs.len() != grid.len() * components {
            return Err(Error::Shape(format!(
                "expected {} coefficients for {} components, got {}",
                grid.len() * components,
                components,
                coeffs.len()
            )));
        }
        Ok(SpectralField { grid, components, coeffs })
    }

    /// Transform component-major physical samples to coefficients.
    pub fn from_physical(grid: GridSpec, components: usize, values: &[f64]) -> Result<Self> {
        let len = grid.len();
        if components == 0 || values.len() != len * components {
            return Err(Error::Shape(format!(
                "expected {} physical values, got {}",
                len * components,
                values.len()
            )));
        }
        let scale = 1.0 / len as f64;
        let mut coeffs: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v * scale, 0.0)).collect();
        for chunk in coeffs.chunks_exact_mut(len) {
            fft_nd(chunk, grid.n(), grid.d(), false);
        }
        Ok(SpectralField { grid, components, coeffs })
    }

    /// Values on the collocation grid, component-major. Imaginary round-off
    /// is discarded.
    pub fn to_physical(&self) -> Vec<f64> {
        let len = self.grid.len();
        let mut out = Vec::with_capacity(self.coeffs.len());
        let mut buf = vec![ZERO; len];
        for chunk in self.coeffs.chunks_exact(len) {
            buf.copy_from_slice(chunk);
            fft_nd(&mut buf, self.grid.n(), self.grid.d(), true);
            out.extend(buf.iter().map(|c| c.re));
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component(&self, i: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[i * len..(i + 1) * len]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.coeffs[i * len..(i + 1) * len]
    }

    /// Single component as a scalar field.
    pub fn extract(&self, i: usize) -> SpectralField {
        SpectralField { grid: self.grid, components: 1, coeffs: self.component(i).to_vec() }
    }

    /// Stack fields on the same grid into one multi-component field.
    pub fn stack(parts: &[SpectralField]) -> Result<SpectralField> {
        let first = parts.first().ok_or_else(|| Error::Shape("nothing to stack".into()))?;
        let mut coeffs = Vec::new();
        let mut components = 0;
        for p in parts {
            if p.grid != first.grid {
                return Err(Error::Shape("stacked fields live on different grids".into()));
            }
            coeffs.extend_from_slice(&p.coeffs);
            components += p.components;
        }
        Ok(SpectralField { grid: first.grid, components, coeffs })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Multiply every component by a real symbol `s(idx)`.
    pub fn apply_symbol(&self, mut symbol: impl FnMut(usize) -> f64) -> SpectralField {
        let len = self.grid.len();
        let sym: Vec<f64> = (0..len).map(&mut symbol).collect();
        let mut out = self.clone();
        for chunk in out.coeffs.chunks_exact_mut(len) {
            for (c, s) in chunk.iter_mut().zip(&sym) {
                *c *= *s;
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    fn check_same(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid || self.components != other.components {
            return Err(Error::Shape(format!(
                "field shapes differ: ({:?}, {}) vs ({:?}, {})",
                self.grid, self.components, other.grid, other.components
            )));
        }
        Ok(())
    }

    /// `self += s·other`
    pub fn axpy(&mut self, s: f64, other: &SpectralField) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
        Ok(())
    }

    pub fn plus(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn minus(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Euclidean norm of the coefficient array, `‖f̂‖`.
    pub fn coeff_norm(&self) -> f64 {
        libm::sqrt(self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>())
    }

    /// `½∫|f|²` by Parseval.
    pub fn energy(&self) -> f64 {
        0.5 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Largest `max_j |ξ_j|` carrying a coefficient above `rel_tol·max|f̂|`.
    pub fn content_radius(&self, rel_tol: f64) -> usize {
        let peak = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0;
        }
        let len = self.grid.len();
        let mut r = 0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.norm() > rel_tol * peak {
                let [a, b] = self.grid.wavevector(i % len);
                r = r.max(a.unsigned_abs().max(b.unsigned_abs()) as usize);
            }
        }
        r
    }

    /// Largest `|ξ|` carrying a coefficient above `rel_tol·max|f̂|`.
    pub fn content_norm_radius(&self, rel_tol: f64) -> f64 {
        let peak = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let len = self.grid.len();
        let mut r2: f64 = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if peak > 0.0 && c.norm() > rel_tol * peak {
                r2 = r2.max(self.grid.norm2(i % len));
            }
        }
        libm::sqrt(r2)
    }

    /// `max_ξ |f̂(−ξ) − conj f̂(ξ)|`; zero for real fields.
    pub fn hermitian_defect(&self) -> f64 {
        let len = self.grid.len();
        let mut worst: f64 = 0.0;
        for chunk in self.coeffs.chunks_exact(len) {
            for idx in 0..len {
                let j = self.grid.conj_index(idx);
                worst = worst.max((chunk[j] - chunk[idx].conj()).norm());
            }
        }
        worst
    }

    /// Replace coefficients by their Hermitian-symmetric part.
    pub fn symmetrize(&mut self) {
        let len = self.grid.len();
        let grid = self.grid;
        for chunk in self.coeffs.chunks_exact_mut(len) {
            for idx in 0..len {
                let j = grid.conj_index(idx);
                if j >= idx {
                    let v = (chunk[idx] + chunk[j].conj()) * 0.5;
                    chunk[idx] = v;
                    chunk[j] = v.conj();
                }
            }
        }
    }

    /// `max_ξ |Σ_j 2πiξ_j f̂_j(ξ)| / ‖f̂‖` for a vector field.
    pub fn divergence_defect(&self) -> Result<f64> {
        let div = divergence(self)?;
        let norm = self.coeff_norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        Ok(div.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max) / norm)
    }

    /// Spectral resampling to `n` modes per dimension: zero-padding when
    /// growing (a Nyquist coefficient is split evenly between `±n/2`), exact
    /// truncation when shrinking (the new Nyquist slot is left empty).
    pub fn resample(&self, n: usize) -> Result<SpectralField> {
        let target = self.grid.with_n(n)?;
        if n == self.grid.n() {
            return Ok(self.clone());
        }
        let (src, d) = (self.grid, self.grid.d());
        let len = src.len();
        let mut out = SpectralField::zeros(target, self.components);
        let half_src = (src.n() / 2) as i64;
        let half_dst = (n / 2) as i64;
        for (comp, chunk) in self.coeffs.chunks_exact(len).enumerate() {
            let dst = out.component_mut(comp);
            for (idx, &c) in chunk.iter().enumerate() {
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let xi = src.wavevector(idx);
                if n < src.n() {
                    if xi[..d].iter().any(|x| x.abs() >= half_dst) {
                        continue;
                    }
                    dst[target.index_of(xi).unwrap()] += c;
                    continue;
                }
                // growing: split Nyquist components
                let opts = |x: i64| -> ([i64; 2], usize) {
                    if x == half_src {
                        ([x, -x], 2)
                    } else {
                        ([x, x], 1)
                    }
                };
                let (a, na) = opts(xi[0]);
                let (b, nb) = if d == 2 { opts(xi[1]) } else { ([0, 0], 1) };
                let w = 1.0 / (na * nb) as f64;
                for &p in &a[..na] {
                    for &q in &b[..nb] {
                        dst[target.index_of([p, q]).unwrap()] += c * w;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Pointwise Euclidean magnitude on the collocation grid.
    pub fn magnitude_physical(&self) -> Vec<f64> {
        let len = self.grid.len();
        let phys = self.to_physical();
        let mut mag = vec![0.0; len];
        for chunk in phys.chunks_exact(len) {
            for (m, v) in mag.iter_mut().zip(chunk) {
                *m += v * v;
            }
        }
        mag.iter_mut().for_each(|m| *m = libm::sqrt(*m));
        mag
    }
}

/// Grid maximum of `|f|` after spectral upsampling by `refine` (rounded up
/// to a power of two, at least 1).
pub fn sup_norm(f: &SpectralField, refine: usize) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    let refine = refine.max(1).next_power_of_two();
    let g = if refine == 1 {
        f.clone()
    } else {
        // growing never fails on a valid grid
        f.resample(f.grid.n() * refine).expect("upsampling a valid grid")
    };
    g.magnitude_physical().into_iter().fold(0.0, f64::max)
}

/// `∂_j f_i` stored at component `i·d + j`.
pub fn gradient(f: &SpectralField) -> SpectralField {
    let grid = f.grid;
    let (d, len) = (grid.d(), grid.len());
    let mut out = SpectralField::zeros(grid, f.components * d);
    for i in 0..f.components {
        let src = f.component(i);
        for j in 0..d {
            let dst = out.component_mut(i * d + j);
            for idx in 0..len {
                let k = grid.deriv_wavevector(idx)[j];
                dst[idx] = src[idx] * Complex64::new(0.0, 2.0 * PI * k);
            }
        }
    }
    out
}

/// `∂_j f` for a single axis, all components.
pub fn partial(f: &SpectralField, axis: usize) -> SpectralField {
    let grid = f.grid;
    let len = grid.len();
    let mut out = f.clone();
    for chunk in out.coeffs.chunks_exact_mut(len) {
        for (idx, c) in chunk.iter_mut().enumerate() {
            *c *= Complex64::new(0.0, 2.0 * PI * grid.deriv_wavevector(idx)[axis]);
        }
    }
    out
}

/// `Σ_j ∂_j f_j`. Requires `components == d`; for tensors with `c·d`
/// components use [`row_divergence`].
pub fn divergence(f: &SpectralField) -> Result<SpectralField> {
    let d = f.grid.d();
    if f.components != d || (d == 1 && f.components != 1) {
        return Err(Error::Shape(format!(
            "divergence needs a {d}-component vector field, got {} components",
            f.components
        )));
    }
    let mut out = SpectralField::zeros(f.grid, 1);
    for j in 0..d {
        let src = f.component(j);
        let dst = out.component_mut(0);
        for idx in 0..f.grid.len() {
            let k = f.grid.deriv_wavevector(idx)[j];
            dst[idx] += src[idx] * Complex64::new(0.0, 2.0 * PI * k);
        }
    }
    Ok(out)
}

/// Divergence over the last index of a `c × d` tensor: `(div A)_i = ∂_j A_ij`.
pub fn row_divergence(a: &SpectralField) -> Result<SpectralField> {
    let d = a.grid.d();
    if a.components % d != 0 {
        return Err(Error::Shape(format!("{} components is not a multiple of d = {d}", a.components)));
    }
    let rows = a.components / d;
    let mut out = SpectralField::zeros(a.grid, rows);
    for i in 0..rows {
        for j in 0..d {
            let src = a.component(i * d + j).to_vec();
            let dst = out.component_mut(i);
            for idx in 0..a.grid.len() {
                let k = a.grid.deriv_wavevector(idx)[j];
                dst[idx] += src[idx] * Complex64::new(0.0, 2.0 * PI * k);
            }
        }
    }
    Ok(out)
}

pub fn laplacian(f: &SpectralField) -> SpectralField {
    let grid = f.grid;
    f.apply_symbol(|idx| -4.0 * PI * PI * grid.norm2(idx))
}

/// `(u·∇)v` for `u` with `d` components and any `v`, via physical products.
/// Requires the product to be alias-free on the grid.
pub fn advect(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    let d = u.grid.d();
    if u.components != d {
        return Err(Error::Shape("advecting field must be a vector".into()));
    }
    let gv = gradient(v);
    let ku = u.content_radius(CONTENT_TOL);
    let kv = gv.content_radius(CONTENT_TOL);
    check_alias(ku, kv, u.grid.n())?;
    let len = u.grid.len();
    let up = u.to_physical();
    let gp = gv.to_physical();
    let mut out = vec![0.0; len * v.components];
    for i in 0..v.components {
        for j in 0..d {
            let g = &gp[(i * d + j) * len..(i * d + j + 1) * len];
            let uj = &up[j * len..(j + 1) * len];
            let o = &mut out[i * len..(i + 1) * len];
            for p in 0..len {
                o[p] += uj[p] * g[p];
            }
        }
    }
    SpectralField::from_physical(u.grid, v.components, &out)
}

pub(crate) fn check_alias(left: usize, right: usize, n: usize) -> Result<()> {
    if left + right >= n / 2 {
        return Err(Error::Aliasing { left, right, limit: n / 2 });
    }
    Ok(())
}

/// Outer product `a_i b_j` at component `i·c_b + j`, exact on the grid.
pub fn outer(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    if a.grid != b.grid {
        return Err(Error::Shape("outer product of fields on different grids".into()));
    }
    check_alias(a.content_radius(CONTENT_TOL), b.content_radius(CONTENT_TOL), a.grid.n())?;
    Ok(outer_unchecked(a, b))
}

/// Outer product without the alias check (callers handle dealiasing).
pub fn outer_unchecked(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let len = a.grid.len();
    let ap = a.to_physical();
    let bp = if core::ptr::eq(a, b) { ap.clone() } else { b.to_physical() };
    let (ca, cb) = (a.components, b.components);
    let mut out = vec![0.0; len * ca * cb];
    for i in 0..ca {
        for j in 0..cb {
            let o = &mut out[(i * cb + j) * len..(i * cb + j + 1) * len];
            let x = &ap[i * len..(i + 1) * len];
            let y = &bp[j * len..(j + 1) * len];
            for p in 0..len {
                o[p] = x[p] * y[p];
            }
        }
    }
    SpectralField::from_physical(a.grid, ca * cb, &out).expect("consistent shapes")
}

/// Outer product computed on a twice finer grid and truncated back, so the
/// retained coefficients are exact whatever the input content.
pub fn outer_padded(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    if a.grid != b.grid {
        return Err(Error::Shape("outer product of fields on different grids".into()));
    }
    let n = a.grid.n();
    let ap = a.resample(2 * n)?;
    let bp = b.resample(2 * n)?;
    outer_unchecked(&ap, &bp).resample(n)
}
