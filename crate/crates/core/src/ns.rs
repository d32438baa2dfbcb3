//! 2D incompressible Navier-Stokes on the torus: pseudo-spectral, 2/3-rule
//! dealiased, integrating-factor RK4 with the exact viscous factor.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::bank::LPBank;
use crate::error::{Error, Result};
use crate::field::{outer_padded, SpectralField};
use crate::grid::GridSpec;
use crate::synth::{self, SynthOptions};

const FOUR_PI2: f64 = 4.0 * PI * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dealias {
    /// Keep `|ξ_j| ≤ ⌊(n−1)/3⌋` in every direction.
    TwoThirds,
    None,
}

impl Dealias {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2/3" | "two_thirds" | "twothirds" => Ok(Dealias::TwoThirds),
            "none" | "off" => Ok(Dealias::None),
            other => Err(Error::param("dealias", format!("unknown rule `{other}` (use `2/3` or `none`)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dealias::TwoThirds => "2/3",
            Dealias::None => "none",
        }
    }

    /// Largest retained `|ξ_j|`.
    pub fn cutoff(&self, n: usize) -> usize {
        match self {
            Dealias::TwoThirds => (n - 1) / 3,
            Dealias::None => n / 2,
        }
    }

    fn mask(&self, grid: GridSpec) -> Vec<f64> {
        let kc = self.cutoff(grid.n()) as i64;
        (0..grid.len())
            .map(|i| {
                let [a, b] = grid.wavevector(i);
                if a.abs() <= kc && b.abs() <= kc {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub dealias: Dealias,
    /// `false` switches the nonlinear term off (pure heat flow).
    pub nonlinear: bool,
    /// Abort when the energy grows by more than `1e-8` relative in a step.
    pub check_energy: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { dealias: Dealias::TwoThirds, nonlinear: true, check_energy: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub u_hat: SpectralField,
    pub t: f64,
    pub nu: f64,
    pub step_count: u64,
}

impl SolverState {
    pub fn new(u_hat: SpectralField, nu: f64) -> Self {
        SolverState { u_hat, t: 0.0, nu, step_count: 0 }
    }

    pub fn grid(&self) -> GridSpec {
        self.u_hat.grid()
    }
}

fn require_vector_2d(v: &SpectralField) -> Result<()> {
    if v.grid().d() != 2 || v.components() != 2 {
        return Err(Error::Shape(format!(
            "expected a 2-component field on a 2D grid, got {} components in d = {}",
            v.components(),
            v.grid().d()
        )));
    }
    Ok(())
}

/// `û ↦ (I − ξξᵀ/|ξ|²)û`; the mean passes through. Works for `d ∈ {1,2}`
/// vector fields (in 1D the result is the mean alone).
pub fn leray_project(v: &SpectralField) -> Result<SpectralField> {
    let g = v.grid();
    let d = g.d();
    if v.components() != d || (d == 2 && v.components() == 1) {
        return Err(Error::Shape("Leray projection needs a vector field".into()));
    }
    let len = g.len();
    let mut out = v.clone();
    let c = out.coeffs_mut();
    for i in 0..len {
        let k = g.deriv_wavevector(i);
        let k2 = k[0] * k[0] + k[1] * k[1];
        if k2 == 0.0 {
            continue;
        }
        if d == 1 {
            c[i] = Complex64::new(0.0, 0.0);
            continue;
        }
        let (a, b) = (c[i], c[len + i]);
        let dot = (a * k[0] + b * k[1]) / k2;
        c[i] = a - dot * k[0];
        c[len + i] = b - dot * k[1];
    }
    Ok(out)
}

/// `−P_L ∇·(u⊗u)` with the given dealiasing, plus `max|u|` on the grid.
fn rhs_with(u: &SpectralField, mask: &[f64]) -> (SpectralField, f64) {
    let g = u.grid();
    let len = g.len();
    let phys = u.to_physical();
    let (ux, uy) = phys.split_at(len);
    let mut prods = vec![0.0; 3 * len];
    let mut vmax: f64 = 0.0;
    for p in 0..len {
        prods[p] = ux[p] * ux[p];
        prods[len + p] = ux[p] * uy[p];
        prods[2 * len + p] = uy[p] * uy[p];
        vmax = vmax.max(prods[p] + prods[2 * len + p]);
    }
    let a = SpectralField::from_physical(g, 3, &prods).expect("shape");
    let ac = a.coeffs();
    let mut out = SpectralField::zeros(g, 2);
    let oc = out.coeffs_mut();
    for i in 0..len {
        if mask[i] == 0.0 {
            continue;
        }
        let k = g.deriv_wavevector(i);
        let ik = [Complex64::new(0.0, 2.0 * PI * k[0]), Complex64::new(0.0, 2.0 * PI * k[1])];
        let (axx, axy, ayy) = (ac[i], ac[len + i], ac[2 * len + i]);
        let nx = -(ik[0] * axx + ik[1] * axy);
        let ny = -(ik[0] * axy + ik[1] * ayy);
        let k2 = k[0] * k[0] + k[1] * k[1];
        let (px, py) = if k2 == 0.0 {
            (nx, ny)
        } else {
            let dot = (nx * k[0] + ny * k[1]) / k2;
            (nx - dot * k[0], ny - dot * k[1])
        };
        oc[i] = px;
        oc[len + i] = py;
    }
    (out, libm::sqrt(vmax))
}

/// `−P_L(u·∇u)` computed pseudo-spectrally with 2/3-rule dealiasing.
pub fn nonlinear_rhs(u_hat: &SpectralField) -> Result<SpectralField> {
    nonlinear_rhs_with(u_hat, Dealias::TwoThirds)
}

pub fn nonlinear_rhs_with(u_hat: &SpectralField, dealias: Dealias) -> Result<SpectralField> {
    require_vector_2d(u_hat)?;
    let mask = dealias.mask(u_hat.grid());
    let masked = u_hat.apply_symbol(|i| mask[i]);
    Ok(rhs_with(&masked, &mask).0)
}

/// Pressure solving `Δp = −∂_i∂_j(u^iu^j)`, mean zero. The products are
/// formed on a doubled grid so the retained coefficients are exact.
pub fn pressure(u_hat: &SpectralField) -> Result<SpectralField> {
    require_vector_2d(u_hat)?;
    let g = u_hat.grid();
    let len = g.len();
    let a = outer_padded(u_hat, u_hat)?;
    let ac = a.coeffs();
    let mut p = SpectralField::zeros(g, 1);
    let pc = p.coeffs_mut();
    for i in 1..len {
        let k = g.deriv_wavevector(i);
        let mut s = Complex64::new(0.0, 0.0);
        for r in 0..2 {
            for c in 0..2 {
                s += ac[(2 * r + c) * len + i] * (k[r] * k[c]);
            }
        }
        pc[i] = -s / g.norm2(i);
    }
    Ok(p)
}

/// Stepper holding the dealias mask and cached viscous factors.
#[derive(Clone, Debug)]
pub struct Solver {
    grid: GridSpec,
    nu: f64,
    opts: SolverOptions,
    mask: Vec<f64>,
    cached_dt: f64,
    e_full: Vec<f64>,
    e_half: Vec<f64>,
}

impl Solver {
    pub fn new(grid: GridSpec, nu: f64, opts: SolverOptions) -> Result<Self> {
        if grid.d() != 2 {
            return Err(Error::InvalidGrid("the Navier-Stokes solver is 2D only".into()));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::param("nu", format!("must be positive, got {nu}")));
        }
        Ok(Solver {
            grid,
            nu,
            opts,
            mask: opts.dealias.mask(grid),
            cached_dt: f64::NAN,
            e_full: Vec::new(),
            e_half: Vec::new(),
        })
    }

    pub fn options(&self) -> SolverOptions {
        self.opts
    }

    /// Project onto divergence-free fields and apply the dealias mask.
    pub fn prepare(&self, u: &SpectralField) -> Result<SpectralField> {
        require_vector_2d(u)?;
        Ok(leray_project(u)?.apply_symbol(|i| self.mask[i]))
    }

    fn factors(&mut self, dt: f64) {
        if self.cached_dt == dt {
            return;
        }
        let s = FOUR_PI2 * self.nu * dt;
        let g = self.grid;
        self.e_full = (0..g.len()).map(|i| libm::exp(-s * g.norm2(i))).collect();
        self.e_half = (0..g.len()).map(|i| libm::exp(-0.5 * s * g.norm2(i))).collect();
        self.cached_dt = dt;
    }

    fn rhs(&self, u: &SpectralField) -> (SpectralField, f64) {
        if self.opts.nonlinear {
            rhs_with(u, &self.mask)
        } else {
            // no advection, so no CFL constraint
            (SpectralField::zeros(u.grid(), 2), 0.0)
        }
    }

    /// One Lawson RK4 step of size `dt`.
    pub fn step(&mut self, state: &SolverState, dt: f64) -> Result<SolverState> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if state.u_hat.grid() != self.grid {
            return Err(Error::Shape("state grid differs from the solver grid".into()));
        }
        self.factors(dt);
        let (ef, eh) = (&self.e_full, &self.e_half);
        let u = &state.u_hat;
        let (k1, vmax) = self.rhs(u);
        let limit = 0.5 / (self.grid.n() as f64 * vmax);
        if vmax > 0.0 && dt > limit {
            return Err(Error::Cfl { dt, limit });
        }
        let len = self.grid.len();
        let combine = |f: &dyn Fn(usize, usize) -> Complex64| -> SpectralField {
            let mut out = SpectralField::zeros(self.grid, 2);
            let oc = out.coeffs_mut();
            for c in 0..2 {
                for i in 0..len {
                    oc[c * len + i] = f(c * len + i, i);
                }
            }
            out
        };
        let (uc, k1c) = (u.coeffs(), k1.coeffs());
        let s2 = combine(&|p, i| (uc[p] + k1c[p] * (0.5 * dt)) * eh[i]);
        let (k2, _) = self.rhs(&s2);
        let k2c = k2.coeffs();
        let s3 = combine(&|p, i| uc[p] * eh[i] + k2c[p] * (0.5 * dt));
        let (k3, _) = self.rhs(&s3);
        let k3c = k3.coeffs();
        let s4 = combine(&|p, i| uc[p] * ef[i] + k3c[p] * (dt * eh[i]));
        let (k4, _) = self.rhs(&s4);
        let k4c = k4.coeffs();
        let next = combine(&|p, i| {
            uc[p] * ef[i] + (k1c[p] * ef[i] + (k2c[p] + k3c[p]) * (2.0 * eh[i]) + k4c[p]) * (dt / 6.0)
        });
        let step_count = state.step_count + 1;
        let t = step_count as f64 * dt;
        if next.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite { step: step_count, t });
        }
        if self.opts.check_energy {
            let (before, after) = (u.energy(), next.energy());
            if after > before * (1.0 + 1e-8) + f64::MIN_POSITIVE {
                return Err(Error::EnergyIncrease { step: step_count, before, after });
            }
        }
        Ok(SolverState { u_hat: next, t, nu: state.nu, step_count })
    }
}

/// One step with default options.
pub fn step(state: &SolverState, dt: f64) -> Result<SolverState> {
    Solver::new(state.grid(), state.nu, SolverOptions::default())?.step(state, dt)
}

/// Stored solver output at uniformly spaced times.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSeries {
    pub grid: GridSpec,
    pub nu: f64,
    /// Solver time step.
    pub dt: f64,
    pub snapshot_every: usize,
    pub dealias: Dealias,
    pub nonlinear: bool,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
    pub energies: Vec<f64>,
    /// True if `u0` needed projection or masking before the run.
    pub initial_projected: bool,
}

impl SnapshotSeries {
    /// Spacing between stored snapshots.
    pub fn snapshot_dt(&self) -> f64 {
        self.dt * self.snapshot_every as f64
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Subseries of snapshots `start..end`.
    pub fn window(&self, start: usize, end: usize) -> SnapshotSeries {
        let mut s = self.clone();
        s.times = self.times[start..end].to_vec();
        s.fields = self.fields[start..end].to_vec();
        s.energies = self.energies[start..end].to_vec();
        s
    }
}

/// Integrate from `u0` to `t_end`, storing every `snapshot_every`-th state
/// (including `t = 0`).
pub fn run(
    u0: &SpectralField,
    nu: f64,
    t_end: f64,
    dt: f64,
    snapshot_every: usize,
    opts: SolverOptions,
) -> Result<SnapshotSeries> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::param("dt", format!("dt = {dt} and t_end = {t_end} must both be positive")));
    }
    if snapshot_every == 0 {
        return Err(Error::param("snapshot_every", "must be at least 1"));
    }
    let steps_f = libm::round(t_end / dt);
    let steps = steps_f as u64;
    if (steps_f * dt - t_end).abs() > 1e-9 * t_end || steps % snapshot_every as u64 != 0 {
        return Err(Error::param(
            "t_end",
            format!("t_end = {t_end} is not a whole number of snapshot intervals dt·snapshot_every = {}", dt * snapshot_every as f64),
        ));
    }
    let mut solver = Solver::new(u0.grid(), nu, opts)?;
    let prepared = solver.prepare(u0)?;
    let initial_projected = prepared.max_abs_diff(u0)? > 1e-14 * u0.coeff_norm().max(f64::MIN_POSITIVE);
    let mut state = SolverState::new(prepared, nu);
    let mut series = SnapshotSeries {
        grid: u0.grid(),
        nu,
        dt,
        snapshot_every,
        dealias: opts.dealias,
        nonlinear: opts.nonlinear,
        times: vec![0.0],
        fields: vec![state.u_hat.clone()],
        energies: vec![state.u_hat.energy()],
        initial_projected,
    };
    for s in 1..=steps {
        state = solver.step(&state, dt)?;
        if s % snapshot_every as u64 == 0 {
            series.times.push(state.t);
            series.energies.push(state.u_hat.energy());
            series.fields.push(state.u_hat.clone());
        }
    }
    Ok(series)
}

/// `A·(sin2πx cos2πy, −cos2πx sin2πy)`
pub fn taylor_green(grid: GridSpec, amplitude: f64) -> Result<SpectralField> {
    if grid.d() != 2 {
        return Err(Error::InvalidGrid("Taylor-Green is a 2D flow".into()));
    }
    let len = grid.len();
    let mut v = vec![0.0; 2 * len];
    for p in 0..len {
        let [x, y] = grid.point(p);
        let (sx, cx) = (libm::sin(2.0 * PI * x), libm::cos(2.0 * PI * x));
        let (sy, cy) = (libm::sin(2.0 * PI * y), libm::cos(2.0 * PI * y));
        v[p] = amplitude * sx * cy;
        v[len + p] = -amplitude * cx * sy;
    }
    SpectralField::from_physical(grid, 2, &v)
}

/// Rough initial data: a lacunary Hölder field cut off at `max_radius`
/// (default: two thirds of Nyquist), projected and dealiased.
pub fn holder_initial_data(
    grid: GridSpec,
    bank: &LPBank,
    alpha: f64,
    seed: u64,
    amplitude: f64,
    max_radius: Option<f64>,
) -> Result<SpectralField> {
    let cutoff = max_radius.unwrap_or(Dealias::TwoThirds.cutoff(grid.n()) as f64);
    let f = synth::synth_holder_field_with(grid, bank, alpha, seed, SynthOptions { max_radius: Some(cutoff), amplitude });
    let mask = Dealias::TwoThirds.mask(grid);
    Ok(leray_project(&f)?.apply_symbol(|i| mask[i]))
}
