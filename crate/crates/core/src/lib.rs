//! Spectral laboratory core: Fourier machinery on the periodic unit torus.
//!
//! Everything here is a pure function of its inputs and runs without `std`
//! (only `alloc` is required). Fields live in Fourier space with the
//! convention `f(x) = Σ_ξ f̂(ξ) e^{2πi ξ·x}` on `[0,1)^d`, so the Laplacian
//! symbol is `−4π²|ξ|²`.
//!
//! Module map:
//! - [`grid`], [`field`], [`fft`]: grids, spectral fields, transforms, calculus.
//! - [`bank`], [`synth`]: the `(1+δ)`-adic Littlewood-Paley bank, Hölder norms,
//!   synthetic Hölder fields.
//! - [`heat`]: exact heat semigroup and the thin-annulus experiments.
//! - [`ns`]: 2D pseudo-spectral Navier-Stokes solver.
//! - [`lagrangian`]: particle advection, Gronwall and trajectory-Hölder checks.
//! - [`verifier`]: Reynolds stress, forcing, material derivatives and the
//!   bound reports built from them.
//! - [`structure`]: structure functions and scaling-exponent fits.

#![no_std]

extern crate alloc;

pub mod bank;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod heat;
pub mod lagrangian;
pub mod ns;
pub mod report;
pub mod rng;
pub mod stats;
pub mod structure;
pub mod synth;
pub mod trig;
pub mod verifier;

pub use bank::{HolderEstimate, LPBank};
pub use error::{Error, Result};
pub use field::SpectralField;
pub use grid::GridSpec;
pub use num_complex::Complex64;
pub use report::{BoundReport, BoundRow, EstimateId};

