use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("band index {k} outside realized range [{lo}, {hi}]")]
    BandOutOfRange { k: i32, lo: i32, hi: i32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("product not alias-free: content radii {left} + {right} must stay below {limit}")]
    Aliasing { left: usize, right: usize, limit: usize },
    #[error("annulus contains no representable lattice frequency")]
    EmptyAnnulus,
    #[error("support outside the admissible shell: {0}")]
    SupportOutsideShell(String),
    #[error("zero field")]
    ZeroField,
    #[error("CFL violated: dt = {dt:e} exceeds limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("non-finite state at step {step} (t = {t})")]
    NonFinite { step: u64, t: f64 },
    #[error("energy increased at step {step}: {before:e} -> {after:e}")]
    EnergyIncrease { step: u64, before: f64, after: f64 },
    #[error("snapshot index {index} leaves no room for a stencil of half-width {half_width} (series has {len} snapshots)")]
    StencilBoundary { index: usize, half_width: usize, len: usize },
    #[error("missing data: {0}")]
    Missing(String),
    #[error("no admissible rows: {0}")]
    NoAdmissibleRows(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
