//! Experiment configuration: TOML with sections, validated up front.

use std::path::{Path, PathBuf};

use hlab_core::heat::NormExp;
use hlab_core::ns::Dealias;
use hlab_core::EstimateId;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, LabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub bank: BankConfig,
    pub solver: SolverConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BankConfig {
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub nu: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub seed: u64,
    /// Hölder exponent of the synthesized initial data.
    pub alpha: f64,
    pub amplitude: f64,
    pub dealias: String,
    /// `holder` or `taylor-green`.
    pub initial: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub estimates: Vec<String>,
    pub a: Vec<f64>,
    pub p: Vec<u32>,
    pub particles: usize,
    /// Band for the coarse-flow twins; chosen mid-band when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traj_k: Option<i32>,
    /// Empty lists mean "choose automatically".
    pub eulerian_lags: Vec<usize>,
    pub lagrangian_lags: Vec<usize>,
    pub separations: Vec<f64>,
    pub stride: usize,
    pub sf_samples: usize,
    pub sf_probes: usize,
    pub lp_energy_p: u32,
    pub substeps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

pub const ALL_ESTIMATES: [&str; 9] = ["E1", "CET", "FK", "M1", "M2", "M3", "M5", "M6", "LP-ENERGY"];

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Raw {
    grid: Option<RawGrid>,
    bank: Option<RawBank>,
    solver: Option<RawSolver>,
    analysis: Option<RawAnalysis>,
    output: Option<RawOutput>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    d: Option<usize>,
    n: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBank {
    delta: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    nu: Option<NuList>,
    dt: Option<f64>,
    t_end: Option<f64>,
    snapshot_every: Option<usize>,
    seed: Option<u64>,
    alpha: Option<f64>,
    amplitude: Option<f64>,
    dealias: Option<String>,
    initial: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NuList {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    estimates: Option<Vec<String>>,
    a: Option<Vec<f64>>,
    p: Option<Vec<u32>>,
    particles: Option<usize>,
    traj_k: Option<i32>,
    eulerian_lags: Option<Vec<usize>>,
    lagrangian_lags: Option<Vec<usize>>,
    separations: Option<Vec<f64>>,
    stride: Option<usize>,
    sf_samples: Option<usize>,
    sf_probes: Option<usize>,
    lp_energy_p: Option<u32>,
    substeps: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

struct Diag(Vec<String>);

impl Diag {
    fn need<T>(&mut self, key: &str, v: Option<T>) -> Option<T> {
        if v.is_none() {
            self.0.push(format!("{key}: required field is missing"));
        }
        v
    }

    fn check(&mut self, ok: bool, key: &str, msg: impl std::fmt::Display) {
        if !ok {
            self.0.push(format!("{key}: {msg}"));
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml_with(&text, overrides)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parse, apply `key=value` overrides (dotted keys, TOML values with a
    /// bare-string fallback), then validate.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| LabError::Config(vec![e.message().to_string()]))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let raw: Raw = table.try_into().map_err(|e: toml::de::Error| LabError::Config(vec![e.message().to_string()]))?;
        validate(raw)
    }

    /// Canonical serialization; parsing it back gives an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn dealias(&self) -> Dealias {
        Dealias::parse(&self.solver.dealias).expect("validated")
    }

    pub fn estimates(&self) -> Vec<EstimateId> {
        self.analysis.estimates.iter().map(|s| EstimateId::parse(s).expect("validated")).collect()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let bad = |m: &str| LabError::Config(vec![format!("--set {spec}: {m}")]);
    let (key, value) = spec.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().ok_or_else(|| bad("empty key"))?;
    let mut cur = table;
    for p in path {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        cur = entry.as_table_mut().ok_or_else(|| bad(&format!("`{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

fn validate(raw: Raw) -> Result<ExperimentConfig> {
    let mut e = Diag(Vec::new());
    let g = raw.grid.unwrap_or_default();
    let b = raw.bank.unwrap_or_default();
    let s = raw.solver.unwrap_or_default();
    let a = raw.analysis.unwrap_or_default();
    let o = raw.output.unwrap_or_default();

    let d = e.need("grid.d", g.d);
    let n = e.need("grid.n", g.n);
    let delta = e.need("bank.delta", b.delta);
    let nu = e.need("solver.nu", s.nu).map(|v| match v {
        NuList::One(x) => vec![x],
        NuList::Many(v) => v,
    });
    let dt = e.need("solver.dt", s.dt);
    let t_end = e.need("solver.t_end", s.t_end);
    let every = e.need("solver.snapshot_every", s.snapshot_every);
    let seed = e.need("solver.seed", s.seed);
    let alpha = e.need("solver.alpha", s.alpha);

    if let Some(d) = d {
        e.check(d == 1 || d == 2, "grid.d", format_args!("must be 1 or 2, got {d}"));
    }
    if let Some(n) = n {
        e.check(n >= 8 && n.is_power_of_two(), "grid.n", format_args!("must be a power of two >= 8, got {n}"));
    }
    if let Some(delta) = delta {
        e.check(delta > 0.0 && delta.is_finite(), "bank.delta", format_args!("must be positive, got {delta}"));
        if let (Some(d), Some(n)) = (d, n) {
            if (d == 1 || d == 2) && n >= 8 && n.is_power_of_two() && delta > 0.0 {
                if let Err(err) = hlab_core::GridSpec::new(d, n).and_then(|g| hlab_core::LPBank::new(g, delta)) {
                    e.check(false, "bank.delta", err);
                }
            }
        }
    }
    if let Some(nu) = &nu {
        e.check(!nu.is_empty(), "solver.nu", "list is empty");
        for v in nu {
            e.check(*v > 0.0 && v.is_finite(), "solver.nu", format_args!("viscosity must be positive, got {v}"));
        }
    }
    if let Some(dt) = dt {
        e.check(dt > 0.0 && dt.is_finite(), "solver.dt", format_args!("must be positive, got {dt}"));
    }
    if let Some(every) = every {
        e.check(every >= 1, "solver.snapshot_every", "must be at least 1");
    }
    if let (Some(dt), Some(t_end), Some(every)) = (dt, t_end, every) {
        e.check(t_end > 0.0, "solver.t_end", format_args!("must be positive, got {t_end}"));
        if dt > 0.0 && t_end > 0.0 && every >= 1 {
            let steps = (t_end / dt).round();
            e.check(
                (steps * dt - t_end).abs() <= 1e-9 * t_end && (steps as u64) % every as u64 == 0,
                "solver.t_end",
                format_args!("{t_end} is not a whole number of snapshot intervals dt*snapshot_every = {}", dt * every as f64),
            );
        }
    }
    if let Some(seed) = seed {
        e.check(seed <= i64::MAX as u64, "solver.seed", "must fit in a signed 64-bit integer");
    }
    if let Some(alpha) = alpha {
        e.check(alpha > 0.0 && alpha < 1.0, "solver.alpha", format_args!("must lie in (0,1), got {alpha}"));
    }
    let amplitude = s.amplitude.unwrap_or(1.0);
    e.check(amplitude >= 0.0 && amplitude.is_finite(), "solver.amplitude", format_args!("must be nonnegative, got {amplitude}"));
    let dealias = s.dealias.unwrap_or_else(|| "2/3".into());
    if let Err(err) = Dealias::parse(&dealias) {
        e.check(false, "solver.dealias", err);
    }
    let initial = s.initial.unwrap_or_else(|| "holder".into());
    e.check(
        initial == "holder" || initial == "taylor-green",
        "solver.initial",
        format_args!("unknown initial data `{initial}` (use `holder` or `taylor-green`)"),
    );

    let estimates = a.estimates.unwrap_or_else(|| ALL_ESTIMATES.iter().map(|s| s.to_string()).collect());
    for est in &estimates {
        e.check(
            EstimateId::parse(est).is_some_and(|id| id != EstimateId::TrajDiff),
            "analysis.estimates",
            format_args!("unknown estimate `{est}`"),
        );
    }
    let a_list = a.a.unwrap_or_else(|| vec![1.0]);
    e.check(!a_list.is_empty(), "analysis.a", "list is empty");
    for v in &a_list {
        e.check(*v > 0.0 && v.is_finite(), "analysis.a", format_args!("must be positive, got {v}"));
    }
    let p = a.p.unwrap_or_else(|| vec![2]);
    e.check(!p.is_empty(), "analysis.p", "list is empty");
    for v in &p {
        e.check((1..=4).contains(v), "analysis.p", format_args!("structure-function order must be 1..=4, got {v}"));
    }
    let particles = a.particles.unwrap_or(100);
    e.check(particles >= 1, "analysis.particles", "must be at least 1");
    let stride = a.stride.unwrap_or(1);
    e.check(stride >= 1, "analysis.stride", "must be at least 1");
    let separations = a.separations.unwrap_or_default();
    for v in &separations {
        e.check(*v > 0.0 && *v < 0.5, "analysis.separations", format_args!("must lie in (0, 1/2), got {v}"));
    }
    let eulerian_lags = a.eulerian_lags.unwrap_or_default();
    let lagrangian_lags = a.lagrangian_lags.unwrap_or_default();
    e.check(!eulerian_lags.contains(&0), "analysis.eulerian_lags", "lags must be positive");
    e.check(!lagrangian_lags.contains(&0), "analysis.lagrangian_lags", "lags must be positive");
    let sf_samples = a.sf_samples.unwrap_or(10_000);
    e.check(sf_samples >= 1, "analysis.sf_samples", "must be at least 1");
    let sf_probes = a.sf_probes.unwrap_or(256);
    e.check(sf_probes >= 1, "analysis.sf_probes", "must be at least 1");
    let lp_energy_p = a.lp_energy_p.unwrap_or(4);
    if NormExp::finite(lp_energy_p).is_err() || lp_energy_p > 16 {
        e.check(false, "analysis.lp_energy_p", format_args!("must be even in 2..=16, got {lp_energy_p}"));
    }
    let substeps = a.substeps.unwrap_or(4);
    e.check(substeps >= 1, "analysis.substeps", "must be at least 1");

    if !e.0.is_empty() {
        return Err(LabError::Config(e.0));
    }
    Ok(ExperimentConfig {
        grid: GridConfig { d: d.unwrap(), n: n.unwrap() },
        bank: BankConfig { delta: delta.unwrap() },
        solver: SolverConfig {
            nu: nu.unwrap(),
            dt: dt.unwrap(),
            t_end: t_end.unwrap(),
            snapshot_every: every.unwrap(),
            seed: seed.unwrap(),
            alpha: alpha.unwrap(),
            amplitude,
            dealias,
            initial,
        },
        analysis: AnalysisConfig {
            estimates,
            a: a_list,
            p,
            particles,
            traj_k: a.traj_k,
            eulerian_lags,
            lagrangian_lags,
            separations,
            stride,
            sf_samples,
            sf_probes,
            lp_energy_p,
            substeps,
        },
        output: OutputConfig { dir: o.dir.unwrap_or_else(|| PathBuf::from("hlab-out")) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[grid]
d = 2
n = 32

[bank]
delta = 0.5

[solver]
nu = [1e-2, 3e-3]
dt = 0.01
t_end = 0.2
snapshot_every = 5
seed = 7
alpha = 0.3333
"#;

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_toml(SMALL).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        assert_eq!(c.analysis.estimates.len(), ALL_ESTIMATES.len());
    }

    #[test]
    fn empty_config_lists_every_missing_field() {
        let Err(LabError::Config(diags)) = ExperimentConfig::from_toml("") else { panic!() };
        for key in ["grid.d", "grid.n", "bank.delta", "solver.nu", "solver.dt", "solver.t_end", "solver.snapshot_every", "solver.seed", "solver.alpha"] {
            assert!(diags.iter().any(|d| d.starts_with(key)), "{key} missing from {diags:?}");
        }
    }

    #[test]
    fn overrides() {
        let sets = ["solver.nu=1e-3".to_string(), "analysis.estimates=[\"FK\"]".into(), "output.dir=runs/a".into()];
        let c = ExperimentConfig::from_toml_with(SMALL, &sets).unwrap();
        assert_eq!(c.solver.nu, vec![1e-3]);
        assert_eq!(c.analysis.estimates, vec!["FK".to_string()]);
        assert_eq!(c.output.dir, PathBuf::from("runs/a"));
        assert!(ExperimentConfig::from_toml_with(SMALL, &["solver.t_end=0.21".into()]).is_err());
        assert!(ExperimentConfig::from_toml_with(SMALL, &["solver.bogus=1".into()]).is_err());
    }
}
