//! The subcommands. Each `*_into` function writes into a directory it owns;
//! the public wrappers stage that directory and commit it with a manifest.

use std::path::{Path, PathBuf};

use hlab_core::bank::holder_norm;
use hlab_core::heat::{self, AnnulusSpec, NormExp};
use hlab_core::lagrangian::{self, AdvectOptions, LagGrid, ParticleSet};
use hlab_core::ns::{self, SnapshotSeries, SolverOptions};
use hlab_core::structure::{self, SfKind, SpatialOptions, StructureFunctionTable, TemporalOptions};
use hlab_core::synth::synth_holder_field;
use hlab_core::verifier::{self, VerifyOptions};
use hlab_core::{field, rng, BoundReport, EstimateId, GridSpec, LPBank, SpectralField};
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::checkpoint;
use crate::config::{hex, ExperimentConfig};
use crate::error::{io_err, LabError, Result};
use crate::output::{self, jnum, write_json};
use crate::series_io::{self, SeriesHints};
use crate::staging::Staging;

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 1.0 / 3.0;

/// An asserted invariant and whether it held.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check held, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }
}

pub fn checks_json(checks: &[Check]) -> Value {
    Value::Array(checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail })).collect())
}

fn args_hash(args: &Value) -> String {
    hex(&Sha256::digest(serde_json::to_string(args).expect("json").as_bytes()))
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(io_err(p))
}

fn commit(stage: Staging, cmd: &str, hash: &str, checks: Vec<Check>) -> Result<Outcome> {
    let dir = stage.commit(cmd, Some(hash))?;
    Ok(Outcome { dir, checks })
}

/// Non-fatal analysis gaps (too little data for a row, a lag or a fit) are
/// reported in the summary instead of aborting the run.
fn soft(e: &hlab_core::Error) -> bool {
    use hlab_core::Error as E;
    matches!(e, E::NoAdmissibleRows(_) | E::Insufficient(_) | E::StencilBoundary { .. } | E::InvalidParameter { name: "lags" | "p" | "window", .. })
}

// ---------------------------------------------------------------- lp-analyze

#[derive(Clone, Debug)]
pub struct LpAnalyzeOpts {
    /// Checkpoint to analyse; a synthetic Hölder field when absent.
    pub input: Option<PathBuf>,
    pub d: usize,
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn lp_analyze(o: &LpAnalyzeOpts) -> Result<Outcome> {
    if !(o.alpha > 0.0 && o.alpha < 1.0) {
        return Err(LabError::Config(vec![format!("alpha: must lie in (0,1), got {}", o.alpha)]));
    }
    let f = match &o.input {
        Some(p) => checkpoint::read(p)?,
        None => {
            let g = GridSpec::new(o.d, o.n)?;
            synth_holder_field(g, &LPBank::new(g, o.delta)?, o.alpha, o.seed)
        }
    };
    let bank = LPBank::new(f.grid(), o.delta)?;
    let args = json!({
        "input": o.input.as_ref().map(|p| p.display().to_string()),
        "d": f.grid().d(), "n": f.grid().n(), "delta": o.delta, "alpha": o.alpha, "seed": o.seed,
    });
    let stage = Staging::new(&o.out)?;
    if o.input.is_none() {
        checkpoint::write(&stage.join("field.hlab"), &f)?;
    }
    let h = holder_norm(&f, &bank, o.alpha);
    output::write_holder_csv(&stage.join("holder.csv"), &h)?;

    let g = f.grid();
    let partition = (1..g.len()).map(|i| (bank.partition_sum(i) - 1.0).abs()).fold(0.0, f64::max);
    let scale = f.coeff_norm().max(f64::MIN_POSITIVE);
    let mut sum = bank.leq(&f, bank.k_min() - 1)?;
    for k in bank.k_min()..=bank.k_max() {
        sum.axpy(1.0, &bank.project(&f, k)?)?;
    }
    let recomposition = sum.max_abs_diff(&f)? / scale;
    let mut disjoint: f64 = 0.0;
    for k in bank.k_min()..=bank.k_max() - 2 {
        let pk = bank.project(&f, k)?;
        disjoint = disjoint.max(bank.project(&pk, k + 2)?.coeff_norm() / scale);
    }
    let checks = vec![
        Check::new("partition_of_unity", partition <= 1e-10, format!("max |sum m_k - 1| = {partition:e}")),
        Check::new("recomposition", recomposition <= 1e-10, format!("relative defect {recomposition:e}")),
        Check::new("projection_disjointness", disjoint <= 1e-10, format!("max |P_k+2 P_k f| / |f| = {disjoint:e}")),
    ];
    write_json(
        &stage.join("summary.json"),
        &json!({
            "args": args,
            "k_min": bank.k_min(), "k_max": bank.k_max(),
            "holder_seminorm": h.value,
            "partition_defect": partition,
            "recomposition_defect": recomposition,
            "disjointness_defect": disjoint,
            "checks": checks_json(&checks),
        }),
    )?;
    commit(stage, "lp-analyze", &args_hash(&args), checks)
}

// ---------------------------------------------------------------- heat-decay

#[derive(Clone, Debug)]
pub struct HeatDecayOpts {
    pub d: usize,
    pub radius: f64,
    pub delta: f64,
    pub samples: usize,
    pub p: Vec<NormExp>,
    pub epsilon: f64,
    /// Log-spaced times per sample.
    pub times: usize,
    /// Grid size; the smallest power of two holding the shell when absent.
    pub n: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
}

/// Smallest power-of-two grid whose non-Nyquist box holds the shell.
pub fn annulus_grid_n(radius: f64, delta: f64) -> usize {
    ((2.0 * (radius * (1.0 + delta)).floor() + 3.0) as usize).next_power_of_two().max(8)
}

fn annulus(d: usize, radius: f64, delta: f64, n: Option<usize>) -> Result<AnnulusSpec> {
    let n = n.unwrap_or_else(|| annulus_grid_n(radius, delta));
    Ok(AnnulusSpec::new(radius, delta, GridSpec::new(d, n)?)?)
}

fn support_json(s: &[[i64; 2]], d: usize) -> Value {
    Value::Array(s.iter().map(|x| json!(x[..d].to_vec())).collect())
}

pub fn heat_decay(o: &HeatDecayOpts) -> Result<Outcome> {
    if !(o.epsilon > 0.0 && o.epsilon < 1.0) {
        return Err(LabError::Config(vec![format!("epsilon: must lie in (0,1), got {}", o.epsilon)]));
    }
    if o.samples == 0 || o.p.is_empty() {
        return Err(LabError::Config(vec!["samples and p must be nonempty".into()]));
    }
    let spec = annulus(o.d, o.radius, o.delta, o.n)?;
    let times = heat::decay_times(o.radius, o.times.max(1));
    let seeds: Vec<u64> = (0..o.samples as u64).map(|i| rng::derive(o.seed, i)).collect();
    let args = json!({
        "d": o.d, "R": o.radius, "delta": o.delta, "samples": o.samples,
        "p": o.p.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "epsilon": o.epsilon, "times": o.times, "n": spec.grid.n(), "seed": o.seed,
    });
    let jobs: Vec<(NormExp, u64)> = o.p.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(p, s)| heat::decay_experiment(&spec, p, &[s], &times, o.epsilon))
        .collect::<hlab_core::Result<_>>()?;
    let stage = Staging::new(&o.out)?;
    let rows: Vec<_> = results.iter().flat_map(|(r, _)| r.iter().cloned()).collect();
    output::write_decay_csv(&stage.join("decay.csv"), &rows)?;
    let upper = (1.0 + o.delta) * (1.0 + o.delta) + 1e-6;
    let mut checks = Vec::new();
    let mut per_p = Vec::new();
    for &p in &o.p {
        let (lo, hi) = results
            .iter()
            .filter(|(_, rep)| rep.p == p)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, rep)| (lo.min(rep.min_ratio), hi.max(rep.max_ratio)));
        checks.push(Check::new(format!("decay_lower_p{p}"), lo >= 1.0 - o.epsilon, format!("min ratio {lo} vs {}", 1.0 - o.epsilon)));
        checks.push(Check::new(format!("decay_upper_p{p}"), hi <= upper, format!("max ratio {hi} vs {upper}")));
        per_p.push(json!({ "p": p.to_string(), "min_ratio": lo, "max_ratio": hi }));
    }
    write_json(
        &stage.join("summary.json"),
        &json!({
            "args": args,
            "lattice_support": support_json(&spec.lattice_support(), o.d),
            "per_p": per_p,
            "checks": checks_json(&checks),
        }),
    )?;
    commit(stage, "heat-decay", &args_hash(&args), checks)
}

// --------------------------------------------------------------- probe-delta

#[derive(Clone, Debug)]
pub struct ProbeOpts {
    pub d: usize,
    pub radius: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub budget: usize,
    pub seed: u64,
    pub n: Option<usize>,
    pub init: Option<PathBuf>,
    pub out: PathBuf,
}

/// Search result; finding a weakly dissipated shell function is a result,
/// not a failed invariant, so this never asks for exit code 2.
pub fn probe_delta(o: &ProbeOpts) -> Result<Outcome> {
    let spec = annulus(o.d, o.radius, o.delta, o.n)?;
    let init = o.init.as_deref().map(checkpoint::read).transpose()?;
    let r = heat::probe_delta(o.epsilon, &spec, o.budget, o.seed, init.as_ref())?;
    let args = json!({
        "d": o.d, "R": o.radius, "delta": o.delta, "epsilon": o.epsilon, "budget": o.budget,
        "seed": o.seed, "n": spec.grid.n(), "init": o.init.as_ref().map(|p| p.display().to_string()),
    });
    let stage = Staging::new(&o.out)?;
    checkpoint::write(&stage.join("witness.hlab"), &r.worst_field)?;
    write_json(
        &stage.join("result.json"),
        &json!({
            "args": args,
            "delta_ok": r.delta_ok,
            "worst_ratio": jnum(r.worst_ratio),
            "evaluations": r.evaluations,
            "lattice_support": support_json(&spec.lattice_support(), o.d),
        }),
    )?;
    commit(stage, "probe-delta", &args_hash(&args), Vec::new())
}

// -------------------------------------------------------------------- ns-run

pub fn nu_dir_name(nu: f64) -> String {
    format!("nu_{nu:e}")
}

fn hints(cfg: &ExperimentConfig) -> SeriesHints {
    SeriesHints { delta: cfg.bank.delta, alpha: cfg.solver.alpha, seed: cfg.solver.seed }
}

/// The configured initial velocity (shared by every ν).
pub fn initial_data(cfg: &ExperimentConfig) -> Result<SpectralField> {
    if cfg.grid.d != 2 {
        return Err(LabError::Config(vec![format!("grid.d: the solver runs in 2D, got d = {}", cfg.grid.d)]));
    }
    let g = GridSpec::new(2, cfg.grid.n)?;
    let s = &cfg.solver;
    Ok(match s.initial.as_str() {
        "taylor-green" => ns::taylor_green(g, s.amplitude)?,
        _ => {
            let bank = LPBank::new(g, cfg.bank.delta)?;
            ns::holder_initial_data(g, &bank, s.alpha, rng::derive(s.seed, 1), s.amplitude, None)?
        }
    })
}

fn solver_checks(s: &SnapshotSeries) -> Result<Vec<Check>> {
    let mut div: f64 = 0.0;
    for f in &s.fields {
        div = div.max(f.divergence_defect()?);
    }
    let growth = s
        .energies
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    let tag = nu_dir_name(s.nu);
    Ok(vec![
        Check::new(format!("{tag}/divergence_free"), div <= 1e-10, format!("max divergence defect {div:e}")),
        Check::new(
            format!("{tag}/energy_nonincreasing"),
            s.len() < 2 || growth <= 1e-8,
            format!("largest relative energy change between snapshots {growth:e}"),
        ),
    ])
}

/// Run one viscosity and write its series to `dir`.
pub fn ns_run_into(dir: &Path, cfg: &ExperimentConfig, u0: &SpectralField, nu: f64) -> Result<(SnapshotSeries, Vec<Check>)> {
    let s = &cfg.solver;
    let opts = SolverOptions { dealias: cfg.dealias(), ..SolverOptions::default() };
    let series = ns::run(u0, nu, s.t_end, s.dt, s.snapshot_every, opts)?;
    series_io::write_series(dir, &series, Some(hints(cfg)))?;
    let checks = solver_checks(&series)?;
    Ok((series, checks))
}

pub fn ns_run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let u0 = initial_data(cfg)?;
    let stage = Staging::new(out)?;
    std::fs::write(stage.join("config.toml"), cfg.to_toml()).map_err(io_err(stage.join("config.toml")))?;
    checkpoint::write(&stage.join("initial.hlab"), &u0)?;
    let base = stage.join("series");
    let runs: Vec<(SnapshotSeries, Vec<Check>)> =
        cfg.solver.nu.par_iter().map(|&nu| ns_run_into(&base.join(nu_dir_name(nu)), cfg, &u0, nu)).collect::<Result<_>>()?;
    let checks: Vec<Check> = runs.iter().flat_map(|(_, c)| c.iter().cloned()).collect();
    let per_nu: Vec<Value> = runs
        .iter()
        .map(|(s, _)| {
            json!({
                "nu": s.nu, "dir": format!("series/{}", nu_dir_name(s.nu)), "snapshots": s.len(),
                "initial_projected": s.initial_projected,
                "energy_start": s.energies[0], "energy_end": *s.energies.last().unwrap(),
            })
        })
        .collect();
    write_json(&stage.join("summary.json"), &json!({ "runs": per_nu, "checks": checks_json(&checks) }))?;
    commit(stage, "ns-run", &cfg.hash(), checks)
}

// ---------------------------------------------------------------------- traj

#[derive(Clone, Debug)]
pub struct TrajOpts {
    /// Coarse band; mid-band when absent.
    pub k: Option<i32>,
    pub particles: usize,
    pub seed: u64,
    pub delta: f64,
    pub alpha: f64,
    pub a: f64,
    pub substeps: usize,
    pub stride: usize,
}

/// Middle of the resolved band range.
pub fn mid_band(series: &SnapshotSeries, bank: &LPBank) -> i32 {
    let (lo, hi) = verifier::admissible_bands(bank, series.dealias.cutoff(series.grid.n()) as f64);
    (lo + hi.max(lo)) / 2
}

fn chunked_advect(series: &SnapshotSeries, ps: &ParticleSet, bank: Option<&LPBank>, opts: AdvectOptions) -> Result<ParticleSet> {
    let chunk = ps.len().div_ceil(rayon::current_num_threads().max(1)).max(1);
    let parts: Vec<ParticleSet> =
        ps.split(chunk).par_iter().map(|p| lagrangian::advect(series, p, bank, opts)).collect::<hlab_core::Result<_>>()?;
    Ok(ParticleSet::merge(parts)?)
}

fn stride_indices(series: &SnapshotSeries, stride: usize) -> Vec<usize> {
    (0..series.len()).step_by(stride.max(1)).collect()
}

pub fn traj_into(dir: &Path, series: &SnapshotSeries, o: &TrajOpts) -> Result<(ParticleSet, Value, Vec<Check>)> {
    mkdir(dir)?;
    let bank = LPBank::new(series.grid, o.delta)?;
    let k = o.k.unwrap_or_else(|| mid_band(series, &bank));
    let start = ParticleSet::random(series.grid.d(), o.particles, rng::derive(o.seed, 2));
    let opts = AdvectOptions { band: Some(k), substeps: o.substeps, ..AdvectOptions::default() };
    let ps = chunked_advect(series, &start, Some(&bank), opts)?;
    output::write_traj_csv(&dir.join("trajectory.csv"), &ps)?;
    let u_norm = verifier::series_holder(series, &bank, o.alpha, &stride_indices(series, o.stride));
    let gron = lagrangian::gronwall_check(&ps, k, &bank, o.alpha, u_norm, series.nu)?;
    output::write_bounds_csv(&dir.join("gronwall.csv"), std::slice::from_ref(&gron))?;
    let th = match lagrangian::traj_holder(&ps, 1, o.alpha, o.a, series.nu, u_norm, LagGrid::default()) {
        Ok(r) => json!({
            "order": r.order,
            "exponent_target": r.exponent_target,
            "fitted_slope": jnum(r.fitted_slope),
            "slope_stderr": jnum(r.slope_stderr),
            "constant_estimate": jnum(r.constant_estimate),
            "a": r.a_parameter,
            "log_correction_used": r.log_correction_used,
            "threshold": r.threshold,
            "measured_pairs": r.measured_pairs.iter().map(|&(h, v)| json!([h, v])).collect::<Vec<_>>(),
        }),
        Err(e) if soft(&e) => json!({ "skipped": e.to_string() }),
        Err(e) => return Err(e.into()),
    };
    let worst = gron.max_ratio();
    let checks = vec![Check::new(
        format!("{}/gronwall_finite", nu_dir_name(series.nu)),
        worst.is_finite(),
        format!("max lhs/rhs {worst}"),
    )];
    let summary = json!({
        "nu": series.nu, "k": k, "particles": ps.len(), "holder_norm": u_norm,
        "gronwall_max_ratio": jnum(worst),
        "trajectory_holder": th,
        "checks": checks_json(&checks),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok((ps, summary, checks))
}

fn load(series: &Path) -> Result<(SnapshotSeries, Option<SeriesHints>)> {
    let l = series_io::read_series(series)?;
    Ok((l.series, l.hints))
}

pub fn traj(series_dir: &Path, o: &TrajOpts, out: &Path) -> Result<Outcome> {
    let (series, _) = load(series_dir)?;
    let args = json!({
        "series": series_dir.display().to_string(), "k": o.k, "particles": o.particles, "seed": o.seed,
        "delta": o.delta, "alpha": o.alpha, "a": o.a, "substeps": o.substeps, "stride": o.stride,
    });
    let stage = Staging::new(out)?;
    let (_, _, checks) = traj_into(stage.path(), &series, o)?;
    commit(stage, "traj", &args_hash(&args), checks)
}

// -------------------------------------------------------------------- verify

#[derive(Clone, Debug)]
pub struct VerifyCmdOpts {
    pub estimates: Vec<EstimateId>,
    pub delta: f64,
    pub alpha: f64,
    pub a: Vec<f64>,
    pub stride: usize,
    pub k_lo: Option<i32>,
    pub k_hi: Option<i32>,
    pub m_max: u32,
    /// Eulerian lags in snapshots; automatic when empty.
    pub lags: Vec<usize>,
    pub lp_p: u32,
}

fn report_json(r: &BoundReport) -> Value {
    let notes: Map<String, Value> = r.notes.iter().map(|(k, v)| (k.clone(), jnum(*v))).collect();
    json!({
        "estimate": r.id.name(), "a": r.params.a, "m": r.params.m, "rows": r.rows.len(),
        "max_ratio": jnum(r.max_ratio()), "k_log_range": jnum(r.k_log_range()), "notes": notes,
    })
}

pub fn default_lags(len: usize, count: usize) -> Vec<usize> {
    lagrangian::log_lags(1, (len.saturating_sub(1) / 2).max(1), count)
}

/// Decomposition identity `R = HH + HL + LH + LL` on one snapshot. The
/// defect is relative to `P_{≤k}(u⊗u)`, the size of the terms that cancel:
/// on a decayed field `R` itself can sit at round-off.
fn decomposition_check(series: &SnapshotSeries, bank: &LPBank, k: i32) -> Result<Check> {
    let u = verifier::pad(&series.fields[series.len() / 2], 2)?;
    let pbank = LPBank::new(u.grid(), bank.delta())?;
    let r = verifier::reynolds_stress(&u, &pbank, k)?;
    let sum = verifier::stress_decomposition(&u, &pbank, k)?.sum()?;
    let scale = r.coeff_norm().max(pbank.leq(&field::outer(&u, &u)?, k)?.coeff_norm());
    let rel = sum.max_abs_diff(&r)? / scale.max(f64::MIN_POSITIVE);
    Ok(Check::new(
        format!("{}/stress_decomposition", nu_dir_name(series.nu)),
        rel <= 1e-10,
        format!("relative defect {rel:e} at k = {k}"),
    ))
}

enum Task {
    Cet,
    Fk,
    E1(f64),
    M(f64, Vec<EstimateId>),
}

pub fn verify_into(dir: &Path, series: &SnapshotSeries, o: &VerifyCmdOpts) -> Result<(Vec<BoundReport>, Value, Vec<Check>)> {
    mkdir(dir)?;
    let bank = LPBank::new(series.grid, o.delta)?;
    let base = VerifyOptions { alpha: o.alpha, a: o.a[0], stride: o.stride, k_lo: o.k_lo, k_hi: o.k_hi, m_max: o.m_max };
    let has = |id: EstimateId| o.estimates.contains(&id);
    let mut tasks = Vec::new();
    if has(EstimateId::Cet) {
        tasks.push(Task::Cet);
    }
    if has(EstimateId::Fk) {
        tasks.push(Task::Fk);
    }
    let ms: Vec<EstimateId> = o
        .estimates
        .iter()
        .copied()
        .filter(|e| matches!(e, EstimateId::M1 | EstimateId::M2 | EstimateId::M3 | EstimateId::M5 | EstimateId::M6))
        .collect();
    for &a in &o.a {
        if has(EstimateId::E1) {
            tasks.push(Task::E1(a));
        }
        // one task per estimate keeps the parallel pieces balanced
        for &m in &ms {
            tasks.push(Task::M(a, vec![m]));
        }
    }
    let lags = if o.lags.is_empty() { default_lags(series.len(), 8) } else { o.lags.clone() };
    let results: Vec<std::result::Result<Vec<BoundReport>, String>> = tasks
        .par_iter()
        .map(|t| {
            let r = match t {
                Task::Cet => verifier::cet_check(series, &bank, &base).map(|r| vec![r]),
                Task::Fk => verifier::fk_check(series, &bank, &base).map(|r| vec![r]),
                Task::E1(a) => {
                    let opts = VerifyOptions { a: *a, ..base.clone() };
                    verifier::eulerian_check(series, &series.fields[0], &bank, &opts, &lags).map(|r| vec![r])
                }
                Task::M(a, which) => {
                    let opts = VerifyOptions { a: *a, ..base.clone() };
                    verifier::verify_m(series, &bank, &opts, which)
                }
            };
            match r {
                Ok(v) => Ok(Ok(v)),
                Err(e) if soft(&e) => Ok(Err(e.to_string())),
                Err(e) => Err(e),
            }
        })
        .collect::<hlab_core::Result<_>>()?;
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (t, r) in tasks.iter().zip(results) {
        match r {
            Ok(v) => reports.extend(v),
            Err(why) => {
                let (name, a) = match t {
                    Task::Cet => ("CET".to_string(), base.a),
                    Task::Fk => ("FK".to_string(), base.a),
                    Task::E1(a) => ("E1".to_string(), *a),
                    Task::M(a, w) => (w[0].name().to_string(), *a),
                };
                skipped.push(json!({ "estimate": name, "a": a, "reason": why }));
            }
        }
    }

    let k_mid = o.k_lo.zip(o.k_hi).map(|(l, h)| (l + h) / 2).unwrap_or_else(|| mid_band(series, &bank));
    let mut lp_energy = Value::Null;
    if has(EstimateId::LpEnergy) {
        let mut k = k_mid;
        while k > bank.k_min() && verifier::lp_quadrature_n(&bank, series.grid.d(), k, o.lp_p).is_err() {
            k -= 1;
        }
        match verifier::lp_energy_check(series, &bank, k, o.lp_p, &base) {
            Ok(r) => {
                lp_energy = json!({
                    "k": r.k, "p": r.p, "quadrature_n": r.quadrature_n,
                    "max_transport_rel": jnum(r.max_transport_rel()),
                    "min_rayleigh": jnum(r.min_rayleigh()),
                    "transport": r.transport.iter().map(|&(t, v, s)| json!([t, v, s])).collect::<Vec<_>>(),
                    "rayleigh": r.rayleigh.iter().map(|&(t, q)| json!([t, q])).collect::<Vec<_>>(),
                });
                reports.push(r.gronwall);
            }
            Err(e) if soft(&e) => skipped.push(json!({ "estimate": "LP-ENERGY", "a": base.a, "reason": e.to_string() })),
            Err(e) => return Err(e.into()),
        }
    }
    let residual = if series.len() >= 3 {
        let r = verifier::lp_residual(series, &bank, k_mid, series.len() / 2)?;
        json!({ "k": r.k, "t": r.t, "abs": r.abs, "scale": r.scale, "rel": jnum(r.rel) })
    } else {
        Value::Null
    };
    output::write_bounds_csv(&dir.join("bounds.csv"), &reports)?;
    let checks = vec![decomposition_check(series, &bank, k_mid)?];
    let summary = json!({
        "nu": series.nu,
        "alpha": o.alpha,
        "delta": o.delta,
        "reports": reports.iter().map(report_json).collect::<Vec<_>>(),
        "skipped": skipped,
        "lp_energy": lp_energy,
        "lp_residual": residual,
        "checks": checks_json(&checks),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok((reports, summary, checks))
}

pub fn verify(series_dir: &Path, o: &VerifyCmdOpts, out: &Path) -> Result<Outcome> {
    let (series, _) = load(series_dir)?;
    let args = json!({
        "series": series_dir.display().to_string(),
        "estimates": o.estimates.iter().map(|e| e.name()).collect::<Vec<_>>(),
        "delta": o.delta, "alpha": o.alpha, "a": o.a, "stride": o.stride, "k_lo": o.k_lo, "k_hi": o.k_hi,
        "m_max": o.m_max, "lags": o.lags, "lp_p": o.lp_p,
    });
    let stage = Staging::new(out)?;
    let (_, _, checks) = verify_into(stage.path(), &series, o)?;
    commit(stage, "verify", &args_hash(&args), checks)
}

// ----------------------------------------------------------------- structfun

#[derive(Clone, Debug)]
pub struct StructfunOpts {
    pub kinds: Vec<SfKind>,
    pub p: Vec<u32>,
    /// Spatial separations; automatic when empty.
    pub separations: Vec<f64>,
    /// Temporal lags in snapshots; automatic when empty.
    pub lags: Vec<usize>,
    pub samples: usize,
    pub probes: usize,
    pub particles: usize,
    pub seed: u64,
    pub t_min: f64,
    /// Fit window `[a, b]` in abscissa units; automatic when absent.
    pub window: Option<(f64, f64)>,
    pub substeps: usize,
}

fn fit_table(mut t: StructureFunctionTable, window: Option<(f64, f64)>) -> StructureFunctionTable {
    match window {
        None => t.with_auto_fit(),
        Some((a, b)) => {
            t.fit = structure::window_for_range(&t, a, b).and_then(|w| structure::fit_window(&t, w)).ok();
            t
        }
    }
}

/// Structure functions of the series; Lagrangian tables use `particles`
/// when given, else freshly advected ones.
pub fn structfun_into(dir: &Path, series: &SnapshotSeries, particles: Option<&ParticleSet>, o: &StructfunOpts) -> Result<(Vec<StructureFunctionTable>, Value)> {
    mkdir(dir)?;
    let seps = if o.separations.is_empty() {
        structure::log_space(1.0 / series.grid.n() as f64, 0.25, 12)
    } else {
        o.separations.clone()
    };
    let mut tables = Vec::new();
    let mut skipped = Vec::new();
    let mut keep = |r: hlab_core::Result<Vec<StructureFunctionTable>>, kind: SfKind| -> Result<()> {
        match r {
            Ok(v) => tables.extend(v.into_iter().map(|t| fit_table(t, o.window))),
            Err(e) if soft(&e) => skipped.push(json!({ "kind": kind.name(), "reason": e.to_string() })),
            Err(e) => return Err(e.into()),
        }
        Ok(())
    };
    for &kind in &o.kinds {
        match kind {
            SfKind::Spatial => {
                let opts = SpatialOptions { samples: o.samples, seed: rng::derive(o.seed, 3), origin: [0.0; 2] };
                let last = series.fields.last().expect("nonempty series");
                keep(structure::spatial_sf_multi(last, &o.p, &seps, opts), kind)?;
            }
            SfKind::EulerianTemporal => {
                let lags = if o.lags.is_empty() { default_lags(series.len(), 10) } else { o.lags.clone() };
                let opts = TemporalOptions { probes: o.probes, seed: rng::derive(o.seed, 4), t_min: o.t_min };
                keep(o.p.iter().map(|&p| structure::eulerian_sf(series, p, &lags, opts)).collect(), kind)?;
            }
            SfKind::Lagrangian => {
                let owned;
                let ps = match particles {
                    Some(p) => p,
                    None => {
                        let start = ParticleSet::random(series.grid.d(), o.particles, rng::derive(o.seed, 5));
                        let opts = AdvectOptions { substeps: o.substeps, ..AdvectOptions::default() };
                        owned = chunked_advect(series, &start, None, opts)?;
                        &owned
                    }
                };
                let lags = if o.lags.is_empty() { default_lags(ps.times.len(), 10) } else { o.lags.clone() };
                let opts = TemporalOptions { probes: o.probes, seed: o.seed, t_min: o.t_min };
                keep(o.p.iter().map(|&p| structure::lagrangian_sf(ps, p, &lags, opts)).collect(), kind)?;
            }
        }
    }
    output::write_sf_csv(&dir.join("sf.csv"), &tables)?;
    let fits: Vec<Value> = tables.iter().map(output::fit_json).collect();
    write_json(&dir.join("fit.json"), &Value::Array(fits.clone()))?;
    let summary = json!({ "nu": series.nu, "fits": fits, "skipped": skipped });
    Ok((tables, summary))
}

pub fn structfun(series_dir: &Path, traj_csv: Option<&Path>, o: &StructfunOpts, out: &Path) -> Result<Outcome> {
    let (series, _) = load(series_dir)?;
    let ps = traj_csv.map(output::read_traj_csv).transpose()?;
    let args = json!({
        "series": series_dir.display().to_string(),
        "traj": traj_csv.map(|p| p.display().to_string()),
        "kinds": o.kinds.iter().map(|k| k.name()).collect::<Vec<_>>(),
        "p": o.p, "separations": o.separations, "lags": o.lags, "samples": o.samples, "probes": o.probes,
        "particles": o.particles, "seed": o.seed, "t_min": o.t_min, "window": o.window.map(|w| [w.0, w.1]),
        "substeps": o.substeps,
    });
    let stage = Staging::new(out)?;
    structfun_into(stage.path(), &series, ps.as_ref(), o)?;
    commit(stage, "structfun", &args_hash(&args), Vec::new())
}

/// Resolve δ and α for series commands: explicit flags, then the hints the
/// producing run recorded, then the defaults.
pub fn series_defaults(series_dir: &Path, delta: Option<f64>, alpha: Option<f64>) -> Result<(f64, f64, Option<u64>)> {
    let text_path = series_dir.join(series_io::MANIFEST);
    if !text_path.exists() {
        return Err(LabError::format(&text_path, "no series manifest"));
    }
    let h = series_io::read_hints(series_dir)?;
    Ok((
        delta.or(h.map(|h| h.delta)).unwrap_or(DEFAULT_DELTA),
        alpha.or(h.map(|h| h.alpha)).unwrap_or(DEFAULT_ALPHA),
        h.map(|h| h.seed),
    ))
}
