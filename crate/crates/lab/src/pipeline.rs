//! The end-to-end run: per viscosity, solve, advect, verify and measure
//! structure functions, then compare the bound ratios across the sweep.

use std::path::Path;

use hlab_core::report::ratio_spread;
use hlab_core::structure::SfKind;
use hlab_core::{BoundReport, EstimateId};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::checkpoint;
use crate::commands::{self, checks_json, Check, Outcome, StructfunOpts, TrajOpts, VerifyCmdOpts};
use crate::config::ExperimentConfig;
use crate::error::{io_err, Result};
use crate::output::{jnum, write_json};
use crate::staging::Staging;

/// Largest allowed max/min of a summary ratio across the ν sweep.
pub const SPREAD_LIMIT: f64 = 3.0;

/// Estimates (with material-derivative order) whose ν-spread is asserted.
pub const SWEPT: [(EstimateId, u32); 5] =
    [(EstimateId::E1, 0), (EstimateId::Fk, 0), (EstimateId::M3, 0), (EstimateId::M6, 0), (EstimateId::Cet, 0)];

struct NuRun {
    nu: f64,
    reports: Vec<BoundReport>,
    summary: Value,
    checks: Vec<Check>,
}

fn run_one(dir: &Path, cfg: &ExperimentConfig, u0: &hlab_core::SpectralField, nu: f64) -> Result<NuRun> {
    let (series, mut checks) = commands::ns_run_into(&dir.join("series"), cfg, u0, nu)?;
    let an = &cfg.analysis;
    let topts = TrajOpts {
        k: an.traj_k,
        particles: an.particles,
        seed: cfg.solver.seed,
        delta: cfg.bank.delta,
        alpha: cfg.solver.alpha,
        a: an.a[0],
        substeps: an.substeps,
        stride: an.stride,
    };
    let (ps, traj, c) = commands::traj_into(&dir.join("traj"), &series, &topts)?;
    checks.extend(c);
    let vopts = VerifyCmdOpts {
        estimates: cfg.estimates(),
        delta: cfg.bank.delta,
        alpha: cfg.solver.alpha,
        a: an.a.clone(),
        stride: an.stride,
        k_lo: None,
        k_hi: None,
        m_max: 1,
        lags: an.eulerian_lags.clone(),
        lp_p: an.lp_energy_p,
    };
    let (reports, verify, c) = commands::verify_into(&dir.join("verify"), &series, &vopts)?;
    checks.extend(c);
    let sopts = StructfunOpts {
        kinds: vec![SfKind::Spatial, SfKind::EulerianTemporal, SfKind::Lagrangian],
        p: an.p.clone(),
        separations: an.separations.clone(),
        lags: an.lagrangian_lags.clone(),
        samples: an.sf_samples,
        probes: an.sf_probes,
        particles: an.particles,
        seed: cfg.solver.seed,
        t_min: 0.0,
        window: None,
        substeps: an.substeps,
    };
    let (_, sf) = commands::structfun_into(&dir.join("structfun"), &series, Some(&ps), &sopts)?;
    let summary = json!({ "nu": nu, "traj": traj, "verify": verify, "structfun": sf });
    Ok(NuRun { nu, reports, summary, checks })
}

fn find<'a>(run: &'a NuRun, id: EstimateId, m: u32, a: f64) -> Option<&'a BoundReport> {
    run.reports.iter().find(|r| {
        r.id == id && r.params.m == m && (matches!(id, EstimateId::Cet | EstimateId::Fk) || r.params.a == a) && !r.rows.is_empty()
    })
}

pub fn pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let u0 = commands::initial_data(cfg)?;
    let stage = Staging::new(out)?;
    std::fs::write(stage.join("config.toml"), cfg.to_toml()).map_err(io_err(stage.join("config.toml")))?;
    checkpoint::write(&stage.join("initial.hlab"), &u0)?;
    let runs: Vec<NuRun> = cfg
        .solver
        .nu
        .par_iter()
        .map(|&nu| run_one(&stage.join(commands::nu_dir_name(nu)), cfg, &u0, nu))
        .collect::<Result<_>>()?;

    let mut checks: Vec<Check> = runs.iter().flat_map(|r| r.checks.iter().cloned()).collect();
    let wanted = cfg.estimates();
    let mut spreads = Vec::new();
    for &a in &cfg.analysis.a {
        for &(id, m) in &SWEPT {
            if !wanted.contains(&id) {
                continue;
            }
            let found: Vec<Option<&BoundReport>> = runs.iter().map(|r| find(r, id, m, a)).collect();
            let per_nu: Vec<Value> =
                runs.iter().zip(&found).map(|(r, f)| json!({ "nu": r.nu, "max_ratio": f.map(|f| jnum(f.max_ratio())) })).collect();
            let name = format!("nu_spread/{}/m{m}/a{a}", id.name());
            let (spread, passed, detail) = if found.iter().any(|f| f.is_none()) {
                (None, false, "no admissible rows for some viscosity".to_string())
            } else {
                let reps: Vec<&BoundReport> = found.iter().map(|f| f.unwrap()).collect();
                let s = ratio_spread(&reps);
                (Some(s), s <= SPREAD_LIMIT, format!("max/min summary ratio {s} (limit {SPREAD_LIMIT})"))
            };
            checks.push(Check::new(name, passed, detail.clone()));
            spreads.push(json!({
                "estimate": id.name(), "m": m, "a": a, "spread": spread.map(jnum), "per_nu": per_nu, "detail": detail,
            }));
        }
    }
    write_json(
        &stage.join("summary.json"),
        &json!({
            "config_sha256": cfg.hash(),
            "runs": runs.iter().map(|r| r.summary.clone()).collect::<Vec<_>>(),
            "nu_spreads": spreads,
            "checks": checks_json(&checks),
        }),
    )?;
    let dir = stage.commit("pipeline", Some(&cfg.hash()))?;
    Ok(Outcome { dir, checks })
}
