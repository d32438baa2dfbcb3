//! Argument parsing and dispatch. Exit codes: 0 success, 1 invalid input or
//! runtime error, 2 an asserted property failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hlab_core::heat::NormExp;
use hlab_core::structure::SfKind;
use hlab_core::EstimateId;

use crate::commands::{self, HeatDecayOpts, LpAnalyzeOpts, Outcome, ProbeOpts, StructfunOpts, TrajOpts, VerifyCmdOpts};
use crate::config::{ExperimentConfig, ALL_ESTIMATES};
use crate::error::{LabError, Result};
use crate::pipeline;

#[derive(Parser, Debug)]
#[command(name = "hlab", version, about = "Littlewood-Paley laboratory for Hölder-continuous flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-band sup norms and the Hölder seminorm of a field.
    LpAnalyze(LpAnalyzeArgs),
    /// Heat decay of thin-annulus samples against the theoretical rate.
    HeatDecay(HeatDecayArgs),
    /// Search for weakly dissipated shell functions.
    ProbeDelta(ProbeDeltaArgs),
    /// Solve Navier-Stokes for every configured viscosity.
    NsRun(ConfigArgs),
    /// Advect particles (and coarse-flow twins) through a series.
    Traj(TrajArgs),
    /// Bound reports for the selected estimates.
    Verify(VerifyArgs),
    /// Spatial, Eulerian and Lagrangian structure functions.
    Structfun(StructfunArgs),
    /// ns-run, traj, verify and structfun over the ν sweep, plus a summary.
    Pipeline(ConfigArgs),
}

#[derive(Args, Debug)]
pub struct OutArg {
    /// Output directory (replaced on success).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OptConfig {
    /// Experiment config supplying defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set solver.nu=[1e-3]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct LpAnalyzeArgs {
    /// Field checkpoint; a synthetic Hölder field when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = commands::DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = commands::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct HeatDecayArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "R")]
    pub radius: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Norm exponents: even integers or `inf`.
    #[arg(long, value_delimiter = ',', default_value = "2,inf")]
    pub p: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Log-spaced times per sample.
    #[arg(long, default_value_t = 20)]
    pub times: usize,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct ProbeDeltaArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "R")]
    pub radius: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    /// Checkpoint seeding the first restart.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct TrajArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long)]
    pub k: Option<i32>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub substeps: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[command(flatten)]
    pub config: OptConfig,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub series: PathBuf,
    /// Comma-separated estimate ids (E1, CET, FK, M1, M2, M3, M5, M6, LP-ENERGY).
    #[arg(long, value_delimiter = ',')]
    pub estimates: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub a: Vec<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub k_lo: Option<i32>,
    #[arg(long)]
    pub k_hi: Option<i32>,
    #[arg(long, default_value_t = 1)]
    pub m_max: u32,
    /// Eulerian lags in snapshots.
    #[arg(long, value_delimiter = ',')]
    pub lags: Vec<usize>,
    #[arg(long)]
    pub lp_p: Option<u32>,
    #[command(flatten)]
    pub config: OptConfig,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct StructfunArgs {
    #[arg(long)]
    pub series: PathBuf,
    /// spatial, eulerian, lagrangian (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "spatial,eulerian,lagrangian")]
    pub kind: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<u32>,
    /// Trajectory CSV from `traj`; particles are advected afresh otherwise.
    #[arg(long)]
    pub traj: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub separations: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lags: Vec<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    pub t_min: f64,
    /// Fit window `a,b` in abscissa units.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub window: Vec<f64>,
    #[command(flatten)]
    pub config: OptConfig,
    #[command(flatten)]
    pub out: OutArg,
}

fn out_dir(o: &OutArg, cfg: Option<&ExperimentConfig>, cmd: &str) -> PathBuf {
    o.out.clone().unwrap_or_else(|| cfg.map_or_else(|| PathBuf::from("hlab-out"), |c| c.output.dir.clone()).join(cmd))
}

fn opt_config(c: &OptConfig) -> Result<Option<ExperimentConfig>> {
    match &c.config {
        Some(p) => Ok(Some(ExperimentConfig::load(p, &c.set)?)),
        None if !c.set.is_empty() => Err(LabError::Config(vec!["--set needs --config".into()])),
        None => Ok(None),
    }
}

fn invalid(msg: String) -> LabError {
    LabError::Config(vec![msg])
}

fn parse_estimates(list: &[String]) -> Result<Vec<EstimateId>> {
    list.iter()
        .map(|s| EstimateId::parse(s).filter(|e| *e != EstimateId::TrajDiff).ok_or_else(|| invalid(format!("estimates: unknown estimate `{s}`"))))
        .collect()
}

/// Defaults for series commands, from flags, then config, then series hints.
struct SeriesCtx {
    cfg: Option<ExperimentConfig>,
    delta: f64,
    alpha: f64,
    seed: u64,
}

fn series_ctx(series: &Path, c: &OptConfig, delta: Option<f64>, alpha: Option<f64>, seed: Option<u64>) -> Result<SeriesCtx> {
    let cfg = opt_config(c)?;
    let (d, a, s) = commands::series_defaults(
        series,
        delta.or(cfg.as_ref().map(|c| c.bank.delta)),
        alpha.or(cfg.as_ref().map(|c| c.solver.alpha)),
    )?;
    let seed = seed.or(cfg.as_ref().map(|c| c.solver.seed)).or(s).unwrap_or(0);
    Ok(SeriesCtx { cfg, delta: d, alpha: a, seed })
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::LpAnalyze(a) => commands::lp_analyze(&LpAnalyzeOpts {
            out: out_dir(&a.out, None, "lp-analyze"),
            input: a.input,
            d: a.d,
            n: a.n,
            delta: a.delta,
            alpha: a.alpha,
            seed: a.seed,
        }),
        Command::HeatDecay(a) => {
            let p = a.p.iter().map(|s| NormExp::parse(s)).collect::<hlab_core::Result<Vec<_>>>()?;
            commands::heat_decay(&HeatDecayOpts {
                out: out_dir(&a.out, None, "heat-decay"),
                d: a.d,
                radius: a.radius,
                delta: a.delta,
                samples: a.samples,
                p,
                epsilon: a.epsilon,
                times: a.times,
                n: a.n,
                seed: a.seed,
            })
        }
        Command::ProbeDelta(a) => commands::probe_delta(&ProbeOpts {
            out: out_dir(&a.out, None, "probe-delta"),
            d: a.d,
            radius: a.radius,
            delta: a.delta,
            epsilon: a.epsilon,
            budget: a.budget,
            seed: a.seed,
            n: a.n,
            init: a.init,
        }),
        Command::NsRun(a) => {
            let cfg = ExperimentConfig::load(&a.config, &a.set)?;
            commands::ns_run(&cfg, &out_dir(&a.out, Some(&cfg), "ns-run"))
        }
        Command::Pipeline(a) => {
            let cfg = ExperimentConfig::load(&a.config, &a.set)?;
            pipeline::pipeline(&cfg, &out_dir(&a.out, Some(&cfg), "pipeline"))
        }
        Command::Traj(a) => {
            let ctx = series_ctx(&a.series, &a.config, a.delta, a.alpha, a.seed)?;
            let an = ctx.cfg.as_ref().map(|c| &c.analysis);
            let o = TrajOpts {
                k: a.k.or(an.and_then(|x| x.traj_k)),
                particles: a.particles.or(an.map(|x| x.particles)).unwrap_or(100),
                seed: ctx.seed,
                delta: ctx.delta,
                alpha: ctx.alpha,
                a: a.a.or(an.map(|x| x.a[0])).unwrap_or(1.0),
                substeps: a.substeps.or(an.map(|x| x.substeps)).unwrap_or(4),
                stride: a.stride.or(an.map(|x| x.stride)).unwrap_or(1),
            };
            if o.particles == 0 || o.substeps == 0 || o.stride == 0 {
                return Err(invalid("particles, substeps and stride must be at least 1".into()));
            }
            commands::traj(&a.series, &o, &out_dir(&a.out, ctx.cfg.as_ref(), "traj"))
        }
        Command::Verify(a) => {
            let ctx = series_ctx(&a.series, &a.config, a.delta, a.alpha, None)?;
            let an = ctx.cfg.as_ref().map(|c| &c.analysis);
            let estimates = if !a.estimates.is_empty() {
                parse_estimates(&a.estimates)?
            } else if let Some(c) = &ctx.cfg {
                c.estimates()
            } else {
                parse_estimates(&ALL_ESTIMATES.map(String::from))?
            };
            let a_list = if !a.a.is_empty() { a.a.clone() } else { an.map_or(vec![1.0], |x| x.a.clone()) };
            if a_list.iter().any(|v| !(*v > 0.0)) {
                return Err(invalid("a: values must be positive".into()));
            }
            let lp_p = a.lp_p.or(an.map(|x| x.lp_energy_p)).unwrap_or(4);
            if !(2..=16).contains(&lp_p) || lp_p % 2 != 0 {
                return Err(invalid(format!("lp-p: must be even in 2..=16, got {lp_p}")));
            }
            let o = VerifyCmdOpts {
                estimates,
                delta: ctx.delta,
                alpha: ctx.alpha,
                a: a_list,
                stride: a.stride.or(an.map(|x| x.stride)).unwrap_or(1).max(1),
                k_lo: a.k_lo,
                k_hi: a.k_hi,
                m_max: a.m_max,
                lags: if a.lags.is_empty() { an.map_or(vec![], |x| x.eulerian_lags.clone()) } else { a.lags.clone() },
                lp_p,
            };
            commands::verify(&a.series, &o, &out_dir(&a.out, ctx.cfg.as_ref(), "verify"))
        }
        Command::Structfun(a) => {
            let ctx = series_ctx(&a.series, &a.config, None, None, a.seed)?;
            let an = ctx.cfg.as_ref().map(|c| &c.analysis);
            let kinds = a.kind.iter().map(|s| SfKind::parse(s)).collect::<hlab_core::Result<Vec<_>>>()?;
            let p = if !a.p.is_empty() { a.p.clone() } else { an.map_or(vec![2], |x| x.p.clone()) };
            let window = match a.window.as_slice() {
                [] => None,
                [lo, hi] if lo < hi => Some((*lo, *hi)),
                _ => return Err(invalid("window: expected `a,b` with a < b".into())),
            };
            let o = StructfunOpts {
                kinds,
                p,
                separations: if a.separations.is_empty() { an.map_or(vec![], |x| x.separations.clone()) } else { a.separations.clone() },
                lags: if a.lags.is_empty() { an.map_or(vec![], |x| x.lagrangian_lags.clone()) } else { a.lags.clone() },
                samples: a.samples.or(an.map(|x| x.sf_samples)).unwrap_or(10_000),
                probes: a.probes.or(an.map(|x| x.sf_probes)).unwrap_or(256),
                particles: a.particles.or(an.map(|x| x.particles)).unwrap_or(100),
                seed: ctx.seed,
                t_min: a.t_min,
                window,
                substeps: an.map_or(4, |x| x.substeps),
            };
            commands::structfun(&a.series, a.traj.as_deref(), &o, &out_dir(&a.out, ctx.cfg.as_ref(), "structfun"))
        }
    }
}

/// Honour `HLAB_THREADS` for the global worker pool.
fn init_threads() {
    if let Some(n) = std::env::var("HLAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_threads();
    match dispatch(cli.command) {
        Ok(out) => {
            for c in &out.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {}", out.dir.display());
            out.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
