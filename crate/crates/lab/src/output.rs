//! CSV and JSON report writers.

use std::fs;
use std::path::Path;

use hlab_core::heat::DecayRow;
use hlab_core::lagrangian::{ParticleSet, Track};
use hlab_core::structure::StructureFunctionTable;
use hlab_core::{BoundReport, HolderEstimate};
use serde_json::json;

use crate::error::{io_err, LabError, Result};

fn num(v: f64) -> String {
    format!("{v}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_holder_csv(path: &Path, h: &HolderEstimate) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "band_center_frequency", "sup_norm", "weighted_value"])?;
    for b in &h.per_band {
        w.write_record([b.k.to_string(), num(b.center), num(b.sup_norm), num(b.weighted)])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_decay_csv(path: &Path, rows: &[DecayRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["d", "R", "delta", "p", "seed", "t", "lhs_norm", "bound_rhs", "ratio"])?;
    for r in rows {
        w.write_record([
            r.d.to_string(),
            num(r.radius),
            num(r.delta),
            r.p.to_string(),
            r.seed.to_string(),
            num(r.t),
            num(r.lhs_norm),
            num(r.bound_rhs),
            num(r.ratio),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_bounds_csv(path: &Path, reports: &[BoundReport]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["estimate_id", "alpha", "delta", "nu", "a", "m", "k", "t", "lhs", "rhs_unit_constant", "ratio"])?;
    for rep in reports {
        let p = rep.params;
        for r in &rep.rows {
            w.write_record([
                rep.id.name().to_string(),
                num(p.alpha),
                num(p.delta),
                num(p.nu),
                num(p.a),
                p.m.to_string(),
                r.k.to_string(),
                num(r.t),
                num(r.lhs),
                num(r.rhs),
                num(r.ratio),
            ])?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Trajectory history, one row per particle and stored time. Coordinates
/// are positions on the torus, wrapped into [0,1).
pub fn write_traj_csv(path: &Path, ps: &ParticleSet) -> Result<()> {
    let d = ps.d;
    let twins = ps.has_twins();
    let mut w = writer(path)?;
    let mut head = vec!["particle_id".to_string(), "t".into()];
    head.extend((1..=d).map(|i| format!("x_{i}")));
    head.extend((1..=d).map(|i| format!("u_{i}")));
    if twins {
        head.extend((1..=d).map(|i| format!("twin_x_{i}")));
    }
    w.write_record(&head)?;
    for (id, tr) in ps.tracks.iter().enumerate() {
        for (j, t) in ps.times.iter().enumerate() {
            let mut rec = vec![id.to_string(), num(*t)];
            rec.extend(tr.x[j][..d].iter().map(|v| num(*v)));
            rec.extend(tr.u[j][..d].iter().map(|v| num(*v)));
            if twins {
                rec.extend(tr.twin[j][..d].iter().map(|v| num(*v)));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn read_traj_csv(path: &Path) -> Result<ParticleSet> {
    let mut r = csv::Reader::from_path(path)?;
    let head = r.headers()?.clone();
    let d = head.iter().filter(|h| h.starts_with("x_")).count();
    let twins = head.iter().any(|h| h.starts_with("twin_x_"));
    if !(1..=2).contains(&d) {
        return Err(LabError::format(path, "expected x_1 (and x_2) columns"));
    }
    let parse = |s: &str| s.parse::<f64>().map_err(|_| LabError::format(path, format!("bad number `{s}`")));
    let mut times: Vec<f64> = Vec::new();
    let mut tracks: Vec<Track> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let id: usize = rec[0].parse().map_err(|_| LabError::format(path, "bad particle id"))?;
        let t = parse(&rec[1])?;
        let mut x = [0.0; 2];
        let mut u = [0.0; 2];
        let mut tw = [0.0; 2];
        for i in 0..d {
            x[i] = parse(&rec[2 + i])?;
            u[i] = parse(&rec[2 + d + i])?;
            if twins {
                tw[i] = parse(&rec[2 + 2 * d + i])?;
            }
        }
        if id == tracks.len() {
            tracks.push(Track::default());
        } else if id + 1 != tracks.len() {
            return Err(LabError::format(path, "rows must be grouped by particle in increasing id"));
        }
        let tr = tracks.last_mut().unwrap();
        if id == 0 {
            times.push(t);
        } else if times.get(tr.x.len()) != Some(&t) {
            return Err(LabError::format(path, "particles must share one time grid"));
        }
        tr.x.push(x);
        tr.u.push(u);
        if twins {
            tr.twin.push(tw);
        }
    }
    Ok(ParticleSet::from_samples(d, times, tracks)?)
}

pub fn write_sf_csv(path: &Path, tables: &[StructureFunctionTable]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["kind", "p", "abscissa", "value"])?;
    for t in tables {
        for (x, v) in t.abscissae.iter().zip(&t.values) {
            w.write_record([t.kind.name().to_string(), t.p.to_string(), num(*x), num(*v)])?;
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn fit_json(t: &StructureFunctionTable) -> serde_json::Value {
    match &t.fit {
        Some(f) => json!({
            "kind": t.kind.name(),
            "p": t.p,
            "slope": f.slope,
            "stderr": f.stderr,
            "window": [f.window.0, f.window.1],
            "r2": f.r2,
        }),
        None => json!({ "kind": t.kind.name(), "p": t.p, "slope": null, "stderr": null, "window": null, "r2": null }),
    }
}

/// Pretty JSON with a trailing newline. Non-finite numbers become `null`.
pub fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// `serde_json` refuses non-finite floats; keep them readable as strings.
pub fn jnum(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(num(v))
    }
}
