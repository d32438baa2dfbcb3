//! Snapshot series on disk: `manifest.toml` plus one checkpoint per snapshot.

use std::fs;
use std::path::Path;

use hlab_core::ns::{Dealias, SnapshotSeries};
use hlab_core::GridSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint;
use crate::config::hex;
use crate::error::{io_err, LabError, Result};

pub const MANIFEST: &str = "manifest.toml";

#[derive(Serialize, Deserialize)]
struct SeriesManifest {
    format: String,
    version: u32,
    d: usize,
    n: usize,
    nu: f64,
    dt: f64,
    snapshot_every: usize,
    dealias: String,
    nonlinear: bool,
    initial_projected: bool,
    times: Vec<f64>,
    energies: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hints: Option<SeriesHints>,
    snapshots: Vec<SnapshotEntry>,
}

/// Analysis defaults recorded by the run that produced the series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesHints {
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
}

pub struct LoadedSeries {
    pub series: SnapshotSeries,
    pub hints: Option<SeriesHints>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotEntry {
    file: String,
    sha256: String,
}

pub fn snapshot_name(i: usize) -> String {
    format!("snap_{i:05}.hlab")
}

pub fn write_series(dir: &Path, s: &SnapshotSeries, hints: Option<SeriesHints>) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut snapshots = Vec::with_capacity(s.len());
    for (i, f) in s.fields.iter().enumerate() {
        let bytes = checkpoint::encode(f);
        let name = snapshot_name(i);
        let path = dir.join(&name);
        fs::write(&path, &bytes).map_err(io_err(&path))?;
        snapshots.push(SnapshotEntry { file: name, sha256: hex(&Sha256::digest(&bytes)) });
    }
    let m = SeriesManifest {
        format: "hlab-series".into(),
        version: 1,
        d: s.grid.d(),
        n: s.grid.n(),
        nu: s.nu,
        dt: s.dt,
        snapshot_every: s.snapshot_every,
        dealias: s.dealias.name().into(),
        nonlinear: s.nonlinear,
        initial_projected: s.initial_projected,
        times: s.times.clone(),
        energies: s.energies.clone(),
        hints,
        snapshots,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, toml::to_string(&m).expect("manifest serializes")).map_err(io_err(&path))
}

/// Load a series, checking every snapshot against its recorded hash.
pub fn read_series(dir: &Path) -> Result<LoadedSeries> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let m: SeriesManifest = toml::from_str(&text).map_err(|e| LabError::format(&mpath, e.message().to_string()))?;
    let bad = |r: String| LabError::format(&mpath, r);
    if m.format != "hlab-series" || m.version != 1 {
        return Err(bad(format!("unsupported series format {} v{}", m.format, m.version)));
    }
    if m.times.len() != m.snapshots.len() || m.energies.len() != m.snapshots.len() || m.snapshots.is_empty() {
        return Err(bad("times, energies and snapshots disagree in length".into()));
    }
    let grid = GridSpec::new(m.d, m.n)?;
    let dealias = Dealias::parse(&m.dealias)?;
    let mut fields = Vec::with_capacity(m.snapshots.len());
    for e in &m.snapshots {
        let path = dir.join(&e.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if hex(&Sha256::digest(&bytes)) != e.sha256 {
            return Err(LabError::format(&path, "sha256 does not match the series manifest"));
        }
        let f = checkpoint::decode(&bytes).map_err(|r| LabError::format(&path, r))?;
        if f.grid() != grid || f.components() != 2 {
            return Err(LabError::format(&path, "snapshot grid or component count differs from the manifest"));
        }
        fields.push(f);
    }
    let series = SnapshotSeries {
        grid,
        nu: m.nu,
        dt: m.dt,
        snapshot_every: m.snapshot_every,
        dealias,
        nonlinear: m.nonlinear,
        times: m.times,
        fields,
        energies: m.energies,
        initial_projected: m.initial_projected,
    };
    Ok(LoadedSeries { series, hints: m.hints })
}

/// Only the analysis hints, without loading snapshots.
pub fn read_hints(dir: &Path) -> Result<Option<SeriesHints>> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let m: SeriesManifest = toml::from_str(&text).map_err(|e| LabError::format(&mpath, e.message().to_string()))?;
    Ok(m.hints)
}
