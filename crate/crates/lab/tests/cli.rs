use std::fs;
use std::path::Path;

use hlab::checkpoint;
use hlab::cli::run;
use hlab::output::{read_traj_csv, write_traj_csv};
use hlab::series_io::{read_series, write_series, SeriesHints};
use hlab::staging::{verify_manifest, Staging};
use hlab::ExperimentConfig;
use hlab_core::lagrangian::{self, AdvectOptions, ParticleSet};
use hlab_core::ns::{self, SolverOptions};
use hlab_core::synth::random_field;
use hlab_core::{GridSpec, LPBank};

const TINY: &str = r#"
[grid]
d = 2
n = 16

[bank]
delta = 0.5

[solver]
nu = [1e-2, 5e-3]
dt = 0.01
t_end = 0.2
snapshot_every = 2
seed = 3
alpha = 0.3333
amplitude = 0.05

[analysis]
particles = 6
sf_samples = 200
sf_probes = 16
"#;

fn hlab(args: &[&str]) -> i32 {
    let mut v = vec!["hlab"];
    v.extend_from_slice(args);
    run(v)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn checkpoint_round_trip_and_rejections() {
    let f = random_field(GridSpec::new(2, 16).unwrap(), 2, 5, 1.0, 9);
    let bytes = checkpoint::encode(&f);
    assert_eq!(&bytes[..4], b"HLAB");
    assert_eq!(bytes.len(), 20 + 16 * 2 * 256);
    assert_eq!(checkpoint::decode(&bytes).unwrap(), f);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(checkpoint::decode(&bad).is_err());
    assert!(checkpoint::decode(&bytes[..bytes.len() - 8]).is_err());
    let mut v2 = bytes;
    v2[4] = 2;
    assert!(checkpoint::decode(&v2).unwrap_err().contains("version"));
}

#[test]
fn series_round_trip_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::new(2, 16).unwrap();
    let u0 = ns::leray_project(&random_field(g, 2, 4, 2.0, 1)).unwrap().scaled(0.1);
    let series = ns::run(&u0, 1e-2, 0.05, 0.01, 1, SolverOptions::default()).unwrap();
    let hints = SeriesHints { delta: 0.5, alpha: 0.3, seed: 4 };
    write_series(dir.path(), &series, Some(hints)).unwrap();
    let back = read_series(dir.path()).unwrap();
    assert_eq!(back.series, series);
    assert_eq!(back.hints, Some(hints));
    let snap = dir.path().join("snap_00002.hlab");
    let mut b = fs::read(&snap).unwrap();
    b[100] ^= 1;
    fs::write(&snap, b).unwrap();
    assert!(read_series(dir.path()).is_err());
}

#[test]
fn trajectory_csv_round_trip() {
    let g = GridSpec::new(2, 16).unwrap();
    let u0 = ns::leray_project(&random_field(g, 2, 4, 2.0, 2)).unwrap().scaled(0.1);
    let series = ns::run(&u0, 1e-2, 0.04, 0.01, 1, SolverOptions::default()).unwrap();
    let bank = LPBank::new(g, 0.5).unwrap();
    let ps = lagrangian::advect(&series, &ParticleSet::random(2, 5, 1), Some(&bank), AdvectOptions { band: Some(2), ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    write_traj_csv(&p, &ps).unwrap();
    let back = read_traj_csv(&p).unwrap();
    assert_eq!(back.times, ps.times);
    assert_eq!(back.tracks, ps.tracks);
}

#[test]
fn staging_removes_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out");
    {
        let st = Staging::new(&target).unwrap();
        fs::write(st.join("half.csv"), "x").unwrap();
    }
    assert!(!target.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    // a failing command leaves nothing behind either
    let bad = dir.path().join("bad.hlab");
    fs::write(&bad, b"HLAB").unwrap();
    assert_eq!(hlab(&["lp-analyze", "--input", s(&bad), "--out", s(&target)]), 1);
    assert!(!target.exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "").unwrap();
    assert_eq!(hlab(&["ns-run", "--config", s(&empty)]), 1);
    assert_eq!(hlab(&["no-such-command"]), 1);
    let out = dir.path().join("hd");
    assert_eq!(hlab(&["heat-decay", "--d", "1", "--R", "8", "--delta", "0.02", "--samples", "50", "--out", s(&out)]), 0);
    let csv = fs::read_to_string(out.join("decay.csv")).unwrap();
    assert!(csv.starts_with("d,R,delta,p,seed,t,lhs_norm,bound_rhs,ratio\n"));
    assert!(verify_manifest(&out).unwrap().is_empty());
    // a thick shell decays more slowly than its radius predicts
    let thick = dir.path().join("thick");
    assert_eq!(
        hlab(&["heat-decay", "--d", "2", "--R", "4", "--delta", "0.3", "--samples", "4", "--epsilon", "0.01", "--out", s(&thick)]),
        2
    );
    assert!(thick.join("decay.csv").exists());
}

#[test]
fn manifest_detects_modified_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lp");
    assert_eq!(hlab(&["lp-analyze", "--d", "1", "--n", "256", "--out", s(&out)]), 0);
    assert!(verify_manifest(&out).unwrap().is_empty());
    let h = out.join("holder.csv");
    assert!(fs::read_to_string(&h).unwrap().starts_with("k,band_center_frequency,sup_norm,weighted_value\n"));
    fs::write(&h, "tampered").unwrap();
    assert_eq!(verify_manifest(&out).unwrap(), vec!["holder.csv".to_string()]);
}

#[test]
fn series_commands_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let runs = dir.path().join("runs");
    assert_eq!(hlab(&["ns-run", "--config", s(&cfg), "--set", "solver.nu=[2e-2]", "--out", s(&runs)]), 0);
    let series = runs.join("series").join("nu_2e-2");
    assert!(series.join("manifest.toml").exists());
    assert!(!runs.join("series").join("nu_1e-2").exists());

    let tr = dir.path().join("tr");
    assert_eq!(hlab(&["traj", "--series", s(&series), "--k", "2", "--particles", "4", "--seed", "1", "--out", s(&tr)]), 0);
    let head = fs::read_to_string(tr.join("trajectory.csv")).unwrap();
    assert!(head.starts_with("particle_id,t,x_1,x_2,u_1,u_2,twin_x_1,twin_x_2\n"));

    let v = dir.path().join("v");
    assert_eq!(hlab(&["verify", "--series", s(&series), "--estimates", "CET,FK,E1", "--alpha", "0.3333", "--a", "1.0", "--out", s(&v)]), 0);
    let b = fs::read_to_string(v.join("bounds.csv")).unwrap();
    assert!(b.starts_with("estimate_id,alpha,delta,nu,a,m,k,t,lhs,rhs_unit_constant,ratio\n"));
    assert!(b.lines().skip(1).all(|l| l.starts_with("CET,") || l.starts_with("FK,") || l.starts_with("E1,")));

    let sf = dir.path().join("sf");
    let trc = tr.join("trajectory.csv");
    assert_eq!(hlab(&["structfun", "--series", s(&series), "--kind", "lagrangian", "--p", "2", "--traj", s(&trc), "--out", s(&sf)]), 0);
    assert!(fs::read_to_string(sf.join("sf.csv")).unwrap().starts_with("kind,p,abscissa,value\n"));
    let fits: serde_json::Value = serde_json::from_str(&fs::read_to_string(sf.join("fit.json")).unwrap()).unwrap();
    for key in ["slope", "stderr", "window", "r2"] {
        assert!(fits[0].get(key).is_some());
    }
    // outputs of earlier commands are untouched by later ones
    assert!(verify_manifest(&runs).unwrap().is_empty());
    assert!(verify_manifest(&tr).unwrap().is_empty());
}

#[test]
fn pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ca = hlab(&["pipeline", "--config", s(&cfg), "--out", s(&a)]);
    let cb = hlab(&["pipeline", "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(ca, cb);
    assert!(ca == 0 || ca == 2);
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.len() > 10);
    assert_eq!(ta, tb);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_sha256"], ExperimentConfig::from_toml(TINY).unwrap().hash());
}
