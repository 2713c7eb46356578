use std::path::Path;
use std::process::Command;

use blowup::artifacts::{read_json, FrameFile, MANIFEST};
use blowup::config::RunConfig;
use blowup::pipeline::{analyze, load_run, report, simulate};
use blowup::selfsimilar::{frame_u, to_frame_on};
use blowup::Error;

const SMALL: &str = r#"
[nonlinearity]
family = "super_exponential"
p = 2.0
q = 0.0

[grid]
n = 1
J = 64

[init]
profile = "scaled_steady"
amplitude = 1.5

[solver]
phi_stop = 30.0

[analysis]
quasiscaling_grids = [64, 128, 256]
"#;

fn small() -> RunConfig {
    RunConfig::from_toml_str(SMALL).unwrap()
}

#[test]
fn stages_refuse_missing_inputs_and_overwrites() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    match analyze(&out, &[]) {
        Err(Error::MissingArtifacts(list)) => assert!(list[0].contains("manifest"), "{list:?}"),
        other => panic!("{other:?}"),
    }
    simulate(&small(), &out, false).unwrap();
    assert!(matches!(simulate(&small(), &out, false), Err(Error::WouldOverwrite(_))));
    assert!(matches!(report(&out), Err(Error::MissingArtifacts(_))));

    std::fs::remove_file(out.join("snapshots/snap_0003.json")).unwrap();
    match load_run(&out) {
        Err(Error::MissingArtifacts(list)) => assert_eq!(list, vec!["snapshot (snapshots/snap_0003.json)"]),
        Err(e) => panic!("{e:?}"),
        Ok(_) => panic!("loaded a run with a missing snapshot"),
    }
    simulate(&small(), &out, true).unwrap();
    analyze(&out, &[]).unwrap();
    let r = report(&out).unwrap();
    assert!(r.check("main_theorem").is_some());
    assert!(out.join("report.md").exists());
}

#[test]
fn frames_reproduce_the_solution_at_grid_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = small();
    simulate(&cfg, out, false).unwrap();
    analyze(out, &[]).unwrap();
    let run = load_run(out).unwrap();
    let grid = cfg.grid().unwrap();
    let nl = cfg.nonlinearity().unwrap();
    let manifest = run.manifest;
    let names = manifest.analysis.as_ref().unwrap().frames.clone();
    assert!(!names.is_empty());
    for name in names.iter().step_by(7) {
        let f: FrameFile = read_json(&out.join(name)).unwrap();
        let snap = &run.snapshots[f.snapshot];
        let scale = (0.5 * f.s).exp();
        // y-nodes that land exactly on interior grid nodes
        let js: Vec<usize> = (0..grid.cells).collect();
        let y: Vec<f64> = js.iter().map(|&j| grid.r(j) * scale).collect();
        let frame = to_frame_on(&grid, snap, f.log_gap, f.alpha, &y).unwrap();
        let u = frame_u(&nl, &frame).unwrap();
        for (&j, uf) in js.iter().zip(&u) {
            let us = nl.f_inv_log(-snap.phi[j]).unwrap();
            assert!((uf - us).abs() <= 1e-9 * us.max(1.0), "{name} node {j}: {uf} vs {us}");
        }
    }
}

#[test]
fn center_value_never_decreases_for_supersolution_data() {
    let dir = tempfile::tempdir().unwrap();
    simulate(&small(), dir.path(), false).unwrap();
    let run = load_run(dir.path()).unwrap();
    assert_eq!(run.manifest.initial_data.supersolution, Some(true));
    for w in run.snapshots.windows(2) {
        assert!(w[1].center() >= w[0].center());
        assert!(w[1].t >= w[0].t);
    }
    for w in run.manifest.log_gaps.windows(2) {
        assert!(w[1] < w[0]);
    }
}

fn blowup(args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_blowup")).args(args).output().unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SMALL.replace("[analysis]", "[analysis]\nalpha = 0.7")).unwrap();
    let (code, _, err) = blowup(&["simulate", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("alpha"), "{err}");

    let (code, _, err) = blowup(&["report", "--out", dir.path().join("nothing").to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("missing artifacts"), "{err}");

    let (code, out, _) = blowup(&["verify-fn", "--p", "2", "--q", "1", "--points", "5"]);
    assert_eq!(code, 0);
    assert!(out.lines().filter(|l| l.starts_with("pass")).count() == 4, "{out}");

    let good = dir.path().join("good.toml");
    std::fs::write(&good, SMALL).unwrap();
    let run = dir.path().join("run");
    let (code, out, err) = blowup(&[
        "simulate",
        "--config",
        good.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--phi-stop",
        "12",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains(MANIFEST));
    assert!(Path::new(&run).join(MANIFEST).exists());
    let (code, _, err) = blowup(&["simulate", "--config", good.to_str().unwrap(), "--out", run.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("--force"));
}
