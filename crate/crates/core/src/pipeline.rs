//! simulate → analyze → report, each stage reading only what the previous
//! one persisted.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::artifacts::{
    self, cell, clear_outputs, frame_name, ledger_name, read_json, require, snapshot_name, write_bytes, write_json,
    AnalysisRecord, FrameFile, InitialDataRecord, Manifest, SnapshotFile, Table, FRAME_DIR, LEDGER_DIR, MANIFEST,
    REPORT_JSON, REPORT_MD, SNAPSHOT_DIR,
};
use crate::config::RunConfig;
use crate::diagnostics::{self, log_v_lipschitz, DiagnosticsReport, RunView};
use crate::error::{Error, Result};
use crate::init::prepare;
use crate::selfsimilar::{
    ds_middle, energy, energy_inequality_check, residual_veq, stationary_identity, to_frame, to_frame_on,
    weighted_max, EnergyRecord, SelfSimilarFrame,
};
use crate::solver::{estimate_t, log_gaps, PhiSolver, Snapshot, SolverOptions};

/// Energy-inequality slack in units of the local v-equation residual.
pub const SLACK_FACTOR: f64 = 3.0;

pub const QUASISCALING_LAMBDAS: [f64; 2] = [1.0, 0.5];

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub manifest: PathBuf,
    pub snapshots: usize,
    pub steps: u64,
    pub t_est: f64,
    pub log_gap_last: f64,
}

/// Runs the solver to the configured Φ_stop and writes snapshots + manifest.
pub fn simulate(config: &RunConfig, out: &Path, force: bool) -> Result<SimulateSummary> {
    let manifest_path = out.join(MANIFEST);
    if manifest_path.exists() && !force {
        return Err(Error::WouldOverwrite(manifest_path));
    }
    clear_outputs(out, &[MANIFEST, SNAPSHOT_DIR, FRAME_DIR, LEDGER_DIR, REPORT_JSON, REPORT_MD])?;

    let nl = config.nonlinearity()?;
    let grid = config.grid()?;
    let requested = config.profile();
    let prepared = prepare(&nl, &grid, requested, config.init.supersolution_check)?;
    let opts = SolverOptions {
        controller: config.controller(),
        ..SolverOptions::default()
    };
    let mut solver = PhiSolver::new(nl, grid, &prepared.u0, opts)?;
    let snapshots = solver.run_to_blowup(&config.limits())?;
    let estimate = estimate_t(&snapshots)?;
    let gaps = log_gaps(&snapshots, &estimate);

    let mut names = Vec::with_capacity(snapshots.len());
    for (k, snap) in snapshots.iter().enumerate() {
        let name = snapshot_name(k);
        write_json(&out.join(&name), &SnapshotFile::from_snapshot(k, &grid, snap), false)?;
        names.push(name);
    }
    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        run_id: config.run_id(),
        config_hash: config.hash(),
        config: config.clone(),
        scope_banner: config.out_of_scope_banner(),
        initial_data: InitialDataRecord {
            profile: prepared.profile,
            requested_amplitude: requested.amplitude(),
            adjustments: prepared.adjustments,
            supersolution: prepared.supersolution,
        },
        steps: solver.step_index(),
        snapshots: names,
        log_gaps: gaps,
        estimate: estimate.clone(),
        analysis: None,
    };
    write_json(&manifest_path, &manifest, true)?;
    Ok(SimulateSummary {
        manifest: manifest_path,
        snapshots: snapshots.len(),
        steps: manifest.steps,
        t_est: estimate.t_est,
        log_gap_last: estimate.log_gap_last,
    })
}

/// Manifest plus decoded snapshots of a simulated run.
pub struct LoadedRun {
    pub manifest: Manifest,
    pub snapshots: Vec<Snapshot>,
}

pub fn load_run(out: &Path) -> Result<LoadedRun> {
    require(out, &[("manifest", MANIFEST.to_string())])?;
    let manifest: Manifest = read_json(&out.join(MANIFEST))?;
    let listed: Vec<(&str, String)> = manifest.snapshots.iter().map(|n| ("snapshot", n.clone())).collect();
    require(out, &listed)?;
    let snapshots = manifest
        .snapshots
        .iter()
        .map(|n| read_json::<SnapshotFile>(&out.join(n))?.to_snapshot())
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedRun { manifest, snapshots })
}

#[derive(Debug, Clone)]
pub struct AnalyzeSummary {
    pub frames: usize,
    pub ledgers: Vec<PathBuf>,
}

/// Per-frame quantities that need the neighbouring frames.
struct Interior {
    residual: f64,
    vs_bound: f64,
    energy: EnergyRecord,
}

fn interior(
    config: &RunConfig,
    run: &LoadedRun,
    idx: [usize; 3],
    mid: &SelfSimilarFrame,
) -> Result<Interior> {
    let grid = config.grid()?;
    let nl = config.nonlinearity()?;
    let alpha = mid.alpha;
    let gaps = &run.manifest.log_gaps;
    let prev = to_frame_on(&grid, &run.snapshots[idx[0]], gaps[idx[0]], alpha, &mid.y_nodes)?;
    let next = to_frame_on(&grid, &run.snapshots[idx[2]], gaps[idx[2]], alpha, &mid.y_nodes)?;
    let res = residual_veq(&prev, mid, &next, &nl)?;
    let vs = ds_middle(&prev, mid, &next)?;
    let vs_bound = vs
        .iter()
        .zip(mid.v.iter().zip(&mid.y_nodes))
        .map(|(d, (v, y))| (d / (v * (1.0 + y))).abs())
        .fold(0.0, f64::max);
    Ok(Interior {
        residual: weighted_max(mid, &res),
        vs_bound,
        energy: energy(&prev, mid, &next, &nl)?,
    })
}

/// Builds frames for every snapshot with s > 0 and writes the ledgers.
pub fn analyze(out: &Path, overrides: &[String]) -> Result<AnalyzeSummary> {
    let run = load_run(out)?;
    let mut config = run.manifest.config.clone();
    for o in overrides {
        config = config.with_override(o)?;
    }
    let grid = config.grid()?;
    let spec = config.frame_spec();
    let c = config.analysis.c_compact;
    let gaps = &run.manifest.log_gaps;
    clear_outputs(out, &[FRAME_DIR, LEDGER_DIR, REPORT_JSON, REPORT_MD])?;

    let resolved: Vec<usize> = (0..run.snapshots.len()).filter(|&k| gaps[k] < 0.0).collect();
    let frames: Vec<SelfSimilarFrame> = resolved
        .par_iter()
        .map(|&k| to_frame(&grid, &run.snapshots[k], gaps[k], &spec))
        .collect::<Result<_>>()?;
    let interiors: Vec<Option<Interior>> = (0..frames.len())
        .into_par_iter()
        .map(|i| {
            if i == 0 || i + 1 == frames.len() {
                return Ok(None);
            }
            interior(&config, &run, [resolved[i - 1], resolved[i], resolved[i + 1]], &frames[i]).map(Some)
        })
        .collect::<Result<_>>()?;

    let mut frame_names = Vec::new();
    let mut frames_csv = Table::new(&[
        "snapshot",
        "s",
        "sup_deviation",
        "min_v",
        "v0",
        "log_v_lipschitz",
        "I1",
        "I2",
        "stationary_residual",
        "residual_veq",
        "vs_bound",
        "truncated",
    ]);
    for (i, f) in frames.iter().enumerate() {
        let k = resolved[i];
        let name = frame_name(k);
        write_json(&out.join(&name), &FrameFile::from_frame(k, gaps[k], f), false)?;
        frame_names.push(name);
        let st = stationary_identity(f)?;
        let (res, vsb) = interiors[i].as_ref().map_or((f64::NAN, f64::NAN), |x| (x.residual, x.vs_bound));
        frames_csv.push(vec![
            k.to_string(),
            cell(f.s),
            cell(f.sup_deviation(c)),
            cell(f.min_v(c)),
            cell(f.v[0]),
            cell(log_v_lipschitz(f)?),
            cell(st.i1),
            cell(st.i2),
            cell(st.residual),
            cell(res),
            cell(vsb),
            (f.truncated as u8).to_string(),
        ]);
    }

    let mut energy_csv = Table::new(&[
        "s",
        "E",
        "dirichlet_part",
        "potential_part",
        "H",
        "h_square",
        "G_boundary",
        "vs_integral",
        "residual_veq",
        "truncated",
    ]);
    let inner: Vec<&Interior> = interiors.iter().flatten().collect();
    for x in &inner {
        let e = &x.energy;
        energy_csv.push(vec![
            cell(e.s),
            cell(e.e),
            cell(e.dirichlet_part),
            cell(e.potential_part),
            cell(e.h),
            cell(e.h_square),
            cell(e.g_boundary),
            cell(e.vs_integral),
            cell(x.residual),
            (e.truncated as u8).to_string(),
        ]);
    }

    let records: Vec<EnergyRecord> = inner.iter().map(|x| x.energy).collect();
    let mut intervals_csv = Table::new(&["s_left", "s_right", "lhs", "rhs", "slack", "holds"]);
    for (i, mut iv) in energy_inequality_check(&records, 0.0).into_iter().enumerate() {
        iv.slack = SLACK_FACTOR * inner[i].residual.max(inner[i + 1].residual);
        iv.holds = iv.lhs <= iv.rhs + iv.slack;
        intervals_csv.push(vec![
            cell(iv.s_left),
            cell(iv.s_right),
            cell(iv.lhs),
            cell(iv.rhs),
            cell(iv.slack),
            (iv.holds as u8).to_string(),
        ]);
    }

    let mut snapshots_csv = Table::new(&["snapshot", "t", "log_gap", "phi_center", "umax", "step_index"]);
    for (k, s) in run.snapshots.iter().enumerate() {
        snapshots_csv.push(vec![
            k.to_string(),
            artifacts::decimal17(s.t),
            cell(gaps[k]),
            cell(s.center()),
            cell(s.umax),
            s.step_index.to_string(),
        ]);
    }

    let qs = diagnostics::quasiscaling_study(&config, run.manifest.initial_data.profile, &QUASISCALING_LAMBDAS)?;
    let mut qs_csv = Table::new(&["lambda", "J", "t_probe", "residual"]);
    for r in &qs {
        qs_csv.push(vec![cell(r.lambda), r.cells.to_string(), cell(r.t_probe), cell(r.residual)]);
    }

    let mut ledgers = Vec::new();
    for (name, table) in [
        ("frames", &frames_csv),
        ("energy", &energy_csv),
        ("intervals", &intervals_csv),
        ("snapshots", &snapshots_csv),
        ("quasiscaling", &qs_csv),
    ] {
        let rel = ledger_name(name);
        table.write(&out.join(&rel))?;
        ledgers.push(rel);
    }

    let mut manifest = run.manifest;
    manifest.config = config.clone();
    manifest.analysis = Some(AnalysisRecord {
        alpha: config.alpha(),
        config_hash: config.hash(),
        frames: frame_names,
        ledgers: ledgers.clone(),
    });
    write_json(&out.join(MANIFEST), &manifest, true)?;
    Ok(AnalyzeSummary {
        frames: frames.len(),
        ledgers: ledgers.iter().map(|l| out.join(l)).collect(),
    })
}

/// Evaluates every check from the persisted artifacts.
pub fn report(out: &Path) -> Result<DiagnosticsReport> {
    let run = load_run(out)?;
    let analysis = run
        .manifest
        .analysis
        .clone()
        .ok_or_else(|| Error::MissingArtifacts(vec!["analysis record in manifest (run `analyze`)".into()]))?;
    let mut needed: Vec<(&str, String)> = analysis.frames.iter().map(|f| ("frame", f.clone())).collect();
    needed.extend(analysis.ledgers.iter().map(|l| ("ledger", l.clone())));
    require(out, &needed)?;

    let frames = analysis
        .frames
        .iter()
        .map(|name| {
            let file: FrameFile = read_json(&out.join(name))?;
            Ok((file.snapshot, file.to_frame()?))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = |name: &str| Table::read(&out.join(ledger_name(name)));
    let (frame_table, energy_table, interval_table, qs_table) =
        (table("frames")?, table("energy")?, table("intervals")?, table("quasiscaling")?);

    let config = &run.manifest.config;
    let view = RunView {
        config,
        nl: config.nonlinearity()?,
        grid: config.grid()?,
        snapshots: &run.snapshots,
        log_gaps: &run.manifest.log_gaps,
        estimate: &run.manifest.estimate,
        initial_profile: run.manifest.initial_data.profile,
        supersolution: run.manifest.initial_data.supersolution,
        frames: &frames,
        frame_table: &frame_table,
        energy_table: &energy_table,
        interval_table: &interval_table,
        quasiscaling_table: &qs_table,
    };
    let checks = diagnostics::assemble_checks(&view)?;
    let report = DiagnosticsReport::new(
        run.manifest.run_id.clone(),
        run.manifest.config_hash.clone(),
        run.manifest.scope_banner.clone(),
        checks,
    );
    write_json(&out.join(REPORT_JSON), &report, true)?;
    write_bytes(&out.join(REPORT_MD), report.to_markdown().as_bytes())?;
    Ok(report)
}
