//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Criteria 5–9 drive the `blowup all` binary on the bundled configs.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;

use blowup::diagnostics::function_suite;
use blowup::grid::RadialGrid;
use blowup::ode::{ode_blowup_time, ode_integrate};
use blowup::solver::{estimate_t, Boundary, PhiSolver, RunLimits, SolverOptions};
use blowup::Nonlinearity;
use common::{mms_error, oracle_big_f};
use serde_json::Value;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

const MATRIX: [(f64, f64); 9] = [
    (1.5, 0.0),
    (1.5, 1.0),
    (1.5, 2.0),
    (2.0, 0.0),
    (2.0, 1.0),
    (2.0, 2.0),
    (3.0, 0.0),
    (3.0, 1.0),
    (3.0, 2.0),
];

fn special_function_suite() -> Verdict {
    let mut worst_oracle = 0.0f64;
    for (p, q) in MATRIX {
        let nl = Nonlinearity::super_exponential(p, q).unwrap();
        for row in function_suite(&nl).map_err(|e| e.to_string())? {
            ensure(row.pass, format!("(p,q)=({p},{q}) {}: {:e} > {:e} at u={}", row.name, row.statistic, row.threshold, row.at))?;
        }
        // library F against the quadrature oracle on [0, 5]
        let start = if q == 0.0 { 0.0 } else { 0.05 };
        for i in 0..=25 {
            let u = start + (5.0 - start) * i as f64 / 25.0;
            let lib = nl.ln_big_f(u).unwrap().exp();
            worst_oracle = worst_oracle.max((lib / oracle_big_f(p, q, u) - 1.0).abs());
        }
    }
    ensure(worst_oracle <= 1e-12, format!("F vs quadrature oracle: {worst_oracle:e}"))?;
    Ok(format!("9 pairs, all four properties hold; F vs oracle {worst_oracle:.1e}"))
}

fn known_values() -> Verdict {
    let nl = Nonlinearity::super_exponential(2.0, 0.0).unwrap();
    let f0 = nl.ln_big_f(0.0).unwrap().exp();
    let half_sqrt_pi = std::f64::consts::PI.sqrt() / 2.0;
    ensure((f0 / half_sqrt_pi - 1.0).abs() <= 1e-9, format!("F(0) = {f0}"))?;
    let f1 = nl.ln_big_f(1.0).unwrap().exp();
    let erfc_value = half_sqrt_pi * libm::erfc(1.0);
    ensure((f1 / erfc_value - 1.0).abs() <= 1e-9, format!("F(1) = {f1} vs {erfc_value}"))?;
    // the quoted 0.1394027 is truncated, not rounded (F(1) = 0.13940279…)
    ensure((f1 - 0.1394027).abs() < 1e-7, format!("F(1) = {f1}"))?;
    let exp = Nonlinearity::exponential_reference();
    for u in [0.0, 0.5, 3.0, 20.0] {
        let got = exp.ln_big_f(u).unwrap().exp();
        ensure((got / (-u).exp() - 1.0).abs() <= 1e-12, format!("exponential F({u}) = {got}"))?;
    }
    for p in [1.5, 2.0, 3.0] {
        let pow = Nonlinearity::power_reference(p).unwrap();
        for u in [0.5, 1.0, 4.0] {
            let got = pow.ln_big_f(u).unwrap().exp();
            let want = u.powf(1.0 - p) / (p - 1.0);
            ensure((got / want - 1.0).abs() <= 1e-12, format!("power p={p} F({u}) = {got} vs {want}"))?;
        }
    }
    Ok(format!("F(0) = {f0:.12}, F(1) = {f1:.10}; exponential and power closed forms exact"))
}

fn ode_oracle() -> Verdict {
    let nl = Nonlinearity::super_exponential(2.0, 0.0).unwrap();
    let run = ode_integrate(&nl, 1.0, 10.0, 1e-9).map_err(|e| e.to_string())?;
    let big_t = ode_blowup_time(&nl, 1.0).unwrap().exp();
    ensure(run.samples.last().unwrap().y >= 10.0, "did not reach y = 10".into())?;
    let mut worst = 0.0f64;
    for s in &run.samples {
        let exact = nl.f_inv_log(s.log_gap).unwrap();
        worst = worst.max(((s.y - exact) / exact).abs());
    }
    ensure(worst <= 1e-6, format!("y vs F^-1(T - t): {worst:e}"))?;
    let inv = run.lifetime_invariant().unwrap();
    let drift = inv.iter().map(|v| (v / big_t - 1.0).abs()).fold(0.0, f64::max);
    ensure(drift <= 1e-6, format!("t + F(y) drift {drift:e}"))?;
    Ok(format!("{} samples to y = 10: max rel. deviation {worst:.1e}, invariant drift {drift:.1e}", run.samples.len()))
}

fn solver_convergence() -> Verdict {
    let errs: Vec<f64> = [128, 256, 512].iter().map(|&j| mms_error(j, 2e-4)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(orders.iter().all(|o| *o >= 1.8), format!("MMS errors {errs:?}, orders {orders:?}"))?;

    // Constant data with a reflecting wall reduce to the ODE. Fixed-t
    // comparison is ill-conditioned near T (the numerical T moves by the
    // integrator's error), so compare the time spent in each unit-Φ window
    // with the exact F(u_{k-1}) − F(u_k), in logs.
    let nl = Nonlinearity::super_exponential(2.0, 0.0).unwrap();
    let g = RadialGrid::new(1, 1.0, 64).unwrap();
    let y0 = 1.0;
    let opts = SolverOptions {
        boundary: Boundary::Neumann,
        ..SolverOptions::default()
    };
    let mut s = PhiSolver::new(nl, g, &vec![y0; g.len()], opts).map_err(|e| e.to_string())?;
    let limits = RunLimits {
        phi_stop: 100.0,
        ..RunLimits::default()
    };
    let snaps = s.run_to_blowup(&limits).map_err(|e| e.to_string())?;
    let big_t = nl.ln_big_f(y0).unwrap().exp();
    let mut worst = 0.0f64;
    for w in snaps.windows(2) {
        let (a, b) = (w[0].center(), w[1].center());
        let exact = -a + (-(-(b - a)).exp_m1()).ln();
        worst = worst.max((w[1].log_window - exact).abs() / (b - a));
    }
    ensure(worst <= 1e-4, format!("ODE reduction: {worst:e} per unit Φ"))?;
    let est = estimate_t(&snaps).map_err(|e| e.to_string())?;
    Ok(format!(
        "MMS orders {:.3}, {:.3}; ODE reduction {worst:.1e} per unit Φ (T error {:.1e})",
        orders[0],
        orders[1],
        (est.t_est / big_t - 1.0).abs()
    ))
}

const CONFIGS: [&str; 4] = ["exp_n1", "p2q0_n1", "p2q0_n2", "p2q1_n1"];

struct Runs {
    root: tempfile::TempDir,
    codes: BTreeMap<String, i32>,
}

impl Runs {
    fn dir(&self, tag: &str, config: &str) -> PathBuf {
        self.root.path().join(tag).join(config)
    }

    fn report(&self, config: &str) -> std::result::Result<Value, String> {
        let path = self.dir("a", config).join("report.json");
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| e.to_string())
    }
}

fn run_all() -> Runs {
    let root = tempfile::tempdir().expect("temp dir");
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut codes = BTreeMap::new();
    for tag in ["a", "b"] {
        for c in CONFIGS {
            let out = root.path().join(tag).join(c);
            let status = Command::new(env!("CARGO_BIN_EXE_blowup"))
                .arg("all")
                .arg("--config")
                .arg(configs.join(format!("{c}.toml")))
                .arg("--out")
                .arg(&out)
                .output()
                .expect("launch blowup");
            codes.insert(format!("{tag}/{c}"), status.status.code().unwrap_or(-1));
            if !status.status.success() {
                eprintln!("{tag}/{c}: {}", String::from_utf8_lossy(&status.stderr));
            }
        }
    }
    Runs { root, codes }
}

fn check<'a>(report: &'a Value, name: &str) -> std::result::Result<&'a Value, String> {
    report["checks"]
        .as_array()
        .and_then(|cs| cs.iter().find(|c| c["name"] == name))
        .ok_or_else(|| format!("check `{name}` missing"))
}

fn passed(report: &Value, name: &str) -> std::result::Result<f64, String> {
    let c = check(report, name)?;
    ensure(c["verdict"] == "pass", format!("{name}: verdict {} (statistic {})", c["verdict"], c["statistic"]))?;
    Ok(c["statistic"].as_f64().unwrap_or(f64::NAN))
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn main_theorem_on(runs: &Runs, config: &str) -> std::result::Result<(f64, f64, f64), String> {
    ensure(runs.codes[&format!("a/{config}")] == 0, format!("{config}: `all` exited {}", runs.codes[&format!("a/{config}")]))?;
    let r = runs.report(config)?;
    let dev = passed(&r, "main_theorem")?;
    let d = &check(&r, "main_theorem")?["details"];
    let slope = num(&d["theil_sen_slope"]);
    let s_final = num(&d["s_final"]);
    ensure(dev <= 0.1, format!("{config}: sup|v-1| = {dev}"))?;
    ensure(slope < 0.0, format!("{config}: Theil-Sen slope {slope:e} is not negative"))?;
    Ok((dev, slope, s_final))
}

fn base_case(runs: &Runs) -> Verdict {
    let (dev, slope, s_final) = main_theorem_on(runs, "exp_n1")?;
    ensure(s_final >= 15.0, format!("final s = {s_final}"))?;
    Ok(format!("exponential, n=1: sup|v-1| = {dev:.2e} at s = {s_final:.1}, slope {slope:.1e}"))
}

fn main_theorem(runs: &Runs) -> Verdict {
    let mut parts = Vec::new();
    for c in ["p2q0_n1", "p2q0_n2", "p2q1_n1"] {
        let (dev, slope, s_final) = main_theorem_on(runs, c)?;
        ensure(s_final >= 395.0, format!("{c}: final s = {s_final}"))?;
        parts.push(format!("{c} {dev:.2e} (slope {slope:.1e})"));
    }
    let r = runs.report("p2q1_n1")?;
    let label = check(&r, "type_one_witness")?["label"].clone();
    ensure(label == "measured", format!("p2q1 type-I witness label {label}"))?;
    passed(&r, "type_one_witness")?;
    Ok(format!("{}; p2q1 type-I witness labeled measured", parts.join(", ")))
}

fn ledgers(runs: &Runs) -> Verdict {
    let r = runs.report("p2q0_n1")?;
    let frac = passed(&r, "energy_inequality")?;
    let exponent = passed(&r, "h_integrability")?;
    let h_alpha = passed(&r, "h_alpha")?;
    let grad = passed(&r, "derivative_gradient")?;
    let hess = passed(&r, "derivative_hessian")?;
    passed(&r, "stationary_identity")?;
    let mut leib = 0.0f64;
    for name in ["leibniz_constant", "leibniz_gaussian", "leibniz_poly_gaussian"] {
        let d = passed(&r, name)?;
        ensure(d <= 1e-6, format!("{name}: {d:e}"))?;
        leib = leib.max(d);
    }
    Ok(format!(
        "energy ineq. {:.0}%, H tail exponent {exponent:.2}, min h_alpha ratio {h_alpha:.3}, derivative tails {grad:.2}/{hess:.2} of median, Leibniz {leib:.1e}",
        100.0 * frac
    ))
}

fn quasiscaling(runs: &Runs) -> Verdict {
    let mut parts = Vec::new();
    for c in ["p2q0_n1", "p2q1_n1"] {
        let r = runs.report(c)?;
        let o1 = passed(&r, "quasiscaling_lambda_1")?;
        let oh = passed(&r, "quasiscaling_lambda_half")?;
        ensure(o1 >= 1.5 && oh >= 1.5, format!("{c}: orders {o1}, {oh}"))?;
        parts.push(format!("{c} orders {o1:.2} / {oh:.2}"));
    }
    Ok(parts.join(", "))
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(runs: &Runs) -> Verdict {
    let mut files = 0;
    for c in CONFIGS {
        let (a, b) = (tree(&runs.dir("a", c)), tree(&runs.dir("b", c)));
        ensure(!a.is_empty(), format!("{c}: no artifacts"))?;
        let names_a: Vec<_> = a.keys().collect();
        let names_b: Vec<_> = b.keys().collect();
        ensure(names_a == names_b, format!("{c}: artifact sets differ"))?;
        for (k, v) in &a {
            ensure(&b[k] == v, format!("{c}: {} differs", k.display()))?;
        }
        files += a.len();
    }
    Ok(format!("{files} artifacts over {} configs byte-identical", CONFIGS.len()))
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    })
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut report = |id: u32, name: &'static str, v: Verdict| {
        match &v {
            Ok(d) => println!("PASS criterion {id} ({name}): {d}"),
            Err(d) => println!("FAIL criterion {id} ({name}): {d}"),
        }
        results.push((id, name, v));
    };
    report(1, "special-function suite", guarded(special_function_suite));
    report(2, "known values", guarded(known_values));
    report(3, "ODE oracle", guarded(ode_oracle));
    report(4, "solver convergence", guarded(solver_convergence));
    let runs = run_all();
    report(5, "exponential base case", guarded(|| base_case(&runs)));
    report(6, "quasi-self-similar convergence", guarded(|| main_theorem(&runs)));
    report(7, "inequality ledgers", guarded(|| ledgers(&runs)));
    report(8, "quasi-scaling residual", guarded(|| quasiscaling(&runs)));
    report(9, "determinism", guarded(|| determinism(&runs)));

    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
