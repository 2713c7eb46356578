//! Command-line front end. Exit codes: 0 success, 1 a diagnostic failed,
//! 2 usage/config/artifact problems, 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::artifacts::{cell, flush_stdout, write_bytes, Table, REPORT_JSON, REPORT_MD};
use crate::config::RunConfig;
use crate::diagnostics::{function_suite, DiagnosticsReport, Verdict};
use crate::error::{Error, Result};
use crate::nonlinearity::{Family, Nonlinearity};
use crate::ode::ode_integrate;
use crate::pipeline;

#[derive(Parser, Debug)]
#[command(name = "blowup", version, about = "Blow-up simulation and self-similar diagnostics")]
pub struct Cli {
    /// Worker threads for analysis (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct FnArgs {
    /// super_exponential, pure_exponential_reference or power_reference.
    #[arg(long, default_value = "super_exponential")]
    pub family: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0.0)]
    pub q: f64,
}

impl FnArgs {
    fn nonlinearity(&self) -> Result<Nonlinearity> {
        let family: Family = serde_json::from_value(serde_json::Value::String(self.family.clone()))
            .map_err(|e| Error::config("family", e.to_string()))?;
        Nonlinearity::from_parts(family, self.p, self.q)
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default: output_dir from the config, else runs/<run_id>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub phi_stop: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Config override `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tabulate F, F⁻¹, f'F and run the function property suite.
    VerifyFn {
        #[command(flatten)]
        f: FnArgs,
        /// Write the table as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        u_min: f64,
        #[arg(long, default_value_t = 50.0)]
        u_max: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Integrate y' = f(y) and compare with F⁻¹(T − t).
    Ode {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long, default_value_t = 1.0)]
        y0: f64,
        #[arg(long, default_value_t = 10.0)]
        stop: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the PDE solver to near blow-up and write snapshots.
    Simulate(RunArgs),
    /// Build self-similar frames and ledgers from a simulated run.
    Analyze {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate every diagnostic and write report.json / report.md.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// simulate + analyze + report.
    All(RunArgs),
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(phi) = args.phi_stop {
        cfg = cfg.with_override(&format!("solver.phi_stop={phi:?}"))?;
    }
    if let Some(a) = args.alpha {
        cfg = cfg.with_override(&format!("analysis.alpha={a:?}"))?;
    }
    for s in &args.set {
        cfg = cfg.with_override(s)?;
    }
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &RunConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("runs").join(cfg.run_id()))
}

fn print_report(out: &Path, report: &DiagnosticsReport) -> i32 {
    if let Some(b) = &report.scope_banner {
        println!("{b}");
    }
    for c in &report.checks {
        let v = match c.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Info => "info",
        };
        let bound = if c.threshold.is_nan() { String::new() } else { format!("  ({} {:.3e})", c.comparison, c.threshold) };
        println!("{v:>4}  {:<28} {:>12.4e}{bound}", c.name, c.statistic);
    }
    println!(
        "{} pass, {} fail, {} info",
        report.summary.pass, report.summary.fail, report.summary.info
    );
    println!("wrote {}", out.join(REPORT_JSON).display());
    println!("wrote {}", out.join(REPORT_MD).display());
    if report.passed() {
        0
    } else {
        1
    }
}

fn simulate(args: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let cfg = load_config(args)?;
    let out = out_dir(args, &cfg);
    if let Some(b) = cfg.out_of_scope_banner() {
        println!("{b}");
    }
    let s = pipeline::simulate(&cfg, &out, args.force)?;
    println!(
        "{}: {} steps, {} snapshots, T ≈ {:.15e}, log(T - t_last) = {:.4}",
        cfg.run_id(),
        s.steps,
        s.snapshots,
        s.t_est,
        s.log_gap_last
    );
    println!("wrote {}", s.manifest.display());
    flush_stdout();
    Ok((cfg, out))
}

fn analyze(out: &Path, overrides: &[String]) -> Result<()> {
    let s = pipeline::analyze(out, overrides)?;
    println!("{} frames", s.frames);
    for l in &s.ledgers {
        println!("wrote {}", l.display());
    }
    flush_stdout();
    Ok(())
}

pub fn run(cli: Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("threads", e.to_string()))?;
    }
    match cli.command {
        Command::VerifyFn { f, out, u_min, u_max, points } => {
            let nl = f.nonlinearity()?;
            if !(u_min >= 0.0 && u_max > u_min && points >= 2) {
                return Err(Error::config("u_min/u_max/points", "need 0 <= u_min < u_max and points >= 2"));
            }
            let mut table = Table::new(&["u", "log_F", "F_inv_F", "fprime_F", "scaled_remainder"]);
            for i in 0..points {
                let u = u_min + (u_max - u_min) * i as f64 / (points - 1) as f64;
                let r = nl.table_row(u)?;
                table.push(vec![cell(r.u), cell(r.log_big_f), cell(r.round_trip), cell(r.fprime_f), cell(r.scaled_remainder)]);
            }
            match out {
                Some(path) => {
                    table.write(&path)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{}", String::from_utf8_lossy(&table.to_bytes()?)),
            }
            let mut ok = true;
            for row in function_suite(&nl)? {
                println!(
                    "{}  {:<18} {:.4e} (<= {:.1e}) at u = {}",
                    if row.pass { "pass" } else { "FAIL" },
                    row.name,
                    row.statistic,
                    row.threshold,
                    row.at
                );
                ok &= row.pass;
            }
            Ok(if ok { 0 } else { 1 })
        }
        Command::Ode { f, y0, stop, tol, out } => {
            let nl = f.nonlinearity()?;
            let run = ode_integrate(&nl, y0, stop, tol)?;
            let mut table = Table::new(&["t", "y", "log_gap", "y_exact"]);
            let mut worst = 0.0f64;
            for s in &run.samples {
                let exact = nl.f_inv_log(s.log_gap)?;
                worst = worst.max((s.y - exact).abs() / s.y);
                table.push(vec![cell(s.t), cell(s.y), cell(s.log_gap), cell(exact)]);
            }
            if let Some(path) = &out {
                write_bytes(path, &table.to_bytes()?)?;
                println!("wrote {}", path.display());
            }
            println!(
                "T = F(y0) = {:.15e}; {} samples; max |y - F^-1(T - t)|/y = {:.3e}",
                run.blowup_time.exp(),
                run.samples.len(),
                worst
            );
            Ok(0)
        }
        Command::Simulate(args) => simulate(&args).map(|_| 0),
        Command::Analyze { out, alpha, set } => {
            let mut overrides = set;
            if let Some(a) = alpha {
                overrides.insert(0, format!("analysis.alpha={a:?}"));
            }
            analyze(&out, &overrides)?;
            Ok(0)
        }
        Command::Report { out } => {
            let report = pipeline::report(&out)?;
            Ok(print_report(&out, &report))
        }
        Command::All(args) => {
            let (_, out) = simulate(&args)?;
            analyze(&out, &[])?;
            let report = pipeline::report(&out)?;
            Ok(print_report(&out, &report))
        }
    }
}
