//! On-disk layout of a run and its (deterministic) serialization.
//!
//! ```text
//! out/manifest.json
//! out/snapshots/snap_NNNN.json
//! out/frames/frame_NNNN.json
//! out/ledgers/*.csv
//! out/report.{json,md}
//! ```
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which round-trips
//! every f64; non-finite values become `null`. No timestamps are written
//! anywhere, so repeated runs produce byte-identical files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::init::Profile;
use crate::selfsimilar::SelfSimilarFrame;
use crate::solver::{BlowupEstimate, Repr, Snapshot};

pub const MANIFEST: &str = "manifest.json";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const FRAME_DIR: &str = "frames";
pub const LEDGER_DIR: &str = "ledgers";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

/// Wraps a serde_json formatter so every f64 is printed with 17 digits.
struct Digits17<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", fmt17(value))
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

/// 17 significant digits in scientific notation; `null` for non-finite.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// Exponent-free decimal with 17 significant digits (used for times).
pub fn decimal17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { "nan".into() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (16 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn to_json(value: &impl Serialize, pretty: bool) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let res = if pretty {
        let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17(PrettyFormatter::with_indent(b"  ")));
        value.serialize(&mut ser)
    } else {
        let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17(CompactFormatter));
        value.serialize(&mut ser)
    };
    res.map_err(|source| Error::Json {
        path: PathBuf::from("<memory>"),
        source,
    })?;
    out.push(b'\n');
    Ok(out)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_json(path: &Path, value: &impl Serialize, pretty: bool) -> Result<()> {
    write_bytes(path, &to_json(value, pretty)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn opt(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub index: usize,
    pub t: String,
    pub grid: RadialGrid,
    pub repr: Repr,
    /// `null` marks Φ = −∞ (u = 0 where F(0) = ∞).
    pub phi: Vec<Option<f64>>,
    pub umax: f64,
    pub step_index: u64,
    pub log_window: Option<f64>,
}

impl SnapshotFile {
    pub fn from_snapshot(index: usize, grid: &RadialGrid, s: &Snapshot) -> Self {
        SnapshotFile {
            index,
            t: decimal17(s.t),
            grid: *grid,
            repr: s.repr,
            phi: s.phi.iter().map(|p| opt(*p)).collect(),
            umax: s.umax,
            step_index: s.step_index,
            log_window: opt(s.log_window),
        }
    }

    pub fn to_snapshot(&self) -> Result<Snapshot> {
        let t = self
            .t
            .parse::<f64>()
            .map_err(|e| Error::domain(format!("snapshot {}: bad time {:?}: {e}", self.index, self.t)))?;
        Ok(Snapshot {
            t,
            phi: self.phi.iter().map(|p| p.unwrap_or(f64::NEG_INFINITY)).collect(),
            repr: self.repr,
            umax: self.umax,
            step_index: self.step_index,
            log_window: self.log_window.unwrap_or(f64::NEG_INFINITY),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFile {
    pub snapshot: usize,
    pub s: f64,
    pub log_gap: f64,
    pub alpha: f64,
    pub n: u32,
    pub source_t: String,
    pub source_step: u64,
    pub truncated: bool,
    pub y_nodes: Vec<f64>,
    pub v: Vec<f64>,
}

impl FrameFile {
    pub fn from_frame(snapshot: usize, log_gap: f64, f: &SelfSimilarFrame) -> Self {
        FrameFile {
            snapshot,
            s: f.s,
            log_gap,
            alpha: f.alpha,
            n: f.n,
            source_t: decimal17(f.source_t),
            source_step: f.source_step,
            truncated: f.truncated,
            y_nodes: f.y_nodes.clone(),
            v: f.v.clone(),
        }
    }

    pub fn to_frame(&self) -> Result<SelfSimilarFrame> {
        Ok(SelfSimilarFrame {
            s: self.s,
            alpha: self.alpha,
            y_nodes: self.y_nodes.clone(),
            v: self.v.clone(),
            source_t: self.source_t.parse().map_err(|_| Error::domain("bad frame time"))?,
            n: self.n,
            source_step: self.source_step,
            truncated: self.truncated,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDataRecord {
    pub profile: Profile,
    pub requested_amplitude: f64,
    pub adjustments: u32,
    /// `None` when the supersolution condition was not checked.
    pub supersolution: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub run_id: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub scope_banner: Option<String>,
    pub initial_data: InitialDataRecord,
    pub steps: u64,
    pub snapshots: Vec<String>,
    /// log(T − t_k) per snapshot.
    pub log_gaps: Vec<f64>,
    pub estimate: BlowupEstimate,
    /// Present once `analyze` has run.
    #[serde(default)]
    pub analysis: Option<AnalysisRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub alpha: f64,
    pub config_hash: String,
    pub frames: Vec<String>,
    pub ledgers: Vec<String>,
}

pub fn snapshot_name(k: usize) -> String {
    format!("{SNAPSHOT_DIR}/snap_{k:04}.json")
}

pub fn frame_name(k: usize) -> String {
    format!("{FRAME_DIR}/frame_{k:04}.json")
}

pub fn ledger_name(name: &str) -> String {
    format!("{LEDGER_DIR}/{name}.csv")
}

/// CSV with a header row and 17-digit floats.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ctx = |e: csv::Error| Error::domain(format!("csv: {e}"));
        w.write_record(&self.header).map_err(ctx)?;
        for r in &self.rows {
            w.write_record(r).map_err(ctx)?;
        }
        w.into_inner().map_err(|e| Error::domain(format!("csv: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Table> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::domain(format!("{}: {e}", path.display())))?;
        let header = r
            .headers()
            .map_err(|e| Error::domain(format!("{}: {e}", path.display())))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::domain(format!("{}: {e}", path.display())))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingArtifacts(vec![format!("ledger column `{name}`")]))?;
        Ok(self
            .rows
            .iter()
            .map(|r| match r[i].as_str() {
                "" | "null" => f64::NAN,
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                s => s.parse().unwrap_or(f64::NAN),
            })
            .collect())
    }
}

/// Number cell for a ledger (empty for NaN, explicit for infinities).
pub fn cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Checks that `names` (relative to `out`) exist; lists every absent one.
pub fn require(out: &Path, names: &[(&str, String)]) -> Result<()> {
    let missing: Vec<String> = names
        .iter()
        .filter(|(_, rel)| !out.join(rel).exists())
        .map(|(label, rel)| format!("{label} ({rel})"))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingArtifacts(missing))
    }
}

/// Removes generated subtrees of an output directory before a forced rerun.
pub fn clear_outputs(out: &Path, what: &[&str]) -> Result<()> {
    for w in what {
        let p = out.join(w);
        if p.is_dir() {
            fs::remove_dir_all(&p).map_err(io_err(&p))?;
        } else if p.is_file() {
            fs::remove_file(&p).map_err(io_err(&p))?;
        }
    }
    Ok(())
}

pub fn flush_stdout() {
    let _ = io::stdout().flush();
}
