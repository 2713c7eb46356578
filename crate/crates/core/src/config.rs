//! Run configuration: one TOML file per run, validated up front.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::init::Profile;
use crate::nonlinearity::{Family, Nonlinearity};
use crate::selfsimilar::FrameSpec;
use crate::solver::{Controller, RunLimits};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub family: Family,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub q: f64,
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: u32,
    #[serde(rename = "R", default = "one")]
    pub radius: f64,
    #[serde(rename = "J")]
    pub cells: usize,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileId {
    Parabolic,
    ScaledSteady,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub profile: ProfileId,
    pub amplitude: f64,
    #[serde(default = "yes")]
    pub supersolution_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub phi_stop: f64,
    #[serde(default = "SolverConfig::default_safety")]
    pub safety: f64,
    /// Step fraction of the reaction time scale e^{-Φmax}.
    #[serde(default = "SolverConfig::default_reaction_safety")]
    pub reaction_safety: f64,
    /// Monotonicity tolerance (relative to |Φ(0)|).
    #[serde(default = "SolverConfig::default_tol")]
    pub tol: f64,
    #[serde(default = "SolverConfig::default_t_max")]
    pub t_max: f64,
    #[serde(default = "SolverConfig::default_max_steps")]
    pub max_steps: u64,
}

impl SolverConfig {
    fn default_safety() -> f64 {
        0.4
    }
    fn default_reaction_safety() -> f64 {
        0.02
    }
    fn default_tol() -> f64 {
        1e-9
    }
    fn default_t_max() -> f64 {
        1e3
    }
    fn default_max_steps() -> u64 {
        5_000_000
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Defaults to 1/(2p).
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(rename = "C_compact", default = "one")]
    pub c_compact: f64,
    #[serde(default = "AnalysisConfig::default_y_resolution")]
    pub y_resolution: usize,
    #[serde(default = "AnalysisConfig::default_y_max")]
    pub y_max: f64,
    #[serde(default = "one")]
    pub snapshot_delta_phi: f64,
    /// Grids of the quasi-scaling refinement study.
    #[serde(default = "AnalysisConfig::default_qs_grids")]
    pub quasiscaling_grids: Vec<usize>,
}

impl AnalysisConfig {
    fn default_y_resolution() -> usize {
        256
    }
    fn default_y_max() -> f64 {
        8.0
    }
    fn default_qs_grids() -> Vec<usize> {
        vec![64, 128, 256]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub nonlinearity: NonlinearityConfig,
    pub grid: GridConfig,
    pub init: InitConfig,
    pub solver: SolverConfig,
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .and_then(|sp| text.get(sp))
                .map(|s| s.trim().to_string())
                .unwrap_or_default();
            Error::config(if field.is_empty() { "<document>".into() } else { field }, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Applies `section.key=value` (value in TOML syntax) and re-validates.
    pub fn with_override(&self, assignment: &str) -> Result<Self> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must look like section.key=value"))?;
        let mut doc = toml::Value::try_from(self).map_err(|e| Error::config(key, e.to_string()))?;
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {}", value.trim()))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.trim().to_string()));
        let mut node = &mut doc;
        let parts: Vec<&str> = key.trim().split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::config(key, "path does not name a table"))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), parsed.clone());
                break;
            }
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        let text = toml::to_string(&doc).map_err(|e| Error::config(key, e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let nl = self.nonlinearity()?;
        let _ = self.grid()?;
        if !(self.init.amplitude > 0.0 && self.init.amplitude.is_finite()) {
            return Err(Error::config("init.amplitude", "must be positive and finite"));
        }
        let s = &self.solver;
        if !(s.phi_stop > 0.0 && s.phi_stop < 700.0) {
            return Err(Error::config(
                "solver.phi_stop",
                "must lie in (0, 700): e^Φ has to stay representable",
            ));
        }
        if !(s.safety > 0.0 && s.safety <= 1.0) {
            return Err(Error::config("solver.safety", "must lie in (0, 1]"));
        }
        if !(s.reaction_safety > 0.0 && s.reaction_safety <= 0.5) {
            return Err(Error::config("solver.reaction_safety", "must lie in (0, 0.5]"));
        }
        if !(s.tol >= 0.0) {
            return Err(Error::config("solver.tol", "must be nonnegative"));
        }
        let alpha = self.alpha();
        let upper = 1.0 / nl.p();
        if !(alpha > 0.0 && alpha < upper) {
            return Err(Error::config(
                "analysis.alpha",
                format!(
                    "alpha = {alpha} is outside (0, 1/p) = (0, {upper}); the h_alpha lower bound \
                     and the energy inequality on B_(s^alpha) are only established for alpha < 1/p"
                ),
            ));
        }
        let a = &self.analysis;
        if !(a.c_compact > 0.0) {
            return Err(Error::config("analysis.C_compact", "must be positive"));
        }
        if a.y_resolution < crate::grid::MIN_CELLS {
            return Err(Error::config("analysis.y_resolution", "need at least 64 intervals"));
        }
        if !(a.snapshot_delta_phi > 0.0) {
            return Err(Error::config("analysis.snapshot_delta_phi", "must be positive"));
        }
        if a.quasiscaling_grids.len() < 3 || a.quasiscaling_grids.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(Error::config(
                "analysis.quasiscaling_grids",
                "need >= 3 successively doubled cell counts",
            ));
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        let c = &self.nonlinearity;
        Nonlinearity::from_parts(c.family, c.p, c.q).map_err(|e| Error::config("nonlinearity", e.to_string()))
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid.n, self.grid.radius, self.grid.cells)
    }

    pub fn profile(&self) -> Profile {
        let a = self.init.amplitude;
        match self.init.profile {
            ProfileId::Parabolic => Profile::Parabolic { amplitude: a },
            ProfileId::ScaledSteady => Profile::ScaledSteady { amplitude: a },
        }
    }

    pub fn p_effective(&self) -> f64 {
        match self.nonlinearity.family {
            Family::PureExponentialReference => 1.0,
            _ => self.nonlinearity.p,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.analysis.alpha.unwrap_or(0.5 / self.p_effective())
    }

    /// n ≥ 3 runs are accepted but lie outside the theorem's dimension range.
    pub fn out_of_scope_banner(&self) -> Option<String> {
        (self.grid.n >= 3).then(|| {
            format!(
                "OUT OF THEOREM SCOPE: n = {} (the convergence result covers n <= 2 only)",
                self.grid.n
            )
        })
    }

    pub fn controller(&self) -> Controller {
        Controller {
            safety: self.solver.safety,
            reaction_safety: self.solver.reaction_safety,
            monotone_tol: self.solver.tol,
            ..Controller::default()
        }
    }

    pub fn limits(&self) -> RunLimits {
        RunLimits {
            phi_stop: self.solver.phi_stop,
            snapshot_spacing: self.analysis.snapshot_delta_phi,
            // Φmax ≈ s, and e^{-s/2} drops below one cell at s = 2 log(R/h)
            dense_until: 2.0 * (self.grid.cells as f64).ln(),
            dense_spacing: 0.1 * self.analysis.snapshot_delta_phi,
            t_max: self.solver.t_max,
            max_steps: self.solver.max_steps,
            ..RunLimits::default()
        }
    }

    pub fn frame_spec(&self) -> FrameSpec {
        FrameSpec {
            alpha: self.alpha(),
            resolution: self.analysis.y_resolution,
            y_max: self.analysis.y_max,
        }
    }

    /// SHA-256 of the canonical JSON form (output location excluded).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config is serializable");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| {
            let c = &self.nonlinearity;
            match c.family {
                Family::PureExponentialReference => format!("exp_n{}", self.grid.n),
                Family::PowerReference => format!("pow{}_n{}", c.p, self.grid.n),
                Family::SuperExponential => format!("p{}q{}_n{}", c.p, c.q, self.grid.n),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[nonlinearity]
family = "super_exponential"
p = 2.0
q = 0.0

[grid]
n = 1
R = 1.0
J = 128

[init]
profile = "scaled_steady"
amplitude = 1.5

[solver]
phi_stop = 40.0

[analysis]
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.alpha(), 0.25);
        assert_eq!(c.solver.safety, 0.4);
        assert!(c.init.supersolution_check);
        assert_eq!(c.run_id(), "p2q0_n1");
        assert!(c.out_of_scope_banner().is_none());
    }

    #[test]
    fn alpha_beyond_one_over_p_is_rejected() {
        let c = RunConfig::from_toml_str(BASE).unwrap();
        match c.with_override("analysis.alpha=0.6") {
            Err(Error::Config { field, message }) => {
                assert!(field.contains("alpha"), "{field}");
                assert!(message.contains("1/p"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(c.with_override("analysis.alpha=0.3").unwrap().alpha(), 0.3);
    }

    #[test]
    fn unknown_field_names_its_location() {
        let text = BASE.replace("J = 128", "J = 128\nK = 3");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { message, .. }) => assert!(message.contains("K"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let c = RunConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.hash(), RunConfig::from_toml_str(BASE).unwrap().hash());
        let d = c.with_override("grid.J=256").unwrap();
        assert_ne!(c.hash(), d.hash());
        let mut e = c.clone();
        e.output_dir = Some("elsewhere".into());
        assert_eq!(c.hash(), e.hash());
    }

    #[test]
    fn three_dimensions_get_a_banner() {
        let c = RunConfig::from_toml_str(&BASE.replace("n = 1", "n = 3")).unwrap();
        assert!(c.out_of_scope_banner().unwrap().contains("OUT OF THEOREM SCOPE"));
    }
}
