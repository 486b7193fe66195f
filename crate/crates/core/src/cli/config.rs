//! Scenario configuration: a versioned JSON document, validated on load.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ManifoldSpec, Topology};
use crate::harmonic::Closure;
use crate::spectral::spectral_gap;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {column}, at `{field}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("`{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Spectrum,
    Indicial,
    Phi,
    Harmonic,
    Weitzenbock,
    Bochner,
    Split,
    Refinement,
    Dichotomy,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 9] = [
        Stage::Spectrum,
        Stage::Indicial,
        Stage::Phi,
        Stage::Harmonic,
        Stage::Weitzenbock,
        Stage::Bochner,
        Stage::Split,
        Stage::Refinement,
        Stage::Dichotomy,
    ];

    /// The stages a plain `run` executes when none are listed.
    pub const PIPELINE: [Stage; 7] = [
        Stage::Spectrum,
        Stage::Indicial,
        Stage::Phi,
        Stage::Harmonic,
        Stage::Weitzenbock,
        Stage::Bochner,
        Stage::Split,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Spectrum => "spectrum",
            Stage::Indicial => "indicial",
            Stage::Phi => "phi",
            Stage::Harmonic => "harmonic",
            Stage::Weitzenbock => "weitzenbock",
            Stage::Bochner => "bochner",
            Stage::Split => "split",
            Stage::Refinement => "refinement",
            Stage::Dichotomy => "dichotomy",
        }
    }
}

/// Requested slopes `C_i` and offsets `D_i`. Missing offsets on a two-end
/// model are completed from `Ker Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsConfig {
    pub slopes: Vec<f64>,
    #[serde(default)]
    pub offsets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweeps {
    /// Radii for the Bochner identity and boundary-decay scan.
    #[serde(rename = "R_list", default)]
    pub r_list: Option<Vec<f64>>,
    /// Warp amplitudes for the dichotomy sweep.
    #[serde(default)]
    pub s_list: Option<Vec<f64>>,
    /// Grid spacings for the refinement study.
    #[serde(default)]
    pub h_list: Option<Vec<f64>>,
}

/// Check tolerances. Factors named `*_factor` multiply `h²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub indicial_roots: f64,
    /// Multiplies the leading `λ² r² h_θ² / 12` error of the discrete circle spectrum.
    pub spectrum_band_factor: f64,
    pub phi_gap: f64,
    pub flux_relative: f64,
    pub harmonic_residual: f64,
    pub flat_error_factor: f64,
    pub convergence_order: f64,
    /// Errors below this are treated as exact reproduction.
    pub rounding_floor: f64,
    pub ode_relative: f64,
    pub grad_gamma_relative: f64,
    pub bochner_factor: f64,
    pub flat_energy: f64,
    pub weitzenbock_factor: f64,
    pub split_factor: f64,
    pub level_residual: f64,
    /// Minimum `∂_t g_θθ` defect that certifies a warped model is not a product.
    pub warping_defect: f64,
    pub slope_spread: f64,
    pub obstruction_relative: f64,
    pub constant_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            indicial_roots: 1e-9,
            spectrum_band_factor: 2.0,
            phi_gap: 1e4,
            flux_relative: 1e-6,
            harmonic_residual: 1e-6,
            flat_error_factor: 5.0,
            convergence_order: 1.8,
            rounding_floor: 1e-10,
            ode_relative: 1e-4,
            grad_gamma_relative: 0.05,
            bochner_factor: 50.0,
            flat_energy: 1e-10,
            weitzenbock_factor: 100.0,
            split_factor: 50.0,
            level_residual: 1e-8,
            warping_defect: 0.1,
            slope_spread: 0.2,
            obstruction_relative: 1e-4,
            constant_spread: 1e-6,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 19] {
        [
            ("indicial_roots", self.indicial_roots),
            ("spectrum_band_factor", self.spectrum_band_factor),
            ("phi_gap", self.phi_gap),
            ("flux_relative", self.flux_relative),
            ("harmonic_residual", self.harmonic_residual),
            ("flat_error_factor", self.flat_error_factor),
            ("convergence_order", self.convergence_order),
            ("rounding_floor", self.rounding_floor),
            ("ode_relative", self.ode_relative),
            ("grad_gamma_relative", self.grad_gamma_relative),
            ("bochner_factor", self.bochner_factor),
            ("flat_energy", self.flat_energy),
            ("weitzenbock_factor", self.weitzenbock_factor),
            ("split_factor", self.split_factor),
            ("level_residual", self.level_residual),
            ("warping_defect", self.warping_defect),
            ("slope_spread", self.slope_spread),
            ("obstruction_relative", self.obstruction_relative),
            ("constant_spread", self.constant_spread),
        ]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in self.entries() {
            if !v.is_finite() || v < 0.0 {
                return Err(ConfigError::invalid(
                    &format!("tolerances.{name}"),
                    format!("must be finite and nonnegative, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

fn default_stages() -> Vec<Stage> {
    Stage::PIPELINE.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub manifold: ManifoldSpec,
    /// Weight `α`; defaults to the midpoint of the negative spectral gap.
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub asymptotics: Option<AsymptoticsConfig>,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub sweeps: Sweeps,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub closure: Closure,
    #[serde(default)]
    pub auto_project: bool,
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Parse {
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })
}

pub fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_list(field: &str, list: &Option<Vec<f64>>) -> Result<(), ConfigError> {
    if let Some(v) = list {
        if v.is_empty() {
            return Err(ConfigError::invalid(field, "list is empty"));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite() || **x <= 0.0) {
            return Err(ConfigError::invalid(field, format!("entries must be positive, got {x}")));
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&read_file(path)?)
    }

    pub fn new(name: &str, manifold: ManifoldSpec) -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            manifold,
            weight: None,
            asymptotics: None,
            stages: default_stages(),
            sweeps: Sweeps::default(),
            tolerances: Tolerances::default(),
            seed: 0,
            closure: Closure::default(),
            auto_project: false,
        }
    }

    pub fn with_stages(mut self, stages: &[Stage]) -> Self {
        self.stages = stages.to_vec();
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(ConfigError::invalid("name", "must not be empty"));
        }
        self.manifold
            .validate()
            .map_err(|e| ConfigError::invalid("manifold", e.to_string()))?;
        if let Some(a) = self.weight {
            let gap = spectral_gap(&self.manifold).map_err(|e| ConfigError::invalid("weight", e.to_string()))?;
            if !(a < 0.0 && a > -gap) {
                return Err(ConfigError::invalid(
                    "weight",
                    format!("{a} is outside the negative spectral gap (-{gap}, 0)"),
                ));
            }
        }
        if let Some(a) = &self.asymptotics {
            let ends = self.manifold.end_count();
            if a.slopes.len() != ends {
                return Err(ConfigError::invalid(
                    "asymptotics.slopes",
                    format!("{} entries for a model with {ends} ends", a.slopes.len()),
                ));
            }
            if let Some(d) = &a.offsets {
                if d.len() != ends {
                    return Err(ConfigError::invalid(
                        "asymptotics.offsets",
                        format!("{} entries for a model with {ends} ends", d.len()),
                    ));
                }
            }
            if a.slopes.iter().chain(a.offsets.iter().flatten()).any(|x| !x.is_finite()) {
                return Err(ConfigError::invalid("asymptotics", "entries must be finite"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.stages {
            if !seen.insert(*s) {
                return Err(ConfigError::invalid("stages", format!("`{}` listed twice", s.name())));
            }
        }
        check_list("sweeps.R_list", &self.sweeps.r_list)?;
        check_list("sweeps.s_list", &self.sweeps.s_list)?;
        check_list("sweeps.h_list", &self.sweeps.h_list)?;
        if self.stages.contains(&Stage::Dichotomy) {
            if self.manifold.topology != Topology::TwoEndCylinder {
                return Err(ConfigError::invalid("stages", "the dichotomy sweep needs a two-end model"));
            }
            if self.sweeps.s_list.as_ref().is_none_or(|s| s.len() < 2) {
                return Err(ConfigError::invalid("sweeps.s_list", "the dichotomy sweep needs at least two amplitudes"));
            }
        }
        if self.stages.contains(&Stage::Refinement) && self.sweeps.h_list.as_ref().is_none_or(|h| h.len() < 2) {
            return Err(ConfigError::invalid("sweeps.h_list", "the refinement study needs at least two spacings"));
        }
        self.tolerances.validate()
    }

    /// Stages in execution order.
    pub fn ordered_stages(&self) -> Vec<Stage> {
        Stage::ALL.iter().copied().filter(|s| self.stages.contains(s)).collect()
    }

    pub fn wants(&self, s: Stage) -> bool {
        self.stages.contains(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = r#"{
        "schema_version": 1,
        "name": "flat",
        "manifold": {
            "topology": "two_end_cylinder",
            "cross_section": {"kind": "circle", "radius": 1.0, "mesh_points": 16},
            "warp": {"kind": "constant", "c": 1.0},
            "truncation_r": 8.0,
            "grid_h": 0.1
        }
    }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::from_json(FLAT).unwrap();
        assert_eq!(cfg.stages, Stage::PIPELINE.to_vec());
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.manifold.core_radius, 2.0);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_key_is_located() {
        let text = FLAT.replace("\"grid_h\": 0.1", "\"grid_h\": 0.1, \"gridh\": 2");
        match ScenarioConfig::from_json(&text) {
            Err(ConfigError::Parse { line, field, message, .. }) => {
                assert!((8..=9).contains(&line), "{line}");
                assert_eq!(field, "manifold.gridh");
                assert!(message.contains("gridh"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let text = FLAT.replace("\"name\": \"flat\"", "\"name\": \"flat\", \"weight\": -1.5");
        let err = ScenarioConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().starts_with("`weight`"), "{err}");

        let text = FLAT.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(ScenarioConfig::from_json(&text).unwrap_err().to_string().contains("schema_version"));

        let text = FLAT.replace("\"name\": \"flat\"", "\"name\": \"flat\", \"asymptotics\": {\"slopes\": [1]}");
        assert!(ScenarioConfig::from_json(&text).unwrap_err().to_string().contains("asymptotics.slopes"));

        let text = FLAT.replace("\"name\": \"flat\"", "\"name\": \"flat\", \"tolerances\": {\"ode_relative\": -1}");
        assert!(ScenarioConfig::from_json(&text).unwrap_err().to_string().contains("tolerances.ode_relative"));

        let text = FLAT.replace("\"name\": \"flat\"", "\"name\": \"flat\", \"stages\": [\"dichotomy\"]");
        assert!(ScenarioConfig::from_json(&text).unwrap_err().to_string().contains("s_list"));
    }

    #[test]
    fn round_trip() {
        let cfg = ScenarioConfig::from_json(FLAT).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
    }
}
