//! Experiment config files (TOML).
//!
//! Angles are given in degrees and converted to radians here. Schema:
//!
//! ```toml
//! schema_version = 1
//! scenario = "II"                  # "I" (small angle) or "II" (large angle)
//! bell_kind = 1                    # 1 = ψ1, 2 = ψ2
//! entangled_fraction = 0.8
//! propagator_normalization = "phase-only"   # or "spherical"
//!
//! [geometry]
//! source1 = [-400.0, 1000.0, 0.0]
//! source2 = [400.0, 1000.0, 0.0]
//! detector_a = [-0.5, 0.0, 0.0]
//! detector_b = [0.5, 0.0, 0.0]
//! wavenumber = 1.0
//!
//! [background]                     # optional; unpolarized by default
//! axis1_deg = 0.0
//! alpha1 = 1.0
//! axis2_deg = 45.0
//! alpha2 = 1.0
//! weights = { w12 = 0.5, w21 = 0.5, w11 = 0.0, w22 = 0.0 }
//!
//! [phases]                         # optional; omit for fresh phases per pair
//! phi1_deg = 0.0
//! phi2_deg = 0.0
//!
//! [chsh]                           # optional; Bell-optimal by default
//! a_deg = 0.0
//! a_prime_deg = 45.0
//! b_deg = 22.5
//! b_prime_deg = -22.5
//!
//! [rng]                            # optional; --seed overrides
//! seed = 42
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use skybell_core::background::{BackgroundSpec, PairingWeights};
use skybell_core::polarization::{BellKind, ChshConfiguration, PolarizerAxis};
use skybell_core::propagation::{Geometry, Normalization};
use skybell_core::scenarios::{ExperimentConfig, PhaseMode, Scenario};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub scenario: Scenario,
    #[serde(default = "default_bell_kind")]
    pub bell_kind: u8,
    pub entangled_fraction: f64,
    #[serde(default)]
    pub propagator_normalization: Normalization,
    pub geometry: GeometrySection,
    #[serde(default)]
    pub background: BackgroundSection,
    #[serde(default)]
    pub phases: Option<PhasesSection>,
    #[serde(default)]
    pub chsh: ChshSection,
    #[serde(default)]
    pub rng: RngSection,
}

fn default_bell_kind() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub source1: [f64; 3],
    pub source2: [f64; 3],
    pub detector_a: [f64; 3],
    pub detector_b: [f64; 3],
    pub wavenumber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSection {
    #[serde(default)]
    pub axis1_deg: f64,
    #[serde(default)]
    pub alpha1: f64,
    #[serde(default)]
    pub axis2_deg: f64,
    #[serde(default)]
    pub alpha2: f64,
    #[serde(default)]
    pub weights: WeightsSection,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        BackgroundSection {
            axis1_deg: 0.0,
            alpha1: 0.0,
            axis2_deg: 0.0,
            alpha2: 0.0,
            weights: WeightsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub w12: f64,
    pub w21: f64,
    #[serde(default)]
    pub w11: f64,
    #[serde(default)]
    pub w22: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        WeightsSection { w12: 0.5, w21: 0.5, w11: 0.0, w22: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasesSection {
    pub phi1_deg: f64,
    pub phi2_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshSection {
    pub a_deg: f64,
    pub a_prime_deg: f64,
    pub b_deg: f64,
    pub b_prime_deg: f64,
}

impl Default for ChshSection {
    fn default() -> Self {
        ChshSection { a_deg: 0.0, a_prime_deg: 45.0, b_deg: 22.5, b_prime_deg: -22.5 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngSection {
    pub seed: Option<u64>,
}

/// A parsed and validated config.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub experiment: ExperimentConfig,
    pub chsh: ChshConfiguration,
}

pub fn load(path: &Path) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> CliResult<LoadedConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_owned()))?;
    let experiment = file.to_experiment()?;
    let c = file.chsh;
    let chsh = ChshConfiguration::new(
        PolarizerAxis::from_degrees(c.a_deg),
        PolarizerAxis::from_degrees(c.a_prime_deg),
        PolarizerAxis::from_degrees(c.b_deg),
        PolarizerAxis::from_degrees(c.b_prime_deg),
    );
    Ok(LoadedConfig { file, experiment, chsh })
}

fn field(name: &str, err: impl std::fmt::Display) -> CliError {
    CliError::config(format!("field `{name}`: {err}"))
}

fn finite(name: &str, x: f64) -> CliResult<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(field(name, format!("must be finite, got {x}")))
    }
}

impl ConfigFile {
    pub fn to_experiment(&self) -> CliResult<ExperimentConfig> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let bell_kind = BellKind::try_from(self.bell_kind).map_err(|e| field("bell_kind", e))?;
        let f = self.entangled_fraction;
        if !(0.0..=1.0).contains(&f) {
            return Err(field("entangled_fraction", format!("must lie in [0, 1], got {f}")));
        }

        let g = &self.geometry;
        let geometry = Geometry {
            source1: g.source1,
            source2: g.source2,
            detector_a: g.detector_a,
            detector_b: g.detector_b,
            wavenumber: g.wavenumber,
        };
        geometry.validate().map_err(|e| field("geometry", e))?;

        let b = &self.background;
        for (name, alpha) in [("background.alpha1", b.alpha1), ("background.alpha2", b.alpha2)] {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(field(name, format!("net polarization must be finite and ≥ 0, got {alpha}")));
            }
        }
        let w = b.weights;
        let weights = PairingWeights::new(w.w12, w.w21, w.w11, w.w22).map_err(|e| field("background.weights", e))?;
        let background = BackgroundSpec::new(
            PolarizerAxis::from_degrees(finite("background.axis1_deg", b.axis1_deg)?),
            b.alpha1,
            PolarizerAxis::from_degrees(finite("background.axis2_deg", b.axis2_deg)?),
            b.alpha2,
            weights,
        )
        .map_err(|e| field("background", e))?;

        let phase_mode = match self.phases {
            None => PhaseMode::PerPair,
            Some(p) => PhaseMode::Fixed {
                phi1: finite("phases.phi1_deg", p.phi1_deg)?.to_radians(),
                phi2: finite("phases.phi2_deg", p.phi2_deg)?.to_radians(),
            },
        };
        let c = self.chsh;
        for (name, x) in [
            ("chsh.a_deg", c.a_deg),
            ("chsh.a_prime_deg", c.a_prime_deg),
            ("chsh.b_deg", c.b_deg),
            ("chsh.b_prime_deg", c.b_prime_deg),
        ] {
            finite(name, x)?;
        }

        let experiment = ExperimentConfig {
            scenario: self.scenario,
            bell_kind,
            entangled_fraction: f,
            background,
            geometry,
            normalization: self.propagator_normalization,
            phase_mode,
        };
        experiment.validate().map_err(|e| field("config", e))?;
        Ok(experiment)
    }
}
