//! JSON design configuration.
//!
//! One document holds the material, named film stacks, named resonators,
//! the ladder, the sweep, and settings for each analysis. Resonators refer to
//! stacks by name and ladder elements refer to resonators by name; every
//! reference is checked when the document is resolved.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::FitOptions;
use crate::ladder::{FilterDesign, LadderElement, Placement, SweepGrid};
use crate::mbvd::{synthesize_mbvd, ResonatorSpec, SpurSpec};
use crate::metrics::SpurWindows;
use crate::optimizer::{LadderTemplate, Objective, OptimizerSettings};
use crate::stack::{
    calibrate_velocity, AcousticConstants, Calibration, CalibrationPoint, LayerStack, ModeSpec, VelocityFit,
    DEFAULT_LATERAL_VELOCITY,
};
use crate::tolerance::{Correlation, Distribution, Propagation, ResonatorFilm, Thresholds, ToleranceDesign, ToleranceScenario};

pub const SCHEMA_VERSION: u32 = 1;

/// Reference configuration with the published resonator values.
pub const BUNDLED_CONFIG: &str = include_str!("../configs/p3f_50ghz.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default = "default_lateral")]
    pub v_lateral: f64,
    /// Thickness velocity; fitted from `calibration` when absent.
    #[serde(default)]
    pub v_thickness: Option<f64>,
    #[serde(default)]
    pub calibration: Vec<CalibrationPoint>,
}

fn default_lateral() -> f64 {
    DEFAULT_LATERAL_VELOCITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    /// Layer thicknesses bottom to top; orientations alternate.
    pub layers_nm: Vec<f64>,
    pub order: u32,
    pub lateral_wavelength_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorConfig {
    pub fs_ghz: f64,
    pub k2: f64,
    pub q: f64,
    pub c0_ff: f64,
    #[serde(default)]
    pub spurs: Vec<SpurSpec>,
    #[serde(default)]
    pub rs_ohm: f64,
    #[serde(default)]
    pub r0_ohm: f64,
    /// Stack whose thickness sets this resonator's frequency.
    #[serde(default)]
    pub stack: Option<String>,
}

impl ResonatorConfig {
    pub fn spec(&self) -> ResonatorSpec {
        ResonatorSpec {
            fs_ghz: self.fs_ghz,
            k2: self.k2,
            q: self.q,
            c0_ff: self.c0_ff,
            spurs: self.spurs.clone(),
            rs_ohm: self.rs_ohm,
            r0_ohm: self.r0_ohm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementConfig {
    pub placement: Placement,
    pub resonator: String,
    #[serde(default)]
    pub parasitic_nh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default = "default_z0")]
    pub z0_ohm: f64,
    pub elements: Vec<ElementConfig>,
}

fn default_z0() -> f64 {
    50.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpurWindowConfig {
    None,
    #[default]
    Auto,
    Declared(Vec<(f64, f64)>),
}

impl SpurWindowConfig {
    pub fn windows(&self) -> SpurWindows {
        match self {
            SpurWindowConfig::None => SpurWindows::None,
            SpurWindowConfig::Auto => SpurWindows::Auto,
            SpurWindowConfig::Declared(w) => SpurWindows::Declared(w.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    pub orders: Vec<u32>,
    pub thickness_range_nm: (f64, f64),
    pub n_points: usize,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self { orders: vec![3, 12], thickness_range_nm: (50.0, 600.0), n_points: 111 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimConfig {
    pub delta_f_ghz: f64,
    #[serde(default)]
    pub electrode_offset_nm: f64,
    /// Trim depth used in practice; the electrode offset that reproduces it
    /// is reported alongside the plan.
    #[serde(default)]
    pub target_trim_nm: Option<f64>,
}

impl Default for TrimConfig {
    fn default() -> Self {
        Self { delta_f_ghz: 1.9, electrode_offset_nm: 0.0, target_trim_nm: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    /// Relative half-width of the search box around the template.
    #[serde(default = "default_bounds_fraction")]
    pub bounds_fraction: f64,
    #[serde(default)]
    pub objective: Objective,
}

fn default_starts() -> usize {
    16
}
fn default_max_evals() -> usize {
    400
}
fn default_bounds_fraction() -> f64 {
    0.5
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: default_starts(),
            max_evals: default_max_evals(),
            bounds_fraction: default_bounds_fraction(),
            objective: Objective::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub name: String,
    pub stack: String,
    pub sigma_h_nm: f64,
    pub n_trials: usize,
    #[serde(default)]
    pub distribution: Distribution,
    #[serde(default)]
    pub correlation: Correlation,
    #[serde(default)]
    pub propagation: Propagation,
    /// Resimulate the ladder in every trial.
    #[serde(default)]
    pub with_filter: bool,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Resonator used to synthesize data when no measurement is given.
    pub resonator: String,
    #[serde(default)]
    pub n_spurs: usize,
    /// Noise added to synthesized data.
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "default_fit_points")]
    pub n_points: usize,
    /// Span of the synthesized data around fs, as fractions of fs.
    #[serde(default = "default_fit_span")]
    pub span: (f64, f64),
    #[serde(default)]
    pub options: Option<FitOptions>,
}

fn default_snr() -> f64 {
    40.0
}
fn default_fit_points() -> usize {
    1001
}
fn default_fit_span() -> (f64, f64) {
    (0.9, 1.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub material: MaterialConfig,
    #[serde(default)]
    pub stacks: BTreeMap<String, StackConfig>,
    pub resonators: BTreeMap<String, ResonatorConfig>,
    pub ladder: LadderConfig,
    pub sweep: SweepGrid,
    #[serde(default)]
    pub spur_windows: SpurWindowConfig,
    #[serde(default)]
    pub dispersion: DispersionConfig,
    #[serde(default)]
    pub trim: TrimConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub tolerance: Vec<ToleranceConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub seed: u64,
}

/// A configuration with every reference resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: DesignConfig,
    pub material: AcousticConstants,
    pub calibration: Option<Calibration>,
    pub stacks: BTreeMap<String, (LayerStack, ModeSpec)>,
    pub resonators: BTreeMap<String, ResonatorSpec>,
}

impl DesignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(Error::Config(format!("unsupported schema_version {v}; expected {SCHEMA_VERSION}"))),
            None => return Err(Error::Config("missing schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_CONFIG).expect("bundled configuration parses")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let (material, calibration) = match self.material.v_thickness {
            Some(v) => (AcousticConstants::new(v, self.material.v_lateral)?, None),
            None => {
                if self.material.calibration.is_empty() {
                    return Err(Error::Config("material needs v_thickness or calibration points".into()));
                }
                let cal = calibrate_velocity(
                    &self.material.calibration,
                    VelocityFit::ThicknessOnly { v_lateral: self.material.v_lateral },
                )?;
                (cal.constants, Some(cal))
            }
        };

        let mut stacks = BTreeMap::new();
        for (name, s) in &self.stacks {
            let stack = LayerStack::alternating(&s.layers_nm, material)
                .map_err(|e| Error::Config(format!("stack {name:?}: {e}")))?;
            let mode = ModeSpec::new(s.order, s.lateral_wavelength_um)
                .map_err(|e| Error::Config(format!("stack {name:?}: {e}")))?;
            stacks.insert(name.clone(), (stack, mode));
        }

        let mut resonators = BTreeMap::new();
        for (name, r) in &self.resonators {
            if let Some(stack) = &r.stack {
                if !stacks.contains_key(stack) {
                    return Err(Error::Config(format!("resonator {name:?} refers to unknown stack {stack:?}")));
                }
            }
            let spec = r.spec();
            spec.validate().map_err(|e| Error::Config(format!("resonator {name:?}: {e}")))?;
            resonators.insert(name.clone(), spec);
        }

        if self.ladder.elements.is_empty() {
            return Err(Error::Config("ladder has no elements".into()));
        }
        for (i, e) in self.ladder.elements.iter().enumerate() {
            if !resonators.contains_key(&e.resonator) {
                return Err(Error::Config(format!("ladder element {i} refers to unknown resonator {:?}", e.resonator)));
            }
        }
        self.sweep.validate().map_err(|e| Error::Config(format!("sweep: {e}")))?;

        for t in &self.tolerance {
            if !stacks.contains_key(&t.stack) {
                return Err(Error::Config(format!("tolerance scenario {:?} refers to unknown stack {:?}", t.name, t.stack)));
            }
        }
        if let Some(fit) = &self.fit {
            if !resonators.contains_key(&fit.resonator) {
                return Err(Error::Config(format!("fit refers to unknown resonator {:?}", fit.resonator)));
            }
        }
        let resolved = Resolved { config: self.clone(), material, calibration, stacks, resonators };
        resolved.filter()?;
        Ok(resolved)
    }
}

impl Resolved {
    pub fn filter(&self) -> Result<FilterDesign> {
        let elements = self
            .config
            .ladder
            .elements
            .iter()
            .map(|e| {
                Ok(LadderElement {
                    placement: e.placement,
                    resonator: synthesize_mbvd(&self.resonators[&e.resonator])?,
                    parasitic_nh: e.parasitic_nh,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FilterDesign::new(elements, self.config.ladder.z0_ohm)
    }

    fn role(&self, placement: Placement) -> Result<&str> {
        let mut names: Vec<&str> = self
            .config
            .ladder
            .elements
            .iter()
            .filter(|e| e.placement == placement)
            .map(|e| e.resonator.as_str())
            .collect();
        names.dedup();
        names.sort_unstable();
        names.dedup();
        match names.as_slice() {
            [one] => Ok(one),
            _ => Err(Error::Config(format!(
                "the optimizer needs exactly one {placement:?} resonator in the ladder, found {}",
                names.len()
            ))),
        }
    }

    /// The ladder as an optimizer template: one series and one shunt resonator.
    pub fn template(&self) -> Result<LadderTemplate> {
        let series = self.role(Placement::Series)?;
        let shunt = self.role(Placement::Shunt)?;
        let parasitics: Vec<f64> = self.config.ladder.elements.iter().map(|e| e.parasitic_nh).collect();
        if parasitics.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Config("the optimizer needs the same parasitic inductance on every element".into()));
        }
        Ok(LadderTemplate {
            series: self.resonators[series].clone(),
            shunt: self.resonators[shunt].clone(),
            topology: self.config.ladder.elements.iter().map(|e| e.placement).collect(),
            z0_ohm: self.config.ladder.z0_ohm,
            parasitic_nh: parasitics[0],
        })
    }

    pub fn optimizer_settings(&self, seed: u64) -> OptimizerSettings {
        OptimizerSettings { starts: self.config.optimizer.starts, seed, max_evals: self.config.optimizer.max_evals }
    }

    fn film(&self, resonator: &str) -> Result<ResonatorFilm> {
        let stack = self.config.resonators[resonator]
            .stack
            .as_ref()
            .ok_or_else(|| Error::Config(format!("resonator {resonator:?} has no stack for tolerance analysis")))?;
        let (stack, mode) = self.stacks[stack].clone();
        Ok(ResonatorFilm { stack, mode })
    }

    pub fn tolerance_design(&self) -> Result<ToleranceDesign> {
        let template = self.template()?;
        Ok(ToleranceDesign {
            series_film: self.film(self.role(Placement::Series)?)?,
            shunt_film: self.film(self.role(Placement::Shunt)?)?,
            template,
            grid: self.config.sweep,
        })
    }

    pub fn tolerance_scenario(&self, t: &ToleranceConfig, seed: u64) -> Result<ToleranceScenario> {
        let (stack, mode) = self.stacks[&t.stack].clone();
        let scenario = ToleranceScenario {
            stack,
            mode,
            sigma_h_nm: t.sigma_h_nm,
            distribution: t.distribution,
            n_trials: t.n_trials,
            seed,
            correlation: t.correlation,
            propagation: t.propagation,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_resolves() {
        let r = DesignConfig::bundled().resolve().unwrap();
        let cal = r.calibration.as_ref().unwrap();
        assert!((3490.0..3540.0).contains(&r.material.v_thickness), "{}", r.material.v_thickness);
        assert!(cal.residuals_ghz.iter().all(|e| e.abs() < 0.3));
        assert_eq!(r.filter().unwrap().elements.len(), 3);
        let t = r.template().unwrap();
        assert!((t.variables().delta_f_ghz - 1.9).abs() < 1e-12);
        r.tolerance_design().unwrap();
    }

    #[test]
    fn unknown_references_are_rejected() {
        let mut c = DesignConfig::bundled();
        c.ladder.elements[0].resonator = "missing".into();
        assert!(matches!(c.resolve(), Err(Error::Config(m)) if m.contains("missing")));

        let mut c = DesignConfig::bundled();
        c.resonators.values_mut().next().unwrap().stack = Some("nowhere".into());
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn schema_version_is_checked() {
        let mut value: serde_json::Value = serde_json::from_str(BUNDLED_CONFIG).unwrap();
        value["schema_version"] = 2.into();
        assert!(matches!(DesignConfig::from_json(&value.to_string()), Err(Error::Config(_))));
        value.as_object_mut().unwrap().remove("schema_version");
        assert!(matches!(DesignConfig::from_json(&value.to_string()), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut value: serde_json::Value = serde_json::from_str(BUNDLED_CONFIG).unwrap();
        value["ladder"]["typo"] = 1.into();
        assert!(DesignConfig::from_json(&value.to_string()).is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let c = DesignConfig::bundled();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(DesignConfig::from_json(&text).unwrap(), c);
    }
}
