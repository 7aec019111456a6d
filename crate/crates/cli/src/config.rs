//! Scenario file schema (TOML). Every key is optional; omitted keys take the
//! shipped defaults. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use barrier_fleet::behaviors::{BehaviorGains, ColregsParams};
use barrier_fleet::metrics::EncounterGrid;
use barrier_fleet::qp_filter::GateConstraint;
use barrier_fleet::sim::{JoustConfig, Policy, Scenario, VehicleSetup};
use barrier_fleet::{ControlBounds, QpWeights, VehicleSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<barrier_fleet::Error> for ConfigError {
    fn from(e: barrier_fleet::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// Name of the thrust-to-rudder-authority mapping. Only one exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RudderGateModel {
    #[default]
    LinearRampV1,
}

/// Vessel parameters applied to every vehicle unless overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VesselConfig {
    pub gamma: f64,
    pub r_safe: f64,
    pub thr_min: f64,
    pub thr_max: f64,
    pub rud_min: f64,
    pub rud_max: f64,
    pub rudder_gate_threshold: f64,
    pub rudder_gate_model: RudderGateModel,
    pub policy: Policy,
}

impl Default for VesselConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            r_safe: 15.0,
            thr_min: 0.0,
            thr_max: 2.0,
            rud_min: 1.0,
            rud_max: 1.0,
            rudder_gate_threshold: 0.25,
            rudder_gate_model: RudderGateModel::LinearRampV1,
            policy: Policy::Autonomous,
        }
    }
}

/// Per-vehicle overrides of [`VesselConfig`], selected by `id`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleOverride {
    pub id: usize,
    pub gamma: Option<f64>,
    pub r_safe: Option<f64>,
    pub thr_min: Option<f64>,
    pub thr_max: Option<f64>,
    pub rud_min: Option<f64>,
    pub rud_max: Option<f64>,
    pub rudder_gate_threshold: Option<f64>,
    pub policy: Option<Policy>,
}

impl VehicleOverride {
    fn apply(&self, base: &VesselConfig) -> VesselConfig {
        VesselConfig {
            gamma: self.gamma.unwrap_or(base.gamma),
            r_safe: self.r_safe.unwrap_or(base.r_safe),
            thr_min: self.thr_min.unwrap_or(base.thr_min),
            thr_max: self.thr_max.unwrap_or(base.thr_max),
            rud_min: self.rud_min.unwrap_or(base.rud_min),
            rud_max: self.rud_max.unwrap_or(base.rud_max),
            rudder_gate_threshold: self.rudder_gate_threshold.unwrap_or(base.rudder_gate_threshold),
            rudder_gate_model: base.rudder_gate_model,
            policy: self.policy.unwrap_or(base.policy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierConfig {
    /// Gain of the linear class-K term.
    pub alpha_gain: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self { alpha_gain: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Weights default to `q_thr = 1`, `q_rud = gamma^2`,
    /// `slack_penalty = 1e6 * max(q)` per vessel. Give all three or none.
    pub q_thr: Option<f64>,
    pub q_rud: Option<f64>,
    pub slack_penalty: Option<f64>,
    pub gate_constraint: GateConstraint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write per-tick trajectory CSVs for the first this-many legs.
    pub trajectory_legs: usize,
    pub range_bin: f64,
    /// Degrees.
    pub bearing_bin: f64,
    pub max_range: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), trajectory_legs: 1, range_bin: 0.1, bearing_bin: 1.0, max_range: 32.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub joust: JoustConfig,
    pub barrier: BarrierConfig,
    pub vessel: VesselConfig,
    pub vehicles: Vec<VehicleOverride>,
    pub colregs: ColregsParams,
    pub behavior: BehaviorGains,
    pub filter: FilterConfig,
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    fn vessel_for(&self, id: usize) -> VesselConfig {
        self.vehicles.iter().filter(|o| o.id == id).fold(self.vessel.clone(), |acc, o| o.apply(&acc))
    }

    /// Builds and validates the simulator scenario.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let n = self.joust.n_vehicles;
        if let Some(o) = self.vehicles.iter().find(|o| o.id >= n) {
            return Err(ConfigError(format!("vehicles: id {} is out of range for n_vehicles = {n}", o.id)));
        }
        let vehicles = (0..n)
            .map(|id| {
                let v = self.vessel_for(id);
                let bounds = ControlBounds::new(v.thr_min, v.thr_max, v.rud_min, v.rud_max)
                    .map_err(|e| ConfigError(format!("vehicle {id}: {e}")))?;
                let spec = VehicleSpec::new(v.gamma, v.r_safe, bounds, v.rudder_gate_threshold)
                    .map_err(|e| ConfigError(format!("vehicle {id}: {e}")))?;
                Ok(VehicleSetup { spec, policy: v.policy })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let f = &self.filter;
        let weights = match (f.q_thr, f.q_rud, f.slack_penalty) {
            (None, None, None) => None,
            (Some(q_thr), Some(q_rud), Some(p)) => Some(QpWeights::new(q_thr, q_rud, p)?),
            _ => return Err(ConfigError("filter: give all of q_thr, q_rud, slack_penalty or none".into())),
        };
        let scenario = Scenario {
            joust: self.joust.clone(),
            vehicles,
            alpha_gain: self.barrier.alpha_gain,
            colregs: self.colregs,
            gains: self.behavior,
            weights,
            gate_constraint: f.gate_constraint,
            trajectory_legs: self.output.trajectory_legs,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn grid_template(&self) -> Result<EncounterGrid, ConfigError> {
        let o = &self.output;
        EncounterGrid::new(o.range_bin, o.bearing_bin, o.max_range).map_err(|e| ConfigError(format!("output: {e}")))
    }
}
