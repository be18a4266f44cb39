//! Scenario files: a TOML schema whose keys mirror the parameter table.
//!
//! Every key is optional; omitted parameters fall back to the case-study
//! defaults. Loading validates all scene/parameter/demand invariants and
//! re-serializing a loaded scenario preserves every declared field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::demand::{DemandSpec, DEMAND_LEVEL_RATES, LEFT_TURN_SHARE};
use super::template::standard_four_leg_with;
use super::{IntersectionScene, MovementKind, Parameters, SceneError};
use crate::traffic::VehicleKind;

/// A fully resolved scenario: immutable after load.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub scene: IntersectionScene,
    pub params: Parameters,
    pub demand: DemandSpec,
    /// Initial vehicles placed on the road at t = 0 (lane, x, v, kind).
    pub initial_vehicles: Vec<(usize, f64, f64, VehicleKind)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub parameters: ParamsConfig,
    #[serde(default)]
    pub demand: DemandConfig,
    #[serde(default)]
    pub scene: SceneConfig,
    /// Scripted arrivals: `{ lane = "EB-T", time = 3.5, kind = "CAV" }`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arrivals: Vec<ScriptedArrival>,
    /// Vehicles already on the road at t = 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vehicles: Vec<InitialVehicle>,
}

macro_rules! params_config {
    ($($field:ident),* $(,)?) => {
        /// Optional overrides of [`Parameters`]; field names match one-to-one.
        #[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
        #[serde(deny_unknown_fields)]
        pub struct ParamsConfig {
            $(
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<f64>,
            )*
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub max_agreement_iters: Option<usize>,
        }

        impl ParamsConfig {
            fn resolve(&self) -> Parameters {
                let mut p = Parameters::default();
                $(
                    if let Some(v) = self.$field {
                        p.$field = v;
                    }
                )*
                if let Some(v) = self.max_agreement_iters {
                    p.max_agreement_iters = v;
                }
                p
            }

            fn capture(p: &Parameters) -> Self {
                ParamsConfig {
                    $( $field: Some(p.$field), )*
                    max_agreement_iters: Some(p.max_agreement_iters),
                }
            }
        }
    };
}

params_config!(
    accel_min,
    accel_max,
    speed_min,
    speed_max,
    vehicle_length,
    same_lane_gap,
    stopbar_gap,
    group_gap,
    chv_reaction,
    cav_reaction,
    max_green,
    min_active_through,
    min_active_left,
    min_white_through,
    min_white_left,
    yellow,
    all_red,
    traj_step,
    signal_step,
    planning_horizon,
    study_period,
    max_group_length,
    alpha1,
    alpha2,
    comfort_weight,
    white_incentive_weight,
    slack_penalty,
    big_m,
    convergence_eps,
    ttc_threshold,
    chv_plant_noise,
);

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    /// Demand level 1..=3; through rates 500/700/900 veh/h/lane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
    /// Explicit through rate, veh/h/lane; overrides `level`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub through_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_share: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penetration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Per-lane rates by lane name; overrides uniform settings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_rates: Option<std::collections::BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_lane_width")]
    pub lane_width: f64,
    #[serde(default = "default_stop_bar")]
    pub stop_bar: f64,
    #[serde(default = "default_detection")]
    pub detection_range: f64,
    #[serde(default = "default_exit_run")]
    pub exit_run: f64,
    /// Per-pair conflict point overrides.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflict_overrides: Vec<ConflictOverride>,
}

fn default_lane_width() -> f64 {
    12.0
}
fn default_stop_bar() -> f64 {
    650.0
}
fn default_detection() -> f64 {
    650.0
}
fn default_exit_run() -> f64 {
    150.0
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            lane_width: default_lane_width(),
            stop_bar: default_stop_bar(),
            detection_range: default_detection(),
            exit_run: default_exit_run(),
            conflict_overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConflictOverride {
    pub lane_a: String,
    pub lane_b: String,
    /// `F` along `lane_a`.
    pub f_ab: f64,
    /// `F` along `lane_b`.
    pub f_ba: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScriptedArrival {
    pub lane: String,
    pub time: f64,
    pub kind: VehicleKind,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialVehicle {
    pub lane: String,
    pub x: f64,
    pub v: f64,
    pub kind: VehicleKind,
}

impl ScenarioConfig {
    pub fn resolve(&self) -> Result<Scenario, SceneError> {
        let params = self.parameters.resolve();
        params.validate()?;

        let mut scene = standard_four_leg_with(
            1,
            self.scene.lane_width,
            self.scene.stop_bar,
            self.scene.detection_range,
            self.scene.exit_run,
        )?;
        for ov in &self.scene.conflict_overrides {
            let a = scene.lane_by_name(&ov.lane_a).ok_or_else(|| {
                SceneError::Validation(format!("unknown lane {:?} in override", ov.lane_a))
            })?;
            let b = scene.lane_by_name(&ov.lane_b).ok_or_else(|| {
                SceneError::Validation(format!("unknown lane {:?} in override", ov.lane_b))
            })?;
            if !scene.conflicts[a.0].contains(&b) {
                return Err(SceneError::Validation(format!(
                    "override names non-conflicting pair ({}, {})",
                    ov.lane_a, ov.lane_b
                )));
            }
            scene.conflict_points.insert((a.0, b.0), ov.f_ab);
            scene.conflict_points.insert((b.0, a.0), ov.f_ba);
        }
        scene.validate()?;
        params.validate_with_scene(&scene)?;

        let d = &self.demand;
        let through = match (d.through_rate, d.level) {
            (Some(r), _) => r,
            (None, Some(level)) => {
                if !(1..=3).contains(&level) {
                    return Err(SceneError::Validation(format!(
                        "demand level {level} out of range 1..=3"
                    )));
                }
                DEMAND_LEVEL_RATES[level as usize - 1]
            }
            (None, None) => DEMAND_LEVEL_RATES[2],
        };
        let left_share = d.left_share.unwrap_or(LEFT_TURN_SHARE);
        let mut rates: Vec<f64> = scene
            .lanes
            .iter()
            .map(|l| match l.movement {
                MovementKind::Through => through,
                MovementKind::Left => through * left_share,
            })
            .collect();
        if let Some(per_lane) = &d.lane_rates {
            for (name, &rate) in per_lane {
                let id = scene.lane_by_name(name).ok_or_else(|| {
                    SceneError::Validation(format!("unknown lane {name:?} in lane_rates"))
                })?;
                rates[id.0] = rate;
            }
        }
        let mut scripted = Vec::new();
        for a in &self.arrivals {
            let id = scene.lane_by_name(&a.lane).ok_or_else(|| {
                SceneError::Validation(format!("unknown lane {:?} in arrivals", a.lane))
            })?;
            scripted.push((a.time, id.0, a.kind));
        }
        let demand = DemandSpec {
            rates,
            penetration: d.penetration.unwrap_or(0.5),
            seed: d.seed.unwrap_or(1),
            scripted,
        };
        demand.validate(&scene)?;

        let mut initial_vehicles = Vec::new();
        for v in &self.vehicles {
            let id = scene.lane_by_name(&v.lane).ok_or_else(|| {
                SceneError::Validation(format!("unknown lane {:?} in vehicles", v.lane))
            })?;
            if !(params.speed_min..=params.speed_max).contains(&v.v) {
                return Err(SceneError::Validation(format!(
                    "initial speed {} outside bounds",
                    v.v
                )));
            }
            initial_vehicles.push((id.0, v.x, v.v, v.kind));
        }

        Ok(Scenario {
            scene,
            params,
            demand,
            initial_vehicles,
        })
    }

    /// Captures a resolved parameter set back into config form (all keys
    /// explicit), used to embed reproducible metadata in run artifacts.
    pub fn from_parts(params: &Parameters, demand: &DemandConfig, scene: &SceneConfig) -> Self {
        ScenarioConfig {
            parameters: ParamsConfig::capture(params),
            demand: demand.clone(),
            scene: scene.clone(),
            arrivals: Vec::new(),
            vehicles: Vec::new(),
        }
    }
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, SceneError> {
    let text = std::fs::read_to_string(path)?;
    let config: ScenarioConfig =
        toml::from_str(&text).map_err(|e| SceneError::Parse(e.to_string()))?;
    config.resolve()
}

/// Serializes a scenario config to TOML.
pub fn save_scenario(config: &ScenarioConfig) -> Result<String, SceneError> {
    toml::to_string_pretty(config).map_err(|e| SceneError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_case_study_defaults() {
        let scenario = ScenarioConfig::default().resolve().unwrap();
        assert_eq!(scenario.params.speed_max, 42.5);
        assert_eq!(scenario.params.accel_max, 13.0);
        assert_eq!(scenario.params.accel_min, -11.5);
        assert_eq!(scenario.params.traj_step, 0.5);
        assert_eq!(scenario.params.signal_step, 2.0);
        assert_eq!(scenario.params.yellow, 4.0);
        assert_eq!(scenario.params.all_red, 2.0);
        assert_eq!(scenario.params.max_group_length, 360.0);
        assert_eq!(scenario.scene.detection_range, 650.0);
        assert_eq!(scenario.scene.stop_bar, 650.0);
    }

    #[test]
    fn invalid_step_ratio_is_a_validation_error() {
        let text = "[parameters]\ntraj_step = 0.6\nsignal_step = 2.0\n";
        let config: ScenarioConfig = toml::from_str(text).unwrap();
        let err = config.resolve().unwrap_err();
        assert!(matches!(err, SceneError::Validation(_)));
        assert!(err.to_string().contains("traj_step"));
    }

    #[test]
    fn demand_level_three_resolves_published_rates() {
        let text = "[demand]\nlevel = 3\n";
        let config: ScenarioConfig = toml::from_str(text).unwrap();
        let scenario = config.resolve().unwrap();
        let through = scenario.scene.lane_by_name("EB-T").unwrap();
        let left = scenario.scene.lane_by_name("EB-L").unwrap();
        assert_eq!(scenario.demand.rates[through.0], 900.0);
        assert_eq!(scenario.demand.rates[left.0], 72.0);
    }

    #[test]
    fn round_trip_preserves_declared_fields() {
        let text = r#"
[parameters]
speed_max = 40.0
yellow = 4.0

[demand]
level = 2
penetration = 0.25
seed = 9

[scene]
lane_width = 12.0

[[arrivals]]
lane = "EB-T"
time = 1.5
kind = "CAV"
"#;
        let config: ScenarioConfig = toml::from_str(text).unwrap();
        let serialized = save_scenario(&config).unwrap();
        let reparsed: ScenarioConfig = toml::from_str(&serialized).unwrap();
        assert_eq!(config, reparsed);
    }

    #[test]
    fn malformed_file_is_a_parse_error() {
        let err = toml::from_str::<ScenarioConfig>("[parameters]\nspeed_max = \"fast\"\n")
            .map(|_| ())
            .unwrap_err();
        assert!(err.to_string().contains("speed_max"));
    }
}
