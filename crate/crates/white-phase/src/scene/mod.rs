//! Intersection geometry, global parameters, and demand specification.
//!
//! A scene is immutable after loading and safe to share read-only across
//! workers. Positions are one-dimensional per lane: `0` at the detection
//! boundary, `b` at the stop bar, conflict points `F` inside the box, and
//! the destination `r_l` beyond it.

mod config;
mod demand;
mod template;

pub use config::{load_scenario, save_scenario, Scenario, ScenarioConfig};
pub use demand::{Arrival, DemandSpec};
pub use template::standard_four_leg;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario validation error: {0}")]
    Validation(String),
}

/// Index of a lane within an [`IntersectionScene`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LaneId(pub usize);

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Approach {
    East,
    West,
    North,
    South,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MovementKind {
    Through,
    Left,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaneSpec {
    pub id: LaneId,
    /// Short label such as `EB-T` (eastbound through) or `NB-L`.
    pub name: String,
    pub approach: Approach,
    pub movement: MovementKind,
    /// Destination position `r_l` in ft from the lane origin.
    pub destination: f64,
}

/// Lanes, conflict structure, and detection geometry of one intersection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntersectionScene {
    pub lanes: Vec<LaneSpec>,
    /// Stop bar position `b` in ft from the lane origin (shared by all lanes).
    pub stop_bar: f64,
    /// Length of the communication/detection zone in ft.
    pub detection_range: f64,
    /// Per lane, the sorted set `C_l` of conflicting lanes.
    pub conflicts: Vec<Vec<LaneId>>,
    /// Conflict point `F[(k, k')]` in ft along lane `k` for each ordered
    /// conflicting pair.
    pub conflict_points: BTreeMap<(usize, usize), f64>,
}

impl IntersectionScene {
    pub fn lane_count(&self) -> usize {
        self.lanes.len()
    }

    pub fn conflicting(&self, lane: LaneId) -> &[LaneId] {
        &self.conflicts[lane.0]
    }

    /// `F_{kk'}`: where lane `k` crosses lane `k'`, measured along `k`.
    pub fn conflict_point(&self, k: LaneId, k_prime: LaneId) -> f64 {
        self.conflict_points[&(k.0, k_prime.0)]
    }

    pub fn lane_by_name(&self, name: &str) -> Option<LaneId> {
        self.lanes.iter().find(|l| l.name == name).map(|l| l.id)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let n = self.lanes.len();
        if self.conflicts.len() != n {
            return Err(SceneError::Validation(
                "conflict table size does not match lane count".into(),
            ));
        }
        for (i, lane) in self.lanes.iter().enumerate() {
            if lane.id.0 != i {
                return Err(SceneError::Validation(format!(
                    "lane {} stored at index {}",
                    lane.id, i
                )));
            }
        }
        for l in 0..n {
            for &k in &self.conflicts[l] {
                if !self.conflicts[k.0].contains(&LaneId(l)) {
                    return Err(SceneError::Validation(format!(
                        "conflict relation not symmetric for ({}, {})",
                        LaneId(l),
                        k
                    )));
                }
                let (f_lk, f_kl) = (
                    self.conflict_points.get(&(l, k.0)),
                    self.conflict_points.get(&(k.0, l)),
                );
                match (f_lk, f_kl) {
                    (Some(&f_lk), Some(&f_kl)) => {
                        if f_lk <= self.stop_bar || f_kl <= self.stop_bar {
                            return Err(SceneError::Validation(format!(
                                "conflict point of ({}, {}) not beyond the stop bar",
                                LaneId(l),
                                k
                            )));
                        }
                        if self.lanes[l].destination <= f_lk {
                            return Err(SceneError::Validation(format!(
                                "destination of {} does not clear conflict point {:.1}",
                                LaneId(l),
                                f_lk
                            )));
                        }
                    }
                    _ => {
                        return Err(SceneError::Validation(format!(
                            "missing conflict point for pair ({}, {})",
                            LaneId(l),
                            k
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Global model parameters (lengths in ft, times in s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub accel_min: f64,
    pub accel_max: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub vehicle_length: f64,
    /// Minimum same-lane gap `D` between consecutive vehicles.
    pub same_lane_gap: f64,
    /// Minimum stop distance `S` behind the stop bar under red.
    pub stopbar_gap: f64,
    /// Minimum safety distance `rho` between conflicting vehicle-groups.
    pub group_gap: f64,
    pub chv_reaction: f64,
    pub cav_reaction: f64,
    pub max_green: f64,
    pub min_active_through: f64,
    pub min_active_left: f64,
    pub min_white_through: f64,
    pub min_white_left: f64,
    pub yellow: f64,
    pub all_red: f64,
    /// Trajectory update interval `dt`.
    pub traj_step: f64,
    /// Signal update interval; must be an integer multiple of `traj_step`.
    pub signal_step: f64,
    /// Rolling planning horizon in seconds.
    pub planning_horizon: f64,
    /// Study period in seconds.
    pub study_period: f64,
    pub max_group_length: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Speed-change weight in the CAV objective (speed-to-distance factor).
    pub comfort_weight: f64,
    /// Reward per white lane-step in the vote objectives.
    pub white_incentive_weight: f64,
    /// Penalty per ft of separation slack.
    pub slack_penalty: f64,
    pub big_m: f64,
    /// Trajectory agreement tolerance in ft.
    pub convergence_eps: f64,
    pub max_agreement_iters: usize,
    /// Reporting threshold for time-to-collision events, s.
    pub ttc_threshold: f64,
    /// Std-dev of the seeded acceleration noise added to plant CHVs
    /// (ft/s^2); zero disables the noise.
    pub chv_plant_noise: f64,
}

impl Default for Parameters {
    /// Case-study values; durations in seconds, lengths in ft.
    fn default() -> Self {
        Parameters {
            accel_min: -11.5,
            accel_max: 13.0,
            speed_min: 0.0,
            speed_max: 42.5,
            vehicle_length: 13.0,
            same_lane_gap: 11.8,
            stopbar_gap: 1.0,
            group_gap: 40.0,
            chv_reaction: 1.0,
            cav_reaction: 0.1,
            max_green: 60.0,
            min_active_through: 12.0,
            min_active_left: 4.0,
            min_white_through: 6.0,
            min_white_left: 4.0,
            yellow: 4.0,
            all_red: 2.0,
            traj_step: 0.5,
            signal_step: 2.0,
            planning_horizon: 20.0,
            study_period: 900.0,
            max_group_length: 360.0,
            alpha1: 0.95,
            alpha2: 0.25,
            comfort_weight: 2.0,
            white_incentive_weight: 50.0,
            slack_penalty: 1.0e4,
            big_m: 1.0e6,
            convergence_eps: 0.5,
            max_agreement_iters: 25,
            ttc_threshold: 10.0,
            chv_plant_noise: 0.5,
        }
    }
}

fn divides(small: f64, large: f64) -> bool {
    if small <= 0.0 || large <= 0.0 {
        return false;
    }
    let ratio = large / small;
    (ratio - ratio.round()).abs() < 1e-9 && ratio.round() >= 1.0
}

impl Parameters {
    /// Trajectory steps per signal step.
    pub fn steps_per_signal(&self) -> usize {
        (self.signal_step / self.traj_step).round() as usize
    }

    /// Planning horizon in trajectory steps.
    pub fn horizon_steps(&self) -> usize {
        (self.planning_horizon / self.traj_step).round() as usize
    }

    /// Planning horizon in signal steps.
    pub fn horizon_signal_steps(&self) -> usize {
        (self.planning_horizon / self.signal_step).round() as usize
    }

    pub fn min_active(&self, kind: MovementKind) -> f64 {
        match kind {
            MovementKind::Through => self.min_active_through,
            MovementKind::Left => self.min_active_left,
        }
    }

    pub fn min_white(&self, kind: MovementKind) -> f64 {
        match kind {
            MovementKind::Through => self.min_white_through,
            MovementKind::Left => self.min_white_left,
        }
    }

    /// Duration in whole signal steps, validated divisible elsewhere.
    pub fn signal_steps_of(&self, seconds: f64) -> usize {
        (seconds / self.signal_step).round() as usize
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let err = |msg: String| Err(SceneError::Validation(msg));
        if !(self.accel_min < 0.0 && 0.0 < self.accel_max) {
            return err("acceleration bounds must satisfy accel_min < 0 < accel_max".into());
        }
        if !(0.0 <= self.speed_min && self.speed_min < self.speed_max) {
            return err("speed bounds must satisfy 0 <= speed_min < speed_max".into());
        }
        if !divides(self.traj_step, self.signal_step) {
            return err(format!(
                "traj_step ({}) must divide signal_step ({})",
                self.traj_step, self.signal_step
            ));
        }
        if !divides(self.signal_step, self.planning_horizon) {
            return err(format!(
                "signal_step ({}) must divide planning_horizon ({})",
                self.signal_step, self.planning_horizon
            ));
        }
        for (name, v) in [
            ("vehicle_length", self.vehicle_length),
            ("yellow", self.yellow),
            ("all_red", self.all_red),
            ("max_green", self.max_green),
            ("min_active_through", self.min_active_through),
            ("min_active_left", self.min_active_left),
            ("min_white_through", self.min_white_through),
            ("min_white_left", self.min_white_left),
            ("traj_step", self.traj_step),
            ("signal_step", self.signal_step),
            ("planning_horizon", self.planning_horizon),
            ("study_period", self.study_period),
            ("max_group_length", self.max_group_length),
        ] {
            if v <= 0.0 {
                return err(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("yellow", self.yellow),
            ("all_red", self.all_red),
            ("max_green", self.max_green),
            ("min_active_through", self.min_active_through),
            ("min_active_left", self.min_active_left),
            ("min_white_through", self.min_white_through),
            ("min_white_left", self.min_white_left),
        ] {
            if !divides(self.signal_step, v) {
                return err(format!(
                    "{name} ({v}) must be a whole number of signal steps ({})",
                    self.signal_step
                ));
            }
        }
        // A full-length group must clear the box within the shorter white
        // minimum plus yellow (the case study rounds 351.8 up to 360).
        let min_white = self.min_white_through.min(self.min_white_left);
        let needed = self.speed_max * (min_white + self.yellow) + self.same_lane_gap;
        if self.max_group_length < needed {
            return err(format!(
                "max_group_length ({}) below v_max*(min_white+yellow)+gap = {:.1}",
                self.max_group_length, needed
            ));
        }
        Ok(())
    }

    /// Checks that `big_m` dominates every position difference reachable
    /// over one planning horizon in this scene.
    pub fn validate_with_scene(&self, scene: &IntersectionScene) -> Result<(), SceneError> {
        let extent = scene
            .lanes
            .iter()
            .map(|l| l.destination)
            .fold(0.0_f64, f64::max);
        let needed = self.speed_max * self.planning_horizon + extent;
        if self.big_m < needed {
            return Err(SceneError::Validation(format!(
                "big_m ({}) must exceed v_max*horizon + scene extent = {:.1}",
                self.big_m, needed
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameters_match_case_study() {
        let p = Parameters::default();
        assert_eq!(p.speed_max, 42.5);
        assert_eq!(p.accel_max, 13.0);
        assert_eq!(p.accel_min, -11.5);
        assert_eq!(p.traj_step, 0.5);
        assert_eq!(p.signal_step, 2.0);
        assert_eq!(p.yellow, 4.0);
        assert_eq!(p.all_red, 2.0);
        assert_eq!(p.max_group_length, 360.0);
        assert_eq!(p.vehicle_length, 13.0);
        assert_eq!(p.same_lane_gap, 11.8);
        assert_eq!(p.stopbar_gap, 1.0);
        assert_eq!(p.group_gap, 40.0);
        p.validate().unwrap();
    }

    #[test]
    fn traj_step_must_divide_signal_step() {
        let p = Parameters {
            traj_step: 0.6,
            ..Parameters::default()
        };
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("traj_step"));
    }

    #[test]
    fn group_length_bound_enforced() {
        let p = Parameters {
            max_group_length: 300.0,
            ..Parameters::default()
        };
        assert!(p.validate().is_err());
    }
}
