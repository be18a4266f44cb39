//! Core traffic state shared by the plant, the optimizer, and the metrics:
//! vehicles, trajectories, vehicle-groups, and signal schedules on the
//! discrete time grid.

mod groups;
mod signal;
mod trajectory;

pub use groups::{form_groups, GroupVehicle, VehicleGroup};
pub use signal::{validate_schedule, Indication, SignalSchedule, Violation};
pub use trajectory::Trajectory;

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VehicleKind {
    #[serde(rename = "CAV")]
    Cav,
    #[serde(rename = "CHV")]
    Chv,
}

impl fmt::Display for VehicleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VehicleKind::Cav => "CAV",
            VehicleKind::Chv => "CHV",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// One vehicle in the plant.
#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub lane: usize,
    pub kind: VehicleKind,
    /// Scheduled arrival time at the detection boundary, s.
    pub arrival_time: f64,
    /// Time it actually entered the lane (queued arrivals enter late), s.
    pub entry_time: f64,
    /// Front-bumper position, ft from the lane origin.
    pub x: f64,
    pub v: f64,
    /// Cumulative delay, s.
    pub delay: f64,
}

/// Position/speed pair used by the kinematic update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub v: f64,
}

/// Advances one state by the exact discrete motion equations
/// `x' = x + v dt + a dt^2 / 2`, `v' = v + a dt`.
///
/// Speeds are not clamped here; bounds are the caller's constraint
/// machinery's job.
pub fn step_kinematics(state: VehicleState, accel: f64, dt: f64) -> VehicleState {
    VehicleState {
        x: state.x + state.v * dt + 0.5 * accel * dt * dt,
        v: state.v + accel * dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinematics_match_hand_computed_values() {
        let s = step_kinematics(VehicleState { x: 0.0, v: 10.0 }, 2.0, 0.5);
        assert_eq!(s.x, 5.25);
        assert_eq!(s.v, 11.0);
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let s = step_kinematics(VehicleState { x: 100.0, v: 0.0 }, 0.0, 0.5);
        assert_eq!(s, VehicleState { x: 100.0, v: 0.0 });
    }

    #[test]
    fn max_speed_cruise() {
        let s = step_kinematics(VehicleState { x: 0.0, v: 42.5 }, 0.0, 0.5);
        assert_eq!(s.x, 21.25);
        assert_eq!(s.v, 42.5);
    }
}
