//! Per-vehicle optimization programs and the vote-aggregation program.
//!
//! Every unpassed vehicle in the detection zone plans over a rolling
//! horizon by solving a small mixed-integer program built from the shared
//! state: CAVs optimize their own acceleration profile (and, at signal
//! steps, vote on their lane's signal plan), CHVs couple their trajectory
//! to the car-following model and vote through the same signal variables,
//! and the aggregation program selects the feasible schedule closest to
//! the delay-weighted votes.
//!
//! Programs treat other vehicles' trajectories, other lanes' signals, and
//! group geometry as shared constants; only the vehicle's own motion, its
//! own lane's signal window (in voting mode), passage flags, and the
//! separation-split auxiliaries are decision variables. Vote aggregation
//! is the one program that owns every lane's signal variables.

mod aggregate;
mod cav;
mod chv_vote;
mod signal_rows;
mod trajectory_lp;

pub use aggregate::{
    build_vote_aggregation, solve_vote_aggregation, solve_vote_aggregation_literal, AggregateMap,
};
pub use cav::{build_cav_program, CavMode};
pub use chv_vote::{build_chv_program, build_chv_vote_program, pinned_vote};
pub use signal_rows::WhiteGate;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scene::{IntersectionScene, Parameters};
use crate::traffic::{
    Indication, SignalSchedule, Trajectory, VehicleGroup, VehicleId, VehicleKind,
};

#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),
    #[error("program build error: {0}")]
    Build(String),
}

/// One vehicle's snapshot inside a [`LaneState`].
#[derive(Debug, Clone, Copy)]
pub struct VehState {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub x: f64,
    pub v: f64,
    /// Accumulated delay, s (vote weight input).
    pub delay: f64,
}

/// Front-to-back snapshot of one lane at the horizon start.
#[derive(Debug, Clone)]
pub struct LaneState {
    pub lane: usize,
    pub vehicles: Vec<VehState>,
    pub groups: Vec<VehicleGroup>,
    /// Group-membership flag per vehicle position.
    pub member: Vec<bool>,
}

/// A vehicle's vote: desired green/white pattern for its own lane over the
/// signal window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote {
    pub g: Vec<bool>,
    pub w: Vec<bool>,
}

impl Vote {
    pub fn all_red(window: usize) -> Self {
        Vote {
            g: vec![false; window],
            w: vec![false; window],
        }
    }

    pub fn from_schedule(sched: &SignalSchedule, lane: usize, n0: u64, window: usize) -> Self {
        let g = (0..window)
            .map(|n| sched.at(lane, n0 + n as u64).g())
            .collect();
        let w = (0..window)
            .map(|n| sched.at(lane, n0 + n as u64).w())
            .collect();
        Vote { g, w }
    }
}

/// Read-only view of the signal state: applied history before `hist_end`,
/// the current plan window after it, red beyond the plan.
#[derive(Debug, Clone, Copy)]
pub struct SignalView<'a> {
    pub history: &'a [Vec<Indication>],
    pub plan: &'a SignalSchedule,
}

impl<'a> SignalView<'a> {
    pub fn hist_end(&self) -> u64 {
        self.history.first().map_or(0, |h| h.len() as u64)
    }

    pub fn at(&self, lane: usize, n: u64) -> Indication {
        let hist_end = self.hist_end();
        if n < hist_end {
            self.history[lane][n as usize]
        } else {
            let end = self.plan.start_step + self.plan.steps() as u64;
            if n < end {
                self.plan.at(lane, n)
            } else {
                Indication::Red
            }
        }
    }
}

/// Everything a program build reads: scene, parameters, the time origin,
/// signal state, shared trajectories, lane snapshots, votes, and the
/// iteration's slack budget.
pub struct World<'a> {
    pub scene: &'a IntersectionScene,
    pub params: &'a Parameters,
    /// Global trajectory step at the horizon start.
    pub t0: u64,
    pub signals: SignalView<'a>,
    pub shared: &'a BTreeMap<VehicleId, Trajectory>,
    pub lanes: &'a [LaneState],
    pub votes: &'a BTreeMap<VehicleId, Vote>,
    /// Upper bound on each separation slack variable this iteration.
    pub slack_cap: f64,
    /// Ablation switch: forbid white everywhere.
    pub no_white: bool,
}

impl<'a> World<'a> {
    /// First decided signal step (the one containing `t0`).
    pub fn n0(&self) -> u64 {
        self.t0 / self.params.steps_per_signal() as u64
    }

    pub fn window(&self) -> usize {
        self.params.horizon_signal_steps()
    }

    /// Signal step containing global trajectory step `t`.
    pub fn signal_step_of(&self, t: u64) -> u64 {
        t / self.params.steps_per_signal() as u64
    }

    /// First global trajectory step of signal step `n`.
    pub fn traj_step_of(&self, n: u64) -> u64 {
        n * self.params.steps_per_signal() as u64
    }

    pub fn shared_of(&self, id: VehicleId) -> Option<&Trajectory> {
        self.shared.get(&id)
    }

    /// Passage flag of a vehicle at global step `t` per the shared data;
    /// falls back to the snapshot position when no trajectory was shared.
    pub fn passed_at(&self, lane: usize, idx: usize, t: u64) -> bool {
        let veh = &self.lanes[lane].vehicles[idx];
        match self.shared.get(&veh.id) {
            Some(tr) => tr.passed_at(t),
            None => veh.x > self.scene.stop_bar,
        }
    }

    /// Index of the front-most unpassed vehicle on `lane` at step `t`.
    pub fn first_unpassed(&self, lane: usize, t: u64) -> Option<usize> {
        (0..self.lanes[lane].vehicles.len()).find(|&i| !self.passed_at(lane, i, t))
    }

    /// White-phase gate per window step for `lane`: white may initiate
    /// only when the first unpassed vehicle is a CAV, must hold when it is
    /// a grouped CHV, and is forbidden while it is an ungrouped CHV.
    pub fn white_gate(&self, lane: usize, n: u64) -> WhiteGate {
        let t = self.traj_step_of(n);
        match self.first_unpassed(lane, t) {
            None => WhiteGate::Free,
            Some(i) => {
                let st = &self.lanes[lane];
                if st.vehicles[i].kind == VehicleKind::Cav {
                    WhiteGate::Free
                } else if st.member[i] {
                    WhiteGate::ContinueOnly
                } else {
                    WhiteGate::Blocked
                }
            }
        }
    }

    /// Head, tail, length, and leader-passage of a group at step `t`,
    /// derived from the shared trajectories.
    pub fn group_geometry(&self, group: &VehicleGroup, t: u64) -> Option<GroupGeometry> {
        let leader = self.shared.get(&group.leader())?;
        let last = self.shared.get(&group.last_member())?;
        let h = leader.x_at(t);
        let e = last.x_at(t) - self.params.vehicle_length;
        Some(GroupGeometry {
            head: h,
            tail: e,
            length: h - e,
            leader_passed: leader.passed_at(t),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GroupGeometry {
    pub head: f64,
    pub tail: f64,
    pub length: f64,
    pub leader_passed: bool,
}

/// A built program plus the decoding map and an optional warm start.
pub struct BuiltProgram {
    pub lp: crate::milp::LinearProgram,
    pub map: trajectory_lp::VarMap,
    pub warm: Option<Vec<f64>>,
}

pub use trajectory_lp::VarMap;

/// Effective conflict-zone margin used in the separation rows. The paired
/// neighborhoods of the two conflict points must never be occupied
/// simultaneously, which needs twice the group safety distance on the
/// summed head/tail distances.
pub(crate) fn separation_margin(params: &Parameters) -> f64 {
    2.0 * params.group_gap
}
