//! Linear car-following model for connected human-driven vehicles.
//!
//! The same model drives plant CHVs and predicts CHV motion inside the
//! optimization programs. The acceleration is a clamped max/min cascade:
//!
//! ```text
//! a = max( a_min,
//!          (v_min - v) / dt,
//!          min( a_max,
//!               (v_max - v) / dt,
//!               follow:  alpha1 (v_lead - v) + alpha2 (gap - D - v tau)
//!               signal:  alpha1 ((w + g) v_max - v)
//!                        + alpha2 ((b - x) - (1 - w - g) S) + M gamma ) )
//! ```
//!
//! With no leader the following row is dropped (a leader at infinity), and
//! after stop-bar passage (`gamma = 1`) the relief constant makes the
//! signal row inert.

use crate::scene::Parameters;
use crate::traffic::{step_kinematics, Indication, Trajectory, VehicleState};

/// Relief constant that pushes the signal row above every other candidate
/// once the vehicle has passed the stop bar. Kept small relative to the
/// position-scale big-M for numerical hygiene; it only needs to dominate
/// the acceleration scale.
pub const SIGNAL_RELIEF: f64 = 1000.0;

/// Inputs of one car-following evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ChvContext {
    pub state: VehicleState,
    /// Leader front-bumper position and speed, if any.
    pub leader: Option<(f64, f64)>,
    /// Indication of the signal step containing the current trajectory step.
    pub indication: Indication,
    /// Stop bar position of the lane.
    pub stop_bar: f64,
}

impl ChvContext {
    fn passed(&self) -> bool {
        self.state.x > self.stop_bar
    }
}

/// The follow row of the cascade: zero at the equilibrium gap `D + v tau`.
pub fn follow_term(p: &Parameters, v: f64, leader_x: f64, leader_v: f64, x: f64) -> f64 {
    let gap = leader_x - x - p.vehicle_length;
    p.alpha1 * (leader_v - v) + p.alpha2 * (gap - p.same_lane_gap - v * p.chv_reaction)
}

/// The signal row: pulls to a stop `S` short of the bar under red, tracks
/// the speed limit under green or white, and goes inert after passage.
pub fn signal_term(p: &Parameters, v: f64, x: f64, stop_bar: f64, ind: Indication, passed: bool) -> f64 {
    let gw = if ind.active() { 1.0 } else { 0.0 };
    p.alpha1 * (gw * p.speed_max - v)
        + p.alpha2 * ((stop_bar - x) - (1.0 - gw) * p.stopbar_gap)
        + if passed { SIGNAL_RELIEF } else { 0.0 }
}

/// Evaluates the car-following acceleration for one step.
pub fn chv_accel(ctx: &ChvContext, p: &Parameters) -> f64 {
    let v = ctx.state.v;
    let x = ctx.state.x;
    let dt = p.traj_step;
    let mut inner = p.accel_max.min((p.speed_max - v) / dt);
    if let Some((lx, lv)) = ctx.leader {
        inner = inner.min(follow_term(p, v, lx, lv, x));
    }
    inner = inner.min(signal_term(p, v, x, ctx.stop_bar, ctx.indication, ctx.passed()));
    p.accel_min.max((p.speed_min - v) / dt).max(inner)
}

/// Rolls the model forward against a signal plan and an optional leader
/// prediction. `indication_at(t)` must cover `horizon` steps; the leader
/// trajectory may be shorter (the last sample is held).
pub fn predict_chv_trajectory(
    start: VehicleState,
    start_step: u64,
    horizon: usize,
    indication_at: impl Fn(u64) -> Indication,
    leader: Option<&Trajectory>,
    p: &Parameters,
    stop_bar: f64,
) -> Trajectory {
    let mut state = start;
    let mut accels = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let step = start_step + t as u64;
        let leader_at = leader.map(|tr| {
            let x = tr.x_at(step);
            let x_next = tr.x_at(step + 1);
            (x, (x_next - x) / p.traj_step)
        });
        let ctx = ChvContext {
            state,
            leader: leader_at,
            indication: indication_at(step),
            stop_bar,
        };
        let a = chv_accel(&ctx, p);
        accels.push(a);
        state = step_kinematics(state, a, p.traj_step);
    }
    Trajectory::kinematic(start_step, start.x, start.v, &accels, p.traj_step, stop_bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> Parameters {
        Parameters::default()
    }

    #[test]
    fn cruise_at_max_speed_under_green_holds_zero() {
        let ctx = ChvContext {
            state: VehicleState { x: 100.0, v: 42.5 },
            leader: Some((1100.0, 42.5)),
            indication: Indication::Green,
            stop_bar: 650.0,
        };
        assert_eq!(chv_accel(&ctx, &p()), 0.0);
    }

    #[test]
    fn rest_at_the_red_equilibrium_point_holds_zero() {
        let params = p();
        // Stopped exactly S before the bar under red with no leader: the
        // signal row is zero and the lower clamp is zero.
        let ctx = ChvContext {
            state: VehicleState {
                x: 650.0 - params.stopbar_gap,
                v: 0.0,
            },
            leader: None,
            indication: Indication::Red,
            stop_bar: 650.0,
        };
        assert_eq!(chv_accel(&ctx, &params), 0.0);
    }

    #[test]
    fn follow_row_is_zero_at_the_equilibrium_gap() {
        let params = p();
        let v = 20.0;
        let x = 300.0;
        let leader_x = x + params.vehicle_length + params.same_lane_gap + v * params.chv_reaction;
        // alpha1 (0) + alpha2 (gap - D - v tau) = 0 by construction; with
        // alpha1 = 0.95 and alpha2 = 0.25 the remaining candidates are all
        // non-negative, so the cascade settles at the zero equilibrium.
        assert!(follow_term(&params, v, leader_x, v, x).abs() < 1e-12);
        let ctx = ChvContext {
            state: VehicleState { x, v },
            leader: Some((leader_x, v)),
            indication: Indication::Green,
            stop_bar: 650.0,
        };
        let a = chv_accel(&ctx, &params);
        assert!(a.abs() < 1e-12, "a = {a}");
    }

    #[test]
    fn empty_green_lane_accelerates_to_max_and_cruises() {
        let params = p();
        let tr = predict_chv_trajectory(
            VehicleState { x: 0.0, v: 0.0 },
            0,
            120,
            |_| Indication::Green,
            None,
            &params,
            650.0,
        );
        let top = tr.v.iter().cloned().fold(0.0, f64::max);
        assert!((top - params.speed_max).abs() < 1e-6);
        // Once at max speed it stays there.
        let at_top = tr.v.iter().position(|&v| (v - params.speed_max).abs() < 1e-6).unwrap();
        assert!(tr.v[at_top..].iter().all(|&v| (v - params.speed_max).abs() < 1e-6));
    }

    #[test]
    fn red_signal_stops_the_vehicle_at_the_bar_gap() {
        let params = p();
        let tr = predict_chv_trajectory(
            VehicleState { x: 0.0, v: 42.5 },
            0,
            240,
            |_| Indication::Red,
            None,
            &params,
            650.0,
        );
        let final_x = *tr.x.last().unwrap();
        let final_v = *tr.v.last().unwrap();
        assert!(final_v.abs() < 0.05, "still moving: v = {final_v}");
        let target = 650.0 - params.stopbar_gap;
        assert!(
            (final_x - target).abs() <= 1.0,
            "stopped at {final_x:.2}, expected {target:.2} +- 1"
        );
    }

    #[test]
    fn follower_settles_at_the_standstill_gap_behind_a_stopped_leader() {
        let params = p();
        // Leader parked well before the bar; follower approaches from far.
        let leader = Trajectory::kinematic(0, 500.0, 0.0, &vec![0.0; 240], params.traj_step, 650.0);
        let tr = predict_chv_trajectory(
            VehicleState { x: 100.0, v: 42.5 },
            0,
            240,
            |_| Indication::Green,
            Some(&leader),
            &params,
            650.0,
        );
        let final_x = *tr.x.last().unwrap();
        let gap = 500.0 - final_x - params.vehicle_length;
        assert!(
            (gap - params.same_lane_gap).abs() <= 1.0,
            "settled gap {gap:.2}, expected {:.2} +- 1",
            params.same_lane_gap
        );
        // No overlap at any step.
        for &x in &tr.x {
            assert!(x + params.vehicle_length <= 500.0 + 1e-9);
        }
    }

    #[test]
    fn passed_vehicles_ignore_the_signal() {
        let params = p();
        let start = VehicleState { x: 651.0, v: 20.0 };
        let red = predict_chv_trajectory(start, 0, 40, |_| Indication::Red, None, &params, 650.0);
        let green = predict_chv_trajectory(start, 0, 40, |_| Indication::Green, None, &params, 650.0);
        assert_eq!(red.x, green.x);
    }

    proptest! {
        #[test]
        fn acceleration_and_speed_stay_in_bounds(
            x in 0.0..800.0f64,
            v in 0.0..42.5f64,
            extra_gap in 0.0..300.0f64,
            leader_v in 0.0..42.5f64,
            red in prop::bool::ANY,
            steps in 1..100usize,
        ) {
            let params = p();
            // Start from a recoverable state: the gap covers the braking
            // distance at full deceleration plus the standstill gap, as any
            // state reached from a legal spawn does.
            let braking = (v * v - leader_v * leader_v).max(0.0) / (2.0 * -params.accel_min);
            let leader_gap = params.same_lane_gap + 1.5 * braking + extra_gap;
            let leader0 = x + params.vehicle_length + leader_gap;
            let leader = Trajectory::kinematic(
                0,
                leader0,
                leader_v,
                &vec![0.0; steps],
                params.traj_step,
                650.0,
            );
            let ind = if red { Indication::Red } else { Indication::Green };
            let tr = predict_chv_trajectory(
                VehicleState { x, v },
                0,
                steps,
                |_| ind,
                Some(&leader),
                &params,
                650.0,
            );
            for &a in &tr.a {
                prop_assert!(a >= params.accel_min - 1e-9 && a <= params.accel_max + 1e-9);
            }
            for &v in &tr.v {
                prop_assert!(v >= -1e-9 && v <= params.speed_max + 1e-9);
            }
            // The follower never overlaps a leader that started at a
            // feasible (positive-gap) distance.
            for (t, &xf) in tr.x.iter().enumerate() {
                let lx = leader.x[t.min(leader.x.len() - 1)];
                prop_assert!(xf + params.vehicle_length <= lx + 1e-6);
            }
        }
    }
}
