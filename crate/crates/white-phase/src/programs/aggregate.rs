//! Vote aggregation: the feasible schedule closest to the delay-weighted
//! votes.
//!
//! Every lane's signal window is a decision here. The literal encoding
//! carries split auxiliaries for each voter-step distance; the solve path
//! folds those distances into objective coefficients (exactly equivalent
//! over 0/1 signals) and activates feasibility rows lazily: solve, check
//! every rule instance against the candidate, add the violated ones, and
//! repeat until the candidate is clean.

use crate::milp::{
    solve_mip_warm, Budget, LinearProgram, MipStatus, MilpError, Sense,
};
use crate::traffic::{Indication, SignalSchedule};

use super::signal_rows::{collect_signal_rows, LaneSignalVars, PendingRow, SignalSpace};
use super::{ProgramError, World};

pub struct AggregateMap {
    pub n0: u64,
    pub window: usize,
    pub vars: Vec<LaneSignalVars>,
}

impl AggregateMap {
    pub fn decode(&self, x: &[f64]) -> SignalSchedule {
        let mut lanes = Vec::with_capacity(self.vars.len());
        for v in &self.vars {
            let mut row = Vec::with_capacity(self.window);
            for n in 0..self.window {
                let ind = if x[v.w[n]] > 0.5 {
                    Indication::White
                } else if x[v.g[n]] > 0.5 {
                    Indication::Green
                } else if x[v.y[n]] > 0.5 {
                    Indication::Yellow
                } else {
                    Indication::Red
                };
                row.push(ind);
            }
            lanes.push(row);
        }
        SignalSchedule {
            start_step: self.n0,
            lanes,
        }
    }
}

/// Weight of voter `i`'s opinion about window step `n`: zero once the
/// vehicle is predicted past the stop bar at that step's start.
fn vote_weight(world: &World<'_>, lane: usize, idx: usize, n: u64) -> f64 {
    let t_n = world.traj_step_of(n);
    if world.passed_at(lane, idx, t_n) {
        return 0.0;
    }
    world.lanes[lane].vehicles[idx].delay + 1.0
}

fn signal_variables(world: &World<'_>, lp: &mut LinearProgram) -> Vec<LaneSignalVars> {
    let window = world.window();
    (0..world.scene.lane_count())
        .map(|l| {
            let g = (0..window)
                .map(|n| lp.add_binary(format!("g_{l}_{n}")))
                .collect();
            let w: Vec<usize> = (0..window)
                .map(|n| lp.add_binary(format!("w_{l}_{n}")))
                .collect();
            let y = (0..window)
                .map(|n| lp.add_binary(format!("y_{l}_{n}")))
                .collect();
            if world.no_white {
                for &c in &w {
                    lp.fix_var(c, 0.0);
                }
            }
            LaneSignalVars { g, w, y }
        })
        .collect()
}

fn space_of<'w>(world: &'w World<'w>, vars: &[LaneSignalVars]) -> SignalSpace<'w> {
    SignalSpace {
        n0: world.n0(),
        window: world.window(),
        view: world.signals,
        vars: vars.iter().cloned().map(Some).collect(),
    }
}

fn gates_of(world: &World<'_>) -> Vec<Vec<super::WhiteGate>> {
    let n0 = world.n0();
    let window = world.window();
    (0..world.scene.lane_count())
        .map(|l| {
            (0..window)
                .map(|n| world.white_gate(l, n0 + n as u64))
                .collect()
        })
        .collect()
}

/// The literal aggregation program: distance splits per voter-step with
/// their defining rows, plus the full feasibility row set.
pub fn build_vote_aggregation(world: &World<'_>) -> (LinearProgram, AggregateMap) {
    let mut lp = LinearProgram::new();
    let vars = signal_variables(world, &mut lp);
    let space = space_of(world, &vars);
    let gates = gates_of(world);
    for row in collect_signal_rows(world.scene, world.params, &space, &gates) {
        row.expr.emit(&mut lp, row.sense, row.rhs);
    }
    let n0 = world.n0();
    let window = world.window();
    for lane in world.lanes {
        for (idx, veh) in lane.vehicles.iter().enumerate() {
            let Some(vote) = world.votes.get(&veh.id) else {
                continue;
            };
            for n in 0..window.min(vote.g.len()) {
                let weight = vote_weight(world, lane.lane, idx, n0 + n as u64);
                if weight <= 0.0 {
                    continue;
                }
                let gs = lp.add_var(format!("Gp_{}_{}", veh.id.0, n), 0.0, f64::INFINITY);
                let gm = lp.add_var(format!("Gm_{}_{}", veh.id.0, n), 0.0, f64::INFINITY);
                let ws = lp.add_var(format!("Wp_{}_{}", veh.id.0, n), 0.0, f64::INFINITY);
                let wm = lp.add_var(format!("Wm_{}_{}", veh.id.0, n), 0.0, f64::INFINITY);
                // g - g_hat = Gp - Gm ; w - w_hat = Wp - Wm.
                lp.add_row(
                    vec![(vars[lane.lane].g[n], 1.0), (gs, -1.0), (gm, 1.0)],
                    Sense::Eq,
                    vote.g[n] as u8 as f64,
                );
                lp.add_row(
                    vec![(vars[lane.lane].w[n], 1.0), (ws, -1.0), (wm, 1.0)],
                    Sense::Eq,
                    vote.w[n] as u8 as f64,
                );
                for c in [gs, gm, ws, wm] {
                    lp.obj(c, weight);
                }
            }
        }
    }
    (
        lp,
        AggregateMap {
            n0,
            window,
            vars,
        },
    )
}

/// Objective-folded variant used by the solve path: over binary signals
/// the distance `|g - g_hat|` is linear, so the splits are unnecessary.
fn folded_objective(world: &World<'_>, lp: &mut LinearProgram, vars: &[LaneSignalVars]) {
    let n0 = world.n0();
    let window = world.window();
    for lane in world.lanes {
        for (idx, veh) in lane.vehicles.iter().enumerate() {
            let Some(vote) = world.votes.get(&veh.id) else {
                continue;
            };
            for n in 0..window.min(vote.g.len()) {
                let weight = vote_weight(world, lane.lane, idx, n0 + n as u64);
                if weight <= 0.0 {
                    continue;
                }
                for (voted, col) in [
                    (vote.g[n], vars[lane.lane].g[n]),
                    (vote.w[n], vars[lane.lane].w[n]),
                ] {
                    if voted {
                        lp.obj(col, -weight);
                        lp.objective_constant += weight;
                    } else {
                        lp.obj(col, weight);
                    }
                }
            }
        }
    }
}

/// Runs the lazy-row aggregation and returns the agreed schedule.
pub fn solve_vote_aggregation(
    world: &World<'_>,
    budget: Budget,
) -> Result<SignalSchedule, ProgramError> {
    let mut lp = LinearProgram::new();
    let vars = signal_variables(world, &mut lp);
    folded_objective(world, &mut lp, &vars);
    let space = space_of(world, &vars);
    let gates = gates_of(world);
    let all_rows: Vec<PendingRow> =
        collect_signal_rows(world.scene, world.params, &space, &gates);
    let mut active = vec![false; all_rows.len()];

    // Warm start: the current plan window, when it is still feasible.
    let warm: Vec<f64> = {
        let mut x = vec![0.0; lp.variables.len()];
        for (l, v) in vars.iter().enumerate() {
            for n in 0..world.window() {
                let ind = world.signals.at(l, world.n0() + n as u64);
                x[v.g[n]] = ind.g() as u8 as f64;
                x[v.w[n]] = ind.w() as u8 as f64;
                x[v.y[n]] = ind.y() as u8 as f64;
            }
        }
        x
    };

    let map = AggregateMap {
        n0: world.n0(),
        window: world.window(),
        vars,
    };
    for _round in 0..all_rows.len().max(4) {
        let sol = solve_mip_warm(&lp, budget, Some(&warm))
            .map_err(|e| ProgramError::Build(format!("aggregation solve failed: {e}")))?;
        let x = match sol.status {
            MipStatus::Infeasible => {
                return Err(ProgramError::Build(
                    "aggregation infeasible: all-red must always be admissible".into(),
                ))
            }
            _ if !sol.has_solution() => {
                return Err(ProgramError::Build(
                    "aggregation produced no incumbent within budget".into(),
                ))
            }
            _ => sol.x,
        };
        let mut added = false;
        for (i, row) in all_rows.iter().enumerate() {
            if !active[i] && row.violated_by(&x, 1e-6) {
                row.expr.emit(&mut lp, row.sense, row.rhs);
                active[i] = true;
                added = true;
            }
        }
        if !added {
            return Ok(map.decode(&x));
        }
    }
    let stuck: Vec<&str> = all_rows
        .iter()
        .zip(&active)
        .filter(|(_, &a)| a)
        .map(|(r, _)| r.family)
        .collect();
    Err(ProgramError::Build(format!(
        "aggregation lazy loop failed to converge; active families: {stuck:?}"
    )))
}

/// Convenience: the full literal program solved directly (tests and small
/// instances).
pub fn solve_vote_aggregation_literal(
    world: &World<'_>,
    budget: Budget,
) -> Result<(SignalSchedule, f64), MilpError> {
    let (lp, map) = build_vote_aggregation(world);
    let sol = solve_mip_warm(&lp, budget, None)?;
    Ok((map.decode(&sol.x), sol.value))
}
