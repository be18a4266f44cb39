//! The CAV trajectory-and-vote program.
//!
//! Minimizes distance-to-destination plus a speed-change comfort term,
//! with a white-phase incentive and heavily penalized separation slack in
//! voting mode. Constraints: exact kinematics (implicit in the speed
//! encoding), acceleration and speed bounds, gap safety against the
//! predicted leader, the red-stop rule with its anti-jump term, passage
//! flags with monotone-passage and follower cuts, white-phase group
//! separation against conflicting groups, and the lane's signal rules when
//! the signal window is free.

use crate::milp::{LinearProgram, Sense};
use crate::traffic::VehicleKind;

use super::signal_rows::{collect_signal_rows, LaneSignalVars, SignalSpace};
use super::trajectory_lp::{Expr, Gamma, SignalBlock, Term, TrajectoryLp};
use super::{separation_margin, BuiltProgram, ProgramError, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CavMode {
    /// The own lane's signal window is part of the decision (voting).
    SignalFreeVars,
    /// Signals pinned to the agreed schedule.
    SignalFixed,
}

pub fn build_cav_program(
    world: &World<'_>,
    lane: usize,
    idx: usize,
    mode: CavMode,
) -> Result<BuiltProgram, ProgramError> {
    let p = world.params;
    let scene = world.scene;
    let veh = world.lanes[lane].vehicles[idx];
    debug_assert_eq!(veh.kind, VehicleKind::Cav);
    let b = scene.stop_bar;
    let horizon = p.horizon_steps();
    let dest = scene.lanes[lane].destination;

    let mut lp = LinearProgram::new();
    let mut tl = TrajectoryLp::new(&mut lp, world.t0, veh.x, veh.v, horizon, p, b, true);
    tl.add_progress_objective(&mut lp, dest);
    let lam = tl.add_comfort_split(&mut lp, p.comfort_weight);

    // Gap safety against the predicted leader.
    let leader = idx
        .checked_sub(1)
        .map(|i| world.lanes[lane].vehicles[i])
        .and_then(|lv| world.shared_of(lv.id).map(|tr| (lv, tr)));
    if let Some((_, lead_tr)) = &leader {
        let margin = p.same_lane_gap + p.vehicle_length;
        for t in 1..=horizon {
            let lead_x = lead_tr.x_at(world.t0 + t as u64);
            // Vacuous when even the fastest reach stays clear.
            if lead_x - tl.env.x_max[t] >= margin + p.cav_reaction * p.speed_max {
                continue;
            }
            let mut e = tl.x_expr(t).clone();
            e.push(tl.map.v[t - 1], p.cav_reaction);
            e.emit(&mut lp, Sense::Le, lead_x - margin);
        }
    }

    let passed_at_snapshot = veh.x > b;
    if passed_at_snapshot {
        // Passed but still on the lane: kinematics, bounds, and gap safety
        // only; the signal and separation machinery is inert.
        let map = tl.map.clone();
        let warm = warm_from_shared(world, &lp, &map, &lam, veh.id);
        return Ok(BuiltProgram { lp, map, warm });
    }

    // Passage flags gated by the predecessor's predicted passage.
    let leader_gate = leader
        .as_ref()
        .map(|(_, tr)| move |t: u64| tr.passed_at(t));
    match &leader_gate {
        Some(f) => tl.add_gamma(&mut lp, Some(f)),
        None => tl.add_gamma(&mut lp, None),
    }

    // Own-lane signal variables in voting mode.
    let n0 = world.n0();
    let window = world.window();
    let signal_vars = match mode {
        CavMode::SignalFixed => None,
        CavMode::SignalFreeVars => {
            let g: Vec<usize> = (0..window).map(|n| lp.add_binary(format!("g_{n}"))).collect();
            let w: Vec<usize> = (0..window).map(|n| lp.add_binary(format!("w_{n}"))).collect();
            let y: Vec<usize> = (0..window).map(|n| lp.add_binary(format!("y_{n}"))).collect();
            if world.no_white {
                for &c in &w {
                    lp.fix_var(c, 0.0);
                }
            } else {
                for &c in &w {
                    lp.obj(c, -p.white_incentive_weight);
                }
            }
            Some(LaneSignalVars { g, w, y })
        }
    };

    if let Some(vars) = &signal_vars {
        let mut spaces = vec![None; scene.lane_count()];
        spaces[lane] = Some(vars.clone());
        let space = SignalSpace {
            n0,
            window,
            view: world.signals,
            vars: spaces,
        };
        let gates: Vec<Vec<super::WhiteGate>> = (0..scene.lane_count())
            .map(|l| (0..window).map(|n| world.white_gate(l, n0 + n as u64)).collect())
            .collect();
        for row in collect_signal_rows(scene, p, &space, &gates) {
            row.expr.emit(&mut lp, row.sense, row.rhs);
        }
        // Priority: adopt unpassed predecessors' votes for this lane.
        add_priority_rows(world, lane, idx, &mut lp, vars, n0);
    }

    // Red-stop with the anti-jump term and passage relief.
    let own_signal_term = |n: u64, lp_w: bool| -> Term {
        // Green+white relief of the red-stop rule; in voting mode the own
        // lane's window steps are variables.
        match &signal_vars {
            Some(vars) if n >= n0 && ((n - n0) as usize) < window => {
                let off = (n - n0) as usize;
                Term::Var(if lp_w { vars.w[off] } else { vars.g[off] })
            }
            _ => {
                let ind = if n >= n0 + window as u64 {
                    crate::traffic::Indication::Red
                } else {
                    world.signals.at(lane, n)
                };
                Term::Const(if lp_w { ind.w() } else { ind.g() } as u8 as f64)
            }
        }
    };
    let m_stop = (tl.env.x_max[horizon] + p.traj_step * p.speed_max - (b - p.stopbar_gap)).max(10.0);
    for t in 1..=horizon {
        let gamma = tl.gamma_term(t);
        if gamma == Term::Const(1.0) {
            continue;
        }
        let n = world.signal_step_of(world.t0 + t as u64);
        let g_term = own_signal_term(n, false);
        let w_term = own_signal_term(n, true);
        if g_term == Term::Const(1.0) || w_term == Term::Const(1.0) {
            continue;
        }
        // The linear anti-jump term alone leaves a within-step quadratic
        // advance of up to a_max dt^2 / 2 uncovered, which would let a
        // crawling vehicle slip past the line in one step; widen the
        // buffer by that amount.
        let jump_pad = 0.5 * p.accel_max * p.traj_step * p.traj_step;
        // Vacuous when the fastest reach still stops short.
        if tl.env.x_max[t] + p.traj_step * tl.env.v_max[t] + jump_pad <= b - p.stopbar_gap {
            continue;
        }
        // x_t + dt v_t - M(g + w + gamma) <= b - S - pad
        let mut e = tl.x_expr(t).clone();
        e.push(tl.map.v[t - 1], p.traj_step);
        g_term.push_into(&mut e, -m_stop);
        w_term.push_into(&mut e, -m_stop);
        gamma.push_into(&mut e, -m_stop);
        e.emit(&mut lp, Sense::Le, b - p.stopbar_gap - jump_pad);
    }

    // White-phase separation against conflicting groups.
    add_separation_rows(world, lane, &mut lp, &mut tl, &signal_vars, n0, window);

    let mut map = tl.map;
    if let Some(vars) = &signal_vars {
        map.signal = Some(SignalBlock {
            lane,
            n0,
            g: vars.g.iter().map(|&c| Term::Var(c)).collect(),
            w: vars.w.iter().map(|&c| Term::Var(c)).collect(),
            y: vars.y.iter().map(|&c| Term::Var(c)).collect(),
        });
    }
    let warm = if mode == CavMode::SignalFixed {
        warm_from_shared(world, &lp, &map, &lam, veh.id)
    } else {
        None
    };
    Ok(BuiltProgram { lp, map, warm })
}

/// Votes of unpassed predecessors pin the lane's activation window.
pub(crate) fn add_priority_rows(
    world: &World<'_>,
    lane: usize,
    idx: usize,
    lp: &mut LinearProgram,
    vars: &LaneSignalVars,
    n0: u64,
) {
    for pred in 0..idx {
        let pv = world.lanes[lane].vehicles[pred];
        let Some(vote) = world.votes.get(&pv.id) else {
            continue;
        };
        for n in 0..vars.g.len().min(vote.g.len()) {
            let t_n = world.traj_step_of(n0 + n as u64);
            if world.passed_at(lane, pred, t_n) {
                continue;
            }
            if vote.g[n] {
                lp.add_row(vec![(vars.g[n], 1.0)], Sense::Ge, 1.0);
            }
            if vote.w[n] {
                lp.add_row(vec![(vars.w[n], 1.0)], Sense::Ge, 1.0);
            }
        }
    }
}

/// Split variables for `|x_t - c|` with tight bounds and an optional sign
/// binary when the sign is genuinely undecided.
struct AbsSplit {
    plus: usize,
    minus: usize,
}

fn abs_split(
    lp: &mut LinearProgram,
    tl: &TrajectoryLp,
    t: usize,
    c: f64,
    tag: &str,
    gamma: Term,
    prev_sign: &mut Option<usize>,
) -> AbsSplit {
    let up = (tl.env.x_max[t] - c).max(0.0);
    let dn = (c - tl.env.x_min[t]).max(0.0);
    let plus = lp.add_var(format!("{tag}_p_{t}"), 0.0, up);
    let minus = lp.add_var(format!("{tag}_m_{t}"), 0.0, dn);
    // plus - minus = x_t - c
    let mut e = Expr::term(plus, 1.0);
    e.push(minus, -1.0);
    e.add(tl.x_expr(t), -1.0);
    e.emit(lp, Sense::Eq, -c);
    if up > 1e-9 && dn > 1e-9 {
        let s = lp.add_binary(format!("{tag}_s_{t}"));
        lp.add_row(vec![(plus, 1.0), (s, -up)], Sense::Le, 0.0);
        lp.add_row(vec![(minus, 1.0), (s, dn)], Sense::Le, dn);
        // Positions never decrease, so the sign flips at most once; and
        // being past the conflict point implies being past the stop bar.
        if let Some(prev) = *prev_sign {
            lp.add_row(vec![(prev, 1.0), (s, -1.0)], Sense::Le, 0.0);
        }
        if let Term::Var(gcol) = gamma {
            lp.add_row(vec![(s, 1.0), (gcol, -1.0)], Sense::Le, 0.0);
        }
        *prev_sign = Some(s);
    } else {
        *prev_sign = None;
    }
    AbsSplit { plus, minus }
}

fn add_separation_rows(
    world: &World<'_>,
    lane: usize,
    lp: &mut LinearProgram,
    tl: &mut TrajectoryLp,
    signal_vars: &Option<LaneSignalVars>,
    n0: u64,
    window: usize,
) {
    let p = world.params;
    let scene = world.scene;
    let horizon = tl.map.horizon;
    let margin = separation_margin(p);
    let m_sep = p.max_group_length + p.vehicle_length + margin + 50.0;
    let mut slack_cols: Vec<usize> = Vec::new();

    for &jid in scene.conflicting(crate::scene::LaneId(lane)) {
        let j = jid.0;
        let f_own = scene.conflict_point(crate::scene::LaneId(lane), jid);
        let f_their = scene.conflict_point(jid, crate::scene::LaneId(lane));
        let mut head_sign: Option<usize> = None;
        let mut tail_sign: Option<usize> = None;
        let mut splits: Option<(AbsSplit, AbsSplit)>;
        for t in 1..=horizon {
            let gamma = tl.gamma_term(t);
            if gamma == Term::Const(0.0) {
                continue;
            }
            let n = world.signal_step_of(world.t0 + t as u64);
            // Own white term: variable in voting mode within the window.
            let w_own: Term = match signal_vars {
                Some(vars) if n >= n0 && ((n - n0) as usize) < window => {
                    Term::Var(vars.w[(n - n0) as usize])
                }
                _ => {
                    let ind = if n >= n0 + window as u64 {
                        crate::traffic::Indication::Red
                    } else {
                        world.signals.at(lane, n)
                    };
                    Term::Const(ind.w() as u8 as f64)
                }
            };
            if w_own == Term::Const(0.0) {
                continue;
            }
            // Conflicting lane's white is always context here.
            let w_their = {
                let ind = if n >= n0 + window as u64 {
                    crate::traffic::Indication::Red
                } else {
                    world.signals.at(j, n)
                };
                ind.w()
            };
            if !w_their {
                continue;
            }
            splits = None;
            for group in &world.lanes[j].groups {
                let Some(geo) = world.group_geometry(group, world.t0 + t as u64) else {
                    continue;
                };
                if !geo.leader_passed {
                    continue;
                }
                let k = (geo.head - f_their).abs() + (geo.tail - f_their).abs();
                let rhs_base = geo.length + p.vehicle_length + margin - k;
                if rhs_base <= 1e-9 {
                    continue;
                }
                let (head, tail) = splits.get_or_insert_with(|| {
                    let head = abs_split(lp, tl, t, f_own, &format!("sep{j}h"), gamma, &mut head_sign);
                    let tail = abs_split(
                        lp,
                        tl,
                        t,
                        f_own + p.vehicle_length,
                        &format!("sep{j}t"),
                        gamma,
                        &mut tail_sign,
                    );
                    (head, tail)
                });
                let delta = lp.add_var(
                    format!("delta_{j}_{t}_{}", group.leader().0),
                    0.0,
                    world.slack_cap,
                );
                lp.obj(delta, p.slack_penalty);
                slack_cols.push(delta);
                let mut e = Expr::term(head.plus, 1.0);
                e.push(head.minus, 1.0);
                e.push(tail.plus, 1.0);
                e.push(tail.minus, 1.0);
                e.push(delta, 1.0);
                gamma.push_into(&mut e, m_sep);
                w_own.push_into(&mut e, m_sep);
                e.emit(lp, Sense::Ge, rhs_base + 2.0 * m_sep);
            }
        }
    }
    tl.map.slack = slack_cols;
}

/// Warm start rebuilt from the vehicle's own shared trajectory; columns
/// the map does not describe stay at an in-bounds default and the solver
/// validates the whole vector before adopting it.
fn warm_from_shared(
    world: &World<'_>,
    lp: &LinearProgram,
    map: &super::VarMap,
    lam: &[(usize, usize)],
    id: crate::traffic::VehicleId,
) -> Option<Vec<f64>> {
    let tr = world.shared_of(id)?;
    if tr.start_step > map.t0 {
        return None;
    }
    let mut x = vec![0.0; lp.variables.len()];
    for (i, v) in lp.variables.iter().enumerate() {
        let def = if v.lower.is_finite() { v.lower } else { 0.0 };
        x[i] = def.min(if v.upper.is_finite() { v.upper } else { def });
    }
    let mut prev_v = map.v0;
    for t in 1..=map.horizon {
        let step = map.t0 + t as u64;
        let off = (step - tr.start_step) as usize;
        let v = if off < tr.v.len() { tr.v[off] } else { prev_v };
        let v = v.clamp(world.params.speed_min, world.params.speed_max);
        x[map.v[t - 1]] = v;
        if t - 1 < lam.len() {
            let dv = v - prev_v;
            x[lam[t - 1].0] = dv.max(0.0);
            x[lam[t - 1].1] = (-dv).max(0.0);
        }
        prev_v = v;
    }
    // Passage flags from the positions implied by the warm speeds.
    let mut pos = map.x0;
    let mut prev = map.v0;
    for t in 1..=map.horizon {
        let v = x[map.v[t - 1]];
        pos += 0.5 * map.dt * (prev + v);
        prev = v;
        if let Some(Gamma::Var(c)) = map.gamma.get(t - 1).copied() {
            x[c] = (pos > map.stop_bar) as u8 as f64;
        }
    }
    Some(x)
}
