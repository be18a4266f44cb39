//! The CHV voting program: trajectory tied to the car-following model,
//! signal window free.
//!
//! The model value `d_t` is encoded exactly: the inner min is pinned from
//! above by one row per candidate (optimization pressure pushes it up to
//! the smallest), and the outer max is selected by indicator binaries so
//! the model value cannot float above its true value. The acceleration is
//! coupled to the model by `a_t >= d_t` plus a tracking penalty that
//! telescopes to the final speed, which drives `a_t = d_t` at any optimum.

use crate::chv::SIGNAL_RELIEF;
use crate::milp::{LinearProgram, Sense};
use crate::traffic::{Indication, VehicleKind};

use super::cav::add_priority_rows;
use super::signal_rows::{collect_signal_rows, LaneSignalVars, SignalSpace};
use super::trajectory_lp::{Expr, SignalBlock, Term, TrajectoryLp};
use super::{BuiltProgram, ProgramError, Vote, World};

/// Penalty coefficient binding the acceleration to the model value; must
/// dominate the progress sensitivity to one acceleration unit.
const TRACKING_PENALTY: f64 = 1.0e4;

pub fn build_chv_vote_program(
    world: &World<'_>,
    lane: usize,
    idx: usize,
) -> Result<BuiltProgram, ProgramError> {
    build_chv_program(world, lane, idx, true)
}

/// `voting = false` pins the signal window to the context; used by the
/// encoding-fidelity checks and by prediction cross-audits.
pub fn build_chv_program(
    world: &World<'_>,
    lane: usize,
    idx: usize,
    voting: bool,
) -> Result<BuiltProgram, ProgramError> {
    let p = world.params;
    let scene = world.scene;
    let veh = world.lanes[lane].vehicles[idx];
    debug_assert_eq!(veh.kind, VehicleKind::Chv);
    let b = scene.stop_bar;
    let horizon = p.horizon_steps();
    let dt = p.traj_step;
    let dest = scene.lanes[lane].destination;

    let mut lp = LinearProgram::new();
    let mut tl = TrajectoryLp::new(&mut lp, world.t0, veh.x, veh.v, horizon, p, b, true);
    tl.add_progress_objective(&mut lp, dest);

    let leader = idx
        .checked_sub(1)
        .map(|i| world.lanes[lane].vehicles[i])
        .and_then(|lv| world.shared_of(lv.id));
    let gate = leader.map(|tr| move |t: u64| tr.passed_at(t));
    match &gate {
        Some(f) if veh.x <= b => tl.add_gamma(&mut lp, Some(f)),
        _ => tl.add_gamma(&mut lp, None),
    }

    let n0 = world.n0();
    let window = world.window();
    let signal_vars = if voting {
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
    } else {
        None
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
        add_priority_rows(world, lane, idx, &mut lp, vars, n0);
    }

    // Signal terms per step: variables inside the window when voting,
    // context constants otherwise.
    let gw_term = |t: usize, white: bool| -> Term {
        let n = world.signal_step_of(world.t0 + t as u64);
        match &signal_vars {
            Some(vars) if n >= n0 && ((n - n0) as usize) < window => {
                let off = (n - n0) as usize;
                Term::Var(if white { vars.w[off] } else { vars.g[off] })
            }
            _ => {
                let ind = if n >= n0 + window as u64 {
                    Indication::Red
                } else {
                    world.signals.at(lane, n)
                };
                Term::Const(if white { ind.w() } else { ind.g() } as u8 as f64)
            }
        }
    };

    // Tracking objective: sum (a_t - d_t) telescopes to (v_H - v0)/dt
    // minus the model values.
    lp.obj(*tl.map.v.last().unwrap(), TRACKING_PENALTY / dt);
    lp.objective_constant -= TRACKING_PENALTY * tl.map.v0 / dt;

    for t in 0..horizon {
        // Candidate expressions at step t (state sampled at t).
        let v_term = tl.v_term(t);
        let x_expr = tl.x_expr(t).clone();
        let (v_lo, v_hi) = (tl.env.v_min[t], tl.env.v_max[t]);
        let (x_lo, x_hi) = (tl.env.x_min[t], tl.env.x_max[t]);
        let gamma = if t == 0 {
            Term::Const((veh.x > b) as u8 as f64)
        } else {
            tl.gamma_term(t)
        };

        // Inner min candidates: cap, speed-limit row, follow, signal.
        struct Cand {
            expr: Expr,
            lo: f64,
            hi: f64,
        }
        let mut inner: Vec<Cand> = Vec::new();
        inner.push(Cand {
            expr: Expr::constant(p.accel_max),
            lo: p.accel_max,
            hi: p.accel_max,
        });
        {
            let mut e = Expr::constant(p.speed_max / dt);
            v_term.push_into(&mut e, -1.0 / dt);
            inner.push(Cand {
                expr: e,
                lo: (p.speed_max - v_hi) / dt,
                hi: (p.speed_max - v_lo) / dt,
            });
        }
        if let Some(lead) = leader {
            let step = world.t0 + t as u64;
            let lx = lead.x_at(step);
            let lv = (lead.x_at(step + 1) - lx) / dt;
            // alpha1 (v_l - v) + alpha2 ((x_l - x - L) - D - v tau)
            let mut e = Expr::constant(
                p.alpha1 * lv + p.alpha2 * (lx - p.vehicle_length - p.same_lane_gap),
            );
            v_term.push_into(&mut e, -(p.alpha1 + p.alpha2 * p.chv_reaction));
            e.add(&x_expr, -p.alpha2);
            let k = p.alpha1 + p.alpha2 * p.chv_reaction;
            let base = p.alpha1 * lv + p.alpha2 * (lx - p.vehicle_length - p.same_lane_gap);
            inner.push(Cand {
                lo: base - k * v_hi - p.alpha2 * x_hi,
                hi: base - k * v_lo - p.alpha2 * x_lo,
                expr: e,
            });
        }
        {
            let g = gw_term(t, false);
            let w = gw_term(t, true);
            // alpha1 ((w+g) vmax - v) + alpha2 ((b - x) - (1-w-g) S) + M gamma
            let mut e = Expr::constant(p.alpha2 * (b - p.stopbar_gap));
            g.push_into(&mut e, p.alpha1 * p.speed_max + p.alpha2 * p.stopbar_gap);
            w.push_into(&mut e, p.alpha1 * p.speed_max + p.alpha2 * p.stopbar_gap);
            v_term.push_into(&mut e, -p.alpha1);
            e.add(&x_expr, -p.alpha2);
            gamma.push_into(&mut e, SIGNAL_RELIEF);
            let gw_lo = match (g, w) {
                (Term::Const(a), Term::Const(b)) => a + b,
                (Term::Const(a), _) | (_, Term::Const(a)) => a,
                _ => 0.0,
            };
            let gw_hi = match (g, w) {
                (Term::Const(a), Term::Const(b)) => a + b,
                _ => 1.0,
            };
            let gam_lo = match gamma {
                Term::Const(v) => v,
                _ => 0.0,
            };
            let gam_hi = match gamma {
                Term::Const(v) => v,
                _ => 1.0,
            };
            let coef = p.alpha1 * p.speed_max + p.alpha2 * p.stopbar_gap;
            let base = p.alpha2 * (b - p.stopbar_gap);
            inner.push(Cand {
                lo: base + coef * gw_lo - p.alpha1 * v_hi - p.alpha2 * x_hi
                    + SIGNAL_RELIEF * gam_lo,
                hi: base + coef * gw_hi - p.alpha1 * v_lo - p.alpha2 * x_lo
                    + SIGNAL_RELIEF * gam_hi,
                expr: e,
            });
        }

        let m_lo = inner.iter().map(|c| c.lo).fold(f64::INFINITY, f64::min) - 1.0;
        let m_col = lp.add_var(format!("m_{t}"), m_lo, p.accel_max);
        for c in &inner {
            // m <= candidate.
            let mut e = Expr::term(m_col, 1.0);
            e.add(&c.expr, -1.0);
            e.emit(&mut lp, Sense::Le, 0.0);
        }
        let m_hi = inner.iter().map(|c| c.hi).fold(f64::INFINITY, f64::min);

        // Outer max candidates: floor, stop row, inner min.
        let mut outer: Vec<Cand> = Vec::new();
        outer.push(Cand {
            expr: Expr::constant(p.accel_min),
            lo: p.accel_min,
            hi: p.accel_min,
        });
        {
            let mut e = Expr::constant(p.speed_min / dt);
            v_term.push_into(&mut e, -1.0 / dt);
            outer.push(Cand {
                expr: e,
                lo: (p.speed_min - v_hi) / dt,
                hi: (p.speed_min - v_lo) / dt,
            });
        }
        outer.push(Cand {
            expr: Expr::term(m_col, 1.0),
            lo: m_lo,
            hi: m_hi,
        });

        let d_col = lp.add_var(format!("d_{t}"), p.accel_min, p.accel_max);
        lp.obj(d_col, -TRACKING_PENALTY);
        // a_t >= d_t: (v_{t+1} - v_t)/dt - d >= 0.
        {
            let mut e = Expr::default();
            e.push(tl.map.v[t], 1.0 / dt);
            match tl.v_term(t) {
                Term::Const(v0) => e.constant -= v0 / dt,
                Term::Var(c) => e.push(c, -1.0 / dt),
            }
            e.push(d_col, -1.0);
            e.emit(&mut lp, Sense::Ge, 0.0);
        }
        for c in &outer {
            // d >= candidate.
            let mut e = Expr::term(d_col, 1.0);
            e.add(&c.expr, -1.0);
            e.emit(&mut lp, Sense::Ge, 0.0);
        }
        // Selector binaries pin d to the active maximum; candidates that
        // can never reach the maximum are pruned by their intervals.
        let best_lo = outer.iter().map(|c| c.lo).fold(f64::NEG_INFINITY, f64::max);
        let viable: Vec<&Cand> = outer.iter().filter(|c| c.hi >= best_lo - 1e-9).collect();
        if viable.len() == 1 {
            let mut e = Expr::term(d_col, 1.0);
            e.add(&viable[0].expr, -1.0);
            e.emit(&mut lp, Sense::Le, 0.0);
        } else {
            let max_hi = viable.iter().map(|c| c.hi).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = Expr::default();
            for (k, c) in viable.iter().enumerate() {
                let pi = lp.add_binary(format!("pi_{t}_{k}"));
                sum.push(pi, 1.0);
                let big = (max_hi - c.lo).max(1.0) + 1.0;
                let mut e = Expr::term(d_col, 1.0);
                e.add(&c.expr, -1.0);
                e.push(pi, big);
                e.emit(&mut lp, Sense::Le, big);
            }
            sum.emit(&mut lp, Sense::Eq, 1.0);
        }
    }

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
    Ok(BuiltProgram {
        lp,
        map,
        warm: None,
    })
}

/// When unpassed predecessors' votes pin every window step of the lane,
/// the vehicle's vote is fully determined and no solve is needed.
pub fn pinned_vote(world: &World<'_>, lane: usize, idx: usize) -> Option<Vote> {
    let window = world.window();
    let n0 = world.n0();
    let mut g = vec![false; window];
    let mut w = vec![false; window];
    for n in 0..window {
        let t_n = world.traj_step_of(n0 + n as u64);
        let mut pinned = false;
        for pred in 0..idx {
            let pv = world.lanes[lane].vehicles[pred];
            if world.passed_at(lane, pred, t_n) {
                continue;
            }
            let Some(vote) = world.votes.get(&pv.id) else {
                continue;
            };
            if n < vote.g.len() && vote.g[n] {
                g[n] = true;
                pinned = true;
            }
            if n < vote.w.len() && vote.w[n] {
                w[n] = true;
                pinned = true;
            }
        }
        if !pinned {
            return None;
        }
    }
    Some(Vote { g, w })
}
