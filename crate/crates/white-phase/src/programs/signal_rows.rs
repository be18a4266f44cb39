//! Signal-timing constraint rows over a decision window, shared by the
//! per-vehicle voting programs (one lane variable, the rest constants) and
//! the vote-aggregation program (every lane variable).
//!
//! Windows that straddle the decision boundary fold the applied history in
//! as constants; windows that would extend past the horizon are truncated
//! to "hold until the horizon end", which the next receding-horizon step
//! re-imposes through the history constants.

use crate::milp::Sense;
use crate::scene::{IntersectionScene, LaneId, Parameters};
use crate::traffic::Indication;

use super::trajectory_lp::{Expr, Term};
use super::SignalView;

/// White-initiation gate per lane-step, derived from the shared passage
/// predictions: white may start only behind a CAV, may only continue while
/// the first unpassed vehicle is a grouped CHV, and is off entirely while
/// it is an ungrouped CHV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhiteGate {
    Free,
    ContinueOnly,
    Blocked,
}

/// Signal terms for the decision window: either variables of a lane under
/// optimization or constants from the assumed context.
pub struct SignalSpace<'a> {
    pub n0: u64,
    pub window: usize,
    pub view: SignalView<'a>,
    /// Variable triples (g, w, y) per window step for optimized lanes.
    pub vars: Vec<Option<LaneSignalVars>>,
}

#[derive(Debug, Clone)]
pub struct LaneSignalVars {
    pub g: Vec<usize>,
    pub w: Vec<usize>,
    pub y: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    G,
    W,
    Y,
}

impl<'a> SignalSpace<'a> {
    fn term(&self, lane: usize, n: i64, kind: Kind) -> Term {
        if n < 0 {
            return Term::Const(0.0);
        }
        let n = n as u64;
        let off = n.wrapping_sub(self.n0) as usize;
        if n >= self.n0 && off < self.window {
            if let Some(vars) = &self.vars[lane] {
                return Term::Var(match kind {
                    Kind::G => vars.g[off],
                    Kind::W => vars.w[off],
                    Kind::Y => vars.y[off],
                });
            }
        }
        let ind = if n >= self.n0 + self.window as u64 {
            Indication::Red
        } else {
            self.view.at(lane, n)
        };
        Term::Const(match kind {
            Kind::G => ind.g() as u8 as f64,
            Kind::W => ind.w() as u8 as f64,
            Kind::Y => ind.y() as u8 as f64,
        })
    }

    pub fn g(&self, lane: usize, n: i64) -> Term {
        self.term(lane, n, Kind::G)
    }

    pub fn w(&self, lane: usize, n: i64) -> Term {
        self.term(lane, n, Kind::W)
    }

    pub fn y(&self, lane: usize, n: i64) -> Term {
        self.term(lane, n, Kind::Y)
    }
}

/// One generated constraint with its family tag.
pub struct PendingRow {
    pub family: &'static str,
    pub expr: Expr,
    pub sense: Sense,
    pub rhs: f64,
}

impl PendingRow {
    pub fn violated_by(&self, x: &[f64], tol: f64) -> bool {
        let v = self.expr.eval(x);
        match self.sense {
            Sense::Le => v > self.rhs + tol,
            Sense::Ge => v < self.rhs - tol,
            Sense::Eq => (v - self.rhs).abs() > tol,
        }
    }
}

fn push(out: &mut Vec<PendingRow>, family: &'static str, expr: Expr, sense: Sense, rhs: f64) {
    // Instances whose terms are all context constants carry no decision
    // content; the assumed context may legitimately fail truncated-window
    // instances (for example a red extension beyond the plan), so they are
    // dropped rather than asserted. Instances that no 0/1 assignment can
    // violate are dropped as vacuous.
    if expr.terms.is_empty() {
        return;
    }
    let lo: f64 = expr.constant + expr.terms.iter().map(|&(_, a)| a.min(0.0)).sum::<f64>();
    let hi: f64 = expr.constant + expr.terms.iter().map(|&(_, a)| a.max(0.0)).sum::<f64>();
    let vacuous = match sense {
        Sense::Le => hi <= rhs + 1e-9,
        Sense::Ge => lo >= rhs - 1e-9,
        Sense::Eq => (lo - rhs).abs() <= 1e-9 && (hi - rhs).abs() <= 1e-9,
    };
    if vacuous {
        return;
    }
    out.push(PendingRow {
        family,
        expr,
        sense,
        rhs,
    });
}

/// Generates every signal-rule instance whose support intersects the
/// optimized lanes of `space`. `gates` holds the white gate per lane and
/// window step; `relevant` restricts pair families to instances touching
/// at least one optimized lane.
pub fn collect_signal_rows(
    scene: &IntersectionScene,
    params: &Parameters,
    space: &SignalSpace<'_>,
    gates: &[Vec<WhiteGate>],
) -> Vec<PendingRow> {
    let mut out = Vec::new();
    let n0 = space.n0 as i64;
    let window = space.window as i64;
    let end = n0 + window; // exclusive
    let lanes = scene.lane_count();
    let optimized = |l: usize| space.vars[l].is_some();
    let ys = params.signal_steps_of(params.yellow) as i64;
    let rs = params.signal_steps_of(params.all_red) as i64;
    let gmax = params.signal_steps_of(params.max_green) as i64;

    // Exactly one of green/white/yellow/red per lane-step.
    for l in (0..lanes).filter(|&l| optimized(l)) {
        for n in n0..end {
            let mut e = Expr::default();
            space.g(l, n).push_into(&mut e, 1.0);
            space.w(l, n).push_into(&mut e, 1.0);
            space.y(l, n).push_into(&mut e, 1.0);
            push(&mut out, "one-hot", e, Sense::Le, 1.0);
        }
    }

    // Conflicting green-green / green-white exclusion.
    for l in 0..lanes {
        for &lp in scene.conflicting(LaneId(l)) {
            let lp = lp.0;
            if !optimized(l) && !optimized(lp) {
                continue;
            }
            for n in n0..end {
                let mut e = Expr::default();
                space.g(l, n).push_into(&mut e, 1.0);
                space.g(lp, n).push_into(&mut e, 1.0);
                space.w(lp, n).push_into(&mut e, 1.0);
                push(&mut out, "conflicting-activation", e, Sense::Le, 1.0);
            }
        }
    }

    // Minimum active time after red-to-green, minimum white after
    // red-to-white, with history triggers and truncated windows.
    for l in (0..lanes).filter(|&l| optimized(l)) {
        let kind = scene.lanes[l].movement;
        let g_min = params.signal_steps_of(params.min_active(kind)) as i64;
        let w_min = params.signal_steps_of(params.min_white(kind)) as i64;
        for n in (n0 - g_min)..(end - 1) {
            let hi = (n + g_min).min(end - 1);
            if hi < n0 {
                continue;
            }
            let count = hi - n; // steps in [n+1, hi]
            let mut e = Expr::default();
            for z in (n + 1)..=hi {
                space.g(l, z).push_into(&mut e, 1.0);
                space.w(l, z).push_into(&mut e, 1.0);
            }
            space.g(l, n + 1).push_into(&mut e, -(count as f64));
            space.g(l, n).push_into(&mut e, count as f64);
            push(&mut out, "min-active", e, Sense::Ge, 0.0);
        }
        for n in (n0 - w_min)..(end - 1) {
            let hi = (n + w_min).min(end - 1);
            if hi < n0 {
                continue;
            }
            let count = hi - n;
            let mut e = Expr::default();
            for z in (n + 1)..=hi {
                space.w(l, z).push_into(&mut e, 1.0);
            }
            // Trigger: white starts from neither green nor white.
            space.w(l, n + 1).push_into(&mut e, -(count as f64));
            space.g(l, n).push_into(&mut e, count as f64);
            space.w(l, n).push_into(&mut e, count as f64);
            push(&mut out, "min-white", e, Sense::Ge, 0.0);
        }

        // Maximum green over any sliding window of gmax + 1 steps.
        for n in (n0 - gmax)..end {
            let hi = (n + gmax).min(end - 1);
            if hi < n0 {
                continue;
            }
            let mut e = Expr::default();
            for z in n..=hi {
                space.g(l, z).push_into(&mut e, 1.0);
            }
            // Vacuous once the reachable sum cannot exceed the cap.
            if e.terms.len() as f64 + e.constant <= gmax as f64 {
                continue;
            }
            push(&mut out, "max-green", e, Sense::Le, gmax as f64);
        }

        // Yellow duration cap over windows of ys + 1 steps.
        for n in (n0 - ys)..end {
            let hi = (n + ys).min(end - 1);
            if hi < n0 {
                continue;
            }
            let mut e = Expr::default();
            for z in n..=hi {
                space.y(l, z).push_into(&mut e, 1.0);
            }
            if e.terms.len() as f64 + e.constant <= ys as f64 {
                continue;
            }
            push(&mut out, "yellow-duration", e, Sense::Le, ys as f64);
        }

        // Yellow must run after green or white terminates into red.
        for n in (n0 - ys - 1)..(end - 1) {
            let hi = (n + ys).min(end - 1);
            if hi <= n {
                continue;
            }
            let count = hi - n;
            for (fam, a, b) in [("yellow-after-green", Kind::G, Kind::W), ("yellow-after-white", Kind::W, Kind::G)] {
                let mut e = Expr::default();
                for z in (n + 1)..=hi {
                    space.y(l, z).push_into(&mut e, 1.0);
                }
                space.term(l, n, a).push_into(&mut e, -(count as f64));
                space.term(l, n + 1, a).push_into(&mut e, count as f64);
                space.term(l, n + 1, b).push_into(&mut e, count as f64);
                push(&mut out, fam, e, Sense::Ge, 0.0);
            }
        }

        // No spontaneous yellow: yellow only follows green, white, yellow.
        for n in n0..end {
            let mut e = Expr::default();
            space.y(l, n).push_into(&mut e, 1.0);
            space.g(l, n - 1).push_into(&mut e, -1.0);
            space.w(l, n - 1).push_into(&mut e, -1.0);
            space.y(l, n - 1).push_into(&mut e, -1.0);
            push(&mut out, "spontaneous-yellow", e, Sense::Le, 0.0);
        }
    }

    // All-red clearance around yellows, per ordered conflicting pair.
    for l in 0..lanes {
        for &lpid in scene.conflicting(LaneId(l)) {
            let lp = lpid.0;
            if !optimized(l) && !optimized(lp) {
                continue;
            }
            for n in n0..end {
                let hi = (n + rs - 1).min(end - 1);
                let mut e = Expr::default();
                for z in n..=hi {
                    space.g(l, z).push_into(&mut e, 1.0);
                    space.g(lp, z).push_into(&mut e, 1.0);
                    space.w(l, z).push_into(&mut e, 1.0);
                    space.w(lp, z).push_into(&mut e, 1.0);
                }
                space.y(l, n).push_into(&mut e, -2.0 * rs as f64);
                space.y(lp, n - 1).push_into(&mut e, 2.0 * rs as f64);
                push(&mut out, "all-red-clearance", e, Sense::Le, 2.0 * rs as f64);
            }
            // Green-to-white handoff on `lp` keeps `l` out of white for the
            // clearance interval.
            for n in (n0 - 1)..(end - 1) {
                let hi = (n + rs).min(end - 1);
                if hi <= n {
                    continue;
                }
                let count = hi - n;
                let mut e = Expr::default();
                for z in (n + 1)..=hi {
                    space.w(l, z).push_into(&mut e, 1.0);
                }
                space.g(lp, n).push_into(&mut e, count as f64);
                space.w(lp, n + 1).push_into(&mut e, count as f64);
                push(&mut out, "handoff-clearance", e, Sense::Le, 2.0 * count as f64);
            }
        }
    }

    // White gates from the shared passage predictions.
    for l in (0..lanes).filter(|&l| optimized(l)) {
        for n in n0..end {
            match gates[l][(n - n0) as usize] {
                WhiteGate::Free => {}
                WhiteGate::ContinueOnly => {
                    let mut e = Expr::default();
                    space.w(l, n).push_into(&mut e, 1.0);
                    space.w(l, n - 1).push_into(&mut e, -1.0);
                    push(&mut out, "white-initiation", e, Sense::Le, 0.0);
                }
                WhiteGate::Blocked => {
                    let mut e = Expr::default();
                    space.w(l, n).push_into(&mut e, 1.0);
                    push(&mut out, "white-blocked", e, Sense::Le, 0.0);
                }
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_mip, Budget, LinearProgram, MipStatus};
    use crate::scene::standard_four_leg;
    use crate::traffic::SignalSchedule;

    /// Builds a space where one lane is optimized against an all-red
    /// context and history.
    fn toy_space<'a>(
        lp: &mut LinearProgram,
        scene: &IntersectionScene,
        view: SignalView<'a>,
        lane: usize,
        window: usize,
    ) -> SignalSpace<'a> {
        let mut vars = vec![None; scene.lane_count()];
        let g = (0..window).map(|n| lp.add_binary(format!("g{n}"))).collect();
        let w = (0..window).map(|n| lp.add_binary(format!("w{n}"))).collect();
        let y = (0..window).map(|n| lp.add_binary(format!("y{n}"))).collect();
        vars[lane] = Some(LaneSignalVars { g, w, y });
        SignalSpace {
            n0: view.hist_end(),
            window,
            view,
            vars,
        }
    }

    #[test]
    fn min_active_forces_continuation() {
        let scene = standard_four_leg(1).unwrap();
        let params = Parameters::default();
        let lane = scene.lane_by_name("EB-T").unwrap().0;
        let history: Vec<Vec<Indication>> = vec![vec![Indication::Red; 4]; scene.lane_count()];
        let plan = SignalSchedule::all_red(4, scene.lane_count(), 10);
        let view = SignalView {
            history: &history,
            plan: &plan,
        };
        let mut lp = LinearProgram::new();
        let space = toy_space(&mut lp, &scene, view, lane, 10);
        let gates = vec![vec![WhiteGate::Free; 10]; scene.lane_count()];
        for row in collect_signal_rows(&scene, &params, &space, &gates) {
            row.expr.emit(&mut lp, row.sense, row.rhs);
        }
        // Force green at the first window step and reward turning it off:
        // minimum active time (6 steps for a through lane) must hold.
        let vars = space.vars[lane].as_ref().unwrap();
        lp.fix_var(vars.g[0], 1.0);
        for n in 1..10 {
            lp.obj(vars.g[n], 1.0);
            lp.obj(vars.w[n], 1.0);
        }
        let sol = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        let active: usize = (0..10)
            .map(|n| (sol.x[vars.g[n]] + sol.x[vars.w[n]] > 0.5) as usize)
            .sum();
        assert_eq!(active, 6, "active run should hold exactly the minimum");
    }

    #[test]
    fn conflicting_green_context_blocks_own_green() {
        let scene = standard_four_leg(1).unwrap();
        let params = Parameters::default();
        let lane = scene.lane_by_name("EB-T").unwrap().0;
        let other = scene.lane_by_name("NB-T").unwrap().0;
        let history: Vec<Vec<Indication>> = vec![vec![Indication::Red; 4]; scene.lane_count()];
        let mut plan = SignalSchedule::all_red(4, scene.lane_count(), 10);
        for n in 0..4 {
            plan.lanes[other][n] = Indication::Green;
        }
        let view = SignalView {
            history: &history,
            plan: &plan,
        };
        let mut lp = LinearProgram::new();
        let space = toy_space(&mut lp, &scene, view, lane, 10);
        let gates = vec![vec![WhiteGate::Free; 10]; scene.lane_count()];
        for row in collect_signal_rows(&scene, &params, &space, &gates) {
            row.expr.emit(&mut lp, row.sense, row.rhs);
        }
        let vars = space.vars[lane].as_ref().unwrap();
        // Own green while the conflicting context is green: infeasible.
        lp.fix_var(vars.g[1], 1.0);
        let sol = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Infeasible);
    }

    #[test]
    fn white_gates_block_and_chain() {
        let scene = standard_four_leg(1).unwrap();
        let params = Parameters::default();
        let lane = scene.lane_by_name("EB-L").unwrap().0;
        let history: Vec<Vec<Indication>> = vec![vec![Indication::Red; 4]; scene.lane_count()];
        let plan = SignalSchedule::all_red(4, scene.lane_count(), 10);
        let view = SignalView {
            history: &history,
            plan: &plan,
        };
        let mut lp = LinearProgram::new();
        let space = toy_space(&mut lp, &scene, view, lane, 10);
        let mut gates = vec![vec![WhiteGate::Free; 10]; scene.lane_count()];
        // White can never initiate behind a continue-only gate that starts
        // from red history.
        gates[lane] = vec![WhiteGate::ContinueOnly; 10];
        for row in collect_signal_rows(&scene, &params, &space, &gates) {
            row.expr.emit(&mut lp, row.sense, row.rhs);
        }
        let vars = space.vars[lane].as_ref().unwrap();
        for n in 0..10 {
            lp.obj(vars.w[n], -1.0);
        }
        let sol = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.value, 0.0, "white must stay off behind the gate");
    }
}
