//! Shared trajectory encoding for the per-vehicle programs.
//!
//! Speeds are the decision columns; positions are affine expressions over
//! the speed prefix (trapezoid form of the exact discrete kinematics), and
//! accelerations are scaled speed differences. Passage binaries exist only
//! over the steps where the stop bar is actually reachable; everything
//! outside that window is fixed by the reachability envelopes.

use crate::milp::{LinearProgram, Sense};
use crate::scene::Parameters;
use crate::traffic::Trajectory;

/// An affine expression over program columns.
#[derive(Debug, Clone, Default)]
pub struct Expr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(col: usize, coef: f64) -> Self {
        Expr {
            terms: vec![(col, coef)],
            constant: 0.0,
        }
    }

    pub fn push(&mut self, col: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((col, coef));
        }
    }

    pub fn add(&mut self, other: &Expr, scale: f64) {
        self.constant += other.constant * scale;
        for &(c, a) in &other.terms {
            self.push(c, a * scale);
        }
    }

    /// Emits `self (sense) rhs` as a program row with the constant folded.
    pub fn emit(&self, lp: &mut LinearProgram, sense: Sense, rhs: f64) {
        if self.terms.is_empty() {
            debug_assert!(
                match sense {
                    Sense::Le => self.constant <= rhs + 1e-6,
                    Sense::Ge => self.constant >= rhs - 1e-6,
                    Sense::Eq => (self.constant - rhs).abs() <= 1e-6,
                },
                "constant row violated: {} {:?} {}",
                self.constant,
                sense,
                rhs
            );
            return;
        }
        lp.add_row(self.terms.clone(), sense, rhs - self.constant);
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(c, a)| a * x[c]).sum::<f64>()
    }
}

/// Either a fixed binary value or a program column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    Const(f64),
    Var(usize),
}

impl Term {
    pub fn push_into(&self, expr: &mut Expr, coef: f64) {
        match *self {
            Term::Const(v) => expr.constant += v * coef,
            Term::Var(c) => expr.push(c, coef),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Term::Const(v) => v,
            Term::Var(c) => x[c],
        }
    }
}

/// Per-step reachability envelopes under the acceleration and speed bounds.
#[derive(Debug, Clone)]
pub struct Envelopes {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
}

pub fn reach_envelopes(x0: f64, v0: f64, horizon: usize, p: &Parameters) -> Envelopes {
    let dt = p.traj_step;
    let mut e = Envelopes {
        x_min: Vec::with_capacity(horizon + 1),
        x_max: Vec::with_capacity(horizon + 1),
        v_min: Vec::with_capacity(horizon + 1),
        v_max: Vec::with_capacity(horizon + 1),
    };
    let (mut xl, mut xh, mut vl, mut vh) = (x0, x0, v0, v0);
    e.x_min.push(xl);
    e.x_max.push(xh);
    e.v_min.push(vl);
    e.v_max.push(vh);
    for _ in 0..horizon {
        let al = p.accel_min.max((p.speed_min - vl) / dt);
        let ah = p.accel_max.min((p.speed_max - vh) / dt);
        xl += vl * dt + 0.5 * al * dt * dt;
        xh += vh * dt + 0.5 * ah * dt * dt;
        vl = (vl + al * dt).max(p.speed_min);
        vh = (vh + ah * dt).min(p.speed_max);
        e.x_min.push(xl);
        e.x_max.push(xh);
        e.v_min.push(vl);
        e.v_max.push(vh);
    }
    e
}

/// Passage-flag handling per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Fixed(bool),
    Var(usize),
}

impl Gamma {
    pub fn term(&self) -> Term {
        match *self {
            Gamma::Fixed(b) => Term::Const(b as u8 as f64),
            Gamma::Var(c) => Term::Var(c),
        }
    }
}

/// Decoding map from a solved assignment back to traffic objects.
#[derive(Debug, Clone)]
pub struct VarMap {
    pub t0: u64,
    pub horizon: usize,
    pub x0: f64,
    pub v0: f64,
    pub dt: f64,
    pub stop_bar: f64,
    /// Speed columns `v_1..=v_H`.
    pub v: Vec<usize>,
    /// Passage flags per step `1..=H`.
    pub gamma: Vec<Gamma>,
    /// Own-lane signal variables when voting, indexed by window step.
    pub signal: Option<SignalBlock>,
    /// Separation slack columns (diagnostics and the zero-slack audit).
    pub slack: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SignalBlock {
    pub lane: usize,
    pub n0: u64,
    pub g: Vec<Term>,
    pub w: Vec<Term>,
    pub y: Vec<Term>,
}

impl VarMap {
    pub fn extract_trajectory(&self, x: &[f64]) -> Trajectory {
        let speeds: Vec<f64> = self.v.iter().map(|&c| x[c]).collect();
        let mut accels = Vec::with_capacity(self.horizon);
        let mut prev = self.v0;
        for &v in &speeds {
            accels.push((v - prev) / self.dt);
            prev = v;
        }
        Trajectory::kinematic(self.t0, self.x0, self.v0, &accels, self.dt, self.stop_bar)
    }

    pub fn extract_vote(&self, x: &[f64]) -> Option<super::Vote> {
        let block = self.signal.as_ref()?;
        let to_bool = |t: &Term| t.eval(x) > 0.5;
        Some(super::Vote {
            g: block.g.iter().map(to_bool).collect(),
            w: block.w.iter().map(to_bool).collect(),
        })
    }

    pub fn max_slack(&self, x: &[f64]) -> f64 {
        self.slack.iter().map(|&c| x[c]).fold(0.0, f64::max)
    }
}

/// Builds the kinematic skeleton shared by every vehicle program:
/// speed columns, acceleration-bound rows, and position expressions.
pub struct TrajectoryLp {
    pub map: VarMap,
    pub env: Envelopes,
    /// Cached prefix expressions: `x_expr[t]` for `t` in `0..=H`.
    x_exprs: Vec<Expr>,
}

impl TrajectoryLp {
    pub fn new(
        lp: &mut LinearProgram,
        t0: u64,
        x0: f64,
        v0: f64,
        horizon: usize,
        p: &Parameters,
        stop_bar: f64,
        accel_rows: bool,
    ) -> Self {
        let dt = p.traj_step;
        let v: Vec<usize> = (1..=horizon)
            .map(|t| lp.add_var(format!("v_{t}"), p.speed_min, p.speed_max))
            .collect();
        if accel_rows {
            for t in 0..horizon {
                let mut e = Expr::default();
                e.push(v[t], 1.0);
                if t == 0 {
                    e.constant -= v0;
                } else {
                    e.push(v[t - 1], -1.0);
                }
                e.emit(lp, Sense::Le, p.accel_max * dt);
                e.emit(lp, Sense::Ge, p.accel_min * dt);
            }
        }
        let mut x_exprs = Vec::with_capacity(horizon + 1);
        x_exprs.push(Expr::constant(x0));
        for t in 1..=horizon {
            let mut e = x_exprs[t - 1].clone();
            // x_t = x_{t-1} + dt/2 (v_{t-1} + v_t)
            if t == 1 {
                e.constant += 0.5 * dt * v0;
            } else {
                e.push(v[t - 2], 0.5 * dt);
            }
            e.push(v[t - 1], 0.5 * dt);
            // Re-normalize accumulated duplicate terms.
            e.terms.sort_by_key(|&(c, _)| c);
            e.terms.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            x_exprs.push(e);
        }
        let env = reach_envelopes(x0, v0, horizon, p);
        TrajectoryLp {
            map: VarMap {
                t0,
                horizon,
                x0,
                v0,
                dt,
                stop_bar,
                v,
                gamma: Vec::new(),
                signal: None,
                slack: Vec::new(),
            },
            env,
            x_exprs,
        }
    }

    pub fn x_expr(&self, t: usize) -> &Expr {
        &self.x_exprs[t]
    }

    pub fn v_term(&self, t: usize) -> Term {
        if t == 0 {
            Term::Const(self.map.v0)
        } else {
            Term::Var(self.map.v[t - 1])
        }
    }

    /// Progress objective over the horizon: `sum_t (r - x_t)` for
    /// `t = 1..=H`, returned as objective coefficients plus constant.
    pub fn add_progress_objective(&self, lp: &mut LinearProgram, destination: f64) {
        let mut constant = 0.0;
        let mut acc: Vec<f64> = vec![0.0; self.map.v.len()];
        for t in 1..=self.map.horizon {
            let e = &self.x_exprs[t];
            constant += destination - e.constant;
            for &(c, a) in &e.terms {
                // Columns here are always speed columns.
                let idx = self.map.v.iter().position(|&vc| vc == c).unwrap();
                acc[idx] -= a;
            }
        }
        lp.objective_constant += constant;
        for (idx, &coef) in acc.iter().enumerate() {
            lp.obj(self.map.v[idx], coef);
        }
    }

    /// Comfort split: `lam_p - lam_m = v_{t+1} - v_t`, weighted in the
    /// objective; returns the columns for warm starts.
    pub fn add_comfort_split(&self, lp: &mut LinearProgram, weight: f64) -> Vec<(usize, usize)> {
        let mut cols = Vec::with_capacity(self.map.horizon);
        for t in 0..self.map.horizon {
            let lp_col = lp.add_var(format!("lam_p_{t}"), 0.0, f64::INFINITY);
            let lm_col = lp.add_var(format!("lam_m_{t}"), 0.0, f64::INFINITY);
            let mut e = Expr::default();
            e.push(self.map.v[t], 1.0);
            if t == 0 {
                e.constant -= self.map.v0;
            } else {
                e.push(self.map.v[t - 1], -1.0);
            }
            e.push(lp_col, -1.0);
            e.push(lm_col, 1.0);
            e.emit(lp, Sense::Eq, 0.0);
            lp.obj(lp_col, weight);
            lp.obj(lm_col, weight);
            cols.push((lp_col, lm_col));
        }
        cols
    }

    /// Creates passage binaries over the reachable window with linking
    /// rows and the monotone passage cuts; steps outside the window are
    /// fixed by the envelope. The optional `leader_passed_at` fixes flags
    /// to zero while the predecessor is still unpassed.
    pub fn add_gamma(
        &mut self,
        lp: &mut LinearProgram,
        leader_passed_at: Option<&dyn Fn(u64) -> bool>,
    ) {
        let b = self.map.stop_bar;
        let mut gamma: Vec<Gamma> = Vec::with_capacity(self.map.horizon);
        let mut prev_col: Option<usize> = None;
        for t in 1..=self.map.horizon {
            // Fixings, in precedence order: already passed at the snapshot;
            // bar unreachable; passage kinematically unavoidable (even full
            // braking crosses); passage blocked while the predecessor is
            // still behind the bar per the shared prediction.
            let fixed = if self.map.x0 > b {
                Some(true)
            } else if self.env.x_max[t] <= b {
                Some(false)
            } else if self.env.x_min[t] > b {
                Some(true)
            } else if leader_passed_at.is_some_and(|f| !f(self.map.t0 + t as u64)) {
                Some(false)
            } else {
                None
            };
            let g = match fixed {
                Some(v) => Gamma::Fixed(v),
                None => {
                    let col = lp.add_binary(format!("gamma_{t}"));
                    // x_t <= b + M gamma ; x_t >= b - M'(1 - gamma)
                    let m_up = (self.env.x_max[t] - b).max(1.0);
                    let m_dn = (b - self.env.x_min[t]).max(1.0);
                    let mut up = self.x_exprs[t].clone();
                    up.push(col, -m_up);
                    up.emit(lp, Sense::Le, b);
                    let mut dn = self.x_exprs[t].clone();
                    dn.push(col, -m_dn);
                    dn.emit(lp, Sense::Ge, b - m_dn);
                    if let Some(pc) = prev_col {
                        // Monotone passage: gamma_{t-1} <= gamma_t.
                        lp.add_row(vec![(pc, 1.0), (col, -1.0)], Sense::Le, 0.0);
                    }
                    prev_col = Some(col);
                    Gamma::Var(col)
                }
            };
            // Blocked flags reset the chain start; fixed-true flags end it.
            if matches!(g, Gamma::Fixed(_)) {
                prev_col = None;
            }
            gamma.push(g);
        }
        self.map.gamma = gamma;
    }

    pub fn gamma_term(&self, t: usize) -> Term {
        debug_assert!(t >= 1);
        self.map.gamma[t - 1].term()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_lp, LpOutcome};

    fn p() -> Parameters {
        Parameters::default()
    }

    #[test]
    fn position_expressions_match_rollouts() {
        let params = p();
        let mut lp = LinearProgram::new();
        let tl = TrajectoryLp::new(&mut lp, 0, 100.0, 10.0, 8, &params, 650.0, true);
        // Feed a concrete speed profile and compare against the kinematic
        // rollout of the equivalent accelerations.
        let accels = [2.0, 2.0, -1.0, 0.0, 3.0, -2.0, 1.0, 0.5];
        let tr = Trajectory::kinematic(0, 100.0, 10.0, &accels, params.traj_step, 650.0);
        let x: Vec<f64> = tr.v[1..].to_vec();
        for t in 0..=8 {
            let e = tl.x_expr(t);
            let val = e.constant
                + e.terms
                    .iter()
                    .map(|&(c, a)| a * x[tl.map.v.iter().position(|&vc| vc == c).unwrap()])
                    .sum::<f64>();
            assert!(
                (val - tr.x[t]).abs() < 1e-9,
                "x_{t}: expr {val} vs rollout {}",
                tr.x[t]
            );
        }
    }

    #[test]
    fn progress_objective_prefers_speed() {
        let params = p();
        let mut lp = LinearProgram::new();
        let tl = TrajectoryLp::new(&mut lp, 0, 0.0, 20.0, 10, &params, 650.0, true);
        tl.add_progress_objective(&mut lp, 800.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { x, .. } => {
                // Unconstrained: accelerate at the cap toward max speed.
                let v1 = x[tl.map.v[0]];
                assert!(
                    (v1 - (20.0 + params.accel_max * params.traj_step)).abs() < 1e-6,
                    "v1 = {v1}"
                );
                let v_last = x[*tl.map.v.last().unwrap()];
                assert!((v_last - params.speed_max).abs() < 1e-6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn envelopes_bound_every_feasible_rollout() {
        let params = p();
        let env = reach_envelopes(300.0, 25.0, 20, &params);
        let accels = vec![3.0; 20];
        let tr = Trajectory::kinematic(0, 300.0, 25.0, &accels, params.traj_step, 650.0);
        for t in 0..=20 {
            assert!(tr.x[t] <= env.x_max[t] + 1e-9);
            assert!(tr.x[t] >= env.x_min[t] - 1e-9);
        }
    }
}
