//! Bounded-variable primal simplex with a dense basis inverse.
//!
//! Constraints are held in activity form: every row `lo <= a.x <= hi`
//! gets a logical activity column, so the full system is `[A | -I] z = 0`
//! with all bounds on the columns. The initial basis is the identity of
//! activity columns. Phase 1 minimizes the sum of bound violations with
//! composite costs; phase 2 prices the true objective. Dantzig pricing
//! with a Bland-rule fallback prevents cycling.

use super::MilpError;

pub(crate) const FEAS_TOL: f64 = 1e-6;
pub(crate) const COST_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-8;
const MAX_ITER: usize = 200_000;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 32;

/// Column-major sparse structural matrix plus bounds, ready for the solver.
#[derive(Debug, Clone)]
pub(crate) struct CoreLp {
    pub ncols: usize,
    pub nrows: usize,
    /// Structural columns: (row, coefficient) lists.
    pub cols: Vec<Vec<(usize, f64)>>,
    /// Bounds for structural columns then activity columns.
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    /// Dense objective over structural columns (activities cost zero).
    pub obj: Vec<f64>,
}

impl CoreLp {
    pub fn total_cols(&self) -> usize {
        self.ncols + self.nrows
    }

    fn col_entries(&self, k: usize) -> ColRef<'_> {
        if k < self.ncols {
            ColRef::Structural(&self.cols[k])
        } else {
            ColRef::Activity(k - self.ncols)
        }
    }

    fn cost(&self, k: usize) -> f64 {
        if k < self.ncols {
            self.obj[k]
        } else {
            0.0
        }
    }
}

enum ColRef<'a> {
    Structural(&'a [(usize, f64)]),
    Activity(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free column pinned at zero.
    FreeZero,
}

/// Saved basis for warm starts.
#[derive(Debug, Clone)]
pub(crate) struct BasisSnapshot {
    pub basis: Vec<u32>,
    pub status: Vec<Status>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

pub(crate) struct Simplex {
    m: usize,
    n_total: usize,
    /// Basis inverse, column-major: entry (i, c) at `binv[c * m + i]`.
    binv: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    xb: Vec<f64>,
    /// Scratch buffers.
    w: Vec<f64>,
    y: Vec<f64>,
    stall: usize,
    pub iterations: usize,
}

impl Simplex {
    pub fn new(lp: &CoreLp) -> Self {
        let m = lp.nrows;
        let n_total = lp.total_cols();
        let mut s = Simplex {
            m,
            n_total,
            binv: vec![0.0; m * m],
            basis: (0..m).map(|i| lp.ncols + i).collect(),
            status: vec![Status::AtLower; n_total],
            xb: vec![0.0; m],
            w: vec![0.0; m],
            y: vec![0.0; m],
            stall: 0,
            iterations: 0,
        };
        s.reset_identity(lp);
        s
    }

    fn reset_identity(&mut self, lp: &CoreLp) {
        let m = self.m;
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            // Activity columns are -e_i, so the inverse starts as -I.
            self.binv[i * m + i] = -1.0;
            self.basis[i] = lp.ncols + i;
        }
        for k in 0..self.n_total {
            self.status[k] = nonbasic_resting_status(lp, k);
        }
        for i in 0..m {
            self.status[lp.ncols + i] = Status::Basic(i);
        }
        self.recompute_xb(lp);
    }

    /// Loads a saved basis: rebuilds the inverse by Gauss-Jordan from the
    /// basis columns. Falls back to the identity basis if singular.
    pub fn load(&mut self, lp: &CoreLp, snap: &BasisSnapshot) -> bool {
        let m = self.m;
        debug_assert_eq!(snap.basis.len(), m);
        debug_assert_eq!(snap.status.len(), self.n_total);
        // Dense basis matrix, column-major.
        let mut mat = vec![0.0; m * m];
        for (pos, &col) in snap.basis.iter().enumerate() {
            let col = col as usize;
            match lp.col_entries(col) {
                ColRef::Structural(entries) => {
                    for &(r, a) in entries {
                        mat[pos * m + r] = a;
                    }
                }
                ColRef::Activity(r) => mat[pos * m + r] = -1.0,
            }
        }
        if !invert_col_major(&mut mat, m) {
            self.reset_identity(lp);
            return false;
        }
        self.binv = mat;
        self.basis.clear();
        self.basis.extend(snap.basis.iter().map(|&c| c as usize));
        self.status.copy_from_slice(&snap.status);
        self.recompute_xb(lp);
        true
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            basis: self.basis.iter().map(|&c| c as u32).collect(),
            status: self.status.clone(),
        }
    }

    fn nonbasic_value(&self, lp: &CoreLp, k: usize) -> f64 {
        match self.status[k] {
            Status::AtLower => lp.lb[k],
            Status::AtUpper => lp.ub[k],
            Status::FreeZero => 0.0,
            Status::Basic(_) => unreachable!("basic column priced as nonbasic"),
        }
    }

    /// xb = -Binv * sum(A_k * x_k for nonbasic k), since the RHS is zero.
    pub fn recompute_xb(&mut self, lp: &CoreLp) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for k in 0..self.n_total {
            if matches!(self.status[k], Status::Basic(_)) {
                continue;
            }
            let xk = self.nonbasic_value(lp, k);
            if xk == 0.0 {
                continue;
            }
            match lp.col_entries(k) {
                ColRef::Structural(entries) => {
                    for &(r, a) in entries {
                        rhs[r] -= a * xk;
                    }
                }
                ColRef::Activity(r) => rhs[r] += xk,
            }
        }
        for i in 0..m {
            let mut acc = 0.0;
            for c in 0..m {
                let v = rhs[c];
                if v != 0.0 {
                    acc += self.binv[c * m + i] * v;
                }
            }
            self.xb[i] = acc;
        }
    }

    /// w = Binv * column(k).
    fn ftran(&mut self, lp: &CoreLp, k: usize) {
        let m = self.m;
        self.w.iter_mut().for_each(|v| *v = 0.0);
        match lp.col_entries(k) {
            ColRef::Structural(entries) => {
                for &(r, a) in entries {
                    let col = &self.binv[r * m..(r + 1) * m];
                    for i in 0..m {
                        self.w[i] += a * col[i];
                    }
                }
            }
            ColRef::Activity(r) => {
                let col = &self.binv[r * m..(r + 1) * m];
                for i in 0..m {
                    self.w[i] = -col[i];
                }
            }
        }
    }

    /// y = cb' * Binv for a sparse basic-cost vector.
    fn btran_sparse(&mut self, cb: &[(usize, f64)]) {
        let m = self.m;
        for r in 0..m {
            let col = &self.binv[r * m..(r + 1) * m];
            let mut acc = 0.0;
            for &(i, c) in cb {
                acc += c * col[i];
            }
            self.y[r] = acc;
        }
    }

    fn reduced_cost(&self, lp: &CoreLp, k: usize, use_true_cost: bool) -> f64 {
        let base = if use_true_cost { lp.cost(k) } else { 0.0 };
        match lp.col_entries(k) {
            ColRef::Structural(entries) => {
                let mut acc = base;
                for &(r, a) in entries {
                    acc -= a * self.y[r];
                }
                acc
            }
            ColRef::Activity(r) => base + self.y[r],
        }
    }

    fn infeasibility(&self, lp: &CoreLp) -> f64 {
        let mut total = 0.0;
        for (i, &b) in self.basis.iter().enumerate() {
            let v = self.xb[i];
            if v < lp.lb[b] - FEAS_TOL {
                total += lp.lb[b] - v;
            } else if v > lp.ub[b] + FEAS_TOL {
                total += v - lp.ub[b];
            }
        }
        total
    }

    /// Runs phase 1 then phase 2. Returns the status; on `Optimal` the
    /// solution can be read with [`Simplex::extract`].
    pub fn solve(&mut self, lp: &CoreLp) -> Result<LpStatus, MilpError> {
        let mut repairs = 0;
        'outer: loop {
            self.stall = 0;
            while self.infeasibility(lp) > FEAS_TOL {
                match self.phase_step(lp, false)? {
                    StepOutcome::Moved => {}
                    StepOutcome::NoEntering => return Ok(LpStatus::Infeasible),
                    StepOutcome::Unbounded => {
                        // Phase-1 cost is bounded below; an unblocked ray
                        // means numerical trouble.
                        return Err(MilpError::Numerical("unblocked phase-1 direction".into()));
                    }
                }
            }
            self.stall = 0;
            loop {
                match self.phase_step(lp, true)? {
                    StepOutcome::Moved => {
                        if self.infeasibility(lp) > FEAS_TOL * 8.0 {
                            repairs += 1;
                            if repairs > 3 {
                                return Err(MilpError::Numerical(
                                    "feasibility lost repeatedly in phase 2".into(),
                                ));
                            }
                            continue 'outer;
                        }
                    }
                    StepOutcome::NoEntering => return Ok(LpStatus::Optimal),
                    StepOutcome::Unbounded => return Ok(LpStatus::Unbounded),
                }
            }
        }
    }

    fn phase_step(&mut self, lp: &CoreLp, phase2: bool) -> Result<StepOutcome, MilpError> {
        self.iterations += 1;
        if self.iterations > MAX_ITER {
            return Err(MilpError::IterationLimit);
        }
        // Basic costs: true objective in phase 2, violation signs in phase 1.
        let mut cb: Vec<(usize, f64)> = Vec::new();
        if phase2 {
            for (i, &b) in self.basis.iter().enumerate() {
                let c = lp.cost(b);
                if c != 0.0 {
                    cb.push((i, c));
                }
            }
        } else {
            for (i, &b) in self.basis.iter().enumerate() {
                let v = self.xb[i];
                if v < lp.lb[b] - FEAS_TOL {
                    cb.push((i, -1.0));
                } else if v > lp.ub[b] + FEAS_TOL {
                    cb.push((i, 1.0));
                }
            }
        }
        self.btran_sparse(&cb);

        // Pricing: Dantzig by default, Bland (lowest eligible index) after
        // a run of degenerate pivots.
        let bland = self.stall >= STALL_LIMIT;
        let mut enter: Option<(usize, f64, bool)> = None; // (col, d, increases)
        for k in 0..self.n_total {
            let (can_inc, can_dec) = match self.status[k] {
                Status::Basic(_) => continue,
                Status::AtLower => (lp.ub[k] > lp.lb[k] + 1e-12, false),
                Status::AtUpper => (false, true),
                Status::FreeZero => (true, true),
            };
            let d = self.reduced_cost(lp, k, phase2);
            let eligible_inc = can_inc && d < -COST_TOL;
            let eligible_dec = can_dec && d > COST_TOL;
            if !(eligible_inc || eligible_dec) {
                continue;
            }
            let increases = eligible_inc;
            if bland {
                enter = Some((k, d, increases));
                break;
            }
            match enter {
                Some((_, best, _)) if d.abs() <= best.abs() => {}
                _ => enter = Some((k, d, increases)),
            }
        }
        let Some((k_in, _, increases)) = enter else {
            return Ok(StepOutcome::NoEntering);
        };

        self.ftran(lp, k_in);
        let dir = if increases { 1.0 } else { -1.0 };

        // Ratio test: basics block at the first bound they meet moving in
        // `dir`; in phase 1 an infeasible basic blocks where it regains
        // feasibility. The entering column itself blocks at its far bound.
        let mut t_max = lp.ub[k_in] - lp.lb[k_in];
        if !t_max.is_finite() {
            t_max = f64::INFINITY;
        }
        let mut leave: Option<usize> = None; // basis position
        for i in 0..self.m {
            let wi = self.w[i];
            if wi.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let rate = -dir * wi;
            let v = self.xb[i];
            let (lo, hi) = (lp.lb[b], lp.ub[b]);
            let t = if !phase2 && v < lo - FEAS_TOL {
                // Infeasible below: blocks only when rising to its lower bound.
                if rate > 0.0 {
                    (lo - v) / rate
                } else {
                    continue;
                }
            } else if !phase2 && v > hi + FEAS_TOL {
                if rate < 0.0 {
                    (hi - v) / rate
                } else {
                    continue;
                }
            } else if rate > 0.0 {
                if hi.is_finite() {
                    (hi - v) / rate
                } else {
                    continue;
                }
            } else if lo.is_finite() {
                (lo - v) / rate
            } else {
                continue;
            };
            let t = t.max(0.0);
            if t < t_max - 1e-12 {
                t_max = t;
                leave = Some(i);
            } else if t <= t_max + 1e-12 {
                // Tie: keep the numerically larger pivot; under Bland's
                // rule keep the lowest variable index.
                let replace = match leave {
                    None => true,
                    Some(pos) => {
                        if bland {
                            self.basis[i] < self.basis[pos]
                        } else {
                            wi.abs() > self.w[pos].abs()
                        }
                    }
                };
                if replace {
                    t_max = t.min(t_max);
                    leave = Some(i);
                }
            }
        }

        if !t_max.is_finite() {
            return Ok(StepOutcome::Unbounded);
        }
        self.stall = if t_max <= 1e-10 { self.stall + 1 } else { 0 };

        // Move the basics.
        for i in 0..self.m {
            self.xb[i] -= dir * t_max * self.w[i];
        }
        match leave {
            None => {
                // Bound flip of the entering column.
                self.status[k_in] = match self.status[k_in] {
                    Status::AtLower => Status::AtUpper,
                    Status::AtUpper => Status::AtLower,
                    s => s,
                };
            }
            Some(r) => {
                let b_out = self.basis[r];
                let wr = self.w[r];
                // Leaving variable rests at the bound it hit.
                let v_out = self.xb[r];
                let to_upper = if lp.ub[b_out].is_finite() && lp.lb[b_out].is_finite() {
                    (v_out - lp.ub[b_out]).abs() < (v_out - lp.lb[b_out]).abs()
                } else {
                    lp.ub[b_out].is_finite()
                };
                self.status[b_out] = if to_upper { Status::AtUpper } else { Status::AtLower };
                let entering_from = self.nonbasic_value(lp, k_in);
                self.status[k_in] = Status::Basic(r);
                self.basis[r] = k_in;
                self.xb[r] = entering_from + dir * t_max;
                // Rank-one update of the inverse.
                let m = self.m;
                let inv_wr = 1.0 / wr;
                for c in 0..m {
                    let col = &mut self.binv[c * m..(c + 1) * m];
                    let f = col[r] * inv_wr;
                    if f == 0.0 {
                        continue;
                    }
                    for i in 0..m {
                        col[i] -= f * self.w[i];
                    }
                    col[r] = f;
                }
            }
        }
        Ok(StepOutcome::Moved)
    }

    /// Full primal solution (structural columns then activities).
    pub fn extract(&self, lp: &CoreLp) -> Vec<f64> {
        let mut x = vec![0.0; self.n_total];
        for k in 0..self.n_total {
            x[k] = match self.status[k] {
                Status::Basic(i) => self.xb[i],
                Status::AtLower => lp.lb[k],
                Status::AtUpper => lp.ub[k],
                Status::FreeZero => 0.0,
            };
        }
        x
    }

}

enum StepOutcome {
    Moved,
    NoEntering,
    Unbounded,
}

fn nonbasic_resting_status(lp: &CoreLp, k: usize) -> Status {
    if lp.lb[k].is_finite() {
        Status::AtLower
    } else if lp.ub[k].is_finite() {
        Status::AtUpper
    } else {
        Status::FreeZero
    }
}

/// In-place inversion of a column-major matrix; false if singular.
fn invert_col_major(mat: &mut [f64], m: usize) -> bool {
    if m == 0 {
        return true;
    }
    let mut aug = vec![0.0; m * m];
    for i in 0..m {
        aug[i * m + i] = 1.0;
    }
    for col in 0..m {
        // Partial pivot within the column.
        let mut best = col;
        let mut best_val = mat[col * m + col].abs();
        for row in col + 1..m {
            let v = mat[col * m + row].abs();
            if v > best_val {
                best = row;
                best_val = v;
            }
        }
        if best_val < 1e-11 {
            return false;
        }
        if best != col {
            for c in 0..m {
                mat.swap(c * m + col, c * m + best);
                aug.swap(c * m + col, c * m + best);
            }
        }
        let piv = mat[col * m + col];
        let inv = 1.0 / piv;
        for c in 0..m {
            mat[c * m + col] *= inv;
            aug[c * m + col] *= inv;
        }
        for row in 0..m {
            if row == col {
                continue;
            }
            let f = mat[col * m + row];
            if f == 0.0 {
                continue;
            }
            for c in 0..m {
                let sub = mat[c * m + col] * f;
                if sub != 0.0 {
                    mat[c * m + row] -= sub;
                }
                let sub2 = aug[c * m + col] * f;
                if sub2 != 0.0 {
                    aug[c * m + row] -= sub2;
                }
            }
        }
    }
    mat.copy_from_slice(&aug);
    true
}
