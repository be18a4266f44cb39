//! Best-first branch-and-bound over the binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use super::simplex::{BasisSnapshot, LpStatus, Simplex};
use super::{LinearProgram, MilpError};

/// Node and wall-clock budget for one solve. Node limits keep runs
/// deterministic; the time limit is an optional safety net that should stay
/// off wherever reproducibility matters.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub max_nodes: u64,
    pub max_time: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_nodes: 200_000,
            max_time: None,
        }
    }
}

impl Budget {
    pub fn nodes(max_nodes: u64) -> Self {
        Budget {
            max_nodes,
            max_time: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    /// Budget ran out; `x` holds the best incumbent if one was found.
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Incumbent assignment; empty when none was found.
    pub x: Vec<f64>,
    /// Incumbent objective (including the constant term), or infinity.
    pub value: f64,
    /// Proven lower bound on the optimum.
    pub best_bound: f64,
    /// Relative optimality gap of the incumbent.
    pub gap: f64,
    pub nodes: u64,
    pub wall: Duration,
}

impl MipSolution {
    pub fn has_solution(&self) -> bool {
        !self.x.is_empty()
    }
}

struct Node {
    parent: Option<usize>,
    /// Bound change introduced by this node (column, lower, upper).
    change: Option<(usize, f64, f64)>,
    /// Basis at the end of the parent's solve.
    basis: Rc<BasisSnapshot>,
}

struct Entry {
    bound: f64,
    depth: u32,
    branch_var: u32,
    down: bool,
    seq: u64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // BinaryHeap is a max-heap; "greater" means explored first. Order:
    // lowest bound, then deepest (plunge), then lowest branch variable,
    // then the down branch, then first-created.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| self.depth.cmp(&other.depth))
            .then_with(|| other.branch_var.cmp(&self.branch_var))
            .then_with(|| self.down.cmp(&other.down))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

const INT_TOL: f64 = 1e-6;

/// Solves to proven optimality or budget exhaustion.
pub fn solve_mip(lp: &LinearProgram, budget: Budget) -> Result<MipSolution, MilpError> {
    solve_mip_warm(lp, budget, None)
}

/// Like [`solve_mip`], with an optional warm-start assignment that seeds
/// the incumbent when it is feasible.
pub fn solve_mip_warm(
    lp: &LinearProgram,
    budget: Budget,
    warm: Option<&[f64]>,
) -> Result<MipSolution, MilpError> {
    let start = Instant::now();
    lp.validate()?;
    let n = lp.variables.len();
    let binaries: Vec<usize> = (0..n).filter(|&i| lp.variables[i].is_binary).collect();

    let infeasible = |start: Instant| MipSolution {
        status: MipStatus::Infeasible,
        x: Vec::new(),
        value: f64::INFINITY,
        best_bound: f64::INFINITY,
        gap: 0.0,
        nodes: 0,
        wall: start.elapsed(),
    };

    let Some(core) = lp.to_core() else {
        return Ok(infeasible(start));
    };
    if core.lb.iter().zip(&core.ub).any(|(l, u)| *l > u + 1e-9) {
        return Ok(infeasible(start));
    }

    let root_lb = core.lb.clone();
    let root_ub = core.ub.clone();
    let mut core = core;

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    if let Some(w) = warm {
        if w.len() == n && lp.is_feasible(w, 1e-6) {
            incumbent = Some((lp.objective_value(w), w.to_vec()));
        }
    }

    let mut simplex = Simplex::new(&core);
    let mut nodes: Vec<Node> = Vec::new();
    let mut heap: BinaryHeap<Entry> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut solved: u64 = 0;
    let mut last_loaded: Option<usize> = None; // arena index whose final basis is live
    let mut exhausted = false;

    // Root node.
    nodes.push(Node {
        parent: None,
        change: None,
        basis: Rc::new(simplex.snapshot()),
    });
    heap.push(Entry {
        bound: f64::NEG_INFINITY,
        depth: 0,
        branch_var: 0,
        down: true,
        seq,
        node: 0,
    });

    let mut best_open_bound = f64::NEG_INFINITY;
    while let Some(entry) = heap.pop() {
        best_open_bound = entry.bound;
        if let Some((inc_val, _)) = &incumbent {
            if entry.bound >= inc_val - 1e-9 {
                // Best-bound order: every remaining node is dominated.
                best_open_bound = *inc_val;
                break;
            }
        }
        if solved >= budget.max_nodes
            || budget.max_time.is_some_and(|t| start.elapsed() >= t)
        {
            exhausted = true;
            break;
        }

        // Rebuild bounds: root bounds plus the ancestry chain. A branch that
        // contradicts presolve-tightened bounds prunes immediately.
        core.lb.copy_from_slice(&root_lb);
        core.ub.copy_from_slice(&root_ub);
        let mut cursor = Some(entry.node);
        let mut contradictory = false;
        while let Some(i) = cursor {
            if let Some((col, lo, hi)) = nodes[i].change {
                core.lb[col] = core.lb[col].max(lo);
                core.ub[col] = core.ub[col].min(hi);
                if core.lb[col] > core.ub[col] + 1e-12 {
                    contradictory = true;
                }
            }
            cursor = nodes[i].parent;
        }
        if contradictory {
            continue;
        }

        // Warm start: reuse the live basis when processing a child of the
        // last solved node (or the fresh root), otherwise reload the stored
        // parent basis.
        if nodes[entry.node].parent != last_loaded {
            simplex.load(&core, &nodes[entry.node].basis);
        }
        simplex.recompute_xb(&core);
        solved += 1;
        let status = simplex.solve(&core)?;
        last_loaded = Some(entry.node);
        match status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(MilpError::InvalidProgram(
                    "relaxation is unbounded".into(),
                ))
            }
            LpStatus::Optimal => {}
        }
        let full = simplex.extract(&core);
        let value = lp.objective_value(&full[..n]);
        if let Some((inc_val, _)) = &incumbent {
            if value >= inc_val - 1e-9 {
                continue;
            }
        }

        // Pick the most fractional binary (ties: lowest index).
        let mut branch: Option<(usize, f64)> = None;
        for &b in &binaries {
            let frac = (full[b] - full[b].round()).abs();
            if frac > INT_TOL {
                let score = (full[b] - full[b].floor() - 0.5).abs();
                if branch.map_or(true, |(_, s)| score < s - 1e-12) {
                    branch = Some((b, score));
                }
            }
        }

        match branch {
            None => {
                // Integral: snap the binaries and accept.
                let mut x = full[..n].to_vec();
                for &b in &binaries {
                    x[b] = x[b].round();
                }
                let val = lp.objective_value(&x);
                debug_assert!(
                    lp.is_feasible(&x, 1e-4),
                    "integral node failed the feasibility audit"
                );
                if incumbent.as_ref().map_or(true, |(v, _)| val < v - 1e-12) {
                    incumbent = Some((val, x));
                }
            }
            Some((bvar, _)) => {
                let snap = Rc::new(simplex.snapshot());
                let depth = entry.depth + 1;
                for (down, (lo, hi)) in [(true, (0.0, 0.0)), (false, (1.0, 1.0))] {
                    nodes.push(Node {
                        parent: Some(entry.node),
                        change: Some((bvar, lo, hi)),
                        basis: Rc::clone(&snap),
                    });
                    seq += 1;
                    heap.push(Entry {
                        bound: value,
                        depth,
                        branch_var: bvar as u32,
                        down,
                        seq,
                        node: nodes.len() - 1,
                    });
                }
            }
        }
    }

    let (status, value, x) = match (&incumbent, exhausted, heap.is_empty()) {
        (Some((v, x)), false, _) => (MipStatus::Optimal, *v, x.clone()),
        (Some((v, x)), true, _) => (MipStatus::BudgetExhausted, *v, x.clone()),
        (None, true, _) => (MipStatus::BudgetExhausted, f64::INFINITY, Vec::new()),
        (None, false, _) => (MipStatus::Infeasible, f64::INFINITY, Vec::new()),
    };
    let best_bound = match status {
        MipStatus::Optimal | MipStatus::Infeasible => value,
        MipStatus::BudgetExhausted => heap
            .iter()
            .map(|e| e.bound)
            .fold(best_open_bound, f64::min),
    };
    let gap = if value.is_finite() && best_bound.is_finite() {
        ((value - best_bound) / value.abs().max(1.0)).max(0.0)
    } else {
        f64::INFINITY
    };
    Ok(MipSolution {
        status,
        x,
        value,
        best_bound,
        gap,
        nodes: solved,
        wall: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Sense;

    #[test]
    fn one_of_two_binaries() {
        // max x + y subject to x + y <= 1 (minimize the negation).
        let mut lp = LinearProgram::new();
        let x = lp.add_binary("x");
        let y = lp.add_binary("y");
        lp.obj(x, -1.0);
        lp.obj(y, -1.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
        let sol = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.value, -1.0);
    }

    #[test]
    fn knapsack_enumerated_by_hand() {
        // max 3a + 2b + 2c s.t. 2a + 2b + c <= 3: optimum 5 at (1, 0, 1).
        let mut lp = LinearProgram::new();
        let a = lp.add_binary("a");
        let b = lp.add_binary("b");
        let c = lp.add_binary("c");
        lp.obj(a, -3.0);
        lp.obj(b, -2.0);
        lp.obj(c, -2.0);
        lp.add_row(vec![(a, 2.0), (b, 2.0), (c, 1.0)], Sense::Le, 3.0);
        let sol = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.value, -5.0);
        assert_eq!(sol.x[a], 1.0);
        assert_eq!(sol.x[b], 0.0);
        assert_eq!(sol.x[c], 1.0);
    }

    #[test]
    fn infeasible_binary_system() {
        let mut lp = LinearProgram::new();
        let x = lp.add_binary("x");
        lp.add_row(vec![(x, 2.0)], Sense::Eq, 1.0);
        let sol = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Infeasible);
    }

    #[test]
    fn warm_start_feeds_the_incumbent() {
        let mut lp = LinearProgram::new();
        let x = lp.add_binary("x");
        let y = lp.add_binary("y");
        lp.obj(x, -1.0);
        lp.obj(y, -2.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
        // Zero budget: the warm incumbent is all we get back.
        let warm = vec![1.0, 0.0];
        let sol = solve_mip_warm(&lp, Budget::nodes(0), Some(&warm)).unwrap();
        assert_eq!(sol.status, MipStatus::BudgetExhausted);
        assert_eq!(sol.value, -1.0);
        assert_eq!(sol.x, warm);
        // With budget the true optimum replaces it.
        let sol = solve_mip_warm(&lp, Budget::default(), Some(&warm)).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.value, -2.0);
    }

    #[test]
    fn budget_exhaustion_reports_a_gap() {
        // Fractional root relaxation: max 6a + 5b s.t. 4a + 3b <= 5.
        let mut lp = LinearProgram::new();
        let a = lp.add_binary("a");
        let b = lp.add_binary("b");
        lp.obj(a, -6.0);
        lp.obj(b, -5.0);
        lp.add_row(vec![(a, 4.0), (b, 3.0)], Sense::Le, 5.0);
        let full = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(full.status, MipStatus::Optimal);
        assert_eq!(full.value, -6.0);
        // One node solves only the (fractional) root.
        let starved = solve_mip(&lp, Budget::nodes(1)).unwrap();
        assert_eq!(starved.status, MipStatus::BudgetExhausted);
        assert!(starved.best_bound <= full.value + 1e-9);
    }

    #[test]
    fn mixed_integer_with_continuous_tail() {
        // min -y - 0.5 t, y binary, 0 <= t <= 10, t <= 4 + 3 y.
        let mut lp = LinearProgram::new();
        let y = lp.add_binary("y");
        let t = lp.add_var("t", 0.0, 10.0);
        lp.obj(y, -1.0);
        lp.obj(t, -0.5);
        lp.add_row(vec![(t, 1.0), (y, -3.0)], Sense::Le, 4.0);
        let sol = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.x[y], 1.0);
        assert!((sol.x[t] - 7.0).abs() < 1e-8);
        assert!((sol.value + 4.5).abs() < 1e-9);
    }

    #[test]
    fn deterministic_across_repeat_solves() {
        let mut lp = LinearProgram::new();
        let vars: Vec<usize> = (0..12).map(|i| lp.add_binary(format!("b{i}"))).collect();
        for (i, &v) in vars.iter().enumerate() {
            lp.obj(v, ((i * 7) % 5) as f64 - 2.0);
        }
        for k in 0..6 {
            let coeffs: Vec<(usize, f64)> = vars
                .iter()
                .enumerate()
                .filter(|(i, _)| (i + k) % 3 != 0)
                .map(|(i, &v)| (v, ((i + 2 * k) % 4) as f64 - 1.5))
                .collect();
            lp.add_row(coeffs, Sense::Le, 1.0 + k as f64 * 0.5);
        }
        let a = solve_mip(&lp, Budget::default()).unwrap();
        let b = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.x, b.x);
        assert_eq!(a.nodes, b.nodes);
    }
}
