//! Brute-force oracle battery: the branch-and-bound result must match
//! exhaustive enumeration exactly on randomized small binary programs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use white_phase::milp::{solve_mip, Budget, LinearProgram, MipStatus, Sense};

/// Enumerates all 2^k assignments directly from the row data; fully
/// independent of the solver.
fn enumerate_optimum(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let k = lp.variables.len();
    assert!(lp.variables.iter().all(|v| v.is_binary));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << k) {
        let x: Vec<f64> = (0..k).map(|i| ((mask >> i) & 1) as f64).collect();
        let ok = lp.rows.iter().all(|row| {
            let lhs: f64 = row.coeffs.iter().map(|&(c, a)| a * x[c]).sum();
            match row.sense {
                Sense::Le => lhs <= row.rhs + 1e-9,
                Sense::Ge => lhs >= row.rhs - 1e-9,
                Sense::Eq => (lhs - row.rhs).abs() <= 1e-9,
            }
        });
        if !ok {
            continue;
        }
        let value = lp.objective_value(&x);
        if best.as_ref().map_or(true, |(b, _)| value < *b) {
            best = Some((value, x));
        }
    }
    best
}

fn random_program(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(4..=14);
    let nrows = rng.gen_range(3..=30);
    let mut lp = LinearProgram::new();
    for i in 0..k {
        lp.add_binary(format!("b{i}"));
    }
    for i in 0..k {
        // Half-integer costs keep distinct objective values well separated.
        let c = rng.gen_range(-12..=12) as f64 / 2.0;
        lp.obj(i, c);
    }
    // Most rows are anchored to a reference assignment so a healthy share
    // of the battery is feasible; unanchored rows keep infeasible cases in
    // the mix.
    let reference: Vec<f64> = (0..k).map(|_| rng.gen_range(0..=1) as f64).collect();
    for _ in 0..nrows {
        let support = rng.gen_range(2..=k.min(6));
        let mut cols: Vec<usize> = (0..k).collect();
        for i in 0..support {
            let j = rng.gen_range(i..k);
            cols.swap(i, j);
        }
        let coeffs: Vec<(usize, f64)> = cols[..support]
            .iter()
            .map(|&c| (c, rng.gen_range(-6..=6) as f64))
            .collect();
        let sense = match rng.gen_range(0..6) {
            0 | 1 => Sense::Ge,
            2 => Sense::Eq,
            _ => Sense::Le,
        };
        let anchored = rng.gen_range(0..12) > 0;
        let rhs = if anchored {
            let at_ref: f64 = coeffs.iter().map(|&(c, a)| a * reference[c]).sum();
            match sense {
                Sense::Le => at_ref + rng.gen_range(0..=3) as f64,
                Sense::Ge => at_ref - rng.gen_range(0..=3) as f64,
                Sense::Eq => at_ref,
            }
        } else {
            rng.gen_range(-6..=8) as f64
        };
        lp.add_row(coeffs, sense, rhs);
    }
    lp
}

#[test]
fn solver_matches_exhaustive_enumeration_on_100_seeds() {
    let start = std::time::Instant::now();
    let mut feasible = 0;
    let mut infeasible = 0;
    for seed in 1..=100u64 {
        let lp = random_program(seed);
        let oracle = enumerate_optimum(&lp);
        let sol = solve_mip(&lp, Budget::default())
            .unwrap_or_else(|e| panic!("seed {seed}: solver error {e}"));
        match oracle {
            None => {
                assert_eq!(
                    sol.status,
                    MipStatus::Infeasible,
                    "seed {seed}: oracle says infeasible, solver says {:?}",
                    sol.status
                );
                infeasible += 1;
            }
            Some((value, _)) => {
                assert_eq!(sol.status, MipStatus::Optimal, "seed {seed}");
                assert_eq!(
                    sol.value, value,
                    "seed {seed}: solver {} vs enumeration {}",
                    sol.value, value
                );
                assert!(
                    lp.is_feasible(&sol.x, 1e-6),
                    "seed {seed}: solver assignment infeasible"
                );
                feasible += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    println!(
        "oracle battery: {feasible} optimal + {infeasible} infeasible in {:.2}s",
        elapsed.as_secs_f64()
    );
    assert!(feasible >= 20, "battery too degenerate: {feasible} feasible");
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "battery exceeded 60 s: {:.2}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn solutions_are_byte_identical_across_runs() {
    for seed in [3u64, 17, 42] {
        let lp = random_program(seed);
        let a = solve_mip(&lp, Budget::default()).unwrap();
        let b = solve_mip(&lp, Budget::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.x, b.x);
        assert_eq!(a.nodes, b.nodes);
    }
}

#[test]
fn incumbent_dominates_the_reported_bound() {
    // Weak-duality style check: for minimization the incumbent objective
    // never falls below the proven bound.
    for seed in 1..=30u64 {
        let lp = random_program(seed);
        let sol = solve_mip(&lp, Budget::nodes(25)).unwrap();
        if sol.has_solution() {
            assert!(
                sol.value >= sol.best_bound - 1e-9,
                "seed {seed}: incumbent {} below bound {}",
                sol.value,
                sol.best_bound
            );
        }
    }
}
