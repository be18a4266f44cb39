//! Planned or predicted motion over a horizon.

/// A trajectory holds `len + 1` state samples and `len` accelerations; the
/// stop-bar passage flag `passed[t]` is true iff `x[t] > stop_bar`, and is
/// monotone in `t` because positions never decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Global trajectory step index of sample 0.
    pub start_step: u64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub passed: Vec<bool>,
}

impl Trajectory {
    /// Rolls the exact kinematics forward from `(x0, v0)`.
    pub fn kinematic(start_step: u64, x0: f64, v0: f64, accels: &[f64], dt: f64, stop_bar: f64) -> Self {
        let mut x = Vec::with_capacity(accels.len() + 1);
        let mut v = Vec::with_capacity(accels.len() + 1);
        x.push(x0);
        v.push(v0);
        for &a in accels {
            let xc = *x.last().unwrap();
            let vc = *v.last().unwrap();
            x.push(xc + vc * dt + 0.5 * a * dt * dt);
            v.push(vc + a * dt);
        }
        let passed = x.iter().map(|&p| p > stop_bar).collect();
        Trajectory {
            start_step,
            x,
            v,
            a: accels.to_vec(),
            passed,
        }
    }

    /// Rebuilds a trajectory from a position sequence (for example, after
    /// averaging): speeds by forward finite difference, accelerations from
    /// the speed differences, passage flags from positions.
    pub fn from_positions(start_step: u64, x: Vec<f64>, dt: f64, stop_bar: f64) -> Self {
        let n = x.len();
        assert!(n >= 2, "trajectory needs at least two samples");
        let mut v = Vec::with_capacity(n);
        for t in 0..n - 1 {
            v.push((x[t + 1] - x[t]) / dt);
        }
        v.push(*v.last().unwrap());
        let a = (0..n - 1).map(|t| (v[t + 1] - v[t]) / dt).collect();
        let passed = x.iter().map(|&p| p > stop_bar).collect();
        Trajectory {
            start_step,
            x,
            v,
            a,
            passed,
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Position at global step `step`, holding the last sample beyond the
    /// horizon (vehicles that exit keep their final recorded position).
    pub fn x_at(&self, step: u64) -> f64 {
        let i = step.saturating_sub(self.start_step) as usize;
        self.x[i.min(self.x.len() - 1)]
    }

    pub fn passed_at(&self, step: u64) -> bool {
        let i = step.saturating_sub(self.start_step) as usize;
        self.passed[i.min(self.passed.len() - 1)]
    }

    /// Exact discrete-motion consistency of the sample arrays.
    pub fn kinematically_consistent(&self, dt: f64, tol: f64) -> bool {
        self.a.iter().enumerate().all(|(t, &a)| {
            let dx = self.x[t] + self.v[t] * dt + 0.5 * a * dt * dt - self.x[t + 1];
            let dv = self.v[t] + a * dt - self.v[t + 1];
            dx.abs() <= tol && dv.abs() <= tol
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kinematic_rollout_is_consistent_and_flags_passage() {
        let tr = Trajectory::kinematic(0, 640.0, 10.0, &[2.0, 2.0, 0.0, -1.0], 0.5, 650.0);
        assert!(tr.kinematically_consistent(0.5, 1e-12));
        assert_eq!(tr.x[1], 645.25);
        // Passage flags are monotone once set.
        let first = tr.passed.iter().position(|&p| p).unwrap();
        assert!(tr.passed[first..].iter().all(|&p| p));
    }

    proptest! {
        #[test]
        fn passage_flags_are_monotone_for_forward_motion(
            x0 in 0.0..700.0f64,
            v0 in 0.0..42.5f64,
            accels in prop::collection::vec(-11.5..13.0f64, 1..40),
        ) {
            // Clamp speeds at zero the way the plant does, so positions
            // never decrease.
            let mut clamped = Vec::new();
            let mut v = v0;
            for a in accels {
                let a = a.max(-v / 0.5);
                clamped.push(a);
                v += a * 0.5;
            }
            let tr = Trajectory::kinematic(0, x0, v0, &clamped, 0.5, 650.0);
            prop_assert!(tr.x.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            let mut seen = false;
            for &p in &tr.passed {
                if seen {
                    prop_assert!(p);
                }
                seen |= p;
            }
        }
    }
}
