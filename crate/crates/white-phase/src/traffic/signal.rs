//! Signal schedules and the feasibility oracle used by tests and by vote
//! aggregation.
//!
//! Red is an encoding, not a stored state: a lane-step is red exactly when
//! its green/white/yellow binaries are all zero, which the [`Indication`]
//! enum guarantees by construction (exactly one of the four states per
//! lane-step).

use serde::{Deserialize, Serialize};

use crate::scene::{IntersectionScene, Parameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
pub enum Indication {
    Red,
    Green,
    White,
    Yellow,
}

impl Indication {
    pub fn g(self) -> bool {
        self == Indication::Green
    }

    pub fn w(self) -> bool {
        self == Indication::White
    }

    pub fn y(self) -> bool {
        self == Indication::Yellow
    }

    /// Green or white: the lane may discharge.
    pub fn active(self) -> bool {
        self.g() || self.w()
    }

    pub fn letter(self) -> char {
        match self {
            Indication::Red => 'r',
            Indication::Green => 'g',
            Indication::White => 'w',
            Indication::Yellow => 'y',
        }
    }
}

/// Per-lane indication sequence over a window of signal steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSchedule {
    /// Global signal step of column 0.
    pub start_step: u64,
    /// `lanes[l][n]` is the indication of lane `l` at column `n`.
    pub lanes: Vec<Vec<Indication>>,
}

impl SignalSchedule {
    pub fn all_red(start_step: u64, lane_count: usize, steps: usize) -> Self {
        SignalSchedule {
            start_step,
            lanes: vec![vec![Indication::Red; steps]; lane_count],
        }
    }

    pub fn steps(&self) -> usize {
        self.lanes.first().map_or(0, Vec::len)
    }

    /// Indication at a global step, clamped to the window: red before the
    /// window, the final column after it.
    pub fn at(&self, lane: usize, step: u64) -> Indication {
        if step < self.start_step {
            return Indication::Red;
        }
        let i = (step - self.start_step) as usize;
        let row = &self.lanes[lane];
        if i < row.len() {
            row[i]
        } else {
            *row.last().unwrap_or(&Indication::Red)
        }
    }
}

/// One constraint violation, identified by rule family and coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: &'static str,
    pub lane: usize,
    pub other: Option<usize>,
    pub step: usize,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] lane {} step {}", self.rule, self.lane, self.step)?;
        if let Some(o) = self.other {
            write!(f, " (vs lane {o})")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Checks a whole schedule window against the signal-timing rules and
/// returns every violation with its coordinates. Steps before the window
/// are treated as red; obligations that are still in progress at the final
/// column are not violations.
///
/// Families checked: conflicting green-green/green-white exclusion, minimum
/// active time after red-to-green, minimum white after red-to-white,
/// maximum green, yellow duration and placement after green/white
/// termination, all-red clearance around yellows, green-to-white handoff
/// clearance across conflicting lanes, and no spontaneous yellow.
pub fn validate_schedule(
    sched: &SignalSchedule,
    scene: &IntersectionScene,
    params: &Parameters,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let lanes = &sched.lanes;
    let n_lanes = lanes.len();
    let steps = sched.steps();
    if steps == 0 || n_lanes != scene.lane_count() {
        return out;
    }
    let ys = params.signal_steps_of(params.yellow);
    let rs = params.signal_steps_of(params.all_red);
    let gmax = params.signal_steps_of(params.max_green);
    // Column -1 (before the window) reads as red.
    let at = |l: usize, n: isize| -> Indication {
        if n < 0 {
            Indication::Red
        } else {
            lanes[l][n as usize]
        }
    };

    for l in 0..n_lanes {
        let kind = scene.lanes[l].movement;
        let g_min = params.signal_steps_of(params.min_active(kind));
        let w_min = params.signal_steps_of(params.min_white(kind));
        for n in -1..steps as isize - 1 {
            let cur = at(l, n);
            let next = at(l, n + 1);
            // Red-to-green starts a minimum active (green then white) run.
            if next.g() && !cur.g() {
                let need = g_min.min(steps - (n + 1) as usize);
                for z in 0..need {
                    let s = (n + 1) as usize + z;
                    if !lanes[l][s].active() {
                        out.push(Violation {
                            rule: "min-active",
                            lane: l,
                            other: None,
                            step: s,
                            detail: format!(
                                "active run from step {} ends before {} steps",
                                n + 1,
                                g_min
                            ),
                        });
                        break;
                    }
                }
            }
            // Red-to-white starts a minimum white run (a green-to-white
            // handoff carries no white minimum).
            if next.w() && !cur.w() && !cur.g() {
                let need = w_min.min(steps - (n + 1) as usize);
                for z in 0..need {
                    let s = (n + 1) as usize + z;
                    if !lanes[l][s].w() {
                        out.push(Violation {
                            rule: "min-white",
                            lane: l,
                            other: None,
                            step: s,
                            detail: format!(
                                "white run from step {} ends before {} steps",
                                n + 1,
                                w_min
                            ),
                        });
                        break;
                    }
                }
            }
            // Green or white terminating into red requires exactly a yellow
            // interval; both checks clip at the end of the window.
            let g_term = cur.g() && !next.g() && !next.w();
            let w_term = cur.w() && !next.w() && !next.g();
            if g_term || w_term {
                let need = ys.min(steps - (n + 1) as usize);
                for z in 0..need {
                    let s = (n + 1) as usize + z;
                    if !lanes[l][s].y() {
                        out.push(Violation {
                            rule: "yellow-after-termination",
                            lane: l,
                            other: None,
                            step: s,
                            detail: format!(
                                "{} ended at step {} without {} yellow steps",
                                if g_term { "green" } else { "white" },
                                n,
                                ys
                            ),
                        });
                        break;
                    }
                }
            }
            // No spontaneous yellow: yellow only continues a green, white,
            // or yellow step.
            if next.y() && cur == Indication::Red {
                out.push(Violation {
                    rule: "spontaneous-yellow",
                    lane: l,
                    other: None,
                    step: (n + 1) as usize,
                    detail: "yellow not preceded by green, white, or yellow".into(),
                });
            }
        }
        // Maximum green: no window of gmax+1 steps may be all green.
        if steps > gmax {
            for n in 0..steps - gmax {
                let run = (n..=n + gmax).map(|z| lanes[l][z].g() as usize).sum::<usize>();
                if run > gmax {
                    out.push(Violation {
                        rule: "max-green",
                        lane: l,
                        other: None,
                        step: n,
                        detail: format!("green exceeds {gmax} steps"),
                    });
                }
            }
        }
        // Yellow runs never exceed the yellow duration.
        if steps > ys {
            for n in 0..steps - ys {
                let run = (n..=n + ys).map(|z| lanes[l][z].y() as usize).sum::<usize>();
                if run > ys {
                    out.push(Violation {
                        rule: "yellow-duration",
                        lane: l,
                        other: None,
                        step: n,
                        detail: format!("yellow exceeds {ys} steps"),
                    });
                }
            }
        }
    }

    for l in 0..n_lanes {
        for &lp in scene.conflicting(crate::scene::LaneId(l)) {
            let lp = lp.0;
            for n in 0..steps {
                // Conflicting green-green and green-white exclusion.
                if lanes[l][n].g() && (lanes[lp][n].g() || lanes[lp][n].w()) {
                    out.push(Violation {
                        rule: "conflicting-activation",
                        lane: l,
                        other: Some(lp),
                        step: n,
                        detail: format!(
                            "green with conflicting {}",
                            if lanes[lp][n].g() { "green" } else { "white" }
                        ),
                    });
                }
            }
            for n in 0..steps as isize {
                // All-red clearance: a yellow on the conflicting lane at
                // n-1 blocks activation of either lane over the next
                // all-red window unless this lane is itself in yellow.
                if at(lp, n - 1).y() && !at(l, n).y() {
                    for z in 0..rs {
                        let s = n as usize + z;
                        if s >= steps {
                            break;
                        }
                        if lanes[l][s].active() || lanes[lp][s].active() {
                            out.push(Violation {
                                rule: "all-red-clearance",
                                lane: l,
                                other: Some(lp),
                                step: s,
                                detail: format!(
                                    "activation within {rs} steps of lane {lp} yellow"
                                ),
                            });
                            break;
                        }
                    }
                }
                // Green-to-white handoff on a lane keeps conflicting lanes
                // out of white for the clearance interval.
                if at(lp, n - 1).g() && at(lp, n).w() {
                    for z in 0..rs {
                        let s = n as usize + z;
                        if s >= steps {
                            break;
                        }
                        if lanes[l][s].w() {
                            out.push(Violation {
                                rule: "handoff-clearance",
                                lane: l,
                                other: Some(lp),
                                step: s,
                                detail: format!(
                                    "white within {rs} steps of lane {lp} green-to-white handoff"
                                ),
                            });
                            break;
                        }
                    }
                }
            }
        }
    }

    out.sort_by_key(|v| (v.step, v.lane, v.rule));
    out
}
