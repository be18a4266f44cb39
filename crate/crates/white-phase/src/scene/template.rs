//! Built-in four-leg intersection template.
//!
//! Two perpendicular roads, one exclusive through lane and one exclusive
//! left-turn lane per approach, right-hand traffic on a uniform lane-width
//! grid. Conflict sets and conflict points are derived from the actual 2-D
//! crossings of the movement paths inside the box, so the template stays
//! consistent if the lane width changes.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use super::{Approach, IntersectionScene, LaneId, LaneSpec, MovementKind, SceneError};

/// A movement path through the intersection box, parameterized by distance
/// from the stop bar.
#[derive(Debug, Clone, Copy)]
enum Path {
    Line {
        start: (f64, f64),
        dir: (f64, f64),
        len: f64,
    },
    /// Quarter circle swept counter-clockwise from `start_angle`.
    Arc {
        center: (f64, f64),
        radius: f64,
        start_angle: f64,
    },
}

impl Path {
    fn len(&self) -> f64 {
        match *self {
            Path::Line { len, .. } => len,
            Path::Arc { radius, .. } => radius * FRAC_PI_2,
        }
    }

    /// Arc-length positions at which `self` crosses `other`, paired with the
    /// matching positions on `other`.
    fn crossings(&self, other: &Path) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for p in candidate_points(self, other) {
            if let (Some(sa), Some(sb)) = (self.locate(p), other.locate(p)) {
                out.push((sa, sb));
            }
        }
        out
    }

    /// Distance along the path of a point known to lie on the carrier
    /// line/circle, or `None` if it falls outside the segment/arc.
    fn locate(&self, p: (f64, f64)) -> Option<f64> {
        const TOL: f64 = 1e-6;
        match *self {
            Path::Line { start, dir, len } => {
                let s = (p.0 - start.0) * dir.0 + (p.1 - start.1) * dir.1;
                (-TOL..=len + TOL).contains(&s).then(|| s.clamp(0.0, len))
            }
            Path::Arc {
                center,
                radius,
                start_angle,
            } => {
                let ang = (p.1 - center.1).atan2(p.0 - center.0);
                let mut sweep = ang - start_angle;
                while sweep < -TOL {
                    sweep += std::f64::consts::TAU;
                }
                (sweep <= FRAC_PI_2 + TOL).then(|| (sweep * radius).clamp(0.0, self.len()))
            }
        }
    }
}

/// Intersection points of the two carrier curves (line or circle).
fn candidate_points(a: &Path, b: &Path) -> Vec<(f64, f64)> {
    match (*a, *b) {
        (
            Path::Line {
                start: p1, dir: d1, ..
            },
            Path::Line {
                start: p2, dir: d2, ..
            },
        ) => {
            let det = d1.0 * d2.1 - d1.1 * d2.0;
            if det.abs() < 1e-12 {
                return Vec::new();
            }
            let dx = p2.0 - p1.0;
            let dy = p2.1 - p1.1;
            let t = (dx * d2.1 - dy * d2.0) / det;
            vec![(p1.0 + t * d1.0, p1.1 + t * d1.1)]
        }
        (Path::Line { start, dir, .. }, Path::Arc { center, radius, .. })
        | (Path::Arc { center, radius, .. }, Path::Line { start, dir, .. }) => {
            // Project the center onto the line; offset by the chord half-length.
            let to_c = (center.0 - start.0, center.1 - start.1);
            let proj = to_c.0 * dir.0 + to_c.1 * dir.1;
            let foot = (start.0 + proj * dir.0, start.1 + proj * dir.1);
            let d2 = (center.0 - foot.0).powi(2) + (center.1 - foot.1).powi(2);
            let rem = radius * radius - d2;
            if rem < 0.0 {
                return Vec::new();
            }
            let h = rem.sqrt();
            vec![
                (foot.0 - h * dir.0, foot.1 - h * dir.1),
                (foot.0 + h * dir.0, foot.1 + h * dir.1),
            ]
        }
        (
            Path::Arc {
                center: c1,
                radius: r1,
                ..
            },
            Path::Arc {
                center: c2,
                radius: r2,
                ..
            },
        ) => {
            let dx = c2.0 - c1.0;
            let dy = c2.1 - c1.1;
            let d = (dx * dx + dy * dy).sqrt();
            if d < 1e-9 || d > r1 + r2 || d < (r1 - r2).abs() {
                return Vec::new();
            }
            let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
            let h2 = r1 * r1 - a * a;
            if h2 < 0.0 {
                return Vec::new();
            }
            let h = h2.sqrt();
            let mid = (c1.0 + a * dx / d, c1.1 + a * dy / d);
            vec![
                (mid.0 + h * dy / d, mid.1 - h * dx / d),
                (mid.0 - h * dy / d, mid.1 + h * dx / d),
            ]
        }
    }
}

struct TemplateLane {
    name: &'static str,
    approach: Approach,
    movement: MovementKind,
    path: Path,
}

fn template_lanes(w: f64) -> Vec<TemplateLane> {
    use Approach::*;
    use MovementKind::*;
    let r = 2.5 * w;
    let edge = 2.0 * w;
    // Headings: EB +x, WB -x, NB +y, SB -y. Left-turn arcs are quarter
    // circles of radius 2.5 lane widths swept counter-clockwise.
    vec![
        TemplateLane {
            name: "EB-T",
            approach: East,
            movement: Through,
            path: Path::Line {
                start: (-edge, -1.5 * w),
                dir: (1.0, 0.0),
                len: 2.0 * edge,
            },
        },
        TemplateLane {
            name: "EB-L",
            approach: East,
            movement: Left,
            path: Path::Arc {
                center: (-edge, edge),
                radius: r,
                start_angle: -FRAC_PI_2,
            },
        },
        TemplateLane {
            name: "WB-T",
            approach: West,
            movement: Through,
            path: Path::Line {
                start: (edge, 1.5 * w),
                dir: (-1.0, 0.0),
                len: 2.0 * edge,
            },
        },
        TemplateLane {
            name: "WB-L",
            approach: West,
            movement: Left,
            path: Path::Arc {
                center: (edge, -edge),
                radius: r,
                start_angle: FRAC_PI_2,
            },
        },
        TemplateLane {
            name: "NB-T",
            approach: North,
            movement: Through,
            path: Path::Line {
                start: (1.5 * w, -edge),
                dir: (0.0, 1.0),
                len: 2.0 * edge,
            },
        },
        TemplateLane {
            name: "NB-L",
            approach: North,
            movement: Left,
            path: Path::Arc {
                center: (-edge, -edge),
                radius: r,
                start_angle: 0.0,
            },
        },
        TemplateLane {
            name: "SB-T",
            approach: South,
            movement: Through,
            path: Path::Line {
                start: (-1.5 * w, edge),
                dir: (0.0, -1.0),
                len: 2.0 * edge,
            },
        },
        TemplateLane {
            name: "SB-L",
            approach: South,
            movement: Left,
            path: Path::Arc {
                center: (edge, edge),
                radius: r,
                start_angle: std::f64::consts::PI,
            },
        },
    ]
}

/// Builds the standard four-leg scene with `lane_count_per_approach` lanes
/// per movement. Only the one-through-plus-one-left layout is supported.
pub fn standard_four_leg(lane_count_per_approach: usize) -> Result<IntersectionScene, SceneError> {
    standard_four_leg_with(lane_count_per_approach, 12.0, 650.0, 650.0, 150.0)
}

/// Template constructor with explicit grid geometry.
pub fn standard_four_leg_with(
    lane_count_per_approach: usize,
    lane_width: f64,
    stop_bar: f64,
    detection_range: f64,
    exit_run: f64,
) -> Result<IntersectionScene, SceneError> {
    if lane_count_per_approach != 1 {
        return Err(SceneError::Validation(format!(
            "unsupported layout: {lane_count_per_approach} lanes per movement (only 1 supported)"
        )));
    }
    let tmpl = template_lanes(lane_width);
    let lanes: Vec<LaneSpec> = tmpl
        .iter()
        .enumerate()
        .map(|(i, t)| LaneSpec {
            id: LaneId(i),
            name: t.name.to_string(),
            approach: t.approach,
            movement: t.movement,
            destination: stop_bar + t.path.len() + exit_run,
        })
        .collect();

    let mut conflicts: Vec<Vec<LaneId>> = vec![Vec::new(); tmpl.len()];
    let mut conflict_points = BTreeMap::new();
    for a in 0..tmpl.len() {
        for b in (a + 1)..tmpl.len() {
            let hits = tmpl[a].path.crossings(&tmpl[b].path);
            // The template geometry yields at most one transversal crossing
            // per pair; multiple hits would mean overlapping paths.
            if let Some(&(sa, sb)) = hits.first() {
                conflicts[a].push(LaneId(b));
                conflicts[b].push(LaneId(a));
                conflict_points.insert((a, b), stop_bar + sa);
                conflict_points.insert((b, a), stop_bar + sb);
            }
        }
    }
    for c in &mut conflicts {
        c.sort();
    }

    let scene = IntersectionScene {
        lanes,
        stop_bar,
        detection_range,
        conflicts,
        conflict_points,
    };
    scene.validate()?;
    Ok(scene)
}
