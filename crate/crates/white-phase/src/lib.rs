//! Mixed-autonomy intersection control with a white signal phase.
//!
//! This crate simulates a four-leg signalized intersection shared by
//! connected automated vehicles (CAVs) and connected human-driven vehicles
//! (CHVs). During a white phase, CAVs act as mobile controllers: each CAV
//! leads a group of trailing CHVs through the intersection and keeps the
//! group clear of conflicting groups by trajectory constraints instead of
//! phase exclusivity, so conflicting movements can run simultaneously.
//!
//! The control stack is distributed: every vehicle solves a small
//! mixed-integer linear program over a rolling horizon, votes on the signal
//! plan for its lane, and shares its planned trajectory. An iterative
//! agreement loop averages CAV trajectories, refreshes CHV predictions,
//! detects vote stabilization, and fixes the most-voted feasible schedule.
//! A receding-horizon controller applies only the first step of each agreed
//! plan and re-solves as the simulation advances.
//!
//! Module map:
//!
//! * [`scene`] — intersection geometry, conflict points, parameters, demand.
//! * [`traffic`] — vehicles, trajectories, vehicle-groups, signal schedules.
//! * [`chv`] — the linear car-following model used for CHV motion and
//!   prediction.
//! * [`milp`] — a dense-simplex branch-and-bound solver for the per-vehicle
//!   programs.
//! * [`programs`] — builds each vehicle's program and the vote-aggregation
//!   program.
//! * [`agreement`] — the iterative trajectory/vote agreement protocol.
//! * [`controller`] — the receding-horizon loop, plant, and baseline
//!   controllers.
//! * [`metrics`] — delay, stops, time-to-collision, activation rates, and
//!   comfort statistics.

pub mod agreement;
pub mod chv;
pub mod controller;
pub mod metrics;
pub mod milp;
pub mod programs;
pub mod scene;
pub mod traffic;

// The guide chapters double as doc-tests so their snippets stay compilable.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }
    chapter!(Overview, "../../../book/src/overview.md");
    chapter!(Scenarios, "../../../book/src/scenarios.md");
    chapter!(CarFollowing, "../../../book/src/car-following.md");
    chapter!(MilpEngine, "../../../book/src/milp-engine.md");
    chapter!(VehiclePrograms, "../../../book/src/vehicle-programs.md");
    chapter!(Agreement, "../../../book/src/agreement.md");
    chapter!(Controller, "../../../book/src/controller.md");
    chapter!(Verification, "../../../book/src/verification.md");
}
