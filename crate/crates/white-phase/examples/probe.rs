//! Build/solve timing probe for one CHV vote program (dev tool).
use std::time::Instant;
use white_phase::milp::{solve_mip, Budget};

fn main() {
    use std::collections::BTreeMap;
    use white_phase::programs::*;
    use white_phase::scene::*;
    use white_phase::traffic::*;
    let scene = standard_four_leg(1).unwrap();
    let params = Parameters::default();
    let t0 = 8u64;
    let mut lanes: Vec<LaneState> = (0..scene.lane_count())
        .map(|lane| LaneState { lane, vehicles: Vec::new(), groups: Vec::new(), member: Vec::new() })
        .collect();
    let mut shared = BTreeMap::new();
    let lane = scene.lane_by_name("EB-T").unwrap().0;
    for (i, (x, v)) in [(600.0, 0.0), (570.0, 0.0)].iter().enumerate() {
        let id = VehicleId(i as u32 + 1);
        lanes[lane].vehicles.push(VehState { id, kind: VehicleKind::Chv, x: *x, v: *v, delay: 0.0 });
        shared.insert(id, Trajectory::kinematic(t0, *x, *v, &vec![0.0; 44], params.traj_step, scene.stop_bar));
        lanes[lane].member.push(false);
    }
    let votes = BTreeMap::new();
    let plan = SignalSchedule::all_red(2, scene.lane_count(), 10);
    let history = vec![vec![Indication::Red; 2]; scene.lane_count()];
    let world = World {
        scene: &scene, params: &params, t0,
        signals: SignalView { history: &history, plan: &plan },
        shared: &shared, lanes: &lanes, votes: &votes,
        slack_cap: 80.0, no_white: false,
    };
    let t = Instant::now();
    let built = build_chv_vote_program(&world, lane, 0).unwrap();
    println!("build: {:?} vars={} rows={} binaries={}", t.elapsed(), built.lp.variables.len(), built.lp.rows.len(), built.lp.binary_count());
    let t = Instant::now();
    let sol = solve_mip(&built.lp, Budget::nodes(20000)).unwrap();
    println!("solve: {:?} status={:?} nodes={} value={:.3}", t.elapsed(), sol.status, sol.nodes, sol.value);
}
