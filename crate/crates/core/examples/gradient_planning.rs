//! One planning step: a frontier-seeded pose refined by gradient ascent on
//! the interpolated SMI objective, after a few scans of a random world.

use gradmap::cli::RunConfig;
use gradmap::gridmap::OccupancyGrid;
use gradmap::liegroups::Pose;
use gradmap::objective::objective_value;
use gradmap::sensor::simulate_scan;
use gradmap::sim::generate_environment;

fn main() -> gradmap::Result<()> {
    let cfg = RunConfig::default();
    let mut planner = cfg.build_planner()?;
    let env = generate_environment(3, &cfg.environment)?;
    let start = env.start_pose(0, 1.0)?;

    let mut map = OccupancyGrid::new(*env.geometry(), cfg.episode.log_odds);
    for k in 0..4 {
        let turned = start.compose(&Pose::planar(0.0, 0.0, k as f64 * std::f64::consts::FRAC_PI_2));
        let scan = simulate_scan(&env.truth, &turned, &planner.model, k)?;
        map.update_from_scan(&turned, &scan, &planner.model)?;
    }
    println!("map entropy after a turn in place: {:.0} bits", map.entropy());

    let plan = planner.plan(&start, &map)?;
    let seed = plan.init.poses()[0];
    let best = plan.trajectory.poses()[0];
    println!(
        "seed pose  ({:6.2}, {:6.2}, yaw {:5.2})  f = {:.4}",
        seed.position().x,
        seed.position().y,
        seed.yaw(),
        plan.init_value
    );
    println!(
        "final pose ({:6.2}, {:6.2}, yaw {:5.2})  f = {:.4}",
        best.position().x,
        best.position().y,
        best.yaw(),
        plan.value()
    );
    println!(
        "{} iterations, {} step halvings, {} frozen pose-iterations",
        plan.iterations, plan.halvings, plan.frozen
    );
    for (i, f) in plan.trace.iter().enumerate() {
        println!("  iter {i:>2}: f = {f:.4}");
    }

    let vg = planner.viewpoint_grid(&map);
    let report = objective_value(&plan.trajectory, &vg, &planner.objective)?;
    for (i, t) in report.poses.iter().enumerate() {
        println!(
            "pose {i}: smi {:.4}, collision {:.5}, overlap {:.4}, |grad| {:.2e}",
            t.smi,
            t.collision,
            t.overlap,
            t.gradient.norm()
        );
    }
    Ok(())
}
