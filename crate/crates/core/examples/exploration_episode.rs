//! A full exploration episode with each planner on the same world and start,
//! printing entropy against distance traveled.

use gradmap::cli::RunConfig;
use gradmap::sim::{clearance_stats, generate_environment, run_episode, EpisodeConfig, PlannerKind};

fn main() -> gradmap::Result<()> {
    let cfg = RunConfig::default();
    let episode = EpisodeConfig {
        budget_m: 60.0,
        ..cfg.episode
    };
    let env = generate_environment(1, &cfg.environment)?;
    let start = env.start_pose(0, 1.0)?;
    println!(
        "world: {:.0} x {:.0} m, {:.0}% occupied",
        cfg.environment.width_m,
        cfg.environment.height_m,
        100.0 * env.truth.occupied_fraction()
    );

    let mut planner = cfg.build_planner()?;
    for kind in [PlannerKind::Gradient, PlannerKind::Frontier] {
        let r = run_episode(&env, kind, &mut planner, 0, start, &episode)?;
        println!(
            "\n{kind}: {} iterations, {:.1} m, stopped on {}, mean clearance {:.2} m, collisions {}",
            r.rows.len() - 1,
            r.distance(),
            r.termination,
            clearance_stats(&r),
            r.collisions
        );
        for d in (0..=60).step_by(10) {
            println!("  {d:>3} m: {:8.0} bits", r.entropy_at(d as f64));
        }
    }
    Ok(())
}
