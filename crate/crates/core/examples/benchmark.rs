//! A small planner comparison: two worlds, two starts each, summarized by
//! mean entropy at distance checkpoints and mean clearance.

use gradmap::cli::RunConfig;
use gradmap::sim::{run_benchmark, summarize, write_summary_csv, BenchmarkConfig};

fn main() -> gradmap::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.episode.budget_m = 50.0;
    cfg.bench = BenchmarkConfig {
        env_count: 2,
        starts: 2,
        ..BenchmarkConfig::default()
    };
    let planner = cfg.build_planner()?;
    let records = run_benchmark(&cfg.environment, &cfg.episode, &planner, &cfg.bench)?;
    for r in &records {
        println!(
            "{:>8} env {} start {}: {:.1} m, final entropy {:.0} bits, {}",
            r.planner,
            r.env_seed,
            r.start_idx,
            r.distance(),
            r.rows.last().map_or(f64::NAN, |row| row.entropy_bits),
            r.termination
        );
    }
    let summary = summarize(&records, &cfg.bench, cfg.episode.budget_m);
    write_summary_csv(&mut std::io::stdout().lock(), &summary)?;
    Ok(())
}
