//! Frontier clusters, the free-space distance transform and the A* seed path
//! on a partially explored map.

use gradmap::gridmap::{distance_transform, find_frontiers, CellIndex, GridGeometry, LogOddsParams, OccupancyGrid};
use gradmap::liegroups::Pose;
use gradmap::planner::init_path;

fn main() -> gradmap::Result<()> {
    // Known free pocket with an obstacle, unknown everywhere else.
    let geom = GridGeometry::new(60, 40, 0.25, [0.0, 0.0])?;
    let mut map = OccupancyGrid::new(geom, LogOddsParams::default());
    for i in 0..geom.len() {
        let c = geom.cell_at(i);
        let pocket = (5..40).contains(&c.x) && (5..30).contains(&c.y);
        let block = (18..24).contains(&c.x) && (10..25).contains(&c.y);
        map.log_odds_mut()[i] = match (pocket, block) {
            (true, true) => 5.0,
            (true, false) => -5.0,
            _ => 0.0,
        };
    }

    let clusters = find_frontiers(&map);
    for (k, c) in clusters.iter().enumerate() {
        let a = c.anchor(&map);
        println!("cluster {k}: {} cells, anchor ({}, {})", c.size(), a.x, a.y);
    }

    let free = map.ml_free_space();
    let dist = distance_transform(&free, geom.width, geom.height, geom.resolution);
    let widest = (0..geom.len()).max_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap();
    let w = geom.cell_at(widest);
    println!("largest clearance {:.2} m at cell ({}, {})", dist[widest], w.x, w.y);

    let robot = Pose::planar(2.5, 2.5, 0.0);
    let init = init_path(&robot, &map, 1, 4.0, 6, 1.0, 0.5)?;
    let end = init.trajectory.poses()[0];
    println!(
        "seed path: {} waypoints, {:.2} m, final pose ({:.2}, {:.2}) facing {:.2} rad",
        init.path.len(),
        init.length,
        end.position().x,
        end.position().y,
        end.yaw()
    );

    let on_path = |c: CellIndex| init.path.iter().any(|p| geom.cell_of(*p).is_some_and(|q| q == c));
    for y in (0..40).rev().step_by(2) {
        let row: String = (0..60)
            .map(|x| {
                let c = CellIndex::new(x, y);
                if on_path(c) {
                    '*'
                } else if clusters.iter().any(|k| k.cells.contains(&c)) {
                    'F'
                } else {
                    match map.log_odds()[geom.linear(c)] {
                        l if l > 0.0 => '#',
                        l if l < 0.0 => '.',
                        _ => ' ',
                    }
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
