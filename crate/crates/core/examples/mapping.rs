//! Simulated lidar scans on a known world, fused into a log-odds map.

use gradmap::gridmap::{BinaryGrid, CellIndex, GridGeometry, LogOddsParams, OccupancyGrid};
use gradmap::liegroups::Pose;
use gradmap::sensor::{simulate_scan, BeamModel};

fn main() -> gradmap::Result<()> {
    let geom = GridGeometry::new(80, 60, 0.25, [0.0, 0.0])?;
    let mut truth = BinaryGrid::empty(geom);
    for i in 0..geom.len() {
        let c = geom.cell_at(i);
        let border = c.x < 2 || c.y < 2 || c.x >= 78 || c.y >= 58;
        let pillar = (30..36).contains(&c.x) && (20..40).contains(&c.y);
        truth.cells_mut()[i] = border || pillar;
    }

    let model = BeamModel::new(60, 90f64.to_radians(), 10.0, 0.1)?;
    let mut map = OccupancyGrid::new(geom, LogOddsParams::default());
    println!("prior entropy {:.1} bits", map.entropy());
    let route = [
        (2.0, 7.5, 0.0),
        (4.0, 4.0, 0.6),
        (6.0, 11.0, -0.6),
        (12.0, 7.5, 3.1),
        (16.0, 7.5, 1.6),
    ];
    for (k, &(x, y, yaw)) in route.iter().enumerate() {
        let pose = Pose::planar(x, y, yaw);
        let scan = simulate_scan(&truth, &pose, &model, k as u64)?;
        map.update_from_scan(&pose, &scan, &model)?;
        println!(
            "after scan {k} from ({x:4.1}, {y:4.1}): entropy {:.1} bits",
            map.entropy()
        );
    }

    for y in (0..60).rev().step_by(3) {
        let row: String = (0..80)
            .step_by(2)
            .map(|x| match map.probability(CellIndex::new(x, y)) {
                p if p > 0.7 => '#',
                p if p < 0.3 => '.',
                _ => ' ',
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
