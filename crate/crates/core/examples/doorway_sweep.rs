//! Exact versus interpolated SMI along a straight sweep past a doorway.
//!
//! The map is known free below a wall and unknown behind it. The wall has a
//! one-meter gap centered at x = 8 m, and the sensor faces the wall from
//! 1.5 m away. Both curves should peak where the gap is in view.

use std::sync::Arc;

use gradmap::gridmap::{GridGeometry, LogOddsParams, OccupancyGrid};
use gradmap::liegroups::{DistanceMetric, Pose};
use gradmap::objective::interpolated_smi;
use gradmap::sensor::{noise_kernel, BeamModel};
use gradmap::smi::direct_viewpoint_smi;
use gradmap::viewgrid::{even_yaws, precompute_ray_tables, ViewpointGrid};

const RES: f64 = 0.25;
const SWEEP_Y: f64 = 6.5;

fn doorway_map() -> OccupancyGrid {
    let geom = GridGeometry::new(64, 64, RES, [0.0, 0.0]).unwrap();
    let mut grid = OccupancyGrid::new(geom, LogOddsParams::default());
    for i in 0..geom.len() {
        let c = geom.cell_at(i);
        grid.log_odds_mut()[i] = match c.y {
            y if y < 32 => -5.0,
            32 | 33 if (30..34).contains(&c.x) => -5.0,
            32 | 33 => 5.0,
            _ => 0.0,
        };
    }
    grid
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

fn main() {
    let grid = Arc::new(doorway_map());
    let model = BeamModel::new(30, 90f64.to_radians(), 10.0, 0.1).unwrap();
    let kernel = noise_kernel(&model, RES);
    let table = Arc::new(precompute_ray_tables(&model, &even_yaws(8), RES));
    let yaw = std::f64::consts::FRAC_PI_2;
    let xs: Vec<f64> = (0..=160).map(|k| 3.0 + k as f64 * 0.0625).collect();

    let exact: Vec<f64> = xs
        .iter()
        .map(|&x| direct_viewpoint_smi(&grid, &Pose::planar(x, SWEEP_Y, yaw), &model, &kernel))
        .collect();
    let ie = argmax(&exact);
    println!("exact argmax x = {:.3} m ({:.2} bits)", xs[ie], exact[ie]);

    let mut curves = Vec::new();
    for xi_max in [1.0, 2.0] {
        let metric = DistanceMetric::planar(1.0, 1.0, 0.1, xi_max).unwrap();
        let vg = ViewpointGrid::new(grid.clone(), table.clone(), model, metric);
        let interp: Vec<f64> = xs
            .iter()
            .map(|&x| interpolated_smi(&Pose::planar(x, SWEEP_Y, yaw), &vg).unwrap())
            .collect();
        let ii = argmax(&interp);
        println!(
            "xi_max = {xi_max}: interpolated argmax x = {:.3} m ({:.2} bits), offset {:.2} cells",
            xs[ii],
            interp[ii],
            (xs[ii] - xs[ie]).abs() / RES
        );
        curves.push(interp);
    }

    println!("\n    x   exact  xi=1  xi=2");
    for k in (0..xs.len()).step_by(8) {
        println!(
            "{:5.2}  {:5.2}  {:5.2}  {:5.2}  {}",
            xs[k],
            exact[k],
            curves[0][k],
            curves[1][k],
            "#".repeat(exact[k] as usize)
        );
    }
}
