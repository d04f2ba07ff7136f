//! SE(3) basics: exponential and logarithm, the right Jacobian, and the
//! weighted pose distance that drives the viewpoint weights.

use gradmap::liegroups::{exp_map, log_map, pose_distance, right_jacobian_inv, DistanceMetric, Pose, Twist};
use nalgebra::{Vector3, Vector6};

fn main() -> gradmap::Result<()> {
    let xi = Twist::new(Vector3::new(1.0, -0.5, 0.2), Vector3::new(0.3, -0.1, 1.2));
    let x = exp_map(&xi);
    let back = log_map(&x)?;
    println!("xi            = {:?}", xi.to_vector().as_slice());
    println!("log(exp(xi))  = {:?}", back.to_vector().as_slice());

    // A small right perturbation moves the log by J_r^-1 times the step.
    let eps = Vector6::new(1e-5, 0.0, 0.0, 0.0, 0.0, 2e-5);
    let moved = log_map(&x.compose(&exp_map(&Twist::from_vector(&eps))))?.to_vector();
    let predicted = xi.to_vector() + right_jacobian_inv(&xi) * eps;
    println!(
        "first-order error of the log update: {:.2e}",
        (moved - predicted).norm()
    );

    let metric = DistanceMetric::paper_planar();
    let a = Pose::planar(0.0, 0.0, 0.0);
    for (dx, dyaw) in [(0.5, 0.0), (1.0, 0.0), (0.0, 1.0), (1.5, 1.5), (2.0, 0.0)] {
        let b = Pose::planar(dx, 0.0, dyaw);
        let d = pose_distance(&a, &b, &metric)?;
        let delta = metric.delta(&log_map(&a.between(&b))?);
        println!("dx {dx:.1} m, dyaw {dyaw:.1} rad: distance {d:.3}, delta {delta:.3} rad");
    }
    Ok(())
}
