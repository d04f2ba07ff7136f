//! The planning objective over a trajectory of continuous poses and its
//! analytic gradient with respect to right perturbations of each pose.
//!
//! Per pose `X`, every neighboring viewpoint `V` gets the weight
//! `w_V = 1 + cos(delta_V)`, with `delta_V` the scaled distance of
//! `xi_V = log(X^-1 V)`. The interpolated value of any per-viewpoint scalar
//! `s_V` is `sum_V w_V s_V / eta` with `eta = sum_V w_V`. Perturbing
//! `X -> X exp(psi)` changes `xi_V` by `-J_l^-1(xi_V) psi` to first order,
//! which gives
//!
//! ```text
//! grad = (pi / xi_max)^2 / eta^2 * sum_V (eta s_V - beta) sinc(delta_V) J_l^-T(xi_V) Gamma xi_V
//! ```
//!
//! where `beta = sum_V w_V s_V`. The trajectory objective adds, per pose,
//! interpolated SMI plus `gamma_c` times interpolated log free distance, and
//! subtracts the pairwise overlap penalty.

use std::io::Write;

use nalgebra::Vector6;

use crate::error::{Error, Result};
use crate::liegroups::{left_jacobian_inv, DistanceMetric, Pose};
use crate::sensor::FovGeometry;
use crate::viewgrid::{Neighbor, ViewpointGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveConfig {
    pub gamma_c: f64,
    pub gamma_q: f64,
    /// Overlap radius (meters): FOV diameter plus `xi_max`.
    pub delta_q: f64,
    pub horizon: usize,
    /// Free distance used for viewpoints with `d = 0`, as a fraction of the resolution.
    pub collision_floor: f64,
    pub eta_floor: f64,
}

impl ObjectiveConfig {
    pub fn new(gamma_c: f64, gamma_q: f64, fov: &FovGeometry, metric: &DistanceMetric, horizon: usize) -> Result<Self> {
        let cfg = Self {
            gamma_c,
            gamma_q,
            delta_q: fov.diameter + metric.xi_max(),
            horizon,
            collision_floor: 0.1,
            eta_floor: 1e-9,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma_c >= 0.0
            && self.gamma_q >= 0.0
            && self.delta_q > 0.0
            && self.horizon >= 1
            && self.collision_floor > 0.0
            && self.eta_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid objective config {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>) -> Self {
        Self { poses }
    }

    /// Fails unless the trajectory has exactly `horizon` poses.
    pub fn with_horizon(poses: Vec<Pose>, horizon: usize) -> Result<Self> {
        if poses.len() != horizon {
            return Err(Error::TrajectoryLength {
                expected: horizon,
                got: poses.len(),
            });
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Pose list with one `x y yaw` line per pose.
    pub fn write_poses<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for p in &self.poses {
            let t = p.position();
            writeln!(out, "{} {} {}", t.x, t.y, p.yaw())?;
        }
        Ok(())
    }
}

/// Convex weights of `neighbors`, in the same order.
pub fn alpha_weights(x: &Pose, neighbors: &[Neighbor]) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        let p = x.position();
        return Err(Error::DegenerateNeighborhood { x: p.x, y: p.y });
    }
    let w: Vec<f64> = neighbors.iter().map(|n| 1.0 + n.delta.cos()).collect();
    let eta: f64 = w.iter().sum();
    Ok(w.into_iter().map(|w| w / eta).collect())
}

/// Interpolated value of a per-viewpoint scalar and its gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interpolation {
    pub value: f64,
    pub gradient: Vector6<f64>,
    /// True when the weight sum fell below the floor and was clamped.
    pub eta_floored: bool,
}

fn sinc(d: f64) -> f64 {
    if d < 1e-4 {
        1.0 - d * d / 6.0
    } else {
        d.sin() / d
    }
}

/// Interpolates `values[k]` (attached to `neighbors[k]`) at the query pose.
pub fn interpolate(neighbors: &[Neighbor], values: &[f64], metric: &DistanceMetric, eta_floor: f64) -> Interpolation {
    assert_eq!(neighbors.len(), values.len());
    let w: Vec<f64> = neighbors.iter().map(|n| 1.0 + n.delta.cos()).collect();
    let raw_eta: f64 = w.iter().sum();
    let eta = raw_eta.max(eta_floor);
    let beta: f64 = w.iter().zip(values).map(|(w, s)| w * s).sum();
    let gamma = metric.gamma();
    let c = std::f64::consts::PI / metric.xi_max();
    let mut acc = Vector6::zeros();
    for (n, &s) in neighbors.iter().zip(values) {
        let coeff = (eta * s - beta) * sinc(n.delta);
        if coeff == 0.0 {
            continue;
        }
        let xi = n.xi.to_vector();
        let gxi = Vector6::from_fn(|i, _| gamma[i] * xi[i]);
        acc += coeff * (left_jacobian_inv(&n.xi).transpose() * gxi);
    }
    Interpolation {
        value: beta / eta,
        gradient: acc * (c * c / (eta * eta)),
        eta_floored: raw_eta < eta_floor,
    }
}

/// Per-pose parts of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseTerms {
    pub smi: f64,
    pub collision: f64,
    /// This pose's half share of the pairwise overlap penalty.
    pub overlap: f64,
    pub gradient: Vector6<f64>,
    pub eta_floored: bool,
}

impl PoseTerms {
    pub fn total(&self) -> f64 {
        self.smi + self.collision - self.overlap
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveReport {
    pub total: f64,
    pub poses: Vec<PoseTerms>,
}

pub const REPORT_CSV_HEADER: &str = "iteration,pose,smi,collision,overlap,total,grad_norm";

impl ObjectiveReport {
    pub fn gradients(&self) -> Vec<Vector6<f64>> {
        self.poses.iter().map(|p| p.gradient).collect()
    }

    /// One CSV row per pose, without header.
    pub fn write_csv_rows<W: Write>(&self, out: &mut W, iteration: usize) -> std::io::Result<()> {
        for (i, p) in self.poses.iter().enumerate() {
            writeln!(
                out,
                "{iteration},{i},{},{},{},{},{}",
                p.smi,
                p.collision,
                p.overlap,
                p.total(),
                p.gradient.norm()
            )?;
        }
        Ok(())
    }
}

/// Natural log of the free distance at each neighbor, floored for `d = 0`.
fn log_free_distances(neighbors: &[Neighbor], vg: &ViewpointGrid, cfg: &ObjectiveConfig) -> Result<Vec<f64>> {
    let floor = (cfg.collision_floor * vg.geometry().resolution).ln();
    let mut any_free = false;
    let logs = neighbors
        .iter()
        .map(|n| {
            let d = vg.free_distance(n.id.cell);
            if d > 0.0 {
                any_free = true;
                d.ln()
            } else {
                floor
            }
        })
        .collect();
    if any_free {
        Ok(logs)
    } else {
        Err(Error::NeighborhoodInCollision)
    }
}

/// `sum_V alpha_V I(V)` with cached viewpoint SMI.
pub fn interpolated_smi(x: &Pose, vg: &ViewpointGrid) -> Result<f64> {
    let nb = vg.nonempty_neighborhood(x)?;
    let smi: Vec<f64> = nb.iter().map(|n| vg.cached_smi(n.id)).collect();
    Ok(interpolate(&nb, &smi, vg.metric(), 1e-9).value)
}

/// `gamma_c sum_V alpha_V log d(V)`.
pub fn collision_penalty(x: &Pose, vg: &ViewpointGrid, cfg: &ObjectiveConfig) -> Result<f64> {
    let nb = vg.nonempty_neighborhood(x)?;
    let logs = log_free_distances(&nb, vg, cfg)?;
    Ok(cfg.gamma_c * interpolate(&nb, &logs, vg.metric(), cfg.eta_floor).value)
}

fn pair_hinge(pi: &Pose, pj: &Pose, delta_q: f64) -> (f64, nalgebra::Vector3<f64>) {
    let d = pi.position() - pj.position();
    let r = d.norm();
    let h = (2.0 * delta_q - r).max(0.0);
    let grad_pi = if h > 0.0 && r > 0.0 {
        -2.0 * h * d / r
    } else {
        nalgebra::Vector3::zeros()
    };
    (h * h, grad_pi)
}

/// `(gamma_q / 2) sum_{i != j} max(0, 2 delta_q - |p_i - p_j|)^2`.
pub fn overlap_penalty(traj: &Trajectory, cfg: &ObjectiveConfig) -> f64 {
    overlap_terms(traj, cfg).0.iter().sum()
}

/// Per-pose overlap shares and the gradient of `-overlap` for each pose.
fn overlap_terms(traj: &Trajectory, cfg: &ObjectiveConfig) -> (Vec<f64>, Vec<Vector6<f64>>) {
    let poses = traj.poses();
    let n = poses.len();
    let mut share = vec![0.0; n];
    let mut grad = vec![Vector6::zeros(); n];
    for i in 0..n {
        let mut dpos = nalgebra::Vector3::zeros();
        for j in 0..n {
            if i == j {
                continue;
            }
            let (q, g) = pair_hinge(&poses[i], &poses[j], cfg.delta_q);
            share[i] += 0.5 * cfg.gamma_q * q;
            dpos += g;
        }
        // A right perturbation moves the position by R rho to first order.
        let drho = -cfg.gamma_q * (poses[i].rotation().transpose() * dpos);
        grad[i].fixed_rows_mut::<3>(0).copy_from(&drho);
    }
    (share, grad)
}

fn single_pose(x: &Pose, vg: &ViewpointGrid, cfg: &ObjectiveConfig, with_gradient: bool) -> Result<PoseTerms> {
    let nb = vg.nonempty_neighborhood(x)?;
    let logs = log_free_distances(&nb, vg, cfg)?;
    let smi: Vec<f64> = nb.iter().map(|n| vg.cached_smi(n.id)).collect();
    let metric = vg.metric();
    let w: Vec<f64> = nb.iter().map(|n| 1.0 + n.delta.cos()).collect();
    let raw_eta: f64 = w.iter().sum();
    let eta = raw_eta.max(cfg.eta_floor);
    let dot = |v: &[f64]| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / eta;
    let gradient = if with_gradient {
        let combined: Vec<f64> = smi.iter().zip(&logs).map(|(s, l)| s + cfg.gamma_c * l).collect();
        interpolate(&nb, &combined, metric, cfg.eta_floor).gradient
    } else {
        Vector6::zeros()
    };
    Ok(PoseTerms {
        smi: dot(&smi),
        collision: cfg.gamma_c * dot(&logs),
        overlap: 0.0,
        gradient,
        eta_floored: raw_eta < cfg.eta_floor,
    })
}

fn evaluate(
    traj: &Trajectory,
    vg: &ViewpointGrid,
    cfg: &ObjectiveConfig,
    with_gradient: bool,
) -> Result<ObjectiveReport> {
    if traj.len() != cfg.horizon {
        return Err(Error::TrajectoryLength {
            expected: cfg.horizon,
            got: traj.len(),
        });
    }
    let mut poses = traj
        .poses()
        .iter()
        .map(|x| single_pose(x, vg, cfg, with_gradient))
        .collect::<Result<Vec<_>>>()?;
    let (share, grad) = overlap_terms(traj, cfg);
    for ((p, s), g) in poses.iter_mut().zip(share).zip(grad) {
        p.overlap = s;
        if with_gradient {
            p.gradient += g;
        }
    }
    let total = poses.iter().map(PoseTerms::total).sum();
    Ok(ObjectiveReport { total, poses })
}

/// Objective value with its per-pose breakdown and gradients.
pub fn objective_value(traj: &Trajectory, vg: &ViewpointGrid, cfg: &ObjectiveConfig) -> Result<ObjectiveReport> {
    evaluate(traj, vg, cfg, true)
}

/// Objective total only; skips the Jacobian work.
pub fn objective_total(traj: &Trajectory, vg: &ViewpointGrid, cfg: &ObjectiveConfig) -> Result<f64> {
    evaluate(traj, vg, cfg, false).map(|r| r.total)
}

pub fn objective_gradient(traj: &Trajectory, vg: &ViewpointGrid, cfg: &ObjectiveConfig) -> Result<Vec<Vector6<f64>>> {
    objective_value(traj, vg, cfg).map(|r| r.gradients())
}

/// Keeps the in-plane components `(x, y, yaw)` of a tangent vector.
pub fn project_planar(g: &Vector6<f64>) -> Vector6<f64> {
    Vector6::new(g[0], g[1], 0.0, 0.0, 0.0, g[5])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::{CellIndex, GridGeometry, LogOddsParams, OccupancyGrid};
    use crate::liegroups::{log_map, Twist};
    use crate::sensor::BeamModel;
    use crate::viewgrid::{even_yaws, precompute_ray_tables, ViewpointId};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn neighbor(delta: f64) -> Neighbor {
        Neighbor {
            id: ViewpointId {
                cell: CellIndex::new(0, 0),
                orientation: 0,
            },
            xi: Twist::zero(),
            delta,
        }
    }

    fn random_setup(seed: u64) -> (ViewpointGrid, ObjectiveConfig) {
        let geom = GridGeometry::new(40, 40, 0.25, [0.0, 0.0]).unwrap();
        let mut grid = OccupancyGrid::new(geom, LogOddsParams::default());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for (i, l) in grid.log_odds_mut().iter_mut().enumerate() {
            let c = geom.cell_at(i);
            *l = if (8..32).contains(&c.x) && (8..32).contains(&c.y) {
                rng.random_range(-3.0..-0.1)
            } else {
                rng.random_range(-2.0..3.0)
            };
        }
        let model = BeamModel::new(12, 1.5, 2.5, 0.1).unwrap();
        let metric = DistanceMetric::planar(1.0, 1.0, 0.1, 1.0).unwrap();
        let table = precompute_ray_tables(&model, &even_yaws(8), 0.25);
        let fov = FovGeometry::from_model(&model);
        let cfg = ObjectiveConfig::new(0.05, 1.0, &fov, &metric, 1).unwrap();
        (ViewpointGrid::new(Arc::new(grid), Arc::new(table), model, metric), cfg)
    }

    #[test]
    fn alpha_single_and_symmetric() {
        let x = Pose::identity();
        assert_eq!(alpha_weights(&x, &[neighbor(0.0)]).unwrap(), vec![1.0]);
        assert_eq!(
            alpha_weights(&x, &[neighbor(1.2), neighbor(1.2)]).unwrap(),
            vec![0.5, 0.5]
        );
        assert!(matches!(
            alpha_weights(&x, &[]),
            Err(Error::DegenerateNeighborhood { .. })
        ));
    }

    #[test]
    fn alpha_three_distinct() {
        let d = [0.3, 1.1, 2.9];
        let a = alpha_weights(&Pose::identity(), &d.map(neighbor)).unwrap();
        let w = d.map(|d: f64| 1.0 + d.cos());
        let s: f64 = w.iter().sum();
        for k in 0..3 {
            assert!((a[k] - w[k] / s).abs() < 1e-15);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_values_give_zero_gradient() {
        let (vg, _) = random_setup(1);
        let x = Pose::planar(5.1, 4.9, 0.4);
        let nb = vg.neighborhood(&x);
        let r = interpolate(&nb, &vec![3.5; nb.len()], vg.metric(), 1e-9);
        assert!((r.value - 3.5).abs() < 1e-12);
        assert!(r.gradient.norm() < 1e-12);
    }

    #[test]
    fn gradient_points_toward_dominant_viewpoint() {
        let (vg, _) = random_setup(1);
        let x = Pose::planar(5.06, 4.93, 0.1);
        let nb = vg.neighborhood(&x);
        let best = nb
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.delta.total_cmp(&b.1.delta))
            .unwrap()
            .0;
        let values: Vec<f64> = (0..nb.len()).map(|k| if k == best { 10.0 } else { 1.0 }).collect();
        let g = interpolate(&nb, &values, vg.metric(), 1e-9).gradient;
        let xi = nb[best].xi.to_vector();
        assert!(g.fixed_rows::<3>(0).dot(&xi.fixed_rows::<3>(0)) > 0.0);
        // Moving a little along the gradient increases the interpolated value.
        let f = |p: &Pose| {
            let n = vg.neighborhood(p);
            let v: Vec<f64> = n.iter().map(|m| if m.id == nb[best].id { 10.0 } else { 1.0 }).collect();
            interpolate(&n, &v, vg.metric(), 1e-9).value
        };
        let moved = x.retract(&Twist::from_vector(&(1e-3 * g / g.norm())));
        assert!(f(&moved) > f(&x));
    }

    #[test]
    fn interpolated_smi_within_neighbor_bounds() {
        let (vg, _) = random_setup(4);
        let x = Pose::planar(4.3, 6.2, -1.0);
        let v = interpolated_smi(&x, &vg).unwrap();
        let s: Vec<f64> = vg.neighborhood(&x).iter().map(|n| vg.cached_smi(n.id)).collect();
        assert!(v >= s.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-12);
        assert!(v <= s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1e-12);
    }

    #[test]
    fn collision_penalty_matches_weighted_sum() {
        let (vg, cfg) = random_setup(2);
        let x = Pose::planar(3.0, 3.4, 0.5);
        let nb = vg.neighborhood(&x);
        let a = alpha_weights(&x, &nb).unwrap();
        let floor = (0.1f64 * 0.25).ln();
        let direct: f64 = nb
            .iter()
            .zip(&a)
            .map(|(n, a)| {
                let d = vg.free_distance(n.id.cell);
                a * cfg.gamma_c * if d > 0.0 { d.ln() } else { floor }
            })
            .sum();
        assert!((collision_penalty(&x, &vg, &cfg).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn overlap_cases() {
        let (_, mut cfg) = random_setup(0);
        cfg.horizon = 2;
        let same = Trajectory::new(vec![Pose::planar(1.0, 1.0, 0.0), Pose::planar(1.0, 1.0, 2.0)]);
        let q = overlap_penalty(&same, &cfg);
        assert!((q - 4.0 * cfg.delta_q * cfg.delta_q).abs() < 1e-12);
        let far = Trajectory::new(vec![
            Pose::planar(0.0, 0.0, 0.0),
            Pose::planar(2.0 * cfg.delta_q, 0.0, 0.0),
        ]);
        assert_eq!(overlap_penalty(&far, &cfg), 0.0);
    }

    #[test]
    fn overlap_gradient_matches_finite_differences() {
        let (_, mut cfg) = random_setup(0);
        cfg.horizon = 3;
        let traj = Trajectory::new(vec![
            Pose::planar(1.0, 2.0, 0.3),
            Pose::planar(3.5, 1.0, -1.0),
            Pose::planar(2.0, 4.0, 2.5),
        ]);
        let (_, grad) = overlap_terms(&traj, &cfg);
        for (i, g) in grad.iter().enumerate() {
            for (k, &gk) in g.iter().enumerate() {
                let f = |e: f64| {
                    let mut poses = traj.poses().to_vec();
                    poses[i] = poses[i].retract(&Twist::from_vector(&(Vector6::ith(k, e))));
                    -overlap_penalty(&Trajectory::new(poses), &cfg)
                };
                let fd = (f(1e-6) - f(-1e-6)) / 2e-6;
                assert!((fd - gk).abs() < 1e-6 * (1.0 + fd.abs()), "{i} {k}: {fd} vs {gk}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (vg, cfg) = random_setup(7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let x = Pose::planar(
                rng.random_range(3.0..7.0),
                rng.random_range(3.0..7.0),
                rng.random_range(-3.0..3.0),
            );
            let traj = Trajectory::new(vec![x]);
            let g = objective_gradient(&traj, &vg, &cfg).unwrap()[0];
            for k in [0usize, 1, 5] {
                let f = |e: f64| {
                    let xe = x.retract(&Twist::from_vector(&Vector6::ith(k, e)));
                    objective_total(&Trajectory::new(vec![xe]), &vg, &cfg).unwrap()
                };
                let fd = (f(1e-6) - f(-1e-6)) / 2e-6;
                assert!((fd - g[k]).abs() <= 1e-4 * g.norm().max(1e-3), "{k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn report_is_sum_of_parts() {
        let (vg, mut cfg) = random_setup(3);
        cfg.horizon = 2;
        let traj = Trajectory::new(vec![Pose::planar(4.0, 4.0, 0.0), Pose::planar(5.0, 6.0, 1.0)]);
        let r = objective_value(&traj, &vg, &cfg).unwrap();
        let parts: f64 = r.poses.iter().map(|p| p.smi + p.collision - p.overlap).sum();
        assert!((r.total - parts).abs() < 1e-10);
        assert!((r.poses.iter().map(|p| p.overlap).sum::<f64>() - overlap_penalty(&traj, &cfg)).abs() < 1e-10);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let (vg, cfg) = random_setup(3);
        let traj = Trajectory::new(vec![Pose::planar(4.0, 4.0, 0.0); 2]);
        assert!(matches!(
            objective_value(&traj, &vg, &cfg),
            Err(Error::TrajectoryLength { .. })
        ));
    }

    #[test]
    fn neighbor_twists_are_logs() {
        let (vg, _) = random_setup(3);
        let x = Pose::planar(4.1, 4.2, 0.3);
        for n in vg.neighborhood(&x).iter().take(20) {
            let xi = log_map(&x.between(&vg.pose(n.id))).unwrap();
            assert_eq!(xi, n.xi);
        }
    }
}
