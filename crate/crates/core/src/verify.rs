//! Seeded property suites behind `gradmap verify`.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector6;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gridmap::{beam_world_direction, trace_ray, CellIndex, GridGeometry, LogOddsParams, OccupancyGrid};
use crate::liegroups::{exp_map, log_map, right_jacobian, right_jacobian_inv, DistanceMetric, Pose, Twist};
use crate::objective::{interpolated_smi, objective_gradient, objective_total, ObjectiveConfig, Trajectory};
use crate::sensor::{noise_kernel, BeamModel, FovGeometry, NoiseKernel};
use crate::smi::{beam_smi, brute_force_smi, BeamBelief, BRUTE_FORCE_LIMIT};
use crate::viewgrid::{even_yaws, precompute_ray_tables, ViewpointGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Gradcheck,
    SmiOracle,
    Additivity,
    Liegroup,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Gradcheck, Suite::SmiOracle, Suite::Additivity, Suite::Liegroup];

    pub fn run(self, seed: u64) -> Result<SuiteReport> {
        match self {
            Suite::Gradcheck => gradcheck(200, seed),
            Suite::SmiOracle => smi_oracle(500, seed),
            Suite::Additivity => additivity(50, seed),
            Suite::Liegroup => liegroup(1000, seed),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Gradcheck => "gradcheck",
            Suite::SmiOracle => "smi-oracle",
            Suite::Additivity => "additivity",
            Suite::Liegroup => "liegroup",
        })
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.to_string() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite `{s}`")))
    }
}

/// Largest error seen by one check, with a description of the worst case.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub worst: String,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            cases: 0,
            max_error: 0.0,
            tolerance,
            worst: String::new(),
        }
    }

    fn record(&mut self, error: f64, case: impl FnOnce() -> String) {
        self.cases += 1;
        if error.is_nan() || error > self.max_error {
            self.max_error = error;
            self.worst = case();
        }
    }

    pub fn passed(&self) -> bool {
        self.max_error < self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed() { "ok" } else { "FAIL" };
            writeln!(
                f,
                "{} {}: {} cases, max error {:.3e} (tol {:.0e}) {status}",
                self.suite, c.name, c.cases, c.max_error, c.tolerance
            )?;
            if !c.passed() {
                writeln!(f, "  worst case: {}", c.worst)?;
            }
        }
        Ok(())
    }
}

/// Random log-odds field with free space in the middle.
fn random_grid(rng: &mut ChaCha8Rng, cells: usize) -> OccupancyGrid {
    let geom = GridGeometry::new(cells, cells, 0.25, [0.0, 0.0]).expect("positive dims");
    let mut grid = OccupancyGrid::new(geom, LogOddsParams::default());
    let lo = cells as i32 / 5;
    let hi = cells as i32 - lo;
    for (i, l) in grid.log_odds_mut().iter_mut().enumerate() {
        let c = geom.cell_at(i);
        let inner = (lo..hi).contains(&c.x) && (lo..hi).contains(&c.y);
        *l = if inner && rng.random_bool(0.85) {
            rng.random_range(-3.0..-0.1)
        } else {
            rng.random_range(-2.0..3.0)
        };
    }
    grid
}

/// Analytic trajectory gradient against central differences along all six
/// body-frame axes of every pose.
pub fn gradcheck(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut check = Check::new("relative gradient error", 1e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    while done < cases {
        let case_seed = rng.random::<u64>();
        let mut r = ChaCha8Rng::seed_from_u64(case_seed);
        let grid = random_grid(&mut r, 40);
        let model = BeamModel::new(
            r.random_range(6..14),
            r.random_range(1.0..2.0),
            r.random_range(1.5..3.0),
            r.random_range(0.05..0.15),
        )?;
        let metric = DistanceMetric::planar(1.0, 1.0, r.random_range(0.05..0.5), r.random_range(0.6..1.4))?;
        let horizon = r.random_range(1..=3);
        let mut cfg = ObjectiveConfig::new(
            r.random_range(0.0..0.1),
            r.random_range(0.0..2.0),
            &FovGeometry::from_model(&model),
            &metric,
            horizon,
        )?;
        cfg.delta_q = r.random_range(0.5..3.0);
        let table = precompute_ray_tables(&model, &even_yaws(8), 0.25);
        let vg = ViewpointGrid::new(Arc::new(grid), Arc::new(table), model, metric);
        let poses: Vec<Pose> = (0..horizon)
            .map(|_| {
                Pose::planar(
                    r.random_range(3.0..7.0),
                    r.random_range(3.0..7.0),
                    r.random_range(-3.1..3.1),
                )
            })
            .collect();
        let traj = Trajectory::new(poses.clone());
        let Ok(grad) = objective_gradient(&traj, &vg, &cfg) else {
            continue;
        };
        let scale = grad.iter().map(|g| g.norm()).fold(0.0, f64::max).max(1e-3);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for (i, g) in grad.iter().enumerate() {
            for k in 0..6 {
                let f = |e: f64| {
                    let mut p = poses.clone();
                    p[i] = p[i].retract(&Twist::from_vector(&Vector6::ith(k, e)));
                    objective_total(&Trajectory::new(p), &vg, &cfg)
                };
                let fd = (f(h)? - f(-h)?) / (2.0 * h);
                worst = worst.max((fd - g[k]).abs() / scale);
            }
        }
        check.record(worst, || {
            format!("case seed {case_seed}, T = {horizon}, poses {poses:?}")
        });
        done += 1;
    }
    Ok(SuiteReport {
        suite: Suite::Gradcheck,
        checks: vec![check],
    })
}

fn random_kernel(rng: &mut ChaCha8Rng) -> Result<NoiseKernel> {
    let k = rng.random_range(0..=3);
    let half: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut w: Vec<f64> = half.iter().rev().copied().collect();
    w.push(rng.random_range(0.1..1.0));
    w.extend(half.iter().map(|x| x * rng.random_range(0.5..1.5)));
    NoiseKernel::from_weights(w)
}

/// Closed-form beam SMI against enumeration of all joint cell assignments.
pub fn smi_oracle(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut check = Check::new("|closed form - enumeration|", 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let n = rng.random_range(1..=BRUTE_FORCE_LIMIT);
        let probs: Vec<f64> = (0..n)
            .map(|_| match rng.random_range(0..10) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random_range(0.0..1.0),
            })
            .collect();
        let kernel = random_kernel(&mut rng)?;
        let b = BeamBelief::new(probs.clone())?;
        let err = (beam_smi(&b, &kernel) - brute_force_smi(&b, &kernel)?).abs();
        check.record(err, || format!("belief {probs:?}, kernel {:?}", kernel.weights()));
    }
    Ok(SuiteReport {
        suite: Suite::SmiOracle,
        checks: vec![check],
    })
}

/// Compensated sum.
fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

/// Every cell swept by a beam of any viewpoint in `ids`.
fn fov_cells(vg: &ViewpointGrid, poses: &[Pose]) -> std::collections::HashSet<CellIndex> {
    let model = vg.model();
    let mut cells = std::collections::HashSet::new();
    for v in poses {
        let p = v.position();
        for a in model.beam_angles() {
            cells.extend(trace_ray(vg.geometry(), [p.x, p.y], beam_world_direction(v, a), model.max_range).cells);
        }
    }
    cells
}

/// Trajectories whose neighborhoods have disjoint fields of view: the joint
/// interpolated SMI, a weighted sum over every combination of neighborhood
/// viewpoints with all beams traced directly, equals the sum of per-pose
/// interpolated values.
pub fn additivity(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut sum_check = Check::new("|joint - sum of poses|", 1e-12);
    let mut disjoint = Check::new("shared FOV cells", 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = BeamModel::new(7, 1.2, 1.5, 0.1)?;
    let metric = DistanceMetric::planar(1.0, 1.0, 0.4, 0.3)?;
    let fov = FovGeometry::from_model(&model);
    let delta_q = fov.diameter + metric.xi_max();
    let kernel = noise_kernel(&model, 0.25);
    let mut done = 0;
    while done < cases {
        let case_seed = rng.random::<u64>();
        let mut r = ChaCha8Rng::seed_from_u64(case_seed);
        let grid = random_grid(&mut r, 100);
        let table = precompute_ray_tables(&model, &even_yaws(8), 0.25);
        let vg = ViewpointGrid::new(Arc::new(grid), Arc::new(table), model, metric);
        let horizon = r.random_range(2..=3);
        let mut poses: Vec<Pose> = Vec::new();
        while poses.len() < horizon {
            let p = Pose::planar(
                r.random_range(4.0..21.0),
                r.random_range(4.0..21.0),
                r.random_range(-3.1..3.1),
            );
            let far = poses
                .iter()
                .all(|q| (q.position() - p.position()).norm() >= 2.0 * delta_q);
            if far {
                poses.push(p);
            }
        }
        let neigh: Vec<_> = poses.iter().map(|x| vg.neighborhood(x)).collect();
        if neigh.iter().any(Vec::is_empty) {
            continue;
        }
        let alphas: Vec<Vec<f64>> = neigh
            .iter()
            .map(|n| {
                let w: Vec<f64> = n.iter().map(|v| 1.0 + metric.delta(&v.xi).cos()).collect();
                let eta: f64 = w.iter().sum();
                w.iter().map(|x| x / eta).collect()
            })
            .collect();
        let views: Vec<Vec<Pose>> = neigh
            .iter()
            .map(|n| n.iter().map(|v| vg.pose(v.id)).collect())
            .collect();
        let cells: Vec<_> = views.iter().map(|v| fov_cells(&vg, v)).collect();
        let mut shared = 0usize;
        for i in 0..horizon {
            for j in i + 1..horizon {
                shared += cells[i].intersection(&cells[j]).count();
            }
        }
        disjoint.record(shared as f64, || format!("case seed {case_seed}"));

        let direct: Vec<Vec<Vec<f64>>> = views
            .iter()
            .map(|vs| {
                vs.iter()
                    .map(|v| {
                        let p = v.position();
                        model
                            .beam_angles()
                            .iter()
                            .map(|&a| {
                                let t =
                                    trace_ray(vg.geometry(), [p.x, p.y], beam_world_direction(v, a), model.max_range);
                                beam_smi(&BeamBelief::from_cells(vg.snapshot(), &t.cells), &kernel)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut terms = Vec::new();
        let mut idx = vec![0usize; horizon];
        'outer: loop {
            let weight: f64 = (0..horizon).map(|t| alphas[t][idx[t]]).product();
            if weight > 0.0 {
                let beams = (0..horizon).flat_map(|t| direct[t][idx[t]].iter().copied());
                terms.push(weight * neumaier(beams));
            }
            for t in 0..horizon {
                idx[t] += 1;
                if idx[t] < alphas[t].len() {
                    continue 'outer;
                }
                idx[t] = 0;
            }
            break;
        }
        let joint = neumaier(terms);
        let per_pose: Vec<f64> = poses.iter().map(|x| interpolated_smi(x, &vg)).collect::<Result<_>>()?;
        let sum = neumaier(per_pose);
        sum_check.record((joint - sum).abs(), || {
            format!("case seed {case_seed}, poses {poses:?}")
        });
        done += 1;
    }
    Ok(SuiteReport {
        suite: Suite::Additivity,
        checks: vec![sum_check, disjoint],
    })
}

fn random_twist(rng: &mut ChaCha8Rng, max_angle: f64) -> Twist {
    let rho = nalgebra::Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
    let axis = nalgebra::Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0f64));
    let axis = if axis.norm() > 1e-9 {
        axis.normalize()
    } else {
        nalgebra::Vector3::x()
    };
    Twist::new(rho, axis * rng.random_range(0.0..max_angle))
}

/// Exp/log roundtrip and the right-Jacobian perturbation identities.
pub fn liegroup(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut roundtrip = Check::new("exp/log roundtrip", 1e-9);
    let mut forward = Check::new("exp(xi + d) vs exp(xi) exp(J_r d)", 1e-4);
    let mut inverse = Check::new("log(exp(xi) exp(d)) vs xi + J_r^-1 d", 1e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let xi = random_twist(&mut rng, 3.0);
        let back = log_map(&exp_map(&xi))?;
        roundtrip.record((back.to_vector() - xi.to_vector()).norm(), || format!("{xi:?}"));

        let d = random_twist(&mut rng, 1.0).to_vector().normalize() * 1e-6;
        let lhs = exp_map(&Twist::from_vector(&(xi.to_vector() + d)));
        let rhs = exp_map(&xi).compose(&exp_map(&Twist::from_vector(&(right_jacobian(&xi) * d))));
        let gap = log_map(&rhs.between(&lhs))?.to_vector().norm();
        forward.record(gap / d.norm(), || format!("{xi:?}"));

        let moved = log_map(&exp_map(&xi).compose(&exp_map(&Twist::from_vector(&d))))?.to_vector();
        let predicted = xi.to_vector() + right_jacobian_inv(&xi) * d;
        inverse.record((moved - predicted).norm() / d.norm(), || format!("{xi:?}"));
    }
    Ok(SuiteReport {
        suite: Suite::Liegroup,
        checks: vec![roundtrip, forward, inverse],
    })
}
