//! Planar beam sensor: field-of-view geometry, ground-truth scan simulation
//! and the discretized range-noise kernel used by the information model.

use std::io::Write;

use libm::erfc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::{beam_world_direction, trace_ray, BinaryGrid};
use crate::liegroups::Pose;

/// Kernel half-width is the smallest K whose two-sided tail mass is below this.
pub const KERNEL_TAIL_MASS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamModel {
    pub num_beams: usize,
    /// Full field-of-view angle (radians).
    pub fov_angle: f64,
    /// Meters.
    pub max_range: f64,
    /// Standard deviation of the additive range noise (meters).
    pub noise_sigma: f64,
}

impl BeamModel {
    pub fn new(num_beams: usize, fov_angle: f64, max_range: f64, noise_sigma: f64) -> Result<Self> {
        let m = Self {
            num_beams,
            fov_angle,
            max_range,
            noise_sigma,
        };
        m.validate()?;
        Ok(m)
    }

    /// 10 m range, 90 degree field of view, sigma = 0.1 m.
    pub fn lidar_2d(num_beams: usize) -> Self {
        Self::new(num_beams, std::f64::consts::FRAC_PI_2, 10.0, 0.1).expect("constant model is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.num_beams == 0 {
            return bad("num_beams must be at least 1".into());
        }
        if !(self.fov_angle > 0.0 && self.fov_angle <= std::f64::consts::TAU) {
            return bad(format!("fov_angle must be in (0, 2pi], got {}", self.fov_angle));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return bad(format!("max_range must be positive, got {}", self.max_range));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        Ok(())
    }

    /// Sensor-frame beam angles, evenly spaced across the field of view and
    /// centered on the body x-axis.
    pub fn beam_angles(&self) -> Vec<f64> {
        if self.num_beams == 1 {
            return vec![0.0];
        }
        let step = self.fov_angle / (self.num_beams - 1) as f64;
        (0..self.num_beams)
            .map(|k| -0.5 * self.fov_angle + k as f64 * step)
            .collect()
    }

    /// Half-width (cells) of the discretized noise kernel at `resolution`.
    pub fn kernel_halfwidth(&self, resolution: f64) -> usize {
        if self.noise_sigma == 0.0 {
            return 0;
        }
        let s = self.noise_sigma / resolution;
        let mut k = 0usize;
        while 2.0 * upper_tail((k as f64 + 0.5) / s) >= KERNEL_TAIL_MASS {
            k += 1;
        }
        k
    }
}

/// `P(Z > x)` for a standard normal.
fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// One range reading per beam, in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    angles: Vec<f64>,
    ranges: Vec<f64>,
}

impl Scan {
    pub fn new(angles: Vec<f64>, ranges: Vec<f64>) -> Result<Self> {
        if angles.len() != ranges.len() {
            return Err(Error::InvalidParameter(format!(
                "{} angles but {} ranges",
                angles.len(),
                ranges.len()
            )));
        }
        if ranges.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidParameter("ranges must be finite and non-negative".into()));
        }
        Ok(Self { angles, ranges })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    /// Unit beam directions in the sensor frame.
    pub fn directions(&self) -> Vec<[f64; 2]> {
        self.angles.iter().map(|a| [a.cos(), a.sin()]).collect()
    }

    /// CSV with header `angle,range`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "angle,range")?;
        for (a, r) in self.angles.iter().zip(&self.ranges) {
            writeln!(out, "{a},{r}")?;
        }
        Ok(())
    }
}

/// Field-of-view region of the unobstructed sensor in its own frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FovGeometry {
    /// Largest distance between two points of the region (meters).
    pub diameter: f64,
    pub directions: Vec<[f64; 2]>,
    /// Sector polygon: the sensor origin followed by the arc points at max range.
    pub polygon: Vec<[f64; 2]>,
}

impl FovGeometry {
    pub fn from_model(model: &BeamModel) -> Self {
        let r = model.max_range;
        let diameter = if model.fov_angle >= std::f64::consts::PI {
            2.0 * r
        } else {
            r.max(2.0 * r * (0.5 * model.fov_angle).sin())
        };
        let directions: Vec<[f64; 2]> = model.beam_angles().iter().map(|a| [a.cos(), a.sin()]).collect();
        let mut polygon = vec![[0.0, 0.0]];
        polygon.extend(directions.iter().map(|d| [d[0] * r, d[1] * r]));
        Self {
            diameter,
            directions,
            polygon,
        }
    }
}

/// Simulates one scan against ground truth.
///
/// Each reading is the distance at which the beam enters the first occupied
/// cell plus Gaussian noise, clipped to `[0, max_range]`. Beams that reach max
/// range (or leave the grid) read `max_range` exactly.
pub fn simulate_scan(truth: &BinaryGrid, pose: &Pose, model: &BeamModel, seed: u64) -> Result<Scan> {
    let geom = truth.geometry();
    let p = pose.position();
    let start = [p.x, p.y];
    let cell = geom.cell_of(start).ok_or(Error::OutOfBounds { x: p.x, y: p.y })?;
    if truth.is_occupied(cell) {
        return Err(Error::PoseInCollision);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (model.noise_sigma > 0.0).then(|| Normal::new(0.0, model.noise_sigma).expect("sigma validated"));
    let angles = model.beam_angles();
    let ranges = angles
        .iter()
        .map(|&a| {
            let dir = beam_world_direction(pose, a);
            let trace = trace_ray(geom, start, dir, model.max_range);
            let hit = trace
                .cells
                .iter()
                .position(|c| truth.is_occupied(*c))
                .map(|k| trace.entry[k]);
            match hit {
                Some(r) => {
                    let e = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
                    (r + e).clamp(0.0, model.max_range)
                }
                None => model.max_range,
            }
        })
        .collect();
    Scan::new(angles, ranges)
}

/// Discrete distribution of the range error over cell offsets `-K..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseKernel {
    weights: Vec<f64>,
}

impl NoiseKernel {
    pub fn point_mass() -> Self {
        Self { weights: vec![1.0] }
    }

    /// Builds a kernel from non-negative weights of odd length, normalizing them.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.len().is_multiple_of(2)
            || weights.iter().any(|w| w.is_nan() || *w < 0.0)
            || sum.is_nan()
            || sum <= 0.0
        {
            return Err(Error::InvalidParameter(
                "kernel weights must be odd-length and non-negative".into(),
            ));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn halfwidth(&self) -> usize {
        self.weights.len() / 2
    }

    /// Probability of offset `k`, zero outside the support.
    pub fn weight(&self, k: i64) -> f64 {
        let h = self.halfwidth() as i64;
        if k < -h || k > h {
            0.0
        } else {
            self.weights[(k + h) as usize]
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Gaussian range noise integrated over cell-sized bins centered on each
/// offset, truncated at the model's half-width and renormalized.
pub fn noise_kernel(model: &BeamModel, resolution: f64) -> NoiseKernel {
    let k = model.kernel_halfwidth(resolution);
    if k == 0 {
        return NoiseKernel::point_mass();
    }
    let s = model.noise_sigma / resolution;
    // P(a < Z < b) via upper tails keeps precision in the far bins.
    let bin = |j: i64| {
        let lo = (j as f64 - 0.5) / s;
        let hi = (j as f64 + 0.5) / s;
        if lo >= 0.0 {
            upper_tail(lo) - upper_tail(hi)
        } else if hi <= 0.0 {
            upper_tail(-hi) - upper_tail(-lo)
        } else {
            1.0 - upper_tail(hi) - upper_tail(-lo)
        }
    };
    let k = k as i64;
    let weights = (-k..=k).map(bin).collect();
    NoiseKernel::from_weights(weights).expect("gaussian bins are positive")
}
