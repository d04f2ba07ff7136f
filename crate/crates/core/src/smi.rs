//! Shannon mutual information between the map and a beam measurement.
//!
//! Measurement model: the beam stops at the first occupied cell along its
//! trace. A hit in cell `i` yields a range bin drawn from the noise kernel
//! centered on `i`, truncated to the `N` bins of the trace and renormalized.
//! A beam that crosses all `N` cells unoccluded returns a distinct max-range
//! symbol. Because the measurement depends on the map only through the hit
//! event, `I(m; z) = H(z) - sum_i p(i) H(z | i)` exactly.

use crate::error::{Error, Result};
use crate::gridmap::{beam_world_direction, trace_ray, CellIndex, OccupancyGrid};
use crate::liegroups::Pose;
use crate::sensor::{BeamModel, NoiseKernel};

/// Largest belief the enumeration oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Occupancy probabilities of the cells along one beam, sensor outward.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamBelief {
    probs: Vec<f64>,
}

impl BeamBelief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(
                "occupancy probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { probs })
    }

    /// Reads the belief along `cells` from the grid.
    pub fn from_cells(grid: &OccupancyGrid, cells: &[CellIndex]) -> Self {
        Self {
            probs: cells.iter().map(|c| grid.belief(*c)).collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Distribution of the hit event: first occupied cell, or none.
#[derive(Clone, Debug, PartialEq)]
pub struct HitDistribution {
    pub hit: Vec<f64>,
    pub no_hit: f64,
}

impl HitDistribution {
    /// Entropy of the event distribution in bits.
    pub fn entropy(&self) -> f64 {
        self.hit
            .iter()
            .chain(std::iter::once(&self.no_hit))
            .map(|&p| plogp(p))
            .sum()
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

pub fn hit_distribution(belief: &BeamBelief) -> HitDistribution {
    let mut survive = 1.0;
    let hit = belief
        .probs
        .iter()
        .map(|&r| {
            let p = r * survive;
            survive *= 1.0 - r;
            p
        })
        .collect();
    HitDistribution { hit, no_hit: survive }
}

/// Per-beam SMI in bits.
pub fn beam_smi(belief: &BeamBelief, kernel: &NoiseKernel) -> f64 {
    let mut bins = Vec::new();
    beam_smi_probs(&belief.probs, kernel, &mut bins)
}

/// Core of [`beam_smi`] on a raw probability slice; `bins` is scratch space.
fn beam_smi_probs(r: &[f64], kernel: &NoiseKernel, bins: &mut Vec<f64>) -> f64 {
    let n = r.len();
    if n == 0 {
        return 0.0;
    }
    let k = kernel.halfwidth();
    let full = kernel.weights();
    let h_full: f64 = full.iter().map(|&w| plogp(w)).sum();
    bins.clear();
    bins.resize(n, 0.0);
    let mut survive = 1.0;
    let mut conditional = 0.0;
    for (i, &ri) in r.iter().enumerate() {
        let p = ri * survive;
        survive *= 1.0 - ri;
        if p == 0.0 {
            if survive == 0.0 {
                break;
            }
            continue;
        }
        if i >= k && i + k < n {
            for (slot, &w) in bins[i - k..=i + k].iter_mut().zip(full) {
                *slot += p * w;
            }
            conditional += p * h_full;
        } else {
            let lo = i.saturating_sub(k);
            let hi = (i + k).min(n - 1);
            let norm: f64 = (lo..=hi).map(|b| kernel.weight(b as i64 - i as i64)).sum();
            let mut h = 0.0;
            for (b, slot) in bins.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let w = kernel.weight(b as i64 - i as i64) / norm;
                *slot += p * w;
                h += plogp(w);
            }
            conditional += p * h;
        }
    }
    let marginal: f64 = bins.iter().map(|&p| plogp(p)).sum::<f64>() + plogp(survive);
    (marginal - conditional).max(0.0)
}

/// Sum of per-beam SMI over the given traces.
///
/// Cells past a certainly occupied cell cannot influence the beam, so a
/// trace is read only up to the kernel reach beyond that cell.
pub fn viewpoint_smi<I>(grid: &OccupancyGrid, beams: I, kernel: &NoiseKernel) -> f64
where
    I: IntoIterator,
    I::Item: IntoIterator<Item = CellIndex>,
{
    let k = kernel.halfwidth();
    let mut probs = Vec::new();
    let mut bins = Vec::new();
    beams
        .into_iter()
        .map(|cells| {
            probs.clear();
            let mut pad = None;
            for c in cells {
                match pad {
                    Some(0) => break,
                    Some(ref mut left) => {
                        *left -= 1;
                        probs.push(0.0);
                    }
                    None => {
                        let b = grid.belief(c);
                        probs.push(b);
                        if b == 1.0 {
                            pad = Some(k);
                        }
                    }
                }
            }
            beam_smi_probs(&probs, kernel, &mut bins)
        })
        .sum()
}

/// Viewpoint SMI with beams traced directly from `pose`. Zero outside the grid.
pub fn direct_viewpoint_smi(grid: &OccupancyGrid, pose: &Pose, model: &BeamModel, kernel: &NoiseKernel) -> f64 {
    let p = pose.position();
    let traces: Vec<Vec<CellIndex>> = model
        .beam_angles()
        .iter()
        .map(|&a| {
            let dir = beam_world_direction(pose, a);
            trace_ray(grid.geometry(), [p.x, p.y], dir, model.max_range).cells
        })
        .collect();
    viewpoint_smi(grid, traces.iter().map(|t| t.iter().copied()), kernel)
}

/// Exact MI by enumerating every occupancy configuration of the beam cells.
pub fn brute_force_smi(belief: &BeamBelief, kernel: &NoiseKernel) -> Result<f64> {
    let n = belief.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::OracleTooLarge {
            cells: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let r = belief.probs();
    // Measurement alphabet: bins 0..n, then the max-range symbol n.
    let likelihood = |config: u32, z: usize| -> f64 {
        let first = (0..n).find(|&i| config >> i & 1 == 1);
        match first {
            None => f64::from(u8::from(z == n)),
            Some(i) if z < n => {
                let k = kernel.halfwidth() as i64;
                let (lo, hi) = ((i as i64 - k).max(0), (i as i64 + k).min(n as i64 - 1));
                let norm: f64 = (lo..=hi).map(|b| kernel.weight(b - i as i64)).sum();
                kernel.weight(z as i64 - i as i64) / norm
            }
            Some(_) => 0.0,
        }
    };
    let prior = |config: u32| -> f64 {
        (0..n)
            .map(|i| if config >> i & 1 == 1 { r[i] } else { 1.0 - r[i] })
            .product()
    };
    let configs: Vec<(u32, f64)> = (0..1u32 << n).map(|c| (c, prior(c))).collect();
    let pz: Vec<f64> = (0..=n)
        .map(|z| configs.iter().map(|&(c, pm)| pm * likelihood(c, z)).sum())
        .collect();
    let mut mi = 0.0;
    for &(c, pm) in &configs {
        if pm == 0.0 {
            continue;
        }
        for (z, &p) in pz.iter().enumerate() {
            let joint = pm * likelihood(c, z);
            if joint > 0.0 {
                mi += joint * (joint / (pm * p)).log2();
            }
        }
    }
    Ok(mi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::{GridGeometry, LogOddsParams};
    use proptest::prelude::*;

    fn belief(p: &[f64]) -> BeamBelief {
        BeamBelief::new(p.to_vec()).unwrap()
    }

    #[test]
    fn hit_distribution_cases() {
        let h = hit_distribution(&belief(&[0.0, 0.0]));
        assert_eq!(h.no_hit, 1.0);
        let h = hit_distribution(&belief(&[0.5]));
        assert_eq!((h.hit[0], h.no_hit), (0.5, 0.5));
        let h = hit_distribution(&belief(&[0.5, 0.5, 0.5]));
        assert_eq!(h.hit, vec![0.5, 0.25, 0.125]);
        assert_eq!(h.no_hit, 0.125);
    }

    #[test]
    fn noiseless_three_cells() {
        let b = belief(&[0.5, 0.5, 0.5]);
        let k = NoiseKernel::point_mass();
        assert!((beam_smi(&b, &k) - 1.75).abs() < 1e-12);
        assert!((brute_force_smi(&b, &k).unwrap() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn unit_sigma_two_cells() {
        // Value frozen from an independent enumeration over the 4 maps with
        // Gaussian CDF bins (sigma = 1 cell, half-width 4).
        let model = BeamModel::new(1, 1.0, 5.0, 0.25).unwrap();
        let k = crate::sensor::noise_kernel(&model, 0.25);
        let b = belief(&[0.5, 0.5]);
        assert!((beam_smi(&b, &k) - 0.836_085_728_742_349_7).abs() < 1e-12);
        assert!((brute_force_smi(&b, &k).unwrap() - 0.836_085_728_742_349_7).abs() < 1e-12);
    }

    #[test]
    fn single_fair_cell_is_one_bit() {
        let b = belief(&[0.5]);
        assert!((brute_force_smi(&b, &NoiseKernel::point_mass()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certain_beam_has_zero_information() {
        let b = belief(&[0.0, 0.0, 1.0, 0.3]);
        let k = NoiseKernel::from_weights(vec![0.2, 0.6, 0.2]).unwrap();
        assert!(beam_smi(&b, &k).abs() < 1e-15);
        assert!(brute_force_smi(&b, &k).unwrap().abs() < 1e-15);
    }

    #[test]
    fn oracle_refuses_large_beliefs() {
        let b = belief(&[0.5; 13]);
        assert!(matches!(
            brute_force_smi(&b, &NoiseKernel::point_mass()),
            Err(Error::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn unknown_view_beats_known_view() {
        let geom = GridGeometry::new(40, 40, 0.25, [0.0, 0.0]).unwrap();
        let mut grid = OccupancyGrid::new(geom, LogOddsParams::default());
        for (i, l) in grid.log_odds_mut().iter_mut().enumerate() {
            if i % 40 < 20 {
                *l = -5.0;
            }
        }
        let model = BeamModel::new(9, 1.0, 3.0, 0.1).unwrap();
        let k = crate::sensor::noise_kernel(&model, 0.25);
        let toward_unknown = direct_viewpoint_smi(&grid, &Pose::planar(4.0, 5.0, 0.0), &model, &k);
        let toward_known = direct_viewpoint_smi(&grid, &Pose::planar(4.0, 5.0, std::f64::consts::PI), &model, &k);
        assert!(toward_unknown > toward_known);
    }

    fn kernel_strategy() -> impl Strategy<Value = NoiseKernel> {
        prop::collection::vec(0.01f64..1.0, 0..4).prop_map(|half| {
            let mut w: Vec<f64> = half.iter().rev().copied().collect();
            w.push(1.0);
            w.extend(half);
            NoiseKernel::from_weights(w).unwrap()
        })
    }

    proptest! {
        #[test]
        fn closed_form_matches_enumeration(
            r in prop::collection::vec(0.0f64..=1.0, 1..9),
            k in kernel_strategy(),
        ) {
            let b = belief(&r);
            let a = beam_smi(&b, &k);
            let o = brute_force_smi(&b, &k).unwrap();
            prop_assert!((a - o).abs() < 1e-9, "{} vs {}", a, o);
        }

        #[test]
        fn bounded_by_event_entropy(r in prop::collection::vec(0.0f64..=1.0, 1..30), k in kernel_strategy()) {
            let b = belief(&r);
            let i = beam_smi(&b, &k);
            prop_assert!(i >= 0.0);
            prop_assert!(i <= hit_distribution(&b).entropy() + 1e-12);
        }

        #[test]
        fn truncated_trace_read_matches_full_belief(
            l in prop::collection::vec(prop_oneof![Just(5.0), Just(-5.0), -4.0f64..4.0], 1..40),
            k in kernel_strategy(),
        ) {
            let geom = GridGeometry::new(l.len(), 1, 1.0, [0.0, 0.0]).unwrap();
            let grid = OccupancyGrid::from_log_odds(geom, LogOddsParams::default(), l.clone()).unwrap();
            let cells: Vec<CellIndex> = (0..l.len() as i32).map(|x| CellIndex::new(x, 0)).collect();
            let full = beam_smi(&BeamBelief::from_cells(&grid, &cells), &k);
            let fast = viewpoint_smi(&grid, [cells.iter().copied()], &k);
            prop_assert!((full - fast).abs() < 1e-12, "{} vs {}", full, fast);
            if l.len() <= 10 {
                let o = brute_force_smi(&BeamBelief::from_cells(&grid, &cells), &k).unwrap();
                prop_assert!((o - fast).abs() < 1e-9);
            }
        }

        #[test]
        fn resolving_the_only_uncertain_cell_never_helps(
            n in 1usize..10, idx in 0usize..10, r in 0.01f64..0.99, value in prop::bool::ANY, k in kernel_strategy()
        ) {
            let idx = idx % n;
            let mut p = vec![0.0; n];
            p[idx] = r;
            let before = beam_smi(&belief(&p), &k);
            p[idx] = if value { 1.0 } else { 0.0 };
            let after = beam_smi(&belief(&p), &k);
            prop_assert!(after <= before + 1e-12);
        }
    }
}
