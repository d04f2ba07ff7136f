//! Discrete viewpoint grid: every map cell center crossed with a finite yaw
//! set, with lazily cached viewpoint SMI and per-cell free distance.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::gridmap::raytrace::traverse;
use crate::gridmap::{beam_world_direction, distance_transform, CellIndex, GridGeometry, OccupancyGrid};
use crate::liegroups::{log_map, DistanceMetric, Pose, Twist};
use crate::sensor::{noise_kernel, BeamModel, NoiseKernel};
use crate::smi::viewpoint_smi;

/// `n` yaw angles evenly spaced over a full turn, starting at 0.
pub fn even_yaws(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * std::f64::consts::TAU / n as f64).collect()
}

/// Beam traces from the center of cell (0, 0) for every orientation, as cell
/// offsets. Tracing from any other cell center gives the same offsets.
#[derive(Clone, Debug)]
pub struct OriginRayTable {
    yaws: Vec<f64>,
    /// `traces[o][b]` is beam `b` at orientation `o`.
    traces: Vec<Vec<Vec<(i32, i32)>>>,
}

impl OriginRayTable {
    pub fn yaws(&self) -> &[f64] {
        &self.yaws
    }

    pub fn num_traces(&self) -> usize {
        self.traces.iter().map(Vec::len).sum()
    }

    pub fn offsets(&self, orientation: usize) -> &[Vec<(i32, i32)>] {
        &self.traces[orientation]
    }

    /// Traces of viewpoint (`cell`, `orientation`), each cut at the first
    /// cell outside the grid.
    pub fn translated(&self, geom: &GridGeometry, cell: CellIndex, orientation: usize) -> Vec<Vec<CellIndex>> {
        self.traces[orientation]
            .iter()
            .map(|beam| {
                beam.iter()
                    .map(|&(dx, dy)| cell.offset(dx, dy))
                    .take_while(|c| geom.contains(*c))
                    .collect()
            })
            .collect()
    }
}

pub fn precompute_ray_tables(model: &BeamModel, yaws: &[f64], resolution: f64) -> OriginRayTable {
    let angles = model.beam_angles();
    let max_cells = model.max_range / resolution;
    let origin = CellIndex::new(0, 0);
    let traces = yaws
        .iter()
        .map(|&yaw| {
            let frame = Pose::planar(0.0, 0.0, yaw);
            angles
                .iter()
                .map(|&a| {
                    let dir = beam_world_direction(&frame, a);
                    let (cells, ..) = traverse(origin, [0.5, 0.5], dir, max_cells, None);
                    cells.into_iter().map(|c| (c.x, c.y)).collect()
                })
                .collect()
        })
        .collect();
    OriginRayTable {
        yaws: yaws.to_vec(),
        traces,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewpointId {
    pub cell: CellIndex,
    pub orientation: usize,
}

/// A viewpoint near a query pose `X`, with `xi = log(X^-1 V)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: ViewpointId,
    pub xi: Twist,
    pub delta: f64,
}

#[derive(Debug)]
pub struct ViewpointGrid {
    geometry: GridGeometry,
    metric: DistanceMetric,
    model: BeamModel,
    kernel: NoiseKernel,
    table: Arc<OriginRayTable>,
    snapshot: Arc<OccupancyGrid>,
    smi_cache: Vec<OnceLock<f64>>,
    free_distance: Vec<f64>,
    evaluations: AtomicUsize,
}

impl ViewpointGrid {
    pub fn new(
        snapshot: Arc<OccupancyGrid>,
        table: Arc<OriginRayTable>,
        model: BeamModel,
        metric: DistanceMetric,
    ) -> Self {
        let geometry = *snapshot.geometry();
        let n = geometry.len() * table.yaws().len();
        let mut grid = Self {
            geometry,
            metric,
            kernel: noise_kernel(&model, geometry.resolution),
            model,
            table,
            snapshot,
            smi_cache: (0..n).map(|_| OnceLock::new()).collect(),
            free_distance: Vec::new(),
            evaluations: AtomicUsize::new(0),
        };
        grid.free_distance = free_distance_field(&grid.snapshot);
        grid
    }

    /// Replaces the map snapshot, dropping every cached value.
    pub fn set_snapshot(&mut self, snapshot: Arc<OccupancyGrid>) {
        assert_eq!(snapshot.geometry(), &self.geometry, "snapshot geometry changed");
        self.snapshot = snapshot;
        self.smi_cache.iter_mut().for_each(|c| *c = OnceLock::new());
        self.free_distance = free_distance_field(&self.snapshot);
    }

    pub fn snapshot(&self) -> &Arc<OccupancyGrid> {
        &self.snapshot
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn metric(&self) -> &DistanceMetric {
        &self.metric
    }

    pub fn model(&self) -> &BeamModel {
        &self.model
    }

    pub fn kernel(&self) -> &NoiseKernel {
        &self.kernel
    }

    pub fn table(&self) -> &Arc<OriginRayTable> {
        &self.table
    }

    pub fn yaws(&self) -> &[f64] {
        self.table.yaws()
    }

    pub fn len(&self) -> usize {
        self.smi_cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smi_cache.is_empty()
    }

    pub fn pose(&self, id: ViewpointId) -> Pose {
        let c = self.geometry.cell_center(id.cell);
        Pose::planar(c[0], c[1], self.yaws()[id.orientation])
    }

    /// All viewpoint ids in storage order.
    pub fn ids(&self) -> impl Iterator<Item = ViewpointId> + '_ {
        let n = self.yaws().len();
        (0..self.len()).map(move |i| ViewpointId {
            cell: self.geometry.cell_at(i / n),
            orientation: i % n,
        })
    }

    fn slot(&self, id: ViewpointId) -> usize {
        self.geometry.linear(id.cell) * self.yaws().len() + id.orientation
    }

    /// Distance (meters) from the cell center to the ML non-free space.
    pub fn free_distance(&self, cell: CellIndex) -> f64 {
        self.free_distance[self.geometry.linear(cell)]
    }

    /// Number of viewpoint SMI computations since construction.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Uncached viewpoint SMI using the translated origin traces.
    pub fn compute_smi(&self, id: ViewpointId) -> f64 {
        let g = &self.geometry;
        let beams = self.table.traces[id.orientation].iter().map(|beam| {
            beam.iter()
                .map(move |&(dx, dy)| id.cell.offset(dx, dy))
                .take_while(|c| g.contains(*c))
        });
        viewpoint_smi(&self.snapshot, beams, &self.kernel)
    }

    pub fn cached_smi(&self, id: ViewpointId) -> f64 {
        *self.smi_cache[self.slot(id)].get_or_init(|| {
            self.evaluations.fetch_add(1, Ordering::Relaxed);
            self.compute_smi(id)
        })
    }

    /// Viewpoints with `delta(log(X^-1 V)) < pi`.
    ///
    /// Only cell centers inside the translational bound of the metric ball
    /// are examined. Viewpoints at a relative half turn, where the log is
    /// undefined, are skipped.
    pub fn neighborhood(&self, x: &Pose) -> Vec<Neighbor> {
        let g = &self.geometry;
        let p = x.position();
        let radius = self.metric.translation_radius();
        let lo = |v: f64, o: f64| ((v - radius - o) / g.resolution).floor() as i64;
        let hi = |v: f64, o: f64| ((v + radius - o) / g.resolution).ceil() as i64;
        let x0 = lo(p.x, g.origin[0]).max(0);
        let x1 = hi(p.x, g.origin[0]).min(g.width as i64 - 1);
        let y0 = lo(p.y, g.origin[1]).max(0);
        let y1 = hi(p.y, g.origin[1]).min(g.height as i64 - 1);
        let mut out = Vec::new();
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                let cell = CellIndex::new(cx as i32, cy as i32);
                let c = g.cell_center(cell);
                let d2 = (c[0] - p.x).powi(2) + (c[1] - p.y).powi(2) + p.z * p.z;
                if d2 > radius * radius {
                    continue;
                }
                for orientation in 0..self.yaws().len() {
                    let id = ViewpointId { cell, orientation };
                    let Ok(xi) = log_map(&x.between(&self.pose(id))) else {
                        continue;
                    };
                    let delta = self.metric.delta(&xi);
                    if delta < std::f64::consts::PI {
                        out.push(Neighbor { id, xi, delta });
                    }
                }
            }
        }
        out
    }

    /// [`Self::neighborhood`], failing when it is empty.
    pub fn nonempty_neighborhood(&self, x: &Pose) -> Result<Vec<Neighbor>> {
        let n = self.neighborhood(x);
        if n.is_empty() {
            let p = x.position();
            return Err(Error::DegenerateNeighborhood { x: p.x, y: p.y });
        }
        Ok(n)
    }
}

/// Distance transform of the ML free space with unknown counted as non-free.
/// An all-free map has no boundary; its distances are capped at the grid diagonal.
fn free_distance_field(grid: &OccupancyGrid) -> Vec<f64> {
    let g = grid.geometry();
    let cap = g.extent()[0].hypot(g.extent()[1]);
    distance_transform(&grid.ml_free_space(), g.width, g.height, g.resolution)
        .into_iter()
        .map(|d| d.min(cap))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::{trace_ray, LogOddsParams};
    use crate::liegroups::pose_distance;
    use rand::{Rng, SeedableRng};

    fn setup(n: usize, orientations: usize) -> ViewpointGrid {
        let geom = GridGeometry::new(n, n, 0.25, [-1.0, 2.0]).unwrap();
        let mut grid = OccupancyGrid::new(geom, LogOddsParams::default());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for l in grid.log_odds_mut() {
            *l = rng.random_range(-5.0..5.0);
        }
        let model = BeamModel::new(30, std::f64::consts::FRAC_PI_2, 2.0, 0.1).unwrap();
        let table = precompute_ray_tables(&model, &even_yaws(orientations), 0.25);
        let metric = DistanceMetric::planar(1.0, 1.0, 0.1, 1.0).unwrap();
        ViewpointGrid::new(Arc::new(grid), Arc::new(table), model, metric)
    }

    #[test]
    fn table_size() {
        let model = BeamModel::new(30, 1.0, 10.0, 0.1).unwrap();
        assert_eq!(precompute_ray_tables(&model, &even_yaws(8), 0.25).num_traces(), 240);
    }

    #[test]
    fn translated_traces_equal_direct_traces() {
        let vg = setup(40, 8);
        let g = *vg.geometry();
        let id = ViewpointId {
            cell: CellIndex::new(20, 19),
            orientation: 3,
        };
        let pose = vg.pose(id);
        let p = pose.position();
        let translated = vg.table().translated(&g, id.cell, id.orientation);
        for (beam, a) in translated.iter().zip(vg.model().beam_angles()) {
            let dir = beam_world_direction(&pose, a);
            assert_eq!(beam, &trace_ray(&g, [p.x, p.y], dir, vg.model().max_range).cells);
        }
    }

    #[test]
    fn boundary_viewpoint_is_clipped() {
        let vg = setup(20, 8);
        let g = *vg.geometry();
        let traces = vg.table().translated(&g, CellIndex::new(0, 10), 4);
        assert!(traces.iter().all(|t| t.iter().all(|c| g.contains(*c))));
        assert!(traces.iter().any(|t| t.len() < 4));
    }

    #[test]
    fn neighborhood_matches_exhaustive_scan() {
        let vg = setup(24, 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = Pose::planar(
                rng.random_range(-1.0..5.0),
                rng.random_range(2.0..8.0),
                rng.random_range(-3.0..3.0),
            );
            let mut fast: Vec<ViewpointId> = vg.neighborhood(&x).iter().map(|n| n.id).collect();
            let mut slow: Vec<ViewpointId> = vg
                .ids()
                .filter(|id| pose_distance(&x, &vg.pose(*id), vg.metric()).is_ok_and(|d| d < std::f64::consts::PI))
                .collect();
            fast.sort();
            slow.sort();
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn viewpoint_itself_is_its_own_neighbor() {
        let vg = setup(16, 8);
        let id = ViewpointId {
            cell: CellIndex::new(5, 6),
            orientation: 2,
        };
        let n = vg.neighborhood(&vg.pose(id));
        let me = n.iter().find(|n| n.id == id).unwrap();
        assert!(me.delta < 1e-12);
    }

    #[test]
    fn cache_counts_and_invalidates() {
        let mut vg = setup(16, 8);
        let id = ViewpointId {
            cell: CellIndex::new(7, 7),
            orientation: 1,
        };
        let a = vg.cached_smi(id);
        let b = vg.cached_smi(id);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(vg.evaluations(), 1);
        let mut g = (**vg.snapshot()).clone();
        g.log_odds_mut().iter_mut().for_each(|l| *l = 0.0);
        vg.set_snapshot(Arc::new(g));
        let c = vg.cached_smi(id);
        assert_eq!(vg.evaluations(), 2);
        assert_ne!(a, c);
    }

    #[test]
    fn cached_equals_recomputed() {
        let vg = setup(20, 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let id = ViewpointId {
                cell: CellIndex::new(rng.random_range(0..20), rng.random_range(0..20)),
                orientation: rng.random_range(0..8),
            };
            assert_eq!(vg.cached_smi(id), vg.compute_smi(id));
        }
    }

    #[test]
    fn free_distance_treats_unknown_as_blocked() {
        let geom = GridGeometry::new(5, 1, 1.0, [0.0, 0.0]).unwrap();
        let mut grid = OccupancyGrid::new(geom, LogOddsParams::default());
        for i in 0..4 {
            grid.log_odds_mut()[i] = -1.0;
        }
        let model = BeamModel::new(1, 1.0, 2.0, 0.0).unwrap();
        let table = precompute_ray_tables(&model, &even_yaws(4), 1.0);
        let vg = ViewpointGrid::new(Arc::new(grid), Arc::new(table), model, DistanceMetric::paper_planar());
        let d: Vec<f64> = (0..5).map(|x| vg.free_distance(CellIndex::new(x, 0))).collect();
        assert_eq!(d, vec![4.0, 3.0, 2.0, 1.0, 0.0]);
    }
}
