//! Trajectory planning: a frontier-seeded initial path refined by gradient
//! ascent on the objective, with poses updated by right perturbation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Arc;

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::{find_frontiers, CellIndex, CellState, FrontierCluster, GridGeometry, OccupancyGrid};
use crate::liegroups::{DistanceMetric, Pose, Twist};
use crate::objective::{objective_total, objective_value, project_planar, ObjectiveConfig, Trajectory};
use crate::sensor::BeamModel;
use crate::viewgrid::{even_yaws, precompute_ray_tables, OriginRayTable, ViewpointGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub n_max: usize,
    /// Ascent step `l`, applied to the raw gradient.
    pub step: f64,
    pub termination_rel_improvement: f64,
    /// Largest metric norm of a single-pose step; `0` disables the cap.
    pub max_step_norm: f64,
    /// Halve a step that lowers the objective or lands outside free space.
    pub safeguard: bool,
    pub max_halvings: usize,
    /// Poses must keep at least this ML free distance (meters).
    pub min_clearance: f64,
    /// Frontier clusters smaller than this are ignored.
    pub min_frontier_size: usize,
    /// Clusters whose anchor is closer than this (meters of path) are only
    /// chosen when nothing farther is reachable.
    pub min_frontier_distance: f64,
    /// The seed path stops this far (meters of path, at most half of it)
    /// short of the frontier anchor.
    pub frontier_standoff: f64,
    pub orientations: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 1,
            n_max: 50,
            step: 10.0,
            termination_rel_improvement: 1e-3,
            max_step_norm: 0.5,
            safeguard: true,
            max_halvings: 5,
            min_clearance: 0.0,
            min_frontier_size: 6,
            min_frontier_distance: 1.0,
            frontier_standoff: 0.5,
            orientations: 8,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.horizon >= 1
            && self.n_max >= 1
            && self.step > 0.0
            && self.termination_rel_improvement >= 0.0
            && self.max_step_norm >= 0.0
            && self.min_clearance >= 0.0
            && self.min_frontier_distance >= 0.0
            && self.frontier_standoff >= 0.0
            && self.orientations >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid planner config {self:?}")))
        }
    }
}

const NEIGHBORS: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Moves allowed from `c`: 8-connected over free cells, diagonals only when
/// both adjacent orthogonal cells are free.
fn moves<'a>(geom: &'a GridGeometry, free: &'a [bool], c: CellIndex) -> impl Iterator<Item = (CellIndex, f64)> + 'a {
    let open = move |c: CellIndex| geom.contains(c) && free[geom.linear(c)];
    NEIGHBORS.iter().filter_map(move |&(dx, dy)| {
        let n = c.offset(dx, dy);
        if !open(n) {
            return None;
        }
        if dx != 0 && dy != 0 && !(open(c.offset(dx, 0)) && open(c.offset(0, dy))) {
            return None;
        }
        let cost = if dx != 0 && dy != 0 {
            std::f64::consts::SQRT_2
        } else {
            1.0
        };
        Some((n, cost * geom.resolution))
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    key: f64,
    cost: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distances (meters) from `start` over `free`; unreachable is infinite.
pub fn dijkstra(geom: &GridGeometry, free: &[bool], start: CellIndex) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; geom.len()];
    if !geom.contains(start) {
        return dist;
    }
    let s = geom.linear(start);
    dist[s] = 0.0;
    let mut heap = BinaryHeap::from([Entry {
        key: 0.0,
        cost: 0.0,
        index: s,
    }]);
    while let Some(Entry { cost, index, .. }) = heap.pop() {
        if cost > dist[index] {
            continue;
        }
        for (n, step) in moves(geom, free, geom.cell_at(index)) {
            let j = geom.linear(n);
            let c = cost + step;
            if c < dist[j] {
                dist[j] = c;
                heap.push(Entry {
                    key: c,
                    cost: c,
                    index: j,
                });
            }
        }
    }
    dist
}

/// A* over `free` with the octile heuristic. Returns the cell path and its length.
pub fn astar(geom: &GridGeometry, free: &[bool], start: CellIndex, goal: CellIndex) -> Option<(Vec<CellIndex>, f64)> {
    if !geom.contains(start) || !geom.contains(goal) || !free[geom.linear(goal)] {
        return None;
    }
    let h = |c: CellIndex| {
        let dx = (c.x - goal.x).abs() as f64;
        let dy = (c.y - goal.y).abs() as f64;
        (dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)) * geom.resolution
    };
    let mut g = vec![f64::INFINITY; geom.len()];
    let mut parent = vec![usize::MAX; geom.len()];
    let s = geom.linear(start);
    let t = geom.linear(goal);
    g[s] = 0.0;
    let mut heap = BinaryHeap::from([Entry {
        key: h(start),
        cost: 0.0,
        index: s,
    }]);
    while let Some(Entry { cost, index, .. }) = heap.pop() {
        if cost > g[index] {
            continue;
        }
        if index == t {
            let mut path = vec![goal];
            let mut i = t;
            while i != s {
                i = parent[i];
                path.push(geom.cell_at(i));
            }
            path.reverse();
            return Some((path, cost));
        }
        for (n, step) in moves(geom, free, geom.cell_at(index)) {
            let j = geom.linear(n);
            let c = cost + step;
            if c < g[j] {
                g[j] = c;
                parent[j] = index;
                heap.push(Entry {
                    key: c + h(n),
                    cost: c,
                    index: j,
                });
            }
        }
    }
    None
}

/// The frontier-seeded initial trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct InitPath {
    pub trajectory: Trajectory,
    /// Polyline from the current position to the frontier anchor (world xy).
    pub path: Vec<[f64; 2]>,
    /// Arc length covered by the seed, after the standoff.
    pub length: f64,
    pub target: FrontierCluster,
}

/// Frontier clusters of at least `min_size` cells scored by size over path
/// length, with their Dijkstra distances. Unreachable clusters are dropped.
pub fn score_frontiers(
    grid: &OccupancyGrid,
    start: CellIndex,
    min_size: usize,
) -> Result<Vec<(FrontierCluster, CellIndex, f64, f64)>> {
    let clusters: Vec<FrontierCluster> = find_frontiers(grid)
        .into_iter()
        .filter(|c| c.size() >= min_size.max(1))
        .collect();
    if clusters.is_empty() {
        return Err(Error::ExplorationComplete);
    }
    let geom = grid.geometry();
    let free = planning_mask(grid, start);
    let dist = dijkstra(geom, &free, start);
    let n = clusters.len();
    let scored: Vec<_> = clusters
        .into_iter()
        .filter_map(|c| {
            let anchor = c.anchor(grid);
            let d = dist[geom.linear(anchor)];
            d.is_finite().then(|| {
                let score = c.size() as f64 / d.max(geom.resolution);
                (c, anchor, d, score)
            })
        })
        .collect();
    if scored.is_empty() {
        return Err(Error::UnreachableFrontier { clusters: n });
    }
    Ok(scored)
}

/// ML free space with the robot's own cell forced free.
fn planning_mask(grid: &OccupancyGrid, start: CellIndex) -> Vec<bool> {
    let mut free = grid.ml_free_space();
    free[grid.geometry().linear(start)] = true;
    free
}

/// Shortest path to the best-scoring frontier, preferring anchors at least
/// `min_distance` away. The path is cut `min(standoff, length / 2)` short
/// of the anchor, since frontier cells border unobserved space. It is then
/// resampled into `horizon` poses spaced `max(length / horizon, 2 delta_q)`
/// apart, with the last ones clamped to the end. Headings follow the path;
/// a pose at the end of the path faces the unknown cells around the anchor.
pub fn init_path(
    x: &Pose,
    grid: &OccupancyGrid,
    horizon: usize,
    delta_q: f64,
    min_size: usize,
    min_distance: f64,
    standoff: f64,
) -> Result<InitPath> {
    let geom = grid.geometry();
    let p = x.position();
    let start = geom.cell_of([p.x, p.y]).ok_or(Error::OutOfBounds { x: p.x, y: p.y })?;
    let mut scored = score_frontiers(grid, start, min_size)?;
    if scored.iter().any(|c| c.2 >= min_distance) {
        scored.retain(|c| c.2 >= min_distance);
    }
    let (target, anchor, _, _) = scored
        .into_iter()
        .fold(
            None,
            |best: Option<(FrontierCluster, CellIndex, f64, f64)>, c| match best {
                Some(b) if b.3 >= c.3 => Some(b),
                _ => Some(c),
            },
        )
        .expect("non-empty");
    let free = planning_mask(grid, start);
    let (cells, _) = astar(geom, &free, start, anchor).expect("dijkstra found the anchor reachable");
    let mut path: Vec<[f64; 2]> = vec![[p.x, p.y]];
    path.extend(cells.iter().skip(1).map(|c| geom.cell_center(*c)));
    let seg: Vec<f64> = path
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .collect();
    let full: f64 = seg.iter().sum();
    let length = full - standoff.min(0.5 * full);
    let spacing = (length / horizon as f64).max(2.0 * delta_q);
    let aim = unknown_direction(grid, &target, anchor);
    let poses = (1..=horizon)
        .map(|k| {
            let s = (k as f64 * spacing).min(length);
            let (pos, tangent) = point_at(&path, &seg, s);
            let yaw = if s >= length {
                if aim[0].hypot(aim[1]) > 1e-9 {
                    aim[1].atan2(aim[0])
                } else if let Some(t) = tangent {
                    t
                } else {
                    x.yaw()
                }
            } else {
                tangent.unwrap_or(x.yaw())
            };
            Pose::planar(pos[0], pos[1], yaw)
        })
        .collect();
    Ok(InitPath {
        trajectory: Trajectory::new(poses),
        path,
        length,
        target,
    })
}

/// Radius (cells) around the anchor of the frontier cells used for aiming.
const AIM_RADIUS: i32 = 8;

/// Sum of unit vectors from `anchor` to the unknown 4-neighbors of the
/// cluster members within [`AIM_RADIUS`].
fn unknown_direction(grid: &OccupancyGrid, cluster: &FrontierCluster, anchor: CellIndex) -> [f64; 2] {
    let geom = grid.geometry();
    let mut seen = std::collections::HashSet::new();
    let mut d = [0.0, 0.0];
    for c in &cluster.cells {
        if (c.x - anchor.x).pow(2) + (c.y - anchor.y).pow(2) > AIM_RADIUS * AIM_RADIUS {
            continue;
        }
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let n = c.offset(dx, dy);
            if geom.contains(n) && grid.state(n) == CellState::Unknown && seen.insert(n) {
                let (ex, ey) = (f64::from(n.x - anchor.x), f64::from(n.y - anchor.y));
                let r = ex.hypot(ey);
                d[0] += ex / r;
                d[1] += ey / r;
            }
        }
    }
    d
}

/// Point at arc length `s` and the heading of the segment containing it.
fn point_at(path: &[[f64; 2]], seg: &[f64], s: f64) -> ([f64; 2], Option<f64>) {
    let mut acc = 0.0;
    let mut last = None;
    for (i, &l) in seg.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let (a, b) = (path[i], path[i + 1]);
        let heading = (b[1] - a[1]).atan2(b[0] - a[0]);
        last = Some(heading);
        if s <= acc + l {
            let t = (s - acc) / l;
            return ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], Some(heading));
        }
        acc += l;
    }
    (*path.last().expect("non-empty path"), last)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub init: Trajectory,
    pub init_value: f64,
    /// Objective after each iteration; entry 0 is the seed.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Step halvings taken by the safeguard.
    pub halvings: usize,
    /// Pose-iterations skipped because the gradient was unusable.
    pub frozen: usize,
}

impl PlanResult {
    pub fn value(&self) -> f64 {
        *self
            .trace
            .iter()
            .max_by(|a, b| a.total_cmp(b))
            .expect("trace has the seed")
    }

    /// CSV with header `iteration,f`.
    pub fn write_trace_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "iteration,f")?;
        for (i, f) in self.trace.iter().enumerate() {
            writeln!(out, "{i},{f}")?;
        }
        Ok(())
    }
}

/// True when `pose` lies in an ML-free cell with at least `min_clearance` free distance.
pub fn is_feasible(vg: &ViewpointGrid, pose: &Pose, min_clearance: f64) -> bool {
    let p = pose.position();
    vg.geometry().cell_of([p.x, p.y]).is_some_and(|c| {
        let d = vg.free_distance(c);
        d > 0.0 && d >= min_clearance
    })
}

fn scaled_step(g: &Vector6<f64>, cfg: &PlannerConfig, metric: &DistanceMetric, scale: f64) -> Twist {
    let mut step = cfg.step * scale * project_planar(g);
    if cfg.max_step_norm > 0.0 {
        let n = metric.weighted_norm(&Twist::from_vector(&step));
        let cap = cfg.max_step_norm * scale;
        if n > cap {
            step *= cap / n;
        }
    }
    Twist::from_vector(&step)
}

/// Gradient ascent from `init`. Returns the best iterate seen.
pub fn gradient_ascent(
    init: &Trajectory,
    vg: &ViewpointGrid,
    obj: &ObjectiveConfig,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    let mut current = init.clone();
    let mut report = objective_value(&current, vg, obj)?;
    let init_value = report.total;
    let mut trace = vec![init_value];
    let (mut best, mut best_value) = (current.clone(), init_value);
    let (mut halvings, mut frozen, mut iterations) = (0, 0, 0);

    while iterations < cfg.n_max {
        iterations += 1;
        let grads: Vec<Option<Vector6<f64>>> = report
            .poses
            .iter()
            .map(|p| {
                let g = project_planar(&p.gradient);
                (!p.eta_floored && g.iter().all(|v| v.is_finite())).then_some(g)
            })
            .collect();
        frozen += grads.iter().filter(|g| g.is_none()).count();
        if grads.iter().flatten().all(|g| g.norm() < 1e-12) {
            break;
        }
        let f_cur = report.total;
        let mut accepted = None;
        let mut scale = 1.0;
        for attempt in 0..=cfg.max_halvings {
            if attempt > 0 {
                halvings += 1;
                scale *= 0.5;
            }
            let poses: Vec<Pose> = current
                .poses()
                .iter()
                .zip(&grads)
                .map(|(x, g)| match g {
                    Some(g) => x.retract(&scaled_step(g, cfg, vg.metric(), scale)).normalized(),
                    None => *x,
                })
                .collect();
            if cfg.safeguard && !poses.iter().all(|p| is_feasible(vg, p, cfg.min_clearance)) {
                continue;
            }
            let candidate = Trajectory::new(poses);
            let Ok(f_new) = objective_total(&candidate, vg, obj) else {
                continue;
            };
            if cfg.safeguard && f_new < f_cur {
                continue;
            }
            accepted = Some((candidate, f_new));
            break;
        }
        let Some((candidate, f_new)) = accepted else {
            break;
        };
        let rel = (f_new - f_cur) / f_cur.abs().max(1e-12);
        current = candidate;
        trace.push(f_new);
        if f_new > best_value {
            best = current.clone();
            best_value = f_new;
        }
        if rel < cfg.termination_rel_improvement {
            break;
        }
        report = objective_value(&current, vg, obj)?;
    }
    Ok(PlanResult {
        trajectory: best,
        init: init.clone(),
        init_value,
        trace,
        iterations,
        halvings,
        frozen,
    })
}

/// Gradient-ascent planner holding the reusable origin ray tables.
#[derive(Debug)]
pub struct Planner {
    pub model: BeamModel,
    pub metric: DistanceMetric,
    pub objective: ObjectiveConfig,
    pub config: PlannerConfig,
    table: Option<(f64, Arc<OriginRayTable>)>,
    precomputations: AtomicUsize,
}

impl Clone for Planner {
    /// Shares the ray tables; the precomputation counter is copied.
    fn clone(&self) -> Self {
        Self {
            model: self.model,
            metric: self.metric,
            objective: self.objective,
            config: self.config,
            table: self.table.clone(),
            precomputations: AtomicUsize::new(self.precomputations()),
        }
    }
}

impl Planner {
    pub fn new(
        model: BeamModel,
        metric: DistanceMetric,
        objective: ObjectiveConfig,
        config: PlannerConfig,
    ) -> Result<Self> {
        model.validate()?;
        objective.validate()?;
        config.validate()?;
        if objective.horizon != config.horizon {
            return Err(Error::InvalidParameter("objective and planner horizons differ".into()));
        }
        Ok(Self {
            model,
            metric,
            objective,
            config,
            table: None,
            precomputations: AtomicUsize::new(0),
        })
    }

    /// How many times the origin ray tables were built.
    pub fn precomputations(&self) -> usize {
        self.precomputations.load(AtomicOrdering::Relaxed)
    }

    /// Origin ray tables for `resolution`, built on first use.
    pub fn table(&mut self, resolution: f64) -> Arc<OriginRayTable> {
        match &self.table {
            Some((r, t)) if *r == resolution => t.clone(),
            _ => {
                self.precomputations.fetch_add(1, AtomicOrdering::Relaxed);
                let yaws = even_yaws(self.config.orientations);
                let t = Arc::new(precompute_ray_tables(&self.model, &yaws, resolution));
                self.table = Some((resolution, t.clone()));
                t
            }
        }
    }

    /// Viewpoint grid over a fixed snapshot of `grid`.
    pub fn viewpoint_grid(&mut self, grid: &OccupancyGrid) -> ViewpointGrid {
        let table = self.table(grid.geometry().resolution);
        ViewpointGrid::new(Arc::new(grid.clone()), table, self.model, self.metric)
    }

    /// Frontier initialization only.
    pub fn init(&self, x: &Pose, grid: &OccupancyGrid) -> Result<InitPath> {
        init_path(
            x,
            grid,
            self.config.horizon,
            self.objective.delta_q,
            self.config.min_frontier_size,
            self.config.min_frontier_distance,
            self.config.frontier_standoff,
        )
    }

    pub fn plan(&mut self, x: &Pose, grid: &OccupancyGrid) -> Result<PlanResult> {
        let init = self.init(x, grid)?;
        let vg = self.viewpoint_grid(grid);
        gradient_ascent(&init.trajectory, &vg, &self.objective, &self.config)
    }
}
