//! Probabilistic occupancy grid with log-odds updates from beam scans.
//!
//! Cells are independent Bernoulli variables; the per-cell log-odds array is
//! the whole posterior. A cell is *unknown* when its log-odds is within
//! [`UNKNOWN_TOL`] of zero, *free* below that and *occupied* above.

pub mod distance;
pub mod frontier;
pub mod raytrace;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroups::Pose;
use crate::sensor::{BeamModel, Scan};

pub use distance::distance_transform;
pub use frontier::{find_frontiers, write_frontiers_csv, FrontierCluster};
pub use raytrace::{ray_trace, trace_ray, RayTrace};

/// Log-odds magnitude below which a cell counts as unknown.
pub const UNKNOWN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub x: i32,
    pub y: i32,
}

impl CellIndex {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(&self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

/// Cell layout: `width x height` cells of side `resolution`, with the lower
/// left corner of cell (0, 0) at `origin`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64, origin: [f64; 2]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("grid dims must be positive".into()));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidParameter(format!("bad resolution {resolution}")));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    /// Row-major index; `c` must be inside the grid.
    pub fn linear(&self, c: CellIndex) -> usize {
        debug_assert!(self.contains(c));
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell_at(&self, i: usize) -> CellIndex {
        CellIndex::new((i % self.width) as i32, (i / self.width) as i32)
    }

    pub fn cell_center(&self, c: CellIndex) -> [f64; 2] {
        [
            self.origin[0] + (c.x as f64 + 0.5) * self.resolution,
            self.origin[1] + (c.y as f64 + 0.5) * self.resolution,
        ]
    }

    /// Cell containing `p` together with the fractional offset inside it.
    pub fn locate(&self, p: [f64; 2]) -> Option<(CellIndex, [f64; 2])> {
        let gx = (p[0] - self.origin[0]) / self.resolution;
        let gy = (p[1] - self.origin[1]) / self.resolution;
        if !(gx.is_finite() && gy.is_finite()) {
            return None;
        }
        let (fx, fy) = (gx.floor(), gy.floor());
        let c = CellIndex::new(fx as i32, fy as i32);
        if fx < 0.0 || fy < 0.0 || !self.contains(c) {
            return None;
        }
        Some((c, [gx - fx, gy - fy]))
    }

    pub fn cell_of(&self, p: [f64; 2]) -> Option<CellIndex> {
        self.locate(p).map(|(c, _)| c)
    }

    /// World extent `(width, height)` in meters.
    pub fn extent(&self) -> [f64; 2] {
        [
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        ]
    }
}

/// Inverse sensor model increments and clamp bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogOddsParams {
    pub l_occ: f64,
    pub l_free: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub prior: f64,
}

impl Default for LogOddsParams {
    fn default() -> Self {
        Self {
            l_occ: 0.85,
            l_free: -0.4,
            l_min: -5.0,
            l_max: 5.0,
            prior: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellState {
    Free,
    Unknown,
    Occupied,
}

pub fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    params: LogOddsParams,
    log_odds: Vec<f64>,
}

impl OccupancyGrid {
    /// Grid with every cell at the prior.
    pub fn new(geometry: GridGeometry, params: LogOddsParams) -> Self {
        Self {
            log_odds: vec![params.prior; geometry.len()],
            geometry,
            params,
        }
    }

    pub fn from_log_odds(geometry: GridGeometry, params: LogOddsParams, log_odds: Vec<f64>) -> Result<Self> {
        if log_odds.len() != geometry.len() {
            return Err(Error::Format(format!(
                "expected {} values, got {}",
                geometry.len(),
                log_odds.len()
            )));
        }
        Ok(Self {
            geometry,
            params,
            log_odds,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn params(&self) -> &LogOddsParams {
        &self.params
    }

    pub fn log_odds(&self) -> &[f64] {
        &self.log_odds
    }

    /// Raw access; callers are responsible for staying inside the clamp bounds.
    pub fn log_odds_mut(&mut self) -> &mut [f64] {
        &mut self.log_odds
    }

    pub fn probability(&self, c: CellIndex) -> f64 {
        sigmoid(self.log_odds[self.geometry.linear(c)])
    }

    /// Probability used for prediction: a cell saturated at a clamp bound is
    /// treated as certain, since further scans cannot change it.
    pub fn belief(&self, c: CellIndex) -> f64 {
        let l = self.log_odds[self.geometry.linear(c)];
        if l <= self.params.l_min {
            0.0
        } else if l >= self.params.l_max {
            1.0
        } else {
            sigmoid(l)
        }
    }

    pub fn state(&self, c: CellIndex) -> CellState {
        state_of(self.log_odds[self.geometry.linear(c)])
    }

    /// Adds the inverse sensor model of every beam in `scan` taken at `pose`.
    ///
    /// Cells before the measured endpoint receive `l_free`; the endpoint cell
    /// receives `l_occ` unless the beam returned max range. Values are clamped.
    pub fn update_from_scan(&mut self, pose: &Pose, scan: &Scan, model: &BeamModel) -> Result<()> {
        let p = pose.position();
        let start = [p.x, p.y];
        if self.geometry.cell_of(start).is_none() {
            return Err(Error::OutOfBounds { x: p.x, y: p.y });
        }
        let LogOddsParams {
            l_occ,
            l_free,
            l_min,
            l_max,
            ..
        } = self.params;
        for (angle, &range) in scan.angles().iter().zip(scan.ranges()) {
            let dir = beam_world_direction(pose, *angle);
            let trace = trace_ray(&self.geometry, start, dir, model.max_range);
            if trace.is_empty() {
                continue;
            }
            let hit = range < model.max_range && !(trace.clipped && range >= trace.exit);
            let n_free = if hit {
                // Last cell whose entry distance does not exceed the range.
                trace.entry.partition_point(|&t| t <= range).max(1) - 1
            } else {
                trace.len()
            };
            for c in &trace.cells[..n_free] {
                let i = self.geometry.linear(*c);
                self.log_odds[i] = (self.log_odds[i] + l_free).clamp(l_min, l_max);
            }
            if hit {
                let i = self.geometry.linear(trace.cells[n_free]);
                self.log_odds[i] = (self.log_odds[i] + l_occ).clamp(l_min, l_max);
            }
        }
        Ok(())
    }

    /// Maximum-likelihood free space: `p < 0.5` and not unknown.
    pub fn ml_free_space(&self) -> Vec<bool> {
        self.log_odds.iter().map(|&l| state_of(l) == CellState::Free).collect()
    }

    /// Sum of per-cell binary entropies, in bits.
    pub fn entropy(&self) -> f64 {
        map_entropy(self)
    }

    /// Writes the plain-text snapshot format.
    ///
    /// ```text
    /// gridmap 1
    /// dims <width> <height>
    /// resolution <meters>
    /// origin <x> <y>
    /// <height rows of width log-odds values, row y = 0 first>
    /// ```
    ///
    /// Values use shortest round-trip formatting, so reading back is exact.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let g = &self.geometry;
        writeln!(out, "gridmap 1")?;
        writeln!(out, "dims {} {}", g.width, g.height)?;
        writeln!(out, "resolution {}", g.resolution)?;
        writeln!(out, "origin {} {}", g.origin[0], g.origin[1])?;
        for row in self.log_odds.chunks(g.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R, params: LogOddsParams) -> Result<Self> {
        let mut lines = input.lines();
        let mut header = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing `{key}` line")))??;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::Format(format!("expected `{key}`, got `{line}`")));
            }
            Ok(parts.map(str::to_owned).collect())
        };
        let version = header("gridmap")?;
        if version != ["1"] {
            return Err(Error::Format(format!("unsupported version {version:?}")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Format(format!("bad number `{s}`: {e}")))
        };
        let dims = header("dims")?;
        let res = header("resolution")?;
        let origin = header("origin")?;
        if dims.len() != 2 || res.len() != 1 || origin.len() != 2 {
            return Err(Error::Format("malformed header".into()));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Format(format!("bad dim `{s}`: {e}")))
        };
        let geometry = GridGeometry::new(
            parse_dim(&dims[0])?,
            parse_dim(&dims[1])?,
            num(&res[0])?,
            [num(&origin[0])?, num(&origin[1])?],
        )?;
        let mut values = Vec::with_capacity(geometry.len());
        for line in lines {
            for tok in line?.split_whitespace() {
                values.push(num(tok)?);
            }
        }
        Self::from_log_odds(geometry, params, values)
    }

    /// Binary portable graymap: black occupied, white free, gray unknown; y up.
    pub fn write_pgm<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let g = &self.geometry;
        write!(out, "P5\n{} {}\n255\n", g.width, g.height)?;
        let mut bytes = Vec::with_capacity(g.len());
        for y in (0..g.height).rev() {
            for x in 0..g.width {
                let p = sigmoid(self.log_odds[y * g.width + x]);
                bytes.push(((1.0 - p) * 255.0).round() as u8);
            }
        }
        out.write_all(&bytes)
    }
}

/// Ground-truth occupancy: one boolean per cell, `true` when occupied.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryGrid {
    geometry: GridGeometry,
    occupied: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(geometry: GridGeometry, occupied: Vec<bool>) -> Result<Self> {
        if occupied.len() != geometry.len() {
            return Err(Error::Format(format!(
                "expected {} cells, got {}",
                geometry.len(),
                occupied.len()
            )));
        }
        Ok(Self { geometry, occupied })
    }

    pub fn empty(geometry: GridGeometry) -> Self {
        Self {
            occupied: vec![false; geometry.len()],
            geometry,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn cells(&self) -> &[bool] {
        &self.occupied
    }

    pub fn cells_mut(&mut self) -> &mut [bool] {
        &mut self.occupied
    }

    /// Cells outside the grid count as occupied.
    pub fn is_occupied(&self, c: CellIndex) -> bool {
        !self.geometry.contains(c) || self.occupied[self.geometry.linear(c)]
    }

    pub fn free_mask(&self) -> Vec<bool> {
        self.occupied.iter().map(|o| !o).collect()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied.iter().filter(|o| **o).count() as f64 / self.occupied.len() as f64
    }
}

fn state_of(l: f64) -> CellState {
    if l < -UNKNOWN_TOL {
        CellState::Free
    } else if l > UNKNOWN_TOL {
        CellState::Occupied
    } else {
        CellState::Unknown
    }
}

/// World xy direction of a sensor-frame beam at `angle` about the body z-axis.
pub fn beam_world_direction(pose: &Pose, angle: f64) -> [f64; 2] {
    let r = pose.rotation();
    let (s, c) = angle.sin_cos();
    let d = [r[(0, 0)] * c + r[(0, 1)] * s, r[(1, 0)] * c + r[(1, 1)] * s];
    let n = d[0].hypot(d[1]);
    if n > 0.0 {
        [d[0] / n, d[1] / n]
    } else {
        [0.0, 0.0]
    }
}

/// Sum over cells of the binary entropy of the occupancy probability (bits).
pub fn map_entropy(grid: &OccupancyGrid) -> f64 {
    grid.log_odds.iter().map(|&l| binary_entropy(sigmoid(l))).sum()
}
