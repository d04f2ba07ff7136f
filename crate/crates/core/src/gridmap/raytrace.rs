//! Exact grid traversal (Amanatides-Woo) in cell-local coordinates.
//!
//! Traversal is carried out relative to the start cell, so tracing from the
//! center of two different cells yields the same offset sequence. The
//! viewpoint ray tables rely on this.

use super::{CellIndex, GridGeometry};

/// Two boundary crossings closer than this (in cell units) are treated as a
/// corner crossing and stepped diagonally.
const CORNER_EPS: f64 = 1e-9;
/// Start fractions this close to a cell center are snapped onto it.
const CENTER_SNAP: f64 = 1e-9;

/// Cells pierced by a ray, with the distance (meters) at which each is entered.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RayTrace {
    pub cells: Vec<CellIndex>,
    pub entry: Vec<f64>,
    /// Distance at which the ray leaves the last cell, capped at the max range.
    pub exit: f64,
    /// True when the trace stopped at the grid boundary rather than at max range.
    pub clipped: bool,
}

impl RayTrace {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Traverses from `start` with fractional offset `frac` (each in `[0, 1)`)
/// along the unit direction `dir`, collecting cells entered before
/// `max_cells` (cell units). When `bounds` is set the trace stops at the
/// first cell outside `[0, w) x [0, h)`.
pub(crate) fn traverse(
    start: CellIndex,
    frac: [f64; 2],
    dir: [f64; 2],
    max_cells: f64,
    bounds: Option<(i32, i32)>,
) -> (Vec<CellIndex>, Vec<f64>, f64, bool) {
    let frac = frac.map(|f| if (f - 0.5).abs() < CENTER_SNAP { 0.5 } else { f });
    let mut step = [0i32; 2];
    let mut t_max = [f64::INFINITY; 2];
    let mut t_delta = [f64::INFINITY; 2];
    for a in 0..2 {
        if dir[a] > 0.0 {
            step[a] = 1;
            t_max[a] = (1.0 - frac[a]) / dir[a];
            t_delta[a] = 1.0 / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            t_max[a] = frac[a] / -dir[a];
            t_delta[a] = -1.0 / dir[a];
        }
    }

    let mut cells = vec![start];
    let mut entry = vec![0.0];
    let (mut x, mut y) = (start.x, start.y);
    loop {
        let t_next = t_max[0].min(t_max[1]);
        if t_next >= max_cells {
            return (cells, entry, max_cells.max(0.0), false);
        }
        if (t_max[0] - t_max[1]).abs() <= CORNER_EPS {
            x += step[0];
            y += step[1];
            t_max[0] += t_delta[0];
            t_max[1] += t_delta[1];
        } else if t_max[0] < t_max[1] {
            x += step[0];
            t_max[0] += t_delta[0];
        } else {
            y += step[1];
            t_max[1] += t_delta[1];
        }
        if let Some((w, h)) = bounds {
            if x < 0 || y < 0 || x >= w || y >= h {
                return (cells, entry, t_next, true);
            }
        }
        cells.push(CellIndex::new(x, y));
        entry.push(t_next);
    }
}

/// Cells pierced by the segment from `start` (world xy) along `direction`
/// up to `max_range` meters, in traversal order and clipped to the grid.
///
/// Returns an empty trace when `start` lies outside the grid.
pub fn trace_ray(geom: &GridGeometry, start: [f64; 2], direction: [f64; 2], max_range: f64) -> RayTrace {
    let Some((cell, frac)) = geom.locate(start) else {
        return RayTrace::default();
    };
    let norm = direction[0].hypot(direction[1]);
    let dir = if norm > 0.0 {
        [direction[0] / norm, direction[1] / norm]
    } else {
        [0.0, 0.0]
    };
    let max_cells = if norm > 0.0 { max_range / geom.resolution } else { 0.0 };
    let (cells, entry, exit, clipped) = traverse(
        cell,
        frac,
        dir,
        max_cells,
        Some((geom.width as i32, geom.height as i32)),
    );
    let r = geom.resolution;
    RayTrace {
        cells,
        entry: entry.into_iter().map(|t| t * r).collect(),
        exit: exit * r,
        clipped,
    }
}

/// Convenience wrapper returning only the ordered cells.
pub fn ray_trace(geom: &GridGeometry, start: [f64; 2], direction: [f64; 2], max_range: f64) -> Vec<CellIndex> {
    trace_ray(geom, start, direction, max_range).cells
}
