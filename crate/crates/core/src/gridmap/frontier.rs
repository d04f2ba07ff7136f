//! Frontier extraction: ML-free cells with an unknown 4-neighbor, grouped
//! into 8-connected clusters.

use std::collections::VecDeque;
use std::io::Write;

use super::{CellIndex, CellState, OccupancyGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierCluster {
    pub cells: Vec<CellIndex>,
    /// Mean of the member cell centers (world frame, meters).
    pub centroid: [f64; 2],
}

impl FrontierCluster {
    pub fn size(&self) -> usize {
        self.cells.len()
    }

    /// Member whose center is closest to the centroid (first on ties).
    pub fn anchor(&self, grid: &OccupancyGrid) -> CellIndex {
        let g = grid.geometry();
        *self
            .cells
            .iter()
            .min_by(|a, b| {
                let da = dist2(g.cell_center(**a), self.centroid);
                let db = dist2(g.cell_center(**b), self.centroid);
                da.total_cmp(&db)
            })
            .expect("clusters are non-empty")
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

const N4: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const N8: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// True when `c` is free and borders an unknown cell.
pub fn is_frontier(grid: &OccupancyGrid, c: CellIndex) -> bool {
    if grid.state(c) != CellState::Free {
        return false;
    }
    N4.iter().any(|&(dx, dy)| {
        let n = CellIndex::new(c.x + dx, c.y + dy);
        grid.geometry().contains(n) && grid.state(n) == CellState::Unknown
    })
}

/// All frontier clusters, largest first; ties keep scan order.
pub fn find_frontiers(grid: &OccupancyGrid) -> Vec<FrontierCluster> {
    let g = grid.geometry();
    let (w, h) = (g.width, g.height);
    let mut frontier = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            frontier[y * w + x] = is_frontier(grid, CellIndex::new(x as i32, y as i32));
        }
    }

    let mut seen = vec![false; w * h];
    let mut clusters = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !frontier[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut cells = Vec::new();
        while let Some(i) = queue.pop_front() {
            let c = CellIndex::new((i % w) as i32, (i / w) as i32);
            cells.push(c);
            for &(dx, dy) in &N8 {
                let n = CellIndex::new(c.x + dx, c.y + dy);
                if !g.contains(n) {
                    continue;
                }
                let j = g.linear(n);
                if frontier[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let n = cells.len() as f64;
        let (sx, sy) = cells.iter().fold((0.0, 0.0), |(sx, sy), c| {
            let p = g.cell_center(*c);
            (sx + p[0], sy + p[1])
        });
        clusters.push(FrontierCluster {
            cells,
            centroid: [sx / n, sy / n],
        });
    }
    clusters.sort_by_key(|c| std::cmp::Reverse(c.size()));
    clusters
}

/// CSV with header `centroid_x,centroid_y,size`.
pub fn write_frontiers_csv<W: Write>(out: &mut W, clusters: &[FrontierCluster]) -> std::io::Result<()> {
    writeln!(out, "centroid_x,centroid_y,size")?;
    for c in clusters {
        writeln!(out, "{},{},{}", c.centroid[0], c.centroid[1], c.size())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::GridGeometry;

    fn grid(n: usize) -> OccupancyGrid {
        OccupancyGrid::new(GridGeometry::new(n, n, 1.0, [0.0, 0.0]).unwrap(), Default::default())
    }

    #[test]
    fn unknown_map_has_no_frontiers() {
        assert!(find_frontiers(&grid(12)).is_empty());
    }

    #[test]
    fn fully_known_map_has_no_frontiers() {
        let mut g = grid(8);
        g.log_odds_mut().iter_mut().for_each(|l| *l = -2.0);
        g.log_odds_mut()[9] = 3.0;
        assert!(find_frontiers(&g).is_empty());
    }

    #[test]
    fn free_disk_gives_single_ring() {
        let mut g = grid(21);
        let geom = *g.geometry();
        for y in 0..21 {
            for x in 0..21 {
                let (dx, dy) = (x as f64 - 10.0, y as f64 - 10.0);
                if dx * dx + dy * dy <= 36.0 {
                    let i = geom.linear(CellIndex::new(x, y));
                    g.log_odds_mut()[i] = -1.0;
                }
            }
        }
        let clusters = find_frontiers(&g);
        assert_eq!(clusters.len(), 1);
        // Brute-force scan: free cells with an unknown 4-neighbor.
        let mut expected = 0;
        for y in 0..21i32 {
            for x in 0..21i32 {
                let inside = |x: i32, y: i32| {
                    let (dx, dy) = (x as f64 - 10.0, y as f64 - 10.0);
                    dx * dx + dy * dy <= 36.0
                };
                if inside(x, y)
                    && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                        .iter()
                        .any(|(a, b)| !inside(x + a, y + b))
                {
                    expected += 1;
                }
            }
        }
        assert_eq!(clusters[0].size(), expected);
        let c = clusters[0].centroid;
        assert!((c[0] - 10.5).abs() < 1e-12 && (c[1] - 10.5).abs() < 1e-12);
    }

    #[test]
    fn clusters_sorted_by_size() {
        let mut g = grid(20);
        let geom = *g.geometry();
        for x in 0..3 {
            g.log_odds_mut()[geom.linear(CellIndex::new(x, 2))] = -1.0;
        }
        for x in 8..16 {
            g.log_odds_mut()[geom.linear(CellIndex::new(x, 10))] = -1.0;
        }
        let clusters = find_frontiers(&g);
        assert_eq!(clusters.iter().map(|c| c.size()).collect::<Vec<_>>(), vec![8, 3]);
    }
}
