//! Exact Euclidean distance transform (Felzenszwalb & Huttenlocher lower
//! envelope of parabolas, applied separably along rows then columns).

/// Squared 1-D distance transform of `f` into `out`, using scratch buffers.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    // Skip leading infinite sites; the envelope starts at the first finite one.
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = q as f64;
        let meet = |p: usize| {
            let pf = p as f64;
            ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
        };
        let mut s = meet(v[k]);
        // z[0] is -inf, so this never pops the first parabola.
        while s <= z[k] {
            k -= 1;
            s = meet(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *o = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Distance (meters) from every cell center to the nearest center of a cell
/// with `free_mask == false`. Non-free cells map to 0; if no non-free cell
/// exists every entry is infinite. Cells outside the grid are ignored.
pub fn distance_transform(free_mask: &[bool], width: usize, height: usize, resolution: f64) -> Vec<f64> {
    assert_eq!(free_mask.len(), width * height, "mask size does not match dims");
    let mut grid: Vec<f64> = free_mask
        .iter()
        .map(|&free| if free { f64::INFINITY } else { 0.0 })
        .collect();
    let n = width.max(height);
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut f = vec![0.0f64; n];
    let mut out = vec![0.0f64; n];

    for y in 0..height {
        let row = &mut grid[y * width..(y + 1) * width];
        f[..width].copy_from_slice(row);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        row.copy_from_slice(&out[..width]);
    }
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    grid.into_iter().map(|d2| d2.sqrt() * resolution).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(mask: &[bool], w: usize, h: usize, res: f64) -> Vec<f64> {
        let blocked: Vec<(usize, usize)> = (0..w * h).filter(|&i| !mask[i]).map(|i| (i % w, i / w)).collect();
        (0..w * h)
            .map(|i| {
                if !mask[i] {
                    return 0.0;
                }
                let (x, y) = (i % w, i / w);
                blocked
                    .iter()
                    .map(|&(bx, by)| {
                        let dx = bx as f64 - x as f64;
                        let dy = by as f64 - y as f64;
                        (dx * dx + dy * dy).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
                    * res
            })
            .collect()
    }

    #[test]
    fn single_central_obstacle() {
        let mut mask = vec![true; 25];
        mask[12] = false;
        let d = distance_transform(&mask, 5, 5, 0.25);
        assert!((d[0] - 2.0 * 2f64.sqrt() * 0.25).abs() < 1e-15);
        assert_eq!(d[13], 0.25);
        assert_eq!(d[12], 0.0);
    }

    #[test]
    fn all_free_is_infinite() {
        let d = distance_transform(&[true; 6], 3, 2, 1.0);
        assert!(d.iter().all(|v| v.is_infinite()));
    }

    proptest! {
        #[test]
        fn matches_brute_force(w in 1usize..24, h in 1usize..24, density in 0.0f64..0.5, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mask: Vec<bool> = (0..w * h).map(|_| !rng.random_bool(density)).collect();
            let fast = distance_transform(&mask, w, h, 0.5);
            let slow = brute(&mask, w, h, 0.5);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert_eq!(a, b);
            }
        }
    }
}
