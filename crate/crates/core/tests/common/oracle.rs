//! Independent reference implementations used as test oracles. Everything here
//! is deliberately naive: dense scans, direct loops and exact rationals.
#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments)]

use std::collections::BinaryHeap;

use num_rational::Ratio;
use radiomap_core::{BitMask, GridMap, Pixel};

/// Nearest source by full scan: `(squared distance, row-major index)` minimum.
pub fn brute_nearest(source: &BitMask) -> Vec<(u64, usize)> {
    let (h, w) = source.dims();
    let sources: Vec<usize> = (0..h * w).filter(|&i| source.bits()[i]).collect();
    (0..h * w)
        .map(|i| {
            let (r, c) = ((i / w) as i64, (i % w) as i64);
            sources
                .iter()
                .map(|&s| {
                    let (sr, sc) = ((s / w) as i64, (s % w) as i64);
                    (((r - sr).pow(2) + (c - sc).pow(2)) as u64, s)
                })
                .min()
                .unwrap()
        })
        .collect()
}

pub fn brute_distance(source: &BitMask) -> Vec<f64> {
    brute_nearest(source).into_iter().map(|(d, _)| (d as f64).sqrt()).collect()
}

#[derive(PartialEq)]
struct Node(f64, usize, (u32, u32));

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.partial_cmp(&self.0).unwrap().then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Uniform-cost search without heuristic. Returns the optimal cost as
/// `(straight steps, diagonal steps)`, which is unique because √2 is irrational.
pub fn ucs_cost(building: &BitMask, start: Pixel, goal: Pixel) -> Option<(u32, u32)> {
    let (h, w) = building.dims();
    let mut dist = vec![f64::INFINITY; h * w];
    let mut steps = vec![(0u32, 0u32); h * w];
    let mut heap = BinaryHeap::new();
    let s = start.row * w + start.col;
    dist[s] = 0.0;
    heap.push(Node(0.0, s, (0, 0)));
    while let Some(Node(d, i, st)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        if i == goal.row * w + goal.col {
            return Some(st);
        }
        let (r, c) = ((i / w) as i64, (i % w) as i64);
        for dr in -1..=1i64 {
            for dc in -1..=1i64 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if building.bits()[j] {
                    continue;
                }
                let diag = dr != 0 && dc != 0;
                let nd = d + if diag { std::f64::consts::SQRT_2 } else { 1.0 };
                if nd < dist[j] - 1e-12 {
                    dist[j] = nd;
                    steps[j] = if diag { (st.0, st.1 + 1) } else { (st.0 + 1, st.1) };
                    heap.push(Node(nd, j, steps[j]));
                }
            }
        }
    }
    None
}

/// Midpoint segment sampling in exact rationals, nearest pixel with halves up.
pub fn rational_blockage(building: &BitMask, tx: Pixel, p: Pixel, n: usize) -> f64 {
    let half = Ratio::new(1i64, 2);
    let coord = |a: usize, b: usize, k: usize| {
        let t = Ratio::new(2 * k as i64 - 1, 2 * n as i64);
        let x = Ratio::from_integer(a as i64) + t * Ratio::from_integer(b as i64 - a as i64);
        (x + half).floor().to_integer() as usize
    };
    let hits = (1..=n).filter(|&k| building.get(Pixel::new(coord(tx.row, p.row, k), coord(tx.col, p.col, k)))).count();
    hits as f64 / n as f64
}

/// Direct 2-D Gaussian convolution with a normalized (2r+1)² kernel and clamped borders.
pub fn dense_gaussian(map: &GridMap, sigma: f64) -> GridMap {
    if sigma == 0.0 {
        return map.clone();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let (h, w) = map.dims();
    let mut weights = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            weights.push(((dy, dx), (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp()));
        }
    }
    let total: f64 = weights.iter().map(|(_, k)| k).sum();
    GridMap::from_fn(h, w, |p| {
        weights
            .iter()
            .map(|&((dy, dx), k)| {
                let rr = (p.row as i64 + dy).clamp(0, h as i64 - 1) as usize;
                let cc = (p.col as i64 + dx).clamp(0, w as i64 - 1) as usize;
                k * map.get(Pixel::new(rr, cc))
            })
            .sum::<f64>()
            / total
    })
}

/// Harmonic inpainting by assembling the dense system and Gaussian elimination
/// with partial pivoting. Assumes every accessible component holds a sample.
pub fn dense_laplace(samples: &GridMap, mask: &BitMask, building: &BitMask) -> GridMap {
    let (h, w) = samples.dims();
    let unknowns: Vec<usize> = (0..h * w).filter(|&i| !building.bits()[i] && !mask.bits()[i]).collect();
    let n = unknowns.len();
    let pos = |i: usize| unknowns.iter().position(|&u| u == i);
    let mut a = vec![vec![0.0; n + 1]; n];
    for (row, &i) in unknowns.iter().enumerate() {
        let (r, c) = ((i / w) as i64, (i % w) as i64);
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                continue;
            }
            let j = nr as usize * w + nc as usize;
            if building.bits()[j] {
                continue;
            }
            a[row][row] += 1.0;
            if mask.bits()[j] {
                a[row][n] += samples.values()[j];
            } else {
                a[row][pos(j).unwrap()] -= 1.0;
            }
        }
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for i in 0..h * w {
        if mask.bits()[i] {
            out[i] = samples.values()[i];
        }
    }
    for (row, &i) in unknowns.iter().enumerate() {
        out[i] = a[row][n] / a[row][row];
    }
    GridMap::new(h, w, out).unwrap()
}

/// IDW by sorting every sample per pixel.
pub fn dense_idw(samples: &GridMap, mask: &BitMask, building: &BitMask, k: usize, power: f64) -> GridMap {
    let (h, w) = samples.dims();
    let sites: Vec<usize> = (0..h * w).filter(|&i| mask.bits()[i]).collect();
    GridMap::from_fn(h, w, |p| {
        let i = p.row * w + p.col;
        if building.bits()[i] {
            return 0.0;
        }
        if mask.bits()[i] {
            return samples.values()[i];
        }
        let mut ranked: Vec<(u64, usize)> = sites
            .iter()
            .map(|&s| {
                let dr = (s / w) as i64 - p.row as i64;
                let dc = (s % w) as i64 - p.col as i64;
                ((dr * dr + dc * dc) as u64, s)
            })
            .collect();
        ranked.sort();
        let (mut num, mut den) = (0.0, 0.0);
        for &(d2, s) in ranked.iter().take(k) {
            let wgt = 1.0 / (d2 as f64).sqrt().powf(power);
            num += wgt * samples.values()[s];
            den += wgt;
        }
        num / den
    })
}

/// Naive SSIM: every valid 11×11 window evaluated directly, averaged over mask pixels.
pub fn naive_ssim(x: &GridMap, y: &GridMap, mask: &BitMask) -> f64 {
    let (h, w) = x.dims();
    let mut g = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (dy, row) in g.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let (a, b) = (dy as f64 - 5.0, dx as f64 - 5.0);
            *v = (-(a * a + b * b) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (mut sum, mut n) = (0.0, 0);
    for r in 5..h - 5 {
        for c in 5..w - 5 {
            if !mask.get(Pixel::new(r, c)) {
                continue;
            }
            let (mut mx, mut my) = (0.0, 0.0);
            for dy in 0..11 {
                for dx in 0..11 {
                    let p = Pixel::new(r + dy - 5, c + dx - 5);
                    mx += g[dy][dx] / total * x.get(p);
                    my += g[dy][dx] / total * y.get(p);
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for dy in 0..11 {
                for dx in 0..11 {
                    let p = Pixel::new(r + dy - 5, c + dx - 5);
                    let k = g[dy][dx] / total;
                    vx += k * (x.get(p) - mx).powi(2);
                    vy += k * (y.get(p) - my).powi(2);
                    cov += k * (x.get(p) - mx) * (y.get(p) - my);
                }
            }
            sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            n += 1;
        }
    }
    sum / n as f64
}

/// `(mae, rmse, nmse, psnr)` by direct scan over mask pixels.
pub fn naive_errors(pred: &GridMap, truth: &GridMap, mask: &BitMask) -> (f64, f64, f64, f64) {
    let mut abs = Vec::new();
    let mut sq = Vec::new();
    let mut energy = 0.0;
    for p in mask.pixels() {
        let e = pred.get(p) - truth.get(p);
        abs.push(e.abs());
        sq.push(e * e);
        energy += truth.get(p) * truth.get(p);
    }
    let n = abs.len() as f64;
    let mse = sq.iter().sum::<f64>() / n;
    let psnr = if mse == 0.0 { 99.0 } else { 10.0 * (1.0 / mse).log10() };
    (abs.iter().sum::<f64>() / n, mse.sqrt(), sq.iter().sum::<f64>() / energy, psnr)
}

/// Boundary pixels by definition: building with an accessible 4-neighbor or on the edge.
pub fn naive_boundary(building: &BitMask) -> BitMask {
    let (h, w) = building.dims();
    BitMask::from_fn(h, w, |p| {
        building.get(p)
            && [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().any(|&(dr, dc)| {
                let (r, c) = (p.row as i64 + dr, p.col as i64 + dc);
                r < 0 || c < 0 || r >= h as i64 || c >= w as i64 || !building.get(Pixel::new(r as usize, c as usize))
            })
    })
}

/// Guidance target composed from the oracles above, in the documented order.
pub fn oracle_target(
    building: &BitMask,
    tx: Pixel,
    mask: &BitMask,
    sigma_d: f64,
    sigma_e: f64,
    sigma_s: f64,
    n_o: usize,
    weights: (f64, f64, f64),
) -> GridMap {
    let (h, w) = building.dims();
    let d_tau = brute_distance(mask);
    let boundary = naive_boundary(building);
    let d_e: Vec<f64> = if boundary.none() { vec![(h + w) as f64; h * w] } else { brute_distance(&boundary) };
    let fused = GridMap::from_fn(h, w, |p| {
        if building.get(p) {
            return 0.0;
        }
        let i = p.row * w + p.col;
        let rd = 1.0 - (-d_tau[i] / sigma_d).exp();
        let re = (-d_e[i] / sigma_e).exp();
        let ro = rational_blockage(building, tx, p, n_o);
        (weights.0 * rd + weights.1 * re + weights.2 * ro).clamp(0.0, 1.0)
    });
    let smooth = dense_gaussian(&fused, sigma_s);
    GridMap::from_fn(h, w, |p| if building.get(p) { 0.0 } else { smooth.get(p).clamp(0.0, 1.0) })
}
