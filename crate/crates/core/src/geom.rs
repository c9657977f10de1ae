//! Geometric field primitives: exact Euclidean distance transforms, segment
//! sampling between pixels, and separable Gaussian smoothing.

use crate::error::{Error, Result};
use crate::grid::{BitMask, GridMap, Pixel};

/// Per-pixel Euclidean distance (pixel units) to the nearest pixel of a source set.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField(GridMap);

impl DistanceField {
    /// Wraps a precomputed field; values must be non-negative.
    pub fn from_map(map: GridMap) -> Result<Self> {
        if map.values().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter("distance field has negative values".into()));
        }
        Ok(Self(map))
    }

    pub fn as_map(&self) -> &GridMap {
        &self.0
    }

    pub fn into_map(self) -> GridMap {
        self.0
    }

    pub fn get(&self, p: Pixel) -> f64 {
        self.0.get(p)
    }

    /// Min-max normalized copy, for consumers that want a unit-range input plane.
    pub fn normalized(&self) -> GridMap {
        self.0.min_max_normalized()
    }
}

/// Exact nearest-source assignment.
///
/// `squared[i]` is the squared Euclidean distance from pixel `i` to its nearest
/// source and `source[i]` that source's row-major index. Among equidistant
/// sources the one with the smallest row-major index wins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NearestSources {
    pub height: usize,
    pub width: usize,
    pub squared: Vec<u64>,
    pub source: Vec<usize>,
}

const NONE: usize = usize::MAX;

/// Separable lower-envelope transform in exact integer arithmetic.
pub fn nearest_sources(source: &BitMask) -> Result<NearestSources> {
    if source.none() {
        return Err(Error::EmptySource);
    }
    let (h, w) = source.dims();
    let bits = source.bits();

    // Column pass: nearest source row within each column, upper row on ties.
    let mut col_row = vec![NONE; h * w];
    for c in 0..w {
        let mut above = NONE;
        for r in 0..h {
            if bits[r * w + c] {
                above = r;
            }
            col_row[r * w + c] = above;
        }
        let mut below = NONE;
        for r in (0..h).rev() {
            if bits[r * w + c] {
                below = r;
            }
            let a = col_row[r * w + c];
            let pick = match (a, below) {
                (NONE, b) => b,
                (a, NONE) => a,
                (a, b) => {
                    if r - a <= b - r {
                        a
                    } else {
                        b
                    }
                }
            };
            col_row[r * w + c] = pick;
        }
    }

    let mut squared = vec![0u64; h * w];
    let mut nearest = vec![NONE; h * w];
    let mut cols: Vec<usize> = Vec::with_capacity(w);
    let mut starts: Vec<i64> = Vec::with_capacity(w);
    for r in 0..h {
        let row = &col_row[r * w..(r + 1) * w];
        let height_of = |q: usize| {
            let d = r as i64 - row[q] as i64;
            d * d
        };
        let key_of = |q: usize| row[q] * w + q;

        cols.clear();
        starts.clear();
        for q in (0..w).filter(|&q| row[q] != NONE) {
            loop {
                let Some(&v) = cols.last() else {
                    cols.push(q);
                    starts.push(i64::MIN);
                    break;
                };
                let t = takeover(v, height_of(v), key_of(v), q, height_of(q), key_of(q));
                if t <= *starts.last().unwrap() {
                    cols.pop();
                    starts.pop();
                } else {
                    cols.push(q);
                    starts.push(t);
                    break;
                }
            }
        }

        let mut k = 0;
        for x in 0..w {
            while k + 1 < cols.len() && starts[k + 1] <= x as i64 {
                k += 1;
            }
            let q = cols[k];
            let dx = x as i64 - q as i64;
            squared[r * w + x] = (dx * dx + height_of(q)) as u64;
            nearest[r * w + x] = key_of(q);
        }
    }
    Ok(NearestSources { height: h, width: w, squared, source: nearest })
}

/// First integer `x` at which the parabola rooted at column `q` beats the one at `v` (`v < q`),
/// comparing `(squared distance, source index)` lexicographically.
fn takeover(v: usize, fv: i64, kv: usize, q: usize, fq: i64, kq: usize) -> i64 {
    let (v, q) = (v as i64, q as i64);
    let num = fq + q * q - fv - v * v;
    let den = 2 * (q - v);
    let floor = num.div_euclid(den);
    if num.rem_euclid(den) != 0 {
        floor + 1
    } else if kq < kv {
        floor
    } else {
        floor + 1
    }
}

/// Exact Euclidean distance from every pixel to the nearest `source` pixel.
pub fn euclidean_distance_transform(source: &BitMask) -> Result<DistanceField> {
    let ns = nearest_sources(source)?;
    let values = ns.squared.iter().map(|&d| (d as f64).sqrt()).collect();
    Ok(DistanceField(GridMap::new(ns.height, ns.width, values)?))
}

/// Building pixels that touch accessible space through a 4-neighbor, or sit on the raster edge.
pub fn building_boundary(building: &BitMask) -> BitMask {
    let (h, w) = building.dims();
    BitMask::from_fn(h, w, |p| {
        if !building.get(p) {
            return false;
        }
        if p.row == 0 || p.col == 0 || p.row + 1 == h || p.col + 1 == w {
            return true;
        }
        let n = [
            Pixel::new(p.row - 1, p.col),
            Pixel::new(p.row + 1, p.col),
            Pixel::new(p.row, p.col - 1),
            Pixel::new(p.row, p.col + 1),
        ];
        n.iter().any(|&q| !building.get(q))
    })
}

/// Distance to the nearest building boundary pixel. A map without buildings
/// gets the constant sentinel `height + width`.
pub fn boundary_distance(building: &BitMask) -> DistanceField {
    let (h, w) = building.dims();
    let boundary = building_boundary(building);
    if boundary.none() {
        return DistanceField(GridMap::filled(h, w, (h + w) as f64));
    }
    euclidean_distance_transform(&boundary).expect("boundary set is non-empty")
}

/// The `index`-th (1-based) of `n_samples` midpoint samples on the segment `from -> to`,
/// rounded to the nearest pixel with halves going to the larger index.
pub fn segment_sample(from: Pixel, to: Pixel, index: usize, n_samples: usize) -> Pixel {
    let two_n = 2 * n_samples as i64;
    let k = 2 * index as i64 - 1;
    let axis = |a: usize, b: usize| {
        let (a, b) = (a as i64, b as i64);
        let num = two_n * a + k * (b - a) + n_samples as i64;
        num.div_euclid(two_n) as usize
    };
    Pixel::new(axis(from.row, to.row), axis(from.col, to.col))
}

/// Fraction of the `n_samples` midpoint samples along `tx -> p` that land on building pixels.
pub fn line_blockage_fraction(building: &BitMask, tx: Pixel, p: Pixel, n_samples: usize) -> f64 {
    assert!(n_samples >= 1, "n_samples must be at least 1");
    let hits = (1..=n_samples).filter(|&n| building.get(segment_sample(tx, p, n, n_samples))).count();
    hits as f64 / n_samples as f64
}

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur, kernel radius `ceil(3σ)`, replicate borders. `sigma == 0` is the identity.
pub fn gaussian_smooth(map: &GridMap, sigma: f64) -> Result<GridMap> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return Ok(map.clone());
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let kernel = gaussian_kernel(sigma, radius);
    let (h, w) = map.dims();
    let src = map.values();
    let r = radius as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horiz = vec![0.0; h * w];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                let c = clamp(col as isize + t as isize - r, w);
                acc += k * src[row * w + c];
            }
            horiz[row * w + col] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                let rr = clamp(row as isize + t as isize - r, h);
                acc += k * horiz[rr * w + col];
            }
            out[row * w + col] = acc;
        }
    }
    GridMap::new(h, w, out)
}
