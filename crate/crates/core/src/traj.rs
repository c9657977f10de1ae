//! Seeded observation masks: A* trajectories between random waypoints, and
//! uniformly random pixel sets, both drawn over accessible pixels only.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sampling_budget, BitMask, Pixel, Scene};

/// Number of mask variants per map and rate.
pub const VARIANTS: u32 = 8;

/// Consecutive unreachable waypoint draws tolerated before giving up.
pub const WAYPOINT_RETRY_CAP: usize = 1000;

/// Identifies one mask instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub map_id: u32,
    pub rate: f64,
    pub variant: u32,
    pub global_seed: u64,
}

impl TrajectorySpec {
    pub fn new(map_id: u32, rate: f64, variant: u32, global_seed: u64) -> Result<Self> {
        if variant >= VARIANTS {
            return Err(Error::InvalidParameter(format!("variant {variant} must be below {VARIANTS}")));
        }
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidParameter(format!("sampling rate {rate} not in (0, 1]")));
        }
        Ok(Self { map_id, rate, variant, global_seed })
    }

    /// The rate as an integer number of parts per million, used for seeding.
    pub fn rate_ppm(&self) -> u64 {
        (self.rate * 1e6).round() as u64
    }
}

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed: `mix64` folded over global seed, map id, rate (ppm) and variant, in that order.
pub fn derive_stream_seed(spec: &TrajectorySpec) -> u64 {
    [spec.map_id as u64, spec.rate_ppm(), spec.variant as u64]
        .into_iter()
        .fold(mix64(spec.global_seed), |h, x| mix64(h ^ x))
}

fn stream(spec: &TrajectorySpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_stream_seed(spec))
}

/// Path length `straight + diagonal·√2`, compared exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OctileCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl OctileCost {
    pub fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    fn plus(self, other: OctileCost) -> OctileCost {
        OctileCost { straight: self.straight + other.straight, diagonal: self.diagonal + other.diagonal }
    }

    /// Admissible, consistent heuristic between two pixels.
    pub fn octile(a: Pixel, b: Pixel) -> OctileCost {
        let dr = a.row.abs_diff(b.row) as u32;
        let dc = a.col.abs_diff(b.col) as u32;
        OctileCost { straight: dr.max(dc) - dr.min(dc), diagonal: dr.min(dc) }
    }
}

impl Ord for OctileCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign of ds - dd·√2, without rounding
        let ds = self.straight as i64 - other.straight as i64;
        let dd = other.diagonal as i64 - self.diagonal as i64;
        if ds == 0 && dd == 0 {
            return Ordering::Equal;
        }
        if ds >= 0 && dd <= 0 {
            return Ordering::Greater;
        }
        if ds <= 0 && dd >= 0 {
            return Ordering::Less;
        }
        let by_square = (ds * ds).cmp(&(2 * dd * dd));
        if ds > 0 {
            by_square
        } else {
            by_square.reverse()
        }
    }
}

impl PartialOrd for OctileCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// An 8-connected chain of accessible pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSegment {
    pub pixels: Vec<Pixel>,
}

impl PathSegment {
    pub fn cost(&self) -> OctileCost {
        self.pixels.windows(2).fold(OctileCost::default(), |acc, w| {
            let diag = w[0].row != w[1].row && w[0].col != w[1].col;
            acc.plus(if diag {
                OctileCost { straight: 0, diagonal: 1 }
            } else {
                OctileCost { straight: 1, diagonal: 0 }
            })
        })
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Neighbor offsets in row-major order.
const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

#[derive(PartialEq, Eq)]
struct Open {
    f: OctileCost,
    g: OctileCost,
    seq: u64,
    index: usize,
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: lowest f first, then highest g, then earliest push
        other.f.cmp(&self.f).then_with(|| self.g.cmp(&other.g)).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 8-connected path under octile step costs, avoiding building pixels.
pub fn astar_path(building: &BitMask, start: Pixel, goal: Pixel) -> Result<PathSegment> {
    for p in [start, goal] {
        if !building.contains(p) {
            return Err(Error::OutOfBounds(p.tuple()));
        }
        if building.get(p) {
            return Err(Error::NotAccessible(p.tuple()));
        }
    }
    let (h, w) = building.dims();
    let idx = |p: Pixel| p.row * w + p.col;
    let goal_idx = idx(goal);

    let mut best: Vec<Option<OctileCost>> = vec![None; h * w];
    let mut parent = vec![usize::MAX; h * w];
    let mut closed = vec![false; h * w];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;

    best[idx(start)] = Some(OctileCost::default());
    heap.push(Open { f: OctileCost::octile(start, goal), g: OctileCost::default(), seq, index: idx(start) });

    while let Some(Open { g, index, .. }) = heap.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == goal_idx {
            let mut pixels = vec![building.pixel(index)];
            let mut cur = index;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                pixels.push(building.pixel(cur));
            }
            pixels.reverse();
            return Ok(PathSegment { pixels });
        }
        let here = building.pixel(index);
        for (dr, dc) in NEIGHBORS {
            let (Some(r), Some(c)) = (here.row.checked_add_signed(dr), here.col.checked_add_signed(dc)) else {
                continue;
            };
            if r >= h || c >= w {
                continue;
            }
            let next = Pixel::new(r, c);
            let ni = idx(next);
            if building.get(next) || closed[ni] {
                continue;
            }
            let step = if dr != 0 && dc != 0 {
                OctileCost { straight: 0, diagonal: 1 }
            } else {
                OctileCost { straight: 1, diagonal: 0 }
            };
            let ng = g.plus(step);
            if best[ni].is_some_and(|b| b <= ng) {
                continue;
            }
            best[ni] = Some(ng);
            parent[ni] = index;
            seq += 1;
            heap.push(Open { f: ng.plus(OctileCost::octile(next, goal)), g: ng, seq, index: ni });
        }
    }
    Err(Error::Disconnected { start: start.tuple(), goal: goal.tuple() })
}

/// 8-connected component labels over accessible pixels; building pixels get `usize::MAX`.
pub fn accessible_components(building: &BitMask) -> (Vec<usize>, Vec<usize>) {
    let (h, w) = building.dims();
    let mut label = vec![usize::MAX; h * w];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..h * w {
        if building.bits()[seed] || label[seed] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        label[seed] = id;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            size += 1;
            let p = building.pixel(i);
            for (dr, dc) in NEIGHBORS {
                let (Some(r), Some(c)) = (p.row.checked_add_signed(dr), p.col.checked_add_signed(dc)) else {
                    continue;
                };
                if r >= h || c >= w {
                    continue;
                }
                let j = r * w + c;
                if !building.bits()[j] && label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    (label, sizes)
}

fn draw(rng: &mut ChaCha8Rng, from: &[usize]) -> usize {
    from[rng.gen_range(0..from.len() as u64) as usize]
}

/// Trajectory mask: chained A* paths between uniformly drawn accessible
/// waypoints, unioned until exactly the sampling budget is covered.
///
/// The first waypoint is redrawn while its 8-connected component is smaller
/// than the budget; later waypoints are redrawn while unreachable from the
/// current endpoint. Either retry loop fails after [`WAYPOINT_RETRY_CAP`]
/// consecutive misses. The last path is truncated at the budget.
pub fn generate_trajectory_mask(scene: &Scene, spec: &TrajectorySpec) -> Result<BitMask> {
    let building = &scene.building;
    let budget = sampling_budget(building, spec.rate)?;
    let accessible: Vec<usize> = building.complement().indices().collect();
    if budget > accessible.len() {
        return Err(Error::BudgetExceedsAccessible { budget, accessible: accessible.len() });
    }
    let (h, w) = building.dims();
    let mut mask = BitMask::empty(h, w);
    if budget == 0 {
        return Ok(mask);
    }
    let (label, sizes) = accessible_components(building);
    let mut rng = stream(spec);

    let mut current = None;
    for _ in 0..WAYPOINT_RETRY_CAP {
        let c = draw(&mut rng, &accessible);
        if sizes[label[c]] >= budget {
            current = Some(c);
            break;
        }
    }
    let mut current = current.ok_or(Error::WaypointRetriesExhausted(WAYPOINT_RETRY_CAP))?;
    let component = label[current];

    let mut count = 0;
    let mut segments = 0usize;
    while count < budget {
        let mut goal = None;
        for _ in 0..WAYPOINT_RETRY_CAP {
            let g = draw(&mut rng, &accessible);
            if label[g] == component {
                goal = Some(g);
                break;
            }
        }
        let goal = goal.ok_or(Error::WaypointRetriesExhausted(WAYPOINT_RETRY_CAP))?;
        let path = astar_path(building, building.pixel(current), building.pixel(goal))?;
        segments += 1;
        for p in path.pixels {
            if !mask.get(p) {
                mask.set(p, true);
                count += 1;
                if count == budget {
                    break;
                }
            }
        }
        current = goal;
    }
    debug!("map {} rate {} variant {}: {count} pixels from {segments} segments", spec.map_id, spec.rate, spec.variant);
    Ok(mask)
}

/// Uniform random mask: `budget` accessible pixels drawn without replacement.
pub fn generate_random_mask(scene: &Scene, spec: &TrajectorySpec) -> Result<BitMask> {
    let building = &scene.building;
    let budget = sampling_budget(building, spec.rate)?;
    let mut accessible: Vec<usize> = building.complement().indices().collect();
    if budget > accessible.len() {
        return Err(Error::BudgetExceedsAccessible { budget, accessible: accessible.len() });
    }
    let mut rng = stream(spec);
    let (chosen, _) = accessible.partial_shuffle(&mut rng, budget);
    let (h, w) = building.dims();
    let mut mask = BitMask::empty(h, w);
    for &i in chosen.iter() {
        mask.set(building.pixel(i), true);
    }
    Ok(mask)
}
