//! Deterministic synthetic scenes: axis-aligned rectangular buildings, one
//! transmitter on open ground, and a radial-decay gain map darkened behind
//! buildings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::line_blockage_fraction;
use crate::grid::{BitMask, GridMap, Pixel, Scene};
use crate::traj::mix64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyOptions {
    pub size: usize,
    pub buildings: usize,
    pub seed: u64,
}

impl Default for ToyOptions {
    fn default() -> Self {
        Self { size: 64, buildings: 6, seed: 0 }
    }
}

pub fn toy_scene(map_id: u32, opts: &ToyOptions) -> Scene {
    let n = opts.size;
    assert!(n >= 8, "toy scenes need at least 8x8 pixels");
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(opts.seed ^ mix64(map_id as u64 + 1)));
    let mut building = BitMask::empty(n, n);
    let (lo, hi) = ((n / 16).max(2), (n / 5).max(3));
    for _ in 0..opts.buildings {
        let bh = rng.gen_range(lo as u64..=hi as u64) as usize;
        let bw = rng.gen_range(lo as u64..=hi as u64) as usize;
        let r0 = rng.gen_range(0..(n - bh) as u64) as usize;
        let c0 = rng.gen_range(0..(n - bw) as u64) as usize;
        for r in r0..r0 + bh {
            for c in c0..c0 + bw {
                building.set(Pixel::new(r, c), true);
            }
        }
    }
    let tx = loop {
        let p = Pixel::new(rng.gen_range(0..n as u64) as usize, rng.gen_range(0..n as u64) as usize);
        if !building.get(p) {
            break p;
        }
    };
    let scale = 0.35 * n as f64;
    let truth = GridMap::from_fn(n, n, |p| {
        if building.get(p) {
            return 0.0;
        }
        let dr = p.row as f64 - tx.row as f64;
        let dc = p.col as f64 - tx.col as f64;
        let decay = (-(dr * dr + dc * dc).sqrt() / scale).exp();
        let shadow = 1.0 - 0.6 * line_blockage_fraction(&building, tx, p, 32);
        decay * shadow
    });
    Scene::new(map_id, building, tx, truth).expect("toy rasters share dimensions")
}

pub fn toy_scenes(count: usize, opts: &ToyOptions) -> Vec<Scene> {
    (0..count as u32).map(|id| toy_scene(id, opts)).collect()
}
