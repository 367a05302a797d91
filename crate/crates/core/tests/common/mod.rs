#![allow(dead_code, clippy::needless_range_loop)]

use ganens::EmbeddingSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dist(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = f64::from(*x) - f64::from(*y);
        s += d * d;
    }
    s.sqrt()
}

/// k-th nearest other point, by full sort.
pub fn radii(r: &EmbeddingSet, k: usize) -> Vec<f64> {
    (0..r.rows())
        .map(|i| {
            let mut d: Vec<f64> = (0..r.rows()).filter(|&j| j != i).map(|j| dist(r.row(i), r.row(j))).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

pub fn density(r: &EmbeddingSet, c: &EmbeddingSet, k: usize) -> f64 {
    let rad = radii(r, k);
    let mut hits = 0usize;
    for j in 0..c.rows() {
        for i in 0..r.rows() {
            if dist(r.row(i), c.row(j)) <= rad[i] {
                hits += 1;
            }
        }
    }
    hits as f64 / (k as f64 * c.rows() as f64)
}

pub fn coverage(r: &EmbeddingSet, c: &EmbeddingSet, k: usize) -> f64 {
    let rad = radii(r, k);
    let covered = (0..r.rows())
        .filter(|&i| (0..c.rows()).any(|j| dist(r.row(i), c.row(j)) <= rad[i]))
        .count();
    covered as f64 / r.rows() as f64
}

/// Points on a coarse integer grid so that distance ties are common.
pub fn grid_set(rng: &mut ChaCha8Rng, id: &str, rows: usize, dim: usize) -> EmbeddingSet {
    let data = (0..rows * dim).map(|_| rng.random_range(-4i32..=4) as f32).collect();
    EmbeddingSet::new(id, rows, dim, data).unwrap()
}

pub fn gaussian_set(rng: &mut ChaCha8Rng, id: &str, rows: usize, dim: usize, shift: f32) -> EmbeddingSet {
    let data = (0..rows * dim)
        .map(|_| {
            let z: f32 = rng.sample(rand_distr::StandardNormal);
            z + shift
        })
        .collect();
    EmbeddingSet::new(id, rows, dim, data).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
