//! Seeded sample generators shared by the CLI and the test suites.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::norms::Vector;
use crate::rational;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sparse vectors with `1..=max_len` coordinates in `[1, max_coord]` and
/// values `p/q`, `|p| ≤ 4`, `1 ≤ q ≤ 4`.
pub fn sparse_vectors(rng: &mut ChaCha8Rng, count: usize, max_coord: u64, max_len: usize) -> Vec<Vector> {
    (0..count)
        .map(|_| loop {
            let len = rng.gen_range(1..=max_len.min(max_coord as usize));
            let coords = index::sample(rng, max_coord as usize, len);
            let v = Vector::from_pairs(coords.into_iter().map(|c| {
                let p: i64 = rng.gen_range(-4..=4);
                let q: i64 = rng.gen_range(1..=4);
                (c as u64 + 1, rational::q(p, q))
            }));
            if !v.is_zero() {
                break v;
            }
        })
        .collect()
}

/// Patterns in `{−1, 0, 1}^[1, dim]` with at least one nonzero entry; each
/// entry is nonzero with probability `density`.
pub fn sign_patterns(rng: &mut ChaCha8Rng, count: usize, dim: u64, density: f64) -> Vec<Vector> {
    (0..count)
        .map(|_| loop {
            let mut pairs = Vec::new();
            for c in 1..=dim {
                if rng.gen_bool(density) {
                    pairs.push((c, if rng.gen_bool(0.5) { rational::int(1) } else { rational::int(-1) }));
                }
            }
            let v = Vector::from_pairs(pairs);
            if !v.is_zero() {
                break v;
            }
        })
        .collect()
}
