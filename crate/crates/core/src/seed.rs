//! Deterministic seeding: every random stream in the crate is a ChaCha8
//! generator keyed by a 64-bit seed, and derived seeds come from a fixed
//! SplitMix64-style mixer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(master, a, b)`, e.g. (master seed, cell index, trial index).
pub fn mix(master: u64, a: u64, b: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ a) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Index of the category hit by `u ∈ [0, 1)` under the cumulative table.
pub(crate) fn draw(cumulative: &[f64], u: f64) -> usize {
    let target = u * cumulative[cumulative.len() - 1];
    cumulative
        .partition_point(|&c| c <= target)
        .min(cumulative.len() - 1)
}

pub(crate) fn cumulative<T: crate::Scalar>(probs: &[T]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p.to_f64_lossy();
            acc
        })
        .collect()
}

/// Symmetric Dirichlet(1) draw over `k` categories, mixed with the uniform
/// so that every entry is at least `floor` (`0 ≤ floor ≤ 1/k`).
pub fn floored_dirichlet<R: rand::Rng + ?Sized>(k: usize, floor: f64, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let scale = 1.0 - k as f64 * floor;
    let mut v: Vec<f64> = raw.iter().map(|x| floor + scale * x / total).collect();
    // absorb rounding in the last entry
    let s: f64 = v.iter().sum();
    v[k - 1] += 1.0 - s;
    v
}
