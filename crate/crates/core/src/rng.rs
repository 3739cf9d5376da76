//! Seeded random sampling. ChaCha is counter-based, so a `(seed, stream)` pair
//! fixes every draw regardless of how many other streams were used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type ToolRng = ChaCha8Rng;

pub fn seeded(seed: u64, stream: u64) -> ToolRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal_vec(rng: &mut ToolRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn uniform_vec(rng: &mut ToolRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Uniformly distributed unit vector in `R^n`.
pub fn unit_vector(rng: &mut ToolRng, n: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, n);
        let norm = crate::linalg::norm(&v);
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
