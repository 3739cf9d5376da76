use crate::{Error, Result};

/// Deepest tree accepted; `2^M` leaves must stay desk-sized.
pub const MAX_DEPTH: usize = 20;
pub const DEFAULT_DEPTH: usize = 10;

/// Binary filtration model: `M` steps of `ΔW = ±√Δt`, each with probability ½.
///
/// Node `(k, p)` sits at level `k` with path prefix `p ∈ [0, 2^k)`; its children are
/// `(k+1, 2p)` (increment `−√Δt`) and `(k+1, 2p+1)` (increment `+√Δt`). The most
/// significant bit of `p` is the first increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioTree {
    pub depth: usize,
    pub horizon: f64,
    pub dt: f64,
    pub sqrt_dt: f64,
}

impl ScenarioTree {
    pub fn new(horizon: f64, depth: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::precondition("tree horizon", format!("T = {horizon} must be positive")));
        }
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::precondition("tree depth", format!("M = {depth} not in 1..={MAX_DEPTH}")));
        }
        let dt = horizon / depth as f64;
        Ok(Self {
            depth,
            horizon,
            dt,
            sqrt_dt: dt.sqrt(),
        })
    }

    pub fn leaves(&self) -> usize {
        1 << self.depth
    }

    pub fn nodes_at(&self, level: usize) -> usize {
        1 << level
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    pub fn prob(&self, level: usize) -> f64 {
        0.5f64.powi(level as i32)
    }

    /// Heap index `2^k − 1 + p`.
    pub fn node_index(&self, level: usize, p: usize) -> usize {
        (1 << level) - 1 + p
    }

    /// Increment leading into node `(k, p)`, `k ≥ 1`.
    pub fn increment(&self, p: usize) -> f64 {
        if p & 1 == 1 {
            self.sqrt_dt
        } else {
            -self.sqrt_dt
        }
    }

    /// `W(t_k)` along the path `p`.
    pub fn brownian(&self, level: usize, p: usize) -> f64 {
        (2.0 * p.count_ones() as f64 - level as f64) * self.sqrt_dt
    }

    /// Sign bitstring of the path, first increment first (`1` is `+√Δt`).
    pub fn path_bits(&self, level: usize, p: usize) -> String {
        (0..level).rev().map(|b| if p >> b & 1 == 1 { '1' } else { '0' }).collect()
    }

    /// Ancestor of `(k, p)` at level `j ≤ k`.
    pub fn ancestor(&self, level: usize, p: usize, j: usize) -> usize {
        p >> (level - j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_have_exact_moments() {
        let t = ScenarioTree::new(1.5, 6).unwrap();
        for k in 0..6 {
            let mut total = 0.0;
            for p in 0..t.nodes_at(k) {
                total += t.prob(k);
                let (a, b) = (t.increment(2 * p), t.increment(2 * p + 1));
                assert_eq!(0.5 * (a + b), 0.0);
                assert!((0.5 * (a * a + b * b) - t.dt).abs() < 1e-15);
            }
            assert_eq!(total, 1.0);
        }
    }

    #[test]
    fn indexing_and_paths() {
        let t = ScenarioTree::new(1.0, 3).unwrap();
        assert_eq!(t.node_index(0, 0), 0);
        assert_eq!(t.node_index(2, 3), 6);
        assert_eq!(t.path_bits(3, 0b110), "110");
        assert_eq!(t.ancestor(3, 0b110, 1), 1);
        let w = t.brownian(3, 0b110);
        assert!((w - t.sqrt_dt).abs() < 1e-15);
        assert_eq!(t.leaves(), 8);
        assert!(ScenarioTree::new(0.0, 3).is_err());
        assert!(ScenarioTree::new(1.0, 0).is_err());
    }

    #[test]
    fn brownian_is_sum_of_increments() {
        let t = ScenarioTree::new(2.0, 5).unwrap();
        for p in 0..t.leaves() {
            let mut w = 0.0;
            for k in 1..=5 {
                w += t.increment(t.ancestor(5, p, k));
            }
            assert!((w - t.brownian(5, p)).abs() < 1e-14);
        }
    }
}
