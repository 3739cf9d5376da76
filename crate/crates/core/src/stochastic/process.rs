use super::tree::ScenarioTree;
use crate::{Error, Result};

/// Vector-valued process on the tree: one `width`-vector per node of levels
/// `first_level..=last_level`, stored level by level in path order.
///
/// A value attached to node `(k, p)` depends only on that node's path prefix, so
/// adaptedness holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    pub first_level: usize,
    pub last_level: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl AdaptedProcess {
    pub fn zeros(first_level: usize, last_level: usize, width: usize) -> Self {
        let nodes = (1usize << (last_level + 1)) - (1usize << first_level);
        Self {
            first_level,
            last_level,
            width,
            data: vec![0.0; nodes * width],
        }
    }

    /// Single-level process, e.g. a leaf-indexed terminal datum.
    pub fn level_only(level: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != (1 << level) * width {
            return Err(Error::dim("level data", (1 << level) * width, data.len()));
        }
        Ok(Self {
            first_level: level,
            last_level: level,
            width,
            data,
        })
    }

    /// Fills every node with `f(level, p)`.
    pub fn from_fn(first_level: usize, last_level: usize, width: usize, f: impl Fn(usize, usize) -> Vec<f64>) -> Result<Self> {
        let mut out = Self::zeros(first_level, last_level, width);
        for k in first_level..=last_level {
            for p in 0..1 << k {
                let v = f(k, p);
                if v.len() != width {
                    return Err(Error::dim("node value", width, v.len()));
                }
                out.node_mut(k, p).copy_from_slice(&v);
            }
        }
        Ok(out)
    }

    pub fn check_shape(&self, first_level: usize, last_level: usize, width: usize, what: &'static str) -> Result<()> {
        if (self.first_level, self.last_level) != (first_level, last_level) {
            return Err(Error::dim(
                what,
                last_level - first_level + 1,
                self.last_level + 1 - self.first_level,
            ));
        }
        if self.width != width {
            return Err(Error::dim(what, width, self.width));
        }
        Ok(())
    }

    fn offset(&self, level: usize) -> usize {
        ((1usize << level) - (1usize << self.first_level)) * self.width
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let o = self.offset(k);
        &self.data[o..o + (1 << k) * self.width]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let o = self.offset(k);
        let len = (1 << k) * self.width;
        &mut self.data[o..o + len]
    }

    /// Level `k` read-only and level `k + 1` writable.
    pub(crate) fn split_levels_mut(&mut self, k: usize) -> (&[f64], &mut [f64]) {
        let (o, len) = (self.offset(k), (1usize << k) * self.width);
        let (head, tail) = self.data.split_at_mut(o + len);
        (&head[o..], &mut tail[..2 * len])
    }

    /// Level `k + 1` read-only and level `k` writable.
    pub(crate) fn split_levels_rev_mut(&mut self, k: usize) -> (&mut [f64], &[f64]) {
        let (o, len) = (self.offset(k), (1usize << k) * self.width);
        let (head, tail) = self.data.split_at_mut(o + len);
        (&mut head[o..], &tail[..2 * len])
    }

    pub fn node(&self, k: usize, p: usize) -> &[f64] {
        let o = self.offset(k) + p * self.width;
        &self.data[o..o + self.width]
    }

    pub fn node_mut(&mut self, k: usize, p: usize) -> &mut [f64] {
        let o = self.offset(k) + p * self.width;
        &mut self.data[o..o + self.width]
    }

    /// Probability-weighted mean over level `k`.
    pub fn level_mean(&self, k: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.width];
        let w = 0.5f64.powi(k as i32);
        for chunk in self.level(k).chunks(self.width) {
            for (a, b) in m.iter_mut().zip(chunk) {
                *a += w * b;
            }
        }
        m
    }

    /// `Σ_k Σ_p 2^{−k} weight(k) ⟨a, b⟩` over all stored levels.
    pub fn inner(&self, other: &Self, weight: impl Fn(usize) -> f64) -> f64 {
        assert_eq!(
            (self.first_level, self.last_level, self.width),
            (other.first_level, other.last_level, other.width)
        );
        (self.first_level..=self.last_level)
            .map(|k| {
                let s: f64 = self.level(k).iter().zip(other.level(k)).map(|(a, b)| a * b).sum();
                s * 0.5f64.powi(k as i32) * weight(k)
            })
            .sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        assert_eq!(self.data.len(), x.data.len());
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Leaf-level dump rows `(level, path bits, slot, value)`.
    pub fn rows<'a>(&'a self, tree: &'a ScenarioTree) -> impl Iterator<Item = (usize, String, usize, f64)> + 'a {
        (self.first_level..=self.last_level).flat_map(move |k| {
            (0..1usize << k).flat_map(move |p| {
                let bits = tree.path_bits(k, p);
                self.node(k, p).iter().enumerate().map(move |(i, &v)| (k, bits.clone(), i, v))
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_means() {
        let mut a = AdaptedProcess::zeros(0, 2, 2);
        assert_eq!(a.data.len(), 7 * 2);
        a.node_mut(2, 3).copy_from_slice(&[4.0, 8.0]);
        assert_eq!(a.level(2)[6..], [4.0, 8.0]);
        assert_eq!(a.level_mean(2), vec![1.0, 2.0]);
        let b = AdaptedProcess::from_fn(1, 2, 1, |k, p| vec![(k * 10 + p) as f64]).unwrap();
        assert_eq!(b.node(2, 1), &[21.0]);
        let ip = b.inner(&b, |_| 1.0);
        let want = 0.5 * (100.0 + 121.0) + 0.25 * (400.0 + 441.0 + 484.0 + 529.0);
        assert!((ip - want).abs() < 1e-12);
        assert!(AdaptedProcess::level_only(3, 2, vec![0.0; 15]).is_err());
    }
}
