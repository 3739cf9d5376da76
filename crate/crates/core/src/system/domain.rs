use crate::{Error, Result};

/// Tolerance used to decide whether a coordinate lies on a face.
pub const FACE_TOL: f64 = 1e-12;

/// Interval (`n = 1`) or axis-aligned box (`n = 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// One face of the box: the side of `axis` with outward normal `±e_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn normal(&self, dim: usize) -> Vec<f64> {
        let mut nu = vec![0.0; dim];
        nu[self.axis] = if self.upper { 1.0 } else { -1.0 };
        nu
    }

    /// Short name such as `x1-` or `x2+`.
    pub fn name(&self) -> String {
        format!("x{}{}", self.axis + 1, if self.upper { '+' } else { '-' })
    }

    pub fn all(dim: usize) -> Vec<Face> {
        (0..dim)
            .flat_map(|axis| [Face { axis, upper: false }, Face { axis, upper: true }])
            .collect()
    }
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim("domain upper bounds", lo.len(), hi.len()));
        }
        if !(1..=2).contains(&lo.len()) {
            return Err(Error::Config(format!("space_dim must be 1 or 2, got {}", lo.len())));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::Config(format!("empty or non-finite domain side [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim]).expect("unit box")
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(i, &xi)| xi >= self.lo[i] - FACE_TOL && xi <= self.hi[i] + FACE_TOL)
    }

    pub fn check_contains(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain { point: x.to_vec() })
        }
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] }).collect())
            .collect()
    }

    /// The unique face containing `x`; corners (more than one face) are rejected.
    pub fn face_of(&self, x: &[f64]) -> Result<Face> {
        self.check_contains(x)?;
        let mut found = Vec::new();
        for (axis, &xa) in x.iter().enumerate() {
            if (xa - self.lo[axis]).abs() <= FACE_TOL {
                found.push(Face { axis, upper: false });
            }
            if (xa - self.hi[axis]).abs() <= FACE_TOL {
                found.push(Face { axis, upper: true });
            }
        }
        match found.len() {
            1 => Ok(found[0]),
            0 => Err(Error::precondition("boundary point", format!("{x:?} is an interior point"))),
            _ => Err(Error::precondition(
                "boundary point",
                format!("{x:?} is a corner; the normal is ambiguous"),
            )),
        }
    }

    /// Tensor grid with `per_axis` points per axis including the endpoints.
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        assert!(per_axis >= 2);
        let axis_pts = |i: usize| -> Vec<f64> {
            (0..per_axis)
                .map(|k| self.lo[i] + self.width(i) * k as f64 / (per_axis - 1) as f64)
                .collect()
        };
        match self.dim() {
            1 => axis_pts(0).into_iter().map(|x| vec![x]).collect(),
            _ => {
                let (p0, p1) = (axis_pts(0), axis_pts(1));
                p0.iter().flat_map(|&a| p1.iter().map(move |&b| vec![a, b])).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faces_and_corners() {
        let d = Domain::unit(2);
        assert_eq!(d.face_of(&[1.0, 0.3]).unwrap(), Face { axis: 0, upper: true });
        assert_eq!(d.face_of(&[0.4, 0.0]).unwrap(), Face { axis: 1, upper: false });
        assert!(d.face_of(&[1.0, 1.0]).is_err());
        assert!(d.face_of(&[0.5, 0.5]).is_err());
        assert!(d.face_of(&[1.5, 0.5]).is_err());
    }

    #[test]
    fn empty_interval_rejected() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::new(vec![0.0; 3], vec![1.0; 3]).is_err());
    }

    #[test]
    fn lattice_contains_vertices() {
        let d = Domain::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        let pts = d.lattice(5);
        assert_eq!(pts.len(), 25);
        for v in d.vertices() {
            assert!(pts.contains(&v));
        }
    }
}
