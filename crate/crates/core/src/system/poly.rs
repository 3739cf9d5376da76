//! Multivariate polynomials stored in total-degree (graded lexicographic) order.
//!
//! For two variables and degree 2 the coefficient layout is
//! `[1, x1, x2, x1², x1·x2, x2²]`; for one variable `[1, x, x²]`.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Exponent tuples of all monomials in `dim` variables with total degree ≤ `degree`.
pub fn monomials(dim: usize, degree: usize) -> Vec<Vec<u8>> {
    fn with_sum(dim: usize, sum: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if dim == 1 {
            prefix.push(sum as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=sum).rev() {
            prefix.push(first as u8);
            with_sum(dim - 1, sum - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=degree {
        with_sum(dim, d, &mut Vec::new(), &mut out);
    }
    out
}

/// Number of monomials of total degree ≤ `degree` in `dim` variables.
pub fn monomial_count(dim: usize, degree: usize) -> usize {
    // binomial(dim + degree, degree)
    (1..=degree).fold(1usize, |acc, k| acc * (dim + k) / k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    dim: usize,
    degree: usize,
    exps: Vec<Vec<u8>>,
    coeffs: Vec<f64>,
}

impl Poly {
    /// Builds a polynomial from total-degree ordered coefficients.
    pub fn new(dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("polynomial dimension must be positive".into()));
        }
        let degree = (0..=16).find(|&d| monomial_count(dim, d) == coeffs.len()).ok_or_else(|| {
            Error::Config(format!(
                "coefficient list of length {} is not a full total-degree block in {dim} variables",
                coeffs.len()
            ))
        })?;
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Config(format!("non-finite polynomial coefficient {c}")));
        }
        Ok(Self {
            dim,
            degree,
            exps: monomials(dim, degree),
            coeffs,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, vec![c]).expect("constant polynomial")
    }

    /// `c0 + Σ g_i x_i`
    pub fn linear(c0: f64, grad: &[f64]) -> Self {
        let mut coeffs = vec![c0];
        coeffs.extend_from_slice(grad);
        Self::new(grad.len(), coeffs).expect("linear polynomial")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Storage degree (length of the coefficient block), not the trimmed degree.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Degree after ignoring trailing zero coefficients.
    pub fn effective_degree(&self) -> usize {
        self.exps
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(e, _)| e.iter().map(|&p| p as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.effective_degree() == 0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for (e, &c) in self.exps.iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            let mut term = c;
            for (xi, &p) in x.iter().zip(e) {
                if p > 0 {
                    term *= xi.powi(p as i32);
                }
            }
            acc += term;
        }
        acc
    }

    fn index_of(&self, e: &[u8]) -> Option<usize> {
        self.exps.iter().position(|f| f.as_slice() == e)
    }

    /// Coefficient block widened (zero-padded) to `degree`.
    fn widened(&self, degree: usize) -> Self {
        if degree <= self.degree {
            return self.clone();
        }
        let exps = monomials(self.dim, degree);
        let coeffs = exps.iter().map(|e| self.index_of(e).map_or(0.0, |k| self.coeffs[k])).collect();
        Self {
            dim: self.dim,
            degree,
            exps,
            coeffs,
        }
    }

    /// Partial derivative with respect to variable `j`.
    pub fn partial(&self, j: usize) -> Self {
        let degree = self.degree.saturating_sub(1);
        let exps = monomials(self.dim, degree);
        let mut coeffs = vec![0.0; exps.len()];
        for (e, &c) in self.exps.iter().zip(&self.coeffs) {
            if e[j] == 0 || c == 0.0 {
                continue;
            }
            let mut lowered = e.clone();
            lowered[j] -= 1;
            let k = exps.iter().position(|f| *f == lowered).expect("monomial");
            coeffs[k] += c * e[j] as f64;
        }
        Self {
            dim: self.dim,
            degree,
            exps,
            coeffs,
        }
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.dim).map(|j| self.partial(j)).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let degree = self.degree.max(other.degree);
        let mut out = self.widened(degree);
        let b = other.widened(degree);
        for (c, d) in out.coeffs.iter_mut().zip(&b.coeffs) {
            *c += d;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let degree = self.degree + other.degree;
        let exps = monomials(self.dim, degree);
        let mut coeffs = vec![0.0; exps.len()];
        for (ea, &ca) in self.exps.iter().zip(&self.coeffs) {
            if ca == 0.0 {
                continue;
            }
            for (eb, &cb) in other.exps.iter().zip(&other.coeffs) {
                if cb == 0.0 {
                    continue;
                }
                let e: Vec<u8> = ea.iter().zip(eb).map(|(p, q)| p + q).collect();
                let k = exps.iter().position(|f| *f == e).expect("monomial");
                coeffs[k] += ca * cb;
            }
        }
        Self {
            dim: self.dim,
            degree,
            exps,
            coeffs,
        }
    }

    /// Upper bound of `|p(x)|` over the box `[lo, hi]`.
    pub fn abs_bound_on_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| {
                c.abs()
                    * e.iter()
                        .enumerate()
                        .map(|(i, &p)| lo[i].abs().max(hi[i].abs()).powi(p as i32))
                        .product::<f64>()
            })
            .sum()
    }

    /// Exact `(min, max)` over the closed box for polynomials of effective degree ≤ 2
    /// in one or two variables.
    ///
    /// Candidates are the vertices, the critical points of the restriction to each
    /// edge and the interior critical point.
    pub fn extremes_on_box(&self, lo: &[f64], hi: &[f64]) -> Result<(f64, f64)> {
        if self.effective_degree() > 2 || self.dim > 2 {
            return Err(Error::Config(
                "exact extremes are only available for degree ≤ 2 in at most two variables".into(),
            ));
        }
        let p = self.widened(2);
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        let c = |e: &[u8]| p.index_of(e).map_or(0.0, |k| p.coeffs[k]);
        match self.dim {
            1 => {
                candidates.push(vec![lo[0]]);
                candidates.push(vec![hi[0]]);
                let (b, a) = (c(&[1]), c(&[2]));
                if a != 0.0 {
                    let x = -b / (2.0 * a);
                    if x > lo[0] && x < hi[0] {
                        candidates.push(vec![x]);
                    }
                }
            }
            _ => {
                for &x1 in &[lo[0], hi[0]] {
                    for &x2 in &[lo[1], hi[1]] {
                        candidates.push(vec![x1, x2]);
                    }
                }
                // p = c0 + b1 x1 + b2 x2 + a11 x1² + a12 x1 x2 + a22 x2²
                let (b1, b2) = (c(&[1, 0]), c(&[0, 1]));
                let (a11, a12, a22) = (c(&[2, 0]), c(&[1, 1]), c(&[0, 2]));
                // edges with x2 fixed: d/dx1 = b1 + 2 a11 x1 + a12 x2
                for &x2 in &[lo[1], hi[1]] {
                    if a11 != 0.0 {
                        let x1 = -(b1 + a12 * x2) / (2.0 * a11);
                        if x1 > lo[0] && x1 < hi[0] {
                            candidates.push(vec![x1, x2]);
                        }
                    }
                }
                for &x1 in &[lo[0], hi[0]] {
                    if a22 != 0.0 {
                        let x2 = -(b2 + a12 * x1) / (2.0 * a22);
                        if x2 > lo[1] && x2 < hi[1] {
                            candidates.push(vec![x1, x2]);
                        }
                    }
                }
                let det = 4.0 * a11 * a22 - a12 * a12;
                if det != 0.0 {
                    let x1 = (-2.0 * a22 * b1 + a12 * b2) / det;
                    let x2 = (-2.0 * a11 * b2 + a12 * b1) / det;
                    if x1 > lo[0] && x1 < hi[0] && x2 > lo[1] && x2 < hi[1] {
                        candidates.push(vec![x1, x2]);
                    }
                }
            }
        }
        let values: Vec<f64> = candidates.iter().map(|x| self.eval(x)).collect();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok((min, max))
    }
}

/// Rectangular matrix of polynomials (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Poly>,
}

impl PolyMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Poly>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dim("polynomial matrix entries", rows * cols, entries.len()));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(dim: usize, n: usize) -> Self {
        Self::from_constant(dim, &DMatrix::zeros(n, n))
    }

    pub fn from_constant(dim: usize, m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push(Poly::constant(dim, m[(i, j)]));
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Poly] {
        &self.entries
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).eval(x))
    }

    pub fn partial(&self, j: usize) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.partial(j)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn mul_poly(&self, p: &Poly) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.mul(p)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Poly::is_zero)
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(Poly::is_constant)
    }

    pub fn max_effective_degree(&self) -> usize {
        self.entries.iter().map(Poly::effective_degree).max().unwrap_or(0)
    }

    /// Upper bound of the Frobenius norm over the box.
    pub fn frobenius_bound_on_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.entries.iter().map(|p| p.abs_bound_on_box(lo, hi).powi(2)).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_total_degree() {
        assert_eq!(
            monomials(2, 2),
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(monomial_count(2, 3), 10);
        assert_eq!(monomial_count(1, 2), 3);
    }

    #[test]
    fn eval_and_gradient() {
        // 1 + 2x1 - x2 + 3x1² + x1x2 - 2x2²
        let p = Poly::new(2, vec![1.0, 2.0, -1.0, 3.0, 1.0, -2.0]).unwrap();
        let x = [0.5, -1.5];
        let expect = 1.0 + 1.0 + 1.5 + 0.75 - 0.75 - 4.5;
        assert!((p.eval(&x) - expect).abs() < 1e-14);
        let g = p.gradient();
        let fd = |j: usize| {
            let mut xp = x;
            let mut xm = x;
            xp[j] += 1e-6;
            xm[j] -= 1e-6;
            (p.eval(&xp) - p.eval(&xm)) / 2e-6
        };
        for (j, gj) in g.iter().enumerate() {
            assert!((gj.eval(&x) - fd(j)).abs() < 1e-6);
        }
    }

    #[test]
    fn product_degree_three() {
        let a = Poly::new(1, vec![1.0, 0.0, 1.0]).unwrap(); // 1 + x²
        let b = Poly::linear(0.0, &[2.0]); // 2x
        let ab = a.mul(&b);
        assert_eq!(ab.degree(), 3);
        assert!((ab.eval(&[1.5]) - (1.0 + 2.25) * 3.0).abs() < 1e-14);
    }

    #[test]
    fn bad_length_rejected() {
        assert!(Poly::new(2, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn extremes_of_linear_on_square() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let eta = Poly::linear(0.0, &[-s, -s]);
        let (lo, hi) = eta.extremes_on_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((hi - 0.0).abs() < 1e-15);
        assert!((lo + 2.0 * s).abs() < 1e-15);
    }

    #[test]
    fn extremes_of_quadratic_match_dense_scan() {
        let p = Poly::new(2, vec![0.1, -0.4, 0.3, 0.9, -0.5, 0.7]).unwrap();
        let (lo, hi) = p.extremes_on_box(&[-1.0, -0.5], &[1.0, 1.5]).unwrap();
        let mut smin = f64::INFINITY;
        let mut smax = f64::NEG_INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let x = [-1.0 + 2.0 * i as f64 / 400.0, -0.5 + 2.0 * j as f64 / 400.0];
                let v = p.eval(&x);
                smin = smin.min(v);
                smax = smax.max(v);
            }
        }
        assert!(lo <= smin + 1e-12 && smin - lo < 1e-4);
        assert!(hi >= smax - 1e-12 && hi - smax < 1e-4);
    }
}
