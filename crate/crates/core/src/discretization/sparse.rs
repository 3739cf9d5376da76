use rayon::prelude::*;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Rows above which products are split across threads.
const PAR_ROWS: usize = 4096;

impl Csr {
    /// Builds from `(row, col, value)` triplets; duplicates are summed, exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                indices.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] != 0.0).collect();
        let indices: Vec<usize> = keep.iter().map(|&k| indices[k]).collect();
        let rows: Vec<usize> = keep.iter().map(|&k| row_of[k]).collect();
        let values: Vec<f64> = keep.iter().map(|&k| values[k]).collect();
        for &r in &rows {
            indptr[r + 1] += 1;
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().zip(&self.values[a..b]).map(|(&c, v)| v * x[c]).sum()
    }

    /// `out += alpha · A x`.
    pub fn mul_add(&self, alpha: f64, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(out.len(), self.nrows);
        if self.nrows >= PAR_ROWS {
            out.par_iter_mut().enumerate().for_each(|(r, o)| *o += alpha * self.row_dot(r, x));
        } else {
            for (r, o) in out.iter_mut().enumerate() {
                *o += alpha * self.row_dot(r, x);
            }
        }
    }

    /// `out += alpha · Aᵀ x`.
    pub fn tr_mul_add(&self, alpha: f64, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(out.len(), self.ncols);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                out[self.indices[k]] += alpha * self.values[k] * xr;
            }
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                m[(r, self.indices[k])] += self.values[k];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_summed_and_zeros_dropped() {
        let m = Csr::from_triplets(
            2,
            3,
            vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 0.0), (1, 2, -1.0), (0, 0, 1.0), (0, 0, -1.0)],
        );
        assert_eq!(m.nnz(), 2);
        let d = m.to_dense();
        assert_eq!(d[(0, 1)], 3.0);
        assert_eq!(d[(1, 2)], -1.0);
    }

    proptest! {
        #[test]
        fn products_match_dense(
            trip in prop::collection::vec((0usize..7, 0usize..5, -2.0f64..2.0), 0..40),
            x in prop::collection::vec(-1.0f64..1.0, 5),
            y in prop::collection::vec(-1.0f64..1.0, 7),
        ) {
            let m = Csr::from_triplets(7, 5, trip);
            let d = m.to_dense();
            let mut out = vec![0.5; 7];
            m.mul_add(2.0, &x, &mut out);
            let want = d.clone() * nalgebra::DVector::from_column_slice(&x) * 2.0;
            for r in 0..7 {
                prop_assert!((out[r] - 0.5 - want[r]).abs() < 1e-12);
            }
            let mut out_t = vec![0.0; 5];
            m.tr_mul_add(1.0, &y, &mut out_t);
            let want_t = d.transpose() * nalgebra::DVector::from_column_slice(&y);
            for c in 0..5 {
                prop_assert!((out_t[c] - want_t[c]).abs() < 1e-12);
            }
        }
    }
}
