use nalgebra::{DMatrix, DVector};

use crate::linalg::{asymmetry, sym_eigen_desc};
use crate::{Error, Result};

/// Default threshold below which an eigenvalue of the flux matrix counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

/// Characteristic decomposition `Πᵀ M Π = diag(Λ₊, 0, Λ₋)` of a boundary flux matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDecomposition {
    /// Orthogonal; columns are eigenvectors in block order.
    pub pi: DMatrix<f64>,
    pub lambda_plus: Vec<f64>,
    /// Eigenvalues classified as zero, kept for reconstruction checks.
    pub lambda_zero: Vec<f64>,
    pub lambda_minus: Vec<f64>,
    pub n_plus: usize,
    pub n_zero: usize,
    pub n_minus: usize,
}

/// Components of `Π⁻¹ y` split by the sign of their eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicSplit {
    pub plus: Vec<f64>,
    pub zero: Vec<f64>,
    pub minus: Vec<f64>,
}

/// Eigen-decomposes a symmetric `m` and classifies eigenvalues by sign.
///
/// Blocks come out sorted descending, so the order is positive, zero, negative.
pub fn boundary_decomposition(m: &DMatrix<f64>, zero_tol: f64) -> Result<BoundaryDecomposition> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim("flux matrix columns", m.nrows(), m.ncols()));
    }
    let asym = asymmetry(m);
    if asym > 1e-12 * (1.0 + m.amax()) {
        return Err(Error::precondition("symmetric flux matrix", format!("asymmetry {asym:.3e}")));
    }
    let (values, pi) = sym_eigen_desc(m)?;
    let mut dec = BoundaryDecomposition {
        pi,
        lambda_plus: Vec::new(),
        lambda_zero: Vec::new(),
        lambda_minus: Vec::new(),
        n_plus: 0,
        n_zero: 0,
        n_minus: 0,
    };
    for lam in values {
        if lam.abs() <= zero_tol {
            dec.lambda_zero.push(lam);
        } else if lam > 0.0 {
            dec.lambda_plus.push(lam);
        } else {
            dec.lambda_minus.push(lam);
        }
    }
    dec.n_plus = dec.lambda_plus.len();
    dec.n_zero = dec.lambda_zero.len();
    dec.n_minus = dec.lambda_minus.len();
    Ok(dec)
}

impl BoundaryDecomposition {
    pub fn dim(&self) -> usize {
        self.pi.nrows()
    }

    /// Eigenvalues in block order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = self.lambda_plus.clone();
        v.extend(&self.lambda_zero);
        v.extend(&self.lambda_minus);
        v
    }

    /// Column indices of `Π` spanning the incoming block.
    pub fn minus_range(&self) -> std::ops::Range<usize> {
        self.n_plus + self.n_zero..self.dim()
    }

    /// `Π diag(Λ) Πᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues()));
        &self.pi * lam * self.pi.transpose()
    }

    /// Max entry of `ΠᵀΠ − I`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim();
        (self.pi.transpose() * &self.pi - DMatrix::identity(n, n)).amax()
    }

    pub fn split_state(&self, y: &[f64]) -> Result<CharacteristicSplit> {
        split_state(y, self)
    }
}

/// `Π⁻¹ y` partitioned by `(n₊, n₀, n₋)`.
pub fn split_state(y: &[f64], dec: &BoundaryDecomposition) -> Result<CharacteristicSplit> {
    let n = dec.dim();
    if y.len() != n {
        return Err(Error::dim("state vector", n, y.len()));
    }
    // Π is orthogonal, so Π⁻¹ = Πᵀ.
    let c = dec.pi.tr_mul(&DVector::from_column_slice(y));
    let c = c.as_slice();
    let (p, z) = (dec.n_plus, dec.n_plus + dec.n_zero);
    Ok(CharacteristicSplit {
        plus: c[..p].to_vec(),
        zero: c[p..z].to_vec(),
        minus: c[z..].to_vec(),
    })
}

/// Inverse of [`split_state`]: `y = Π (plus, zero, minus)`.
pub fn recompose(split: &CharacteristicSplit, dec: &BoundaryDecomposition) -> Result<Vec<f64>> {
    let sizes = (split.plus.len(), split.zero.len(), split.minus.len());
    if sizes != (dec.n_plus, dec.n_zero, dec.n_minus) {
        let got = sizes.0 + sizes.1 + sizes.2;
        return Err(Error::dim("characteristic split blocks", dec.dim(), got));
    }
    let c: Vec<f64> = split.plus.iter().chain(&split.zero).chain(&split.minus).copied().collect();
    Ok((&dec.pi * DVector::from_vec(c)).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn diagonal_blocks() {
        let dec = boundary_decomposition(&diag(&[3.0, 0.0, -1.0]), DEFAULT_ZERO_TOL).unwrap();
        assert_eq!((dec.n_plus, dec.n_zero, dec.n_minus), (1, 1, 1));
        assert_eq!(dec.lambda_plus, vec![3.0]);
        assert_eq!(dec.lambda_minus, vec![-1.0]);
        for v in dec.pi.iter() {
            assert!(v.abs() == 0.0 || (v.abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ordering_within_blocks() {
        let m = diag(&[-2.0, 1.0, -0.5, 4.0, 1e-11]);
        let dec = boundary_decomposition(&m, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(dec.lambda_plus, vec![4.0, 1.0]);
        assert_eq!(dec.lambda_minus, vec![-0.5, -2.0]);
        assert_eq!(dec.n_zero, 1);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(boundary_decomposition(&m, DEFAULT_ZERO_TOL).is_err());
    }

    #[test]
    fn identity_split() {
        let dec = BoundaryDecomposition {
            pi: DMatrix::identity(3, 3),
            lambda_plus: vec![1.0],
            lambda_zero: vec![0.0],
            lambda_minus: vec![-1.0],
            n_plus: 1,
            n_zero: 1,
            n_minus: 1,
        };
        let s = split_state(&[1.0, 2.0, 3.0], &dec).unwrap();
        assert_eq!(s.plus, vec![1.0]);
        assert_eq!(s.zero, vec![2.0]);
        assert_eq!(s.minus, vec![3.0]);
        assert!(split_state(&[1.0, 2.0], &dec).is_err());
    }

    #[test]
    fn scalar_outflow_split() {
        let dec = boundary_decomposition(&diag(&[1.0]), DEFAULT_ZERO_TOL).unwrap();
        let s = split_state(&[5.0], &dec).unwrap();
        assert_eq!(s.plus, vec![5.0]);
        assert!(s.minus.is_empty());
    }

    fn random_symmetric(n: usize, vals: &[f64]) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |i, j| vals[i * n + j]);
        (&m + m.transpose()) * 0.5
    }

    proptest! {
        #[test]
        fn reconstruction_and_orthogonality(
            n in 1usize..6,
            vals in prop::collection::vec(-3.0f64..3.0, 36),
        ) {
            let m = random_symmetric(n, &vals);
            let dec = boundary_decomposition(&m, DEFAULT_ZERO_TOL).unwrap();
            prop_assert_eq!(dec.n_plus + dec.n_zero + dec.n_minus, n);
            prop_assert!(dec.orthogonality_defect() <= 1e-10);
            prop_assert!((dec.reconstruct() - &m).amax() <= 1e-10);
            prop_assert!(dec.lambda_plus.iter().all(|&l| l > 0.0));
            prop_assert!(dec.lambda_minus.iter().all(|&l| l < 0.0));
        }

        #[test]
        fn split_recompose_roundtrip(
            n in 1usize..6,
            vals in prop::collection::vec(-3.0f64..3.0, 36),
            y in prop::collection::vec(-10.0f64..10.0, 6),
        ) {
            let dec = boundary_decomposition(&random_symmetric(n, &vals), DEFAULT_ZERO_TOL).unwrap();
            let y = &y[..n];
            let back = recompose(&dec.split_state(y).unwrap(), &dec).unwrap();
            for (a, b) in back.iter().zip(y) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
