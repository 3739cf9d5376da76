use log::warn;
use nalgebra::DMatrix;

use super::domain::{Domain, Face};
use super::poly::PolyMatrix;
use crate::linalg::asymmetry;
use crate::{Error, Result};

/// Threshold above which an `A_i` is considered asymmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Highest polynomial degree accepted for coefficient entries.
pub const MAX_COEFF_DEGREE: usize = 2;

/// Matrix field `B(t, x) = base(x) + t · t_rate(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefField {
    pub base: PolyMatrix,
    pub t_rate: Option<PolyMatrix>,
}

impl CoefField {
    pub fn zeros(dim: usize, n: usize) -> Self {
        Self {
            base: PolyMatrix::zeros(dim, n),
            t_rate: None,
        }
    }

    pub fn constant(dim: usize, m: &DMatrix<f64>) -> Self {
        Self {
            base: PolyMatrix::from_constant(dim, m),
            t_rate: None,
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.base.eval(x);
        if let Some(rate) = &self.t_rate {
            m += rate.eval(x) * t;
        }
        m
    }

    /// True when the field vanishes for every `(t, x)`.
    pub fn is_zero(&self) -> bool {
        self.base.is_zero() && self.t_rate.as_ref().is_none_or(PolyMatrix::is_zero)
    }
}

/// Stochastic symmetric hyperbolic system
/// `dy + Σ A_i y_{x_i} dt = (B1 y + B3 v) dt + (B2 y + v) dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub label: String,
    pub state_dim: usize,
    pub domain: Domain,
    pub a: Vec<PolyMatrix>,
    pub b1: CoefField,
    pub b2: CoefField,
    pub b3: CoefField,
}

/// Coefficient matrices materialized at one `(t, x)`.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub a: Vec<DMatrix<f64>>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub b3: DMatrix<f64>,
}

impl SystemSpec {
    /// Checks dimensions and degrees; symmetry is checked by [`SystemSpec::validate`].
    pub fn new(label: impl Into<String>, domain: Domain, a: Vec<PolyMatrix>, b1: CoefField, b2: CoefField, b3: CoefField) -> Result<Self> {
        let n = domain.dim();
        if a.len() != n {
            return Err(Error::dim("A matrices (one per space dimension)", n, a.len()));
        }
        let state_dim = a[0].rows();
        if state_dim == 0 {
            return Err(Error::Config("state_dim must be positive".into()));
        }
        let fields = a
            .iter()
            .chain([&b1.base, &b2.base, &b3.base])
            .chain([&b1.t_rate, &b2.t_rate, &b3.t_rate].into_iter().flatten());
        for m in fields {
            if m.rows() != state_dim || m.cols() != state_dim {
                return Err(Error::dim("coefficient matrix size", state_dim, m.rows().max(m.cols())));
            }
            for p in m.entries() {
                if p.dim() != n {
                    return Err(Error::dim("polynomial variables", n, p.dim()));
                }
                if p.effective_degree() > MAX_COEFF_DEGREE {
                    return Err(Error::Config(format!(
                        "coefficient polynomial of degree {} exceeds the maximum {MAX_COEFF_DEGREE}",
                        p.effective_degree()
                    )));
                }
            }
        }
        Ok(Self {
            label: label.into(),
            state_dim,
            domain,
            a,
            b1,
            b2,
            b3,
        })
    }

    pub fn space_dim(&self) -> usize {
        self.domain.dim()
    }

    /// Points at which structural invariants are sampled: a 9ⁿ lattice.
    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        self.domain.lattice(9)
    }

    /// Checks that every `A_i` is symmetric at all sample points.
    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.a.iter().enumerate() {
            for x in self.sample_points() {
                let asym = asymmetry(&a.eval(&x));
                if asym > SYMMETRY_TOL {
                    return Err(Error::invariant(
                        "A_i symmetry",
                        format!("A_{} has asymmetry {asym:.3e} at x = {x:?}", i + 1),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `A_i(x)` without domain check or symmetrization.
    pub fn a_raw(&self, i: usize, x: &[f64]) -> DMatrix<f64> {
        self.a[i].eval(x)
    }

    /// All `A_i(x)`, symmetrized; callable outside the domain (ray integration).
    pub fn a_at(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.a.iter().map(|a| symmetrized(a.eval(x))).collect()
    }

    /// Materializes `A_1..A_n, B1, B2, B3` at `(t, x)`.
    ///
    /// Asymmetric `A_i` are replaced by `(A + Aᵀ)/2` with a warning.
    pub fn evaluate_coefficients(&self, x: &[f64], t: f64) -> Result<Coefficients> {
        self.domain.check_contains(x)?;
        let a = self
            .a
            .iter()
            .enumerate()
            .map(|(i, field)| {
                let m = field.eval(x);
                let asym = asymmetry(&m);
                if asym > SYMMETRY_TOL {
                    warn!("{}: A_{} asymmetric by {asym:.3e} at {x:?}; symmetrizing", self.label, i + 1);
                }
                symmetrized(m)
            })
            .collect();
        Ok(Coefficients {
            a,
            b1: self.b1.eval(t, x),
            b2: self.b2.eval(t, x),
            b3: self.b3.eval(t, x),
        })
    }

    /// `Σ ϖ_i A_i(x)` (the principal symbol in direction `ϖ`).
    pub fn symbol(&self, x: &[f64], dir: &[f64]) -> DMatrix<f64> {
        let n = self.state_dim;
        let mut m = DMatrix::zeros(n, n);
        for (a, w) in self.a_at(x).iter().zip(dir) {
            m += a * *w;
        }
        m
    }

    /// `Σ_i ∂_{x_i} A_i(x)`.
    pub fn divergence(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.state_dim;
        let mut m = DMatrix::zeros(n, n);
        for (i, a) in self.a.iter().enumerate() {
            m += symmetrized(a.partial(i).eval(x));
        }
        m
    }

    /// Boundary flux matrix `Σ ν_i(x) A_i(x)` at a non-corner boundary point.
    pub fn boundary_flux_matrix(&self, x: &[f64]) -> Result<(Face, DMatrix<f64>)> {
        let face = self.domain.face_of(x)?;
        Ok((face, self.face_flux_matrix(face, x)))
    }

    /// `Σ ν_i A_i(x)` for a known face.
    pub fn face_flux_matrix(&self, face: Face, x: &[f64]) -> DMatrix<f64> {
        let nu = face.normal(self.space_dim());
        self.symbol(x, &nu)
    }

    pub fn a_is_constant(&self) -> bool {
        self.a.iter().all(PolyMatrix::is_constant)
    }
}

pub(crate) fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::registry;

    #[test]
    fn zero_field_is_zero_matrix() {
        let f = CoefField::zeros(1, 3);
        assert!(f.is_zero());
        assert_eq!(f.eval(0.3, &[0.2]), DMatrix::zeros(3, 3));
    }

    #[test]
    fn outside_domain_is_rejected() {
        let s = registry::scalar_transport(&[1.0]);
        assert!(matches!(s.evaluate_coefficients(&[1.5], 0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn corner_flux_matrix_rejected() {
        let s = registry::shallow_water(2.0, 0.0, 10.0, 0.1);
        assert!(s.boundary_flux_matrix(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn asymmetric_field_is_symmetrized() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let spec = SystemSpec::new(
            "asym",
            Domain::unit(1),
            vec![PolyMatrix::from_constant(1, &a)],
            CoefField::zeros(1, 2),
            CoefField::zeros(1, 2),
            CoefField::zeros(1, 2),
        )
        .unwrap();
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("A_i symmetry"));
        let c = spec.evaluate_coefficients(&[0.5], 0.0).unwrap();
        assert_eq!(c.a[0][(0, 1)], 0.25);
        assert_eq!(c.a[0][(1, 0)], 0.25);
    }
}
