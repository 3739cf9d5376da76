//! Bundled example systems.

use nalgebra::DMatrix;

use super::domain::Domain;
use super::poly::{Poly, PolyMatrix};
use super::spec::{symmetrized, CoefField, SystemSpec};
use crate::linalg::sym_eigen_desc;
use crate::{Error, Result};

pub const LABELS: [&str; 6] = [
    "scalar-transport",
    "sir-age",
    "traffic-free",
    "shallow-water-torrential",
    "shallow-water-subcritical",
    "gas-supersonic",
];

pub fn by_label(label: &str) -> Result<SystemSpec> {
    Ok(match label {
        "scalar-transport" => scalar_transport(&[1.0]),
        "sir-age" => sir_age(),
        "traffic-free" => traffic_free(1.0, 2.0, 1.0, 0.5, -1.0),
        "shallow-water-torrential" => shallow_water(2.0, 0.0, 10.0, 0.1),
        "shallow-water-subcritical" => shallow_water(0.5, 0.0, 10.0, 0.1),
        "gas-supersonic" => gas(1.0, 1.0, [2.0, 0.0]),
        other => return Err(Error::Config(format!("unknown system `{other}`; known: {}", LABELS.join(", ")))),
    })
}

pub fn all() -> Vec<SystemSpec> {
    LABELS.iter().map(|l| by_label(l).expect("registry label")).collect()
}

fn constant_spec(label: &str, domain: Domain, a: &[DMatrix<f64>], b1: CoefField, b2: CoefField) -> SystemSpec {
    let dim = domain.dim();
    let n = a[0].nrows();
    let a = a.iter().map(|m| PolyMatrix::from_constant(dim, m)).collect();
    SystemSpec::new(label, domain, a, b1, b2, CoefField::zeros(dim, n)).expect("registry spec is well formed")
}

/// `dy + Σ O_i y_{x_i} dt = 0` on the unit interval or square, `O` = `speed`.
pub fn scalar_transport(speed: &[f64]) -> SystemSpec {
    let dim = speed.len();
    let a: Vec<_> = speed.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect();
    constant_spec(
        "scalar-transport",
        Domain::unit(dim),
        &a,
        CoefField::zeros(dim, 1),
        CoefField::zeros(dim, 1),
    )
}

/// Age-structured SIR model linearized at the disease-free state.
///
/// Ageing is `A = I₃` on ages `[0, 1]`; transmission grows linearly with age.
/// Multiplicative noise `0.1·y dW` stands in for the additive perturbations.
pub fn sir_age() -> SystemSpec {
    let (mu_s, mu_i, mu_r, gamma) = (0.1, 0.1, 0.1, 0.3);
    let c = |v: f64| Poly::constant(1, v);
    // β(x) = 0.4 + 0.2 x
    let beta = Poly::linear(0.4, &[0.2]);
    let entries = vec![
        c(-mu_s),
        beta.scale(-1.0),
        c(0.0),
        c(0.0),
        beta.add(&c(-(gamma + mu_i))),
        c(0.0),
        c(0.0),
        c(gamma),
        c(-mu_r),
    ];
    let b1 = CoefField {
        base: PolyMatrix::new(3, 3, entries).expect("3x3"),
        t_rate: None,
    };
    let b2 = CoefField::constant(1, &(DMatrix::identity(3, 3) * 0.1));
    constant_spec("sir-age", Domain::unit(1), &[DMatrix::identity(3, 3)], b1, b2)
}

/// `A₀^{1/2}` for a symmetric positive definite `A₀`, and its inverse.
fn spd_sqrt(a0: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (vals, vecs) = sym_eigen_desc(a0).expect("2x2 eigen");
    let n = a0.nrows();
    let mut s = DMatrix::zeros(n, n);
    let mut si = DMatrix::zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        let r = vecs.column(k);
        let outer = r * r.transpose();
        s += &outer * l.sqrt();
        si += outer / l.sqrt();
    }
    (s, si)
}

/// Linearized Aw–Rascle–Zhang traffic in free flow, symmetrized with
/// `A₀ = [[P', 1], [1, 2/P']]` so the state is `A₀^{1/2}(ρ, v)`.
pub fn traffic_free(rho0: f64, v0: f64, p_prime: f64, sigma: f64, v_prime: f64) -> SystemSpec {
    let a1 = DMatrix::from_row_slice(2, 2, &[v0, rho0, 0.0, v0 - rho0 * p_prime]);
    let b1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, v_prime, -1.0]) * sigma;
    let a0 = DMatrix::from_row_slice(2, 2, &[p_prime, 1.0, 1.0, 2.0 / p_prime]);
    let (s, si) = spd_sqrt(&a0);
    let a1t = symmetrized(&s * a1 * &si);
    let b1t = &s * b1 * &si;
    // reaction time fluctuates: noise enters through the relaxation term
    let b2t = &b1t * 0.2;
    constant_spec(
        "traffic-free",
        Domain::unit(1),
        &[a1t],
        CoefField::constant(1, &b1t),
        CoefField::constant(1, &b2t),
    )
}

/// Linearized 2-D shallow water around `(H₀, U₀, V₀)` on the unit square.
pub fn shallow_water(u0: f64, v0: f64, g: f64, h0: f64) -> SystemSpec {
    let c = (g * h0).sqrt();
    let a1 = DMatrix::from_row_slice(3, 3, &[u0, c, 0.0, c, u0, 0.0, 0.0, 0.0, u0]);
    let a2 = DMatrix::from_row_slice(3, 3, &[v0, 0.0, c, 0.0, v0, 0.0, c, 0.0, v0]);
    let label = if u0 * u0 + v0 * v0 > g * h0 {
        "shallow-water-torrential"
    } else {
        "shallow-water-subcritical"
    };
    constant_spec(
        label,
        Domain::unit(2),
        &[a1, a2],
        CoefField::constant(2, &(DMatrix::identity(3, 3) * -0.05)),
        CoefField::constant(2, &(DMatrix::identity(3, 3) * 0.1)),
    )
}

/// Symmetrized linearized Euler equations of a 2-D ideal gas; state
/// `(p, u₁, u₂, s)`, `N = 4`.
pub fn gas(rho0: f64, sound: f64, u0: [f64; 2]) -> SystemSpec {
    let n = 2;
    let a: Vec<_> = (0..n)
        .map(|i| {
            let mut m = DMatrix::zeros(n + 2, n + 2);
            m[(0, 0)] = u0[i] / (rho0 * sound * sound);
            m[(0, 1 + i)] = 1.0;
            m[(1 + i, 0)] = 1.0;
            for j in 0..n {
                m[(1 + j, 1 + j)] = rho0 * u0[i];
            }
            m[(n + 1, n + 1)] = u0[i];
            m
        })
        .collect();
    constant_spec(
        "gas-supersonic",
        Domain::unit(2),
        &a,
        CoefField::zeros(2, n + 2),
        CoefField::constant(2, &(DMatrix::identity(n + 2, n + 2) * 0.05)),
    )
}
