use crate::linalg::sym_min_eigenvalue;
use crate::system::{Poly, PolyMatrix, SystemSpec};
use crate::{Error, Result};

/// Lattice points per axis used by [`certify_condition`].
pub const CERT_POINTS_PER_AXIS: usize = 64;

/// Outcome of checking `−⟨(Σ A_i η_{x_i})γ, γ⟩ ≥ c0 |γ|²` on the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    /// Lower bound `min m − L·h`; certified when positive.
    pub c0: f64,
    /// Minimum of `m(x) = λ_min(−Σ A_i η_{x_i})` over the lattice.
    pub min_m: f64,
    /// Lattice-gap margin `L·h`.
    pub margin: f64,
    /// Lattice point attaining `min_m`.
    pub witness: Vec<f64>,
}

impl Certification {
    pub fn certified(&self) -> bool {
        self.c0 > 0.0
    }
}

/// Linear or quadratic weight with its certified decay rate.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightCandidate {
    pub eta: Poly,
    pub grad_eta: Vec<Poly>,
    pub c0: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    /// `α` for weights of the form `η = −α·x`.
    pub direction: Option<Vec<f64>>,
    pub certification: Certification,
}

impl WeightCandidate {
    pub fn certified(&self) -> bool {
        self.certification.certified()
    }

    pub fn eta_at(&self, x: &[f64]) -> f64 {
        self.eta.eval(x)
    }

    pub fn grad_at(&self, x: &[f64]) -> Vec<f64> {
        self.grad_eta.iter().map(|g| g.eval(x)).collect()
    }

    /// Builds the candidate for `η` on `spec`'s domain, certified or not.
    pub fn new(spec: &SystemSpec, eta: Poly) -> Result<Self> {
        let certification = certify_condition(spec, &eta)?;
        let (eta_min, eta_max) = eta.extremes_on_box(spec.domain.lo(), spec.domain.hi())?;
        Ok(Self {
            grad_eta: eta.gradient(),
            c0: certification.c0,
            eta_min,
            eta_max,
            direction: None,
            certification,
            eta,
        })
    }
}

/// `M(x) = −Σ A_i(x) η_{x_i}(x)` as a polynomial matrix.
fn decay_matrix(spec: &SystemSpec, eta: &Poly) -> PolyMatrix {
    let n = spec.state_dim;
    let mut m = PolyMatrix::zeros(spec.space_dim(), n);
    for (i, a) in spec.a.iter().enumerate() {
        m = m.add(&a.mul_poly(&eta.partial(i).scale(-1.0)));
    }
    m
}

fn sym(m: nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Lattice certification of the decay condition for `η`.
///
/// `c0 = min m(x) − L·h` where `h` is half the lattice cell diagonal (the largest
/// distance from a domain point to the lattice) and `L` bounds the Lipschitz
/// constant of `m` through `sup ‖∂_j M‖_F` on the box.
pub fn certify_condition(spec: &SystemSpec, eta: &Poly) -> Result<Certification> {
    if eta.dim() != spec.space_dim() {
        return Err(Error::dim("weight variables", spec.space_dim(), eta.dim()));
    }
    if eta.effective_degree() > 2 {
        return Err(Error::precondition("weight degree", "η must have degree ≤ 2"));
    }
    let m = decay_matrix(spec, eta);
    let (lo, hi) = (spec.domain.lo(), spec.domain.hi());
    let n = spec.space_dim();

    // constant M: the lattice minimum is exact
    let points = if m.is_constant() {
        vec![lo.to_vec()]
    } else {
        spec.domain.lattice(CERT_POINTS_PER_AXIS)
    };
    let mut min_m = f64::INFINITY;
    let mut witness = points[0].clone();
    for x in &points {
        let v = sym_min_eigenvalue(&sym(m.eval(x)))?;
        if v < min_m {
            min_m = v;
            witness = x.clone();
        }
    }

    let lip: f64 = (0..n)
        .map(|j| m.partial(j).frobenius_bound_on_box(lo, hi).powi(2))
        .sum::<f64>()
        .sqrt();
    let gap = (0..n)
        .map(|d| (spec.domain.width(d) / (CERT_POINTS_PER_AXIS - 1) as f64).powi(2))
        .sum::<f64>()
        .sqrt()
        * 0.5;
    let margin = if lip == 0.0 { 0.0 } else { lip * gap };
    Ok(Certification {
        c0: min_m - margin,
        min_m,
        margin,
        witness,
    })
}

/// `T0 = (max η − min η) / c0`.
pub fn minimal_time(w: &WeightCandidate) -> Result<f64> {
    if !w.certified() {
        return Err(Error::precondition(
            "certified weight",
            format!("c0 = {:.6e} is not positive", w.c0),
        ));
    }
    Ok((w.eta_max - w.eta_min) / w.c0)
}

fn linear_eta(alpha: &[f64]) -> Poly {
    let g: Vec<f64> = alpha.iter().map(|a| -a).collect();
    Poly::linear(0.0, &g)
}

fn candidate_for(spec: &SystemSpec, alpha: Vec<f64>) -> Result<WeightCandidate> {
    let mut w = WeightCandidate::new(spec, linear_eta(&alpha))?;
    w.direction = Some(alpha);
    Ok(w)
}

const ANGLE_SCAN: usize = 72;

/// Best linear weight `η = −α·x` over unit `α`, whether certified or not.
///
/// One dimension scans `α = ±1`; two dimensions scan 72 angles and refine the
/// best by golden-section search within one scan step.
pub fn best_linear_eta(spec: &SystemSpec) -> Result<WeightCandidate> {
    match spec.space_dim() {
        1 => {
            let a = candidate_for(spec, vec![1.0])?;
            let b = candidate_for(spec, vec![-1.0])?;
            Ok(if b.c0 > a.c0 { b } else { a })
        }
        _ => {
            let score = |theta: f64| -> Result<f64> {
                let alpha = [theta.cos(), theta.sin()];
                Ok(certify_condition(spec, &linear_eta(&alpha))?.c0)
            };
            let step = std::f64::consts::TAU / ANGLE_SCAN as f64;
            let mut best = (0.0, f64::NEG_INFINITY);
            for k in 0..ANGLE_SCAN {
                let th = k as f64 * step;
                let s = score(th)?;
                if s > best.1 {
                    best = (th, s);
                }
            }
            let (mut a, mut b) = (best.0 - step, best.0 + step);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (score(c)?, score(d)?);
            while b - a > 1e-10 {
                if fc > fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = score(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = score(d)?;
                }
            }
            let th = if fc.max(fd) >= best.1 { 0.5 * (a + b) } else { best.0 };
            let mut alpha = vec![th.cos(), th.sin()];
            // snap tiny components so axis-aligned optima print cleanly
            for v in alpha.iter_mut() {
                if v.abs() < 1e-9 {
                    *v = 0.0;
                }
            }
            let norm = alpha.iter().map(|v| v * v).sum::<f64>().sqrt();
            alpha.iter_mut().for_each(|v| *v /= norm);
            let refined = candidate_for(spec, alpha)?;
            let scanned = candidate_for(spec, vec![best.0.cos(), best.0.sin()])?;
            Ok(if refined.c0 >= scanned.c0 { refined } else { scanned })
        }
    }
}

/// Best certified linear weight; fails when no direction certifies.
pub fn search_linear_eta(spec: &SystemSpec) -> Result<WeightCandidate> {
    let w = best_linear_eta(spec)?;
    if !w.certified() {
        return Err(Error::invariant(
            "decay condition",
            format!(
                "no linear weight certifies {}: best c0 = {:.6e} at witness {:?}",
                spec.label, w.c0, w.certification.witness
            ),
        ));
    }
    Ok(w)
}
