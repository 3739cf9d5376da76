use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::condition::WeightCandidate;
use crate::linalg::sym_eigen_desc;
use crate::system::SystemSpec;
use crate::{Error, Result};

/// Minimum overlap between consecutive branch eigenvectors.
pub const OVERLAP_THRESHOLD: f64 = 0.9;
/// Eigenvalues closer than this (relative) are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-9;

/// Starting data of one ray; `branch` is 1-based, eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySeed {
    pub x0: Vec<f64>,
    pub varpi0: Vec<f64>,
    pub branch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaySample {
    pub s: f64,
    pub x: Vec<f64>,
    pub varpi: Vec<f64>,
    pub lambda: f64,
    pub eta: f64,
}

/// Why a ray stopped early or is unreliable.
#[derive(Debug, Clone, PartialEq)]
pub enum RayIssue {
    /// Overlap with the tracked eigenvector fell below [`OVERLAP_THRESHOLD`].
    BranchAmbiguity { s: f64, overlap: f64 },
    /// `|ϖ|` left `[0.5, 2]` times its initial norm.
    MomentumDrift { s: f64, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub branch: usize,
    pub samples: Vec<RaySample>,
    pub exit_time: Option<f64>,
    /// Max over consecutive samples of the finite-difference `dη/ds`.
    pub max_deta_ds: f64,
    pub issue: Option<RayIssue>,
}

impl Ray {
    /// Rays usable for the decay assertion.
    pub fn is_clean(&self) -> bool {
        !matches!(self.issue, Some(RayIssue::BranchAmbiguity { .. }))
    }
}

/// Eigenpair on branch `k` of `Σ ϖ_i A_i(x)`, continued from `prev`.
struct BranchEval {
    lambda: f64,
    r: DVector<f64>,
    overlap: f64,
}

fn branch_eval(spec: &SystemSpec, x: &[f64], varpi: &[f64], k: usize, prev: Option<&DVector<f64>>) -> Result<BranchEval> {
    let p = spec.symbol(x, varpi);
    let (vals, vecs) = sym_eigen_desc(&p)?;
    let scale = vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let Some(prev) = prev else {
        return Ok(BranchEval {
            lambda: vals[k],
            r: vecs.column(k).into_owned(),
            overlap: 1.0,
        });
    };
    // pick the cluster whose eigenspace best contains the previous vector
    let mut best: Option<BranchEval> = None;
    let mut j = 0;
    while j < vals.len() {
        let mut end = j + 1;
        while end < vals.len() && (vals[end] - vals[j]).abs() <= CLUSTER_TOL * scale {
            end += 1;
        }
        let mut proj = DVector::zeros(prev.len());
        for c in j..end {
            let col = vecs.column(c);
            proj += col * col.dot(prev);
        }
        let overlap = proj.norm();
        if best.as_ref().is_none_or(|b| overlap > b.overlap) {
            let lambda = vals[j..end].iter().sum::<f64>() / (end - j) as f64;
            let r = if overlap > 0.0 {
                proj / overlap
            } else {
                vecs.column(j).into_owned()
            };
            best = Some(BranchEval { lambda, r, overlap });
        }
        j = end;
    }
    Ok(best.expect("non-empty spectrum"))
}

/// `(dx/ds, dϖ/ds)` at one Runge-Kutta stage.
type Stage = (Vec<f64>, Vec<f64>);

/// Hellmann–Feynman gradients: `∂λ/∂ϖ_j = ⟨r, A_j r⟩`, `∂λ/∂x_j = ⟨r, Σ_i ϖ_i ∂_j A_i r⟩`.
fn hamiltonian_field(spec: &SystemSpec, x: &[f64], varpi: &[f64], r: &DVector<f64>) -> Stage {
    let n = spec.space_dim();
    let a = spec.a_at(x);
    let dx: Vec<f64> = a.iter().map(|aj| r.dot(&(aj * r))).collect();
    let dvarpi = (0..n)
        .map(|j| {
            let mut m = DMatrix::zeros(spec.state_dim, spec.state_dim);
            for (i, field) in spec.a.iter().enumerate() {
                let d = field.partial(j).eval(x);
                m += (&d + d.transpose()) * (0.5 * varpi[i]);
            }
            -r.dot(&(m * r))
        })
        .collect();
    (dx, dvarpi)
}

/// `λ_k(x, ϖ)` and its Hellmann–Feynman `ϖ`-gradient, branch chosen without continuation.
pub fn branch_value_and_grad(spec: &SystemSpec, x: &[f64], varpi: &[f64], k: usize) -> Result<(f64, Vec<f64>)> {
    let e = branch_eval(spec, x, varpi, k - 1, None)?;
    let (g, _) = hamiltonian_field(spec, x, varpi, &e.r);
    Ok((e.lambda, g))
}

fn add_scaled(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + h * y).collect()
}

/// Integrates one ray with classical RK4 until it exits or `horizon` is reached.
pub fn trace_ray(spec: &SystemSpec, w: &WeightCandidate, seed: &RaySeed, horizon: f64, dt: f64) -> Result<Ray> {
    let n = spec.space_dim();
    let big_n = spec.state_dim;
    if seed.x0.len() != n || seed.varpi0.len() != n {
        return Err(Error::dim("ray seed", n, seed.x0.len()));
    }
    if seed.branch == 0 || seed.branch > big_n {
        return Err(Error::precondition(
            "ray branch",
            format!("branch {} not in 1..={big_n}", seed.branch),
        ));
    }
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(Error::precondition("ray step", "dt and horizon must be positive"));
    }
    spec.domain.check_contains(&seed.x0)?;
    let k = seed.branch - 1;
    let norm0 = seed.varpi0.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut x = seed.x0.clone();
    let mut varpi = seed.varpi0.clone();
    let first = branch_eval(spec, &x, &varpi, k, None)?;
    let mut r = first.r;
    let mut samples = vec![RaySample {
        s: 0.0,
        x: x.clone(),
        varpi: varpi.clone(),
        lambda: first.lambda,
        eta: w.eta_at(&x),
    }];
    let mut issue = None;
    let mut exit_time = None;
    let mut s = 0.0;

    let steps = (horizon / dt).ceil() as usize;
    'outer: for _ in 0..steps {
        let mut stages: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(4);
        let mut r_stage = r.clone();
        for (c, h) in [(0, 0.0), (1, 0.5 * dt), (2, 0.5 * dt), (3, dt)] {
            let (xs, ps) = if c == 0 {
                (x.clone(), varpi.clone())
            } else {
                let (kx, kp) = &stages[c - 1];
                (add_scaled(&x, kx, h), add_scaled(&varpi, kp, h))
            };
            let e = branch_eval(spec, &xs, &ps, k, Some(&r_stage))?;
            if e.overlap < OVERLAP_THRESHOLD {
                issue = Some(RayIssue::BranchAmbiguity { s, overlap: e.overlap });
                break 'outer;
            }
            r_stage = e.r;
            stages.push(hamiltonian_field(spec, &xs, &ps, &r_stage));
        }
        let combine = |sel: fn(&Stage) -> &Vec<f64>| -> Vec<f64> {
            (0..n)
                .map(|j| (sel(&stages[0])[j] + 2.0 * sel(&stages[1])[j] + 2.0 * sel(&stages[2])[j] + sel(&stages[3])[j]) / 6.0)
                .collect()
        };
        let x_new = add_scaled(&x, &combine(|p| &p.0), dt);
        let varpi_new = add_scaled(&varpi, &combine(|p| &p.1), dt);
        let e = branch_eval(spec, &x_new, &varpi_new, k, Some(&r))?;
        if e.overlap < OVERLAP_THRESHOLD {
            issue = Some(RayIssue::BranchAmbiguity { s, overlap: e.overlap });
            break;
        }
        if !spec.domain.contains(&x_new) {
            // fraction of the step spent inside, from the worst violated bound
            let mut frac: f64 = 1.0;
            for d in 0..n {
                let (lo, hi) = (spec.domain.lo()[d], spec.domain.hi()[d]);
                let step = x_new[d] - x[d];
                if x_new[d] > hi && step > 0.0 {
                    frac = frac.min((hi - x[d]) / step);
                }
                if x_new[d] < lo && step < 0.0 {
                    frac = frac.min((lo - x[d]) / step);
                }
            }
            exit_time = Some(s + frac.clamp(0.0, 1.0) * dt);
            break;
        }
        s += dt;
        x = x_new;
        varpi = varpi_new;
        r = e.r;
        samples.push(RaySample {
            s,
            x: x.clone(),
            varpi: varpi.clone(),
            lambda: e.lambda,
            eta: w.eta_at(&x),
        });
        let ratio = varpi.iter().map(|v| v * v).sum::<f64>().sqrt() / norm0;
        if issue.is_none() && !(0.5..=2.0).contains(&ratio) {
            issue = Some(RayIssue::MomentumDrift { s, ratio });
        }
    }

    let max_deta_ds = samples
        .windows(2)
        .map(|p| (p[1].eta - p[0].eta) / (p[1].s - p[0].s))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Ray {
        branch: seed.branch,
        samples,
        exit_time,
        max_deta_ds,
        issue,
    })
}

/// Traces all seeds in parallel; per-seed failures are returned, not propagated.
pub fn trace_rays(spec: &SystemSpec, w: &WeightCandidate, seeds: &[RaySeed], horizon: f64, dt: f64) -> Vec<Result<Ray>> {
    seeds.par_iter().map(|s| trace_ray(spec, w, s, horizon, dt)).collect()
}

/// `count` random interior seeds per branch with unit `ϖ`.
pub fn random_seeds(spec: &SystemSpec, count: usize, seed: u64) -> Vec<RaySeed> {
    let mut rng = crate::rng::seeded(seed, 0x5241_5953);
    let n = spec.space_dim();
    let (lo, hi) = (spec.domain.lo(), spec.domain.hi());
    let mut out = Vec::with_capacity(count * spec.state_dim);
    for branch in 1..=spec.state_dim {
        for _ in 0..count {
            let u = crate::rng::uniform_vec(&mut rng, n, 0.05, 0.95);
            let x0 = (0..n).map(|d| lo[d] + u[d] * (hi[d] - lo[d])).collect();
            let varpi0 = crate::rng::unit_vector(&mut rng, n);
            out.push(RaySeed { x0, varpi0, branch });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{minimal_time, search_linear_eta};
    use crate::system::{registry, CoefField, Domain, Poly, PolyMatrix};

    fn spec_from(a: DMatrix<f64>) -> SystemSpec {
        let n = a.nrows();
        SystemSpec::new(
            "t",
            Domain::unit(1),
            vec![PolyMatrix::from_constant(1, &a)],
            CoefField::zeros(1, n),
            CoefField::zeros(1, n),
            CoefField::zeros(1, n),
        )
        .unwrap()
    }

    #[test]
    fn straight_ray_for_constant_diagonal() {
        let spec = spec_from(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        let w = WeightCandidate::new(&spec, Poly::linear(0.0, &[-1.0])).unwrap();
        let seed = RaySeed {
            x0: vec![0.1],
            varpi0: vec![1.0],
            branch: 1,
        };
        let ray = trace_ray(&spec, &w, &seed, 2.0, 1e-3).unwrap();
        for p in ray.samples.windows(2) {
            let v = (p[1].x[0] - p[0].x[0]) / (p[1].s - p[0].s);
            assert!((v - 2.0).abs() < 1e-9);
        }
        assert!((ray.max_deta_ds + 2.0).abs() < 1e-9);
        assert!((ray.exit_time.unwrap() - 0.45).abs() < 1e-9);
        assert!(ray.issue.is_none());
    }

    #[test]
    fn sir_rays_decay_at_unit_rate() {
        let spec = registry::sir_age();
        let w = search_linear_eta(&spec).unwrap();
        for k in 1..=3 {
            let seed = RaySeed {
                x0: vec![0.3],
                varpi0: vec![1.0],
                branch: k,
            };
            let ray = trace_ray(&spec, &w, &seed, 2.0, 1e-3).unwrap();
            assert!(ray.is_clean());
            for p in ray.samples.windows(2) {
                let d = (p[1].eta - p[0].eta) / (p[1].s - p[0].s);
                assert!((d + 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn torrential_rays_decay_and_exit() {
        let spec = registry::shallow_water(2.0, 0.0, 10.0, 0.1);
        let w = search_linear_eta(&spec).unwrap();
        let t0 = minimal_time(&w).unwrap();
        let seeds = random_seeds(&spec, 20, 7);
        for ray in trace_rays(&spec, &w, &seeds, 2.0 * t0, 1e-3 * t0) {
            let ray = ray.unwrap();
            assert!(ray.is_clean());
            assert!(ray.max_deta_ds <= -w.c0 + 1e-6, "{}", ray.max_deta_ds);
            let bound = (ray.samples[0].eta - w.eta_min) / w.c0 + 1e-3;
            assert!(ray.exit_time.unwrap() <= bound);
        }
    }

    #[test]
    fn hellmann_feynman_matches_finite_differences() {
        let spec = registry::shallow_water(2.0, 0.7, 10.0, 0.1);
        let x = [0.4, 0.6];
        let varpi = [0.8, -0.6];
        for k in 1..=3 {
            let (_, g) = branch_value_and_grad(&spec, &x, &varpi, k).unwrap();
            for j in 0..2 {
                let h = 1e-6;
                let mut p = varpi;
                let mut m = varpi;
                p[j] += h;
                m[j] -= h;
                let lp = branch_value_and_grad(&spec, &x, &p, k).unwrap().0;
                let lm = branch_value_and_grad(&spec, &x, &m, k).unwrap().0;
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "k={k} j={j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn variable_coefficients_bend_momentum() {
        // A(x) = diag(1 + x, 2): branch 2 (speed 1 + x) has ϖ' = −ϖ
        let mut spec = spec_from(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        spec.a[0] = PolyMatrix::new(
            2,
            2,
            vec![
                Poly::new(1, vec![1.0, 1.0]).unwrap(),
                Poly::constant(1, 0.0),
                Poly::constant(1, 0.0),
                Poly::constant(1, 2.0),
            ],
        )
        .unwrap();
        let w = WeightCandidate::new(&spec, Poly::linear(0.0, &[-1.0])).unwrap();
        let seed = RaySeed {
            x0: vec![0.0],
            varpi0: vec![1.0],
            branch: 2,
        };
        let ray = trace_ray(&spec, &w, &seed, 3.0, 1e-3).unwrap();
        // dx/ds = 1 + x ⇒ x = e^s − 1, exit at s = ln 2; ϖ = e^{−s}
        assert!((ray.exit_time.unwrap() - 2f64.ln()).abs() < 2e-3);
        let last = ray.samples.last().unwrap();
        assert!((last.varpi[0] - (-last.s).exp()).abs() < 1e-9);
    }

    fn crossing_spec(delta: f64) -> SystemSpec {
        // A(x) = 2I + [[x − ½, δ], [δ, ½ − x]]
        let mut spec = spec_from(DMatrix::identity(2, 2));
        spec.a[0] = PolyMatrix::new(
            2,
            2,
            vec![
                Poly::new(1, vec![1.5, 1.0]).unwrap(),
                Poly::constant(1, delta),
                Poly::constant(1, delta),
                Poly::new(1, vec![2.5, -1.0]).unwrap(),
            ],
        )
        .unwrap();
        spec
    }

    #[test]
    fn exact_crossing_keeps_eigenvector() {
        let spec = crossing_spec(0.0);
        let w = WeightCandidate::new(&spec, Poly::linear(0.0, &[-1.0])).unwrap();
        let seed = RaySeed {
            x0: vec![0.1],
            varpi0: vec![1.0],
            branch: 1,
        };
        let ray = trace_ray(&spec, &w, &seed, 3.0, 1e-3).unwrap();
        assert!(ray.is_clean(), "{:?}", ray.issue);
        // following e2 means speed 2.5 − x and ϖ = 2.4 / (2.5 − x), with λ conserved
        for p in &ray.samples {
            assert!((p.lambda - 2.4).abs() < 1e-9);
            assert!((p.varpi[0] - 2.4 / (2.5 - p.x[0])).abs() < 1e-8);
        }
        assert!(ray.samples.last().unwrap().x[0] > 0.99);
        assert!(ray.exit_time.is_some());
    }

    #[test]
    fn near_crossing_is_flagged() {
        // seeded inside the avoided crossing, where the branch eigenvector is (1, 1)/√2
        let spec = crossing_spec(1e-7);
        let w = WeightCandidate::new(&spec, Poly::linear(0.0, &[-1.0])).unwrap();
        let seed = RaySeed {
            x0: vec![0.5],
            varpi0: vec![1.0],
            branch: 1,
        };
        let ray = trace_ray(&spec, &w, &seed, 3.0, 1e-3).unwrap();
        assert!(matches!(ray.issue, Some(RayIssue::BranchAmbiguity { .. })), "{:?}", ray.issue);
        assert!(!ray.is_clean());
    }
}
