use hypctl::discretization::build_grid;
use hypctl::stochastic::{AdaptedProcess, ScenarioTree, Solver};
use hypctl::system::{registry, CoefField, Domain, Poly, PolyMatrix, SystemSpec};
use nalgebra::{DMatrix, DVector};

const HORIZON: f64 = 0.6;

/// `A(x)` with both eigenvalues positive on `[0, 1]`, so every boundary
/// component is incoming at `x = 0` and outgoing at `x = 1`.
fn varying_spec() -> SystemSpec {
    let a = PolyMatrix::new(
        2,
        2,
        vec![
            Poly::linear(1.0, &[0.5]),
            Poly::constant(1, 0.2),
            Poly::constant(1, 0.2),
            Poly::linear(0.6, &[0.3]),
        ],
    )
    .unwrap();
    let b = |v: [f64; 4]| CoefField::constant(1, &DMatrix::from_row_slice(2, 2, &v));
    SystemSpec::new(
        "varying",
        Domain::unit(1),
        vec![a],
        b([-0.2, 0.1, 0.0, -0.1]),
        b([0.15, 0.0, 0.05, 0.1]),
        b([0.1, -0.05, 0.0, 0.2]),
    )
    .unwrap()
}

fn terminal(s: &Solver) -> AdaptedProcess {
    let tree = &s.tree;
    s.leaf_field(|p, x| {
        let w = tree.brownian(tree.depth, p);
        let bump = (std::f64::consts::PI * x[0]).sin().powi(2);
        vec![bump * (1.0 + 0.5 * w), 0.5 * bump * (1.0 - 0.3 * w)]
    })
    .unwrap()
}

/// Direct tree discretization of the backward system, written independently
/// of the transposed solver:
/// `z_k = S(z̄) + Δt[(B1ᵀ − B2ᵀB3ᵀ + A')z̄ + B2ᵀZ]`, `Z = (z₊ − z₋)/(2√Δt) + B3ᵀ z̄`,
/// with `S` an upwind sweep of `z_t + A z_x = 0` and `z = 0` beyond `x = 1`.
fn direct_backward(
    spec: &SystemSpec,
    cells: usize,
    tree: &ScenarioTree,
    substeps: usize,
    zt: &AdaptedProcess,
) -> (AdaptedProcess, AdaptedProcess) {
    let (n, m) = (2, tree.depth);
    let h = 1.0 / cells as f64;
    let xs: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5) * h).collect();
    let a: Vec<DMatrix<f64>> = xs.iter().map(|&x| spec.a_at(&[x])[0].clone()).collect();
    let da: Vec<DMatrix<f64>> = xs.iter().map(|&x| spec.divergence(&[x])).collect();
    let (b1, b2, b3) = (spec.b1.eval(0.0, &[0.5]), spec.b2.eval(0.0, &[0.5]), spec.b3.eval(0.0, &[0.5]));
    let react = b1.transpose() - b2.transpose() * b3.transpose();
    let len = n * cells;
    let mut z = AdaptedProcess::zeros(0, m, len);
    z.level_mut(m).copy_from_slice(zt.level(m));
    let mut zz = AdaptedProcess::zeros(0, m - 1, len);
    let delta = tree.dt / substeps as f64;
    let sq = tree.sqrt_dt;
    for k in (0..m).rev() {
        for p in 0..tree.nodes_at(k) {
            let (zm, zp) = (z.node(k + 1, 2 * p).to_vec(), z.node(k + 1, 2 * p + 1).to_vec());
            let bar: Vec<f64> = zm.iter().zip(&zp).map(|(a, b)| 0.5 * (a + b)).collect();
            let mart: Vec<f64> = zm.iter().zip(&zp).map(|(a, b)| (b - a) / (2.0 * sq)).collect();
            let mut s = bar.clone();
            for _ in 0..substeps {
                let prev = s.clone();
                for j in 0..cells {
                    let here = DVector::from_column_slice(&prev[j * n..(j + 1) * n]);
                    let right = if j + 1 < cells {
                        DVector::from_column_slice(&prev[(j + 1) * n..(j + 2) * n])
                    } else {
                        DVector::zeros(n)
                    };
                    let upd = &here + &a[j] * (&right - &here) * (delta / h);
                    s[j * n..(j + 1) * n].copy_from_slice(upd.as_slice());
                }
            }
            let mut zk = vec![0.0; len];
            let mut zzk = vec![0.0; len];
            for j in 0..cells {
                let zb = DVector::from_column_slice(&bar[j * n..(j + 1) * n]);
                let big = DVector::from_column_slice(&mart[j * n..(j + 1) * n]) + b3.transpose() * &zb;
                let v = DVector::from_column_slice(&s[j * n..(j + 1) * n]) + ((&react + &da[j]) * &zb + b2.transpose() * &big) * tree.dt;
                zk[j * n..(j + 1) * n].copy_from_slice(v.as_slice());
                zzk[j * n..(j + 1) * n].copy_from_slice(big.as_slice());
            }
            z.node_mut(k, p).copy_from_slice(&zk);
            zz.node_mut(k, p).copy_from_slice(&zzk);
        }
    }
    (z, zz)
}

/// Largest level-wise `sqrt(E Σ h |a − b|²)`.
fn level_gap(tree: &ScenarioTree, h: f64, a: &AdaptedProcess, b: &AdaptedProcess, levels: std::ops::Range<usize>) -> f64 {
    levels
        .map(|k| {
            let d: f64 = a.level(k).iter().zip(b.level(k)).map(|(x, y)| (x - y).powi(2)).sum();
            (tree.prob(k) * h * d).sqrt()
        })
        .fold(0.0, f64::max)
}

#[test]
fn transpose_adjoint_converges_to_direct_discretization() {
    let spec = varying_spec();
    let mut gaps = Vec::new();
    for (cells, depth) in [(10, 4), (20, 8), (40, 16)] {
        let s = Solver::new(
            build_grid(&spec, &[cells], 0.9).unwrap(),
            ScenarioTree::new(HORIZON, depth).unwrap(),
        )
        .unwrap();
        let zt = terminal(&s);
        let sol = s.solve_backward(&zt).unwrap();
        let (z, zz) = direct_backward(&spec, cells, &s.tree, s.substeps, &zt);
        let h = 1.0 / cells as f64;
        let gz = level_gap(&s.tree, h, &sol.z, &z, 0..depth + 1);
        let gzz = level_gap(&s.tree, h, &sol.zz, &zz, 0..depth);
        eprintln!("J={cells} M={depth}: z gap {gz:.3e}, Z gap {gzz:.3e}");
        gaps.push(gz.max(gzz));
    }
    for w in gaps.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 0.7, "gaps {gaps:?}");
    }
}

#[test]
fn boundary_trace_stays_bounded_under_refinement() {
    for spec in [registry::scalar_transport(&[1.0]), registry::sir_age(), varying_spec()] {
        let mut ratios = Vec::new();
        for cells in [20, 40, 80, 160] {
            let s = Solver::new(build_grid(&spec, &[cells], 0.9).unwrap(), ScenarioTree::new(1.5, 6).unwrap()).unwrap();
            let n = spec.state_dim;
            let tree = &s.tree;
            let zt = s
                .leaf_field(|p, x| vec![(std::f64::consts::PI * x[0]).sin().powi(2) * (1.0 + 0.5 * tree.brownian(tree.depth, p)); n])
                .unwrap();
            let sol = s.solve_backward(&zt).unwrap();
            let xi = s.unweighted_trace(&sol);
            let m = tree.depth;
            let terminal = s.state_inner_level(m, zt.level(m), zt.level(m));
            ratios.push(s.u_inner(&xi, &xi) / terminal);
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
        eprintln!("{}: {ratios:?}", spec.label);
        assert!(lo > 0.0 && hi / lo <= 2.0, "{}: {ratios:?}", spec.label);
    }
}
