mod common;

use ndarray::{array, Array1, Array2};
use rand::Rng;
use swift_core::harness::build_cost_random;
use swift_core::ot::{
    build_kernel, column_transport, delta, entropic_ot, exact_ot, psi, update_scalings, CostModel,
    ScalingOptions, TransportScalings,
};

/// Runs `iters` scaling rounds on `cols` random column pairs of length `n`.
fn solve(
    n: usize,
    cols: usize,
    rho: f64,
    lambda: f64,
    iters: usize,
    seed: u64,
) -> (CostModel, Array2<f64>, Array2<f64>, TransportScalings) {
    let mut r = common::rng(seed);
    let model = build_kernel(build_cost_random(n, seed), rho).unwrap();
    let x = common::random_matrix(n, cols, &mut r) + 0.05;
    let xh = common::random_matrix(n, cols, &mut r) * 3.0 + 0.05;
    let phi = lambda * rho / (lambda * rho + 1.0);
    let mut s = TransportScalings::new(0, n, (0..cols).collect(), phi);
    let opts = ScalingOptions { sinkhorn_iters: iters, ..Default::default() };
    update_scalings(x.view(), xh.view(), &model, &mut s, &opts).unwrap();
    (model, x, xh, s)
}

#[test]
fn marginals_match_materialized_plans() {
    for seed in 0..50 {
        let n = 1 + seed as usize % 6;
        let (model, _, _, s) = solve(n, 4, 10.0, 0.5, 13, seed);
        let d = delta(&s, &model);
        let p = psi(&s, &model);
        for k in 0..4 {
            let t = column_transport(&s, &model, k);
            for i in 0..n {
                let row: f64 = t.row(i).sum();
                let col: f64 = t.column(i).sum();
                assert!((d[[i, k]] - row).abs() <= 1e-10 * row.max(1.0));
                assert!((p[[i, k]] - col).abs() <= 1e-10 * col.max(1.0));
            }
        }
    }
}

/// `f(t) = t ln t + KL(t ‖ 2) + KL(t ‖ 3)`, minimized by bisection on `f'`.
fn scalar_optimum() -> f64 {
    let grad = |t: f64| t.ln() + 1.0 + (t / 2.0).ln() + (t / 3.0).ln();
    let (mut lo, mut hi) = (1e-6, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if grad(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn single_bin_fixed_point_solves_the_scalar_problem() {
    let model = build_kernel(array![[0.0]], 1.0).unwrap();
    assert!((model.kernel()[[0, 0]] - (-1.0f64).exp()).abs() < 1e-15);
    let mut s = TransportScalings::new(0, 1, vec![0], 0.5);
    let opts = ScalingOptions { sinkhorn_iters: 200, ..Default::default() };
    update_scalings(array![[3.0]].view(), array![[2.0]].view(), &model, &mut s, &opts).unwrap();
    let t = column_transport(&s, &model, 0)[[0, 0]];
    let want = scalar_optimum();
    assert!((t - want).abs() < 1e-10, "{t} vs {want}");
    assert!((want - (6.0 / std::f64::consts::E).cbrt()).abs() < 1e-12);
}

/// Largest `|∂/∂T|` of `⟨C,T⟩ - E(T)/ρ + λ KL(T1 ‖ x̂) + λ KL(Tᵀ1 ‖ x)` over all cells.
fn stationarity_residual(model: &CostModel, t: &Array2<f64>, xh: &[f64], x: &[f64], lambda: f64) -> f64 {
    let rows = t.sum_axis(ndarray::Axis(1));
    let cols = t.sum_axis(ndarray::Axis(0));
    let c = model.cost();
    let mut worst: f64 = 0.0;
    for ((i, j), &tij) in t.indexed_iter() {
        let g = c[[i, j]]
            + (tij.ln() + 1.0) / model.rho()
            + lambda * ((rows[i] / xh[i]).ln() + (cols[j] / x[j]).ln());
        worst = worst.max(g.abs());
    }
    worst
}

#[test]
fn plans_satisfy_first_order_conditions() {
    let mut r = common::rng(99);
    for seed in 0..40 {
        let rho = r.random_range(1.0..10.0);
        let lambda = r.random_range(0.1..1.0);
        let (model, x, xh, s) = solve(4, 3, rho, lambda, 200, seed);
        for k in 0..3 {
            let t = column_transport(&s, &model, k);
            let res = stationarity_residual(&model, &t, &xh.column(k).to_vec(), &x.column(k).to_vec(), lambda);
            assert!(res < 1e-8, "seed {seed} column {k}: residual {res}");
        }
    }
}

fn brute_force_3x3(a: [u32; 3], b: [u32; 3], c: &Array2<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for t00 in 0..=a[0] {
        for t01 in 0..=a[0] - t00 {
            for t10 in 0..=a[1] {
                for t11 in 0..=a[1] - t10 {
                    let t02 = a[0] as i64 - (t00 + t01) as i64;
                    let t12 = a[1] as i64 - (t10 + t11) as i64;
                    let t20 = b[0] as i64 - (t00 + t10) as i64;
                    let t21 = b[1] as i64 - (t01 + t11) as i64;
                    let t22 = b[2] as i64 - t02 - t12;
                    let t = [[t00 as i64, t01 as i64, t02], [t10 as i64, t11 as i64, t12], [t20, t21, t22]];
                    if t.iter().flatten().any(|&v| v < 0) || t[2].iter().sum::<i64>() != a[2] as i64 {
                        continue;
                    }
                    let cost: f64 = (0..3)
                        .flat_map(|i| (0..3).map(move |j| (i, j)))
                        .map(|(i, j)| c[[i, j]] * t[i][j] as f64)
                        .sum();
                    best = best.min(cost);
                }
            }
        }
    }
    best
}

fn random_split(total: u32, r: &mut impl Rng) -> [u32; 3] {
    let p = r.random_range(0..=total);
    let q = r.random_range(0..=total - p);
    [p, q, total - p - q]
}

#[test]
fn exact_transport_matches_enumeration() {
    let mut r = common::rng(5);
    for seed in 0..60 {
        let total = r.random_range(1..8);
        let a = random_split(total, &mut r);
        let b = random_split(total, &mut r);
        let c = build_cost_random(3, seed);
        let want = brute_force_3x3(a, b, &c);
        let af = Array1::from_iter(a.iter().map(|&v| v as f64));
        let bf = Array1::from_iter(b.iter().map(|&v| v as f64));
        let got = exact_ot(&af, &bf, &c).unwrap();
        assert!((got.cost - want).abs() < 1e-12, "{a:?} {b:?}: {} vs {want}", got.cost);
        for i in 0..3 {
            assert!((got.plan.row(i).sum() - af[i]).abs() < 1e-12);
            assert!((got.plan.column(i).sum() - bf[i]).abs() < 1e-12);
        }
        assert!(got.plan.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn entropic_cost_approaches_exact_cost() {
    let mut r = common::rng(11);
    for seed in 0..10 {
        let n = 5;
        let a = Array1::from_shape_fn(n, |_| r.random_range(0.1..1.0));
        let mut b = Array1::from_shape_fn(n, |_| r.random_range(0.1..1.0));
        b *= a.sum() / b.sum();
        let c = build_cost_random(n, seed);
        let exact = exact_ot(&a, &b, &c).unwrap().cost;
        let mut prev = f64::INFINITY;
        for rho in [5.0, 50.0, 500.0] {
            let t = entropic_ot(&a, &b, &build_kernel(c.clone(), rho).unwrap(), 20_000).unwrap();
            let gap = (t.cost - exact).abs();
            assert!(gap <= prev + 1e-12, "seed {seed} rho {rho}: gap {gap} after {prev}");
            prev = gap;
        }
        assert!(prev <= 0.02 * exact, "seed {seed}: gap {prev} vs exact {exact}");
    }
}
