mod common;

use common::*;
use dgdsim::engine::{consensus_operator, dgdt_step, near_dgd_step};
use dgdsim::objectives::{
    build_logistic, centralized_solve, default_reference_tolerance, generate_quadratic,
    quadratic_optimum,
};
use dgdsim::{
    build_topology, consensus_apply, metropolis_weights, run, ConsensusSchedule, GroundTruth,
    LocalObjectiveSet, MethodConfig, Shard, StackedIterate, TopologyKind, TraceRecorder,
};

fn metropolis(kind: TopologyKind, n: usize) -> dgdsim::ConsensusMatrix {
    metropolis_weights(&build_topology(kind, n).unwrap()).unwrap()
}

#[test]
fn spectra_match_jacobi() {
    let cases = [
        (TopologyKind::Cyclic { k: 4 }, 10),
        (TopologyKind::Cyclic { k: 2 }, 7),
        (TopologyKind::Path, 3),
        (TopologyKind::Path, 8),
        (TopologyKind::Star, 6),
        (TopologyKind::Complete, 5),
    ];
    for (kind, n) in cases {
        let w = metropolis(kind, n);
        let oracle = jacobi_eigenvalues(n, w.entries());
        for (a, b) in w.spectrum().eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{kind} n={n}: {a} vs {b}");
        }
        let beta = oracle[1].abs().max(oracle[n - 1].abs());
        assert!((w.beta() - beta).abs() < 1e-10);
        assert!((w.lambda_min() - oracle[n - 1]).abs() < 1e-10);
    }
}

#[test]
fn path_three_eigenvalues() {
    let w = metropolis(TopologyKind::Path, 3);
    let ev = &w.spectrum().eigenvalues;
    for (a, b) in ev.iter().zip([1.0, 2.0 / 3.0, 0.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn consensus_matches_kronecker_oracle() {
    for (kind, n) in [(TopologyKind::Path, 3), (TopologyKind::Cyclic { k: 4 }, 10)] {
        let w = metropolis(kind, n);
        let p = 3;
        let x = StackedIterate::from_flat(n, p, lcg_vector(n as u64, n * p, 5.0)).unwrap();
        for t in [1u32, 3, 7] {
            let got = consensus_apply(&w, &x, t as u64).unwrap();
            let want = kron_apply(n, p, &matpow(n, w.entries(), t), x.as_slice());
            for (a, b) in got.as_slice().iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "{kind} t={t}");
            }
        }
        let once = consensus_operator(&w, &x).unwrap();
        assert_eq!(once, consensus_apply(&w, &x, 1).unwrap());
    }
}

#[test]
fn dgdt_matches_kronecker_oracle() {
    let n = 5;
    let p = 4;
    let q = generate_quadratic(n, p, 50.0, 8).unwrap();
    let w = metropolis(TopologyKind::Cyclic { k: 2 }, n);
    let x = StackedIterate::from_flat(n, p, lcg_vector(3, n * p, 2.0)).unwrap();
    let alpha = 0.01;
    let got = dgdt_step(&w, 3, &q, alpha, &x).unwrap();
    let mixed = kron_apply(n, p, &matpow(n, w.entries(), 3), x.as_slice());
    for i in 0..n {
        // ∇f_i(x) = A_i x + b_i written out directly
        let a = q.a(i);
        let xi = x.block(i);
        for r in 0..p {
            let g: f64 = (0..p).map(|c| a[r * p + c] * xi[c]).sum::<f64>() + q.b(i)[r];
            let want = mixed[i * p + r] - alpha * g;
            assert!((got.block(i)[r] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn complete_graph_equal_weights_are_rank_one() {
    let w = metropolis(TopologyKind::Complete, 6);
    let x = StackedIterate::from_flat(6, 2, lcg_vector(1, 12, 3.0)).unwrap();
    let once = consensus_apply(&w, &x, 1).unwrap();
    let many = consensus_apply(&w, &x, 9).unwrap();
    let mean = x.mean();
    for (a, b) in once.as_slice().iter().zip(many.as_slice()) {
        assert!((a - b).abs() < 1e-14);
    }
    for block in once.blocks() {
        assert!(norm(&sub(block, &mean)) < 1e-14);
    }
}

fn quadratic_points(p: usize) -> Vec<Vec<f64>> {
    (0..5).map(|s| lcg_vector(100 + s, p, 3.0)).collect()
}

#[test]
fn quadratic_gradients_match_finite_differences() {
    let q = generate_quadratic(4, 6, 100.0, 2).unwrap();
    for x in quadratic_points(6) {
        for i in 0..4 {
            let fd = finite_difference(|z| q.value(i, z), &x);
            let g = q.gradient(i, &x);
            assert!(norm(&sub(&fd, &g)) <= 1e-6 * norm(&g).max(1.0));
        }
    }
}

fn toy_logistic() -> dgdsim::LogisticProblem {
    let rows: Vec<Vec<f64>> = (0..12).map(|r| lcg_vector(r, 4, 2.0)).collect();
    let labels: Vec<f64> = rows.iter().map(|r| if r[0] + r[1] > 0.0 { 1.0 } else { -1.0 }).collect();
    let shards = vec![
        Shard::from_dense(&rows[..4], labels[..4].to_vec()),
        Shard::from_dense(&rows[4..8], labels[4..8].to_vec()),
        Shard::from_dense(&rows[8..], labels[8..].to_vec()),
    ];
    build_logistic(shards).unwrap()
}

#[test]
fn logistic_gradients_match_finite_differences() {
    let f = toy_logistic();
    for x in quadratic_points(4) {
        for i in 0..3 {
            let fd = finite_difference(|z| f.value(i, z), &x);
            let g = f.gradient(i, &x);
            assert!(norm(&sub(&fd, &g)) <= 1e-6 * norm(&g).max(1e-3), "{fd:?} vs {g:?}");
        }
    }
}

#[test]
fn curvature_constants_bracket_gradient_differences() {
    let q = generate_quadratic(3, 5, 1e3, 4).unwrap();
    let f = toy_logistic();
    let families: [&dyn LocalObjectiveSet; 2] = [&q, &f];
    for obj in families {
        let p = obj.p();
        for s in 0..5 {
            let x = lcg_vector(2 * s, p, 4.0);
            let y = lcg_vector(2 * s + 1, p, 4.0);
            let d = sub(&x, &y);
            let dd: f64 = d.iter().map(|v| v * v).sum();
            for i in 0..obj.n() {
                let gd = sub(&obj.gradient(i, &x), &obj.gradient(i, &y));
                let inner: f64 = gd.iter().zip(&d).map(|(a, b)| a * b).sum();
                assert!(inner >= obj.strong_convexity(i) * dd - 1e-9);
                assert!(inner <= obj.lipschitz(i) * dd + 1e-9);
            }
        }
    }
}

#[test]
fn logistic_ground_truth_is_stationary() {
    let f = toy_logistic();
    let tol = default_reference_tolerance(&f);
    let truth = centralized_solve(&f, tol).unwrap();
    assert!(norm(&f.total_gradient(&truth.x_star)) <= tol);
}

/// Centralized gradient descent on `(1/n) Σ f_i` with step `α` from `x0`.
fn centralized_path(obj: &dyn LocalObjectiveSet, alpha: f64, x0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let n = obj.n() as f64;
    let mut x = x0.to_vec();
    let mut out = Vec::new();
    for _ in 0..steps {
        let g = obj.total_gradient(&x);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= alpha * gi / n;
        }
        out.push(x.clone());
    }
    out
}

#[test]
fn single_agent_run_is_centralized_descent() {
    let q = generate_quadratic(1, 4, 20.0, 6).unwrap();
    let truth = quadratic_optimum(&q).unwrap();
    let w = dgdsim::ConsensusMatrix::single_agent();
    let alpha = 0.5 / q.lipschitz(0);
    let path = centralized_path(&q, alpha, &[0.0; 4], 50);
    let x2 = norm(&truth.x_star).powi(2);
    for cfg in [
        MethodConfig::dgd(alpha, 50),
        MethodConfig::dgd_t(3, alpha, 50),
        MethodConfig::near_dgd(ConsensusSchedule::Linear, alpha, 50),
    ] {
        let mut rec = TraceRecorder::default();
        run(&cfg, &w, &q, &truth, &mut rec).unwrap();
        for (row, x) in rec.finish().iter().zip(&path) {
            let want = norm(&sub(x, &truth.x_star)).powi(2) / x2;
            assert!((row.rel_err - want).abs() <= 1e-12 * want.max(1e-20) + 1e-30, "{}", cfg.label);
        }
    }
}

#[test]
fn near_dgd_on_complete_graph_is_centralized_descent() {
    let n = 5;
    let q = generate_quadratic(n, 3, 30.0, 12).unwrap();
    let w = metropolis(TopologyKind::Complete, n);
    let start = [0.7, -0.2, 1.5];
    let alpha = 0.5 / (0..n).map(|i| q.lipschitz(i)).fold(0.0, f64::max);
    let path = centralized_path(&q, alpha, &start, 40);
    let mut y = StackedIterate::replicated(n, &start);
    let mut xs = Vec::new();
    for _ in 0..41 {
        let (x, next) = near_dgd_step(&w, 1, &q, alpha, 1, &y).unwrap();
        xs.push(x);
        y = next;
    }
    // x_{k+1} = Z y_{k+1} is the block-replicated centralized iterate
    for (x, c) in xs[1..].iter().zip(&path) {
        for block in x.blocks() {
            assert!(norm(&sub(block, c)) <= 1e-12 * (1.0 + norm(c)));
        }
    }
}

#[test]
fn quadratic_optimum_matches_direct_solve() {
    let q = generate_quadratic(3, 3, 10.0, 1).unwrap();
    let truth: GroundTruth = quadratic_optimum(&q).unwrap();
    // Cramer's rule on the summed system
    let s = q.hessian_sum();
    let mut b = [0.0; 3];
    for i in 0..3 {
        for r in 0..3 {
            b[r] -= q.b(i)[r];
        }
    }
    let det = |m: &[f64]| {
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    };
    let d = det(&s);
    for c in 0..3 {
        let mut m = s.clone();
        for r in 0..3 {
            m[r * 3 + c] = b[r];
        }
        assert!((det(&m) / d - truth.x_star[c]).abs() < 1e-10);
    }
}
