use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{GroundTruth, LocalObjectiveSet, ObjectiveError};
use crate::linalg;

/// `f_i(x) = ½ xᵀ A_i x + b_iᵀ x` with symmetric positive definite `A_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    p: usize,
    /// Row-major `p x p` blocks.
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    lipschitz: Vec<f64>,
    strong: Vec<f64>,
    kappa: Option<f64>,
    seed: Option<u64>,
}

impl QuadraticProblem {
    /// Builds a problem from explicit row-major `A_i` and `b_i`.
    pub fn from_parts(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self, ObjectiveError> {
        if a.is_empty() {
            return Err(ObjectiveError::NoAgents);
        }
        if a.len() != b.len() {
            return Err(ObjectiveError::Shape(format!(
                "{} matrices but {} vectors",
                a.len(),
                b.len()
            )));
        }
        let p = b[0].len();
        let mut lipschitz = Vec::with_capacity(a.len());
        let mut strong = Vec::with_capacity(a.len());
        for (i, (ai, bi)) in a.iter().zip(&b).enumerate() {
            if ai.len() != p * p || bi.len() != p {
                return Err(ObjectiveError::Shape(format!("agent {i} is not {p}-dimensional")));
            }
            for r in 0..p {
                for c in 0..r {
                    if (ai[r * p + c] - ai[c * p + r]).abs() > 1e-12 * (1.0 + ai[r * p + c].abs()) {
                        return Err(ObjectiveError::Shape(format!("A_{i} is not symmetric")));
                    }
                }
            }
            let ev = linalg::symmetric_eigenvalues(p, ai);
            let (hi, lo) = (ev[0], ev[p - 1]);
            if lo <= 0.0 {
                return Err(ObjectiveError::NotPositiveDefinite);
            }
            lipschitz.push(hi);
            strong.push(lo);
        }
        Ok(Self {
            p,
            a,
            b,
            lipschitz,
            strong,
            kappa: None,
            seed: None,
        })
    }

    pub fn a(&self, i: usize) -> &[f64] {
        &self.a[i]
    }

    pub fn b(&self, i: usize) -> &[f64] {
        &self.b[i]
    }

    pub fn target_kappa(&self) -> Option<f64> {
        self.kappa
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `max_i L_i / min_i mu_i`: condition number of the separable objective
    /// `sum_i f_i(x_i)`, the quantity the generator controls.
    pub fn condition_number(&self) -> f64 {
        let l = self.lipschitz.iter().copied().fold(0.0, f64::max);
        let mu = self.strong.iter().copied().fold(f64::INFINITY, f64::min);
        l / mu
    }

    /// Row-major `sum_i A_i`.
    pub fn hessian_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.p * self.p];
        for ai in &self.a {
            linalg::axpy(1.0, ai, &mut s);
        }
        s
    }

    /// Condition number of `sum_i A_i` (informational).
    pub fn sum_condition_number(&self) -> f64 {
        let ev = linalg::symmetric_eigenvalues(self.p, &self.hessian_sum());
        ev[0] / ev[self.p - 1]
    }

    fn b_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.p];
        for bi in &self.b {
            linalg::axpy(1.0, bi, &mut s);
        }
        s
    }

    fn scale_b(&mut self, factor: f64) {
        for bi in &mut self.b {
            bi.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

impl LocalObjectiveSet for QuadraticProblem {
    fn n(&self) -> usize {
        self.a.len()
    }

    fn p(&self) -> usize {
        self.p
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.p];
        matvec(self.p, &self.a[i], x, &mut ax);
        0.5 * linalg::dot(x, &ax) + linalg::dot(&self.b[i], x)
    }

    fn gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        matvec(self.p, &self.a[i], x, out);
        linalg::axpy(1.0, &self.b[i], out);
    }

    fn lipschitz(&self, i: usize) -> f64 {
        self.lipschitz[i]
    }

    fn strong_convexity(&self, i: usize) -> f64 {
        self.strong[i]
    }

    fn local_minimizer(&self, i: usize) -> Result<Vec<f64>, ObjectiveError> {
        let neg_b: Vec<f64> = self.b[i].iter().map(|v| -v).collect();
        spd_solve(self.p, &self.a[i], &neg_b)
    }

    fn describe(&self) -> String {
        match (self.kappa, self.seed) {
            (Some(k), Some(s)) => {
                format!("quadratic(n={},p={},kappa={},seed={})", self.n(), self.p, k, s)
            }
            _ => format!("quadratic(n={},p={},explicit)", self.n(), self.p),
        }
    }
}

fn matvec(p: usize, a: &[f64], x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = linalg::dot(&a[r * p..(r + 1) * p], x);
    }
}

fn spd_solve(p: usize, a: &[f64], rhs: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
    let m = DMatrix::from_row_slice(p, p, a);
    let chol = m.clone().cholesky().ok_or(ObjectiveError::NotPositiveDefinite)?;
    let rhs = DVector::from_column_slice(rhs);
    let mut x = chol.solve(&rhs);
    // one round of iterative refinement
    let r = &rhs - &m * &x;
    x += chol.solve(&r);
    Ok(x.iter().copied().collect())
}

/// Random orthogonal matrix: QR of a Gaussian matrix with the sign of `R`'s
/// diagonal folded into `Q`.
fn random_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..p {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// Seeded quadratic family with `max_i L_i / min_i mu_i = kappa`.
///
/// `A_i = Q_i D_i Q_iᵀ` with `Q_i` random orthogonal and the entries of `D_i`
/// log-uniform in `[1, kappa]`; agent 0 owns eigenvalue 1 and agent `n-1`
/// owns eigenvalue `kappa`, so the ratio is exact. `b_i` is standard normal,
/// rescaled when needed so that `‖x*‖ >= 1`.
pub fn generate_quadratic(
    n: usize,
    p: usize,
    kappa: f64,
    seed: u64,
) -> Result<QuadraticProblem, ObjectiveError> {
    if !(kappa >= 1.0) {
        return Err(ObjectiveError::BadKappa(kappa));
    }
    if p < 2 {
        return Err(ObjectiveError::DimensionTooSmall(p));
    }
    if n == 0 {
        return Err(ObjectiveError::NoAgents);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_kappa = kappa.ln();
    let mut a = Vec::with_capacity(n);
    let mut lipschitz = Vec::with_capacity(n);
    let mut strong = Vec::with_capacity(n);
    for i in 0..n {
        let q = random_orthogonal(p, &mut rng);
        let mut d: Vec<f64> = (0..p)
            .map(|_| (rng.random::<f64>() * log_kappa).exp())
            .collect();
        if i == 0 {
            d[0] = 1.0;
        }
        if i == n - 1 {
            d[p - 1] = kappa;
        }
        let ai = if kappa == 1.0 {
            let mut m = vec![0.0; p * p];
            (0..p).for_each(|r| m[r * p + r] = 1.0);
            m
        } else {
            let qd = &q * DMatrix::from_diagonal(&DVector::from_vec(d.clone()));
            let m = &qd * q.transpose();
            let mut out = vec![0.0; p * p];
            for r in 0..p {
                for c in 0..p {
                    out[r * p + c] = 0.5 * (m[(r, c)] + m[(c, r)]);
                }
            }
            out
        };
        a.push(ai);
        lipschitz.push(d.iter().copied().fold(0.0, f64::max));
        strong.push(d.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut problem = QuadraticProblem {
        p,
        a,
        b,
        lipschitz,
        strong,
        kappa: Some(kappa),
        seed: Some(seed),
    };
    let x_norm = linalg::norm(&quadratic_optimum(&problem)?.x_star);
    if x_norm < 1.0 {
        problem.scale_b(1.0 / x_norm.max(f64::MIN_POSITIVE));
    }
    Ok(problem)
}

/// Exact optimum of `sum_i f_i` by a dense Cholesky solve of
/// `(sum A_i) x = -sum b_i`.
pub fn quadratic_optimum(problem: &QuadraticProblem) -> Result<GroundTruth, ObjectiveError> {
    let p = problem.p;
    let s = problem.hessian_sum();
    let neg_b: Vec<f64> = problem.b_sum().iter().map(|v| -v).collect();
    let x_star = spd_solve(p, &s, &neg_b)?;
    let local = (0..problem.n())
        .map(|i| problem.local_minimizer(i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut truth = GroundTruth::from_point(problem, x_star);
    truth.local_minimizers = Some(local);
    Ok(truth)
}
