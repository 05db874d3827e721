//! Local objective families and their ground-truth optima.

mod logistic;
mod quadratic;

pub use logistic::{build_logistic, LogisticProblem};
pub use quadratic::{generate_quadratic, quadratic_optimum, QuadraticProblem};

use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("condition number must be >= 1, got {0}")]
    BadKappa(f64),
    #[error("dimension must be >= 2 to realize a condition number, got {0}")]
    DimensionTooSmall(usize),
    #[error("need at least one agent")]
    NoAgents,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("aggregate Hessian is singular or indefinite")]
    NotPositiveDefinite,
    #[error("shard {0} is empty")]
    EmptyShard(usize),
    #[error("label {label} in shard {shard} is not +1 or -1")]
    BadLabel { shard: usize, label: f64 },
    #[error("objective is not strongly convex (sum of mu_i is {0})")]
    NotStronglyConvex(f64),
    #[error("gradient descent did not reach tolerance {tol:e} within {iters} iterations (last {last:e})")]
    NotConverged { tol: f64, iters: usize, last: f64 },
}

/// `n` local functions `f_i: R^p -> R` with curvature constants.
pub trait LocalObjectiveSet: Send + Sync {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn value(&self, i: usize, x: &[f64]) -> f64;
    /// Writes `∇f_i(x)` into `out`.
    fn gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]);
    /// Lipschitz constant of `∇f_i`.
    fn lipschitz(&self, i: usize) -> f64;
    /// Strong convexity modulus of `f_i`.
    fn strong_convexity(&self, i: usize) -> f64;

    /// Minimizer of `f_i` alone.
    fn local_minimizer(&self, i: usize) -> Result<Vec<f64>, ObjectiveError> {
        let (l, mu) = (self.lipschitz(i), self.strong_convexity(i));
        if mu <= 0.0 {
            return Err(ObjectiveError::NotStronglyConvex(mu));
        }
        let mut g0 = vec![0.0; self.p()];
        self.gradient_into(i, &vec![0.0; self.p()], &mut g0);
        let tol = 1e-12 * (1.0 + linalg::norm(&g0));
        gradient_descent(
            self.p(),
            |x, g| self.gradient_into(i, x, g),
            2.0 / (l + mu),
            tol,
            DEFAULT_ITERATION_CAP,
        )
        .map(|(x, _)| x)
    }

    /// Short text describing the problem instance, used in trace manifests.
    fn describe(&self) -> String;

    fn gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.p()];
        self.gradient_into(i, x, &mut g);
        g
    }

    /// `sum_i f_i(x)` at a shared point.
    fn total_value(&self, x: &[f64]) -> f64 {
        (0..self.n()).map(|i| self.value(i, x)).sum()
    }

    /// `sum_i ∇f_i(x)` at a shared point, summed in agent order.
    fn total_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut total = vec![0.0; self.p()];
        let mut g = vec![0.0; self.p()];
        for i in 0..self.n() {
            self.gradient_into(i, x, &mut g);
            linalg::axpy(1.0, &g, &mut total);
        }
        total
    }
}

/// Reference optimum of `min_x sum_i f_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// `‖sum_i ∇f_i(x_star)‖` at the returned point.
    pub tolerance: f64,
    /// Per-agent minimizers `u_i*`, when cheaply available.
    pub local_minimizers: Option<Vec<Vec<f64>>>,
}

impl GroundTruth {
    pub fn from_point(objectives: &dyn LocalObjectiveSet, x_star: Vec<f64>) -> Self {
        let f_star = objectives.total_value(&x_star);
        let tolerance = linalg::norm(&objectives.total_gradient(&x_star));
        Self {
            x_star,
            f_star,
            tolerance,
            local_minimizers: None,
        }
    }

    /// `u_i*` for every agent, computing them if not cached.
    pub fn local_minimizers(
        &self,
        objectives: &dyn LocalObjectiveSet,
    ) -> Result<Vec<Vec<f64>>, ObjectiveError> {
        match &self.local_minimizers {
            Some(u) => Ok(u.clone()),
            None => (0..objectives.n())
                .map(|i| objectives.local_minimizer(i))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateConstants {
    /// `max_i L_i`
    pub l_max: f64,
    /// `(1/n) sum_i L_i`
    pub l_bar: f64,
    /// `(1/n) sum_i mu_i`
    pub mu_bar: f64,
}

pub fn aggregate_constants(objectives: &dyn LocalObjectiveSet) -> AggregateConstants {
    let n = objectives.n();
    let ls: Vec<f64> = (0..n).map(|i| objectives.lipschitz(i)).collect();
    let mus: f64 = (0..n).map(|i| objectives.strong_convexity(i)).sum();
    AggregateConstants {
        l_max: ls.iter().copied().fold(0.0, f64::max),
        l_bar: ls.iter().sum::<f64>() / n as f64,
        mu_bar: mus / n as f64,
    }
}

pub const DEFAULT_ITERATION_CAP: usize = 5_000_000;

/// Default reference tolerance: `1e-12 (1 + ‖sum_i ∇f_i(0)‖)`.
pub fn default_reference_tolerance(objectives: &dyn LocalObjectiveSet) -> f64 {
    let g0 = objectives.total_gradient(&vec![0.0; objectives.p()]);
    1e-12 * (1.0 + linalg::norm(&g0))
}

/// Centralized gradient descent on `sum_i f_i` with stepsize `2/(sum L_i + sum mu_i)`.
pub fn centralized_solve(
    objectives: &dyn LocalObjectiveSet,
    tol: f64,
) -> Result<GroundTruth, ObjectiveError> {
    centralized_solve_capped(objectives, tol, DEFAULT_ITERATION_CAP)
}

pub fn centralized_solve_capped(
    objectives: &dyn LocalObjectiveSet,
    tol: f64,
    max_iters: usize,
) -> Result<GroundTruth, ObjectiveError> {
    let n = objectives.n();
    let l_sum: f64 = (0..n).map(|i| objectives.lipschitz(i)).sum();
    let mu_sum: f64 = (0..n).map(|i| objectives.strong_convexity(i)).sum();
    if mu_sum <= 0.0 {
        return Err(ObjectiveError::NotStronglyConvex(mu_sum));
    }
    let step = 2.0 / (l_sum + mu_sum);
    let (x_star, achieved) = gradient_descent(
        objectives.p(),
        |x, g| {
            let total = objectives.total_gradient(x);
            g.copy_from_slice(&total);
        },
        step,
        tol,
        max_iters,
    )?;
    Ok(GroundTruth {
        f_star: objectives.total_value(&x_star),
        x_star,
        tolerance: achieved,
        local_minimizers: None,
    })
}

fn gradient_descent(
    p: usize,
    mut grad: impl FnMut(&[f64], &mut [f64]),
    step: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, f64), ObjectiveError> {
    let mut x = vec![0.0; p];
    let mut g = vec![0.0; p];
    let mut gnorm = f64::INFINITY;
    for _ in 0..=max_iters {
        grad(&x, &mut g);
        gnorm = linalg::norm(&g);
        if gnorm <= tol {
            return Ok((x, gnorm));
        }
        if !gnorm.is_finite() {
            break;
        }
        linalg::axpy(-step, &g, &mut x);
    }
    Err(ObjectiveError::NotConverged {
        tol,
        iters: max_iters,
        last: gnorm,
    })
}
