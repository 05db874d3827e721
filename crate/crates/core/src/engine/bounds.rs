use super::{ConsensusSchedule, EngineError, Method};
use crate::iterate::StackedIterate;
use crate::linalg;
use crate::objectives::{aggregate_constants, GroundTruth, LocalObjectiveSet};
use crate::topology::{pow_u64, ConsensusMatrix};

/// Largest stepsize covered by the convergence theory.
///
/// DGD/DGD^t: `min{(1 + λ_n(W^t))/L, c4}`. NEAR-DGD: `min{1/L, c4}`.
/// `t` is ignored for NEAR-DGD and forced to 1 for DGD.
pub fn max_stepsize(
    method: Method,
    objectives: &dyn LocalObjectiveSet,
    w: &ConsensusMatrix,
    t: u32,
) -> f64 {
    let agg = aggregate_constants(objectives);
    let c4 = 2.0 / (agg.mu_bar + agg.l_bar);
    let l = agg.l_max;
    match method {
        Method::Dgd => ((1.0 + w.spectrum().lambda_min_pow(1)) / l).min(c4),
        Method::DgdT => ((1.0 + w.spectrum().lambda_min_pow(t.max(1))) / l).min(c4),
        Method::NearDgd => (1.0 / l).min(c4),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundKind {
    /// Fixed `t` DGD^t: neighborhood term `c3² / (1 - β^t)²` per step.
    DgdT { t: u64 },
    /// NEAR-DGD with schedule `t(k)`: term `c3² β^{2 t(k)}` at step `k`.
    Near { schedule: ConsensusSchedule },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryBounds {
    pub kind: BoundKind,
    pub alpha: f64,
    pub beta: f64,
    /// `max_i L_i`
    pub l: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub delta: f64,
    pub d: f64,
    pub nu: f64,
    pub gamma: f64,
    /// `‖x̄_0 - x*‖`
    pub e0: f64,
}

impl TheoryBounds {
    /// Squared additive term of the one-step inequality at 1-based step `k`.
    pub fn step_term(&self, k: u64) -> f64 {
        match &self.kind {
            BoundKind::DgdT { t } => {
                let gap = 1.0 - pow_u64(self.beta, *t);
                self.c3 * self.c3 / (gap * gap)
            }
            BoundKind::Near { schedule } => {
                let bt = pow_u64(self.beta, schedule.rounds(k));
                self.c3 * self.c3 * bt * bt
            }
        }
    }

    /// Upper bounds on `‖x̄_k - x*‖` for `k = 0..=k_max`, from the one-step
    /// inequality `e_k² ≤ c1² e_{k-1}² + term(k)` applied recursively.
    pub fn bound_series(&self, k_max: u64) -> Vec<f64> {
        let c1_sq = self.c1 * self.c1;
        let mut sq = self.e0 * self.e0;
        let mut out = Vec::with_capacity(k_max as usize + 1);
        out.push(self.e0);
        for k in 1..=k_max {
            sq = c1_sq * sq + self.step_term(k);
            out.push(sq.sqrt());
        }
        out
    }

    /// Closed form `c1^k e0 + neighborhood` for fixed `t`; `None` for
    /// time-varying schedules.
    pub fn closed_form(&self, k: u64) -> Option<f64> {
        let root = (1.0 - self.c1 * self.c1).sqrt();
        let neighborhood = match &self.kind {
            BoundKind::DgdT { t } => self.c3 / (root * (1.0 - pow_u64(self.beta, *t))),
            BoundKind::Near {
                schedule: ConsensusSchedule::Fixed(t),
            } => self.c3 * pow_u64(self.beta, *t) / root,
            BoundKind::Near { .. } => return None,
        };
        Some(pow_u64(self.c1, k) * self.e0 + neighborhood)
    }

    /// `(C, ρ)` with `‖x̄_k - x*‖ ≤ C ρ^k`, for the linear schedule only.
    pub fn r_linear(&self) -> Option<(f64, f64)> {
        match self.kind {
            BoundKind::Near {
                schedule: ConsensusSchedule::Linear,
            } => {
                let ac2 = self.alpha * self.c2;
                let c = self.e0.max(2.0 * self.c3 / ac2.sqrt());
                let rho = self.beta.max((1.0 - ac2 / 4.0).sqrt());
                Some((c, rho))
            }
            _ => None,
        }
    }
}

/// Theory constants for `method` run with stepsize `alpha` from `y0`.
///
/// Rejects stepsizes above [`max_stepsize`], `a > 1` configurations are not
/// representable here since the bounds assume one gradient step.
pub fn theory_bounds(
    method: Method,
    objectives: &dyn LocalObjectiveSet,
    w: &ConsensusMatrix,
    alpha: f64,
    schedule: ConsensusSchedule,
    truth: &GroundTruth,
    y0: &StackedIterate,
) -> Result<TheoryBounds, EngineError> {
    let n = objectives.n();
    let p = objectives.p();
    if y0.n() != n || y0.p() != p || truth.x_star.len() != p {
        return Err(EngineError::DimensionMismatch(
            "initial iterate, objectives and optimum disagree".into(),
        ));
    }
    let kind = match (method, schedule) {
        (Method::Dgd, ConsensusSchedule::Fixed(1)) => BoundKind::DgdT { t: 1 },
        (Method::DgdT, ConsensusSchedule::Fixed(t)) => BoundKind::DgdT { t },
        (Method::NearDgd, schedule) => BoundKind::Near { schedule },
        _ => {
            return Err(EngineError::InvalidConfig(format!(
                "no bound for {method} with schedule {schedule}"
            )))
        }
    };
    let t_bound = match kind {
        BoundKind::DgdT { t } => t.min(u32::MAX as u64) as u32,
        BoundKind::Near { .. } => 1,
    };
    let bound = max_stepsize(method, objectives, w, t_bound);
    if !(alpha > 0.0) || alpha > bound * (1.0 + 1e-12) {
        return Err(EngineError::StepsizeTooLarge { alpha, bound });
    }

    let agg = aggregate_constants(objectives);
    let c2 = 2.0 * agg.mu_bar * agg.l_bar / (agg.mu_bar + agg.l_bar);
    let c4 = 2.0 / (agg.mu_bar + agg.l_bar);
    let ac2 = alpha * c2;
    if ac2 >= 1.0 {
        return Err(EngineError::StepsizeTooLarge {
            alpha,
            bound: 1.0 / c2,
        });
    }
    let delta = c2 / (2.0 * (1.0 - ac2));
    let c1 = (1.0 - alpha * c2 + alpha * delta - alpha * alpha * delta * c2).sqrt();
    let l = agg.l_max;

    let gamma = (0..n)
        .map(|i| {
            let (mu, li) = (objectives.strong_convexity(i), objectives.lipschitz(i));
            mu * li / (mu + li)
        })
        .fold(f64::INFINITY, f64::min);
    let nu = 2.0 * alpha * gamma;

    let u_star = truth.local_minimizers(objectives)?;
    let (d, c3) = match kind {
        BoundKind::DgdT { .. } => {
            if y0.as_slice().iter().any(|&v| v != 0.0) {
                return Err(EngineError::InvalidConfig(
                    "DGD^t bounds assume a zero start".into(),
                ));
            }
            let zero = vec![0.0; p];
            let gap: f64 = (0..n)
                .map(|i| objectives.value(i, &zero) - objectives.value(i, &u_star[i]))
                .sum();
            let d = (2.0 * l * gap.max(0.0)).sqrt();
            let c3 = (alpha.powi(3) * (alpha + 1.0 / delta)).sqrt() * l * d;
            (d, c3)
        }
        BoundKind::Near { .. } => {
            let mut dev_sq = 0.0;
            let mut u_sq = 0.0;
            for (i, u) in u_star.iter().enumerate() {
                dev_sq += linalg::dist_sq(y0.block(i), u);
                u_sq += linalg::norm_sq(u);
            }
            let d = dev_sq.sqrt() + (nu + 4.0) / nu * u_sq.sqrt();
            let c3 = (alpha * (alpha + 1.0 / delta)).sqrt() * d * l;
            (d, c3)
        }
    };

    Ok(TheoryBounds {
        kind,
        alpha,
        beta: w.beta(),
        l,
        c1,
        c2,
        c3,
        c4,
        delta,
        d,
        nu,
        gamma,
        e0: linalg::dist(&y0.mean(), &truth.x_star),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{generate_quadratic, quadratic_optimum, QuadraticProblem};
    use crate::topology::{build_topology, metropolis_weights, TopologyKind};

    fn diag_problem(diags: &[(f64, f64)]) -> QuadraticProblem {
        let a = diags.iter().map(|&(x, y)| vec![x, 0.0, 0.0, y]).collect();
        let b = diags.iter().map(|_| vec![1.0, -1.0]).collect();
        QuadraticProblem::from_parts(a, b).unwrap()
    }

    #[test]
    fn complete_graph_bound_is_one_over_l() {
        let w = metropolis_weights(&build_topology(TopologyKind::Complete, 3).unwrap()).unwrap();
        let f = diag_problem(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        assert!((max_stepsize(Method::Dgd, &f, &w, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_bound_arithmetic() {
        // L = 2, mean mu = 1, mean L = 2
        let f = diag_problem(&[(1.0, 2.0), (1.0, 2.0)]);
        let w = metropolis_weights(&build_topology(TopologyKind::Complete, 2).unwrap()).unwrap();
        assert!((max_stepsize(Method::NearDgd, &f, &w, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn path_three_squared_has_zero_lambda_min() {
        let w = metropolis_weights(&build_topology(TopologyKind::Path, 3).unwrap()).unwrap();
        let f = diag_problem(&[(0.01, 0.02); 3]);
        // c4 = 2/0.03 is far above 1/L = 50
        let b = max_stepsize(Method::DgdT, &f, &w, 2);
        assert!((b - 50.0).abs() < 1e-9);
    }

    fn setup(kappa: f64) -> (QuadraticProblem, ConsensusMatrix, GroundTruth) {
        let q = generate_quadratic(10, 10, kappa, 11).unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Cyclic { k: 4 }, 10).unwrap())
            .unwrap();
        let truth = quadratic_optimum(&q).unwrap();
        (q, w, truth)
    }

    #[test]
    fn delta_choice_gives_c1_closed_form() {
        let (q, w, truth) = setup(100.0);
        let y0 = StackedIterate::zeros(10, 10);
        let alpha = 0.9 * max_stepsize(Method::NearDgd, &q, &w, 1);
        let b = theory_bounds(Method::NearDgd, &q, &w, alpha, ConsensusSchedule::Linear, &truth, &y0)
            .unwrap();
        assert!((b.c1 * b.c1 - (1.0 - alpha * b.c2 / 2.0)).abs() < 1e-14);
        assert!(b.c1 > 0.0 && b.c1 < 1.0);
        assert!(b.nu > 0.0 && b.nu < 1.0);
        let (_, rho) = b.r_linear().unwrap();
        assert!(rho >= b.beta && rho < 1.0);
    }

    #[test]
    fn r_linear_dominates_recursive_series() {
        let (q, w, truth) = setup(1e4);
        let y0 = StackedIterate::zeros(10, 10);
        let alpha = 0.9 * max_stepsize(Method::NearDgd, &q, &w, 1);
        let b = theory_bounds(Method::NearDgd, &q, &w, alpha, ConsensusSchedule::Linear, &truth, &y0)
            .unwrap();
        let (c, rho) = b.r_linear().unwrap();
        for (k, e) in b.bound_series(300).iter().enumerate() {
            assert!(*e <= c * rho.powi(k as i32) * (1.0 + 1e-12), "k = {k}");
        }
    }

    #[test]
    fn recursive_series_below_closed_form() {
        let (q, w, truth) = setup(100.0);
        let y0 = StackedIterate::zeros(10, 10);
        let alpha = 0.9 * max_stepsize(Method::DgdT, &q, &w, 5);
        let b = theory_bounds(Method::DgdT, &q, &w, alpha, ConsensusSchedule::Fixed(5), &truth, &y0)
            .unwrap();
        for (k, e) in b.bound_series(200).iter().enumerate() {
            assert!(*e <= b.closed_form(k as u64).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rejects_large_stepsize_and_nonzero_dgd_start() {
        let (q, w, truth) = setup(100.0);
        let y0 = StackedIterate::zeros(10, 10);
        let bound = max_stepsize(Method::NearDgd, &q, &w, 1);
        assert!(matches!(
            theory_bounds(Method::NearDgd, &q, &w, 1.5 * bound, ConsensusSchedule::Linear, &truth, &y0),
            Err(EngineError::StepsizeTooLarge { .. })
        ));
        let ones = StackedIterate::replicated(10, &[1.0; 10]);
        let alpha = 0.5 * max_stepsize(Method::Dgd, &q, &w, 1);
        assert!(theory_bounds(Method::Dgd, &q, &w, alpha, ConsensusSchedule::Fixed(1), &truth, &ones)
            .is_err());
    }
}
