//! The consensus operator `𝒲[x] = Zx`, the gradient operator
//! `𝒯[x] = x - α∇f(x)`, and the single-step methods built from them.

use super::EngineError;
use crate::iterate::StackedIterate;
use crate::objectives::LocalObjectiveSet;
use crate::topology::{consensus_apply, ConsensusMatrix};

pub fn consensus_operator(
    w: &ConsensusMatrix,
    x: &StackedIterate,
) -> Result<StackedIterate, EngineError> {
    Ok(consensus_apply(w, x, 1)?)
}

fn check_shape(objectives: &dyn LocalObjectiveSet, x: &StackedIterate) -> Result<(), EngineError> {
    if x.n() != objectives.n() || x.p() != objectives.p() {
        return Err(EngineError::DimensionMismatch(format!(
            "iterate is {}x{}, objectives are {}x{}",
            x.n(),
            x.p(),
            objectives.n(),
            objectives.p()
        )));
    }
    Ok(())
}

/// Writes `out_i = base_i - α ∇f_i(at_i)` for every agent.
pub(crate) fn gradient_update_into(
    objectives: &dyn LocalObjectiveSet,
    alpha: f64,
    base: &StackedIterate,
    at: &StackedIterate,
    grad_buf: &mut [f64],
    out: &mut StackedIterate,
) -> Result<(), EngineError> {
    for i in 0..objectives.n() {
        objectives.gradient_into(i, at.block(i), grad_buf);
        if grad_buf.iter().any(|g| !g.is_finite()) {
            return Err(EngineError::NonFiniteGradient { agent: i });
        }
        let src = base.block(i);
        for ((o, b), g) in out.block_mut(i).iter_mut().zip(src).zip(grad_buf.iter()) {
            *o = b - alpha * g;
        }
    }
    Ok(())
}

/// Blockwise `x_i - α∇f_i(x_i)`; one gradient evaluation per agent.
pub fn gradient_operator(
    objectives: &dyn LocalObjectiveSet,
    alpha: f64,
    x: &StackedIterate,
) -> Result<StackedIterate, EngineError> {
    check_shape(objectives, x)?;
    let mut out = StackedIterate::zeros(x.n(), x.p());
    let mut g = vec![0.0; x.p()];
    gradient_update_into(objectives, alpha, x, x, &mut g, &mut out)?;
    Ok(out)
}

/// DGD: `x_{k+1} = Z x_k - α∇f(x_k)`.
pub fn dgd_step(
    w: &ConsensusMatrix,
    objectives: &dyn LocalObjectiveSet,
    alpha: f64,
    x: &StackedIterate,
) -> Result<StackedIterate, EngineError> {
    dgdt_step(w, 1, objectives, alpha, x)
}

/// DGD^t: `x_{k+1} = Z^t x_k - α∇f(x_k)`; the gradient is taken at `x_k`.
pub fn dgdt_step(
    w: &ConsensusMatrix,
    t: u64,
    objectives: &dyn LocalObjectiveSet,
    alpha: f64,
    x: &StackedIterate,
) -> Result<StackedIterate, EngineError> {
    check_shape(objectives, x)?;
    let mixed = consensus_apply(w, x, t)?;
    let mut out = StackedIterate::zeros(x.n(), x.p());
    let mut g = vec![0.0; x.p()];
    gradient_update_into(objectives, alpha, &mixed, x, &mut g, &mut out)?;
    Ok(out)
}

/// NEAR-DGD step: `x_k = Z^t y_k`, then `gradient_steps` applications of 𝒯
/// starting at `x_k`. Returns `(x_k, y_{k+1})`.
///
/// `gradient_steps > 1` is the multi-gradient experimental variant; the
/// convergence theory covers only a single step.
pub fn near_dgd_step(
    w: &ConsensusMatrix,
    t: u64,
    objectives: &dyn LocalObjectiveSet,
    alpha: f64,
    gradient_steps: u32,
    y: &StackedIterate,
) -> Result<(StackedIterate, StackedIterate), EngineError> {
    check_shape(objectives, y)?;
    if gradient_steps == 0 {
        return Err(EngineError::InvalidConfig("gradient_steps must be >= 1".into()));
    }
    let x = consensus_apply(w, y, t)?;
    let mut next = x.clone();
    for _ in 0..gradient_steps {
        next = gradient_operator(objectives, alpha, &next)?;
    }
    Ok((x, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::QuadraticProblem;
    use crate::topology::{build_topology, metropolis_weights, TopologyKind};

    /// `f_i(x) = ½‖x‖²` for `n` agents in dimension `p`.
    fn half_square(n: usize, p: usize) -> QuadraticProblem {
        let mut eye = vec![0.0; p * p];
        (0..p).for_each(|r| eye[r * p + r] = 1.0);
        QuadraticProblem::from_parts(vec![eye; n], vec![vec![0.0; p]; n]).unwrap()
    }

    fn complete(n: usize) -> ConsensusMatrix {
        metropolis_weights(&build_topology(TopologyKind::Complete, n).unwrap()).unwrap()
    }

    fn scalar_blocks(v: &[f64]) -> StackedIterate {
        StackedIterate::from_flat(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn gradient_operator_examples() {
        let f = half_square(1, 1);
        let x = scalar_blocks(&[2.0]);
        assert_eq!(gradient_operator(&f, 0.5, &x).unwrap().as_slice(), &[1.0]);
        assert_eq!(gradient_operator(&f, 0.0, &x).unwrap(), x);
    }

    #[test]
    fn gradient_operator_fixes_local_minimizers() {
        let q = crate::objectives::generate_quadratic(3, 4, 10.0, 5).unwrap();
        let u: Vec<Vec<f64>> = (0..3).map(|i| q.local_minimizer(i).unwrap()).collect();
        let x = StackedIterate::from_blocks(&u).unwrap();
        let y = gradient_operator(&q, 0.05, &x).unwrap();
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dgd_hand_example() {
        // Zx = (1,1), ∇f = (2,0): (1 - 1, 1 - 0)
        let w = complete(2);
        let x = scalar_blocks(&[2.0, 0.0]);
        let next = dgd_step(&w, &half_square(2, 1), 0.5, &x).unwrap();
        assert_eq!(next.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn near_dgd_hand_example() {
        let w = complete(2);
        let y = scalar_blocks(&[2.0, 0.0]);
        let (x, next) = near_dgd_step(&w, 1, &half_square(2, 1), 0.5, 1, &y).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);
        assert_eq!(next.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn dgdt_one_is_dgd() {
        let w = metropolis_weights(&build_topology(TopologyKind::Path, 4).unwrap()).unwrap();
        let q = crate::objectives::generate_quadratic(4, 3, 10.0, 2).unwrap();
        let x = StackedIterate::from_flat(4, 3, (0..12).map(|v| v as f64 * 0.3 - 1.0).collect())
            .unwrap();
        let a = dgd_step(&w, &q, 0.01, &x).unwrap();
        let b = dgdt_step(&w, 1, &q, 0.01, &x).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn zero_stepsize_is_pure_consensus() {
        let w = metropolis_weights(&build_topology(TopologyKind::Path, 3).unwrap()).unwrap();
        let x = scalar_blocks(&[3.0, -1.0, 7.0]);
        let a = dgd_step(&w, &half_square(3, 1), 0.0, &x).unwrap();
        assert_eq!(a, consensus_operator(&w, &x).unwrap());
    }

    #[test]
    fn single_agent_is_gradient_descent() {
        let w = ConsensusMatrix::single_agent();
        let f = half_square(1, 2);
        let x = StackedIterate::from_flat(1, 2, vec![4.0, -2.0]).unwrap();
        assert_eq!(dgd_step(&w, &f, 0.25, &x).unwrap().as_slice(), &[3.0, -1.5]);
    }

    #[test]
    fn near_dgd_with_equal_blocks_is_centralized() {
        let w = metropolis_weights(&build_topology(TopologyKind::Star, 4).unwrap()).unwrap();
        let f = half_square(4, 1);
        let y = scalar_blocks(&[2.0; 4]);
        let (x, next) = near_dgd_step(&w, 3, &f, 0.25, 1, &y).unwrap();
        for v in x.as_slice() {
            assert!((v - 2.0).abs() < 1e-15);
        }
        for v in next.as_slice() {
            assert!((v - 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn near_differs_from_dgd() {
        let w = metropolis_weights(&build_topology(TopologyKind::Path, 3).unwrap()).unwrap();
        let q = crate::objectives::generate_quadratic(3, 2, 10.0, 9).unwrap();
        let y = StackedIterate::from_flat(3, 2, vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.0]).unwrap();
        let dgd = dgd_step(&w, &q, 0.05, &y).unwrap();
        let (_, near) = near_dgd_step(&w, 1, &q, 0.05, 1, &y).unwrap();
        assert_ne!(dgd.as_slice(), near.as_slice());
    }

    #[test]
    fn shape_errors() {
        let w = complete(2);
        let f = half_square(3, 1);
        let x = scalar_blocks(&[1.0, 2.0]);
        assert!(matches!(
            dgd_step(&w, &f, 0.1, &x),
            Err(EngineError::DimensionMismatch(_))
        ));
        assert!(matches!(
            near_dgd_step(&w, 1, &half_square(2, 1), 0.1, 0, &x),
            Err(EngineError::InvalidConfig(_))
        ));
    }
}
