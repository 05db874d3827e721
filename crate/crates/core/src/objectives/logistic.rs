use super::{LocalObjectiveSet, ObjectiveError};
use crate::datasets::Shard;
use crate::linalg;

/// Regularized logistic loss per agent:
/// `f_i(x) = w_i sum_r log(1 + exp(-b_r a_rᵀx)) + w_i ‖x‖²`, `w_i = 1/(n n_i)`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    p: usize,
    shards: Vec<Shard>,
    weights: Vec<f64>,
    lipschitz: Vec<f64>,
    strong: Vec<f64>,
    label: String,
}

impl LogisticProblem {
    pub fn shard(&self, i: usize) -> &Shard {
        &self.shards[i]
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn margins<'a>(&'a self, i: usize, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let shard = &self.shards[i];
        (0..shard.rows()).map(move |r| {
            let (cols, vals) = shard.row(r);
            let ax: f64 = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
            shard.labels[r] * ax
        })
    }
}

/// `log(1 + exp(-z))` without overflow.
fn log1p_exp_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(z))` without overflow.
fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

pub fn build_logistic(shards: Vec<Shard>) -> Result<LogisticProblem, ObjectiveError> {
    let n = shards.len();
    if n == 0 {
        return Err(ObjectiveError::NoAgents);
    }
    let p = shards[0].p;
    let mut weights = Vec::with_capacity(n);
    let mut lipschitz = Vec::with_capacity(n);
    let mut strong = Vec::with_capacity(n);
    for (i, shard) in shards.iter().enumerate() {
        if shard.p != p {
            return Err(ObjectiveError::Shape(format!(
                "shard {i} has dimension {}, expected {p}",
                shard.p
            )));
        }
        if shard.rows() == 0 {
            return Err(ObjectiveError::EmptyShard(i));
        }
        if let Some(&label) = shard.labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(ObjectiveError::BadLabel { shard: i, label });
        }
        let w = 1.0 / (n * shard.rows()) as f64;
        weights.push(w);
        lipschitz.push(spectral_norm_sq(shard) * w / 4.0 + 2.0 * w);
        strong.push(2.0 * w);
    }
    Ok(LogisticProblem {
        p,
        label: format!("logistic(n={n},p={p},rows={})", shards.iter().map(Shard::rows).sum::<usize>()),
        shards,
        weights,
        lipschitz,
        strong,
    })
}

/// `‖A‖₂²` as the top eigenvalue of the Gram matrix `AᵀA`.
fn spectral_norm_sq(shard: &Shard) -> f64 {
    let p = shard.p;
    let mut gram = vec![0.0; p * p];
    for r in 0..shard.rows() {
        let (cols, vals) = shard.row(r);
        for (&a, &va) in cols.iter().zip(vals) {
            for (&b, &vb) in cols.iter().zip(vals) {
                gram[a * p + b] += va * vb;
            }
        }
    }
    linalg::symmetric_eigenvalues(p, &gram)[0].max(0.0)
}

impl LocalObjectiveSet for LogisticProblem {
    fn n(&self) -> usize {
        self.shards.len()
    }

    fn p(&self) -> usize {
        self.p
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let w = self.weights[i];
        let loss: f64 = self.margins(i, x).map(log1p_exp_neg).sum();
        w * loss + w * linalg::norm_sq(x)
    }

    fn gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let w = self.weights[i];
        let shard = &self.shards[i];
        for (o, xi) in out.iter_mut().zip(x) {
            *o = 2.0 * w * xi;
        }
        for (r, z) in self.margins(i, x).enumerate() {
            let coef = -w * shard.labels[r] * sigmoid_neg(z);
            let (cols, vals) = shard.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += coef * v;
            }
        }
    }

    fn lipschitz(&self, i: usize) -> f64 {
        self.lipschitz[i]
    }

    fn strong_convexity(&self, i: usize) -> f64 {
        self.strong[i]
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_feature_row() {
        let n = 1;
        let shard = Shard::from_dense(&[vec![0.0, 0.0]], vec![1.0]);
        let f = build_logistic(vec![shard]).unwrap();
        let x = [0.3, -1.2];
        let w = 1.0 / n as f64;
        let expected = w * 2f64.ln() + w * linalg::norm_sq(&x);
        assert!((f.value(0, &x) - expected).abs() < 1e-15);
        let g = f.gradient(0, &x);
        assert!((g[0] - 2.0 * w * x[0]).abs() < 1e-15);
        assert!((g[1] - 2.0 * w * x[1]).abs() < 1e-15);
    }

    #[test]
    fn value_at_origin_is_log_two_per_sample() {
        let rows = vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 4.0]];
        let shard = Shard::from_dense(&rows, vec![1.0, -1.0, 1.0]);
        let other = Shard::from_dense(&rows[..1], vec![-1.0]);
        let f = build_logistic(vec![shard, other]).unwrap();
        // n = 2, n_0 = 3
        let expected = 3.0 * 2f64.ln() / 6.0;
        assert!((f.value(0, &[0.0, 0.0]) - expected).abs() < 1e-15);
    }

    #[test]
    fn stable_for_huge_margins() {
        assert_eq!(log1p_exp_neg(1e4), 0.0);
        assert!((log1p_exp_neg(-1e4) - 1e4).abs() < 1e-9);
        assert_eq!(sigmoid_neg(1e4), 0.0);
        assert_eq!(sigmoid_neg(-1e4), 1.0);
    }

    #[test]
    fn rejects_bad_shards() {
        let empty = Shard::from_dense(&[], vec![]);
        assert_eq!(
            build_logistic(vec![Shard { p: 2, ..empty }]).unwrap_err(),
            ObjectiveError::EmptyShard(0)
        );
        let bad = Shard::from_dense(&[vec![1.0, 0.0]], vec![2.0]);
        assert!(matches!(
            build_logistic(vec![bad]).unwrap_err(),
            ObjectiveError::BadLabel { .. }
        ));
        let a = Shard::from_dense(&[vec![1.0, 0.0]], vec![1.0]);
        let b = Shard::from_dense(&[vec![1.0, 0.0, 1.0]], vec![1.0]);
        assert!(matches!(
            build_logistic(vec![a, b]).unwrap_err(),
            ObjectiveError::Shape(_)
        ));
    }
}
