//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

/// Eigenvalues of a symmetric row-major matrix by cyclic Jacobi rotations,
/// sorted descending.
pub fn jacobi_eigenvalues(n: usize, entries: &[f64]) -> Vec<f64> {
    let mut a = entries.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

pub fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i * n + j] += a[i * n + k] * b[k * n + j];
            }
        }
    }
    c
}

pub fn matpow(n: usize, a: &[f64], t: u32) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect();
    for _ in 0..t {
        out = matmul(n, &out, a);
    }
    out
}

/// `(M ⊗ I_p) x` formed explicitly as an `np × np` matrix.
pub fn kron_apply(n: usize, p: usize, m: &[f64], x: &[f64]) -> Vec<f64> {
    let np = n * p;
    let mut big = vec![0.0; np * np];
    for i in 0..n {
        for j in 0..n {
            for r in 0..p {
                big[(i * p + r) * np + j * p + r] = m[i * n + j];
            }
        }
    }
    (0..np)
        .map(|row| (0..np).map(|col| big[row * np + col] * x[col]).sum())
        .collect()
}

/// Central-difference gradient with step `1e-6 (1 + |x_j|)`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = 1e-6 * (1.0 + x[j].abs());
        probe[j] = x[j] + h;
        let up = f(&probe);
        probe[j] = x[j] - h;
        let down = f(&probe);
        probe[j] = x[j];
        g[j] = (up - down) / (2.0 * h);
    }
    g
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Deterministic pseudo-random values in `[-scale, scale]`.
pub fn lcg_vector(seed: u64, len: usize, scale: f64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..len)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * scale
        })
        .collect()
}
