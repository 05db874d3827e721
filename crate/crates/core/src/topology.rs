//! Communication graphs, Metropolis consensus matrices, and their spectra.
//!
//! A [`ConsensusMatrix`] is validated on construction (symmetric, doubly
//! stochastic, positive diagonal, single unit eigenvalue) and carries its
//! spectral data so the engine can evaluate stepsize limits and bounds
//! without re-decomposing.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::iterate::StackedIterate;
use crate::linalg;

/// Absolute tolerance on entries, row sums and symmetry.
pub const ENTRY_TOL: f64 = 1e-12;
/// Distance from 1 within which an eigenvalue counts as the unit eigenvalue.
pub const UNIT_EIGEN_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("a network needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("cyclic connectivity k={k} must be even and satisfy 2 <= k <= n-1 (n={n})")]
    BadCyclicDegree { n: usize, k: usize },
    #[error("topology is disconnected")]
    Disconnected,
    #[error("invalid edge ({0}, {1})")]
    BadEdge(usize, usize),
    #[error("matrix is not square: {len} entries for n={n}")]
    NotSquare { n: usize, len: usize },
    #[error("matrix violates {0}")]
    InvalidMatrix(String),
    #[error("expected exactly one eigenvalue at 1, found {0}")]
    UnitEigenvalueCount(usize),
    #[error("iterate has {got} blocks, matrix has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("consensus round count must be at least 1")]
    ZeroRounds,
    #[error("unknown topology kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    /// Ring where every agent talks to its `k/2` nearest neighbours on each side.
    Cyclic { k: usize },
    Path,
    Star,
    Complete,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Cyclic { k } => write!(f, "cyclic_{k}"),
            TopologyKind::Path => f.write_str("path"),
            TopologyKind::Star => f.write_str("star"),
            TopologyKind::Complete => f.write_str("complete"),
        }
    }
}

impl TopologyKind {
    /// Parses `path`, `star`, `complete`, or `cyclic` together with a degree.
    pub fn parse(kind: &str, k: Option<usize>) -> Result<Self, TopologyError> {
        match kind.trim().to_ascii_lowercase().as_str() {
            "path" => Ok(TopologyKind::Path),
            "star" => Ok(TopologyKind::Star),
            "complete" => Ok(TopologyKind::Complete),
            "cyclic" | "cyclic_k" | "ring" => Ok(TopologyKind::Cyclic { k: k.unwrap_or(2) }),
            other => match other.strip_prefix("cyclic_") {
                Some(deg) => deg
                    .parse()
                    .map(|k| TopologyKind::Cyclic { k })
                    .map_err(|_| TopologyError::UnknownKind(kind.to_string())),
                None => Err(TopologyError::UnknownKind(kind.to_string())),
            },
        }
    }
}

impl FromStr for TopologyKind {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, None)
    }
}

/// Undirected connected graph over agents `0..n`, no self loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    n: usize,
    neighbors: Vec<Vec<usize>>,
}

impl NetworkTopology {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::TooFewAgents(n));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(TopologyError::BadEdge(a, b));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        let topo = Self { n, neighbors };
        if !topo.is_connected() {
            return Err(TopologyError::Disconnected);
        }
        Ok(topo)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Neighbours of `i`, ascending, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == self.n
    }
}

pub fn build_topology(kind: TopologyKind, n: usize) -> Result<NetworkTopology, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewAgents(n));
    }
    let mut edges = Vec::new();
    match kind {
        TopologyKind::Cyclic { k } => {
            if k < 2 || k >= n || k % 2 != 0 {
                return Err(TopologyError::BadCyclicDegree { n, k });
            }
            for i in 0..n {
                for step in 1..=k / 2 {
                    edges.push((i, (i + step) % n));
                }
            }
        }
        TopologyKind::Path => edges.extend((0..n - 1).map(|i| (i, i + 1))),
        TopologyKind::Star => edges.extend((1..n).map(|i| (0, i))),
        TopologyKind::Complete => {
            for i in 0..n {
                edges.extend((i + 1..n).map(|j| (i, j)));
            }
        }
    }
    NetworkTopology::from_edges(n, &edges)
}

/// Eigen-data of a consensus matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Second-largest eigenvalue magnitude (the unit eigenvalue excluded).
    pub beta: f64,
    /// Smallest eigenvalue.
    pub lambda_min: f64,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Smallest eigenvalue of `W^t`, exact for symmetric `W`.
    pub fn lambda_min_pow(&self, t: u32) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.powi(t as i32))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn beta_pow(&self, t: u64) -> f64 {
        pow_u64(self.beta, t)
    }
}

/// `base^t` for large `t` without overflowing the `powi` exponent.
pub(crate) fn pow_u64(base: f64, t: u64) -> f64 {
    if t <= i32::MAX as u64 {
        base.powi(t as i32)
    } else {
        base.powf(t as f64)
    }
}

/// Spectral data of a symmetric matrix given row-major.
pub fn spectral_analysis(n: usize, entries: &[f64]) -> Result<Spectrum, TopologyError> {
    if entries.len() != n * n {
        return Err(TopologyError::NotSquare {
            n,
            len: entries.len(),
        });
    }
    let eigenvalues = linalg::symmetric_eigenvalues(n, entries);
    let unit: Vec<usize> = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| (*l - 1.0).abs() <= UNIT_EIGEN_TOL)
        .map(|(i, _)| i)
        .collect();
    if unit.len() != 1 {
        return Err(TopologyError::UnitEigenvalueCount(unit.len()));
    }
    let beta = eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != unit[0])
        .map(|(_, l)| l.abs())
        .fold(0.0, f64::max);
    let lambda_min = *eigenvalues.last().expect("n >= 1");
    Ok(Spectrum {
        beta,
        lambda_min,
        eigenvalues,
    })
}

/// Symmetric doubly-stochastic mixing matrix with cached spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMatrix {
    n: usize,
    entries: Vec<f64>,
    /// Row `i`: `(j, W_ij)` for every nonzero, ascending `j`, self included.
    rows: Vec<Vec<(usize, f64)>>,
    spectrum: Spectrum,
}

impl ConsensusMatrix {
    /// Validates a dense row-major matrix.
    pub fn from_dense(n: usize, entries: Vec<f64>) -> Result<Self, TopologyError> {
        if n == 0 || entries.len() != n * n {
            return Err(TopologyError::NotSquare {
                n,
                len: entries.len(),
            });
        }
        let at = |i: usize, j: usize| entries[i * n + j];
        for i in 0..n {
            if at(i, i) <= 0.0 {
                return Err(TopologyError::InvalidMatrix(format!(
                    "positive diagonal at {i}"
                )));
            }
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..n {
                if at(i, j) < 0.0 {
                    return Err(TopologyError::InvalidMatrix(format!(
                        "nonnegativity at ({i},{j})"
                    )));
                }
                if (at(i, j) - at(j, i)).abs() > ENTRY_TOL {
                    return Err(TopologyError::InvalidMatrix(format!("symmetry at ({i},{j})")));
                }
                row += at(i, j);
                col += at(j, i);
            }
            if (row - 1.0).abs() > ENTRY_TOL || (col - 1.0).abs() > ENTRY_TOL {
                return Err(TopologyError::InvalidMatrix(format!(
                    "stochasticity of row/column {i}"
                )));
            }
        }
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| at(i, j) != 0.0)
                    .map(|j| (j, at(i, j)))
                    .collect()
            })
            .collect();
        let spectrum = spectral_analysis(n, &entries)?;
        Ok(Self {
            n,
            entries,
            rows,
            spectrum,
        })
    }

    /// The `1 x 1` matrix `[1]`; a single agent never communicates.
    pub fn single_agent() -> Self {
        Self::from_dense(1, vec![1.0]).expect("[1] is a valid consensus matrix")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn beta(&self) -> f64 {
        self.spectrum.beta
    }

    pub fn lambda_min(&self) -> f64 {
        self.spectrum.lambda_min
    }

    /// Dense `W^t` by repeated multiplication.
    pub fn dense_power(&self, t: u32) -> Vec<f64> {
        let n = self.n;
        let mut acc = identity(n);
        for _ in 0..t {
            let mut next = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let a = acc[i * n + k];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        next[i * n + j] += a * self.entries[k * n + j];
                    }
                }
            }
            acc = next;
        }
        acc
    }

    /// Row-major CSV with shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{}", self.entry(i, j)).expect("writing to String");
            }
            out.push('\n');
        }
        out
    }

    /// One round into `dst`: block `i` becomes `sum_j W_ij src_j`, ascending `j`.
    pub(crate) fn mix_into(&self, p: usize, src: &[f64], dst: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let out = &mut dst[i * p..(i + 1) * p];
            out.fill(0.0);
            for &(j, w) in row {
                linalg::axpy(w, &src[j * p..(j + 1) * p], out);
            }
        }
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// Metropolis–Hastings weights: `W_ij = 1/(1 + max(d_i, d_j))` on edges,
/// the remaining mass on the diagonal.
pub fn metropolis_weights(topology: &NetworkTopology) -> Result<ConsensusMatrix, TopologyError> {
    let n = topology.n();
    let deg = topology.degrees();
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for &j in topology.neighbors(i) {
            w[i * n + j] = 1.0 / (1 + deg[i].max(deg[j])) as f64;
        }
    }
    for i in 0..n {
        let off: f64 = topology.neighbors(i).iter().map(|&j| w[i * n + j]).sum();
        let diag = 1.0 - off;
        assert!(diag > 0.0, "Metropolis diagonal must be positive");
        w[i * n + i] = diag;
    }
    let m = ConsensusMatrix::from_dense(n, w)?;
    assert!(m.beta() < 1.0, "connected topology must have beta < 1");
    Ok(m)
}

/// `(W^t ⊗ I_p) x` by `t` successive blockwise applications of `W`.
pub fn consensus_apply(
    w: &ConsensusMatrix,
    x: &StackedIterate,
    t: u64,
) -> Result<StackedIterate, TopologyError> {
    if x.n() != w.n() {
        return Err(TopologyError::DimensionMismatch {
            expected: w.n(),
            got: x.n(),
        });
    }
    if t == 0 {
        return Err(TopologyError::ZeroRounds);
    }
    let p = x.p();
    let mut cur = x.clone();
    let mut next = StackedIterate::zeros(x.n(), p);
    for _ in 0..t {
        w.mix_into(p, cur.as_slice(), next.as_mut_slice());
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}
