use std::fmt;

/// The concatenation of `n` local vectors of dimension `p`, stored block after block.
#[derive(Clone, PartialEq)]
pub struct StackedIterate {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl StackedIterate {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![0.0; n * p],
        }
    }

    /// Every agent holds a copy of `point`.
    pub fn replicated(n: usize, point: &[f64]) -> Self {
        let p = point.len();
        let mut data = Vec::with_capacity(n * p);
        for _ in 0..n {
            data.extend_from_slice(point);
        }
        Self { n, p, data }
    }

    pub fn from_blocks<B: AsRef<[f64]>>(blocks: &[B]) -> Option<Self> {
        let n = blocks.len();
        let p = blocks.first().map(|b| b.as_ref().len())?;
        let mut data = Vec::with_capacity(n * p);
        for b in blocks {
            let b = b.as_ref();
            if b.len() != p {
                return None;
            }
            data.extend_from_slice(b);
        }
        Some(Self { n, p, data })
    }

    pub fn from_flat(n: usize, p: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == n * p).then_some(Self { n, p, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p.max(1)).take(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Block average, summed in ascending agent order.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for b in self.blocks() {
            for (acc, v) in m.iter_mut().zip(b) {
                *acc += v;
            }
        }
        let inv = 1.0 / self.n as f64;
        m.iter_mut().for_each(|v| *v *= inv);
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.data)
    }
}

impl fmt::Debug for StackedIterate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StackedIterate")
            .field("n", &self.n)
            .field("p", &self.p)
            .field("blocks", &self.blocks().collect::<Vec<_>>())
            .finish()
    }
}
