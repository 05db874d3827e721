//! Sparse `label idx:val ...` classification data and per-agent sharding.
//!
//! ```text
//! 1 3:0.5 7:1
//! 2 1:1.0
//! ```
//!
//! Labels `{1, 2}` are remapped to `{+1, -1}`; `{+1, -1}` pass through.

use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("dataset is empty")]
    Empty,
    #[error("labels {0:?} cannot be mapped to +1/-1")]
    Labels(Vec<f64>),
    #[error("{rows} rows cannot be split over {agents} agents")]
    TooFewRows { rows: usize, agents: usize },
    #[error("declared dimension {declared} is smaller than max feature index {seen}")]
    Dimension { declared: usize, seen: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: f64,
    /// `(index, value)` with 1-based, strictly increasing indices.
    pub features: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    pub samples: Vec<Sample>,
    /// Max feature index seen (or declared).
    pub p: usize,
}

impl SparseDataset {
    pub fn rows(&self) -> usize {
        self.samples.len()
    }

    /// Zero-pads the feature dimension up to `p`.
    pub fn with_dimension(mut self, p: usize) -> Result<Self, DatasetError> {
        if p < self.p {
            return Err(DatasetError::Dimension {
                declared: p,
                seen: self.p,
            });
        }
        self.p = p;
        Ok(self)
    }

    /// Scales every sample to unit Euclidean norm (off unless requested).
    pub fn normalize_rows(&mut self) {
        for s in &mut self.samples {
            let norm = s.features.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                s.features.iter_mut().for_each(|(_, v)| *v /= norm);
            }
        }
    }

    /// Dense row for sample `r`.
    pub fn dense_row(&self, r: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.p];
        for &(j, v) in &self.samples[r].features {
            row[j as usize - 1] = v;
        }
        row
    }
}

pub fn parse_sparse_text<R: BufRead>(reader: R) -> Result<SparseDataset, DatasetError> {
    let mut samples = Vec::new();
    let mut p = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let malformed = |reason: String| DatasetError::Malformed {
            line: lineno,
            reason,
        };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| malformed(format!("bad label {label_tok:?}")))?;
        let mut features = Vec::new();
        let mut last = 0u32;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| malformed(format!("expected idx:val, got {tok:?}")))?;
            let idx: u32 = idx
                .parse()
                .map_err(|_| malformed(format!("bad index {idx:?}")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| malformed(format!("bad value {val:?}")))?;
            if idx == 0 || idx <= last {
                return Err(malformed(format!("index {idx} is not increasing")));
            }
            last = idx;
            features.push((idx, val));
        }
        p = p.max(last as usize);
        samples.push(Sample { label, features });
    }
    if samples.is_empty() {
        return Err(DatasetError::Empty);
    }
    remap_labels(&mut samples)?;
    Ok(SparseDataset { samples, p })
}

fn remap_labels(samples: &mut [Sample]) -> Result<(), DatasetError> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.label).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let pm_one = distinct.iter().all(|&l| l == 1.0 || l == -1.0);
    let one_two = distinct.iter().all(|&l| l == 1.0 || l == 2.0);
    if pm_one {
        return Ok(());
    }
    if one_two {
        for s in samples {
            s.label = if s.label == 1.0 { 1.0 } else { -1.0 };
        }
        return Ok(());
    }
    Err(DatasetError::Labels(distinct))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    Contiguous,
    Shuffled,
}

/// One agent's rows in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub p: usize,
    /// Dataset row ids this shard was built from.
    pub source_rows: Vec<usize>,
    pub row_ptr: Vec<usize>,
    /// 0-based column indices.
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
    pub labels: Vec<f64>,
}

impl Shard {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.values[span])
    }

    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let mut shard = Shard {
            p,
            source_rows: (0..rows.len()).collect(),
            row_ptr: vec![0],
            cols: Vec::new(),
            values: Vec::new(),
            labels,
        };
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    shard.cols.push(j);
                    shard.values.push(v);
                }
            }
            shard.row_ptr.push(shard.cols.len());
        }
        shard
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|r| {
                let mut row = vec![0.0; self.p];
                let (cols, vals) = self.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }

    /// `label,f1,...,fp` per row, for audit dumps.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (r, row) in self.to_dense().iter().enumerate() {
            write!(out, "{}", self.labels[r]).expect("writing to String");
            for v in row {
                write!(out, ",{v}").expect("writing to String");
            }
            out.push('\n');
        }
        out
    }
}

/// Splits rows over `n` agents.
///
/// With `equal_size` every shard gets `rows / n` rows and the remainder is
/// dropped; otherwise the first `rows % n` shards get one extra row.
pub fn partition(
    dataset: &SparseDataset,
    n: usize,
    seed: u64,
    mode: PartitionMode,
    equal_size: bool,
) -> Result<Vec<Shard>, DatasetError> {
    let rows = dataset.rows();
    if n == 0 || rows < n {
        return Err(DatasetError::TooFewRows { rows, agents: n });
    }
    let mut order: Vec<usize> = (0..rows).collect();
    if mode == PartitionMode::Shuffled {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let base = rows / n;
    let extra = if equal_size { 0 } else { rows % n };
    let mut shards = Vec::with_capacity(n);
    let mut cursor = 0;
    for i in 0..n {
        let len = base + usize::from(i < extra);
        let ids = &order[cursor..cursor + len];
        cursor += len;
        let mut shard = Shard {
            p: dataset.p,
            source_rows: ids.to_vec(),
            row_ptr: vec![0],
            cols: Vec::new(),
            values: Vec::new(),
            labels: Vec::with_capacity(len),
        };
        for &r in ids {
            let s = &dataset.samples[r];
            for &(j, v) in &s.features {
                shard.cols.push(j as usize - 1);
                shard.values.push(v);
            }
            shard.row_ptr.push(shard.cols.len());
            shard.labels.push(s.label);
        }
        shards.push(shard);
    }
    Ok(shards)
}

/// Seeded one-hot dataset shaped like a categorical benchmark, labelled by a
/// planted linear separator through the origin (so it is separable).
///
/// Each row picks one level from each of `groups` categorical attributes; the
/// attribute widths fill columns `1..=raw_p`.
pub fn synthetic_separable(rows: usize, raw_p: usize, groups: usize, seed: u64) -> SparseDataset {
    assert!(groups >= 1 && raw_p >= groups);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = raw_p / groups;
    let mut starts: Vec<usize> = (0..groups).map(|g| g * width).collect();
    starts.push(raw_p);
    let w: Vec<f64> = (0..raw_p).map(|_| rng.sample(StandardNormal)).collect();
    let mut samples = Vec::with_capacity(rows);
    while samples.len() < rows {
        let mut features = Vec::with_capacity(groups);
        let mut score = 0.0;
        for g in 0..groups {
            let j = rng.random_range(starts[g]..starts[g + 1]);
            features.push((j as u32 + 1, 1.0));
            score += w[j];
        }
        if score == 0.0 {
            continue;
        }
        samples.push(Sample {
            label: score.signum(),
            features,
        });
    }
    SparseDataset { samples, p: raw_p }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_rows() {
        let d = parse_sparse_text("1 3:0.5\n2 1:1.0".as_bytes()).unwrap();
        assert_eq!(d.rows(), 2);
        assert_eq!(d.p, 3);
        assert_eq!(d.samples[0].label, 1.0);
        assert_eq!(d.samples[1].label, -1.0);
        assert_eq!(d.dense_row(0), vec![0.0, 0.0, 0.5]);
    }

    #[test]
    fn empty_file_is_error() {
        assert!(matches!(parse_sparse_text("".as_bytes()), Err(DatasetError::Empty)));
        assert!(matches!(
            parse_sparse_text("\n  \n".as_bytes()),
            Err(DatasetError::Empty)
        ));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = parse_sparse_text("1 1:1\n-1 2:x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 2, .. }), "{err}");
        let err = parse_sparse_text("1 3:1 2:1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 1, .. }));
        let err = parse_sparse_text("a 1:1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 1, .. }));
        let err = parse_sparse_text("1 1-1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 1, .. }));
    }

    #[test]
    fn signed_labels_and_rejects_others() {
        let d = parse_sparse_text("+1 1:1\n-1 2:1\n".as_bytes()).unwrap();
        assert_eq!(d.samples[0].label, 1.0);
        assert_eq!(d.samples[1].label, -1.0);
        assert!(matches!(
            parse_sparse_text("0 1:1\n3 1:1\n".as_bytes()),
            Err(DatasetError::Labels(_))
        ));
    }

    #[test]
    fn pads_dimension() {
        let d = parse_sparse_text("1 3:0.5\n".as_bytes()).unwrap();
        assert_eq!(d.clone().with_dimension(5).unwrap().p, 5);
        assert!(d.with_dimension(2).is_err());
    }

    fn ten_rows() -> SparseDataset {
        let text: String = (0..10).map(|i| format!("{} {}:1\n", 1 + i % 2, i + 1)).collect();
        parse_sparse_text(text.as_bytes()).unwrap()
    }

    #[test]
    fn contiguous_partition() {
        let shards = partition(&ten_rows(), 5, 0, PartitionMode::Contiguous, false).unwrap();
        for (i, s) in shards.iter().enumerate() {
            assert_eq!(s.source_rows, vec![2 * i, 2 * i + 1]);
        }
    }

    #[test]
    fn uneven_and_equal_partitions() {
        let d = ten_rows();
        let sizes: Vec<usize> = partition(&d, 3, 0, PartitionMode::Contiguous, false)
            .unwrap()
            .iter()
            .map(Shard::rows)
            .collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let sizes: Vec<usize> = partition(&d, 3, 0, PartitionMode::Shuffled, true)
            .unwrap()
            .iter()
            .map(Shard::rows)
            .collect();
        assert_eq!(sizes, vec![3, 3, 3]);
        assert!(matches!(
            partition(&d, 11, 0, PartitionMode::Contiguous, false),
            Err(DatasetError::TooFewRows { .. })
        ));
    }

    #[test]
    fn shuffled_is_deterministic() {
        let d = ten_rows();
        let a = partition(&d, 2, 9, PartitionMode::Shuffled, false).unwrap();
        let b = partition(&d, 2, 9, PartitionMode::Shuffled, false).unwrap();
        assert_eq!(a, b);
        let c = partition(&d, 2, 10, PartitionMode::Shuffled, false).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shard_densify_matches_dataset() {
        let d = ten_rows();
        let shards = partition(&d, 2, 3, PartitionMode::Shuffled, false).unwrap();
        for s in &shards {
            for (r, row) in s.to_dense().iter().enumerate() {
                assert_eq!(row, &d.dense_row(s.source_rows[r]));
            }
        }
        assert!(shards[0].to_csv().lines().count() == 5);
    }

    #[test]
    fn synthetic_is_one_hot_and_labelled() {
        let d = synthetic_separable(200, 112, 22, 4);
        assert_eq!(d.rows(), 200);
        assert!(d.samples.iter().all(|s| s.features.len() == 22));
        assert!(d.samples.iter().all(|s| s.label == 1.0 || s.label == -1.0));
        assert!(d.samples.iter().any(|s| s.label == 1.0));
        assert!(d.samples.iter().any(|s| s.label == -1.0));
    }
}
