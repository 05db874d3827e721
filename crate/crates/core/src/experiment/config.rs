use std::path::{Path, PathBuf};

use super::ExperimentError;
use crate::accounting::CostModel;
use crate::datasets::PartitionMode;
use crate::engine::{ConsensusSchedule, Init, Method};
use crate::topology::TopologyKind;

pub const DEFAULT_QUADRATIC_ITERS: u64 = 5000;
pub const DEFAULT_LOGISTIC_ITERS: u64 = 10000;
pub const DEFAULT_ALPHA_SCALE: f64 = 0.9;

/// Rows and raw feature count of the synthetic stand-in for the categorical
/// benchmark, and its number of one-hot attribute groups.
pub const SYNTHETIC_ROWS: usize = 8124;
pub const SYNTHETIC_RAW_P: usize = 112;
pub const SYNTHETIC_GROUPS: usize = 22;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic {
        n: usize,
        p: usize,
        kappa: f64,
        seed: u64,
    },
    Logistic {
        source: DatasetSource,
        n: usize,
        /// Declared feature dimension; the data is zero-padded up to it.
        p: Option<usize>,
        partition: PartitionMode,
        seed: u64,
        normalize: bool,
    },
}

impl ProblemSpec {
    pub fn n(&self) -> usize {
        match self {
            ProblemSpec::Quadratic { n, .. } | ProblemSpec::Logistic { n, .. } => *n,
        }
    }

    /// One-line description, also used to check that traces share a problem.
    pub fn describe(&self) -> String {
        match self {
            ProblemSpec::Quadratic { n, p, kappa, seed } => {
                format!("quadratic(n={n},p={p},kappa={kappa},seed={seed})")
            }
            ProblemSpec::Logistic {
                source,
                n,
                p,
                partition,
                seed,
                normalize,
            } => {
                let src = match source {
                    DatasetSource::Synthetic => "synthetic".to_string(),
                    DatasetSource::File(path) => path.display().to_string(),
                };
                let p = p.map_or("auto".to_string(), |p| p.to_string());
                let mode = match partition {
                    PartitionMode::Contiguous => "contiguous",
                    PartitionMode::Shuffled => "shuffled",
                };
                format!(
                    "logistic(dataset={src},n={n},p={p},partition={mode},seed={seed},normalize={normalize})"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaPolicy {
    /// Each method uses `scale` times its own stepsize bound.
    PerMethod,
    /// All methods share `scale` times the smallest of their bounds.
    Shared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub method: Method,
    pub schedule: ConsensusSchedule,
    pub gradient_steps: u32,
    /// Explicit stepsize; otherwise derived from the bound.
    pub alpha: Option<f64>,
    pub max_iters: Option<u64>,
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub topology: TopologyKind,
    pub methods: Vec<MethodSpec>,
    pub cost_models: Vec<CostModel>,
    pub max_iters: u64,
    pub stride: u64,
    pub alpha_scale: f64,
    pub alpha_policy: AlphaPolicy,
    pub output_dir: PathBuf,
}

/// Parses labels such as `DGD`, `DGD^5`, `NEAR-DGD^3`, `NEAR-DGD(10,1,-)`,
/// `NEAR-DGD+(1,1,k)` and `NEAR-DGD+(1,1,500)`.
///
/// In `(a,b,c)`, `a` is the gradient steps per iteration, `b` the consensus
/// rounds and `c` the growth: `-` fixed, `k` linear, `log` logarithmic, or a
/// number `m` doubling every `m` iterations.
pub fn parse_variant(label: &str) -> Result<(Method, ConsensusSchedule, u32), String> {
    let s: String = label.chars().filter(|c| !c.is_whitespace()).collect();
    let upper = s.to_ascii_uppercase();
    let bad = || format!("unrecognized method label {label:?}");
    if upper == "DGD" {
        return Ok((Method::Dgd, ConsensusSchedule::Fixed(1), 1));
    }
    if let Some(t) = upper.strip_prefix("DGD^").or_else(|| upper.strip_prefix("DGD")) {
        let t: u64 = t.parse().map_err(|_| bad())?;
        if t == 0 {
            return Err(bad());
        }
        let method = if t == 1 { Method::Dgd } else { Method::DgdT };
        return Ok((method, ConsensusSchedule::Fixed(t), 1));
    }
    let rest = upper.strip_prefix("NEAR-DGD").ok_or_else(bad)?;
    if rest.is_empty() {
        return Ok((Method::NearDgd, ConsensusSchedule::Fixed(1), 1));
    }
    if let Some(t) = rest.strip_prefix('^').filter(|t| !t.starts_with("+(")) {
        if t == "+" {
            return Ok((Method::NearDgd, ConsensusSchedule::Linear, 1));
        }
        let t: u64 = t.parse().map_err(|_| bad())?;
        let sched = ConsensusSchedule::Fixed(t);
        sched.validate().map_err(|e| e.to_string())?;
        return Ok((Method::NearDgd, sched, 1));
    }
    let rest = rest
        .strip_prefix("^+")
        .or_else(|| rest.strip_prefix('+'))
        .unwrap_or(rest);
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(bad)?;
    let parts: Vec<&str> = inner.split(',').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(bad());
    };
    let a: u32 = a.parse().map_err(|_| bad())?;
    let b: u64 = b.parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(format!("{label:?}: a and b must be >= 1"));
    }
    let schedule = match *c {
        "-" => ConsensusSchedule::Fixed(b),
        "K" if b == 1 => ConsensusSchedule::Linear,
        "K" => return Err(format!("{label:?}: linear growth starts from one round")),
        "LOG" if b == 1 => ConsensusSchedule::Logarithmic,
        "LOG" => return Err(format!("{label:?}: logarithmic growth starts from one round")),
        m => ConsensusSchedule::Doubling {
            initial: b,
            period: m.parse().map_err(|_| bad())?,
        },
    };
    schedule.validate().map_err(|e| e.to_string())?;
    Ok((Method::NearDgd, schedule, a))
}

#[derive(Default)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<(usize, String, String)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries
            .iter()
            .rev()
            .find(|(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
    }
}

struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, section: &str, line: usize, msg: impl std::fmt::Display) {
        self.0.push(format!("line {line}: [{section}] {msg}"));
    }

    fn field<T: std::str::FromStr>(&mut self, sec: &Section, key: &str) -> Option<T> {
        let (line, raw) = sec.get(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.push(&sec.name, line, format!("{key}: cannot parse {raw:?}"));
                None
            }
        }
    }

    fn required<T: std::str::FromStr>(&mut self, sec: &Section, key: &str) -> Option<T> {
        if sec.get(key).is_none() {
            self.push(&sec.name, sec.line, format!("{key}: missing"));
            return None;
        }
        self.field(sec, key)
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ExperimentError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            sections.push(Section {
                name: name.trim().to_ascii_lowercase(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ExperimentError::Config(vec![format!(
                "line {line}: expected key = value, got {content:?}"
            )]));
        };
        let Some(sec) = sections.last_mut() else {
            return Err(ExperimentError::Config(vec![format!(
                "line {line}: key outside of a section"
            )]));
        };
        sec.entries
            .push((line, k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(sections)
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ExperimentError::Config(vec![format!("cannot read {}: {e}", path.display())])
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses the sectioned `key = value` format. Relative paths resolve
    /// against `base_dir`. All field errors are collected.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let sections = split_sections(text)?;
        let mut errs = Errors(Vec::new());
        let empty = Section::default();
        let single = |name: &str, errs: &mut Errors| -> Option<&Section> {
            let found: Vec<&Section> = sections.iter().filter(|s| s.name == name).collect();
            if found.len() > 1 {
                errs.push(name, found[1].line, "section repeated");
            }
            found.first().copied()
        };
        for s in &sections {
            if !["problem", "topology", "run", "cost", "method"].contains(&s.name.as_str()) {
                errs.push(&s.name, s.line, "unknown section");
            }
        }

        let problem = match single("problem", &mut errs) {
            None => {
                errs.0.push("[problem] section missing".into());
                None
            }
            Some(sec) => parse_problem(sec, base_dir, &mut errs),
        };

        let topology = match single("topology", &mut errs) {
            None => {
                errs.0.push("[topology] section missing".into());
                None
            }
            Some(sec) => {
                let kind: Option<String> = errs.required(sec, "kind");
                let k: Option<usize> = errs.field(sec, "k");
                kind.and_then(|kind| match TopologyKind::parse(&kind, k) {
                    Ok(t) => Some(t),
                    Err(e) => {
                        errs.push("topology", sec.line, e);
                        None
                    }
                })
            }
        };

        let run = single("run", &mut errs).unwrap_or(&empty);
        let default_iters = match problem {
            Some(ProblemSpec::Logistic { .. }) => DEFAULT_LOGISTIC_ITERS,
            _ => DEFAULT_QUADRATIC_ITERS,
        };
        let max_iters = errs.field(run, "max_iters").unwrap_or(default_iters);
        let stride: u64 = errs.field(run, "stride").unwrap_or(1);
        if stride == 0 {
            errs.push("run", run.line, "stride must be >= 1");
        }
        let alpha_scale: f64 = errs.field(run, "alpha_scale").unwrap_or(DEFAULT_ALPHA_SCALE);
        if !(alpha_scale > 0.0 && alpha_scale.is_finite()) {
            errs.push("run", run.line, "alpha_scale must be positive");
        }
        let alpha_policy = match run.get("alpha_policy") {
            None | Some((_, "per_method")) => AlphaPolicy::PerMethod,
            Some((_, "shared")) => AlphaPolicy::Shared,
            Some((line, other)) => {
                errs.push("run", line, format!("alpha_policy: unknown {other:?}"));
                AlphaPolicy::PerMethod
            }
        };
        let output_dir = run
            .get("output_dir")
            .map(|(_, v)| base_dir.join(v))
            .unwrap_or_else(|| base_dir.join("output"));

        let cost_models = match single("cost", &mut errs).and_then(|s| s.get("models")) {
            None => vec![CostModel::default()],
            Some((line, spec)) => {
                let parsed: Vec<_> = spec.split(',').map(CostModel::parse_spec).collect();
                let mut models = Vec::new();
                for m in parsed {
                    match m {
                        Ok(m) => models.push(m),
                        Err(e) => errs.push("cost", line, e),
                    }
                }
                models
            }
        };

        let p = match &problem {
            Some(ProblemSpec::Quadratic { p, .. }) => Some(*p),
            Some(ProblemSpec::Logistic { p, .. }) => *p,
            None => None,
        };
        let mut methods = Vec::new();
        for sec in sections.iter().filter(|s| s.name == "method") {
            if let Some(m) = parse_method(sec, p, &mut errs) {
                if methods.iter().any(|o: &MethodSpec| o.label == m.label) {
                    errs.push("method", sec.line, format!("duplicate label {:?}", m.label));
                }
                methods.push(m);
            }
        }
        if methods.is_empty() && errs.0.is_empty() {
            errs.0.push("at least one [method] section is required".into());
        }

        if !errs.0.is_empty() {
            return Err(ExperimentError::Config(errs.0));
        }
        Ok(Self {
            problem: problem.expect("checked"),
            topology: topology.expect("checked"),
            methods,
            cost_models,
            max_iters,
            stride,
            alpha_scale,
            alpha_policy,
            output_dir,
        })
    }
}

fn parse_problem(sec: &Section, base_dir: &Path, errs: &mut Errors) -> Option<ProblemSpec> {
    let kind: String = errs.required(sec, "kind")?;
    let n: Option<usize> = errs.required(sec, "n");
    let seed: u64 = errs.field(sec, "seed").unwrap_or(0);
    match kind.as_str() {
        "quadratic" => {
            let p: Option<usize> = errs.required(sec, "p");
            let kappa: Option<f64> = errs.required(sec, "kappa");
            Some(ProblemSpec::Quadratic {
                n: n?,
                p: p?,
                kappa: kappa?,
                seed,
            })
        }
        "logistic" => {
            let source = match sec.get("dataset") {
                None | Some((_, "synthetic")) => DatasetSource::Synthetic,
                Some((_, path)) => DatasetSource::File(base_dir.join(path)),
            };
            let partition = match sec.get("partition") {
                None | Some((_, "contiguous")) => PartitionMode::Contiguous,
                Some((_, "shuffled")) => PartitionMode::Shuffled,
                Some((line, other)) => {
                    errs.push("problem", line, format!("partition: unknown {other:?}"));
                    PartitionMode::Contiguous
                }
            };
            let p: Option<usize> = errs.field(sec, "p");
            let normalize = errs.field(sec, "normalize").unwrap_or(false);
            Some(ProblemSpec::Logistic {
                source,
                n: n?,
                p,
                partition,
                seed,
                normalize,
            })
        }
        other => {
            errs.push("problem", sec.line, format!("kind: unknown {other:?}"));
            None
        }
    }
}

fn parse_method(sec: &Section, p: Option<usize>, errs: &mut Errors) -> Option<MethodSpec> {
    let label: String = errs.required(sec, "label")?;
    let variant = sec.get("variant").map(|(l, v)| (l, v.to_string()));
    let explicit_method = sec.get("method");
    let (method, mut schedule, mut gradient_steps) = match (explicit_method, variant) {
        (Some((line, m)), _) => match m.parse::<Method>() {
            Ok(m) => (m, ConsensusSchedule::Fixed(1), 1),
            Err(e) => {
                errs.push("method", line, e);
                return None;
            }
        },
        (None, Some((line, v))) => match parse_variant(&v) {
            Ok(x) => x,
            Err(e) => {
                errs.push("method", line, e);
                return None;
            }
        },
        (None, None) => match parse_variant(&label) {
            Ok(x) => x,
            Err(e) => {
                errs.push("method", sec.line, format!("{e}; set method= or variant="));
                return None;
            }
        },
    };
    if let Some(t) = errs.field::<u64>(sec, "t") {
        schedule = ConsensusSchedule::Fixed(t);
    }
    if let Some((line, s)) = sec.get("schedule") {
        match s.parse() {
            Ok(s) => schedule = s,
            Err(e) => errs.push("method", line, e),
        }
    }
    if let Some(a) = errs.field(sec, "gradient_steps") {
        gradient_steps = a;
    }
    let alpha = errs.field(sec, "alpha");
    let max_iters = errs.field(sec, "max_iters");
    let init = match sec.get("init") {
        None | Some((_, "zeros")) => Init::Zeros,
        Some((line, raw)) => {
            let vals: Result<Vec<f64>, _> = raw.split(',').map(|v| v.trim().parse()).collect();
            match vals {
                Ok(v) if v.len() == 1 && p.is_some() => Init::Shared(vec![v[0]; p.unwrap()]),
                Ok(v) => Init::Shared(v),
                Err(_) => {
                    errs.push("method", line, format!("init: cannot parse {raw:?}"));
                    Init::Zeros
                }
            }
        }
    };
    Some(MethodSpec {
        label,
        method,
        schedule,
        gradient_steps,
        alpha,
        max_iters,
        init,
    })
}
