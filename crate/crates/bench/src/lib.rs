//! Fixtures shared by the kernel benchmarks.

use dgdsim::experiment::{prepare, Prepared, ProblemSpec};
use dgdsim::{StackedIterate, TopologyKind};

/// Quadratic instance on a 4-cyclic graph.
pub fn quadratic(n: usize, p: usize) -> Prepared {
    let spec = ProblemSpec::Quadratic {
        n,
        p,
        kappa: 1e2,
        seed: 1,
    };
    prepare(&spec, TopologyKind::Cyclic { k: 4 }).expect("benchmark instance")
}

/// Deterministic non-consensual stacked iterate.
pub fn spread_iterate(n: usize, p: usize) -> StackedIterate {
    let flat = (0..n * p).map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0).collect();
    StackedIterate::from_flat(n, p, flat).expect("shape")
}
