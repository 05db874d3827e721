//! Deterministic simulator for decentralized gradient methods over a
//! network of agents, with communication/computation cost accounting.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod datasets;
pub mod engine;
pub mod experiment;
pub mod iterate;
pub mod linalg;
pub mod objectives;
pub mod topology;

pub use accounting::{
    consensus_error, cost_series, relative_error, AccountingError, CostModel, Manifest, RunTrace,
    TraceRecorder, TraceRow,
};
pub use datasets::{DatasetError, PartitionMode, Shard, SparseDataset};
pub use engine::{
    max_stepsize, run, theory_bounds, ConsensusSchedule, EngineError, Init, Method, MethodConfig,
    RunOutcome, TheoryBounds,
};
pub use iterate::StackedIterate;
pub use objectives::{
    GroundTruth, LocalObjectiveSet, LogisticProblem, ObjectiveError, QuadraticProblem,
};
pub use topology::{
    build_topology, consensus_apply, metropolis_weights, ConsensusMatrix, NetworkTopology,
    Spectrum, TopologyError, TopologyKind,
};
