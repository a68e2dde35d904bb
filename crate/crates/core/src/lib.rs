//! Simulation and training of quantum photonic neural networks with
//! fabrication imperfections: Fock-space algebra, imperfect photonic
//! elements, the layered network engine and derivative-free training.

pub mod elements;
pub mod engine;
pub mod error;
pub mod fock;
pub mod tasks;
pub mod trainer;

pub use elements::{
    build_mesh, ideal_mzi, kerr_unitary, realistic_mzi, ImperfectionModel, KerrLayer, LayerImperfections, MeshLayer,
    MziImperfection, MziParams,
};
pub use engine::{
    conditional_metrics, transfer_function, unconditional_fidelity, Evaluator, MetricsReport, PairMetrics, Propagator,
    QpnnInstance, TrainingSet,
};
pub use error::{QpnnError, Result};
pub use fock::{enumerate_basis, multi_photon_transform, permanent, FockBasis, FockState, QuantumState};
pub use tasks::{TaskName, TaskSpec};
pub use trainer::{
    minimize, objective, Architecture, ObjectiveKind, OptimizerConfig, StopReason, TrainingMode, TrialResult,
};
