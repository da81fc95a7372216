//! Training rectifier regression networks with backpropagation or with
//! kickback, a scalar-feedback alternative that replaces per-node error
//! signals by the global error times each node's local influence.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` is how NaN gets rejected

pub mod coherence;
pub mod data;
pub mod error;
pub mod experiments;
pub mod feedback;
pub mod network;
pub mod regret;
pub mod training;

pub use coherence::{coherence_probe, enforce_signs, is_coherent, layer_coherence, CoherenceCheck, CoherenceReport};
pub use data::{load_csv, normalize, synthetic_teacher, Dataset, Standardizer, TeacherData};
pub use error::{Error, Result};
pub use feedback::{
    backprop_deltas, feedback, global_error, influence, kickback_feedback, total_influence, Algorithm, FeedbackField,
    GlobalError, OutputScope,
};
pub use network::{
    rectifier_output, rectifier_subgradient, ActivationTrace, InitScheme, Network, NodeId, RectifierSign, Topology,
    WeightMatrix,
};
pub use regret::{
    best_in_hindsight_linear, best_in_hindsight_rectilinear, regret_bound, run_online_node, RegretExperiment,
    RegretTrace, StepSchedule,
};
pub use training::{train, train_batch, MetricsRecord, TrainConfig};
