//! Graph-regularized multimodal subspace support vector data description.
//!
//! Every modality of an instance is projected by its own matrix `Q_m` into a
//! shared low-dimensional subspace, where one hypersphere describes the
//! target class. Projections are learned by alternating an SVDD solve with
//! signed gradient steps that include one of ten subspace regularizers
//! (three of them built from graph Laplacians). Per-modality verdicts are
//! fused with AND / OR / single-modality rules.
//!
//! The crate also carries the event-detection pipeline around the model:
//! windowing of annotated series, noise injection, PCA, standard scores,
//! reliability and earliness metrics, a synthetic event generator and a grid
//! search harness.

pub mod data;
pub mod error;
pub mod experiment;
pub mod graphs;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod npt;
pub mod preprocessing;
pub mod regularizers;
pub mod svdd;
pub mod synth;
pub mod trainer;

pub use data::{EventSeries, Label, MultimodalDataset, MultimodalInstance};
pub use error::{Error, Result};
pub use inference::DecisionStrategy;
pub use metrics::{EarlinessReport, EvaluationReport};
pub use regularizers::Regularizer;
pub use trainer::{ModelConfig, Sign, TrainedModel};
