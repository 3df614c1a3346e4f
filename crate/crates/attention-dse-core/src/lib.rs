//! Attention-based design space exploration for CPU micro-architectures.
//!
//! The crate is organized around the exploration pipeline:
//!
//! * [`design_space`] — the micro-architectural parameter grid and design points;
//! * [`microarch_graph`] — perceptual graphs, perception degrees, and the
//!   perception-driven serialization order plus attention window size;
//! * [`tensor`] — a small dense f64 tensor kernel with reverse-mode autodiff;
//! * [`surrogate`] — the attention-based single-objective performance predictor;
//! * [`oracle`] — a deterministic synthetic ground-truth PPA function standing in
//!   for a cycle-accurate simulator plus power/area model;
//! * [`pareto`] — dominance, Pareto-set maintenance, hypervolume, and ADRS;
//! * [`explorer`] — the attention-aware bottleneck-analysis acquisition loop and
//!   the random-search baseline.

pub mod design_space;
pub mod explorer;
pub mod microarch_graph;
pub mod oracle;
pub mod pareto;
pub mod surrogate;
pub mod tensor;

pub use design_space::{DesignPoint, DesignSpace, ParameterSpec, Stage};
pub use microarch_graph::{GraphFixture, PerceptualGraph, SerializationOrder};
pub use oracle::{ObjectiveVector, OracleConfig};
pub use pareto::{Direction, ParetoSet, ReferencePoint};
pub use surrogate::{AttentionHeatmap, SurrogateConfig, SurrogateModel};
