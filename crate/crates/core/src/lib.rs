//! Deterministic engine for hierarchy-aware class-incremental learning:
//! two-level taxonomies, incomplete/complete-information task streams,
//! multi-label lifelong metrics, and desk-scale baseline learners over a
//! small differentiable model.
//!
//! The numeric core (`data`, `nn`) is generic over the scalar type via
//! `num-traits`; the engine and all bundled experiments run on the `f64`
//! aliases below, which the determinism and checkpoint contracts assume.

pub mod data;
pub mod harness;
pub mod hierarchy;
pub mod learners;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod stream;

/// Scalar type of all bundled experiments.
pub type Scalar = f64;

pub type Sample = data::RawSample<Scalar>;
pub type Store = stream::LabeledStore<Scalar>;
pub type Model = nn::Mlp<Scalar>;
pub type ModelGrads = nn::Grads<Scalar>;
pub type SgdOptimizer = nn::optim::Optimizer<Scalar>;
