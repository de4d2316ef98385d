//! Species sampling process mixtures via exact finite representations.
//!
//! Any proper species sampling process `G = sum_j w_j delta_{theta_j}` can be
//! rewritten, without approximation, as a finite mixture with a latent
//! truncation level `K`: given a strictly decreasing schedule `xi_j` in (0,1]
//! vanishing at infinity,
//!
//! ```text
//! P(K = k | w) = (xi_k - xi_{k+1}) s_k,   s_k = sum_{i<=k} w_i / xi_i,
//! G | K = k    = sum_{j<=k} (w_j / xi_j) / s_k * delta_{theta_j},
//! ```
//!
//! and marginalizing over `K` recovers `G` exactly. This crate implements
//! the resulting Gibbs samplers for Bayesian density estimation with Normal
//! kernels (Dirichlet process, general Beta stick-breaking, and geometric
//! stick-breaking weights; stick-induced and deterministic schedules), a
//! generalized slice sampler baseline, a validation suite that brute-force
//! certifies the representation identities, and a benchmark harness.

pub mod bench;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod model;
pub mod runner;
pub mod schedule;
pub mod slice;
pub mod sticks;
pub mod validation;

pub use config::{ConfigLayer, ModelKind, RunConfig};
pub use error::{Error, Result};
pub use gibbs::{FiniteGibbs, MixtureSampler};
pub use model::{FamilySpec, LatentState, ModelSpec};
pub use schedule::Schedule;
pub use slice::SliceSampler;
pub use sticks::{Atom, BaseMeasure, StickFamily, StickState};
