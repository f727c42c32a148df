//! Simulation laboratory for adaptive nonparametric Bayesian inference in the
//! Gaussian sequence model.
//!
//! * [`seqmodel`] — bases, signals, norms, self-similarity and data.
//! * [`gaussprior`] — fixed-α, empirical Bayes and hierarchical Gaussian priors.
//! * [`slabspike`] — slab-and-spike wavelet prior with low-level threshold.
//! * [`dirichlethist`] — Dirichlet histogram density demo.
//! * [`credsets`] — credible-set calibration, construction and membership.
//! * [`harness`] — replicated experiments and report output.

pub mod credsets;
pub mod dirichlethist;
pub mod draws;
pub mod error;
pub mod gaussprior;
pub mod harness;
pub mod rng;
pub mod seqmodel;
pub mod slabspike;

pub use draws::PosteriorDrawSet;
pub use error::{Error, Result};
