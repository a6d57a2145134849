//! Inversion-ready Legendre-Lobatto pseudospectral discretisation.
//!
//! The Lobatto collocation set is augmented with one extra "exceptional"
//! sample at which no derivative is observed. The resulting `N x (N + 1)`
//! differentiation matrix has full row rank, which lets a transcription of an
//! optimal control problem collocate both endpoints of the time domain and
//! recover costates at every collocation node, endpoints included.
//!
//! Modules, bottom up:
//!
//! - [`orthopoly`]: Legendre/Lobatto polynomials, nodes, weights.
//! - [`discretization`]: Lagrange bases and differentiation matrices.
//! - [`ocp`]: fixed-time optimal control problems and two benchmarks.
//! - [`transcribe`]: direct transcription to an equality-constrained NLP and
//!   the covector mapping back to costates.
//! - [`nlpsolve`]: damped Newton solver on the KKT system.
//! - [`convergence`]: error metrics against an analytic optimum and sweeps.
//! - [`output`]: CSV serialisation.

pub mod convergence;
pub mod discretization;
pub mod error;
pub mod nlpsolve;
pub mod ocp;
pub mod orthopoly;
pub mod output;
pub mod transcribe;

pub use error::{Error, Result};
