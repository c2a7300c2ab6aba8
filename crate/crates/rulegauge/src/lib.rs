//! Measure what each prior-knowledge rule is worth to an informed model.
//!
//! Informed (physics-informed) training bakes rules — governing equations,
//! initial and boundary conditions, algebraic and inequality relations —
//! into the loss of a small network. This crate trains one surrogate per
//! *coalition* of rules and turns the resulting test errors into importance
//! scores:
//!
//! - **RI**, the mean log10 error ratio a rule contributes over every
//!   coalition containing it,
//! - **FI**, its contribution when every other rule is present,
//! - **RI^r**, the same broken down by how many other rules it can rely on,
//!   which exposes synergy and substitution between rules,
//! - per-output-variable RI, Monte Carlo estimates, and a
//!   permutation-weighted variant.
//!
//! On top of the scores sit two applications: tuning the per-rule loss
//! weights from the sign of the importance, and flagging improper rules by
//! their strongly negative importance.
//!
//! The crate is organized bottom-up:
//!
//! - [`net`]: dense networks with exact input derivatives (orders 0-4 via
//!   truncated Taylor jets), reverse-mode parameter gradients, Adam.
//! - [`problems`]: the benchmark problems, their reference data, splits and
//!   observation noise.
//! - [`rules`]: residual expressions, collocation sets, coalitions.
//! - [`lab`]: the pretrain-then-disturb training protocol with a result
//!   cache and parallel sweeps.
//! - [`importance`]: the score computations.
//! - [`tune`]: importance-guided weight optimization.
//! - [`config`], [`studies`], [`report`], [`plot`], [`cli`]: experiment
//!   configuration, study drivers and emission.
//!
//! Every runnable capability has an example under `examples/`; the `rulegauge`
//! binary is a thin front end over [`cli`].

pub mod cli;
pub mod config;
pub mod error;
pub mod importance;
pub mod lab;
pub mod net;
pub mod plot;
pub mod problems;
pub mod report;
pub mod rules;
pub mod studies;
pub mod tune;

pub use error::{Error, Result};
