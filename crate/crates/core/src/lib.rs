//! Numerically exact exciton dynamics from tensor-network propagation, and
//! LSTM forecasting of that dynamics with automatic hyperparameter search and
//! ensemble confidence intervals.
//!
//! The pipeline is
//!
//! 1. [`physmodel`]: site-exciton Hamiltonian and its discretized Debye baths;
//! 2. [`tensornet`] and [`tdvp`]: MPS/MPO propagation producing a
//!    [`tdvp::Trajectory`] of the electronic reduced density matrix;
//! 3. [`dataset`]: feature vectors, sliding windows and chronological splits;
//! 4. [`lstm`]: stacked LSTM regression trained with Adam and early stopping;
//! 5. [`hyperopt`]: random search, simulated annealing and TPE over network
//!    structure and memory time;
//! 6. [`ensemble`]: bootstrap and MC-dropout ensembles whose spread gives the
//!    forecast confidence interval.

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod hyperopt;
pub mod io;
pub mod lstm;
pub mod physmodel;
pub mod seed;
pub mod tdvp;
pub mod tensornet;
pub mod units;

pub use error::{Error, Result};
