// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid battery state: {0}")]
    InvalidState(String),

    #[error("Fano ratio undefined for a state with zero mean occupation")]
    UndefinedRatio,

    #[error("operation requires a diagonal battery state")]
    NotDiagonal,

    /// The measurement outcome has (numerically) zero probability.
    #[error("measurement outcome has zero probability (trace {probability:e})")]
    ZeroProbability { probability: f64 },

    #[error("no interval on the search grid increases the mean occupation")]
    NoCharging,

    #[error("round index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("integrator step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
