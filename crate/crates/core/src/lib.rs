// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulator for a harmonic-oscillator quantum battery charged by a stream
//! of two-level chargers with a projective measurement after each round.
//!
//! The battery is an `N + 1` level ladder. Each round couples a fresh
//! charger qubit for a time τ under a Jaynes–Cummings interaction, measures
//! the qubit, and keeps the battery only on the desired outcome.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lindblad;
pub mod ode;
pub mod optimize;
pub mod propagator;
pub mod round;
pub mod scheduler;
pub mod states;
pub mod thermo;

pub use error::{Error, Result};
pub use round::{RoundRecord, Scheme};
pub use scheduler::{IntervalPolicy, Trajectory};
pub use states::{BatteryState, ChargerSpec, InverseTemperature, SystemParams};
