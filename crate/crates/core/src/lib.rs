//! Polynomial stochastic dynamical indicators for dynamical systems with
//! uncertain parameters or initial conditions.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod basis;
pub mod cartography;
pub mod config;
pub mod error;
pub mod indicators;
pub mod io;
pub mod odeint;
pub mod pce;
pub mod systems;
pub mod verify;

pub use error::{Result, SdiError};
