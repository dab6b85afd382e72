//! Two-timescale control of a software-defined radio access network whose
//! controller talks to the base stations over a wireless fronthaul.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod controller_lyapunov;
pub mod controller_stats;
pub mod error;
pub mod game;
pub mod model;
pub mod scheduler;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
