//! Microscopic lane-drop bottleneck simulator and a graph-convolution DDPG
//! controller for connected autonomous vehicles (CAVs) in mixed traffic.
//!
//! The crate is split along the data flow of a training run:
//!
//! - [`sim`]: corridor geometry, IDM car following, lane changing, inflow
//!   and the fixed-step integrator.
//! - [`obs`]: the CAV graph observation (node features and adjacency).
//! - [`nn`]: dense matrices, dense and graph-convolution layers with
//!   analytic backpropagation, Adam, and a finite-difference checker.
//! - [`agent`]: actor/critic networks, replay buffer, exploration noise and
//!   the DDPG update.
//! - [`env`]: the episodic RL environment and its reward.
//! - [`scenario`] and [`metrics`]: the two bottleneck scenarios and the
//!   time-space analytics used to compare controllers.
//! - [`config`] and [`checkpoint`]: run configuration and parameter files.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod obs;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
