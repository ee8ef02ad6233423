//! Active target tracking with learned and planned sensing policies.
//!
//! A differential-drive robot carries a range-bearing sensor and tracks
//! double-integrator targets whose state it only knows through Gaussian
//! beliefs. The crate provides the simulator ([`world`]), the belief filter
//! ([`filter`]), the tracking MDP with its log-det-covariance reward
//! ([`env`]), a small multilayer perceptron ([`nn`]) driving DQN and Double
//! DQN learners ([`agent`]), and a tree-search information planner used as a
//! baseline ([`planner`]).
//!
//! Everything here is `no_std` with `alloc`; file formats, logging and the
//! command line live in the `activetrack` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agent;
pub mod env;
pub mod filter;
pub mod geometry;
pub mod nn;
pub mod planner;
pub mod rng;
pub mod world;
