//! Stochastic model of how followers see and respond to an advocate's posts
//! in a social-media feed, with maximum-likelihood fitting, per-user
//! prediction, responder classification, posterior interest estimation and a
//! seeded simulator that serves as a ground-truth oracle.

pub mod config;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod inference;
pub mod io;
pub mod model;
pub mod rng;
pub mod simulator;

pub mod cli;

pub use error::{Error, Result};
pub use model::{
    ModelParams, PopulationParams, ResponseDistribution, ResponseModel, Stance, UserRecord,
};
