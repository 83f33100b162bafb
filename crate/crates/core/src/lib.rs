//! Discrete-event simulation of urban air mobility operations over a
//! vertiport network, with fleet policies, stochastic demand, cost
//! accounting and a grid search over fleet size and parking capacity.
//!
//! ```
//! use uam_ecosim::{config, demand::DemandModel, engine, policies::{PolicyConfig, PolicyKind}};
//!
//! let mut sc = engine::Scenario::new(
//!     config::bay3(12),
//!     36,
//!     DemandModel::uniform(30.0),
//!     PolicyConfig::new(PolicyKind::OnDemandRebalance),
//! );
//! sc.seed = 7;
//! let out = engine::run(&sc).unwrap();
//! assert_eq!(out.ledger.per_vehicle.len(), 36);
//! ```

pub mod config;
pub mod demand;
pub mod design;
pub mod engine;
pub mod metrics;
pub mod network;
pub mod policies;
pub mod rng;
