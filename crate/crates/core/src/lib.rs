//! Agent-based simulation of reservation-controlled road intersections.
//!
//! Four control mechanisms share one engine: first-come-first-served
//! reservations (`fcfs`), combinatorial auctions over space-time tiles
//! (`ca`), competitive posted prices with price-aware route choice (`cta`),
//! and auctions with market reserve prices (`ca-cta`).
//!
//! The closed-form models (kinematics, pricing, metrics) are generic over
//! [`num::Scalar`]; the simulator runs on [`Real`].

pub mod auction;
pub mod driver;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod isect;
pub mod market;
pub mod num;
pub mod roadnet;
pub mod scenario;

pub use error::{Error, Result};

/// Scalar type of the simulator.
pub type Real = f64;
pub type IdmParams = dynamics::IdmParams<Real>;
pub type FundamentalDiagram = market::FundamentalDiagram<Real>;
pub type PriceRule = market::PriceRule<Real>;
