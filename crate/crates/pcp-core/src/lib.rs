//! Predictive-cooperative electricity market: cooperative bidding on top of
//! a two-settlement wholesale market, payment disaggregation that rewards
//! accurate announcements, short-term load forecasting, and an agent-based
//! simulation against an individual real-time-pricing baseline.

pub mod analysis;
pub mod bidding;
pub mod cli;
pub mod error;
pub mod forecast;
pub mod market_data;
pub mod settlement;
pub mod simulation;
pub mod stats;

pub use error::{PcpError, Result};
