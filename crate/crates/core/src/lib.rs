//! Slot-level simulation and analysis of uplink cellular networks where
//! mobile stations (MSs) may relay each other's packets to the base station
//! (BS) over device-to-device links.
//!
//! Modules follow the data flow of one slot: [`net`] places MSs on a grid
//! and turns distances into link rates, [`policy`] picks links and powers
//! by back-pressure, [`queueing`] advances the queues, and [`sim`] drives
//! the whole loop. [`stability`] decides membership in the stability region
//! of small explicit instances.

pub mod error;
pub mod net;
pub mod policy;
pub mod queueing;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
