//! Grid geometry, mobility and the channel model.

pub mod channel;
pub mod grid;
pub mod mobility;

pub use channel::{link_rate, path_loss_db, ChannelParams, RateTable};
pub use grid::{GridPoint, GridSpec, NetworkTopology};
pub use mobility::{
    stationary_closed_form, stationary_distribution, step_mobility, MobilityParams, Move, MoveRule,
};
