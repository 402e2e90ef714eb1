//! Bundled test grids.

use crate::grid::{load_grid, GridModel};

pub const FOUR_BUS_TOML: &str = include_str!("../fixtures/four_bus.toml");
pub const TWO_BUS_TOML: &str = include_str!("../fixtures/two_bus.toml");

/// Four-bus system: one slack and three load buses.
pub fn four_bus() -> GridModel {
    load_grid(FOUR_BUS_TOML).expect("bundled four-bus fixture is valid")
}

/// Slack plus one load bus behind `y = 1 - j5`.
pub fn two_bus() -> GridModel {
    load_grid(TWO_BUS_TOML).expect("bundled two-bus fixture is valid")
}
