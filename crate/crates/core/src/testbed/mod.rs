//! Built-in oracles: analytic test functions and a steady-state gas network
//! with pressure control valves.

pub mod functions;
pub mod gas;

pub use functions::{ConstantOracle, FirstCoordinateOracle, TestFunction, TestOracle};
pub use gas::{GasError, GasNetwork, GasOracle};
