//! File formats, parameter sweeps and the `sim` command-line tool on top of
//! [`dipole_core`].

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

pub use commands::{run_command, Command, Format, Grid, Outcome, Request};
pub use error::{Result, SimError};
pub use scenario::{bundled_path, load_scenario};
