//! One module per CLI subcommand.

pub mod ablate;
pub mod density;
pub mod toy;
pub mod train;
pub mod verify;
