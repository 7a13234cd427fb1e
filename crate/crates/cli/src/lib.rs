//! File formats and subcommands around `relucert-core`.

pub mod commands;
pub mod data;
pub mod io;
