//! Command-line front end: file formats, subcommands and figure data.

pub mod commands;
pub mod io;
pub mod reproduce;
