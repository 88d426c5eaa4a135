//! Command-line front end for the `nvcharge` library.

pub mod commands;
pub mod config;
pub mod exit;
