//! Command-line front end for `invex-core`.

pub mod args;
pub mod commands;

pub use args::Cli;
pub use commands::{cmd_evaluate, cmd_explain, cmd_make_toy, cmd_solve_lp, run, CliError};
