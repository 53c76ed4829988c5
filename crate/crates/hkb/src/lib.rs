//! File formats, parallel scale sweeps and the `hkb` command line on top of
//! `hkb_core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod io;
pub mod sweep;
