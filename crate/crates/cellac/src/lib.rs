//! Command-line tool and HTTP service around `cellac-core`.

pub mod api;
pub mod artifacts;
pub mod config;
pub mod server;
