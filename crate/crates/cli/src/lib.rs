//! Command-line front end: security checks, margin sweeps, attack simulations
//! and CRP table files.

pub mod commands;
pub mod config;
pub mod sweep;
