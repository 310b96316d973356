//! HTTP service and command line for histoscope.

pub mod cli;
pub mod service;
