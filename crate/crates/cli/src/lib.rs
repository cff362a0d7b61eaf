//! Command line entry points and the exhibit HTTP service.

pub mod commands;
pub mod service;
