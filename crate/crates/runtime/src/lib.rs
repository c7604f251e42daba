//! Command-line tools and the HTTP session service for quantum extensive-form
//! games and the quantum Angel problem.

pub mod cli;
pub mod service;
