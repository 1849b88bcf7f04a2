//! Command-line and HTTP front ends for `molenum`.

pub mod corpus;
pub mod job;
pub mod render;
pub mod service;

/// Listen address used when neither the flag nor `MOLENUM_LISTEN` is set.
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
