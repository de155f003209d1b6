//! Catalog engine for undesirable consequences of digital technologies.

pub mod api;
pub mod app;
pub mod clock;
pub mod config;
pub mod eval;
pub mod gateway;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod ratelimit;
pub mod store;
pub mod text;
