//! Proactive assistant runtime for analytics dashboards.
//!
//! The crate watches a user's interaction stream, decides when they could
//! use help, proposes it, and, once accepted, drives the dashboard through a
//! reason-act loop. User notes are fact-checked against the data. A batch
//! harness replays categorized analysis tasks against the sandbox dashboard
//! and scores the resulting traces.
//!
//! | module | role |
//! |---|---|
//! | [`model`] | shared domain types |
//! | [`protocol`] | line-delimited wire envelope |
//! | [`store`] | per-session memory and static knowledge |
//! | [`monitor`] | think-time features and help-needed detection |
//! | [`backend`] | language-model boundary (remote and scripted) |
//! | [`planner`] | intent inference, suggestions and plans |
//! | [`executor`] | reason-act loop over a [`sandbox::ToolTarget`] |
//! | [`verifier`] | note claim extraction and fact checking |
//! | [`sandbox`] | in-memory reference dashboard |
//! | [`eval`] | batch task generation, execution, scoring, reports |
//! | [`gateway`] | sessions, transport, tip timing and transcript replay |
//! | [`client`] | front-end side of the protocol: slider, toasts, state mirror |
//! | [`fixtures`] | seeded datasets, scripts and golden outputs |
//!
//! Runnable walkthroughs live in `examples/`.

pub mod backend;
pub mod client;
pub mod clock;
pub mod eval;
pub mod executor;
pub mod fixtures;
pub mod gateway;
pub mod model;
pub mod monitor;
pub mod planner;
pub mod protocol;
pub mod sandbox;
pub mod store;
pub mod verifier;
