//! Markov games with metric switching costs.
//!
//! A *Markov system* is a finite Markov chain with per-state movement costs,
//! a start state, and an absorbing target state. Given a collection of such
//! chains embedded in a metric (switching between chains costs the metric
//! distance), the player adaptively advances one chain at a time until `K`
//! chains reach their targets, paying movement costs as she goes. This crate
//! implements:
//!
//! - grade computation (a Gittins-index variant defined through the
//!   single-chain optimal stopping game), dummy states and dummy grades that
//!   fold a switching cost into the index ([`grade`]);
//! - the prevailing-cost law of a never-quitting player (the selection cost
//!   of the stochastic-k-TSP reduction), computed exactly through per-level
//!   linear systems ([`grade::selection_cost_pmf`]);
//! - the playable strategies: the dummy-grade index strategy, the doubling
//!   framework, the budgeted unit-metric and general-metric subroutines with
//!   their threshold machinery, and reference strategies ([`strategy`]);
//! - an exact optimal-policy oracle on the joint Markov decision process for
//!   small instances, plus the Banks–Sundaram impossibility witness
//!   ([`oracle`]);
//! - instance files, generators, built-in scenarios, and a seeded
//!   multi-trial evaluation harness ([`io`], [`generate`], [`scenario`],
//!   [`bench`]).
//!
//! All stochastic routines draw from a seeded [`RandomSource`]; identical
//! `(seed, stream)` pairs reproduce identical runs on any platform.

pub mod bench;
mod error;
pub mod generate;
pub mod grade;
pub mod io;
mod linalg;
pub mod oracle;
mod rng;
pub mod scenario;
pub mod strategy;
pub mod system;

pub use error::{Error, Result};
pub use rng::RandomSource;
pub use system::{ChainId, Location, MarkovSystem, MetricInstance, StateId};
