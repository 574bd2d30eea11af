//! Lifted forward planning for relational factored MDPs with concurrent
//! actions.
//!
//! A model is compiled into counting cliques ([`LiftedModel`]); states are
//! histograms over those cliques and actions are histograms over the
//! buckets the actions apply to. On top of that sit an exact LP planner, an
//! approximate planner over basis functions, conditional action queries,
//! and a ground oracle that checks all of them.

pub mod bench;
pub mod cli;
pub mod counting;
pub mod error;
pub mod lifted;
pub mod liftgraph;
pub mod lp;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod planner_approx;
pub mod planner_exact;
pub mod queries;
pub mod rewards;
pub mod service;
pub mod transition;

pub use counting::{ActionHistogram, CountingState};
pub use error::{Error, Result};
pub use lifted::LiftedModel;
pub use model::{epidemic, epidemic_model, parse_model, RfMdpModel};
