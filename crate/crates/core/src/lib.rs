//! Online scheduling with commitment on identical parallel machines.
//!
//! Jobs with release dates, processing times and deadlines arrive one at a
//! time and must be accepted or rejected on arrival. Every accepted job must
//! be completed by its deadline. Jobs satisfy a slack condition
//! `d − r ≥ (1+ε)·p`, and the goal is to maximize the total processing time
//! of the accepted jobs.
//!
//! The crate contains the lazy-acceptance preemptive algorithm and its plan
//! generator ([`preemptive`]), the load-threshold non-preemptive algorithm
//! with its partitioned and randomized variants ([`nonpreemptive`]), greedy
//! baselines, adaptive lower-bound adversaries ([`adversary`]), exact
//! offline optima for small instances ([`oracle`]) and an experiment runner
//! ([`harness`]).

pub mod adversary;
pub mod error;
pub mod harness;
pub mod model;
pub mod nonpreemptive;
pub mod online;
pub mod oracle;
pub mod preemptive;
pub mod vmin;

pub use error::{Error, Result};
pub use model::{Decision, DecisionLog, Instance, Job, Schedule, Segment, Time, TOL};
pub use online::{replay, AdaptiveAdversary, OnlinePolicy};
