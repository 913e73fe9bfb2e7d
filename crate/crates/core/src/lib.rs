//! Online bipartite matching with untrusted advice.
//!
//! Fractional algorithms that interpolate between following the advice and
//! hedging against it (`lab`, `paw`), the usual baselines, a budgeted
//! generalisation (`adwords`), adaptive hard instances (`adversary`), the
//! factor-revealing LP that bounds every algorithm on them (`frlp`), and the
//! offline tooling needed to run experiments (`offline`, `experiment`).

pub mod adversary;
pub mod adwords;
pub mod baselines;
pub mod chart;
pub mod error;
pub mod experiment;
pub mod frlp;
pub mod instance;
pub mod lab;
pub mod numerics;
pub mod offline;
pub mod online;
pub mod par;
pub mod paw;

pub use error::{Error, Result};
pub use instance::{Allocation, ArrivalEvent, GraphInstance};
