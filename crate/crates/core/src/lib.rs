//! Sequential portscan-detection toolkit.
//!
//! A remote source probing a network is modeled by the success rate `p` of
//! its first-contact connection attempts: scanners sit at low `p`, benign
//! users at high `p`.  This crate implements a bounded sequential test for
//! that model together with everything needed to run it in practice:
//!
//! - [`detector`]: the KL-statistic stopping rule, streaming detector state
//!   and precomputed boundary tables.
//! - [`trwa`]: the Threshold Random Walk baseline (Wald's SPRT) for
//!   head-to-head comparison.
//! - [`oc`]: exact operating characteristics (acceptance probabilities,
//!   stop-time distribution, ASN) by dynamic programming over the `(n, s)`
//!   lattice, with a brute-force path-enumeration oracle.
//! - [`maxobs`]: the hard bound on the number of observations.
//! - [`tuning`]: bisection and iterative minimax determination of the
//!   test's parameters against exact risks.
//! - [`triple`]: the scanner / marginal / benign triple-hypothesis test
//!   with indifference zones.
//! - [`sim`]: seeded, reproducible Monte Carlo cross-validation.
//! - [`ingest`]: streaming event ingestion with per-source sessions and
//!   first-contact deduplication.

pub mod detector;
pub mod ingest;
pub mod maxobs;
pub mod oc;
pub mod sim;
pub mod triple;
pub mod trwa;
pub mod tuning;

pub use detector::{BoundaryTable, DetectorError, DetectorState, TestSpec, TunedParams, Verdict};
pub use oc::{OcReport, StoppingPlan};
