//! Threshold Random Walk baseline (Wald's sequential probability ratio test
//! for Bernoulli outcomes).
//!
//! The walk observes the probability ratio `Pr{X_1..X_n | p0} / Pr{X_1..X_n
//! | p1}` and stops once it leaves `(k0, k1)`: ratio `<= k0` declares the
//! source benign, ratio `>= k1` declares it a scanner.  With `k0 = alpha`
//! and `k1 = 1/beta` the error probabilities at the design points are
//! bounded by the budgets.  All decisions are taken in log space; the
//! log-ratio is recomputed from the integer counts at each comparison rather
//! than accumulated, so boundary decisions carry no rounding drift.
//!
//! Unlike the bounded test, the stop time here has no deterministic bound;
//! exact evaluation truncates on a continuing-mass cutoff.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{TestSpec, Verdict};
use crate::oc::{self, EvalOptions, OcError, StoppingPlan};

/// Default truncation horizon for exact evaluation of the walk.
pub const DEFAULT_HORIZON: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrwaError {
    #[error("ratio thresholds must satisfy 0 < k0 < 1 < k1, got k0={k0}, k1={k1}")]
    InvalidThresholds { k0: f64, k1: f64 },
    #[error("walk already reached a terminal decision")]
    AlreadyDecided,
}

/// Ratio thresholds of the walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrwaParams {
    k0: f64,
    k1: f64,
}

impl TrwaParams {
    pub fn new(k0: f64, k1: f64) -> Result<Self, TrwaError> {
        if !(k0 > 0.0 && k0 < 1.0 && k1 > 1.0 && k1.is_finite()) {
            return Err(TrwaError::InvalidThresholds { k0, k1 });
        }
        Ok(TrwaParams { k0, k1 })
    }

    /// The standard construction `k0 = alpha`, `k1 = 1/beta`, which meets
    /// the risk requirement at the design points.
    pub fn from_risk_budgets(spec: &TestSpec) -> Self {
        TrwaParams {
            k0: spec.alpha(),
            k1: 1.0 / spec.beta(),
        }
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }
}

/// Log of the probability ratio after `n` observations with `s` successes.
fn llr_at(n: u64, s: u64, spec: &TestSpec) -> f64 {
    let success_step = (spec.p0() / spec.p1()).ln();
    let failure_step = ((1.0 - spec.p0()) / (1.0 - spec.p1())).ln();
    s as f64 * success_step + (n - s) as f64 * failure_step
}

/// Stateless decision of the walk at `(n, s)`.  Boundary hits with equality
/// stop, matching the printed non-strict inequalities.
pub fn trwa_decide(n: u64, s: u64, spec: &TestSpec, params: &TrwaParams) -> Option<Verdict> {
    let llr = llr_at(n, s, spec);
    if llr <= params.k0.ln() {
        Some(Verdict::Benign)
    } else if llr >= params.k1.ln() {
        Some(Verdict::Scanner)
    } else {
        None
    }
}

/// Streaming walk state.  Counts are authoritative; the log-ratio is derived.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrwaState {
    n: u64,
    s: u64,
    decision: Option<Verdict>,
}

impl TrwaState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn s(&self) -> u64 {
        self.s
    }

    pub fn decision(&self) -> Option<Verdict> {
        self.decision
    }

    /// Current log probability ratio, recomputed from the counts.
    pub fn llr(&self, spec: &TestSpec) -> f64 {
        llr_at(self.n, self.s, spec)
    }

    pub fn step(
        &mut self,
        success: bool,
        params: &TrwaParams,
        spec: &TestSpec,
    ) -> Result<Option<Verdict>, TrwaError> {
        if self.decision.is_some() {
            return Err(TrwaError::AlreadyDecided);
        }
        self.n += 1;
        if success {
            self.s += 1;
        }
        self.decision = trwa_decide(self.n, self.s, spec, params);
        Ok(self.decision)
    }
}

/// The walk as a [`StoppingPlan`] for exact evaluation.  `horizon` is a
/// truncation, not a property of the walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrwaPlan {
    spec: TestSpec,
    params: TrwaParams,
    horizon: u64,
}

impl TrwaPlan {
    pub fn new(spec: TestSpec, params: TrwaParams, horizon: u64) -> Self {
        TrwaPlan {
            spec,
            params,
            horizon,
        }
    }

    pub fn with_default_horizon(spec: TestSpec, params: TrwaParams) -> Self {
        Self::new(spec, params, DEFAULT_HORIZON)
    }
}

impl StoppingPlan for TrwaPlan {
    fn horizon(&self) -> u64 {
        self.horizon
    }

    fn label(&self, n: u64, s: u64) -> Option<Verdict> {
        trwa_decide(n, s, &self.spec, &self.params)
    }
}

/// Smallest `n` such that `Pr{stopped by n | p} >= q`, via the truncated
/// lattice recursion.  Exhausting the truncation horizon before reaching `q`
/// yields [`OcError::HorizonExceeded`] with the accumulated mass.
pub fn stop_time_quantile(
    spec: &TestSpec,
    params: &TrwaParams,
    p: f64,
    q: f64,
) -> Result<u64, OcError> {
    let plan = TrwaPlan::with_default_horizon(*spec, *params);
    oc::stop_time_quantile(&plan, p, q, EvalOptions::truncated())
}
