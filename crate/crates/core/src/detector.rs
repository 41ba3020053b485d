//! The bounded sequential test for the binomial connection-success model.
//!
//! A remote source is observed through a stream of first-contact connection
//! outcomes (success/failure, i.i.d. Bernoulli with unknown rate `p`).  The
//! test decides between "scanner" (`p <= p0`) and "benign" (`p >= p1`) by
//! comparing two KL-divergence statistics of the empirical rate against
//! per-step thresholds:
//!
//! - scanner when `Z_n >= ln(1/(zeta*b)) / n` and `p_hat <= p1`,
//! - benign  when `Y_n >= ln(1/(zeta*a)) / n` and `p_hat >= p0`,
//!
//! where `Y_n` measures divergence from `p0` and `Z_n` from `p1`.  The rule
//! depends on the parameters only through the products `zeta*a` and `zeta*b`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from problem construction and detector stepping.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectorError {
    #[error("thresholds must satisfy 0 < p0 < p1 < 1, got p0={p0}, p1={p1}")]
    InvalidThresholds { p0: f64, p1: f64 },
    #[error("risk budgets must lie in (0,1), got alpha={alpha}, beta={beta}")]
    InvalidRiskBudgets { alpha: f64, beta: f64 },
    #[error("tuning parameters must be positive, got a={a}, b={b}, zeta={zeta}")]
    NonPositiveParams { a: f64, b: f64, zeta: f64 },
    #[error("degenerate test: zeta*a={zeta_a} and zeta*b={zeta_b} must both be < 1")]
    DegenerateProducts { zeta_a: f64, zeta_b: f64 },
    #[error("{name}={value} outside its domain")]
    Domain { name: &'static str, value: f64 },
    #[error("detector already reached a terminal decision")]
    AlreadyDecided,
}

// ---------------------------------------------------------------------------
// Terminal decisions
// ---------------------------------------------------------------------------

/// Terminal classification of a source.  `Marginal` is produced only by the
/// triple-hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Scanner,
    Marginal,
    Benign,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Scanner => "scanner",
            Verdict::Marginal => "marginal",
            Verdict::Benign => "benign",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// ---------------------------------------------------------------------------
// Problem statement and tuned parameters
// ---------------------------------------------------------------------------

/// The binary test problem: thresholds `p0 < p1` and risk budgets.
///
/// Hypotheses: scanner means `p <= p0`, benign means `p >= p1`.  The budgets
/// bound the probability of rejecting the true hypothesis: `alpha` for
/// sources with `p <= p0`, `beta` for sources with `p >= p1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestSpec {
    p0: f64,
    p1: f64,
    alpha: f64,
    beta: f64,
}

impl TestSpec {
    pub fn new(p0: f64, p1: f64, alpha: f64, beta: f64) -> Result<Self, DetectorError> {
        if !(p0 > 0.0 && p0 < p1 && p1 < 1.0) {
            return Err(DetectorError::InvalidThresholds { p0, p1 });
        }
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(DetectorError::InvalidRiskBudgets { alpha, beta });
        }
        Ok(TestSpec {
            p0,
            p1,
            alpha,
            beta,
        })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// The detection algorithm's three positive knobs: weighting coefficients
/// `a`, `b` and the risk tuning parameter `zeta`.
///
/// `zeta*a >= 1` or `zeta*b >= 1` is rejected at construction: the
/// corresponding threshold `ln(1/(zeta*a))` would be non-positive and one
/// side of the test would fire unconditionally at `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TunedParams {
    a: f64,
    b: f64,
    zeta: f64,
}

impl TunedParams {
    pub fn new(a: f64, b: f64, zeta: f64) -> Result<Self, DetectorError> {
        if !(a > 0.0 && b > 0.0 && zeta > 0.0) {
            return Err(DetectorError::NonPositiveParams { a, b, zeta });
        }
        let (zeta_a, zeta_b) = (zeta * a, zeta * b);
        if !(zeta_a < 1.0 && zeta_b < 1.0) {
            return Err(DetectorError::DegenerateProducts { zeta_a, zeta_b });
        }
        Ok(TunedParams { a, b, zeta })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Product `zeta*a`, the only form in which `a` enters the rule.
    pub fn zeta_a(&self) -> f64 {
        self.zeta * self.a
    }

    /// Product `zeta*b`.
    pub fn zeta_b(&self) -> f64 {
        self.zeta * self.b
    }
}

// ---------------------------------------------------------------------------
// Stopping statistics
// ---------------------------------------------------------------------------

/// Bernoulli KL divergence `KL(p_hat || q)` in nats, with the closed
/// endpoint cases `ln(1/(1-q))` at `p_hat = 0` and `ln(1/q)` at `p_hat = 1`.
///
/// Callers guarantee `p_hat` in [0,1] and `q` in (0,1).
pub(crate) fn kl_bernoulli(p_hat: f64, q: f64) -> f64 {
    if p_hat == 0.0 {
        -(1.0 - q).ln()
    } else if p_hat == 1.0 {
        -q.ln()
    } else {
        p_hat * (p_hat / q).ln() + (1.0 - p_hat) * ((1.0 - p_hat) / (1.0 - q)).ln()
    }
}

fn check_unit_interval(name: &'static str, value: f64, open: bool) -> Result<(), DetectorError> {
    let ok = if open {
        value > 0.0 && value < 1.0
    } else {
        (0.0..=1.0).contains(&value)
    };
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(DetectorError::Domain { name, value })
    }
}

/// The statistic `Y_n`: divergence of the empirical rate from `p0`.
/// Non-negative, zero exactly at `p_hat = p0`.
pub fn y_stat(p_hat: f64, p0: f64) -> Result<f64, DetectorError> {
    check_unit_interval("p0", p0, true)?;
    check_unit_interval("p_hat", p_hat, false)?;
    Ok(kl_bernoulli(p_hat, p0))
}

/// The statistic `Z_n`: divergence of the empirical rate from `p1`.
pub fn z_stat(p_hat: f64, p1: f64) -> Result<f64, DetectorError> {
    check_unit_interval("p1", p1, true)?;
    check_unit_interval("p_hat", p_hat, false)?;
    Ok(kl_bernoulli(p_hat, p1))
}

/// Stateless evaluation of the stopping and decision rule at lattice point
/// `(n, s)`.  Returns `None` while no stopping condition holds.
///
/// The scanner clause is evaluated first; at the rare terminal cells where
/// both clauses hold, scanner wins (security-conservative tie-break).
/// `p_hat` is recomputed from the integer counts on every call; the single
/// correctly-rounded division keeps the side-condition comparisons exact at
/// these lattice sizes.
pub fn decide(n: u64, s: u64, spec: &TestSpec, params: &TunedParams) -> Option<Verdict> {
    debug_assert!(n >= 1 && s <= n);
    let nf = n as f64;
    let p_hat = s as f64 / nf;
    if kl_bernoulli(p_hat, spec.p1) >= -params.zeta_b().ln() / nf && p_hat <= spec.p1 {
        return Some(Verdict::Scanner);
    }
    if kl_bernoulli(p_hat, spec.p0) >= -params.zeta_a().ln() / nf && p_hat >= spec.p0 {
        return Some(Verdict::Benign);
    }
    None
}

// ---------------------------------------------------------------------------
// Streaming detector state
// ---------------------------------------------------------------------------

/// Per-source streaming state: observation count, success count and the
/// terminal decision once reached.  Terminal states are frozen; further
/// steps are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectorState {
    n: u64,
    s: u64,
    decision: Option<Verdict>,
}

impl DetectorState {
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

    /// Empirical success rate, `None` before the first observation.
    pub fn p_hat(&self) -> Option<f64> {
        (self.n > 0).then(|| self.s as f64 / self.n as f64)
    }

    /// Feed one outcome (`true` = success) and re-evaluate the rule.
    pub fn step(
        &mut self,
        success: bool,
        spec: &TestSpec,
        params: &TunedParams,
    ) -> Result<Option<Verdict>, DetectorError> {
        if self.decision.is_some() {
            return Err(DetectorError::AlreadyDecided);
        }
        self.n += 1;
        if success {
            self.s += 1;
        }
        self.decision = decide(self.n, self.s, spec, params);
        Ok(self.decision)
    }
}

// ---------------------------------------------------------------------------
// Precomputed stopping boundaries
// ---------------------------------------------------------------------------

/// One row of a [`BoundaryTable`]: the largest success count that triggers
/// the scanner decision at this `n`, and the smallest that triggers benign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryRow {
    pub s_scanner: Option<u64>,
    pub s_benign: Option<u64>,
}

/// Per-step stopping sets of the rule, tabulated for `n = 1..=n_max`.
///
/// The scanner set at each `n` is the down-set `{0..=s_scanner}` and the
/// benign set the up-set `{s_benign..=n}`; contiguity follows from the
/// monotonicity of the statistics in `p_hat` on the relevant side of each
/// threshold.  Immutable after construction and shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTable {
    rows: Vec<BoundaryRow>,
}

impl BoundaryTable {
    /// Tabulate the rule by scanning every `s` at each `n`.
    pub fn build(spec: &TestSpec, params: &TunedParams, n_max: u64) -> Self {
        assert!(n_max >= 1, "n_max must be at least 1");
        let mut rows = Vec::with_capacity(n_max as usize);
        for n in 1..=n_max {
            let mut s_scanner = None;
            let mut s_benign = None;
            for s in 0..=n {
                match decide(n, s, spec, params) {
                    Some(Verdict::Scanner) => s_scanner = Some(s),
                    Some(Verdict::Benign) if s_benign.is_none() => s_benign = Some(s),
                    _ => {}
                }
            }
            rows.push(BoundaryRow {
                s_scanner,
                s_benign,
            });
        }
        BoundaryTable { rows }
    }

    pub fn n_max(&self) -> u64 {
        self.rows.len() as u64
    }

    /// Row for step `n` (1-based, `n <= n_max`).
    pub fn row(&self, n: u64) -> BoundaryRow {
        self.rows[(n - 1) as usize]
    }

    /// Table-driven decision at `(n, s)`; agrees with [`decide`] on every
    /// lattice point covered by the table.
    pub fn decide(&self, n: u64, s: u64) -> Option<Verdict> {
        let row = self.row(n);
        if let Some(hi) = row.s_scanner {
            if s <= hi {
                return Some(Verdict::Scanner);
            }
        }
        if let Some(lo) = row.s_benign {
            if s >= lo {
                return Some(Verdict::Benign);
            }
        }
        None
    }

    /// CSV export (`n,s_scanner,s_benign`, absent boundaries as empty fields).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,s_scanner,s_benign\n");
        for (i, row) in self.rows.iter().enumerate() {
            let fmt_opt = |v: Option<u64>| v.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{}\n",
                i + 1,
                fmt_opt(row.s_scanner),
                fmt_opt(row.s_benign)
            ));
        }
        out
    }
}
