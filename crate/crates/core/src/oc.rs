//! Exact operating characteristics for boundary-defined detectors.
//!
//! Any detector whose rule can be evaluated statelessly at a lattice point
//! `(n, s)` is a [`StoppingPlan`].  The primary evaluator is a forward
//! dynamic program over the lattice: probability mass flows only through
//! `continue` cells and is banked the moment it enters a decision cell.
//! [`brute_force_oc`] enumerates every outcome path instead and serves as an
//! independent oracle for small horizons.
//!
//! For plans whose horizon is a truncation rather than a hard bound (the
//! random-walk baseline), evaluation can halt once the continuing mass drops
//! below a cutoff; the unstopped remainder is always reported as
//! `residual_mass`, never silently dropped.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::detector::{TestSpec, Verdict};

/// Path enumeration is limited to `2^20` outcome sequences.
pub const BRUTE_FORCE_MAX_HORIZON: u64 = 20;

/// Default continuing-mass cutoff for truncated evaluation.
pub const DEFAULT_MASS_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OcError {
    #[error("success rate must lie strictly inside (0,1), got {p}")]
    InvalidProbability { p: f64 },
    #[error("plan horizon must be at least 1")]
    EmptyPlan,
    #[error("brute force refuses horizon {horizon} (max {max})")]
    BruteForceHorizon { horizon: u64, max: u64 },
    #[error("quantile must lie in [0,1), got {q}")]
    InvalidQuantile { q: f64 },
    #[error("horizon exhausted before reaching quantile {q}; accumulated stop mass {accumulated}")]
    HorizonExceeded { q: f64, accumulated: f64 },
}

/// A stateless labeling of lattice points: `None` to keep observing,
/// `Some(verdict)` to stop.  `horizon` is a hard bound for the bounded test
/// and a truncation horizon for unbounded baselines.
pub trait StoppingPlan {
    fn horizon(&self) -> u64;
    fn label(&self, n: u64, s: u64) -> Option<Verdict>;
}

impl StoppingPlan for crate::detector::BoundaryTable {
    fn horizon(&self) -> u64 {
        self.n_max()
    }

    fn label(&self, n: u64, s: u64) -> Option<Verdict> {
        self.decide(n, s)
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Exact operating characteristics of a plan at a given success rate.
#[derive(Debug, Clone, PartialEq)]
pub struct OcReport {
    pub p: f64,
    /// Probability of stopping with each verdict.
    pub accept: BTreeMap<Verdict, f64>,
    /// Probability of stopping exactly at `n`, for each `n` with mass.
    pub stop_dist: Vec<(u64, f64)>,
    /// Expected stop time.  Mass still running when evaluation halts is
    /// counted at the last evaluated step, so `asn <= horizon` always holds.
    pub asn: f64,
    /// Probability not yet stopped when evaluation halted.
    pub residual_mass: f64,
    /// Last lattice step actually evaluated (`<= horizon`).
    pub evaluated_to: u64,
}

impl OcReport {
    pub fn accept_prob(&self, verdict: Verdict) -> f64 {
        self.accept.get(&verdict).copied().unwrap_or(0.0)
    }

    /// Sum of all banked and residual mass; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.accept.values().sum::<f64>() + self.residual_mass
    }
}

/// Evaluation controls. `mass_cutoff = Some(c)` halts the recursion once the
/// continuing mass falls below `c`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub mass_cutoff: Option<f64>,
}

impl EvalOptions {
    /// Truncated evaluation with the default cutoff.
    pub fn truncated() -> Self {
        EvalOptions {
            mass_cutoff: Some(DEFAULT_MASS_CUTOFF),
        }
    }
}

// ---------------------------------------------------------------------------
// Forward lattice recursion
// ---------------------------------------------------------------------------

fn validate(plan: &dyn StoppingPlan, p: f64) -> Result<(), OcError> {
    if !(p > 0.0 && p < 1.0) || !p.is_finite() {
        return Err(OcError::InvalidProbability { p });
    }
    if plan.horizon() == 0 {
        return Err(OcError::EmptyPlan);
    }
    Ok(())
}

/// Exact acceptance probabilities, stop-time distribution and ASN by forward
/// dynamic programming, evaluated to the plan's full horizon.
pub fn evaluate(plan: &dyn StoppingPlan, p: f64) -> Result<OcReport, OcError> {
    evaluate_with(plan, p, EvalOptions::default())
}

/// [`evaluate`] with explicit controls.
pub fn evaluate_with(
    plan: &dyn StoppingPlan,
    p: f64,
    options: EvalOptions,
) -> Result<OcReport, OcError> {
    validate(plan, p)?;
    let q = 1.0 - p;

    // continuing mass over a contiguous s-window [s_lo, s_lo + row.len())
    let mut row: Vec<f64> = vec![1.0];
    let mut s_lo: u64 = 0;
    let mut accept = BTreeMap::new();
    let mut stop_dist = Vec::new();
    let mut asn = 0.0;
    let mut evaluated_to = 0;

    for n in 1..=plan.horizon() {
        let mut next = vec![0.0; row.len() + 1];
        for (i, &m) in row.iter().enumerate() {
            if m > 0.0 {
                next[i] += m * q;
                next[i + 1] += m * p;
            }
        }

        let mut stopped_here = 0.0;
        let mut continuing = 0.0;
        for (i, m) in next.iter_mut().enumerate() {
            if *m == 0.0 {
                continue;
            }
            let s = s_lo + i as u64;
            if let Some(verdict) = plan.label(n, s) {
                *accept.entry(verdict).or_insert(0.0) += *m;
                stopped_here += *m;
                *m = 0.0;
            } else {
                continuing += *m;
            }
        }
        if stopped_here > 0.0 {
            stop_dist.push((n, stopped_here));
            asn += n as f64 * stopped_here;
        }

        evaluated_to = n;
        if continuing == 0.0 {
            row = Vec::new();
            break;
        }
        // trim zero-mass cells off both window edges
        let lead = next.iter().take_while(|&&m| m == 0.0).count();
        next.drain(..lead);
        s_lo += lead as u64;
        while next.last() == Some(&0.0) {
            next.pop();
        }
        row = next;
        if let Some(cutoff) = options.mass_cutoff {
            if continuing < cutoff {
                break;
            }
        }
    }

    // + 0.0 normalizes the -0.0 an empty sum produces
    let residual_mass: f64 = row.iter().sum::<f64>() + 0.0;
    asn += residual_mass * evaluated_to as f64;
    debug_assert!((1.0 - accept.values().sum::<f64>() - residual_mass).abs() < 1e-9);

    Ok(OcReport {
        p,
        accept,
        stop_dist,
        asn,
        residual_mass,
        evaluated_to,
    })
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

/// Enumerates every binary outcome sequence up to the horizon, applying the
/// plan sequentially and accumulating exact path probabilities.  Same report
/// contract as [`evaluate`]; independent of the lattice recursion.
pub fn brute_force_oc(plan: &dyn StoppingPlan, p: f64) -> Result<OcReport, OcError> {
    validate(plan, p)?;
    if plan.horizon() > BRUTE_FORCE_MAX_HORIZON {
        return Err(OcError::BruteForceHorizon {
            horizon: plan.horizon(),
            max: BRUTE_FORCE_MAX_HORIZON,
        });
    }

    struct Walk<'a> {
        plan: &'a dyn StoppingPlan,
        p: f64,
        accept: BTreeMap<Verdict, f64>,
        dist: BTreeMap<u64, f64>,
        asn: f64,
        residual: f64,
    }

    impl Walk<'_> {
        fn go(&mut self, n: u64, s: u64, prob: f64) {
            for (outcome, pr) in [(0u64, 1.0 - self.p), (1, self.p)] {
                let (n2, s2, prob2) = (n + 1, s + outcome, prob * pr);
                if let Some(verdict) = self.plan.label(n2, s2) {
                    *self.accept.entry(verdict).or_insert(0.0) += prob2;
                    *self.dist.entry(n2).or_insert(0.0) += prob2;
                    self.asn += n2 as f64 * prob2;
                } else if n2 == self.plan.horizon() {
                    self.residual += prob2;
                    self.asn += n2 as f64 * prob2;
                } else {
                    self.go(n2, s2, prob2);
                }
            }
        }
    }

    let mut walk = Walk {
        plan,
        p,
        accept: BTreeMap::new(),
        dist: BTreeMap::new(),
        asn: 0.0,
        residual: 0.0,
    };
    walk.go(0, 0, 1.0);

    Ok(OcReport {
        p,
        accept: walk.accept,
        stop_dist: walk.dist.into_iter().collect(),
        asn: walk.asn,
        residual_mass: walk.residual,
        evaluated_to: plan.horizon(),
    })
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

/// Risk at one grid point.  `specified` is false inside `(p0, p1)`, where
/// the risk requirement imposes nothing and the value is reported as zero by
/// convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskPoint {
    pub p: f64,
    pub risk: f64,
    pub specified: bool,
}

/// Risk of a binary detector across a grid: probability of the benign
/// verdict for `p <= p0`, of the scanner verdict for `p >= p1`.
pub fn risk_curve(
    plan: &dyn StoppingPlan,
    spec: &TestSpec,
    p_grid: &[f64],
    options: EvalOptions,
) -> Result<Vec<RiskPoint>, OcError> {
    p_grid
        .iter()
        .map(|&p| {
            let report = evaluate_with(plan, p, options)?;
            let (risk, specified) = if p <= spec.p0() {
                (report.accept_prob(Verdict::Benign), true)
            } else if p >= spec.p1() {
                (report.accept_prob(Verdict::Scanner), true)
            } else {
                (0.0, false)
            };
            Ok(RiskPoint { p, risk, specified })
        })
        .collect()
}

/// One point of an ASN comparison curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsnRatioPoint {
    pub p: f64,
    pub asn_a: f64,
    pub asn_b: f64,
    pub ratio: f64,
    pub residual_a: f64,
    pub residual_b: f64,
}

/// Ratio of expected stop times `asn(plan_a) / asn(plan_b)` across a grid.
/// ASN is always >= 1, so the division needs no guard.
pub fn asn_ratio_curve(
    plan_a: &dyn StoppingPlan,
    plan_b: &dyn StoppingPlan,
    p_grid: &[f64],
    options: EvalOptions,
) -> Result<Vec<AsnRatioPoint>, OcError> {
    p_grid
        .iter()
        .map(|&p| {
            let ra = evaluate_with(plan_a, p, options)?;
            let rb = evaluate_with(plan_b, p, options)?;
            Ok(AsnRatioPoint {
                p,
                asn_a: ra.asn,
                asn_b: rb.asn,
                ratio: ra.asn / rb.asn,
                residual_a: ra.residual_mass,
                residual_b: rb.residual_mass,
            })
        })
        .collect()
}

/// Smallest `n` with `Pr{stopped by n} >= q`, by the same lattice recursion.
/// Runs truncated; exhausting the horizon first yields an error carrying the
/// mass accumulated so far.
pub fn stop_time_quantile(
    plan: &dyn StoppingPlan,
    p: f64,
    q: f64,
    options: EvalOptions,
) -> Result<u64, OcError> {
    validate(plan, p)?;
    if !(0.0..1.0).contains(&q) {
        return Err(OcError::InvalidQuantile { q });
    }
    let fail = 1.0 - p;

    let mut row: Vec<f64> = vec![1.0];
    let mut s_lo: u64 = 0;
    let mut stopped = 0.0;
    if stopped >= q {
        // q = 0: the stop time is at least 1
        return Ok(1);
    }

    for n in 1..=plan.horizon() {
        let mut next = vec![0.0; row.len() + 1];
        for (i, &m) in row.iter().enumerate() {
            if m > 0.0 {
                next[i] += m * fail;
                next[i + 1] += m * p;
            }
        }
        let mut continuing = 0.0;
        for (i, m) in next.iter_mut().enumerate() {
            if *m == 0.0 {
                continue;
            }
            if plan.label(n, s_lo + i as u64).is_some() {
                stopped += *m;
                *m = 0.0;
            } else {
                continuing += *m;
            }
        }
        if stopped >= q {
            return Ok(n);
        }
        if continuing == 0.0 {
            break;
        }
        let lead = next.iter().take_while(|&&m| m == 0.0).count();
        next.drain(..lead);
        s_lo += lead as u64;
        while next.last() == Some(&0.0) {
            next.pop();
        }
        row = next;
        if let Some(cutoff) = options.mass_cutoff {
            if continuing < cutoff {
                break;
            }
        }
    }
    Err(OcError::HorizonExceeded {
        q,
        accumulated: stopped,
    })
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

/// OC rows as CSV. With `include_marginal` the triple test's per-hypothesis
/// column is added between scanner and benign.
pub fn oc_csv(reports: &[OcReport], include_marginal: bool) -> String {
    let mut out = String::from(if include_marginal {
        "p,accept_scanner,accept_marginal,accept_benign,asn,residual\n"
    } else {
        "p,accept_scanner,accept_benign,asn,residual\n"
    });
    for r in reports {
        if include_marginal {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.p,
                r.accept_prob(Verdict::Scanner),
                r.accept_prob(Verdict::Marginal),
                r.accept_prob(Verdict::Benign),
                r.asn,
                r.residual_mass
            ));
        } else {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.p,
                r.accept_prob(Verdict::Scanner),
                r.accept_prob(Verdict::Benign),
                r.asn,
                r.residual_mass
            ));
        }
    }
    out
}

/// Stop-time distribution as CSV (`n,prob`).
pub fn stop_dist_csv(report: &OcReport) -> String {
    let mut out = String::from("n,prob\n");
    for (n, prob) in &report.stop_dist {
        out.push_str(&format!("{n},{prob}\n"));
    }
    out
}
