//! Triple-hypothesis classification: scanner / marginal / benign.
//!
//! Tests `H0: p <= p0`, `H1: p0 < p < p1`, `H2: p >= p1` with indifference
//! zones `(p0', p0'')` and `(p1', p1'')` around the thresholds.  The scheme
//! composes two bounded binary sub-tests built from the same machinery as
//! the binary detector:
//!
//! - `L` over `(p0', p0'')` with budgets `(delta0, delta1)`,
//! - `U` over `(p1', p1'')` with budgets `(delta1, delta2)`.
//!
//! A lattice cell accepts H0 when `L` accepts its lower hypothesis, H2 when
//! `U` accepts its upper hypothesis, and H1 when `L` accepts upper while `U`
//! accepts lower.  Compliance with the three error-probability requirements
//! is verified numerically on a grid at construction; if the composition is
//! too loose, `delta1` is halved per sub-test and both are re-tuned (the
//! fallback is recorded in the diagnostics).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{decide, TestSpec, TunedParams, Verdict};
use crate::maxobs::{solve_max_obs, MaxObsError};
use crate::oc::{evaluate, OcError, StoppingPlan};
use crate::tuning::{minimax_tune, TuneError};

/// Grid resolution of the construction-time compliance check.
const GRID_CHECK_POINTS: u32 = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TripleError {
    #[error("thresholds must satisfy 0 < p0' < p0 < p0'' < p1' < p1 < p1'' < 1")]
    InvalidChain,
    #[error("each delta must lie in (0,1), got ({delta0}, {delta1}, {delta2})")]
    InvalidDeltas {
        delta0: f64,
        delta1: f64,
        delta2: f64,
    },
    #[error("composite plan leaves cell (n={n}, s={s}) undecided at its horizon")]
    CompositeNotClosed { n: u64, s: u64 },
    #[error("triple detector already reached a terminal decision")]
    AlreadyDecided,
    #[error(transparent)]
    Tune(#[from] TuneError),
    #[error(transparent)]
    MaxObs(#[from] MaxObsError),
    #[error(transparent)]
    Oc(#[from] OcError),
}

/// The triple problem: thresholds, indifference-zone edges and the three
/// error budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripleSpec {
    p0: f64,
    p1: f64,
    p0_lo: f64,
    p0_hi: f64,
    p1_lo: f64,
    p1_hi: f64,
    delta0: f64,
    delta1: f64,
    delta2: f64,
}

impl TripleSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p0: f64,
        p1: f64,
        p0_lo: f64,
        p0_hi: f64,
        p1_lo: f64,
        p1_hi: f64,
        delta0: f64,
        delta1: f64,
        delta2: f64,
    ) -> Result<Self, TripleError> {
        let chain = [0.0, p0_lo, p0, p0_hi, p1_lo, p1, p1_hi, 1.0];
        if !chain.windows(2).all(|w| w[0] < w[1]) {
            return Err(TripleError::InvalidChain);
        }
        for d in [delta0, delta1, delta2] {
            if !(d > 0.0 && d < 1.0) {
                return Err(TripleError::InvalidDeltas {
                    delta0,
                    delta1,
                    delta2,
                });
            }
        }
        Ok(TripleSpec {
            p0,
            p1,
            p0_lo,
            p0_hi,
            p1_lo,
            p1_hi,
            delta0,
            delta1,
            delta2,
        })
    }

    /// Indifference zones of width `2*offset` centered on each threshold.
    pub fn symmetric(
        p0: f64,
        p1: f64,
        offset: f64,
        delta0: f64,
        delta1: f64,
        delta2: f64,
    ) -> Result<Self, TripleError> {
        Self::new(
            p0,
            p1,
            p0 - offset,
            p0 + offset,
            p1 - offset,
            p1 + offset,
            delta0,
            delta1,
            delta2,
        )
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p0_lo(&self) -> f64 {
        self.p0_lo
    }

    pub fn p0_hi(&self) -> f64 {
        self.p0_hi
    }

    pub fn p1_lo(&self) -> f64 {
        self.p1_lo
    }

    pub fn p1_hi(&self) -> f64 {
        self.p1_hi
    }

    pub fn deltas(&self) -> (f64, f64, f64) {
        (self.delta0, self.delta1, self.delta2)
    }

    /// True strictly inside either indifference zone, where no error
    /// requirement applies.
    pub fn in_indifference_zone(&self, p: f64) -> bool {
        (p > self.p0_lo && p < self.p0_hi) || (p > self.p1_lo && p < self.p1_hi)
    }

    /// The hypothesis region containing `p`.
    fn true_verdict(&self, p: f64) -> Verdict {
        if p <= self.p0 {
            Verdict::Scanner
        } else if p < self.p1 {
            Verdict::Marginal
        } else {
            Verdict::Benign
        }
    }
}

/// Construction diagnostics of a [`TriplePlan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripleDiagnostics {
    /// Whether the delta1-halving fallback was taken.
    pub delta1_halved: bool,
    /// Whether the final plan passed the construction grid check.
    pub grid_check_passed: bool,
    /// Cells where both sub-tests claim their outer hypothesis (expected 0).
    pub conflict_cells: u64,
    pub lower_n_max: u64,
    pub upper_n_max: u64,
}

/// The composite stopping plan.  Stateless like the binary rule; the two
/// sub-rules are evaluated directly at each lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct TriplePlan {
    lower_spec: TestSpec,
    lower_params: TunedParams,
    upper_spec: TestSpec,
    upper_params: TunedParams,
    horizon: u64,
    diagnostics: TripleDiagnostics,
}

impl TriplePlan {
    pub fn diagnostics(&self) -> TripleDiagnostics {
        self.diagnostics
    }

    pub fn lower(&self) -> (&TestSpec, &TunedParams) {
        (&self.lower_spec, &self.lower_params)
    }

    pub fn upper(&self) -> (&TestSpec, &TunedParams) {
        (&self.upper_spec, &self.upper_params)
    }

    fn compose(&self, n: u64, s: u64) -> Option<Verdict> {
        let low = decide(n, s, &self.lower_spec, &self.lower_params);
        let up = decide(n, s, &self.upper_spec, &self.upper_params);
        match (low, up) {
            // conflict cells (low scanner, up benign) resolve to scanner;
            // they are impossible for contiguous bands and counted at build
            (Some(Verdict::Scanner), _) => Some(Verdict::Scanner),
            (_, Some(Verdict::Benign)) => Some(Verdict::Benign),
            (Some(Verdict::Benign), Some(Verdict::Scanner)) => Some(Verdict::Marginal),
            _ => None,
        }
    }

    /// Acceptance-region export (`n,s,label`), one row per lattice cell.
    pub fn regions_csv(&self) -> String {
        let mut out = String::from("n,s,label\n");
        for n in 1..=self.horizon {
            for s in 0..=n {
                let label = match self.compose(n, s) {
                    Some(v) => v.as_str(),
                    None => "continue",
                };
                out.push_str(&format!("{n},{s},{label}\n"));
            }
        }
        out
    }
}

impl StoppingPlan for TriplePlan {
    fn horizon(&self) -> u64 {
        self.horizon
    }

    fn label(&self, n: u64, s: u64) -> Option<Verdict> {
        self.compose(n, s)
    }
}

fn sub_specs(spec: &TripleSpec, delta1: f64) -> Result<(TestSpec, TestSpec), TripleError> {
    let lower =
        TestSpec::new(spec.p0_lo, spec.p0_hi, spec.delta0, delta1).map_err(TuneError::Detector)?;
    let upper =
        TestSpec::new(spec.p1_lo, spec.p1_hi, delta1, spec.delta2).map_err(TuneError::Detector)?;
    Ok((lower, upper))
}

fn build_with_delta1(
    spec: &TripleSpec,
    delta1: f64,
    k_max: u32,
) -> Result<TriplePlan, TripleError> {
    let (lower_spec, upper_spec) = sub_specs(spec, delta1)?;
    let (lower_params, _) = minimax_tune(&lower_spec, k_max)?;
    let (upper_params, _) = minimax_tune(&upper_spec, k_max)?;
    let lower_n_max = solve_max_obs(&lower_spec, &lower_params)?.n_max;
    let upper_n_max = solve_max_obs(&upper_spec, &upper_params)?.n_max;

    let mut plan = TriplePlan {
        lower_spec,
        lower_params,
        upper_spec,
        upper_params,
        horizon: lower_n_max.max(upper_n_max),
        diagnostics: TripleDiagnostics {
            delta1_halved: false,
            grid_check_passed: false,
            conflict_cells: 0,
            lower_n_max,
            upper_n_max,
        },
    };

    // closure and conflict audit over the whole lattice
    let mut conflicts = 0;
    for n in 1..=plan.horizon {
        for s in 0..=n {
            let low = decide(n, s, &plan.lower_spec, &plan.lower_params);
            let up = decide(n, s, &plan.upper_spec, &plan.upper_params);
            if low == Some(Verdict::Scanner) && up == Some(Verdict::Benign) {
                conflicts += 1;
            }
            if n == plan.horizon && plan.compose(n, s).is_none() {
                return Err(TripleError::CompositeNotClosed { n, s });
            }
        }
    }
    plan.diagnostics.conflict_cells = conflicts;
    Ok(plan)
}

fn grid_check(plan: &TriplePlan, spec: &TripleSpec) -> Result<bool, TripleError> {
    let (delta0, delta1, delta2) = spec.deltas();
    for i in 1..GRID_CHECK_POINTS {
        let p = f64::from(i) / f64::from(GRID_CHECK_POINTS);
        if spec.in_indifference_zone(p) {
            continue;
        }
        let budget = if p <= spec.p0_lo {
            delta0
        } else if p <= spec.p1_lo {
            delta1
        } else {
            delta2
        };
        let report = evaluate(plan, p)?;
        let correct = report.accept_prob(spec.true_verdict(p));
        let risk = 1.0 - correct - report.residual_mass;
        if risk > budget {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Build the composite plan: tune both sub-tests, bound them, audit the
/// lattice and verify the three error requirements on a grid, falling back
/// to a halved `delta1` once if needed.
pub fn build_triple_plan(spec: &TripleSpec, k_max: u32) -> Result<TriplePlan, TripleError> {
    let mut plan = build_with_delta1(spec, spec.delta1, k_max)?;
    if grid_check(&plan, spec)? {
        plan.diagnostics.grid_check_passed = true;
        return Ok(plan);
    }
    plan = build_with_delta1(spec, spec.delta1 / 2.0, k_max)?;
    plan.diagnostics.delta1_halved = true;
    plan.diagnostics.grid_check_passed = grid_check(&plan, spec)?;
    Ok(plan)
}

/// Risk at one grid point: probability of accepting a hypothesis whose
/// region excludes `p`.  Zone points carry no requirement and are flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleRiskPoint {
    pub p: f64,
    pub risk: f64,
    pub in_indifference_zone: bool,
}

/// Probability of an incorrect decision across a grid.
pub fn triple_risk_curve(
    plan: &TriplePlan,
    spec: &TripleSpec,
    p_grid: &[f64],
) -> Result<Vec<TripleRiskPoint>, TripleError> {
    p_grid
        .iter()
        .map(|&p| {
            let report = evaluate(plan, p)?;
            let risk = 1.0 - report.accept_prob(spec.true_verdict(p)) - report.residual_mass;
            Ok(TripleRiskPoint {
                p,
                risk,
                in_indifference_zone: spec.in_indifference_zone(p),
            })
        })
        .collect()
}

/// Streaming state for the composite detector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TripleState {
    n: u64,
    s: u64,
    decision: Option<Verdict>,
}

impl TripleState {
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

    pub fn step(
        &mut self,
        success: bool,
        plan: &TriplePlan,
    ) -> Result<Option<Verdict>, TripleError> {
        if self.decision.is_some() {
            return Err(TripleError::AlreadyDecided);
        }
        self.n += 1;
        if success {
            self.s += 1;
        }
        if self.n > plan.horizon() {
            return Err(TripleError::CompositeNotClosed {
                n: self.n,
                s: self.s,
            });
        }
        self.decision = plan.label(self.n, self.s);
        Ok(self.decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oc::brute_force_oc;

    fn worked_spec() -> TripleSpec {
        TripleSpec::symmetric(1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0, 0.1, 0.1, 0.1).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(worked_spec().p0_lo() > 0.0);
        assert!(matches!(
            TripleSpec::new(0.3, 0.6, 0.35, 0.4, 0.5, 0.7, 0.1, 0.1, 0.1),
            Err(TripleError::InvalidChain)
        ));
        assert!(matches!(
            TripleSpec::symmetric(1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0, 0.0, 0.1, 0.1),
            Err(TripleError::InvalidDeltas { .. })
        ));
        // zones may not overlap
        assert!(TripleSpec::symmetric(0.4, 0.6, 0.15, 0.1, 0.1, 0.1).is_err());
    }

    #[test]
    fn worked_config_plan_shape() {
        let spec = worked_spec();
        let plan = build_triple_plan(&spec, 4).unwrap();
        let d = plan.diagnostics();
        assert!(d.grid_check_passed);
        assert_eq!(d.conflict_cells, 0);
        assert_eq!(plan.horizon(), d.lower_n_max.max(d.upper_n_max));

        // three disjoint contiguous bands at the terminal row
        let h = plan.horizon();
        let labels: Vec<_> = (0..=h).map(|s| plan.label(h, s)).collect();
        assert!(labels.iter().all(|l| l.is_some()));
        let mut bands = vec![];
        for l in &labels {
            if bands.last().map(|&(v, _)| v) != Some(l.unwrap()) {
                bands.push((l.unwrap(), 1u64));
            } else {
                bands.last_mut().unwrap().1 += 1;
            }
        }
        let order: Vec<_> = bands.iter().map(|&(v, _)| v).collect();
        assert_eq!(
            order,
            vec![Verdict::Scanner, Verdict::Marginal, Verdict::Benign]
        );
    }

    #[test]
    fn bands_ordered_at_every_step() {
        // acceptance cells appear in scanner < marginal < benign order in s,
        // so the three regions are disjoint bands
        let spec = worked_spec();
        let plan = build_triple_plan(&spec, 4).unwrap();
        let rank = |v: Verdict| match v {
            Verdict::Scanner => 0,
            Verdict::Marginal => 1,
            Verdict::Benign => 2,
        };
        for n in 1..=plan.horizon() {
            let mut highest = 0;
            for v in [Verdict::Scanner, Verdict::Marginal, Verdict::Benign] {
                let members: Vec<u64> = (0..=n).filter(|&s| plan.label(n, s) == Some(v)).collect();
                if let (Some(&first), Some(&last)) = (members.first(), members.last()) {
                    assert_eq!(
                        members.len() as u64,
                        last - first + 1,
                        "{v} band has a hole at n={n}"
                    );
                }
            }
            for s in 0..=n {
                if let Some(v) = plan.label(n, s) {
                    assert!(rank(v) >= highest, "band order violated at ({n},{s}): {v}");
                    highest = rank(v);
                }
            }
        }
    }

    #[test]
    fn degenerate_streams() {
        let spec = worked_spec();
        let plan = build_triple_plan(&spec, 4).unwrap();

        let mut st = TripleState::new();
        let mut verdict = None;
        while verdict.is_none() {
            verdict = st.step(false, &plan).unwrap();
        }
        assert_eq!(verdict, Some(Verdict::Scanner));
        assert!(st.n() <= plan.horizon());

        let mut st = TripleState::new();
        let mut verdict = None;
        while verdict.is_none() {
            verdict = st.step(true, &plan).unwrap();
        }
        assert_eq!(verdict, Some(Verdict::Benign));
        assert_eq!(st.step(true, &plan), Err(TripleError::AlreadyDecided));
    }

    #[test]
    fn risk_curve_flags_zones() {
        let spec = worked_spec();
        let plan = build_triple_plan(&spec, 4).unwrap();
        let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
        let curve = triple_risk_curve(&plan, &spec, &grid).unwrap();
        assert!(!curve[0].in_indifference_zone);
        assert!(curve[1].in_indifference_zone); // 0.3 inside (2/9, 4/9)
        assert!(!curve[2].in_indifference_zone);
        assert!(curve[3].in_indifference_zone);
        assert!(!curve[4].in_indifference_zone);
        for pt in curve.iter().filter(|pt| !pt.in_indifference_zone) {
            assert!(pt.risk <= 0.1, "risk {} at p={}", pt.risk, pt.p);
        }
    }

    #[test]
    fn small_composite_matches_brute_force() {
        // a wide-zone spec keeps both sub-test bounds within the brute-force
        // horizon so the composite can be cross-checked path by path
        let spec = TripleSpec::new(0.25, 0.75, 0.04, 0.48, 0.52, 0.96, 0.25, 0.25, 0.25).unwrap();
        let plan = build_triple_plan(&spec, 2).unwrap();
        assert!(plan.horizon() <= 14, "horizon {}", plan.horizon());
        for p in [0.1, 0.5, 0.9] {
            let dp = evaluate(&plan, p).unwrap();
            let bf = brute_force_oc(&plan, p).unwrap();
            for v in [Verdict::Scanner, Verdict::Marginal, Verdict::Benign] {
                assert!(
                    (dp.accept_prob(v) - bf.accept_prob(v)).abs() < 1e-12,
                    "{v} at p={p}"
                );
            }
        }
    }

    #[test]
    fn regions_csv_shape() {
        let spec = worked_spec();
        let plan = build_triple_plan(&spec, 4).unwrap();
        let csv = plan.regions_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,s,label"));
        let h = plan.horizon();
        let expected_rows = (h * (h + 1)) / 2 + h; // sum of n+1 cells per step
        assert_eq!(csv.lines().count() as u64, expected_rows + 1);
    }
}
