//! Risk tuning: determines the parameters `(a, b, zeta)` so the exact
//! risks at the design points stay within budget while the test remains as
//! fast as possible.
//!
//! Two layers:
//!
//! - [`bisect_zeta`]: for fixed weighting coefficients, scan `{2^-i}` for
//!   the largest power-of-two `zeta` meeting the risk requirement, then
//!   bisect upward inside `[zeta, 2*zeta)`.
//! - [`minimax_tune`]: the iterative minimax loop over the coefficients,
//!   minimizing `Q = max(A, B)` subject to `R = min(A, B) >= 1`, where
//!   `A` and `B` are the budget-to-realized-risk ratios at `p0` and `p1`.
//!
//! Feasibility of every candidate is established by exact lattice
//! evaluation over a bound computed fresh for that candidate; by the
//! monotonicity of the operating characteristic, compliance at the design
//! points extends to the whole specified range of `p`.

use thiserror::Error;

use crate::detector::{BoundaryTable, DetectorError, TestSpec, TunedParams, Verdict};
use crate::maxobs::{solve_max_obs, MaxObsError};
use crate::oc::{evaluate, OcError};

const ZETA_SCAN_MAX_POW: u32 = 60;
const BISECT_REL_TOL: f64 = 1e-6;
const BISECT_MAX_ITER: u32 = 200;
/// Relative tolerance for the `A* = Q*` / `B* = Q*` equality tests.
const RATIO_EQ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error("no feasible risk tuning parameter for a={a}, b={b} down to 2^-{max_pow}")]
    InfeasibleWeights { a: f64, b: f64, max_pow: u32 },
    #[error(transparent)]
    MaxObs(#[from] MaxObsError),
    #[error(transparent)]
    Oc(#[from] OcError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// One minimax iteration: candidate coefficients, the bisected `zeta*` and
/// the resulting budget ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneIteration {
    pub k: u32,
    pub a: f64,
    pub b: f64,
    pub zeta_star: f64,
    pub a_ratio: f64,
    pub b_ratio: f64,
    pub q: f64,
}

/// Diagnostics of a tuning run.  Ratios refer to the accepted iterate:
/// `a_ratio = alpha / Pr{reject H0 | p0}`, `b_ratio = beta / Pr{reject H1 |
/// p1}`, `q = max`, `r = min`.  `zeta_star` and `pre_absorption` expose the
/// accepted iterate before `zeta*` is folded into the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneDiagnostics {
    pub a_ratio: f64,
    pub b_ratio: f64,
    pub q: f64,
    pub r: f64,
    pub zeta_star: f64,
    pub pre_absorption: (f64, f64),
    pub zeta_bracket: (f64, f64),
    pub trace: Vec<TuneIteration>,
}

/// Exact `(Pr{reject H0 | p0}, Pr{reject H1 | p1})` for a parameterization:
/// the benign-acceptance probability at `p0` and the scanner-acceptance
/// probability at `p1`, evaluated over a bound solved for these parameters.
pub fn risks_at_design_points(
    spec: &TestSpec,
    params: &TunedParams,
) -> Result<(f64, f64), TuneError> {
    let bound = solve_max_obs(spec, params)?;
    let table = BoundaryTable::build(spec, params, bound.n_max);
    let at_p0 = evaluate(&table, spec.p0())?;
    let at_p1 = evaluate(&table, spec.p1())?;
    Ok((
        at_p0.accept_prob(Verdict::Benign),
        at_p1.accept_prob(Verdict::Scanner),
    ))
}

/// Risks for a raw `(a, b, zeta)` candidate; `None` when the products reach
/// 1 and the parameterization is degenerate (treated as infeasible).
fn candidate_risks(
    spec: &TestSpec,
    a: f64,
    b: f64,
    zeta: f64,
) -> Result<Option<(f64, f64)>, TuneError> {
    match TunedParams::new(a, b, zeta) {
        Ok(params) => risks_at_design_points(spec, &params).map(Some),
        Err(DetectorError::DegenerateProducts { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

struct BisectOutcome {
    zeta_star: f64,
    risk0: f64,
    risk1: f64,
    bracket: (f64, f64),
}

fn bisect_core(spec: &TestSpec, a: f64, b: f64) -> Result<BisectOutcome, TuneError> {
    let feasible = |risks: &Option<(f64, f64)>| {
        risks.is_some_and(|(r0, r1)| r0 <= spec.alpha() && r1 <= spec.beta())
    };

    // largest power-of-two zeta meeting the requirement
    let mut lower = None;
    for i in 0..=ZETA_SCAN_MAX_POW {
        let zeta = 2f64.powi(-(i as i32));
        let risks = candidate_risks(spec, a, b, zeta)?;
        if feasible(&risks) {
            lower = Some((zeta, risks.unwrap()));
            break;
        }
    }
    let Some((zeta_lower, mut best_risks)) = lower else {
        return Err(TuneError::InfeasibleWeights {
            a,
            b,
            max_pow: ZETA_SCAN_MAX_POW,
        });
    };

    // push zeta up inside [zeta_lower, 2*zeta_lower)
    let mut lo = zeta_lower;
    let mut hi = 2.0 * zeta_lower;
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= BISECT_REL_TOL * lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let risks = candidate_risks(spec, a, b, mid)?;
        if feasible(&risks) {
            lo = mid;
            best_risks = risks.unwrap();
        } else {
            hi = mid;
        }
    }

    Ok(BisectOutcome {
        zeta_star: lo,
        risk0: best_risks.0,
        risk1: best_risks.1,
        bracket: (lo, hi),
    })
}

/// Largest feasible risk tuning parameter for fixed coefficients, to 1e-6
/// relative.  The returned diagnostics carry the risks and ratios at
/// `zeta*` and a single-entry trace.
pub fn bisect_zeta(spec: &TestSpec, a: f64, b: f64) -> Result<(f64, TuneDiagnostics), TuneError> {
    let out = bisect_core(spec, a, b)?;
    let a_ratio = spec.alpha() / out.risk0;
    let b_ratio = spec.beta() / out.risk1;
    let diag = TuneDiagnostics {
        a_ratio,
        b_ratio,
        q: a_ratio.max(b_ratio),
        r: a_ratio.min(b_ratio),
        zeta_star: out.zeta_star,
        pre_absorption: (a, b),
        zeta_bracket: out.bracket,
        trace: vec![TuneIteration {
            k: 0,
            a,
            b,
            zeta_star: out.zeta_star,
            a_ratio,
            b_ratio,
            q: a_ratio.max(b_ratio),
        }],
    };
    Ok((out.zeta_star, diag))
}

/// The iterative minimax loop.  Starts from `a = alpha`, `b = beta`; each
/// iteration bisects `zeta*`, keeps the iterate if it improves `Q`, and
/// inflates whichever coefficient attains `Q` by `1 + (Q-1)/5`.  Returns
/// `zeta = 1` with `zeta*` absorbed into the accepted coefficients, which
/// leaves the realized test unchanged (the rule depends only on the
/// products).
pub fn minimax_tune(
    spec: &TestSpec,
    k_max: u32,
) -> Result<(TunedParams, TuneDiagnostics), TuneError> {
    let mut a = spec.alpha();
    let mut b = spec.beta();
    let mut q_hat = f64::INFINITY;
    let mut accepted: Option<TuneDiagnostics> = None;
    let mut trace = Vec::with_capacity(k_max as usize + 1);

    for k in 0..=k_max {
        let out = bisect_core(spec, a, b)?;
        let a_ratio = spec.alpha() / out.risk0;
        let b_ratio = spec.beta() / out.risk1;
        let q = a_ratio.max(b_ratio);
        trace.push(TuneIteration {
            k,
            a,
            b,
            zeta_star: out.zeta_star,
            a_ratio,
            b_ratio,
            q,
        });

        if q < q_hat || accepted.is_none() {
            q_hat = q.min(q_hat);
            accepted = Some(TuneDiagnostics {
                a_ratio,
                b_ratio,
                q,
                r: a_ratio.min(b_ratio),
                zeta_star: out.zeta_star,
                pre_absorption: (a, b),
                zeta_bracket: out.bracket,
                trace: Vec::new(),
            });
        }

        // both branches may fire when A* and B* tie at Q*
        let tol = RATIO_EQ_TOL * q.max(1.0);
        let (scaled_a, scaled_b) = (out.zeta_star * a, out.zeta_star * b);
        if (a_ratio - q).abs() <= tol {
            a = scaled_a * (1.0 + (q - 1.0) / 5.0);
        }
        if (b_ratio - q).abs() <= tol {
            b = scaled_b * (1.0 + (q - 1.0) / 5.0);
        }
    }

    let mut diag = accepted.expect("loop runs at least once");
    diag.trace = trace;
    let (pre_a, pre_b) = diag.pre_absorption;
    let params = TunedParams::new(diag.zeta_star * pre_a, diag.zeta_star * pre_b, 1.0)?;
    Ok((params, diag))
}

/// Per-iteration trace as CSV (`k,a,b,zeta_star,A,B,Q`).
pub fn trace_csv(diag: &TuneDiagnostics) -> String {
    let mut out = String::from("k,a,b,zeta_star,A,B,Q\n");
    for it in &diag.trace {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            it.k, it.a, it.b, it.zeta_star, it.a_ratio, it.b_ratio, it.q
        ));
    }
    out
}
