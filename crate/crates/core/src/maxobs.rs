//! Hard bound on the number of observations of the bounded test.
//!
//! The scanner and benign stopping regions widen as `n` grows; the bound is
//! derived from the crossing point of their continuous boundaries.  With
//! `g0(z) = ((1-p0)/(1-z))^{1-z} (p0/z)^z` and `g1` its `p1` twin, the pair
//!
//! ```text
//! g0(z) = (zeta*a)^{1/m},    g1(z) = (zeta*b)^{1/m}
//! ```
//!
//! is solved by eliminating `m`, bisecting for the crossing abscissa
//! `z* in (p0, p1)`, and substituting back.  The bound is `floor(m*) + 1`.
//! For `a = b` the crossing has a closed form.

use thiserror::Error;

use crate::detector::{decide, TestSpec, TunedParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaxObsError {
    #[error("zeta*a must lie in (0,1), got {zeta_a}")]
    InvalidProduct { zeta_a: f64 },
    #[error("no crossing of the boundary equations on ({p0}, {p1})")]
    NoCrossing { p0: f64, p1: f64 },
    #[error("solver bug: cell (n={n_max}, s={s}) is still undecided at the computed bound")]
    BoundNotTerminal { n_max: u64, s: u64 },
}

/// Solution of the bound equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxObsResult {
    /// Crossing abscissa, strictly inside `(p0, p1)`.
    pub z_star: f64,
    /// Continuous solution of the eliminated system.
    pub m_star: f64,
    /// Hard observation bound, `floor(m_star) + 1`.
    pub n_max: u64,
}

/// `ln g(z)` for threshold `p`; equals `-KL(z || p)`, strictly negative on
/// the open interval between the thresholds.
fn ln_g(z: f64, p: f64) -> f64 {
    (1.0 - z) * ((1.0 - p) / (1.0 - z)).ln() + z * (p / z).ln()
}

fn finish(
    spec: &TestSpec,
    zeta_a: f64,
    zeta_b: f64,
    z_star: f64,
) -> Result<MaxObsResult, MaxObsError> {
    let m_star = zeta_a.ln() / ln_g(z_star, spec.p0());
    let n_max = m_star.floor() as u64 + 1;

    // The bound is only trusted once the terminal row is verified: every
    // success count at n_max must be a stopping state.
    let params = TunedParams::new(zeta_a, zeta_b, 1.0)
        .map_err(|_| MaxObsError::InvalidProduct { zeta_a })?;
    for s in 0..=n_max {
        if decide(n_max, s, spec, &params).is_none() {
            return Err(MaxObsError::BoundNotTerminal { n_max, s });
        }
    }

    Ok(MaxObsResult {
        z_star,
        m_star,
        n_max,
    })
}

/// Solve the bound for arbitrary `(a, b)` by bisection on the crossing
/// abscissa, to 1e-12 absolute in `z`.
pub fn solve_max_obs(spec: &TestSpec, params: &TunedParams) -> Result<MaxObsResult, MaxObsError> {
    let (zeta_a, zeta_b) = (params.zeta_a(), params.zeta_b());

    // Cross-multiplied form of the elimination ratio; avoids dividing by
    // ln g1 near its endpoint zero.
    let h = |z: f64| ln_g(z, spec.p0()) * zeta_b.ln() - ln_g(z, spec.p1()) * zeta_a.ln();

    // pull the bracket in from the endpoints where g0 or g1 hits 1
    let mut lo = spec.p0() + 1e-12;
    let mut hi = spec.p1() - 1e-12;
    let f_lo = h(lo);
    let crossing = f_lo * h(hi);
    if crossing.is_nan() || crossing >= 0.0 {
        return Err(MaxObsError::NoCrossing {
            p0: spec.p0(),
            p1: spec.p1(),
        });
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h(mid) * f_lo <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    finish(spec, zeta_a, zeta_b, 0.5 * (lo + hi))
}

/// Closed-form bound for the special case `a = b` (caller asserts equality;
/// only the product `zeta*a` enters).
pub fn closed_form_max_obs(spec: &TestSpec, zeta_a: f64) -> Result<MaxObsResult, MaxObsError> {
    if !(zeta_a > 0.0 && zeta_a < 1.0) {
        return Err(MaxObsError::InvalidProduct { zeta_a });
    }
    let (p0, p1) = (spec.p0(), spec.p1());
    let z_star = ((1.0 - p0) / (1.0 - p1)).ln() / (((1.0 - p0) * p1) / ((1.0 - p1) * p0)).ln();
    finish(spec, zeta_a, zeta_a, z_star)
}
