//! Seeded Monte Carlo harness for any stopping plan.
//!
//! Cross-validates the exact lattice evaluation and reproduces the
//! detector comparisons by simulation.  Every run draws its Bernoulli
//! stream from a dedicated substream of a counter-based generator
//! (ChaCha8, stream = run index), so reports are reproducible bit for bit
//! and independent of execution order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::detector::Verdict;
use crate::oc::StoppingPlan;

/// Name of the generator recorded in every report.
pub const GENERATOR: &str = "chacha8/stream-per-run";

/// Stop-time quantiles estimated by default.
pub const DEFAULT_QUANTILES: [f64; 4] = [0.5, 0.9, 0.99, 0.999];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("success rate must lie strictly inside (0,1), got {p}")]
    InvalidProbability { p: f64 },
    #[error("at least one run is required")]
    NoRuns,
}

/// Aggregated simulation results.  Decision frequencies plus the truncated
/// fraction sum to 1; truncated runs (horizon hit without a decision) are
/// counted at the horizon in the stop-time statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub p: f64,
    pub runs: u64,
    pub seed: u64,
    pub generator: &'static str,
    pub decision_freq: BTreeMap<Verdict, f64>,
    pub undecided_freq: f64,
    pub truncated_runs: u64,
    pub mean_stop: f64,
    /// `(q, smallest n with empirical Pr{stop <= n} >= q)`
    pub stop_quantiles: Vec<(f64, u64)>,
    pub stderr_freq: BTreeMap<Verdict, f64>,
    pub stderr_mean_stop: f64,
}

impl SimReport {
    pub fn freq(&self, verdict: Verdict) -> f64 {
        self.decision_freq.get(&verdict).copied().unwrap_or(0.0)
    }

    pub fn stderr(&self, verdict: Verdict) -> f64 {
        self.stderr_freq.get(&verdict).copied().unwrap_or(0.0)
    }
}

/// Run `runs` independent streams of Bernoulli(`p`) outcomes through the
/// plan.  Identical inputs produce identical reports.
pub fn simulate(
    plan: &dyn StoppingPlan,
    p: f64,
    runs: u64,
    seed: u64,
) -> Result<SimReport, SimError> {
    if !(p > 0.0 && p < 1.0) || !p.is_finite() {
        return Err(SimError::InvalidProbability { p });
    }
    if runs == 0 {
        return Err(SimError::NoRuns);
    }
    let horizon = plan.horizon();

    let mut counts: BTreeMap<Verdict, u64> = BTreeMap::new();
    let mut truncated_runs = 0u64;
    let mut stop_hist: Vec<u64> = vec![0; horizon as usize + 1];
    let mut sum_n = 0u64;
    let mut sum_n2 = 0f64;

    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);
        let mut s = 0u64;
        let mut stop = horizon;
        let mut verdict = None;
        for n in 1..=horizon {
            if rng.random::<f64>() < p {
                s += 1;
            }
            if let Some(v) = plan.label(n, s) {
                verdict = Some(v);
                stop = n;
                break;
            }
        }
        match verdict {
            Some(v) => *counts.entry(v).or_insert(0) += 1,
            None => truncated_runs += 1,
        }
        stop_hist[stop as usize] += 1;
        sum_n += stop;
        sum_n2 += (stop as f64) * (stop as f64);
    }

    let runs_f = runs as f64;
    let mean_stop = sum_n as f64 / runs_f;
    let var_stop = (sum_n2 / runs_f - mean_stop * mean_stop).max(0.0);

    let mut stop_quantiles = Vec::with_capacity(DEFAULT_QUANTILES.len());
    for q in DEFAULT_QUANTILES {
        let target = (q * runs_f).ceil().max(1.0) as u64;
        let mut cum = 0u64;
        for (n, &count) in stop_hist.iter().enumerate() {
            cum += count;
            if cum >= target {
                stop_quantiles.push((q, n as u64));
                break;
            }
        }
    }

    let decision_freq: BTreeMap<Verdict, f64> = counts
        .iter()
        .map(|(&v, &c)| (v, c as f64 / runs_f))
        .collect();
    let stderr_freq = decision_freq
        .iter()
        .map(|(&v, &f)| (v, (f * (1.0 - f) / runs_f).sqrt()))
        .collect();

    Ok(SimReport {
        p,
        runs,
        seed,
        generator: GENERATOR,
        decision_freq,
        undecided_freq: truncated_runs as f64 / runs_f,
        truncated_runs,
        mean_stop,
        stop_quantiles,
        stderr_freq,
        stderr_mean_stop: (var_stop / runs_f).sqrt(),
    })
}
