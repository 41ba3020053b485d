//! Acceptance suite: one test per criterion, each pinned to its stated
//! tolerance.  Run with `cargo test -p seqscan --test acceptance` (add
//! `-- --nocapture` for the per-criterion summary lines).

use std::sync::OnceLock;
use std::time::Instant;

use seqscan::detector::{BoundaryTable, TestSpec, TunedParams, Verdict};
use seqscan::ingest::{ConnectionEvent, DetectorConfig, SessionStore};
use seqscan::maxobs::{closed_form_max_obs, solve_max_obs};
use seqscan::oc::{
    asn_ratio_curve, brute_force_oc, evaluate, evaluate_with, EvalOptions, StoppingPlan,
};
use seqscan::sim::simulate;
use seqscan::triple::{build_triple_plan, triple_risk_curve, TriplePlan, TripleSpec};
use seqscan::trwa::{self, TrwaParams, TrwaPlan};
use seqscan::tuning::bisect_zeta;

const FIG1: (f64, f64) = (0.2, 0.8);
const SEC44: (f64, f64) = (0.1, 0.15);

fn fig1_spec() -> TestSpec {
    TestSpec::new(FIG1.0, FIG1.1, 0.1, 0.1).unwrap()
}

fn fig1_params() -> TunedParams {
    TunedParams::new(0.1, 0.1, 1.0).unwrap()
}

fn sec44_spec() -> TestSpec {
    TestSpec::new(SEC44.0, SEC44.1, 0.1, 0.1).unwrap()
}

/// The tuned detection configuration for the comparison problem
/// (p0=0.1, p1=0.15, alpha=beta=0.1), shared across criteria 3, 4 and 7.
struct Tuned {
    zeta_star: f64,
    n_max: u64,
    table: BoundaryTable,
}

fn tuned() -> &'static Tuned {
    static TUNED: OnceLock<Tuned> = OnceLock::new();
    TUNED.get_or_init(|| {
        let spec = sec44_spec();
        let (zeta_star, _) = bisect_zeta(&spec, 0.1, 0.1).expect("tuning must converge");
        let params = TunedParams::new(0.1, 0.1, zeta_star).unwrap();
        let n_max = solve_max_obs(&spec, &params).unwrap().n_max;
        let table = BoundaryTable::build(&spec, &params, n_max);
        Tuned {
            zeta_star,
            n_max,
            table,
        }
    })
}

fn trwa_baseline() -> TrwaPlan {
    let spec = sec44_spec();
    TrwaPlan::with_default_horizon(spec, TrwaParams::from_risk_budgets(&spec))
}

// ---------------------------------------------------------------------------
// 1. Bounded-observation reproduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_bound_reproduction() {
    let start = Instant::now();
    let spec = fig1_spec();

    let closed = closed_form_max_obs(&spec, 0.1).unwrap();
    assert!((closed.z_star - 0.5).abs() < 1e-9, "z* = {}", closed.z_star);
    let n_expect = (0.1f64.ln() / 0.8f64.ln()).floor() as u64 + 1;
    assert_eq!(closed.n_max, 11);
    assert_eq!(closed.n_max, n_expect);

    let solved = solve_max_obs(&spec, &fig1_params()).unwrap();
    assert_eq!(solved.n_max, 11);

    let table = BoundaryTable::build(&spec, &fig1_params(), 11);
    for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let report = evaluate(&table, p).unwrap();
        assert_eq!(report.residual_mass, 0.0, "residual at horizon 11, p={p}");
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "acceptance 1 (bound reproduction): PASS — z*=0.5, n_max=11, residual(11)=0, {elapsed:?}"
    );
}

#[test]
fn criterion_1_residual_positive_below_bound() {
    // As stated, truncating the Fig. 1 configuration one step below the
    // bound must leave unstopped mass.  On the integer lattice it does not:
    // at n = 7 every success count is a stopping state (the continuous
    // continue-gap around z* = 0.5 falls between 3/7 and 4/7), so every
    // sample path terminates by n = 7 and the residual at horizon 10 is
    // exactly zero.  The assertion is kept as specified.
    let spec = fig1_spec();
    let table = BoundaryTable::build(&spec, &fig1_params(), 10);
    let report = evaluate(&table, 0.5).unwrap();
    println!(
        "acceptance 1 (integer-tightness sub-claim): residual at horizon 10 = {}",
        report.residual_mass
    );
    assert!(
        report.residual_mass > 0.0,
        "residual_mass at horizon 10 is exactly {} — all sample paths stop by n = 7 \
         (the (0.2, 0.8, zeta=1, a=b=0.1) continue set is empty at n = 7), so the \
         bound n_max = 11 is valid but not tight on the integer lattice",
        report.residual_mass
    );
}

// ---------------------------------------------------------------------------
// 2. Oracle equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_oracle_equivalence() {
    let start = Instant::now();
    let mut combos = 0;

    let new_test_configs = [
        (0.2, 0.8, 0.1, 0.1, 1.0),
        (0.3, 0.7, 0.45, 0.45, 1.0),
        (0.25, 0.75, 0.3, 0.3, 1.0),
        (0.15, 0.85, 0.35, 0.35, 1.0),
        (0.2, 0.75, 0.3, 0.5, 0.8),
    ];
    for (p0, p1, a, b, zeta) in new_test_configs {
        let spec = TestSpec::new(p0, p1, 0.1, 0.1).unwrap();
        let params = TunedParams::new(a, b, zeta).unwrap();
        let bound = solve_max_obs(&spec, &params).unwrap();
        assert!(bound.n_max <= 14, "config exceeds oracle horizon");
        let table = BoundaryTable::build(&spec, &params, bound.n_max);
        for p in [0.1, 0.35, 0.6, 0.9] {
            assert_reports_match(&table, p);
            combos += 1;
        }
    }

    let triple_spec =
        TripleSpec::new(0.25, 0.75, 0.04, 0.48, 0.52, 0.96, 0.25, 0.25, 0.25).unwrap();
    let plan = build_triple_plan(&triple_spec, 2).unwrap();
    assert!(plan.horizon() <= 14);
    for p in [0.1, 0.35, 0.6, 0.9] {
        assert_reports_match(&plan, p);
        combos += 1;
    }

    assert!(combos >= 20, "only {combos} combinations exercised");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("acceptance 2 (oracle equivalence): PASS — {combos} combos to 1e-12, {elapsed:?}");
}

fn assert_reports_match(plan: &dyn StoppingPlan, p: f64) {
    let dp = evaluate(plan, p).unwrap();
    let bf = brute_force_oc(plan, p).unwrap();
    for v in [Verdict::Scanner, Verdict::Marginal, Verdict::Benign] {
        assert!(
            (dp.accept_prob(v) - bf.accept_prob(v)).abs() < 1e-12,
            "accept[{v}] mismatch at p={p}: dp={} bf={}",
            dp.accept_prob(v),
            bf.accept_prob(v)
        );
    }
    assert!((dp.asn - bf.asn).abs() < 1e-12, "asn mismatch at p={p}");
    assert!((dp.residual_mass - bf.residual_mass).abs() < 1e-12);
    assert!((dp.total_mass() - 1.0).abs() < 1e-12);
    assert!((bf.total_mass() - 1.0).abs() < 1e-12);
}

// ---------------------------------------------------------------------------
// 3. Risk compliance on the comparison configuration
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_risk_compliance() {
    let spec = sec44_spec();
    let t = tuned();

    // informative: 0.96 is the commonly reported value for a = b = 0.1;
    // exact evaluation places the feasibility boundary far below that
    println!(
        "acceptance 3: bisected zeta* = {:.6} (reference value 0.96 is not \
         reproducible: exact risks at zeta=0.96 exceed the budgets)",
        t.zeta_star
    );

    let at_p0 = evaluate(&t.table, spec.p0()).unwrap();
    let at_p1 = evaluate(&t.table, spec.p1()).unwrap();
    let reject_h0 = at_p0.accept_prob(Verdict::Benign);
    let reject_h1 = at_p1.accept_prob(Verdict::Scanner);
    assert!(reject_h0 <= 0.1, "Pr{{reject H0 | p0}} = {reject_h0}");
    assert!(reject_h1 <= 0.1, "Pr{{reject H1 | p1}} = {reject_h1}");

    // 100-point grid over (0, p0] and [p1, 1): compliance everywhere, and
    // the monotonicity that justifies extending the design-point check
    let mut grid = Vec::new();
    for i in 1..=50 {
        grid.push(spec.p0() * f64::from(i) / 50.0);
    }
    for i in 0..50 {
        grid.push(spec.p1() + (1.0 - spec.p1()) * f64::from(i) / 50.0);
    }
    assert_eq!(grid.len(), 100);

    let mut last_scanner_acc = f64::INFINITY;
    for &p in &grid {
        let report = evaluate(&t.table, p).unwrap();
        let scanner_acc = report.accept_prob(Verdict::Scanner);
        assert!(
            scanner_acc <= last_scanner_acc + 1e-12,
            "OC not monotone at p={p}"
        );
        last_scanner_acc = scanner_acc;
        let risk = if p <= spec.p0() {
            report.accept_prob(Verdict::Benign)
        } else {
            scanner_acc
        };
        assert!(risk <= 0.1, "risk {risk} at p={p}");
    }
    println!(
        "acceptance 3 (risk compliance): PASS — risks ({reject_h0:.5}, {reject_h1:.5}) <= 0.1, \
         100-point grid compliant, n_max={}",
        t.n_max
    );
}

// ---------------------------------------------------------------------------
// 4. ASN comparison with the random-walk baseline
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_asn_ratio() {
    let spec = sec44_spec();
    let t = tuned();
    let baseline = trwa_baseline();

    let grid: Vec<f64> = (1..=100).map(|i| f64::from(i) / 101.0).collect();
    let curve = asn_ratio_curve(&t.table, &baseline, &grid, EvalOptions::truncated()).unwrap();

    // a contiguous stretch of the grid where the bounded test is faster
    let has_contiguous_win = curve
        .windows(2)
        .any(|w| w[0].ratio < 1.0 && w[1].ratio < 1.0);
    assert!(
        has_contiguous_win,
        "no contiguous sub-interval with ratio < 1"
    );

    // near-optimality of the walk at its design points
    let at_design = asn_ratio_curve(
        &t.table,
        &baseline,
        &[spec.p0(), spec.p1()],
        EvalOptions::truncated(),
    )
    .unwrap();
    for pt in &at_design {
        assert!(
            pt.ratio >= 0.95,
            "ratio {} at p={} undercuts the SPRT optimality floor",
            pt.ratio,
            pt.p
        );
    }

    let wins = curve.iter().filter(|pt| pt.ratio < 1.0).count();
    println!(
        "acceptance 4 (ASN ratio): PASS — ratio<1 at {wins}/100 grid points, \
         ratio(p0)={:.4}, ratio(p1)={:.4}",
        at_design[0].ratio, at_design[1].ratio
    );
}

#[test]
fn criterion_4_trwa_quantile_exceeds_bound() {
    // As stated, the walk's 0.999 stop-time quantile at p0 must exceed the
    // bounded test's hard bound.  Under exact tuning the feasibility
    // boundary sits near zeta* = 0.456, giving n_max = 1069, while the
    // quantile is 923: the claim holds only for the looser reference
    // parameterization zeta = 0.96 (n_max = 812), whose exact risks are out
    // of budget.  The assertion is kept as specified.
    let spec = sec44_spec();
    let t = tuned();
    let q999 = trwa::stop_time_quantile(
        &spec,
        &TrwaParams::from_risk_budgets(&spec),
        spec.p0(),
        0.999,
    )
    .unwrap();

    let reference_bound = closed_form_max_obs(&spec, 0.96 * 0.1).unwrap().n_max;
    println!(
        "acceptance 4 (unbounded-tail sub-claim): TRWA q0.999(p0) = {q999}, tuned \
         n_max = {}, reference (zeta=0.96) n_max = {reference_bound}",
        t.n_max
    );
    assert!(
        q999 > t.n_max,
        "TRWA 0.999 quantile ({q999}) does not exceed the exactly-tuned bound ({}); \
         it exceeds only the looser zeta=0.96 reference bound ({reference_bound}), whose \
         risks are non-compliant under exact evaluation",
        t.n_max
    );
}

// ---------------------------------------------------------------------------
// 5. Random-walk risk guarantee
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_trwa_risk_guarantee() {
    let spec = sec44_spec();
    let baseline = trwa_baseline();

    let at_p0 = evaluate_with(&baseline, spec.p0(), EvalOptions::truncated()).unwrap();
    let at_p1 = evaluate_with(&baseline, spec.p1(), EvalOptions::truncated()).unwrap();
    assert!(at_p0.residual_mass < 1e-12);
    assert!(at_p1.residual_mass < 1e-12);

    let reject_h0 = at_p0.accept_prob(Verdict::Benign);
    let reject_h1 = at_p1.accept_prob(Verdict::Scanner);
    assert!(
        reject_h0 <= spec.alpha(),
        "Pr{{reject H0 | p0}} = {reject_h0}"
    );
    assert!(
        reject_h1 <= spec.beta(),
        "Pr{{reject H1 | p1}} = {reject_h1}"
    );
    println!(
        "acceptance 5 (TRWA guarantee): PASS — errors ({reject_h0:.5}, {reject_h1:.5}) within \
         (alpha, beta) = (0.1, 0.1)"
    );
}

// ---------------------------------------------------------------------------
// 6. Triple test on the worked configuration
// ---------------------------------------------------------------------------

fn worked_triple() -> (&'static TripleSpec, &'static TriplePlan) {
    static PLAN: OnceLock<(TripleSpec, TriplePlan)> = OnceLock::new();
    let (spec, plan) = PLAN.get_or_init(|| {
        let spec = TripleSpec::symmetric(1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0, 0.1, 0.1, 0.1).unwrap();
        let plan = build_triple_plan(&spec, 8).unwrap();
        (spec, plan)
    });
    (spec, plan)
}

#[test]
fn criterion_6_triple_risk_and_bands() {
    let (spec, plan) = worked_triple();
    let d = plan.diagnostics();
    assert!(d.grid_check_passed);
    assert_eq!(d.conflict_cells, 0);

    let grid: Vec<f64> = (1..200).map(|i| f64::from(i) / 200.0).collect();
    let curve = triple_risk_curve(plan, spec, &grid).unwrap();
    let mut worst: f64 = 0.0;
    for pt in curve.iter().filter(|pt| !pt.in_indifference_zone) {
        assert!(pt.risk <= 0.1, "risk {} at p={}", pt.risk, pt.p);
        worst = worst.max(pt.risk);
    }

    // acceptance-region export: three disjoint contiguous bands at the
    // terminal row, bottom scanner / middle marginal / top benign
    let csv = plan.regions_csv();
    let h = plan.horizon();
    let terminal: Vec<&str> = csv
        .lines()
        .skip(1)
        .filter_map(|line| {
            let mut cells = line.split(',');
            let n: u64 = cells.next()?.parse().ok()?;
            let _s = cells.next()?;
            (n == h).then(|| cells.next().unwrap())
        })
        .collect();
    assert_eq!(terminal.len() as u64, h + 1);
    let mut bands: Vec<&str> = Vec::new();
    for label in terminal {
        assert_ne!(label, "continue", "continue cell at the terminal row");
        if bands.last() != Some(&label) {
            bands.push(label);
        }
    }
    assert_eq!(bands, vec!["scanner", "marginal", "benign"]);
    println!(
        "acceptance 6 (triple test): PASS — worst off-zone risk {worst:.5} <= 0.1, three \
         contiguous bands, horizon {h}, delta1_halved={}",
        d.delta1_halved
    );
}

// ---------------------------------------------------------------------------
// 7. Monte Carlo cross-check
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_monte_carlo_cross_check() {
    let t = tuned();
    const RUNS: u64 = 100_000;

    for p in [0.05, 0.1, 0.15, 0.5] {
        let exact = evaluate(&t.table, p).unwrap();
        let sim = simulate(&t.table, p, RUNS, 20_240_417).unwrap();
        assert_eq!(sim.truncated_runs, 0, "bounded test cannot truncate");
        for v in [Verdict::Scanner, Verdict::Benign] {
            let prob = exact.accept_prob(v);
            let se = (prob * (1.0 - prob) / RUNS as f64).sqrt();
            let diff = (sim.freq(v) - prob).abs();
            assert!(
                diff <= 4.0 * se,
                "{v} at p={p}: |{} - {prob}| > 4*{se}",
                sim.freq(v)
            );
        }
    }

    let a = simulate(&t.table, 0.1, 10_000, 7).unwrap();
    let b = simulate(&t.table, 0.1, 10_000, 7).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap(),
        "identical seeds must reproduce byte-identical reports"
    );
    println!("acceptance 7 (Monte Carlo): PASS — 4 rates within 4 s.e. of exact, seeded reports byte-identical");
}

// ---------------------------------------------------------------------------
// 8. Streaming semantics
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_streaming_semantics() {
    let trace = [
        r#"{"timestamp":1,"src":"10.0.0.1","dst":"h1","outcome":0}"#,
        r#"{"timestamp":2,"src":"10.0.0.1","dst":"h1","outcome":0}"#, // duplicate pair
        r#"{"timestamp":3,"src":"10.0.0.2","dst":"h1","outcome":1}"#,
        r#"{"timestamp":4,"src":"10.0.0.1","dst":"h1","outcome":1}"#, // duplicate pair
        r#"{"timestamp":5,"src":"10.0.0.2","dst":"h2","outcome":1}"#,
        r#"{"timestamp":6,"src":"10.0.0.1","dst":"h2","outcome":0}"#,
    ];
    let mut store = SessionStore::new(DetectorConfig::New {
        spec: fig1_spec(),
        params: fig1_params(),
    });

    let mut decisions = Vec::new();
    for line in trace {
        let event = ConnectionEvent::parse(line).unwrap();
        if let Some(record) = store.ingest(&event).unwrap() {
            decisions.push(record);
        }
    }

    // observation counts equal distinct-destination counts
    for src in ["10.0.0.1", "10.0.0.2"] {
        let session = store.session(src).unwrap();
        assert_eq!(session.observations(), session.distinct_destinations());
    }
    assert_eq!(store.stats().duplicate_pairs, 2);

    // the all-failure source is flagged scanner after exactly 2 distinct
    // destinations; the all-success source reaches benign at 2 as well
    assert_eq!(decisions.len(), 2);
    let scanner = decisions.iter().find(|d| d.src == "10.0.0.1").unwrap();
    assert_eq!(scanner.decision, Verdict::Scanner);
    assert_eq!((scanner.n, scanner.s), (2, 0));
    assert_eq!(scanner.ts, 6);
    let benign = decisions.iter().find(|d| d.src == "10.0.0.2").unwrap();
    assert_eq!(benign.decision, Verdict::Benign);
    assert_eq!((benign.n, benign.s), (2, 2));
    println!(
        "acceptance 8 (streaming semantics): PASS — dedup counts match, scanner flagged at n=2"
    );
}
