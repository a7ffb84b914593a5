//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p detperturb --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use detperturb::brownian::{sample_path, superadditivity_gap, GaussianConvention, GridSpec};
use detperturb::inequalities::{reference_blocks, RESIDUAL_REL_TOL};
use detperturb::randgen::seed_counterexample;
use detperturb::report::Counts;
use detperturb::suites::{run_suite, Suite, SuiteOutcome};
use detperturb::{generalized_gap, random_spd, GenConfig, Variant, Verdict};

const TRIALS: u64 = 10_000;
const INEQ_TOL: f64 = 1e-9;
const EXACT_TOL: f64 = 1e-12;
const ORACLE_REL: f64 = 1e-10;
const CROSS_CHECK_TOL: f64 = 1e-10;
const SINGLE_THREAD_BUDGET: Duration = Duration::from_secs(120);

struct Gate {
    failed: usize,
    total: usize,
}

impl Gate {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

/// Counts for the reports named `name` across every trial of `o`.
fn counts_for(o: &SuiteOutcome, name: &str) -> Counts {
    let mut c = Counts::default();
    for rec in &o.records {
        for r in rec.reports.iter().filter(|r| r.name == name || r.name.starts_with(&format!("{name}["))) {
            c.record(r.verdict);
        }
    }
    c
}

fn min_scaled_gap(o: &SuiteOutcome, name: &str) -> f64 {
    o.records
        .iter()
        .flat_map(|rec| rec.reports.iter())
        .filter(|r| r.name == name || r.name.starts_with(&format!("{name}[")))
        .map(|r| r.gap / r.scale())
        .fold(f64::INFINITY, f64::min)
}

fn fmt_counts(c: &Counts) -> String {
    format!("holds={} violated={} skipped={}", c.holds, c.violated, c.skipped)
}

fn counterexamples(g: &mut Gate) {
    let t = Instant::now();
    let (c, d, p) = seed_counterexample(Variant::Theorem1);
    let r = generalized_gap(&c, &d, &p, Variant::Theorem1).unwrap();
    let want_lhs = (63.0f64 / 46.0).ln();
    let want_rhs = (36.0f64 / 25.0).ln();
    let ok = (r.lhs_log - want_lhs).abs() <= EXACT_TOL
        && (r.rhs_log - want_rhs).abs() <= EXACT_TOL
        && (r.gap - (want_lhs - want_rhs)).abs() <= EXACT_TOL
        && r.verdict == Verdict::Violated;
    g.check(
        "counterexample 1 (C=[[10,2],[2,5]], D=[[2,1],[1,1]])",
        ok,
        format!("ratio 63/46, product 36/25, gap {:.15} in {:?}", r.gap, t.elapsed()),
    );

    let t = Instant::now();
    let (c, d, p) = seed_counterexample(Variant::Theorem2);
    let inv = c.inverse();
    let inv_ok = [(0, 0, 1.0), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]
        .iter()
        .all(|&(i, j, v)| (inv.get(i, j) - v).abs() <= EXACT_TOL);
    let refs = reference_blocks(&c, &p, Variant::Theorem2).unwrap();
    let refs_ok = (refs[0].matrix().get(0, 0) - 1.0).abs() <= EXACT_TOL
        && (refs[1].matrix().get(0, 0) - 2.0).abs() <= EXACT_TOL;
    let r = generalized_gap(&c, &d, &p, Variant::Theorem2).unwrap();
    let want_lhs = (17.0f64 / 4.0).ln();
    let want_rhs = 4.0f64.ln();
    let ok = inv_ok
        && refs_ok
        && (r.lhs_log - want_lhs).abs() <= EXACT_TOL
        && (r.rhs_log - want_rhs).abs() <= EXACT_TOL
        && (r.gap - (want_rhs - want_lhs)).abs() <= EXACT_TOL
        && r.verdict == Verdict::Violated;
    g.check(
        "counterexample 2 (C=[[2,-2],[-2,4]], D=[[1,1],[1,2]])",
        ok,
        format!("C^-1 ok={inv_ok}, C_1=1 C_2=2 ok={refs_ok}, ratio 17/4, product 4, gap {:.15} in {:?}", r.gap, t.elapsed()),
    );
}

fn theorem_suites(g: &mut Gate, cfg: &GenConfig) -> Vec<SuiteOutcome> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t = Instant::now();
    let t1 = single.install(|| run_suite(Suite::Theorem1, cfg, TRIALS, INEQ_TOL)).unwrap();
    let elapsed = t.elapsed();
    let c = counts_for(&t1, "theorem1");
    g.check(
        "theorem1 suite, 10^4 instances, n<=32, 2<=k<=5",
        c.violated == 0 && c.skipped == 0 && c.holds == TRIALS,
        format!("{}; min gap/scale {:.3e}", fmt_counts(&c), min_scaled_gap(&t1, "theorem1")),
    );
    g.check(
        "theorem1 suite single-threaded runtime < 120s",
        elapsed < SINGLE_THREAD_BUDGET,
        format!("{elapsed:.2?}"),
    );

    let t2 = run_suite(Suite::Theorem2, cfg, TRIALS, INEQ_TOL).unwrap();
    let c = counts_for(&t2, "theorem2");
    g.check(
        "theorem2 suite, 10^4 instances",
        c.violated == 0 && c.skipped == 0 && c.holds == TRIALS,
        format!("{}; min gap/scale {:.3e}", fmt_counts(&c), min_scaled_gap(&t2, "theorem2")),
    );
    let worst = t2
        .records
        .iter()
        .flat_map(|r| r.reports.iter())
        .filter(|r| r.name == "theorem2")
        .map(|r| (r.gap - r.alt_gap.unwrap()).abs() / r.scale())
        .fold(0.0f64, f64::max);
    let agree = counts_for(&t2, "theorem2_equivalent_form");
    g.check(
        "theorem2 direct vs equivalent form within 1e-8*scale",
        worst <= RESIDUAL_REL_TOL && agree.violated == 0 && agree.holds == TRIALS,
        format!("worst |direct-equivalent|/scale {worst:.3e}"),
    );
    vec![t1, t2]
}

fn supporting_suites(g: &mut Gate, cfg: &GenConfig) -> Vec<SuiteOutcome> {
    let lemma = run_suite(Suite::Lemma, cfg, TRIALS, INEQ_TOL).unwrap();
    let c = counts_for(&lemma, "lemma");
    g.check("lemma monotonicity, 10^4 trials (3 scalings each)", c.violated == 0 && c.skipped == 0, fmt_counts(&c));

    let groth = run_suite(Suite::Grothendieck, cfg, TRIALS, INEQ_TOL).unwrap();
    let c = counts_for(&groth, "grothendieck");
    g.check("grothendieck inequality, 10^4 trials", c.violated == 0 && c.holds == TRIALS, fmt_counts(&c));

    let weyl = run_suite(Suite::Weyl, cfg, TRIALS, INEQ_TOL).unwrap();
    let (d, i) = (counts_for(&weyl, "weyl_det"), counts_for(&weyl, "weyl_inverse"));
    g.check(
        "weyl determinant and inverse order, 10^4 trials",
        d.violated == 0 && i.violated == 0 && d.holds == TRIALS && i.holds == TRIALS,
        format!("det: {}; inverse: {}", fmt_counts(&d), fmt_counts(&i)),
    );

    let fischer = run_suite(Suite::Fischer, cfg, TRIALS, INEQ_TOL).unwrap();
    let (s, id) = (counts_for(&fischer, "fischer"), counts_for(&fischer, "fischer_identity"));
    g.check(
        "fischer slack >= -1e-9 and identity residual <= 1e-8, 10^4 trials",
        s.violated == 0 && id.violated == 0 && s.holds == TRIALS && id.holds == TRIALS,
        format!("slack: {}; identity: {}", fmt_counts(&s), fmt_counts(&id)),
    );

    let ids = run_suite(Suite::Identities, cfg, TRIALS, INEQ_TOL).unwrap();
    for (name, label) in [
        ("schur_positivity", "schur complement positivity"),
        ("block_inverse", "block inverse reconstruction <= 1e-8"),
        ("woodbury", "woodbury residual <= 1e-8"),
        ("sylvester", "sylvester residual <= 1e-8"),
    ] {
        let c = counts_for(&ids, name);
        g.check(&format!("{label}, 10^4 trials"), c.violated == 0 && c.holds + c.skipped == TRIALS && c.holds > 0, fmt_counts(&c));
    }
    vec![lemma, groth, weyl, fischer, ids]
}

fn oracle(g: &mut Gate) {
    let cfg = GenConfig::with_seed(0);
    let mut worst = 0.0f64;
    for s in 0..1000u64 {
        let n = 1 + (s % 6) as usize;
        let a = random_spd(n, s, &cfg).unwrap();
        let det = cofactor_det(&a.matrix().to_rows());
        worst = worst.max((a.log_det().exp() - det).abs() / det.abs());
    }
    g.check("cholesky log det vs cofactor expansion, 10^3 SPD with n<=6", worst <= ORACLE_REL, format!("worst rel err {worst:.3e}"));
}

fn cofactor_det(rows: &[Vec<f64>]) -> f64 {
    if rows.len() == 1 {
        return rows[0][0];
    }
    (0..rows.len())
        .map(|col| {
            let minor: Vec<Vec<f64>> = rows[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|&(j, _)| j != col).map(|(_, v)| *v).collect())
                .collect();
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            sign * rows[0][col] * cofactor_det(&minor)
        })
        .sum()
}

fn brownian(g: &mut Gate) {
    let grid = GridSpec::new(1.0, 1.0, 16, 16).unwrap();
    let (mut min_scaled, mut worst_cross, mut bad) = (f64::INFINITY, 0.0f64, 0);
    for p in 0..100 {
        let r = superadditivity_gap(&sample_path(&grid, 0, p).unwrap(), GaussianConvention::Standard).unwrap();
        min_scaled = min_scaled.min(r.gap / r.scale());
        worst_cross = worst_cross.max((r.gap - r.cross_check).abs());
        if r.gap < -INEQ_TOL * r.scale() {
            bad += 1;
        }
    }
    g.check("brownian super-additivity, 100 paths, n=m=16, t1=t2=1", bad == 0, format!("negative gaps {bad}; min gap/scale {min_scaled:.3e}"));
    g.check(
        "brownian gap vs determinant-form evaluation within 1e-10",
        worst_cross <= CROSS_CHECK_TOL,
        format!("worst |gap - cross check| {worst_cross:.3e}"),
    );
}

fn determinism(g: &mut Gate, cfg: &GenConfig, first: &[SuiteOutcome]) {
    let mut mismatched = Vec::new();
    for o in first {
        let again = run_suite(o.suite, cfg, TRIALS, INEQ_TOL).unwrap();
        let a: Vec<String> = o.violations().map(|v| serde_json::to_string(&v).unwrap()).collect();
        let b: Vec<String> = again.violations().map(|v| serde_json::to_string(&v).unwrap()).collect();
        if a != b || o.counts != again.counts || o.records != again.records {
            mismatched.push(o.suite.name());
        }
    }
    g.check(
        "determinism: re-run of every suite gives identical counts, violations and per-trial gaps",
        mismatched.is_empty(),
        if mismatched.is_empty() { format!("{} suites compared", first.len()) } else { format!("mismatch in {mismatched:?}") },
    );
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cfg = GenConfig::with_seed(0);
    let mut g = Gate { failed: 0, total: 0 };
    counterexamples(&mut g);
    let mut outcomes = theorem_suites(&mut g, &cfg);
    outcomes.extend(supporting_suites(&mut g, &cfg));
    oracle(&mut g);
    brownian(&mut g);
    determinism(&mut g, &cfg, &outcomes);
    println!("acceptance: {}/{} criteria passed in {:.2?}", g.total - g.failed, g.total, start.elapsed());
    if g.failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
