//! Randomized verification suites.
//!
//! A suite runs `trials` independent trials. Trial `t` of suite `s` draws
//! from substream `(s << 48) | t`, so results do not depend on scheduling.
//! Each trial produces one or more checks; the trial verdict is the worst
//! of them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::block::{block_inverse_2x2, identity_residuals, schur_complement, BlockPartition};
use crate::dense::cholesky;
use crate::error::{Error, Result};
use crate::inequalities::{
    fischer_gap, grothendieck_gap, lemma_gap, theorem1_gap, theorem2_gap, weyl_gap_with_tol, Fingerprint, GapReport,
    Variant, Verdict, RESIDUAL_REL_TOL,
};
use crate::randgen::{random_instance, random_psd_with, random_spd_with, GenConfig};
use crate::report::{Counts, InstanceDump, RunReport, SuiteSummary, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Theorem1,
    Theorem2,
    Lemma,
    Grothendieck,
    Weyl,
    Fischer,
    Identities,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Theorem1,
        Suite::Theorem2,
        Suite::Lemma,
        Suite::Grothendieck,
        Suite::Weyl,
        Suite::Fischer,
        Suite::Identities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Theorem2 => "theorem2",
            Suite::Lemma => "lemma",
            Suite::Grothendieck => "grothendieck",
            Suite::Weyl => "weyl",
            Suite::Fischer => "fischer",
            Suite::Identities => "identities",
        }
    }

    fn index(self) -> u64 {
        Suite::ALL.iter().position(|&s| s == self).unwrap() as u64
    }

    pub fn substream(self, trial: u64) -> u64 {
        (self.index() << 48) | trial
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub verdict: Verdict,
    pub reports: Vec<GapReport>,
    pub instance: InstanceDump,
}

impl TrialRecord {
    fn new(trial: u64, reports: Vec<GapReport>, instance: InstanceDump) -> Self {
        let verdict = if reports.iter().any(|r| r.verdict == Verdict::Violated) {
            Verdict::Violated
        } else if reports.iter().any(|r| r.verdict == Verdict::Skipped) {
            Verdict::Skipped
        } else {
            Verdict::Holds
        };
        Self { trial, verdict, reports, instance }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub counts: Counts,
    pub records: Vec<TrialRecord>,
}

impl SuiteOutcome {
    pub fn violations(&self) -> impl Iterator<Item = Violation> + '_ {
        self.records.iter().flat_map(move |rec| {
            rec.reports.iter().filter(|r| r.verdict != Verdict::Holds).map(move |r| Violation {
                suite: self.suite.name().to_string(),
                trial: rec.trial,
                report: r.clone(),
                instance: rec.instance.clone(),
            })
        })
    }
}

/// A residual `r` that should vanish, as a report: holds iff `r <= rel_tol * scale`.
fn residual_report(name: &str, residual: f64, scale: f64, rel_tol: f64, fp: Fingerprint) -> GapReport {
    GapReport::with_tol(name, residual, 0.0, -residual, rel_tol * scale).with_fingerprint(fp)
}

fn agreement_report(name: &str, primary: &GapReport, fp: Fingerprint) -> GapReport {
    let alt = primary.alt_gap.unwrap_or(primary.gap);
    let mut r = residual_report(name, (primary.gap - alt).abs(), primary.scale(), RESIDUAL_REL_TOL, fp);
    r.lhs_log = primary.gap;
    r.rhs_log = alt;
    r
}

fn random_dim(rng: &mut impl Rng, lo: usize, cfg: &GenConfig) -> Result<usize> {
    if cfg.max_dim < lo {
        return Err(Error::InvalidConfig(format!("suite needs max_dim >= {lo}")));
    }
    Ok(rng.random_range(lo..=cfg.max_dim))
}

/// Runs one trial of `suite`. `rel_tol` scales the inequality tolerances;
/// identity residuals always use [`RESIDUAL_REL_TOL`].
pub fn run_trial(suite: Suite, cfg: &GenConfig, trial: u64, rel_tol: f64) -> Result<TrialRecord> {
    let sub = suite.substream(trial);
    let origin = |fp: Fingerprint| fp.with_origin(cfg.seed, sub);
    match suite {
        Suite::Theorem1 | Suite::Theorem2 => {
            let variant = if suite == Suite::Theorem1 { Variant::Theorem1 } else { Variant::Theorem2 };
            let inst = random_instance(variant, cfg, sub)?;
            let mut dump = InstanceDump::new(Some(&inst.partition)).with("C", inst.c.matrix());
            for (i, d) in inst.perturbations.iter().enumerate() {
                dump = dump.with(&format!("D{}", i + 1), d.matrix());
            }
            let reports = if suite == Suite::Theorem1 {
                vec![theorem1_gap(&inst)?.rejudge(rel_tol)]
            } else {
                let r = theorem2_gap(&inst)?.rejudge(rel_tol);
                let agree = agreement_report("theorem2_equivalent_form", &r, r.fingerprint);
                vec![r, agree]
            };
            Ok(TrialRecord::new(trial, reports, dump))
        }
        Suite::Lemma => {
            let mut rng = cfg.rng(sub);
            let n = random_dim(&mut rng, 1, cfg)?;
            let v = random_spd_with(&mut rng, n, cfg.cond_cap);
            let w = random_psd_with(&mut rng, n, cfg);
            let d = random_psd_with(&mut rng, n, cfg);
            let mut reports = Vec::with_capacity(3);
            for t in [0.5, 1.0, 2.0] {
                let u = cholesky(&v.matrix().add(&w.scale(t))?)?;
                let mut r = lemma_gap(&u, &v, &d)?.rejudge(rel_tol);
                r.name = format!("lemma[t={t}]");
                r.fingerprint = origin(r.fingerprint);
                reports.push(r);
            }
            let dump = InstanceDump::new(None).with("V", v.matrix()).with("W", &w).with("D", &d);
            Ok(TrialRecord::new(trial, reports, dump))
        }
        Suite::Grothendieck => {
            let mut rng = cfg.rng(sub);
            let n = random_dim(&mut rng, 1, cfg)?;
            let a = random_psd_with(&mut rng, n, cfg);
            let b = random_psd_with(&mut rng, n, cfg);
            let mut r = grothendieck_gap(&a, &b)?.rejudge(rel_tol);
            r.fingerprint = origin(r.fingerprint);
            let dump = InstanceDump::new(None).with("A", &a).with("B", &b);
            Ok(TrialRecord::new(trial, vec![r], dump))
        }
        Suite::Weyl => {
            let mut rng = cfg.rng(sub);
            let n = random_dim(&mut rng, 1, cfg)?;
            let b = random_spd_with(&mut rng, n, cfg.cond_cap);
            let w = random_psd_with(&mut rng, n, cfg);
            let wr = weyl_gap_with_tol(&b, &w, rel_tol)?;
            let fp = origin(wr.det.fingerprint);
            let reports = vec![wr.det.with_fingerprint(fp), wr.inverse.with_fingerprint(fp)];
            let dump = InstanceDump::new(None).with("B", b.matrix()).with("W", &w);
            Ok(TrialRecord::new(trial, reports, dump))
        }
        Suite::Fischer => {
            let mut rng = cfg.rng(sub);
            let n = random_dim(&mut rng, 2, cfg)?;
            let split = rng.random_range(1..n);
            let m = random_spd_with(&mut rng, n, cfg.cond_cap);
            let slack = fischer_gap(&m, split)?.rejudge(rel_tol);
            let fp = origin(slack.fingerprint);
            // gap − alt_gap = log det A + log det S_A − log det M.
            let identity = agreement_report("fischer_identity", &slack, fp);
            let dump = InstanceDump::new(Some(&BlockPartition::split(n, split)?)).with("M", m.matrix());
            Ok(TrialRecord::new(trial, vec![slack.with_fingerprint(fp), identity], dump))
        }
        Suite::Identities => {
            let mut rng = cfg.rng(sub);
            let n = random_dim(&mut rng, 2, cfg)?;
            let split = rng.random_range(1..n);
            let m = random_spd_with(&mut rng, n, cfg.cond_cap);
            let aux = random_spd_with(&mut rng, n, cfg.cond_cap);
            let fp = origin(Fingerprint::of(&[m.matrix(), aux.matrix()], &[split, n - split]));

            let s = schur_complement(&m, split)?;
            let s_min = s.min_eig()?;
            let spd_ok = cholesky(&s).is_ok();
            let positivity = GapReport::with_tol(
                "schur_positivity",
                s_min,
                0.0,
                if spd_ok { s_min } else { f64::NEG_INFINITY },
                rel_tol * (1.0 + s.max_abs()),
            )
            .with_fingerprint(fp);

            let dense = m.inverse();
            let blockwise = block_inverse_2x2(&m, split)?;
            let inverse = residual_report(
                "block_inverse",
                blockwise.sub(&dense)?.max_abs(),
                1.0 + dense.max_abs(),
                RESIDUAL_REL_TOL,
                fp,
            );

            let res = identity_residuals(&m, split, Some(aux.matrix()))?;
            let woodbury = match res.woodbury {
                Some(w) => residual_report("woodbury", w, res.woodbury_scale, RESIDUAL_REL_TOL, fp),
                None => GapReport::skipped("woodbury").with_fingerprint(fp),
            };
            let reports = vec![
                positivity,
                inverse,
                residual_report("fischer_identity", res.fischer, res.fischer_scale, RESIDUAL_REL_TOL, fp),
                woodbury,
                residual_report("sylvester", res.sylvester, res.sylvester_scale, RESIDUAL_REL_TOL, fp),
            ];
            let dump = InstanceDump::new(Some(&BlockPartition::split(n, split)?))
                .with("M", m.matrix())
                .with("D_aux", aux.matrix());
            Ok(TrialRecord::new(trial, reports, dump))
        }
    }
}

/// Runs `trials` trials in parallel; records come back in trial order.
pub fn run_suite(suite: Suite, cfg: &GenConfig, trials: u64, rel_tol: f64) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let records = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(suite, cfg, t, rel_tol))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = Counts::default();
    for r in &records {
        counts.record(r.verdict);
    }
    Ok(SuiteOutcome { suite, counts, records })
}

/// Runs the given suites and assembles the report (wall clock left at 0).
pub fn verify(suites: &[Suite], label: &str, cfg: &GenConfig, trials: u64, rel_tol: f64) -> Result<(RunReport, Vec<SuiteOutcome>)> {
    let mut outcomes = Vec::with_capacity(suites.len());
    for &s in suites {
        outcomes.push(run_suite(s, cfg, trials, rel_tol)?);
    }
    let mut counts = Counts::default();
    for o in &outcomes {
        counts.merge(&o.counts);
    }
    let report = RunReport {
        suite: label.to_string(),
        seed: cfg.seed,
        trials,
        tol: rel_tol,
        max_dim: cfg.max_dim,
        max_blocks: cfg.max_blocks,
        counts,
        suites: outcomes
            .iter()
            .map(|o| SuiteSummary { suite: o.suite.name().to_string(), trials, counts: o.counts })
            .collect(),
        violations: outcomes.iter().flat_map(SuiteOutcome::violations).collect(),
        brownian: None,
        wall_clock_secs: 0.0,
    };
    Ok((report, outcomes))
}
