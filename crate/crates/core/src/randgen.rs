//! Seeded generation of SPD/PSD matrices, partitions and theorem
//! instances, plus a randomized search for violations of the generalized
//! (full-D) statements.
//!
//! Every draw is a pure function of `(seed, substream)`: each trial gets
//! its own ChaCha stream seeded with `mix(seed, substream)`, so trials can
//! run in any order or in parallel and still replay individually.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::block::BlockPartition;
use crate::dense::{cholesky, Mat, SpdMatrix, SymMatrix};
use crate::error::{Error, Result};
use crate::inequalities::{generalized_gap, GapReport, TheoremInstance, Variant};

pub type TrialRng = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub max_dim: usize,
    pub max_blocks: usize,
    pub cond_cap: f64,
    pub psd_rank_deficient_prob: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { seed: 0, max_dim: 32, max_blocks: 5, cond_cap: 1e6, psd_rank_deficient_prob: 1.0 / 3.0 }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_dim > 64 {
            return Err(Error::InvalidConfig(format!("max_dim {} exceeds 64", self.max_dim)));
        }
        if self.max_blocks > 8 {
            return Err(Error::InvalidConfig(format!("max_blocks {} exceeds 8", self.max_blocks)));
        }
        if self.max_blocks < 1 || self.max_dim < self.max_blocks {
            return Err(Error::InvalidConfig(format!(
                "need max_dim >= max_blocks >= 1, got max_dim {} and max_blocks {}",
                self.max_dim, self.max_blocks
            )));
        }
        if self.cond_cap.is_nan() || self.cond_cap <= 1.0 {
            return Err(Error::InvalidConfig(format!("cond_cap must exceed 1, got {}", self.cond_cap)));
        }
        if !(0.0..=1.0).contains(&self.psd_rank_deficient_prob) {
            return Err(Error::InvalidConfig("psd_rank_deficient_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn rng(&self, substream: u64) -> TrialRng {
        trial_rng(self.seed, substream)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed derived from the run seed and the trial index.
pub fn mix(seed: u64, substream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(substream))
}

pub fn trial_rng(seed: u64, substream: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(mix(seed, substream))
}

fn normal_mat(rng: &mut TrialRng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `G·Gᵀ/dim + δI`, δ ~ U[0.1, 1], redrawn while the condition estimate
/// exceeds `cond_cap`.
///
/// The estimate is `‖A‖_∞ / δ`, an upper bound on `λ_max/λ_min` since
/// `G·Gᵀ` is PSD.
pub fn random_spd_with(rng: &mut TrialRng, dim: usize, cond_cap: f64) -> SpdMatrix {
    loop {
        let g = normal_mat(rng, dim, dim);
        let delta: f64 = rng.random_range(0.1..=1.0);
        let ggt = g.matmul(&g.transpose()).expect("square");
        let a = SymMatrix::from_mat(&ggt).expect("square").scale(1.0 / dim as f64).shift(delta);
        let row_sum = (0..dim).map(|i| (0..dim).map(|j| a.get(i, j).abs()).sum::<f64>()).fold(0.0, f64::max);
        if row_sum / delta > cond_cap {
            continue;
        }
        if let Ok(spd) = cholesky(&a) {
            return spd;
        }
    }
}

pub fn random_spd(dim: usize, substream: u64, cfg: &GenConfig) -> Result<SpdMatrix> {
    if dim == 0 || dim > cfg.max_dim {
        return Err(Error::InvalidConfig(format!("dim {dim} outside 1..={}", cfg.max_dim)));
    }
    Ok(random_spd_with(&mut cfg.rng(substream), dim, cfg.cond_cap))
}

/// `H·Hᵀ/dim` with `H` of width `rank` (the zero matrix when `rank == 0`).
pub fn random_psd_with_rank(rng: &mut TrialRng, dim: usize, rank: usize) -> SymMatrix {
    if rank == 0 {
        return SymMatrix::zeros(dim);
    }
    let h = normal_mat(rng, dim, rank);
    let hht = h.matmul(&h.transpose()).expect("shapes agree");
    SymMatrix::from_mat(&hht).expect("square").scale(1.0 / dim as f64)
}

/// A PSD matrix that is rank deficient with probability
/// `psd_rank_deficient_prob` (rank uniform in `0..dim`), full rank otherwise.
pub fn random_psd_with(rng: &mut TrialRng, dim: usize, cfg: &GenConfig) -> SymMatrix {
    let deficient = rng.random_bool(cfg.psd_rank_deficient_prob);
    let rank = if deficient { rng.random_range(0..dim) } else { dim };
    random_psd_with_rank(rng, dim, rank)
}

/// `k` positive sizes summing to `total`: `k − 1` distinct cut points
/// drawn from `1..total`.
pub fn random_partition_with(rng: &mut TrialRng, total: usize, k: usize) -> BlockPartition {
    assert!(k >= 1 && k <= total);
    let mut cuts = rand::seq::index::sample(rng, total - 1, k - 1).into_vec();
    cuts.iter_mut().for_each(|c| *c += 1);
    cuts.sort_unstable();
    let mut sizes = Vec::with_capacity(k);
    let mut prev = 0;
    for c in cuts {
        sizes.push(c - prev);
        prev = c;
    }
    sizes.push(total - prev);
    BlockPartition::new(sizes).expect("cuts are distinct")
}

/// Draws `k ∈ [2, max_blocks]` (1 when `max_blocks == 1`) and a total
/// dimension in `[k, max_dim]`.
pub fn random_partition(rng: &mut TrialRng, cfg: &GenConfig) -> BlockPartition {
    let k = if cfg.max_blocks >= 2 { rng.random_range(2..=cfg.max_blocks) } else { 1 };
    let total = rng.random_range(k..=cfg.max_dim);
    random_partition_with(rng, total, k)
}

/// A random instance for either variant: SPD `C`, a partition and SPD
/// perturbations. The inverse-block references are derived from `C`
/// when the gap is evaluated, so both variants draw the same way.
pub fn random_instance(_variant: Variant, cfg: &GenConfig, substream: u64) -> Result<TheoremInstance> {
    cfg.validate()?;
    let mut rng = cfg.rng(substream);
    let partition = random_partition(&mut rng, cfg);
    let c = random_spd_with(&mut rng, partition.total(), cfg.cond_cap);
    let ds = partition.sizes().iter().map(|&n| random_spd_with(&mut rng, n, cfg.cond_cap)).collect();
    Ok(TheoremInstance::new(c, partition, ds)?.with_origin(cfg.seed, substream))
}

/// The built-in violating instance of each generalized statement.
pub fn seed_counterexample(variant: Variant) -> (SpdMatrix, SpdMatrix, BlockPartition) {
    let (c, d) = match variant {
        Variant::Theorem1 => ([[10.0, 2.0], [2.0, 5.0]], [[2.0, 1.0], [1.0, 1.0]]),
        Variant::Theorem2 => ([[2.0, -2.0], [-2.0, 4.0]], [[1.0, 1.0], [1.0, 2.0]]),
    };
    let to_spd = |m: [[f64; 2]; 2]| cholesky(&SymMatrix::from_rows(&[&m[0], &m[1]]).unwrap()).unwrap();
    (to_spd(c), to_spd(d), BlockPartition::new(vec![1, 1]).unwrap())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub found: bool,
    pub variant: Variant,
    /// The violating instance when found, else the last one tried.
    pub instance: Option<(SymMatrix, SymMatrix, BlockPartition)>,
    pub gap: f64,
    pub trials_used: u64,
    pub report: Option<GapReport>,
}

/// Looks for `(C, D)` with a full SPD `D` violating the generalized
/// `variant` inequality.
///
/// With `use_seeds`, trial 0 is the built-in counterexample and always
/// hits. Otherwise random pairs are drawn, dimension in `[2, max_dim]`.
pub fn search_counterexample(variant: Variant, cfg: &GenConfig, max_trials: u64, use_seeds: bool) -> Result<SearchResult> {
    cfg.validate()?;
    if max_trials == 0 {
        return Err(Error::InvalidConfig("max_trials must be at least 1".into()));
    }
    if cfg.max_dim < 2 {
        return Err(Error::InvalidConfig("counterexample search needs max_dim >= 2".into()));
    }
    let mut last = None;
    for trial in 0..max_trials {
        let (c, d, p, fp_origin) = if use_seeds && trial == 0 {
            let (c, d, p) = seed_counterexample(variant);
            (c, d, p, None)
        } else {
            let mut rng = cfg.rng(trial);
            let dim = rng.random_range(2..=cfg.max_dim);
            let k = rng.random_range(2..=cfg.max_blocks.clamp(2, dim));
            let p = random_partition_with(&mut rng, dim, k);
            let c = random_spd_with(&mut rng, dim, cfg.cond_cap);
            let d = random_spd_with(&mut rng, dim, cfg.cond_cap);
            (c, d, p, Some(trial))
        };
        let mut report = generalized_gap(&c, &d, &p, variant)?;
        if let Some(sub) = fp_origin {
            report.fingerprint = report.fingerprint.with_origin(cfg.seed, sub);
        }
        let found = !report.holds();
        let result = SearchResult {
            found,
            variant,
            instance: Some((c.into_matrix(), d.into_matrix(), p)),
            gap: report.gap,
            trials_used: trial + 1,
            report: Some(report),
        };
        if found {
            return Ok(result);
        }
        last = Some(result);
    }
    Ok(last.expect("at least one trial"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(GenConfig::default().validate().is_ok());
        let bad = |f: fn(&mut GenConfig)| {
            let mut c = GenConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.max_dim = 65));
        assert!(bad(|c| c.max_blocks = 9));
        assert!(bad(|c| c.max_blocks = 0));
        assert!(bad(|c| {
            c.max_dim = 2;
            c.max_blocks = 3
        }));
        assert!(bad(|c| c.cond_cap = 1.0));
    }

    #[test]
    fn mixing_separates_substreams() {
        assert_ne!(mix(1, 0), mix(1, 1));
        assert_ne!(mix(1, 0), mix(2, 0));
        assert_eq!(mix(42, 7), mix(42, 7));
    }

    #[test]
    fn scalar_spd_respects_delta_floor() {
        let cfg = GenConfig::with_seed(3);
        for s in 0..50 {
            assert!(random_spd(1, s, &cfg).unwrap().matrix().get(0, 0) >= 0.1);
        }
    }

    #[test]
    fn spd_is_deterministic() {
        let cfg = GenConfig::with_seed(11);
        assert_eq!(random_spd(6, 4, &cfg).unwrap(), random_spd(6, 4, &cfg).unwrap());
        assert_ne!(random_spd(6, 4, &cfg).unwrap(), random_spd(6, 5, &cfg).unwrap());
        assert!(random_spd(0, 0, &cfg).is_err());
        assert!(random_spd(33, 0, &cfg).is_err());
    }

    #[test]
    fn forced_partition() {
        let cfg = GenConfig { max_dim: 2, max_blocks: 2, ..GenConfig::with_seed(5) };
        for s in 0..20 {
            let inst = random_instance(Variant::Theorem1, &cfg, s).unwrap();
            assert_eq!(inst.partition.sizes(), &[1, 1]);
        }
    }

    #[test]
    fn instance_is_deterministic() {
        let cfg = GenConfig::with_seed(9);
        let a = random_instance(Variant::Theorem2, &cfg, 17).unwrap();
        let b = random_instance(Variant::Theorem2, &cfg, 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn partitions_are_compositions() {
        let mut rng = trial_rng(1, 1);
        for total in 1..12 {
            for k in 1..=total {
                let p = random_partition_with(&mut rng, total, k);
                assert_eq!(p.total(), total);
                assert_eq!(p.k(), k);
            }
        }
    }

    #[test]
    fn rank_deficient_psd_has_requested_rank() {
        let mut rng = trial_rng(2, 0);
        let p = random_psd_with_rank(&mut rng, 5, 2);
        let eig = crate::dense::sym_eigen(&p).unwrap();
        assert!(eig.lambda[1] > 1e-6);
        assert!(eig.lambda[2].abs() < 1e-12);
        assert_eq!(random_psd_with_rank(&mut rng, 3, 0), SymMatrix::zeros(3));
    }

    #[test]
    fn seeded_search_hits_on_first_trial() {
        let cfg = GenConfig::with_seed(0);
        let r = search_counterexample(Variant::Theorem1, &cfg, 10, true).unwrap();
        assert!(r.found);
        assert_eq!(r.trials_used, 1);
        assert!((r.gap - ((63.0f64 / 46.0).ln() - (36.0f64 / 25.0).ln())).abs() <= 1e-12);
        let r = search_counterexample(Variant::Theorem2, &cfg, 10, true).unwrap();
        assert!(r.found);
        assert!((r.gap - (4f64.ln() - 4.25f64.ln())).abs() <= 1e-12);
        assert!(search_counterexample(Variant::Theorem2, &cfg, 0, true).is_err());
    }

    #[test]
    fn search_exhaustion_is_not_an_error() {
        let cfg = GenConfig { max_dim: 2, max_blocks: 2, ..GenConfig::with_seed(1) };
        let r = search_counterexample(Variant::Theorem1, &cfg, 1, false).unwrap();
        assert_eq!(r.trials_used, 1);
        assert_eq!(r.found, r.gap < -r.report.as_ref().unwrap().tol);
    }
}
