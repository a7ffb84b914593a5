//! Signed log-determinant gaps for the perturbation inequalities and the
//! classical inequalities they rest on.
//!
//! Every gap is oriented so that `gap >= 0` means the inequality holds,
//! whichever way it is written. A report's verdict is `holds` exactly when
//! `gap >= -tol`, with `tol = rel_tol * (1 + |lhs| + |rhs|)`.

use std::fmt;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::block::{block_diag, diagonal_blocks, schur_complement, BlockPartition, TwoBlock};
use crate::dense::{cholesky, loewner_cmp, Mat, SpdMatrix, SymMatrix};
use crate::error::{Error, Result};

/// Default relative tolerance for inequality gaps.
pub const DEFAULT_REL_TOL: f64 = 1e-9;
/// Relative tolerance for identities that hold with equality (residuals and
/// the agreement of two computation routes).
pub const RESIDUAL_REL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Skipped => "skipped",
        })
    }
}

/// Identifies the instance a report was computed on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    /// FNV-1a hash of the instance's matrix entries, hex encoded.
    #[serde(with = "hex_u64")]
    pub instance_hash: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub substream: Option<u64>,
}

mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
    }
}

impl Fingerprint {
    pub fn of(matrices: &[&SymMatrix], sizes: &[usize]) -> Self {
        let mut h = FnvHasher::default();
        for m in matrices {
            h.write_u64(m.n() as u64);
            for v in m.as_slice() {
                h.write_u64(v.to_bits());
            }
        }
        for s in sizes {
            h.write_u64(*s as u64);
        }
        Self { instance_hash: h.finish(), seed: None, substream: None }
    }

    pub fn with_origin(mut self, seed: u64, substream: u64) -> Self {
        self.seed = Some(seed);
        self.substream = Some(substream);
        self
    }
}

/// One inequality (or identity) evaluation.
///
/// For determinant comparisons `lhs_log`/`rhs_log` are log-determinant
/// expressions; for residual and eigenvalue checks they carry the raw
/// quantity being compared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub name: String,
    pub lhs_log: f64,
    pub rhs_log: f64,
    pub gap: f64,
    pub tol: f64,
    pub verdict: Verdict,
    /// The same gap computed along an independent route, when one exists.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alt_gap: Option<f64>,
    pub fingerprint: Fingerprint,
}

impl GapReport {
    /// Report with the standard log-domain tolerance.
    pub fn new(name: &str, lhs_log: f64, rhs_log: f64, gap: f64) -> Self {
        let tol = DEFAULT_REL_TOL * (1.0 + lhs_log.abs() + rhs_log.abs());
        Self::with_tol(name, lhs_log, rhs_log, gap, tol)
    }

    pub fn with_tol(name: &str, lhs_log: f64, rhs_log: f64, gap: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            lhs_log,
            rhs_log,
            gap,
            tol,
            verdict: judge(gap, tol),
            alt_gap: None,
            fingerprint: Fingerprint::default(),
        }
    }

    pub fn skipped(name: &str) -> Self {
        Self {
            name: name.to_string(),
            lhs_log: 0.0,
            rhs_log: 0.0,
            gap: 0.0,
            tol: 0.0,
            verdict: Verdict::Skipped,
            alt_gap: None,
            fingerprint: Fingerprint::default(),
        }
    }

    pub fn scale(&self) -> f64 {
        1.0 + self.lhs_log.abs() + self.rhs_log.abs()
    }

    /// Re-evaluates the verdict with `tol = rel_tol * scale`.
    pub fn rejudge(mut self, rel_tol: f64) -> Self {
        if self.verdict != Verdict::Skipped {
            self.tol = rel_tol * self.scale();
            self.verdict = judge(self.gap, self.tol);
        }
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    /// Whether the two computation routes agree within `rel_tol * scale`.
    /// Vacuously true when no second route was computed.
    pub fn alt_agrees(&self, rel_tol: f64) -> bool {
        self.alt_gap.is_none_or(|alt| (alt - self.gap).abs() <= rel_tol * self.scale())
    }

    pub fn with_fingerprint(mut self, fp: Fingerprint) -> Self {
        self.fingerprint = fp;
        self
    }
}

fn judge(gap: f64, tol: f64) -> Verdict {
    if gap >= -tol {
        Verdict::Holds
    } else {
        Verdict::Violated
    }
}

/// Which of the two perturbation inequalities is being evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Blocks `C_i` are the diagonal blocks of `C`; ratio is super-multiplicative.
    Theorem1,
    /// Blocks `C_i⁻¹` are the diagonal blocks of `C⁻¹`; ratio is sub-multiplicative.
    Theorem2,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Theorem1 => "theorem1",
            Variant::Theorem2 => "theorem2",
        }
    }
}

/// `C`, a partition and one positive perturbation per diagonal block.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoremInstance {
    pub c: SpdMatrix,
    pub partition: BlockPartition,
    pub perturbations: Vec<SpdMatrix>,
    pub origin: Option<(u64, u64)>,
}

impl TheoremInstance {
    pub fn new(c: SpdMatrix, partition: BlockPartition, perturbations: Vec<SpdMatrix>) -> Result<Self> {
        if partition.total() != c.n() {
            return Err(Error::DimensionMismatch { expected: c.n(), got: partition.total() });
        }
        if perturbations.len() != partition.k() {
            return Err(Error::InvalidPartition(format!(
                "{} perturbations for {} blocks",
                perturbations.len(),
                partition.k()
            )));
        }
        for (i, d) in perturbations.iter().enumerate() {
            if d.n() != partition.size(i) {
                return Err(Error::DimensionMismatch { expected: partition.size(i), got: d.n() });
            }
        }
        Ok(Self { c, partition, perturbations, origin: None })
    }

    pub fn with_origin(mut self, seed: u64, substream: u64) -> Self {
        self.origin = Some((seed, substream));
        self
    }

    pub fn perturbation_blocks(&self) -> Vec<SymMatrix> {
        self.perturbations.iter().map(|d| d.matrix().clone()).collect()
    }

    /// `diag(D_1, …, D_k)`.
    pub fn block_perturbation(&self) -> SymMatrix {
        block_diag(&self.perturbation_blocks()).expect("instance has at least one block")
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let mut mats = vec![self.c.matrix()];
        mats.extend(self.perturbations.iter().map(SpdMatrix::matrix));
        let fp = Fingerprint::of(&mats, self.partition.sizes());
        match self.origin {
            Some((seed, sub)) => fp.with_origin(seed, sub),
            None => fp,
        }
    }
}

/// `log det(C + D) − log det C`.
pub fn log_ratio(c: &SpdMatrix, d: &SymMatrix) -> Result<f64> {
    if c.n() != d.n() {
        return Err(Error::DimensionMismatch { expected: c.n(), got: d.n() });
    }
    Ok(cholesky(&c.matrix().add(d)?)?.log_det() - c.log_det())
}

/// The `C_i` entering the right-hand side for `variant`.
///
/// `Variant::Theorem1`: diagonal blocks of `C`. `Variant::Theorem2`:
/// inverses of the diagonal blocks of `C⁻¹`. With a single block both reduce to `C` itself.
pub fn reference_blocks(c: &SpdMatrix, partition: &BlockPartition, variant: Variant) -> Result<Vec<SpdMatrix>> {
    if partition.k() == 1 {
        if partition.total() != c.n() {
            return Err(Error::DimensionMismatch { expected: c.n(), got: partition.total() });
        }
        return Ok(vec![c.clone()]);
    }
    let blocks = match variant {
        Variant::Theorem1 => diagonal_blocks(c.matrix(), partition)?,
        Variant::Theorem2 => diagonal_blocks(&c.inverse(), partition)?
            .iter()
            .map(|b| cholesky(b).map(|f| f.inverse()))
            .collect::<Result<Vec<_>>>()?,
    };
    blocks.iter().map(cholesky).collect()
}

/// `Σ_i log det(I + B_i D_i) − log det(I + B D)`, with `B_i` and `D_i` the
/// diagonal blocks of `B` and `D`.
///
/// The products are not symmetric; determinants go through LU. This is the
/// inverse-block gap rewritten in terms of `B = C⁻¹`, and with `B` a covariance
/// matrix it is the Gaussian-expectation form of the same inequality.
pub fn equivalent_form_gap(b: &SymMatrix, partition: &BlockPartition, d: &SymMatrix) -> Result<f64> {
    if b.n() != d.n() {
        return Err(Error::DimensionMismatch { expected: b.n(), got: d.n() });
    }
    let b_blocks = diagonal_blocks(b, partition)?;
    let d_blocks = diagonal_blocks(d, partition)?;
    let mut rhs = 0.0;
    for (bi, di) in b_blocks.iter().zip(&d_blocks) {
        rhs += log_det_identity_plus(bi, di)?;
    }
    Ok(rhs - log_det_identity_plus(b, d)?)
}

/// `log det(I + X·Y)` for symmetric `X`, `Y` where the determinant is known
/// to be positive.
fn log_det_identity_plus(x: &SymMatrix, y: &SymMatrix) -> Result<f64> {
    let m = x.matmul(&y.to_mat())?.add(&Mat::identity(x.n()))?;
    match m.log_abs_det() {
        Some((sign, ld)) if sign > 0.0 => Ok(ld),
        _ => Err(Error::Internal("det(I + XY) is not positive".into())),
    }
}

fn perturbation_gap(
    c: &SpdMatrix,
    partition: &BlockPartition,
    full_d: &SymMatrix,
    variant: Variant,
    name: &str,
) -> Result<GapReport> {
    let lhs = log_ratio(c, full_d)?;
    let refs = reference_blocks(c, partition, variant)?;
    let d_blocks = diagonal_blocks(full_d, partition)?;
    let mut rhs = 0.0;
    for (ci, di) in refs.iter().zip(&d_blocks) {
        rhs += log_ratio(ci, di)?;
    }
    Ok(match variant {
        Variant::Theorem1 => GapReport::new(name, lhs, rhs, lhs - rhs),
        Variant::Theorem2 => {
            let alt = equivalent_form_gap(&c.inverse(), partition, full_d)?;
            let mut r = GapReport::new(name, lhs, rhs, rhs - lhs);
            r.alt_gap = Some(alt);
            r
        }
    })
}

/// `log[det(C + diag D)/det C] − Σ log[det(C_i + D_i)/det C_i]` with `C_i`
/// the diagonal blocks of `C`. Non-negative for every valid instance.
pub fn theorem1_gap(inst: &TheoremInstance) -> Result<GapReport> {
    let d = inst.block_perturbation();
    Ok(perturbation_gap(&inst.c, &inst.partition, &d, Variant::Theorem1, "theorem1")?
        .with_fingerprint(inst.fingerprint()))
}

/// `Σ log[det(C_i + D_i)/det C_i] − log[det(C + diag D)/det C]` with `C_i⁻¹`
/// the diagonal blocks of `C⁻¹`. Non-negative for every valid instance.
///
/// `alt_gap` holds the same quantity computed as
/// `Σ log det(I + B_i D_i) − log det(I + B·diag D)`, `B = C⁻¹`.
pub fn theorem2_gap(inst: &TheoremInstance) -> Result<GapReport> {
    let d = inst.block_perturbation();
    Ok(perturbation_gap(&inst.c, &inst.partition, &d, Variant::Theorem2, "theorem2")?
        .with_fingerprint(inst.fingerprint()))
}

pub fn theorem_gap(inst: &TheoremInstance, variant: Variant) -> Result<GapReport> {
    match variant {
        Variant::Theorem1 => theorem1_gap(inst),
        Variant::Theorem2 => theorem2_gap(inst),
    }
}

/// The theorem gaps with `diag(D_1, …, D_k)` replaced by a full SPD `D`
/// whose diagonal blocks are the `D_i`. These can be negative.
pub fn generalized_gap(c: &SpdMatrix, d: &SpdMatrix, partition: &BlockPartition, variant: Variant) -> Result<GapReport> {
    if c.n() != d.n() {
        return Err(Error::DimensionMismatch { expected: c.n(), got: d.n() });
    }
    let name = match variant {
        Variant::Theorem1 => "theorem1-general",
        Variant::Theorem2 => "theorem2-general",
    };
    let fp = Fingerprint::of(&[c.matrix(), d.matrix()], partition.sizes());
    Ok(perturbation_gap(c, partition, d.matrix(), variant, name)?.with_fingerprint(fp))
}

/// `log[det(V + D)/det V] − log[det(U + D)/det U]` for `U ≥ V`.
///
/// Returns [`Error::PreconditionFailed`] when `U ≥ V` does not hold.
pub fn lemma_gap(u: &SpdMatrix, v: &SpdMatrix, d: &SymMatrix) -> Result<GapReport> {
    let order = loewner_cmp(u.matrix(), v.matrix())?;
    if !order.is_geq(DEFAULT_REL_TOL) {
        return Err(Error::PreconditionFailed(format!(
            "U >= V fails: min eigenvalue of U - V is {:.3e}",
            order.min_eig
        )));
    }
    let lhs = log_ratio(v, d)?;
    let rhs = log_ratio(u, d)?;
    let fp = Fingerprint::of(&[u.matrix(), v.matrix(), d], &[]);
    Ok(GapReport::new("lemma", lhs, rhs, lhs - rhs).with_fingerprint(fp))
}

/// `log det(I + A) + log det(I + B) − log det(I + A + B)` for PSD `A`, `B`.
pub fn grothendieck_gap(a: &SymMatrix, b: &SymMatrix) -> Result<GapReport> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: b.n() });
    }
    let lhs = cholesky(&a.add(b)?.shift(1.0))?.log_det();
    let rhs = cholesky(&a.shift(1.0))?.log_det() + cholesky(&b.shift(1.0))?.log_det();
    let fp = Fingerprint::of(&[a, b], &[]);
    Ok(GapReport::new("grothendieck", lhs, rhs, rhs - lhs).with_fingerprint(fp))
}

/// Both halves of Weyl's monotonicity for `A = B + W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    /// `log det(B + W) − log det B`.
    pub det: GapReport,
    /// `λ_min(B⁻¹ − (B + W)⁻¹)`, tolerance relative to `1 + ‖B⁻¹‖_max`.
    pub inverse: GapReport,
}

impl WeylReport {
    pub fn holds(&self) -> bool {
        self.det.holds() && self.inverse.holds()
    }
}

pub fn weyl_gap(b: &SpdMatrix, w: &SymMatrix) -> Result<WeylReport> {
    weyl_gap_with_tol(b, w, DEFAULT_REL_TOL)
}

pub fn weyl_gap_with_tol(b: &SpdMatrix, w: &SymMatrix, rel_tol: f64) -> Result<WeylReport> {
    let a = cholesky(&b.matrix().add(w)?)?;
    let fp = Fingerprint::of(&[b.matrix(), w], &[]);
    let det = GapReport::new("weyl_det", a.log_det(), b.log_det(), a.log_det() - b.log_det())
        .rejudge(rel_tol)
        .with_fingerprint(fp);
    let b_inv = b.inverse();
    let min_eig = b_inv.sub(&a.inverse())?.min_eig()?;
    let tol = rel_tol * (1.0 + b_inv.max_abs());
    let inverse = GapReport::with_tol("weyl_inverse", min_eig, 0.0, min_eig, tol).with_fingerprint(fp);
    Ok(WeylReport { det, inverse })
}

/// Fischer's inequality on one split: `log det A + log det D − log det M`.
///
/// `alt_gap` is the same slack written as `log det D − log det S_A`.
pub fn fischer_gap(m: &SpdMatrix, split: usize) -> Result<GapReport> {
    let parts = TwoBlock::of(m.matrix(), split)?;
    let a = cholesky(&parts.a)?;
    let d = cholesky(&parts.d)?;
    let s = cholesky(&schur_complement(m, split)?)?;
    let lhs = m.log_det();
    let rhs = a.log_det() + d.log_det();
    let fp = Fingerprint::of(&[m.matrix()], &[split, m.n() - split]);
    let mut r = GapReport::new("fischer", lhs, rhs, rhs - lhs).with_fingerprint(fp);
    r.alt_gap = Some(d.log_det() - s.log_det());
    Ok(r)
}
