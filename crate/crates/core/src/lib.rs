//! Log-determinant perturbation inequalities for dense symmetric
//! positive-definite matrices.
//!
//! For SPD `C` partitioned into diagonal blocks and positive perturbations
//! `D_1, …, D_k` of matching sizes, the crate evaluates
//!
//! ```text
//! det(C + diag(D_1, …, D_k)) / det C   against   Π det(C_i + D_i) / det C_i
//! ```
//!
//! both when the `C_i` are the diagonal blocks of `C` (the ratio dominates
//! the product) and when the `C_i⁻¹` are the diagonal blocks of `C⁻¹` (the
//! product dominates the ratio). Supporting identities and inequalities
//! (Schur complements, block inverse, Woodbury, Fischer, Sylvester,
//! Grothendieck, Weyl) are evaluated alongside, with randomized suites,
//! a counterexample search for the full-`D` generalizations and a
//! discretized Brownian super-additivity experiment.
//!
//! All determinant comparisons are done in log domain.

pub mod block;
pub mod brownian;
pub mod cli;
pub mod dense;
pub mod error;
pub mod inequalities;
pub mod randgen;
pub mod report;
pub mod suites;

pub use block::{block_diag, block_inverse_2x2, extract_blocks, identity_residuals, schur_complement, BlockPartition};
pub use dense::{cholesky, invert, log_det, loewner_cmp, spd_sqrt, sym_eigen, EigenDecomp, Mat, SpdMatrix, SymMatrix};
pub use error::{Error, Result};
pub use inequalities::{
    generalized_gap, grothendieck_gap, lemma_gap, log_ratio, theorem1_gap, theorem2_gap, weyl_gap, GapReport,
    TheoremInstance, Variant, Verdict,
};
pub use randgen::{random_instance, random_spd, search_counterexample, GenConfig, SearchResult};
