//! Block partitions, block-diagonal assembly, Schur complements and the
//! determinant identities built on them.
//!
//! Only the symmetric case `M = [[A, B], [Bᵀ, D]]` is handled. Blocks are
//! materialized copies. A k-block problem is always reduced to nested
//! two-block splits (first block against the rest).

use serde::{Deserialize, Serialize};

use crate::dense::{cholesky, psd_sqrt, Mat, SpdMatrix, SymMatrix};
use crate::error::{Error, Result};

/// Ordered block sizes `(n_1, …, n_k)` of a square matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl TryFrom<Vec<usize>> for BlockPartition {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        BlockPartition::new(sizes)
    }
}

impl From<BlockPartition> for Vec<usize> {
    fn from(p: BlockPartition) -> Self {
        p.sizes
    }
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("at least one block is required".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidPartition(format!("zero-sized block in {sizes:?}")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// Two blocks `(split, n - split)`.
    pub fn split(n: usize, split: usize) -> Result<Self> {
        if split == 0 || split >= n {
            return Err(Error::InvalidPartition(format!("split {split} must lie in 1..{n}")));
        }
        Self::new(vec![split, n - split])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    /// The remaining blocks after dropping the first, or `None` when k = 1.
    pub fn tail(&self) -> Option<BlockPartition> {
        (self.k() > 1).then(|| BlockPartition::new(self.sizes[1..].to_vec()).unwrap())
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.total() != n {
            return Err(Error::DimensionMismatch { expected: self.total(), got: n });
        }
        Ok(())
    }
}

/// A materialized `(i, j)` block of a partitioned matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockView {
    pub parent_n: usize,
    pub row_block: usize,
    pub col_block: usize,
    pub block: Mat,
}

/// The full k×k grid of blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockGrid {
    partition: BlockPartition,
    views: Vec<BlockView>,
}

impl BlockGrid {
    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn get(&self, i: usize, j: usize) -> &BlockView {
        &self.views[i * self.partition.k() + j]
    }

    pub fn diagonal(&self, i: usize) -> SymMatrix {
        SymMatrix::from_mat(&self.get(i, i).block).expect("diagonal blocks are square")
    }

    /// Writes every block back into one `n×n` matrix.
    pub fn reassemble(&self) -> SymMatrix {
        let n = self.partition.total();
        let mut data = vec![0.0; n * n];
        for view in &self.views {
            let r0 = self.partition.offset(view.row_block);
            let c0 = self.partition.offset(view.col_block);
            for i in 0..view.block.rows() {
                for j in 0..view.block.cols() {
                    data[(r0 + i) * n + c0 + j] = view.block.get(i, j);
                }
            }
        }
        SymMatrix::new(n, data).expect("reassembled grid is square")
    }
}

/// `diag(B_1, …, B_k)`.
pub fn block_diag(blocks: &[SymMatrix]) -> Result<SymMatrix> {
    if blocks.is_empty() {
        return Err(Error::InvalidPartition("block_diag needs at least one block".into()));
    }
    let n: usize = blocks.iter().map(SymMatrix::n).sum();
    let mut data = vec![0.0; n * n];
    let mut off = 0;
    for b in blocks {
        for i in 0..b.n() {
            for j in 0..b.n() {
                data[(off + i) * n + off + j] = b.get(i, j);
            }
        }
        off += b.n();
    }
    SymMatrix::new(n, data)
}

pub fn extract_blocks(a: &SymMatrix, p: &BlockPartition) -> Result<BlockGrid> {
    p.check_dim(a.n())?;
    let k = p.k();
    let mut views = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            views.push(BlockView {
                parent_n: a.n(),
                row_block: i,
                col_block: j,
                block: a.block(p.offset(i), p.size(i), p.offset(j), p.size(j)),
            });
        }
    }
    Ok(BlockGrid { partition: p.clone(), views })
}

/// Diagonal blocks only, without materializing the off-diagonal ones.
pub fn diagonal_blocks(a: &SymMatrix, p: &BlockPartition) -> Result<Vec<SymMatrix>> {
    p.check_dim(a.n())?;
    Ok((0..p.k()).map(|i| a.principal(p.offset(i), p.size(i))).collect())
}

/// The three pieces of `M = [[A, B], [Bᵀ, D]]` split after row `split`.
#[derive(Clone, Debug)]
pub struct TwoBlock {
    pub a: SymMatrix,
    pub b: Mat,
    pub d: SymMatrix,
}

impl TwoBlock {
    pub fn of(m: &SymMatrix, split: usize) -> Result<Self> {
        let n = m.n();
        BlockPartition::split(n, split)?;
        Ok(Self {
            a: m.principal(0, split),
            b: m.block(0, split, split, n - split),
            d: m.principal(split, n - split),
        })
    }
}

fn factor_block(block: &SymMatrix, what: &str) -> Result<SpdMatrix> {
    cholesky(block).map_err(|e| Error::Internal(format!("{what} block of an SPD matrix failed Cholesky: {e}")))
}

/// `D − Bᵀ·A⁻¹·B` given the factored `A` block.
fn schur_from_parts(a: &SpdMatrix, b: &Mat, d: &SymMatrix) -> Result<SymMatrix> {
    // Y = L⁻¹B, so BᵀA⁻¹B = YᵀY.
    let y = a.solve_lower(b)?;
    let yty = y.transpose().matmul(&y)?;
    d.sub(&SymMatrix::from_mat(&yty)?)
}

/// Schur complement `S_A = D − Bᵀ·A⁻¹·B` of the leading `split×split` block.
pub fn schur_complement(m: &SpdMatrix, split: usize) -> Result<SymMatrix> {
    let parts = TwoBlock::of(m.matrix(), split)?;
    let a = factor_block(&parts.a, "leading")?;
    schur_from_parts(&a, &parts.b, &parts.d)
}

/// `M⁻¹` assembled from the four-block formula around `S_A`:
///
/// ```text
/// [ A⁻¹ + A⁻¹B S⁻¹ BᵀA⁻¹   −A⁻¹B S⁻¹ ]
/// [ −S⁻¹ BᵀA⁻¹              S⁻¹       ]
/// ```
pub fn block_inverse_2x2(m: &SpdMatrix, split: usize) -> Result<SymMatrix> {
    let n = m.n();
    let parts = TwoBlock::of(m.matrix(), split)?;
    let a = factor_block(&parts.a, "leading")?;
    let s = factor_block(&schur_from_parts(&a, &parts.b, &parts.d)?, "Schur complement")?;
    let a_inv = a.inverse();
    let s_inv = s.inverse();
    // X = A⁻¹B
    let x = a.solve(&parts.b)?;
    let x_sinv = x.matmul(&s_inv.to_mat())?;
    let top_left = a_inv.to_mat().add(&x_sinv.matmul(&x.transpose())?)?;

    let mut data = vec![0.0; n * n];
    let m2 = n - split;
    for i in 0..split {
        for j in 0..split {
            data[i * n + j] = top_left.get(i, j);
        }
        for j in 0..m2 {
            let v = -x_sinv.get(i, j);
            data[i * n + split + j] = v;
            data[(split + j) * n + i] = v;
        }
    }
    for i in 0..m2 {
        for j in 0..m2 {
            data[(split + i) * n + split + j] = s_inv.get(i, j);
        }
    }
    SymMatrix::new(n, data)
}

/// Residuals of the determinant identities on one two-block split.
///
/// Each residual comes with the scale its tolerance is relative to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `|log det M − log det A − log det S_A|`.
    pub fischer: f64,
    pub fischer_scale: f64,
    /// `‖(A − B D⁻¹ Bᵀ)⁻¹ − (A⁻¹ + A⁻¹B S_A⁻¹ BᵀA⁻¹)‖_max`; `None` when
    /// `A − B D⁻¹ Bᵀ` fails the SPD check and the identity is skipped.
    pub woodbury: Option<f64>,
    pub woodbury_scale: f64,
    /// `|log det(I + XY) − log det(I + YX)|` with `X = M·√D_aux`, `Y = √D_aux`.
    pub sylvester: f64,
    pub sylvester_scale: f64,
}

impl IdentityResiduals {
    pub fn all_within(&self, rel_tol: f64) -> bool {
        self.fischer <= rel_tol * self.fischer_scale
            && self.woodbury.is_none_or(|w| w <= rel_tol * self.woodbury_scale)
            && self.sylvester <= rel_tol * self.sylvester_scale
    }
}

/// Evaluates the Fischer determinant identity, the Woodbury identity and
/// Sylvester's identity on `m` split at `split`.
///
/// `aux` is the PSD matrix entering Sylvester's identity; it defaults to
/// the identity.
pub fn identity_residuals(m: &SpdMatrix, split: usize, aux: Option<&SymMatrix>) -> Result<IdentityResiduals> {
    let n = m.n();
    let parts = TwoBlock::of(m.matrix(), split)?;
    let a = factor_block(&parts.a, "leading")?;
    let s_a = factor_block(&schur_from_parts(&a, &parts.b, &parts.d)?, "Schur complement")?;

    let fischer = (m.log_det() - a.log_det() - s_a.log_det()).abs();
    let fischer_scale = 1.0 + m.log_det().abs() + a.log_det().abs() + s_a.log_det().abs();

    // Woodbury: (A − B D⁻¹ Bᵀ)⁻¹ == A⁻¹ + A⁻¹B S_A⁻¹ BᵀA⁻¹.
    let d = factor_block(&parts.d, "trailing")?;
    let bt = parts.b.transpose();
    let s_d = schur_from_parts(&d, &bt, &parts.a)?;
    let (woodbury, woodbury_scale) = match cholesky(&s_d) {
        Ok(s_d) => {
            let lhs = s_d.inverse();
            let x = a.solve(&parts.b)?;
            let rhs = a.inverse().to_mat().add(&x.matmul(&s_a.inverse().to_mat())?.matmul(&x.transpose())?)?;
            let resid = lhs.to_mat().sub(&rhs)?.max_abs();
            (Some(resid), 1.0 + lhs.max_abs())
        }
        Err(_) => (None, 1.0),
    };

    let aux = match aux {
        Some(d) => {
            if d.n() != n {
                return Err(Error::DimensionMismatch { expected: n, got: d.n() });
            }
            d.clone()
        }
        None => SymMatrix::identity(n),
    };
    let root = psd_sqrt(&aux)?.to_mat();
    let x = m.matrix().matmul(&root)?;
    let xy = x.matmul(&root)?.add(&Mat::identity(n))?;
    let yx = root.matmul(&x)?.add(&Mat::identity(n))?;
    let (sign_xy, ld_xy) = xy
        .log_abs_det()
        .ok_or_else(|| Error::Internal("I + XY is singular".into()))?;
    // I + YX = I + √D M √D is SPD; a Cholesky route keeps the two sides independent.
    let ld_yx = cholesky(&SymMatrix::from_mat(&yx)?)?.log_det();
    let sylvester = if sign_xy > 0.0 { (ld_xy - ld_yx).abs() } else { f64::INFINITY };
    let sylvester_scale = 1.0 + ld_xy.abs() + ld_yx.abs();

    Ok(IdentityResiduals { fischer, fischer_scale, woodbury, woodbury_scale, sylvester, sylvester_scale })
}
