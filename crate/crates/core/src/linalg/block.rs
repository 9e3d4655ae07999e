use crate::error::{Error, Result};
use crate::linalg::Mat;

pub const BLOCK_ROWS: usize = 3;
pub const BLOCK_COLS: usize = 2;
pub const BLOCK_LEN: usize = BLOCK_ROWS * BLOCK_COLS;

/// A `(3k) x 2` matrix viewed as `k` stacked 3x2 blocks; block `j` occupies
/// rows `3j..3j+3`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    flat: Mat,
}

impl BlockMatrix {
    pub fn from_flat(flat: Mat) -> Result<Self> {
        if flat.cols() != BLOCK_COLS || !flat.rows().is_multiple_of(BLOCK_ROWS) {
            return Err(Error::shape(format!(
                "a block matrix needs 3k x 2 storage, got {}x{}",
                flat.rows(),
                flat.cols()
            )));
        }
        Ok(BlockMatrix { flat })
    }

    pub fn zeros(k: usize) -> Self {
        BlockMatrix { flat: Mat::zeros(BLOCK_ROWS * k, BLOCK_COLS) }
    }

    pub fn from_blocks(blocks: &[Mat]) -> Result<Self> {
        for b in blocks {
            if b.shape() != (BLOCK_ROWS, BLOCK_COLS) {
                return Err(Error::shape(format!("block must be 3x2, got {}x{}", b.rows(), b.cols())));
            }
        }
        Ok(BlockMatrix { flat: Mat::vstack(blocks)? })
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.flat.rows() / BLOCK_ROWS
    }

    pub fn flat(&self) -> &Mat {
        &self.flat
    }

    pub fn into_flat(self) -> Mat {
        self.flat
    }

    pub fn block(&self, j: usize) -> Mat {
        self.flat.row_block(BLOCK_ROWS * j, BLOCK_ROWS)
    }

    /// The six entries of block `j`, row-major.
    pub fn block_slice(&self, j: usize) -> &[f64] {
        &self.flat.as_slice()[BLOCK_LEN * j..BLOCK_LEN * (j + 1)]
    }

    pub fn block_slice_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.flat.as_mut_slice()[BLOCK_LEN * j..BLOCK_LEN * (j + 1)]
    }

    pub fn block_norms(&self) -> Vec<f64> {
        (0..self.k()).map(|j| self.block_slice(j).iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }

    /// Indices of blocks with any nonzero entry.
    pub fn support(&self) -> Vec<usize> {
        (0..self.k()).filter(|&j| self.block_slice(j).iter().any(|v| *v != 0.0)).collect()
    }

    /// `Σⱼ c[j] · block j` as a 3x2 matrix.
    pub fn combine(&self, c: &[f64]) -> Result<Mat> {
        if c.len() != self.k() {
            return Err(Error::shape(format!("{} coefficients for {} blocks", c.len(), self.k())));
        }
        let mut out = vec![0.0; BLOCK_LEN];
        for (j, cj) in c.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.block_slice(j)) {
                *o += cj * v;
            }
        }
        Ok(Mat::from_vec_unchecked(BLOCK_ROWS, BLOCK_COLS, out))
    }
}

/// `(d ⊗ I₃)ᵀ · flat(x)` computed blockwise: output block `j` is
/// `Σᵢ d[i, j] · (input block i)`, accumulated in increasing `i` from zero.
///
/// `d` is `k_in x k_out`; `x` has `k_in` blocks. This is the 1x1 transposed
/// convolution over block channels.
pub fn kron_identity_transpose_apply(d: &Mat, x: &BlockMatrix) -> Result<BlockMatrix> {
    let (k_in, k_out) = d.shape();
    if x.k() != k_in {
        return Err(Error::shape(format!("dictionary has {k_in} rows but input has {} blocks", x.k())));
    }
    let xs = x.flat().as_slice();
    let ds = d.as_slice();
    let mut out = vec![0.0; BLOCK_LEN * k_out];
    for i in 0..k_in {
        let xi = &xs[BLOCK_LEN * i..BLOCK_LEN * (i + 1)];
        for j in 0..k_out {
            let dij = ds[i * k_out + j];
            let oj = &mut out[BLOCK_LEN * j..BLOCK_LEN * (j + 1)];
            for (o, v) in oj.iter_mut().zip(xi) {
                *o += dij * v;
            }
        }
    }
    Ok(BlockMatrix { flat: Mat::from_vec_unchecked(BLOCK_ROWS * k_out, BLOCK_COLS, out) })
}

/// `(d ⊗ I₃) · flat(y)`: the adjoint of [`kron_identity_transpose_apply`].
/// Output block `i` is `Σⱼ d[i, j] · (input block j)`.
pub fn kron_identity_apply(d: &Mat, y: &BlockMatrix) -> Result<BlockMatrix> {
    let (k_in, k_out) = d.shape();
    if y.k() != k_out {
        return Err(Error::shape(format!("dictionary has {k_out} columns but input has {} blocks", y.k())));
    }
    let ys = y.flat().as_slice();
    let mut out = vec![0.0; BLOCK_LEN * k_in];
    for i in 0..k_in {
        let oi = &mut out[BLOCK_LEN * i..BLOCK_LEN * (i + 1)];
        for j in 0..k_out {
            let dij = d[(i, j)];
            for (o, v) in oi.iter_mut().zip(&ys[BLOCK_LEN * j..BLOCK_LEN * (j + 1)]) {
                *o += dij * v;
            }
        }
    }
    Ok(BlockMatrix { flat: Mat::from_vec_unchecked(BLOCK_ROWS * k_in, BLOCK_COLS, out) })
}

/// `ψ ⊗ I₃` for a code vector `ψ` of length `k`: a `3k x 3` matrix.
pub fn kron_code_identity(psi: &[f64]) -> Mat {
    let k = psi.len();
    Mat::from_fn(BLOCK_ROWS * k, BLOCK_ROWS, |r, c| if r % BLOCK_ROWS == c { psi[r / BLOCK_ROWS] } else { 0.0 })
}

/// `ψ ⊗ M` for a code vector and a 3x2 camera: the block matrix whose block
/// `j` is `ψ[j] · M`.
pub fn kron_code_camera(psi: &[f64], m: &Mat) -> Result<BlockMatrix> {
    if m.shape() != (BLOCK_ROWS, BLOCK_COLS) {
        return Err(Error::shape("camera must be 3x2"));
    }
    let blocks: Vec<Mat> = psi.iter().map(|p| m.scale(*p)).collect();
    BlockMatrix::from_blocks(&blocks)
}
