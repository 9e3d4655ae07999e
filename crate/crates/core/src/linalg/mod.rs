//! Dense linear algebra for the small matrices used throughout the crate.

mod block;
mod decomp;
mod mat;
mod random;

pub use block::{
    kron_code_camera, kron_code_identity, kron_identity_apply, kron_identity_transpose_apply, BlockMatrix, BLOCK_COLS,
    BLOCK_LEN, BLOCK_ROWS,
};
pub use decomp::{
    least_squares, orthonormalize_columns, polar_threshold, polar_two_col, qr_thin, spectral_norm, svd_thin, Polar2,
    Svd,
};
pub use mat::Mat;
pub use random::{gaussian_mat, random_semiorthonormal_3x2};

/// `‖MᵀM − I‖` in the max-entry norm.
pub fn orthonormality_defect(m: &Mat) -> f64 {
    m.matmul_tn(m).expect("self product is conformant").sub(&Mat::identity(m.cols())).expect("square").max_abs()
}
