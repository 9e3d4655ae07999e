//! The block-sparse auto-encoder: encoder stack, code and camera readout,
//! decoder stack and reprojection loss.
//!
//! Encoder, for a centered `p x 2` frame `W`:
//!
//! ```text
//! Ψ₁ = relu(D₁♯ᵀ W − b₁ ⊗ 1₃ₓ₂)
//! Ψᵢ = relu((Dᵢ ⊗ I₃)ᵀ Ψᵢ₋₁ − bᵢ ⊗ 1₃ₓ₂)        i = 2 … n
//! ```
//!
//! Readout: `ψₙ = R · vec(Ψₙ)` and `M = Σⱼ cⱼ Ψₙ,ⱼ`, then `M̃ = UVᵀ`.
//!
//! Decoder: `ψᵢ₋₁ = relu(Dᵢ ψᵢ − bᵢ′)` for `i = n … 2`, then
//! `S = D₁♯ (ψ₁ ⊗ I₃)`. The loss is `‖W − S M̃‖_F`.

mod params;

pub use params::{d1_to_sharp, sharp_to_d1, ModelDims, ModelParams};

use crate::autodiff::{Tape, Threshold, Var};
use crate::error::{Error, Result};
use crate::linalg::{
    kron_code_identity, kron_identity_transpose_apply, polar_two_col, BlockMatrix, Mat, BLOCK_LEN, BLOCK_ROWS,
};

fn check_frame(w: &Mat, params: &ModelParams) -> Result<()> {
    if w.shape() != (params.dims.p, 2) {
        return Err(Error::shape(format!("frame is {}x{}, model expects {}x2", w.rows(), w.cols(), params.dims.p)));
    }
    Ok(())
}

fn relu_per_block(x: &BlockMatrix, b: &Mat) -> BlockMatrix {
    let bs = b.as_slice();
    let data: Vec<f64> =
        x.flat().as_slice().iter().enumerate().map(|(i, v)| (v - bs[i / BLOCK_LEN]).max(0.0)).collect();
    BlockMatrix::from_flat(Mat::from_vec(x.flat().rows(), 2, data).expect("finite")).expect("block shaped")
}

/// Encoder codes `Ψ₁ … Ψₙ`. Every output is entrywise nonnegative.
pub fn encode(w: &Mat, params: &ModelParams) -> Result<Vec<BlockMatrix>> {
    check_frame(w, params)?;
    let pre = BlockMatrix::from_flat(params.d1_sharp.matmul_tn(w)?)?;
    let mut codes = vec![relu_per_block(&pre, &params.enc_thresholds[0])];
    for (d, b) in params.dicts.iter().zip(&params.enc_thresholds[1..]) {
        let pre = kron_identity_transpose_apply(d, codes.last().expect("nonempty"))?;
        codes.push(relu_per_block(&pre, b));
    }
    Ok(codes)
}

/// `(ψₙ, M)` from the last code: `ψₙ = R · vec(Ψₙ)`, `M = Σⱼ cⱼ Ψₙ,ⱼ`.
pub fn readout(psi_cap_n: &BlockMatrix, params: &ModelParams) -> Result<(Vec<f64>, Mat)> {
    let k = params.dims.k_last();
    if psi_cap_n.k() != k {
        return Err(Error::shape(format!("readout expects {k} blocks, got {}", psi_cap_n.k())));
    }
    let flat = psi_cap_n.flat().reshape(BLOCK_LEN * k, 1)?;
    let psi_n = params.code_readout.matmul(&flat)?.into_vec();
    let m = psi_cap_n.combine(params.cam_coeffs.as_slice())?;
    Ok((psi_n, m))
}

/// Decoder codes `ψ₁ … ψₙ` (index 0 is `ψ₁`) from `ψₙ`.
pub fn decode_codes(psi_n: &[f64], params: &ModelParams) -> Result<Vec<Vec<f64>>> {
    let n = params.dims.depth();
    if psi_n.len() != params.dims.k_last() {
        return Err(Error::shape(format!("decoder expects a code of length {}", params.dims.k_last())));
    }
    let mut codes = vec![psi_n.to_vec()];
    for i in (1..n).rev() {
        let d = &params.dicts[i - 1];
        let b = &params.dec_thresholds[i - 1];
        let pre = d.matmul(&Mat::column(codes.last().expect("nonempty")))?;
        let next: Vec<f64> = pre.as_slice().iter().zip(b.as_slice()).map(|(v, t)| (v - t).max(0.0)).collect();
        codes.push(next);
    }
    codes.reverse();
    Ok(codes)
}

/// Shape from the last code: the `p x 3` matrix `S = D₁♯ (ψ₁ ⊗ I₃)` and its
/// vectorization `s = D₁ ψ₁` (point-major `x₁ y₁ z₁ x₂ …`).
pub fn decode(psi_n: &[f64], params: &ModelParams) -> Result<(Vec<f64>, Mat)> {
    let codes = decode_codes(psi_n, params)?;
    let psi1 = &codes[0];
    let shape = params.d1_sharp.matmul(&kron_code_identity(psi1))?;
    let s = shape.as_slice().to_vec();
    Ok((s, shape))
}

/// `s = D₁ ψ₁` computed on the `3p x k₁` dictionary. Reference path for
/// checking [`decode`].
pub fn decode_vector(psi_n: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    let codes = decode_codes(psi_n, params)?;
    Ok(params.d1().matmul(&Mat::column(&codes[0]))?.into_vec())
}

#[derive(Clone, Debug)]
pub struct ForwardResult {
    pub codes: Vec<BlockMatrix>,
    pub psi_n: Vec<f64>,
    /// Raw camera estimate `M = Σⱼ cⱼ Ψₙ,ⱼ`.
    pub camera_raw: Mat,
    /// `M̃ = UVᵀ`; `None` when `M` is too close to rank deficient.
    pub camera: Option<Mat>,
    pub shape: Mat,
    /// `‖W − S M̃‖_F` against the centered frame; `None` when degenerate.
    pub loss: Option<f64>,
}

impl ForwardResult {
    pub fn is_degenerate(&self) -> bool {
        self.camera.is_none()
    }
}

/// Full pass on one frame. The frame is centered (column means removed)
/// before encoding.
pub fn forward(w: &Mat, params: &ModelParams) -> Result<ForwardResult> {
    check_frame(w, params)?;
    let w = w.centered();
    let codes = encode(&w, params)?;
    let (psi_n, camera_raw) = readout(codes.last().expect("n >= 1"), params)?;
    let (_, shape) = decode(&psi_n, params)?;
    let (camera, loss) = match polar_two_col(&camera_raw) {
        Ok(polar) => {
            let loss = w.sub(&shape.matmul(&polar.q)?)?.frobenius_norm();
            (Some(polar.q), Some(loss))
        }
        Err(Error::DegenerateCamera { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(ForwardResult { codes, psi_n, camera_raw, camera, shape, loss })
}

/// Parameter leaves on a tape, in [`ModelParams::tensors`] order.
#[derive(Clone, Debug)]
pub struct ParamVars {
    vars: Vec<Var>,
    depth: usize,
}

impl ParamVars {
    pub fn record(tape: &mut Tape, params: &ModelParams) -> Self {
        let vars = params.tensors().into_iter().map(|t| tape.leaf(t.clone())).collect();
        ParamVars { vars, depth: params.dims.depth() }
    }

    pub fn all(&self) -> &[Var] {
        &self.vars
    }

    fn d1_sharp(&self) -> Var {
        self.vars[0]
    }

    /// `Dᵢ` for `i = 2 … n`.
    fn dict(&self, i: usize) -> Var {
        self.vars[i - 1]
    }

    /// `bᵢ` for `i = 1 … n`.
    fn enc_threshold(&self, i: usize) -> Var {
        self.vars[self.depth + i - 1]
    }

    /// `bᵢ′` for `i = 2 … n`.
    fn dec_threshold(&self, i: usize) -> Var {
        self.vars[2 * self.depth + i - 2]
    }

    fn readout(&self) -> Var {
        self.vars[3 * self.depth - 1]
    }

    fn cam_coeffs(&self) -> Var {
        self.vars[3 * self.depth]
    }
}

/// Handles to the interesting nodes of a recorded forward pass.
#[derive(Clone, Debug)]
pub struct RecordedForward {
    pub codes: Vec<Var>,
    pub psi_n: Var,
    pub camera_raw: Var,
    pub camera: Var,
    pub shape: Var,
    pub loss: Var,
}

/// Records the forward pass of one frame on `tape`. Fails with
/// [`Error::DegenerateCamera`] when the camera cannot be orthonormalized.
pub fn record_forward(tape: &mut Tape, vars: &ParamVars, dims: &ModelDims, w: &Mat) -> Result<RecordedForward> {
    if w.shape() != (dims.p, 2) {
        return Err(Error::shape(format!("frame is {}x{}, model expects {}x2", w.rows(), w.cols(), dims.p)));
    }
    let n = dims.depth();
    let w = tape.leaf(w.centered());

    let pre = tape.matmul_tn(vars.d1_sharp(), w)?;
    let mut codes = vec![tape.relu_bias(pre, vars.enc_threshold(1), Threshold::PerBlock)?];
    for i in 2..=n {
        let pre = tape.kron_apply(vars.dict(i), *codes.last().expect("nonempty"))?;
        codes.push(tape.relu_bias(pre, vars.enc_threshold(i), Threshold::PerBlock)?);
    }
    let last = *codes.last().expect("nonempty");

    let flat = tape.reshape(last, BLOCK_LEN * dims.k_last(), 1)?;
    let psi_n = tape.matmul(vars.readout(), flat)?;
    let camera_raw = tape.block_combine(last, vars.cam_coeffs())?;
    let camera = tape.orthonormalize(camera_raw)?;

    let mut psi = psi_n;
    for i in (2..=n).rev() {
        let pre = tape.matmul(vars.dict(i), psi)?;
        psi = tape.relu_bias(pre, vars.dec_threshold(i), Threshold::PerElement)?;
    }
    let lifted = tape.kron_code(psi)?;
    let shape = tape.matmul(vars.d1_sharp(), lifted)?;
    debug_assert_eq!(shape.shape(), (dims.p, BLOCK_ROWS));

    let reproj = tape.matmul(shape, camera)?;
    let resid = tape.sub(w, reproj)?;
    let loss = tape.frob_norm(resid);
    Ok(RecordedForward { codes, psi_n, camera_raw, camera, shape, loss })
}

/// Loss and gradient for every parameter tensor on one frame.
pub fn loss_and_grad(params: &ModelParams, w: &Mat) -> Result<(f64, Vec<Mat>)> {
    let mut tape = Tape::new();
    let vars = ParamVars::record(&mut tape, params);
    let rec = record_forward(&mut tape, &vars, &params.dims, w)?;
    let loss = tape.value(rec.loss)[(0, 0)];
    let grads = tape.grad(rec.loss, vars.all())?;
    Ok((loss, grads))
}
