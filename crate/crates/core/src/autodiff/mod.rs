//! Reverse-mode differentiation over a fixed set of matrix operations.
//!
//! A [`Tape`] records every operation in execution order together with its
//! forward value. [`Tape::grad`] walks the record backwards once, so a node's
//! inputs are always visited after the node itself. The operation set is
//! closed: it covers exactly what the auto-encoder needs (products, the
//! blockwise Kronecker kernel, thresholded ReLU, block combination, the polar
//! projection of a camera and the Frobenius norm) plus a few shape helpers.

use crate::error::{Error, Result};
use crate::linalg::{
    kron_code_identity, kron_identity_apply, kron_identity_transpose_apply, polar_two_col, BlockMatrix, Mat, Polar2,
    BLOCK_LEN, BLOCK_ROWS,
};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    id: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn id(&self) -> usize {
        self.id
    }
}

/// How a threshold is broadcast against its input in [`Tape::relu_bias`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Threshold {
    /// One scalar per 3x2 block: `b` is `k x 1` for a `3k x 2` input.
    PerBlock,
    /// One scalar per entry: `b` has the input's shape.
    PerElement,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulTn(usize, usize),
    Sub(usize, usize),
    Reshape(usize),
    KronApply { dict: usize, x: usize },
    KronCode(usize),
    ReluBias { x: usize, b: usize, mode: Threshold },
    BlockCombine { x: usize, c: usize },
    Orthonormalize { m: usize, polar: Box<Polar2> },
    FrobNorm(usize),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Mat,
}

/// Append-only record of a forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Mat) -> Var {
        let (rows, cols) = value.shape();
        self.nodes.push(Node { op, value });
        Var { id: self.nodes.len() - 1, rows, cols }
    }

    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.id].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a.id, b.id), value))
    }

    /// `aᵀ b`.
    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_tn(self.value(b))?;
        Ok(self.push(Op::MatMulTn(a.id, b.id), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a.id, b.id), value))
    }

    /// Row-major reinterpretation with a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let value = self.value(a).reshape(rows, cols)?;
        Ok(self.push(Op::Reshape(a.id), value))
    }

    /// `(dict ⊗ I₃)ᵀ x` for a `3k_in x 2` block input.
    pub fn kron_apply(&mut self, dict: Var, x: Var) -> Result<Var> {
        let xb = BlockMatrix::from_flat(self.value(x).clone())?;
        let value = kron_identity_transpose_apply(self.value(dict), &xb)?.into_flat();
        Ok(self.push(Op::KronApply { dict: dict.id, x: x.id }, value))
    }

    /// `ψ ⊗ I₃` for a `k x 1` code.
    pub fn kron_code(&mut self, psi: Var) -> Result<Var> {
        if psi.cols != 1 {
            return Err(Error::shape(format!("kron_code expects a column vector, got {}x{}", psi.rows, psi.cols)));
        }
        let value = kron_code_identity(self.value(psi).as_slice());
        Ok(self.push(Op::KronCode(psi.id), value))
    }

    /// `max(x − broadcast(b), 0)`; the subgradient at exactly zero is zero.
    pub fn relu_bias(&mut self, x: Var, b: Var, mode: Threshold) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(b);
        let value = match mode {
            Threshold::PerBlock => {
                if b.cols != 1 || x.cols != 2 || x.rows != BLOCK_ROWS * b.rows {
                    return Err(Error::shape(format!(
                        "per-block threshold of {}x{} against {}x{} input",
                        b.rows, b.cols, x.rows, x.cols
                    )));
                }
                let bs = bv.as_slice();
                let data = xv.as_slice().iter().enumerate().map(|(i, v)| (v - bs[i / BLOCK_LEN]).max(0.0)).collect();
                Mat::from_vec_unchecked(x.rows, x.cols, data)
            }
            Threshold::PerElement => {
                if b.shape() != x.shape() {
                    return Err(Error::shape(format!(
                        "per-element threshold of {}x{} against {}x{} input",
                        b.rows, b.cols, x.rows, x.cols
                    )));
                }
                let data = xv.as_slice().iter().zip(bv.as_slice()).map(|(v, t)| (v - t).max(0.0)).collect();
                Mat::from_vec_unchecked(x.rows, x.cols, data)
            }
        };
        Ok(self.push(Op::ReluBias { x: x.id, b: b.id, mode }, value))
    }

    /// `Σⱼ c[j] · (block j of x)` for a `3k x 2` input and `k x 1` weights.
    pub fn block_combine(&mut self, x: Var, c: Var) -> Result<Var> {
        if c.cols != 1 {
            return Err(Error::shape("combination weights must be a column vector"));
        }
        let xb = BlockMatrix::from_flat(self.value(x).clone())?;
        let value = xb.combine(self.value(c).as_slice())?;
        Ok(self.push(Op::BlockCombine { x: x.id, c: c.id }, value))
    }

    /// Nearest matrix with orthonormal columns, `UVᵀ` from `m = UΣVᵀ`.
    ///
    /// Fails with [`Error::DegenerateCamera`] when the smallest singular value
    /// is at or below `1e-6 · max(1, ‖m‖_F)`.
    pub fn orthonormalize(&mut self, m: Var) -> Result<Var> {
        if m.shape() != (3, 2) {
            return Err(Error::shape(format!("orthonormalize expects 3x2, got {}x{}", m.rows, m.cols)));
        }
        let polar = polar_two_col(self.value(m))?;
        let value = polar.q.clone();
        Ok(self.push(Op::Orthonormalize { m: m.id, polar: Box::new(polar) }, value))
    }

    /// Frobenius norm as a 1x1 value.
    pub fn frob_norm(&mut self, a: Var) -> Var {
        let value = Mat::from_vec_unchecked(1, 1, vec![self.value(a).frobenius_norm()]);
        self.push(Op::FrobNorm(a.id), value)
    }

    /// Gradients of a scalar `loss` with respect to each of `wrt`.
    ///
    /// Variables that the loss does not depend on get a zero gradient.
    pub fn grad(&self, loss: Var, wrt: &[Var]) -> Result<Vec<Mat>> {
        if loss.shape() != (1, 1) {
            return Err(Error::Contract(format!("gradient requires a scalar loss, got {}x{}", loss.rows, loss.cols)));
        }
        for w in wrt {
            if w.id >= self.nodes.len() || self.nodes[w.id].value.shape() != w.shape() {
                return Err(Error::Contract(format!("variable {} is not recorded on this tape", w.id)));
            }
        }
        let mut adj: Vec<Option<Mat>> = Vec::with_capacity(loss.id + 1);
        adj.resize_with(loss.id + 1, || None);
        adj[loss.id] = Some(Mat::filled(1, 1, 1.0));

        for id in (0..=loss.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            self.backprop_node(id, &g, &mut adj)?;
            adj[id] = Some(g);
        }

        Ok(wrt
            .iter()
            .map(|w| adj.get(w.id).and_then(|g| g.clone()).unwrap_or_else(|| Mat::zeros(w.rows, w.cols)))
            .collect())
    }

    fn backprop_node(&self, id: usize, g: &Mat, adj: &mut [Option<Mat>]) -> Result<()> {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = &self.nodes[*a].value;
                let bv = &self.nodes[*b].value;
                accumulate(adj, *a, g.matmul_nt(bv)?)?;
                accumulate(adj, *b, av.matmul_tn(g)?)?;
            }
            Op::MatMulTn(a, b) => {
                // out = aᵀ b: da = b gᵀ, db = a g.
                let av = &self.nodes[*a].value;
                let bv = &self.nodes[*b].value;
                accumulate(adj, *a, bv.matmul_nt(g)?)?;
                accumulate(adj, *b, av.matmul(g)?)?;
            }
            Op::Sub(a, b) => {
                accumulate(adj, *a, g.clone())?;
                accumulate(adj, *b, g.scale(-1.0))?;
            }
            Op::Reshape(a) => {
                let (r, c) = self.nodes[*a].value.shape();
                accumulate(adj, *a, g.reshape(r, c)?)?;
            }
            Op::KronApply { dict, x } => {
                let d = &self.nodes[*dict].value;
                let xb = BlockMatrix::from_flat(self.nodes[*x].value.clone())?;
                let gb = BlockMatrix::from_flat(g.clone())?;
                // out_j = Σᵢ d[i,j] xᵢ, so ∂/∂d[i,j] = ⟨g_j, x_i⟩ and ∂/∂x_i = Σⱼ d[i,j] g_j.
                let gd = Mat::from_fn(d.rows(), d.cols(), |i, j| {
                    xb.block_slice(i).iter().zip(gb.block_slice(j)).map(|(a, b)| a * b).sum()
                });
                accumulate(adj, *dict, gd)?;
                accumulate(adj, *x, kron_identity_apply(d, &gb)?.into_flat())?;
            }
            Op::KronCode(psi) => {
                let k = self.nodes[*psi].value.rows();
                let gp = Mat::from_fn(k, 1, |j, _| (0..BLOCK_ROWS).map(|c| g[(BLOCK_ROWS * j + c, c)]).sum());
                accumulate(adj, *psi, gp)?;
            }
            Op::ReluBias { x, b, mode } => {
                let out = node.value.as_slice();
                let masked: Vec<f64> =
                    g.as_slice().iter().zip(out).map(|(gv, o)| if *o > 0.0 { *gv } else { 0.0 }).collect();
                let (bk, bc) = self.nodes[*b].value.shape();
                let gb = match mode {
                    Threshold::PerBlock => {
                        Mat::from_fn(bk, 1, |j, _| -masked[BLOCK_LEN * j..BLOCK_LEN * (j + 1)].iter().sum::<f64>())
                    }
                    Threshold::PerElement => Mat::from_vec_unchecked(bk, bc, masked.iter().map(|v| -v).collect()),
                };
                accumulate(adj, *b, gb)?;
                accumulate(adj, *x, Mat::from_vec_unchecked(g.rows(), g.cols(), masked))?;
            }
            Op::BlockCombine { x, c } => {
                let xb = BlockMatrix::from_flat(self.nodes[*x].value.clone())?;
                let cv = self.nodes[*c].value.as_slice();
                let gs = g.as_slice();
                let gc = Mat::from_fn(cv.len(), 1, |j, _| xb.block_slice(j).iter().zip(gs).map(|(a, b)| a * b).sum());
                let mut gx = BlockMatrix::zeros(cv.len());
                for (j, cj) in cv.iter().enumerate() {
                    for (o, gv) in gx.block_slice_mut(j).iter_mut().zip(gs) {
                        *o = cj * gv;
                    }
                }
                accumulate(adj, *c, gc)?;
                accumulate(adj, *x, gx.into_flat())?;
            }
            Op::Orthonormalize { m, polar } => {
                accumulate(adj, *m, polar_backward(polar, g)?)?;
            }
            Op::FrobNorm(a) => {
                let av = &self.nodes[*a].value;
                let n = node.value[(0, 0)];
                let ga = if n > 0.0 { av.scale(g[(0, 0)] / n) } else { Mat::zeros(av.rows(), av.cols()) };
                accumulate(adj, *a, ga)?;
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<Mat>], id: usize, g: Mat) -> Result<()> {
    match &mut adj[id] {
        Some(existing) => existing.axpy(1.0, &g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Adjoint of the polar factor `Q` of `M = QP` (two columns).
///
/// The differential is `dQ = (I − QQᵀ) dM P⁻¹ + Q X` with `X` skew, and
/// `XP + PX = QᵀdM − dMᵀQ`. For 2x2 skew `X = xJ` this gives
/// `x = ⟨QJ, dM⟩ / tr P`, hence
/// `∂L/∂M = (I − QQᵀ) G P⁻¹ + (⟨QJ, G⟩ / (σ₁ + σ₂)) · QJ`.
/// Nothing here divides by `σ₁ − σ₂`, so equal singular values are fine.
fn polar_backward(polar: &Polar2, g: &Mat) -> Result<Mat> {
    let q = &polar.q;
    let p_inv = polar.p_inv();
    // (I − QQᵀ) G = G − Q (QᵀG)
    let qtg = q.matmul_tn(g)?;
    let proj = g.sub(&q.matmul(&qtg)?)?;
    let first = proj.matmul(&p_inv)?;
    let qj = Mat::from_fn(q.rows(), 2, |i, j| if j == 0 { -q[(i, 1)] } else { q[(i, 0)] });
    let coeff = qj.dot(g) / (polar.sigma[0] + polar.sigma[1]);
    let mut out = first;
    out.axpy(coeff, &qj)?;
    Ok(out)
}
