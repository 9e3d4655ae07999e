use crate::error::{Error, Result};
use crate::linalg::{Mat, BLOCK_LEN, BLOCK_ROWS};

/// Landmark count and layer widths `k₁ … kₙ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub p: usize,
    pub widths: Vec<usize>,
}

impl ModelDims {
    pub fn new(p: usize, widths: Vec<usize>) -> Result<Self> {
        let dims = ModelDims { p, widths };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Contract(format!(
                "model needs p >= 1 and at least one positive layer width, got p={} widths={:?}",
                self.p, self.widths
            )));
        }
        Ok(())
    }

    /// Number of layers `n`.
    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    /// Width of the last layer `kₙ`.
    pub fn k_last(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    /// Shapes of every parameter tensor, in [`ModelParams::tensors`] order.
    pub fn tensor_shapes(&self) -> Vec<(String, usize, usize)> {
        let n = self.depth();
        let k = &self.widths;
        let mut out = vec![("d1_sharp".to_string(), self.p, BLOCK_ROWS * k[0])];
        for i in 1..n {
            out.push((format!("dict.{}", i + 1), k[i - 1], k[i]));
        }
        for (i, ki) in k.iter().enumerate() {
            out.push((format!("enc_threshold.{}", i + 1), *ki, 1));
        }
        for i in 1..n {
            out.push((format!("dec_threshold.{}", i + 1), k[i - 1], 1));
        }
        out.push(("code_readout".to_string(), self.k_last(), BLOCK_LEN * self.k_last()));
        out.push(("cam_coeffs".to_string(), self.k_last(), 1));
        out
    }
}

/// Every learned quantity of the auto-encoder. Dictionaries are shared by the
/// encoder and the decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    /// `p x 3k₁` reshape of the first dictionary `D₁ ∈ R^{3p x k₁}`.
    pub d1_sharp: Mat,
    /// `D₂ … Dₙ`, with `Dᵢ` of shape `kᵢ₋₁ x kᵢ`.
    pub dicts: Vec<Mat>,
    /// Per-block encoder thresholds `b₁ … bₙ`, each `kᵢ x 1`.
    pub enc_thresholds: Vec<Mat>,
    /// Per-element decoder thresholds `b₂′ … bₙ′`, each `kᵢ₋₁ x 1`.
    pub dec_thresholds: Vec<Mat>,
    /// Dense map from the `6kₙ` entries of `Ψₙ` to `ψₙ` (`kₙ x 6kₙ`).
    pub code_readout: Mat,
    /// Camera combination weights `c`, `kₙ x 1`.
    pub cam_coeffs: Mat,
}

impl ModelParams {
    /// Assembles parameters from tensors in [`ModelDims::tensor_shapes`] order.
    pub fn from_tensors(dims: ModelDims, tensors: Vec<Mat>) -> Result<Self> {
        dims.validate()?;
        let shapes = dims.tensor_shapes();
        if tensors.len() != shapes.len() {
            return Err(Error::Schema(format!("expected {} tensors, got {}", shapes.len(), tensors.len())));
        }
        for ((name, r, c), t) in shapes.iter().zip(&tensors) {
            if t.shape() != (*r, *c) {
                return Err(Error::Schema(format!("tensor {name} should be {r}x{c}, got {}x{}", t.rows(), t.cols())));
            }
        }
        let n = dims.depth();
        let mut it = tensors.into_iter();
        let d1_sharp = it.next().expect("counted");
        let dicts: Vec<Mat> = it.by_ref().take(n - 1).collect();
        let enc_thresholds: Vec<Mat> = it.by_ref().take(n).collect();
        let dec_thresholds: Vec<Mat> = it.by_ref().take(n - 1).collect();
        let code_readout = it.next().expect("counted");
        let cam_coeffs = it.next().expect("counted");
        Ok(ModelParams { dims, d1_sharp, dicts, enc_thresholds, dec_thresholds, code_readout, cam_coeffs })
    }

    pub fn tensors(&self) -> Vec<&Mat> {
        let mut out = vec![&self.d1_sharp];
        out.extend(self.dicts.iter());
        out.extend(self.enc_thresholds.iter());
        out.extend(self.dec_thresholds.iter());
        out.push(&self.code_readout);
        out.push(&self.cam_coeffs);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut out = vec![&mut self.d1_sharp];
        out.extend(self.dicts.iter_mut());
        out.extend(self.enc_thresholds.iter_mut());
        out.extend(self.dec_thresholds.iter_mut());
        out.push(&mut self.code_readout);
        out.push(&mut self.cam_coeffs);
        out
    }

    pub fn into_tensors(self) -> Vec<Mat> {
        let mut out = vec![self.d1_sharp];
        out.extend(self.dicts);
        out.extend(self.enc_thresholds);
        out.extend(self.dec_thresholds);
        out.push(self.code_readout);
        out.push(self.cam_coeffs);
        out
    }

    /// Index range of the threshold tensors within [`ModelParams::tensors`].
    pub fn threshold_tensor_range(&self) -> std::ops::Range<usize> {
        let n = self.dims.depth();
        n..n + n + (n - 1)
    }

    /// Clamps every encoder and decoder threshold at zero.
    pub fn project_thresholds(&mut self) {
        for t in self.enc_thresholds.iter_mut().chain(self.dec_thresholds.iter_mut()) {
            t.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// The first dictionary in its `3p x k₁` form.
    pub fn d1(&self) -> Mat {
        sharp_to_d1(&self.d1_sharp)
    }

    /// The last dictionary `Dₙ` (`D₁` when `n = 1`).
    pub fn last_dict(&self) -> Mat {
        self.dicts.last().cloned().unwrap_or_else(|| self.d1())
    }

    /// Composed dictionaries `D⁽ˡ⁾ = D₁ D₂ ⋯ D_l` for `l = 1 … n`.
    pub fn composed_dicts(&self) -> Vec<Mat> {
        let mut acc = self.d1();
        let mut out = vec![acc.clone()];
        for d in &self.dicts {
            acc = acc.matmul(d).expect("consecutive dictionaries are conformant");
            out.push(acc.clone());
        }
        out
    }

    /// Checks tensor shapes and threshold signs.
    pub fn validate(&self) -> Result<()> {
        let shapes = self.dims.tensor_shapes();
        for ((name, r, c), t) in shapes.iter().zip(self.tensors()) {
            if t.shape() != (*r, *c) {
                return Err(Error::Schema(format!("tensor {name} should be {r}x{c}")));
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        let negative =
            self.enc_thresholds.iter().chain(&self.dec_thresholds).any(|t| t.as_slice().iter().any(|v| *v < 0.0));
        if negative {
            return Err(Error::Contract("thresholds must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `D₁♯[i, 3j + c] = D₁[3i + c, j]`: from `3p x k` to `p x 3k`.
pub fn d1_to_sharp(d1: &Mat) -> Result<Mat> {
    if !d1.rows().is_multiple_of(BLOCK_ROWS) {
        return Err(Error::shape(format!("D1 has {} rows, not a multiple of 3", d1.rows())));
    }
    let p = d1.rows() / BLOCK_ROWS;
    let k = d1.cols();
    Ok(Mat::from_fn(p, BLOCK_ROWS * k, |i, col| d1[(BLOCK_ROWS * i + col % BLOCK_ROWS, col / BLOCK_ROWS)]))
}

/// Inverse of [`d1_to_sharp`].
pub fn sharp_to_d1(sharp: &Mat) -> Mat {
    let p = sharp.rows();
    let k = sharp.cols() / BLOCK_ROWS;
    Mat::from_fn(BLOCK_ROWS * p, k, |row, j| sharp[(row / BLOCK_ROWS, BLOCK_ROWS * j + row % BLOCK_ROWS)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_mat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sharp_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d1 = gaussian_mat(&mut rng, 15, 7, 1.0);
        let sharp = d1_to_sharp(&d1).unwrap();
        assert_eq!(sharp.shape(), (5, 21));
        assert_eq!(sharp_to_d1(&sharp), d1);
        assert_eq!(d1_to_sharp(&sharp_to_d1(&sharp)).unwrap(), sharp);
    }

    #[test]
    fn dims_validation() {
        assert!(ModelDims::new(0, vec![3]).is_err());
        assert!(ModelDims::new(4, vec![]).is_err());
        assert!(ModelDims::new(4, vec![3, 0]).is_err());
        let d = ModelDims::new(5, vec![8, 4]).unwrap();
        let names: Vec<String> = d.tensor_shapes().into_iter().map(|s| s.0).collect();
        assert_eq!(
            names,
            [
                "d1_sharp",
                "dict.2",
                "enc_threshold.1",
                "enc_threshold.2",
                "dec_threshold.2",
                "code_readout",
                "cam_coeffs"
            ]
        );
    }

    #[test]
    fn tensor_round_trip_and_threshold_range() {
        let dims = ModelDims::new(4, vec![6, 3, 2]).unwrap();
        let tensors: Vec<Mat> =
            dims.tensor_shapes().iter().enumerate().map(|(i, (_, r, c))| Mat::filled(*r, *c, i as f64)).collect();
        let params = ModelParams::from_tensors(dims.clone(), tensors.clone()).unwrap();
        let range = params.threshold_tensor_range();
        for (i, (name, _, _)) in dims.tensor_shapes().iter().enumerate() {
            assert_eq!(range.contains(&i), name.contains("threshold"), "{name}");
        }
        assert_eq!(params.into_tensors(), tensors);
    }
}
