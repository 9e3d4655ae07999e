//! Landmark datasets: file ingestion, synthetic projection, noise and
//! centering.

mod format;
mod mocap;
mod synthetic;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use format::{format_landmarks, parse_landmarks};
pub use mocap::{parse_mocap_csv, read_mocap_csv};
pub use synthetic::{planted_model, skeleton_shapes, PlantedModel, SKELETON_JOINTS};

use crate::error::{Error, Result};
use crate::linalg::{random_semiorthonormal_3x2, Mat};

/// One frame of 2D landmarks with optional ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkFrame {
    pub id: String,
    /// `p x 2` measurements.
    pub w: Mat,
    /// `p x 3` ground-truth shape.
    pub gt_shape: Option<Mat>,
    /// `3 x 2` ground-truth camera.
    pub gt_camera: Option<Mat>,
    /// Column means removed by [`center_frames`].
    pub offset: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkDataset {
    pub p: usize,
    pub frames: Vec<LandmarkFrame>,
}

impl LandmarkDataset {
    pub fn new(p: usize, frames: Vec<LandmarkFrame>) -> Result<Self> {
        for f in &frames {
            if f.w.shape() != (p, 2) {
                return Err(Error::Schema(format!("frame {:?} has {} points, expected {p}", f.id, f.w.rows())));
            }
            if f.gt_shape.as_ref().is_some_and(|s| s.shape() != (p, 3)) {
                return Err(Error::Schema(format!("frame {:?} ground truth is not {p}x3", f.id)));
            }
            if f.gt_camera.as_ref().is_some_and(|m| m.shape() != (3, 2)) {
                return Err(Error::Schema(format!("frame {:?} camera is not 3x2", f.id)));
            }
            if !f.w.is_finite() {
                return Err(Error::NonFinite(format!("frame {:?}", f.id)));
            }
        }
        Ok(LandmarkDataset { p, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn has_ground_truth(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.gt_shape.is_some())
    }

    /// Frames `[start, end)` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> LandmarkDataset {
        LandmarkDataset { p: self.p, frames: self.frames[start..end].to_vec() }
    }
}

/// Reads a landmark file; frames are centered unless `center` is false.
pub fn load_landmarks(path: &Path, center: bool) -> Result<LandmarkDataset> {
    let text = std::fs::read_to_string(path)?;
    let ds = parse_landmarks(&text)?;
    Ok(if center { center_frames(&ds) } else { ds })
}

pub fn save_landmarks(path: &Path, ds: &LandmarkDataset) -> Result<()> {
    std::fs::write(path, format_landmarks(ds))?;
    Ok(())
}

/// Projects each shape with its own random semi-orthonormal camera. Shapes
/// are centered first; the stored ground truth is the centered shape.
pub fn synthesize_projections(shapes: &[Mat], seed: u64) -> Result<LandmarkDataset> {
    let p = shapes.first().map_or(0, |s| s.rows());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::with_capacity(shapes.len());
    for (i, shape) in shapes.iter().enumerate() {
        if shape.shape() != (p, 3) {
            return Err(Error::Schema(format!("shape {i} is {}x{}, expected {p}x3", shape.rows(), shape.cols())));
        }
        let m = random_semiorthonormal_3x2(&mut rng);
        let s = shape.centered();
        let w = s.matmul(&m)?;
        frames.push(LandmarkFrame {
            id: format!("f{i:06}"),
            w,
            gt_shape: Some(s),
            gt_camera: Some(m),
            offset: [0.0, 0.0],
        });
    }
    LandmarkDataset::new(p, frames)
}

/// Adds Gaussian noise scaled so that `‖N‖_F = ratio · ‖W‖_F` in every frame.
pub fn add_noise(ds: &LandmarkDataset, ratio: f64, seed: u64) -> Result<LandmarkDataset> {
    if !ratio.is_finite() || ratio < 0.0 {
        return Err(Error::Contract(format!("noise ratio must be a finite nonnegative number, got {ratio}")));
    }
    if ratio == 0.0 {
        return Ok(ds.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for f in &mut out.frames {
        let noise = Mat::from_fn(ds.p, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (nn, wn) = (noise.frobenius_norm(), f.w.frobenius_norm());
        if nn > 0.0 && wn > 0.0 {
            f.w = f.w.add(&noise.scale(ratio * wn / nn))?;
        }
    }
    Ok(out)
}

/// Removes the column means of every frame's `W`, accumulating them in
/// `offset`. Idempotent.
pub fn center_frames(ds: &LandmarkDataset) -> LandmarkDataset {
    let mut out = ds.clone();
    for f in &mut out.frames {
        let means = f.w.column_means();
        f.w = f.w.sub_row_vector(&means);
        f.offset = [f.offset[0] + means[0], f.offset[1] + means[1]];
    }
    out
}
