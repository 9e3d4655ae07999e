//! Reconstruction metrics and the evaluation report.
//!
//! Both 3D metrics share one ambiguity-resolution policy:
//!
//! 1. every reconstruction and ground-truth shape is centered;
//! 2. per frame, the reconstruction or its depth (third column) negation is
//!    kept, whichever correlates better with the ground truth;
//! 3. one global scale `s ≥ 0` fitted by least squares over the whole set
//!    multiplies all reconstructions.
//!
//! No rotation alignment is performed.

use std::fmt;

use rayon::prelude::*;

use crate::data::LandmarkDataset;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{forward, ModelParams};
use crate::sparse::mutual_coherence;

fn check_pairs(recon: &[Mat], gt: &[Mat]) -> Result<()> {
    if recon.len() != gt.len() {
        return Err(Error::shape(format!("{} reconstructions for {} ground-truth frames", recon.len(), gt.len())));
    }
    for (i, (r, g)) in recon.iter().zip(gt).enumerate() {
        if r.shape() != g.shape() || g.cols() != 3 {
            return Err(Error::shape(format!("frame {i}: reconstruction and ground truth must both be p x 3")));
        }
    }
    Ok(())
}

fn negate_depth(s: &Mat) -> Mat {
    Mat::from_fn(s.rows(), 3, |i, c| if c == 2 { -s[(i, c)] } else { s[(i, c)] })
}

/// Centered, reflection-resolved and globally scaled reconstructions next to
/// the centered ground truth.
pub fn resolve_ambiguities(recon: &[Mat], gt: &[Mat]) -> Result<(Vec<Mat>, Vec<Mat>)> {
    check_pairs(recon, gt)?;
    let gt_c: Vec<Mat> = gt.iter().map(Mat::centered).collect();
    let oriented: Vec<Mat> = recon
        .iter()
        .zip(&gt_c)
        .map(|(r, g)| {
            let r = r.centered();
            let flipped = negate_depth(&r);
            if flipped.dot(g) > r.dot(g) {
                flipped
            } else {
                r
            }
        })
        .collect();
    let num: f64 = oriented.iter().zip(&gt_c).map(|(r, g)| r.dot(g)).sum();
    let den: f64 = oriented.iter().map(|r| r.dot(r)).sum();
    let scale = if den > 0.0 { (num / den).max(0.0) } else { 1.0 };
    Ok((oriented.iter().map(|r| r.scale(scale)).collect(), gt_c))
}

fn nonzero_gt(gt: &[Mat]) -> Result<()> {
    if let Some(i) = gt.iter().position(|g| g.centered().frobenius_norm() == 0.0) {
        return Err(Error::Contract(format!("ground-truth frame {i} has zero norm after centering")));
    }
    Ok(())
}

/// Per-frame `‖S − Ŝ‖_F / ‖Ŝ‖_F` after ambiguity resolution.
pub fn shape_error_ratios(recon: &[Mat], gt: &[Mat]) -> Result<Vec<f64>> {
    nonzero_gt(gt)?;
    let (r, g) = resolve_ambiguities(recon, gt)?;
    r.iter().zip(&g).map(|(r, g)| Ok(r.sub(g)?.frobenius_norm() / g.frobenius_norm())).collect()
}

/// Mean over frames of `‖S − Ŝ‖_F / ‖Ŝ‖_F`; zero for an empty set.
pub fn shape_error_ratio(recon: &[Mat], gt: &[Mat]) -> Result<f64> {
    Ok(mean(&shape_error_ratios(recon, gt)?))
}

/// Mean over frames of the mean per-point Euclidean distance, in the units
/// of the ground truth.
pub fn mean_point_distance(recon: &[Mat], gt: &[Mat]) -> Result<f64> {
    nonzero_gt(gt)?;
    let (r, g) = resolve_ambiguities(recon, gt)?;
    let per_frame: Vec<f64> = r.iter().zip(&g).map(|(r, g)| point_distance(r, g)).collect();
    Ok(mean(&per_frame))
}

/// `(1/p) Σᵢ ‖rᵢ − gᵢ‖₂` with no alignment.
fn point_distance(r: &Mat, g: &Mat) -> f64 {
    let p = r.rows();
    let total: f64 = (0..p).map(|i| (0..3).map(|c| (r[(i, c)] - g[(i, c)]).powi(2)).sum::<f64>().sqrt()).sum();
    if p == 0 {
        0.0
    } else {
        total / p as f64
    }
}

/// `‖W − S M‖_F`.
pub fn reprojection_error(w: &Mat, shape: &Mat, camera: &Mat) -> Result<f64> {
    Ok(w.sub(&shape.matmul(camera)?)?.frobenius_norm())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// `[m₁, m₂, m₁ × m₂]`: the rotation completing a semi-orthonormal camera.
pub fn complete_rotation(m: &Mat) -> Mat {
    let (a, b) = (m.col_vec(0), m.col_vec(1));
    let n = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    Mat::from_fn(3, 3, |i, j| if j < 2 { m[(i, j)] } else { n[i] })
}

/// A shape expressed in its camera's coordinates: `S · [m₁, m₂, m₁ × m₂]`.
/// The first two columns are the projection, the third is depth.
pub fn to_camera_frame(shape: &Mat, camera: &Mat) -> Result<Mat> {
    shape.matmul(&complete_rotation(camera))
}

/// Forward pass output for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameReconstruction {
    pub id: String,
    pub shape: Mat,
    /// `None` for a degenerate camera.
    pub camera: Option<Mat>,
    pub reprojection_error: Option<f64>,
}

/// Runs the model on every frame (in parallel, results in frame order).
pub fn reconstruct(params: &ModelParams, dataset: &LandmarkDataset) -> Result<Vec<FrameReconstruction>> {
    if !dataset.is_empty() && dataset.p != params.dims.p {
        return Err(Error::Schema(format!("dataset has p = {}, model expects {}", dataset.p, params.dims.p)));
    }
    dataset
        .frames
        .par_iter()
        .map(|f| {
            let out = forward(&f.w, params)?;
            Ok(FrameReconstruction {
                id: f.id.clone(),
                shape: out.shape,
                camera: out.camera,
                reprojection_error: out.loss,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// `None` when the dataset lacks ground-truth shapes.
    pub shape_error_ratio: Option<f64>,
    pub mean_point_distance: Option<f64>,
    /// Mean `‖W − S M̃‖_F` over non-degenerate frames.
    pub reprojection_error: f64,
    /// Mean `‖W − S M̃‖_F / ‖W‖_F` over non-degenerate frames.
    pub reprojection_ratio: f64,
    /// Mutual coherence of `Dₙ`; `None` if it has a zero column.
    pub coherence_final_dict: Option<f64>,
    pub frames_evaluated: usize,
    pub frames_degenerate: usize,
    /// Whether shapes were compared in each frame's camera coordinates.
    pub camera_frame: bool,
}

impl fmt::Display for EvalReport {
    /// One `key = value` line per field; absent metrics are omitted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = self.shape_error_ratio {
            writeln!(f, "shape_error_ratio = {v}")?;
        }
        if let Some(v) = self.mean_point_distance {
            writeln!(f, "mean_point_distance = {v}")?;
        }
        writeln!(f, "reprojection_error = {}", self.reprojection_error)?;
        writeln!(f, "reprojection_ratio = {}", self.reprojection_ratio)?;
        if let Some(v) = self.coherence_final_dict {
            writeln!(f, "coherence_final_dict = {v}")?;
        }
        writeln!(f, "frames_evaluated = {}", self.frames_evaluated)?;
        writeln!(f, "frames_degenerate = {}", self.frames_degenerate)?;
        writeln!(f, "camera_frame = {}", self.camera_frame)
    }
}

/// Evaluates `params` on `dataset`.
///
/// Weak perspective fixes shape and camera only up to a shared rotation
/// (`S M̃ = (S R)(Rᵀ M̃)`), so when every frame carries a ground-truth camera
/// both shapes are compared in their own camera coordinates, which removes
/// that gauge. Otherwise raw shapes are compared. Degenerate frames are
/// counted and excluded from every average.
pub fn evaluate(params: &ModelParams, dataset: &LandmarkDataset) -> Result<EvalReport> {
    let recon = reconstruct(params, dataset)?;
    let camera_frame = !dataset.is_empty() && dataset.frames.iter().all(|f| f.gt_camera.is_some());
    let mut shapes = Vec::new();
    let mut gts = Vec::new();
    let mut reproj = Vec::new();
    let mut reproj_ratio = Vec::new();
    let mut degenerate = 0;
    for (r, f) in recon.iter().zip(&dataset.frames) {
        let (Some(camera), Some(err)) = (&r.camera, r.reprojection_error) else {
            degenerate += 1;
            continue;
        };
        reproj.push(err);
        let wn = f.w.centered().frobenius_norm();
        reproj_ratio.push(if wn > 0.0 { err / wn } else { 0.0 });
        if let Some(gt) = &f.gt_shape {
            match (&f.gt_camera, camera_frame) {
                (Some(gt_cam), true) => {
                    shapes.push(to_camera_frame(&r.shape, camera)?);
                    gts.push(to_camera_frame(&gt.centered(), gt_cam)?);
                }
                _ => {
                    shapes.push(r.shape.clone());
                    gts.push(gt.clone());
                }
            }
        }
    }
    let has_gt = dataset.has_ground_truth() && !shapes.is_empty();
    Ok(EvalReport {
        shape_error_ratio: if has_gt { Some(shape_error_ratio(&shapes, &gts)?) } else { None },
        mean_point_distance: if has_gt { Some(mean_point_distance(&shapes, &gts)?) } else { None },
        reprojection_error: mean(&reproj),
        reprojection_ratio: mean(&reproj_ratio),
        coherence_final_dict: mutual_coherence(&params.last_dict()).ok(),
        frames_evaluated: recon.len() - degenerate,
        frames_degenerate: degenerate,
        camera_frame: camera_frame && has_gt,
    })
}

/// Coherence of each `Dᵢ` and of each composed `D⁽ˡ⁾ = D₁ ⋯ D_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceReport {
    pub per_dict: Vec<Option<f64>>,
    pub composed: Vec<Option<f64>>,
}

impl CoherenceReport {
    pub fn last(&self) -> Option<f64> {
        self.per_dict.last().copied().flatten()
    }
}

pub fn coherence_report(params: &ModelParams) -> CoherenceReport {
    let mut dicts = vec![params.d1()];
    dicts.extend(params.dicts.iter().cloned());
    CoherenceReport {
        per_dict: dicts.iter().map(|d| mutual_coherence(d).ok()).collect(),
        composed: params.composed_dicts().iter().map(|d| mutual_coherence(d).ok()).collect(),
    }
}

impl fmt::Display for CoherenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
        if let Some(last) = self.per_dict.last() {
            writeln!(f, "coherence_final_dict = {}", show(last))?;
        }
        for (i, v) in self.per_dict.iter().enumerate() {
            writeln!(f, "coherence_dict_{} = {}", i + 1, show(v))?;
        }
        for (i, v) in self.composed.iter().enumerate() {
            writeln!(f, "coherence_composed_{} = {}", i + 1, show(v))?;
        }
        Ok(())
    }
}

/// Pearson correlation coefficient; `None` for fewer than two points or a
/// constant series.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
