//! Built-in shape generators: an articulated 15-joint skeleton and a planted
//! multi-layer sparse model drawn from the auto-encoder's own decoder.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{gaussian_mat, Mat};
use crate::model::{d1_to_sharp, decode, ModelDims, ModelParams};

pub const SKELETON_JOINTS: usize = 15;

/// Parent joint and rest direction (unit, y up) for each joint after the root.
/// Lengths are in metres for a figure roughly 1.8 m tall.
const BONES: [(usize, [f64; 3], f64); SKELETON_JOINTS - 1] = [
    (0, [0.0, 1.0, 0.0], 0.50),   // 1 chest
    (1, [0.0, 1.0, 0.0], 0.30),   // 2 head
    (1, [1.0, 0.0, 0.0], 0.20),   // 3 left shoulder
    (3, [0.0, -1.0, 0.0], 0.30),  // 4 left elbow
    (4, [0.0, -1.0, 0.0], 0.27),  // 5 left wrist
    (1, [-1.0, 0.0, 0.0], 0.20),  // 6 right shoulder
    (6, [0.0, -1.0, 0.0], 0.30),  // 7 right elbow
    (7, [0.0, -1.0, 0.0], 0.27),  // 8 right wrist
    (0, [1.0, 0.0, 0.0], 0.12),   // 9 left hip
    (9, [0.0, -1.0, 0.0], 0.45),  // 10 left knee
    (10, [0.0, -1.0, 0.0], 0.43), // 11 left ankle
    (0, [-1.0, 0.0, 0.0], 0.12),  // 12 right hip
    (12, [0.0, -1.0, 0.0], 0.45), // 13 right knee
    (13, [0.0, -1.0, 0.0], 0.43), // 14 right ankle
];

/// Angular spread (radians) of each bone around its rest direction.
const SPREAD: [f64; SKELETON_JOINTS - 1] = [0.3, 0.3, 0.1, 1.2, 1.0, 0.1, 1.2, 1.0, 0.05, 0.8, 0.7, 0.05, 0.8, 0.7];

fn rotate(v: [f64; 3], yaw: f64, pitch: f64, roll: f64) -> [f64; 3] {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    // Rz(roll) · Rx(pitch) · Ry(yaw)
    let a = [cy * v[0] + sy * v[2], v[1], -sy * v[0] + cy * v[2]];
    let b = [a[0], cp * a[1] - sp * a[2], sp * a[1] + cp * a[2]];
    [cr * b[0] - sr * b[1], sr * b[0] + cr * b[1], b[2]]
}

/// `frames` random poses of a 15-joint stick figure.
pub fn skeleton_shapes(frames: usize, seed: u64) -> Vec<Mat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..frames)
        .map(|_| {
            let mut joints = [[0.0f64; 3]; SKELETON_JOINTS];
            for (j, ((parent, rest, len), spread)) in BONES.iter().zip(SPREAD).enumerate() {
                let pitch = rng.random_range(-spread..=spread);
                let roll = rng.random_range(-spread..=spread);
                let dir = rotate(*rest, 0.0, pitch, roll);
                let base = joints[*parent];
                joints[j + 1] = [base[0] + len * dir[0], base[1] + len * dir[1], base[2] + len * dir[2]];
            }
            let yaw = rng.random_range(-0.5..=0.5);
            Mat::from_fn(SKELETON_JOINTS, 3, |i, c| rotate(joints[i], yaw, 0.0, 0.0)[c])
        })
        .collect()
}

/// A decoder with known dictionaries and the sparse codes that generated a
/// set of shapes.
#[derive(Clone, Debug)]
pub struct PlantedModel {
    pub params: ModelParams,
    pub codes: Vec<Vec<f64>>,
    pub shapes: Vec<Mat>,
}

/// Samples a planted multi-layer sparse model with `p` points and layer
/// widths `widths`, then `frames` shapes from it. Each last-layer code has
/// `active` nonzero entries drawn from `[0.5, 1.5]`; decoder thresholds are
/// zero. Dictionary entries are Gaussian with variance `1 / fan_in`.
pub fn planted_model(p: usize, widths: &[usize], frames: usize, active: usize, seed: u64) -> Result<PlantedModel> {
    let dims = ModelDims::new(p, widths.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k1 = widths[0];
    let d1 = gaussian_mat(&mut rng, 3 * p, k1, 1.0 / (k1 as f64).sqrt());
    let mut tensors = vec![d1_to_sharp(&d1)?];
    for i in 1..widths.len() {
        tensors.push(gaussian_mat(&mut rng, widths[i - 1], widths[i], 1.0 / (widths[i] as f64).sqrt()));
    }
    for (_, r, c) in dims.tensor_shapes().into_iter().skip(widths.len()) {
        tensors.push(Mat::zeros(r, c));
    }
    let params = ModelParams::from_tensors(dims, tensors)?;

    let k_last = params.dims.k_last();
    let active = active.clamp(1, k_last);
    let mut codes = Vec::with_capacity(frames);
    let mut shapes = Vec::with_capacity(frames);
    while shapes.len() < frames {
        let mut code = vec![0.0; k_last];
        for j in sample(&mut rng, k_last, active) {
            code[j] = rng.random_range(0.5..1.5);
        }
        let (_, shape) = decode(&code, &params)?;
        // Skip the rare all-inactive first layer.
        if shape.frobenius_norm() < 1e-9 {
            continue;
        }
        codes.push(code);
        shapes.push(shape);
    }
    Ok(PlantedModel { params, codes, shapes })
}
