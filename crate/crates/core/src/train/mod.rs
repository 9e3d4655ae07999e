//! Mini-batch training of [`ModelParams`] on landmark frames.

mod checkpoint;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::data::LandmarkDataset;
use crate::error::{Error, Result};
use crate::linalg::{gaussian_mat, Mat};
use crate::model::{loss_and_grad, ModelDims, ModelParams};
use crate::sparse::mutual_coherence;

pub const DEFAULT_THRESHOLD_INIT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dims: ModelDims,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub log_every: usize,
    pub coherence_every: usize,
}

impl TrainConfig {
    pub fn new(dims: ModelDims) -> Self {
        TrainConfig {
            dims,
            batch_size: 64,
            epochs: 1000,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            seed: 0,
            log_every: 100,
            coherence_every: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Contract("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Contract(format!("learning rate must be finite and >= 0, got {}", self.learning_rate)));
        }
        if self.log_every == 0 || self.coherence_every == 0 {
            return Err(Error::Contract("logging intervals must be at least 1".into()));
        }
        Ok(())
    }
}

/// Optimizer moments, one entry per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub enum OptState {
    Adam { t: u64, m: Vec<Mat>, v: Vec<Mat> },
    Sgd,
}

impl OptState {
    pub fn new(optimizer: &Optimizer, params: &ModelParams) -> Self {
        match optimizer {
            Optimizer::Adam { .. } => {
                let zeros: Vec<Mat> = params.tensors().iter().map(|t| Mat::zeros(t.rows(), t.cols())).collect();
                OptState::Adam { t: 0, m: zeros.clone(), v: zeros }
            }
            Optimizer::Sgd => OptState::Sgd,
        }
    }
}

/// Fresh parameters: Gaussian entries with standard deviation `1/√fan_in`
/// and all thresholds at [`DEFAULT_THRESHOLD_INIT`].
///
/// Fan-in follows the encoder direction: the rows of `D₁♯` and `Dᵢ`, the
/// `6kₙ` columns of the readout and the `kₙ` camera coefficients.
pub fn init_params(dims: &ModelDims, seed: u64) -> Result<ModelParams> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.depth();
    let tensors = dims
        .tensor_shapes()
        .into_iter()
        .enumerate()
        .map(|(idx, (_, r, c))| {
            if (n..3 * n - 1).contains(&idx) {
                Mat::filled(r, c, DEFAULT_THRESHOLD_INIT)
            } else {
                let fan_in = if idx == 3 * n - 1 { c } else { r };
                gaussian_mat(&mut rng, r, c, 1.0 / (fan_in as f64).sqrt())
            }
        })
        .collect();
    ModelParams::from_tensors(dims.clone(), tensors)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Mean loss over the frames that contributed; `None` if all were degenerate.
    pub mean_loss: Option<f64>,
    pub used: usize,
    pub degenerate: usize,
}

/// Loss and gradient of one frame; `None` for a degenerate camera.
type FrameGrad = Option<(f64, Vec<Mat>)>;

/// Mean loss and gradient over `frames`. Frames with a degenerate camera are
/// skipped. Per-frame work runs in parallel; the reduction is serial in frame
/// order so the result does not depend on the thread count.
pub fn batch_gradient(params: &ModelParams, frames: &[&Mat]) -> Result<(StepOutcome, Vec<Mat>)> {
    let per_frame: Vec<Result<FrameGrad>> = frames
        .par_iter()
        .map(|w| match loss_and_grad(params, w) {
            Ok(v) => Ok(Some(v)),
            Err(Error::DegenerateCamera { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut grads: Vec<Mat> = params.tensors().iter().map(|t| Mat::zeros(t.rows(), t.cols())).collect();
    let (mut total, mut used, mut degenerate) = (0.0, 0usize, 0usize);
    for r in per_frame {
        match r? {
            Some((loss, g)) => {
                total += loss;
                used += 1;
                for (acc, gi) in grads.iter_mut().zip(&g) {
                    acc.axpy(1.0, gi)?;
                }
            }
            None => degenerate += 1,
        }
    }
    if used > 0 {
        let inv = 1.0 / used as f64;
        for g in &mut grads {
            *g = g.scale(inv);
        }
    }
    let mean_loss = (used > 0).then(|| total / used as f64);
    Ok((StepOutcome { mean_loss, used, degenerate }, grads))
}

fn apply_update(params: &mut ModelParams, grads: &[Mat], state: &mut OptState, cfg: &TrainConfig) -> Result<()> {
    let lr = cfg.learning_rate;
    match (state, cfg.optimizer) {
        (OptState::Adam { t, m, v }, Optimizer::Adam { beta1, beta2, eps }) => {
            *t += 1;
            let bc1 = 1.0 - beta1.powi(*t as i32);
            let bc2 = 1.0 - beta2.powi(*t as i32);
            for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                let ps = p.as_mut_slice();
                let (ms, vs) = (m.as_mut_slice(), v.as_mut_slice());
                for (i, gi) in g.as_slice().iter().enumerate() {
                    ms[i] = beta1 * ms[i] + (1.0 - beta1) * gi;
                    vs[i] = beta2 * vs[i] + (1.0 - beta2) * gi * gi;
                    let step = lr * (ms[i] / bc1) / ((vs[i] / bc2).sqrt() + eps);
                    ps[i] -= step;
                }
            }
        }
        (OptState::Sgd, Optimizer::Sgd) => {
            for (p, g) in params.tensors_mut().into_iter().zip(grads) {
                p.axpy(-lr, g)?;
            }
        }
        _ => return Err(Error::Contract("optimizer state does not match the configured optimizer".into())),
    }
    params.project_thresholds();
    Ok(())
}

/// One optimizer step on `batch`. When every frame is degenerate the step is
/// skipped and the parameters are left untouched.
pub fn train_step(
    batch: &[&Mat],
    params: &mut ModelParams,
    state: &mut OptState,
    cfg: &TrainConfig,
) -> Result<StepOutcome> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let (outcome, grads) = batch_gradient(params, batch)?;
    if outcome.used == 0 {
        warn!("all {} frames in the batch have degenerate cameras; step skipped", batch.len());
        return Ok(outcome);
    }
    apply_update(params, &grads, state, cfg)?;
    Ok(outcome)
}

/// Progress notifications from [`train_with_observer`].
#[derive(Debug)]
pub enum TrainEvent<'a> {
    Loss { step: u64, loss: f64 },
    Coherence { step: u64, coherence: f64, params: &'a ModelParams },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Step at which a non-finite loss or parameter stopped training; the
    /// checkpoint then holds the last finite state.
    pub diverged_at: Option<u64>,
    pub degenerate_frames: usize,
}

pub fn train(dataset: &LandmarkDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_observer(dataset, cfg, |_| {})
}

/// Coherence of `Dₙ`, or NaN when a column is zero.
fn last_dict_coherence(params: &ModelParams) -> f64 {
    mutual_coherence(&params.last_dict()).unwrap_or(f64::NAN)
}

/// Runs `epochs × ⌈frames / batch_size⌉` steps with a seeded reshuffle each
/// epoch. The loss is logged every `log_every` steps and the coherence of
/// `Dₙ` every `coherence_every` steps.
pub fn train_with_observer(
    dataset: &LandmarkDataset,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&TrainEvent),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.p != cfg.dims.p {
        return Err(Error::Schema(format!("dataset has p = {}, model expects {}", dataset.p, cfg.dims.p)));
    }
    let params = init_params(&cfg.dims, cfg.seed)?;
    let state = OptState::new(&cfg.optimizer, &params);
    let mut ck = Checkpoint { params, step: 0, optimizer: state, loss_history: vec![], coherence_history: vec![] };
    if cfg.epochs > 0 && dataset.is_empty() {
        return Err(Error::Contract("cannot train on an empty dataset".into()));
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut degenerate_frames = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Mat> = chunk.iter().map(|&i| &dataset.frames[i].w).collect();
            let mut params = ck.params.clone();
            let mut state = ck.optimizer.clone();
            let outcome = train_step(&batch, &mut params, &mut state, cfg)?;
            let step = ck.step + 1;
            degenerate_frames += outcome.degenerate;
            let loss = outcome.mean_loss.unwrap_or(f64::NAN);
            if outcome.used > 0 && (!loss.is_finite() || !params.is_finite()) {
                warn!("non-finite loss or parameters at step {step} (epoch {epoch}); stopping");
                return Ok(TrainOutcome { checkpoint: ck, diverged_at: Some(step), degenerate_frames });
            }
            ck.params = params;
            ck.optimizer = state;
            ck.step = step;
            if step.is_multiple_of(cfg.log_every as u64) {
                ck.loss_history.push((step, loss));
                info!("step {step} epoch {epoch} loss {loss:.6e}");
                observer(&TrainEvent::Loss { step, loss });
            }
            if step.is_multiple_of(cfg.coherence_every as u64) {
                let coherence = last_dict_coherence(&ck.params);
                ck.coherence_history.push((step, coherence));
                info!("step {step} coherence {coherence:.6}");
                observer(&TrainEvent::Coherence { step, coherence, params: &ck.params });
            }
        }
    }
    Ok(TrainOutcome { checkpoint: ck, diverged_at: None, degenerate_frames })
}
