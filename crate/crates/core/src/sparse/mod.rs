//! Reference sparse-coding solvers: ISTA, block soft thresholding (exact and
//! relaxed), block ISTA, an exhaustive block-sparse oracle and mutual
//! coherence.

use crate::error::{Error, Result};
use crate::linalg::{least_squares, spectral_norm, BlockMatrix, Mat, BLOCK_COLS, BLOCK_LEN, BLOCK_ROWS};

/// Power iterations used to estimate `‖W‖₂` for the default step size.
pub const POWER_ITERS: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 1000;

/// Largest block count [`brute_force_block_sparse`] will enumerate.
pub const BRUTE_FORCE_MAX_BLOCKS: usize = 16;
/// Largest support size [`brute_force_block_sparse`] will enumerate.
pub const BRUTE_FORCE_MAX_LAMBDA: usize = 3;

/// Shrinkage threshold: one scalar, or one value per block.
#[derive(Clone, Debug, PartialEq)]
pub enum Shrink {
    Scalar(f64),
    PerBlock(Vec<f64>),
}

impl Shrink {
    fn at(&self, j: usize) -> f64 {
        match self {
            Shrink::Scalar(t) => *t,
            Shrink::PerBlock(b) => b[j],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Shrink::Scalar(t) => *t >= 0.0,
            Shrink::PerBlock(b) => b.iter().all(|t| *t >= 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("thresholds must be nonnegative".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IstaConfig {
    pub alpha: f64,
    pub threshold: Shrink,
    pub max_iters: usize,
    pub tol: f64,
}

impl IstaConfig {
    /// Step `0.9 / ‖dict‖₂²` with default tolerance and iteration cap.
    pub fn for_dict(dict: &Mat, threshold: Shrink) -> Self {
        let s = spectral_norm(dict, POWER_ITERS);
        let alpha = if s > 0.0 { 0.9 / (s * s) } else { 1.0 };
        IstaConfig { alpha, threshold, max_iters: DEFAULT_MAX_ITERS, tol: DEFAULT_TOL }
    }

    fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::Contract(format!("step size must be positive, got {}", self.alpha)));
        }
        if self.max_iters == 0 {
            return Err(Error::Contract("max_iters must be at least 1".into()));
        }
        self.threshold.validate()
    }
}

/// `sign(x) · max(|x| − tau, 0)`.
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct IstaOutcome<T> {
    pub code: T,
    pub iterations: usize,
    pub converged: bool,
}

/// ISTA from `z = 0`: `z ← h_τ(z − α Wᵀ(Wz − x))`.
///
/// The shrink level `τ` is applied as given after the `α` step, so the fixed
/// point minimizes `½‖x − Wz‖² + (τ/α)‖z‖₁`. A [`Shrink::PerBlock`] threshold
/// is read per coefficient here.
pub fn ista(dict: &Mat, x: &[f64], cfg: &IstaConfig) -> Result<IstaOutcome<Vec<f64>>> {
    ista_trace(dict, x, cfg, |_| {})
}

/// [`ista`] that reports every iterate to `observe`.
pub fn ista_trace(
    dict: &Mat,
    x: &[f64],
    cfg: &IstaConfig,
    mut observe: impl FnMut(&[f64]),
) -> Result<IstaOutcome<Vec<f64>>> {
    cfg.validate()?;
    if dict.rows() != x.len() {
        return Err(Error::shape(format!("dictionary has {} rows, signal has {}", dict.rows(), x.len())));
    }
    if let Shrink::PerBlock(b) = &cfg.threshold {
        if b.len() != dict.cols() {
            return Err(Error::shape("per-coefficient threshold length differs from code length"));
        }
    }
    let xv = Mat::column(x);
    let mut z = Mat::zeros(dict.cols(), 1);
    for it in 1..=cfg.max_iters {
        let resid = dict.matmul(&z)?.sub(&xv)?;
        let step = dict.matmul_tn(&resid)?;
        let next: Vec<f64> = z
            .as_slice()
            .iter()
            .zip(step.as_slice())
            .enumerate()
            .map(|(i, (zi, gi))| soft_threshold(zi - cfg.alpha * gi, cfg.threshold.at(i)))
            .collect();
        let delta = next.iter().zip(z.as_slice()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        observe(&next);
        z = Mat::column(&next);
        if delta < cfg.tol {
            return Ok(IstaOutcome { code: next, iterations: it, converged: true });
        }
    }
    Ok(IstaOutcome { code: z.into_vec(), iterations: cfg.max_iters, converged: false })
}

pub fn lasso_objective(dict: &Mat, x: &[f64], z: &[f64], tau: f64) -> f64 {
    let r = dict.matmul(&Mat::column(z)).expect("conformant").sub(&Mat::column(x)).expect("conformant");
    0.5 * r.frobenius_norm().powi(2) + tau * z.iter().map(|v| v.abs()).sum::<f64>()
}

/// Exact proximal map of `τ Σⱼ ‖Vⱼ‖_F`: each block is scaled by
/// `max(‖Vⱼ‖_F − τ, 0) / ‖Vⱼ‖_F`.
pub fn block_soft_threshold_exact(v: &BlockMatrix, tau: f64) -> BlockMatrix {
    block_shrink_exact(v, &Shrink::Scalar(tau))
}

fn block_shrink_exact(v: &BlockMatrix, tau: &Shrink) -> BlockMatrix {
    let mut out = v.clone();
    for (j, n) in v.block_norms().into_iter().enumerate() {
        let t = tau.at(j);
        let block = out.block_slice_mut(j);
        if n <= t || n == 0.0 {
            block.iter_mut().for_each(|x| *x = 0.0);
        } else if t > 0.0 {
            let s = soft_threshold(n, t) / n;
            block.iter_mut().for_each(|x| *x *= s);
        }
    }
    out
}

/// Entrywise soft threshold inside block `j` with threshold `b[j]`.
pub fn block_soft_threshold_relaxed(v: &BlockMatrix, b: &[f64]) -> Result<BlockMatrix> {
    if b.len() != v.k() {
        return Err(Error::shape(format!("{} thresholds for {} blocks", b.len(), v.k())));
    }
    Ok(block_shrink_relaxed(v, &Shrink::PerBlock(b.to_vec())))
}

fn block_shrink_relaxed(v: &BlockMatrix, b: &Shrink) -> BlockMatrix {
    let mut out = v.clone();
    for j in 0..v.k() {
        let t = b.at(j);
        out.block_slice_mut(j).iter_mut().for_each(|x| *x = soft_threshold(*x, t));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockShrinkMode {
    /// Group soft threshold on block Frobenius norms.
    Exact,
    /// Entrywise soft threshold with a per-block level.
    Relaxed,
}

/// Block ISTA over `3k x 2` block codes from `Z = 0`:
/// `V = Z − α Wᵀ(WZ − X)`, then a block shrink of `V` at level `τ`.
///
/// In exact mode the fixed point minimizes `½‖X − WZ‖_F² + (τ/α) Σⱼ‖Zⱼ‖_F`.
/// `dict` is `m x 3k`, `x` is `m x 2`.
pub fn block_ista(dict: &Mat, x: &Mat, cfg: &IstaConfig, mode: BlockShrinkMode) -> Result<IstaOutcome<BlockMatrix>> {
    block_ista_trace(dict, x, cfg, mode, |_| {})
}

pub fn block_ista_trace(
    dict: &Mat,
    x: &Mat,
    cfg: &IstaConfig,
    mode: BlockShrinkMode,
    mut observe: impl FnMut(&BlockMatrix),
) -> Result<IstaOutcome<BlockMatrix>> {
    cfg.validate()?;
    if !dict.cols().is_multiple_of(BLOCK_ROWS) {
        return Err(Error::shape(format!("dictionary width {} is not a multiple of 3", dict.cols())));
    }
    if x.cols() != BLOCK_COLS || x.rows() != dict.rows() {
        return Err(Error::shape(format!("measurements are {}x{}, expected {}x2", x.rows(), x.cols(), dict.rows())));
    }
    let k = dict.cols() / BLOCK_ROWS;
    if let Shrink::PerBlock(b) = &cfg.threshold {
        if b.len() != k {
            return Err(Error::shape(format!("{} thresholds for {k} blocks", b.len())));
        }
    }
    let mut z = BlockMatrix::zeros(k);
    for it in 1..=cfg.max_iters {
        // V = Z − α Wᵀ(WZ − X)
        let resid = dict.matmul(z.flat())?.sub(x)?;
        let step = dict.matmul_tn(&resid)?.scale(cfg.alpha);
        let v = BlockMatrix::from_flat(z.flat().sub(&step)?)?;
        let next = match mode {
            BlockShrinkMode::Exact => block_shrink_exact(&v, &cfg.threshold),
            BlockShrinkMode::Relaxed => block_shrink_relaxed(&v, &cfg.threshold),
        };
        let delta = next.flat().sub(z.flat())?.max_abs();
        observe(&next);
        z = next;
        if delta < cfg.tol {
            return Ok(IstaOutcome { code: z, iterations: it, converged: true });
        }
    }
    Ok(IstaOutcome { code: z, iterations: cfg.max_iters, converged: false })
}

pub fn block_objective(dict: &Mat, x: &Mat, z: &BlockMatrix, tau: f64) -> f64 {
    let r = dict.matmul(z.flat()).expect("conformant").sub(x).expect("conformant");
    0.5 * r.frobenius_norm().powi(2) + tau * z.block_norms().iter().sum::<f64>()
}

pub fn block_residual(dict: &Mat, x: &Mat, z: &BlockMatrix) -> f64 {
    dict.matmul(z.flat()).expect("conformant").sub(x).expect("conformant").frobenius_norm()
}

#[derive(Clone, Debug)]
pub struct BruteForceOutcome {
    pub code: BlockMatrix,
    pub support: Vec<usize>,
    pub residual: f64,
}

/// Global minimizer of `‖X − WZ‖_F` over block supports of size at most
/// `lambda`, by exhaustive least squares. Supports are visited by size, then
/// lexicographically; a later support replaces the incumbent only on a strict
/// improvement, so ties resolve to the lexicographically smallest support.
pub fn brute_force_block_sparse(dict: &Mat, x: &Mat, lambda: usize) -> Result<BruteForceOutcome> {
    if !dict.cols().is_multiple_of(BLOCK_ROWS) || x.cols() != BLOCK_COLS || x.rows() != dict.rows() {
        return Err(Error::shape("brute force needs an m x 3k dictionary and m x 2 measurements"));
    }
    let k = dict.cols() / BLOCK_ROWS;
    if k > BRUTE_FORCE_MAX_BLOCKS || lambda > BRUTE_FORCE_MAX_LAMBDA {
        return Err(Error::Refused(format!(
            "exhaustive search limited to {BRUTE_FORCE_MAX_BLOCKS} blocks and support {BRUTE_FORCE_MAX_LAMBDA}, \
             asked for {k} blocks and support {lambda}"
        )));
    }
    let mut best = BruteForceOutcome { code: BlockMatrix::zeros(k), support: Vec::new(), residual: x.frobenius_norm() };
    for size in 1..=lambda.min(k) {
        for support in combinations(k, size) {
            let sub = Mat::from_fn(dict.rows(), BLOCK_ROWS * size, |i, c| {
                dict[(i, BLOCK_ROWS * support[c / BLOCK_ROWS] + c % BLOCK_ROWS)]
            });
            let coef = least_squares(&sub, x)?;
            let residual = sub.matmul(&coef)?.sub(x)?.frobenius_norm();
            if residual < best.residual {
                let mut code = BlockMatrix::zeros(k);
                for (slot, &j) in support.iter().enumerate() {
                    code.block_slice_mut(j).copy_from_slice(&coef.as_slice()[BLOCK_LEN * slot..BLOCK_LEN * (slot + 1)]);
                }
                best = BruteForceOutcome { code, support: support.clone(), residual };
            }
        }
    }
    Ok(best)
}

/// All `size`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..size).collect();
    if size > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..size).rev().find(|&i| cur[i] < n - size + i) else { break };
        cur[i] += 1;
        for j in i + 1..size {
            cur[j] = cur[j - 1] + 1;
        }
    }
    out
}

/// `max_{i≠j} |dᵢᵀdⱼ| / (‖dᵢ‖ ‖dⱼ‖)`; zero for fewer than two columns.
pub fn mutual_coherence(dict: &Mat) -> Result<f64> {
    let gram = dict.matmul_tn(dict)?;
    let n = dict.cols();
    let norms: Vec<f64> = (0..n).map(|j| gram[(j, j)].sqrt()).collect();
    if let Some(j) = norms.iter().position(|v| *v == 0.0) {
        return Err(Error::Contract(format!("dictionary column {j} is zero")));
    }
    let mut mu = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            mu = mu.max(gram[(i, j)].abs() / (norms[i] * norms[j]));
        }
    }
    Ok(mu.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_mat, orthonormalize_columns};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soft_threshold_cases() {
        assert!((soft_threshold(1.2, 0.5) - 0.7).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(-2.5, 0.5), -2.0);
        assert_eq!(soft_threshold(0.37, 0.0), 0.37);
    }

    #[test]
    fn ista_identity_dictionary() {
        let x = [1.0, -0.2, 0.6, -3.0];
        let cfg = IstaConfig { alpha: 1.0, threshold: Shrink::Scalar(0.5), max_iters: 100, tol: 1e-12 };
        let out = ista(&Mat::identity(4), &x, &cfg).unwrap();
        let expected: Vec<f64> = x.iter().map(|v| soft_threshold(*v, 0.5)).collect();
        assert_eq!(out.code, expected);
        // First iterate is already the fixed point; the second confirms it.
        assert!(out.converged && out.iterations <= 2);
    }

    #[test]
    fn ista_zero_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = gaussian_mat(&mut rng, 5, 7, 1.0);
        let cfg = IstaConfig::for_dict(&d, Shrink::Scalar(0.1));
        let out = ista(&d, &[0.0; 5], &cfg).unwrap();
        assert!(out.code.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ista_objective_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let d = gaussian_mat(&mut rng, 8, 12, 1.0);
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tau = 0.05;
            let cfg = IstaConfig::for_dict(&d, Shrink::Scalar(tau));
            let weight = tau / cfg.alpha;
            let mut prev = lasso_objective(&d, &x, &[0.0; 12], weight);
            ista_trace(&d, &x, &cfg, |z| {
                let f = lasso_objective(&d, &x, z, weight);
                assert!(f <= prev + 1e-12 * prev.abs().max(1.0), "objective rose {prev} -> {f}");
                prev = f;
            })
            .unwrap();
        }
    }

    #[test]
    fn exact_block_threshold_hand_case() {
        let v = BlockMatrix::from_blocks(&[Mat::from_rows(&[&[3.0, 0.0], &[0.0, 4.0], &[0.0, 0.0]])]).unwrap();
        let out = block_soft_threshold_exact(&v, 1.0);
        assert!(out.flat().sub(&v.flat().scale(0.8)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn exact_block_threshold_dead_zone_and_identity() {
        let small = Mat::from_rows(&[&[0.3, 0.0], &[0.0, 0.4], &[0.0, 0.0]]);
        let v = BlockMatrix::from_blocks(&[small, Mat::zeros(3, 2)]).unwrap();
        assert_eq!(block_soft_threshold_exact(&v, 1.0), BlockMatrix::zeros(2));
        assert_eq!(block_soft_threshold_exact(&v, 0.0), v);
    }

    #[test]
    fn relaxed_block_threshold_cases() {
        let b0 = Mat::from_rows(&[&[0.1, -0.2], &[0.05, 0.0], &[-0.15, 0.2]]);
        let b1 = Mat::from_rows(&[&[1.0, -2.0], &[0.5, 0.1], &[-3.0, 0.0]]);
        let v = BlockMatrix::from_blocks(&[b0, b1.clone()]).unwrap();
        assert_eq!(block_soft_threshold_relaxed(&v, &[0.0, 0.0]).unwrap(), v);
        let out = block_soft_threshold_relaxed(&v, &[0.5, 0.3]).unwrap();
        assert_eq!(out.block(0), Mat::zeros(3, 2));
        assert_eq!(out.block(1), b1.map(|x| soft_threshold(x, 0.3)));
        assert!(matches!(block_soft_threshold_relaxed(&v, &[0.1]), Err(Error::Shape(_))));
    }

    #[test]
    fn block_ista_identity_dictionary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian_mat(&mut rng, 6, 2, 1.0);
        let cfg = IstaConfig { alpha: 1.0, threshold: Shrink::Scalar(0.4), max_iters: 50, tol: 1e-14 };
        let out = block_ista(&Mat::identity(6), &x, &cfg, BlockShrinkMode::Exact).unwrap();
        let expected = block_soft_threshold_exact(&BlockMatrix::from_flat(x).unwrap(), 0.4);
        assert!(out.code.flat().sub(expected.flat()).unwrap().max_abs() < 1e-15);
        assert!(out.converged && out.iterations <= 2);
    }

    #[test]
    fn block_ista_relaxed_single_step_is_relu() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Mat::from_fn(7, 9, |_, _| rng.random_range(0.0..1.0));
        let x = Mat::from_fn(7, 2, |_, _| rng.random_range(0.0..1.0));
        let b = vec![0.3, 0.0, 1.2];
        let cfg = IstaConfig { alpha: 1.0, threshold: Shrink::PerBlock(b.clone()), max_iters: 1, tol: 0.0 };
        let out = block_ista(&d, &x, &cfg, BlockShrinkMode::Relaxed).unwrap();
        let pre = d.matmul_tn(&x).unwrap();
        let relu = Mat::from_fn(9, 2, |i, j| (pre[(i, j)] - b[i / 3]).max(0.0));
        assert_eq!(out.code.flat(), &relu);
    }

    #[test]
    fn block_ista_exact_objective_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let d = gaussian_mat(&mut rng, 10, 12, 1.0);
            let x = gaussian_mat(&mut rng, 10, 2, 1.0);
            let tau = 0.02;
            let cfg = IstaConfig::for_dict(&d, Shrink::Scalar(tau));
            let weight = tau / cfg.alpha;
            let mut prev = block_objective(&d, &x, &BlockMatrix::zeros(4), weight);
            block_ista_trace(&d, &x, &cfg, BlockShrinkMode::Exact, |z| {
                let f = block_objective(&d, &x, z, weight);
                assert!(f <= prev + 1e-12 * prev.max(1.0));
                prev = f;
            })
            .unwrap();
        }
    }

    #[test]
    fn exact_threshold_norm_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = BlockMatrix::from_flat(gaussian_mat(&mut rng, 24, 2, 1.0)).unwrap();
        let tau = 1.1;
        let out = block_soft_threshold_exact(&v, tau);
        for (a, b) in v.block_norms().iter().zip(out.block_norms()) {
            assert!((soft_threshold(*a, tau) - b).abs() < 1e-14);
        }
    }

    #[test]
    fn relaxed_and_exact_zero_sets_agree_on_symmetric_blocks() {
        // All entries of a block share magnitude a; ‖V‖_F = a√6.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut blocks = Vec::new();
        let mut mags = Vec::new();
        for _ in 0..6 {
            let a: f64 = rng.random_range(0.0..1.0);
            mags.push(a);
            blocks.push(Mat::from_fn(3, 2, |_, _| if rng.random_bool(0.5) { a } else { -a }));
        }
        let v = BlockMatrix::from_blocks(&blocks).unwrap();
        let tau = 0.5 * 6f64.sqrt();
        let exact = block_soft_threshold_exact(&v, tau);
        let relaxed = block_soft_threshold_relaxed(&v, &[0.5; 6]).unwrap();
        assert_eq!(exact.support(), relaxed.support());
        assert!(mags.iter().any(|a| *a > 0.5) && mags.iter().any(|a| *a < 0.5));
    }

    #[test]
    fn brute_force_exact_representation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = gaussian_mat(&mut rng, 12, 12, 1.0);
        let mut z = BlockMatrix::zeros(4);
        z.block_slice_mut(2).copy_from_slice(&[1.0, -0.5, 0.3, 0.8, -1.2, 0.4]);
        let x = d.matmul(z.flat()).unwrap();
        let out = brute_force_block_sparse(&d, &x, 1).unwrap();
        assert_eq!(out.support, vec![2]);
        assert!(out.residual < 1e-10);
    }

    #[test]
    fn brute_force_full_support_is_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = gaussian_mat(&mut rng, 15, 9, 1.0);
        let x = gaussian_mat(&mut rng, 15, 2, 1.0);
        let out = brute_force_block_sparse(&d, &x, 3).unwrap();
        let ls = least_squares(&d, &x).unwrap();
        let ls_resid = d.matmul(&ls).unwrap().sub(&x).unwrap().frobenius_norm();
        assert!((out.residual - ls_resid).abs() < 1e-10);
    }

    #[test]
    fn brute_force_dominates_block_ista() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let d = gaussian_mat(&mut rng, 12, 15, 1.0);
            let x = gaussian_mat(&mut rng, 12, 2, 1.0);
            let cfg = IstaConfig::for_dict(&d, Shrink::Scalar(0.03));
            let heuristic = block_ista(&d, &x, &cfg, BlockShrinkMode::Exact).unwrap().code;
            let size = heuristic.support().len();
            if size > BRUTE_FORCE_MAX_LAMBDA {
                continue;
            }
            let oracle = brute_force_block_sparse(&d, &x, size).unwrap();
            assert!(oracle.residual <= block_residual(&d, &x, &heuristic) + 1e-12);
        }
    }

    #[test]
    fn brute_force_refuses_large_problems() {
        let d = Mat::zeros(4, 3 * 17);
        assert!(matches!(brute_force_block_sparse(&d, &Mat::zeros(4, 2), 1), Err(Error::Refused(_))));
        let d = Mat::zeros(4, 9);
        assert!(matches!(brute_force_block_sparse(&d, &Mat::zeros(4, 2), 4), Err(Error::Refused(_))));
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn coherence_cases() {
        assert_eq!(mutual_coherence(&Mat::identity(5)).unwrap(), 0.0);
        let dup = Mat::from_rows(&[&[1.0, 1.0, 0.0], &[2.0, 2.0, 1.0]]);
        assert!((mutual_coherence(&dup).unwrap() - 1.0).abs() < 1e-15);
        let h = 2f64.sqrt() / 2.0;
        let d = Mat::from_rows(&[&[1.0, h], &[0.0, h]]);
        assert!((mutual_coherence(&d).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let zero_col = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(mutual_coherence(&zero_col), Err(Error::Contract(_))));
    }

    #[test]
    fn orthonormal_dictionary_block_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let d = orthonormalize_columns(&gaussian_mat(&mut rng, 30, 24, 1.0)).unwrap();
        let mut z = BlockMatrix::zeros(8);
        z.block_slice_mut(5).copy_from_slice(&[1.0, 0.5, -0.7, 0.2, 0.9, -1.1]);
        let x = d.matmul(z.flat()).unwrap();
        let cfg = IstaConfig::for_dict(&d, Shrink::Scalar(0.1));
        let out = block_ista(&d, &x, &cfg, BlockShrinkMode::Exact).unwrap();
        assert_eq!(out.code.support(), vec![5]);
        let bf = brute_force_block_sparse(&d, &x, 1).unwrap();
        assert_eq!(bf.support, vec![5]);
    }
}
