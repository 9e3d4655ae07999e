use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use deep_nrsfm::data::{format_landmarks, parse_landmarks, synthesize_projections, LandmarkDataset};
use deep_nrsfm::linalg::{
    gaussian_mat, kron_identity_apply, kron_identity_transpose_apply, svd_thin, BlockMatrix, Mat,
};
use deep_nrsfm::metrics::shape_error_ratio;
use deep_nrsfm::model::ModelDims;
use deep_nrsfm::train::{init_params, Checkpoint, OptState};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn close(a: &Mat, b: &Mat, tol: f64) -> bool {
    a.sub(b).unwrap().max_abs() <= tol * (1.0 + b.max_abs())
}

fn shapes(seed: u64, frames: usize, p: usize) -> Vec<Mat> {
    let mut r = rng(seed);
    (0..frames).map(|_| gaussian_mat(&mut r, p, 3, 1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_is_associative(seed in any::<u64>(), m in 1usize..7, n in 1usize..7, k in 1usize..7, l in 1usize..7) {
        let mut r = rng(seed);
        let (a, b, c) = (gaussian_mat(&mut r, m, n, 1.0), gaussian_mat(&mut r, n, k, 1.0), gaussian_mat(&mut r, k, l, 1.0));
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn blockwise_kron_matches_explicit(seed in any::<u64>(), kin in 1usize..9, kout in 1usize..9) {
        let mut r = rng(seed);
        let d = gaussian_mat(&mut r, kin, kout, 1.0);
        let i3 = Mat::identity(3);
        let x = BlockMatrix::from_flat(gaussian_mat(&mut r, 3 * kin, 2, 1.0)).unwrap();
        let explicit_t = d.kron(&i3).matmul_tn(x.flat()).unwrap();
        prop_assert!(close(kron_identity_transpose_apply(&d, &x).unwrap().flat(), &explicit_t, 1e-12));
        let y = BlockMatrix::from_flat(gaussian_mat(&mut r, 3 * kout, 2, 1.0)).unwrap();
        let explicit = d.kron(&i3).matmul(y.flat()).unwrap();
        prop_assert!(close(kron_identity_apply(&d, &y).unwrap().flat(), &explicit, 1e-12));
    }

    #[test]
    fn svd_reconstructs(seed in any::<u64>(), n in 1usize..8, extra in 0usize..5) {
        let a = gaussian_mat(&mut rng(seed), n + extra, n, 1.0);
        let svd = svd_thin(&a).unwrap();
        prop_assert!(close(&svd.reconstruct(), &a, 1e-10));
        prop_assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(svd.sigma.iter().all(|s| *s >= 0.0));
        prop_assert!(close(&svd.u.matmul_tn(&svd.u).unwrap(), &Mat::identity(n), 1e-12));
    }

    #[test]
    fn shape_error_ignores_translation_scale_and_reflection(
        seed in any::<u64>(),
        frames in 1usize..6,
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let gt = shapes(seed, frames, 8);
        let recon = shapes(seed.wrapping_add(1), frames, 8);
        let base = shape_error_ratio(&recon, &gt).unwrap();
        let moved: Vec<Mat> = recon
            .iter()
            .enumerate()
            .map(|(f, s)| {
                let flip = if f % 2 == 0 { -1.0 } else { 1.0 };
                Mat::from_fn(s.rows(), 3, |i, c| {
                    let z = if c == 2 { flip } else { 1.0 };
                    scale * z * s[(i, c)] + shift * (c as f64 + 1.0)
                })
            })
            .collect();
        prop_assert!((shape_error_ratio(&moved, &gt).unwrap() - base).abs() < 1e-10);
    }

    #[test]
    fn shape_error_ignores_joint_point_permutation(seed in any::<u64>(), frames in 1usize..6) {
        let gt = shapes(seed, frames, 7);
        let recon = shapes(seed.wrapping_add(1), frames, 7);
        let perm = [3usize, 0, 6, 2, 5, 1, 4];
        let permute = |s: &Mat| Mat::from_fn(7, 3, |i, c| s[(perm[i], c)]);
        let a = shape_error_ratio(&recon, &gt).unwrap();
        let b = shape_error_ratio(&recon.iter().map(permute).collect::<Vec<_>>(), &gt.iter().map(permute).collect::<Vec<_>>())
            .unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trips(seed in any::<u64>(), p in 2usize..8, k1 in 1usize..9, k2 in 1usize..5, step in any::<u64>()) {
        let params = init_params(&ModelDims::new(p, vec![k1, k2]).unwrap(), seed).unwrap();
        let ck = Checkpoint {
            params,
            step,
            optimizer: OptState::Sgd,
            loss_history: vec![(1, 0.5), (step, f64::MIN_POSITIVE)],
            coherence_history: vec![(step, 0.25)],
        };
        prop_assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
    }

    #[test]
    fn landmark_text_round_trips(seed in any::<u64>(), frames in 0usize..5, p in 1usize..7) {
        let ds: LandmarkDataset = synthesize_projections(&shapes(seed, frames, p), seed).unwrap();
        let back = parse_landmarks(&format_landmarks(&ds)).unwrap();
        prop_assert_eq!(back.frames.len(), ds.frames.len());
        for (a, b) in back.frames.iter().zip(&ds.frames) {
            prop_assert_eq!(&a.id, &b.id);
            prop_assert_eq!(&a.w, &b.w);
            prop_assert_eq!(&a.gt_shape, &b.gt_shape);
            prop_assert_eq!(&a.gt_camera, &b.gt_camera);
        }
    }
}
