use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{qr_thin, Mat};

pub fn gaussian_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        std * z
    })
}

/// Random 3x2 matrix with orthonormal columns, distributed uniformly (Haar)
/// over the Stiefel manifold: QR of a 3x3 standard Gaussian with the sign of
/// `R`'s diagonal folded into `Q`, keeping the first two columns.
pub fn random_semiorthonormal_3x2<R: Rng + ?Sized>(rng: &mut R) -> Mat {
    loop {
        let g = gaussian_mat(rng, 3, 3, 1.0);
        let (q, r) = qr_thin(&g).expect("3x3 is square");
        if (0..3).any(|i| r[(i, i)] == 0.0) {
            continue;
        }
        return Mat::from_fn(3, 2, |i, j| q[(i, j)] * r[(j, j)].signum());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn columns_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let m = random_semiorthonormal_3x2(&mut rng);
            let defect = m.matmul_tn(&m).unwrap().sub(&Mat::identity(2)).unwrap().max_abs();
            assert!(defect < 1e-12);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = random_semiorthonormal_3x2(&mut ChaCha8Rng::seed_from_u64(42));
        let b = random_semiorthonormal_3x2(&mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn entries_have_zero_mean() {
        // Each entry of a Haar-distributed unit vector in R³ has variance 1/3.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mut sums = [0.0; 6];
        for _ in 0..n {
            let m = random_semiorthonormal_3x2(&mut rng);
            for (s, v) in sums.iter_mut().zip(m.as_slice()) {
                *s += v;
            }
        }
        let sd_of_mean = (1.0f64 / 3.0).sqrt() / (n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < 3.0 * sd_of_mean, "entry mean {}", s / n as f64);
        }
    }
}
