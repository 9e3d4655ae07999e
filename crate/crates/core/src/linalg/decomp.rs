//! Small dense factorizations: Householder QR, one-sided Jacobi SVD, the
//! closed-form polar factor of a two-column matrix, and helpers built on them.

use crate::error::{Error, Result};
use crate::linalg::Mat;

const JACOBI_MAX_SWEEPS: usize = 60;

/// Thin Householder QR of an `m x n` matrix with `m >= n`.
///
/// Returns `(Q, R)` with `Q` of shape `m x n` (orthonormal columns) and `R`
/// upper triangular `n x n`. No sign normalization is applied to `R`.
pub fn qr_thin(a: &Mat) -> Result<(Mat, Mat)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::shape(format!("qr_thin needs rows >= cols, got {m}x{n}")));
    }
    let mut r = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                r[(i, j)] -= f * v[i - k];
            }
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the leading n columns of I.
    let mut q = Mat::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        for j in 0..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * q[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                q[(i, j)] -= f * v[i - k];
            }
        }
    }
    let r = Mat::from_fn(n, n, |i, j| if j >= i { r[(i, j)] } else { 0.0 });
    Ok((q, r))
}

/// Orthonormal basis for the column space of a full-column-rank matrix, with
/// signs fixed so that the triangular factor has a nonnegative diagonal.
pub fn orthonormalize_columns(a: &Mat) -> Result<Mat> {
    let (mut q, r) = qr_thin(a)?;
    for j in 0..q.cols() {
        if r[(j, j)] < 0.0 {
            for i in 0..q.rows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Thin singular value decomposition `m = U diag(sigma) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    pub fn reconstruct(&self) -> Mat {
        let scaled = Mat::from_fn(self.u.rows(), self.u.cols(), |i, j| self.u[(i, j)] * self.sigma[j]);
        scaled.matmul_nt(&self.v).expect("svd factors are conformant")
    }
}

/// Jacobi rotation `(c, s)` that zeroes the off-diagonal of the 2x2 Gram
/// block `[[alpha, gamma], [gamma, beta]]`.
fn jacobi_rotation(alpha: f64, beta: f64, gamma: f64) -> (f64, f64) {
    let zeta = (beta - alpha) / (2.0 * gamma);
    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, c * t)
}

fn rotate_cols(m: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.rows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// Thin SVD by one-sided (Hestenes) Jacobi. Requires `rows >= cols`.
///
/// Singular values are returned in descending order. Left singular vectors
/// belonging to (numerically) zero singular values are completed to an
/// orthonormal set, so `UᵀU = I` holds even for rank-deficient input.
pub fn svd_thin(m: &Mat) -> Result<Svd> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::shape(format!("svd_thin needs rows >= cols, got {rows}x{cols}")));
    }
    let mut a = m.clone();
    let mut v = Mat::identity(cols);
    let mut converged = cols < 2;
    let mut off = 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                off = off.max(gamma.abs() / scale.max(f64::MIN_POSITIVE));
                if gamma.abs() <= f64::EPSILON * scale {
                    continue;
                }
                let (c, s) = jacobi_rotation(alpha, beta, gamma);
                rotate_cols(&mut a, p, q, c, s);
                rotate_cols(&mut v, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "jacobi svd did not converge in {JACOBI_MAX_SWEEPS} sweeps (max relative off-diagonal {off:.3e})"
        )));
    }

    let norms: Vec<f64> = (0..cols).map(|j| (0..rows).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    let tiny = sigma_max * f64::EPSILON * rows as f64;

    let mut u = Mat::zeros(rows, cols);
    let mut v_sorted = Mat::zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        let keep = s > tiny && s > 0.0;
        sigma.push(if keep { s } else { s.max(0.0) });
        for i in 0..cols {
            v_sorted[(i, dst)] = v[(i, src)];
        }
        let mut col: Vec<f64> = if keep { (0..rows).map(|i| a[(i, src)] / s).collect() } else { vec![0.0; rows] };
        if keep {
            // Re-orthogonalize against earlier columns; matters only for
            // tiny singular values.
            reorthogonalize(&mut col, &u, dst);
        }
        let n = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if keep && n > 0.5 {
            for x in &mut col {
                *x /= n;
            }
        } else {
            col = complement_vector(&u, dst, rows)?;
        }
        for i in 0..rows {
            u[(i, dst)] = col[i];
        }
    }
    Ok(Svd { u, sigma, v: v_sorted })
}

fn reorthogonalize(col: &mut [f64], basis: &Mat, count: usize) {
    for _ in 0..2 {
        for j in 0..count {
            let d: f64 = (0..col.len()).map(|i| col[i] * basis[(i, j)]).sum();
            for (i, c) in col.iter_mut().enumerate() {
                *c -= d * basis[(i, j)];
            }
        }
    }
}

/// Unit vector orthogonal to the first `count` columns of `basis`.
fn complement_vector(basis: &Mat, count: usize, rows: usize) -> Result<Vec<f64>> {
    for e in 0..rows {
        let mut col = vec![0.0; rows];
        col[e] = 1.0;
        reorthogonalize(&mut col, basis, count);
        let n = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.5 {
            return Ok(col.into_iter().map(|x| x / n).collect());
        }
    }
    Err(Error::Numeric("could not complete an orthonormal basis".into()))
}

/// Largest singular value estimated by power iteration on `AᵀA`.
pub fn spectral_norm(a: &Mat, iters: usize) -> f64 {
    let n = a.cols();
    if n == 0 || a.rows() == 0 {
        return 0.0;
    }
    // Deterministic, non-degenerate start.
    let mut x = Mat::from_fn(n, 1, |i, _| 1.0 + (i as f64) * 1e-3);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let norm = x.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = x.scale(1.0 / norm);
        let ax = a.matmul(&x).expect("conformant");
        estimate = ax.frobenius_norm();
        x = a.matmul_tn(&ax).expect("conformant");
    }
    estimate
}

/// Minimum-norm least-squares solution of `A X ≈ B` via the SVD.
pub fn least_squares(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.rows() != b.rows() {
        return Err(Error::shape(format!(
            "least squares with {}x{} system and {}x{} right-hand side",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if a.rows() < a.cols() {
        let t = least_squares_wide(a, b)?;
        return Ok(t);
    }
    let svd = svd_thin(a)?;
    let cutoff = svd.sigma.first().copied().unwrap_or(0.0) * 1e-12 * a.rows().max(a.cols()) as f64;
    let utb = svd.u.matmul_tn(b)?;
    let scaled = Mat::from_fn(utb.rows(), utb.cols(), |i, j| {
        let s = svd.sigma[i];
        if s > cutoff {
            utb[(i, j)] / s
        } else {
            0.0
        }
    });
    svd.v.matmul(&scaled)
}

fn least_squares_wide(a: &Mat, b: &Mat) -> Result<Mat> {
    // Minimum-norm solution through the transposed problem: A = (Aᵀ)ᵀ.
    let at = a.transpose();
    let svd = svd_thin(&at)?;
    let cutoff = svd.sigma.first().copied().unwrap_or(0.0) * 1e-12 * a.rows().max(a.cols()) as f64;
    // A = V Σ Uᵀ, so A⁺ = U Σ⁺ Vᵀ.
    let vtb = svd.v.matmul_tn(b)?;
    let scaled = Mat::from_fn(vtb.rows(), vtb.cols(), |i, j| {
        let s = svd.sigma[i];
        if s > cutoff {
            vtb[(i, j)] / s
        } else {
            0.0
        }
    });
    svd.u.matmul(&scaled)
}

/// Polar factor of a two-column matrix `m = Q P` with `QᵀQ = I₂` and `P`
/// symmetric positive definite.
///
/// The right singular vectors are the eigenvectors of the 2x2 Gram matrix
/// `mᵀm`, available in closed form as a single plane rotation. The rotation is
/// applied twice (a second one-sided Jacobi pass) so that the orthonormality of
/// `Q` does not degrade with the condition number of `m`.
#[derive(Debug, Clone)]
pub struct Polar2 {
    pub q: Mat,
    /// Right singular vectors (2x2 rotation).
    pub v: Mat,
    /// Singular values, descending.
    pub sigma: [f64; 2],
}

impl Polar2 {
    /// `P⁻¹ = V diag(1/σ) Vᵀ`.
    pub fn p_inv(&self) -> Mat {
        let v = &self.v;
        Mat::from_fn(2, 2, |i, j| v[(i, 0)] * v[(j, 0)] / self.sigma[0] + v[(i, 1)] * v[(j, 1)] / self.sigma[1])
    }
}

/// Threshold below which a camera's smallest singular value is treated as
/// degenerate: `1e-6 · max(1, ‖m‖_F)`.
pub fn polar_threshold(m: &Mat) -> f64 {
    1e-6 * m.frobenius_norm().max(1.0)
}

pub fn polar_two_col(m: &Mat) -> Result<Polar2> {
    if m.cols() != 2 || m.rows() < 2 {
        return Err(Error::shape(format!("polar factor needs an n x 2 matrix, got {}x{}", m.rows(), m.cols())));
    }
    let mut a = m.clone();
    let mut v = Mat::identity(2);
    for _ in 0..2 {
        let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
        for i in 0..a.rows() {
            let (x, y) = (a[(i, 0)], a[(i, 1)]);
            alpha += x * x;
            beta += y * y;
            gamma += x * y;
        }
        if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
            continue;
        }
        let (c, s) = jacobi_rotation(alpha, beta, gamma);
        rotate_cols(&mut a, 0, 1, c, s);
        rotate_cols(&mut v, 0, 1, c, s);
    }
    let n0 = (0..a.rows()).map(|i| a[(i, 0)] * a[(i, 0)]).sum::<f64>().sqrt();
    let n1 = (0..a.rows()).map(|i| a[(i, 1)] * a[(i, 1)]).sum::<f64>().sqrt();
    let threshold = polar_threshold(m);
    let sigma_min = n0.min(n1);
    if sigma_min <= threshold {
        return Err(Error::DegenerateCamera { sigma_min, threshold });
    }
    let (first, second) = if n0 >= n1 { (0, 1) } else { (1, 0) };
    let sigma = if n0 >= n1 { [n0, n1] } else { [n1, n0] };
    let v_sorted = Mat::from_fn(2, 2, |i, j| v[(i, if j == 0 { first } else { second })]);
    let u = Mat::from_fn(a.rows(), 2, |i, j| {
        let src = if j == 0 { first } else { second };
        a[(i, src)] / sigma[j]
    });
    let q = u.matmul_nt(&v_sorted)?;
    Ok(Polar2 { q, v: v_sorted, sigma })
}
