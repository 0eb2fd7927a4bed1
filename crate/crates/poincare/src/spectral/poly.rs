//! Polynomial test functions and the variational lower bound they induce.
//!
//! Any non-degenerate `g` gives `Var g(Y) / E g'(Y)^2 <= R_Y`, evaluated
//! here with exact closed-form moments. The best polynomial of a given
//! degree solves the small generalized eigenproblem `G c = r H c` with `G`
//! the covariance Gram matrix and `H` the derivative Gram matrix. The basis
//! is orthonormalized first by the Stieltjes three-term recurrence under the
//! mixture, so the assembled matrices stay well conditioned up to the
//! degree cap.

use super::SpectralError;
use crate::mixture::SmoothedMixture;

/// Polynomial by coefficient vector, ascending powers. Exact trailing zeros
/// are trimmed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFn {
    coeffs: Vec<f64>,
}

/// Degree cap for Rayleigh-quotient use; the Gram matrices stay numerically
/// sane up to here.
pub const MAX_POLY_DEGREE: usize = 12;

impl PolyFn {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    /// The identity test function `g(x) = x`, which attains `Var(Y)`.
    pub fn identity() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::new(vec![0.0]);
        }
        Self::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| (i + 1) as f64 * c)
                .collect::<Vec<_>>(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn add_scaled(&self, other: &Self, factor: f64) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            out[i] += factor * c;
        }
        Self::new(out)
    }

    /// `p(x + dx)` by binomial expansion.
    pub fn shift_arg(&self, dx: f64) -> Self {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            // c (x + dx)^k
            let mut binom = 1.0;
            let mut pow = 1.0;
            for j in 0..=k {
                // coefficient of x^(k-j): C(k,j) dx^j
                out[k - j] += c * binom * pow;
                binom *= (k - j) as f64 / (j + 1) as f64;
                pow *= dx;
            }
        }
        Self::new(out)
    }
}

/// `E p(Y)` via central moments about the mean.
pub(crate) fn expect_poly(m: &SmoothedMixture, p: &PolyFn) -> f64 {
    let centered = p.shift_arg(m.mean());
    centered
        .coeffs()
        .iter()
        .enumerate()
        .map(|(j, &c)| c * m.central_moment_unchecked(j as u32))
        .sum()
}

/// Rayleigh quotient `Var g(Y) / E g'(Y)^2` from exact moments. Any finite
/// output is a lower bound on the Poincaré constant of `Y`.
pub fn rayleigh_quotient(m: &SmoothedMixture, g: &PolyFn) -> Result<f64, SpectralError> {
    if g.degree() > MAX_POLY_DEGREE {
        return Err(SpectralError::DegreeRange {
            degree: g.degree(),
            max: MAX_POLY_DEGREE,
        });
    }
    let mean_g = expect_poly(m, g);
    let mean_g2 = expect_poly(m, &g.mul(g));
    let var_g = mean_g2 - mean_g * mean_g;
    let dg = g.derivative();
    let energy = expect_poly(m, &dg.mul(&dg));
    if energy < 1e-14 {
        return Err(SpectralError::DegeneratePoly { energy });
    }
    Ok(var_g / energy)
}

/// Best polynomial lower bound of the given degree.
#[derive(Debug, Clone)]
pub struct PolyRayleigh {
    pub best_lb: f64,
    pub best_poly: PolyFn,
}

/// Maximize the Rayleigh quotient over polynomials of degree `<= degree`.
pub fn poly_rayleigh_bound(
    m: &SmoothedMixture,
    degree: usize,
) -> Result<PolyRayleigh, SpectralError> {
    if !(1..=MAX_POLY_DEGREE).contains(&degree) {
        return Err(SpectralError::DegreeRange {
            degree,
            max: MAX_POLY_DEGREE,
        });
    }
    let mean = m.mean();
    let moments = m.central_moments_up_to(2 * degree as u32 + 2);
    let inner = |p: &PolyFn, q: &PolyFn| -> f64 {
        p.mul(q)
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, &c)| c * moments[j])
            .sum()
    };

    // Stieltjes three-term recurrence in centered coordinates:
    // pi_{k+1} = (t - alpha_k) pi_k - beta_k pi_{k-1}.
    let mut basis: Vec<PolyFn> = Vec::with_capacity(degree + 1);
    let mut monic = PolyFn::new(vec![1.0]);
    let mut prev: Option<(PolyFn, f64)> = None; // (pi_{k-1}, |pi_{k-1}|^2)
    let t = PolyFn::identity();
    for k in 0..=degree {
        let norm2 = inner(&monic, &monic);
        if !norm2.is_finite() || norm2 <= 0.0 {
            return Err(SpectralError::GramConditioning { order: k });
        }
        let scale = 1.0 / norm2.sqrt();
        basis.push(PolyFn::new(
            monic
                .coeffs()
                .iter()
                .map(|&c| c * scale)
                .collect::<Vec<_>>(),
        ));
        if k == degree {
            break;
        }
        let alpha = inner(&t.mul(&monic), &monic) / norm2;
        let mut next = t.mul(&monic).add_scaled(&monic, -alpha);
        if let Some((ref pm, pm_norm2)) = prev {
            let beta = norm2 / pm_norm2;
            next = next.add_scaled(pm, -beta);
        }
        prev = Some((monic, norm2));
        monic = next;
    }

    // Gram matrices over P_1..P_d: G covariance (identity up to rounding),
    // H derivative energies.
    let d = degree;
    let mut g_mat = vec![0.0; d * d];
    let mut h_mat = vec![0.0; d * d];
    for j in 0..d {
        for k in j..d {
            let pj = &basis[j + 1];
            let pk = &basis[k + 1];
            let cov = inner(pj, pk)
                - inner(pj, &PolyFn::new(vec![1.0])) * inner(pk, &PolyFn::new(vec![1.0]));
            let energy = inner(&pj.derivative(), &pk.derivative());
            g_mat[j * d + k] = cov;
            g_mat[k * d + j] = cov;
            h_mat[j * d + k] = energy;
            h_mat[k * d + j] = energy;
        }
    }

    // Cholesky-reduce H, then Jacobi on L^-1 G L^-T.
    let l = cholesky(&h_mat, d).ok_or(SpectralError::GramConditioning { order: d })?;
    let mut mid = vec![0.0; d * d];
    for col in 0..d {
        let g_col: Vec<f64> = (0..d).map(|r| g_mat[r * d + col]).collect();
        let y = forward_sub(&l, d, &g_col);
        for r in 0..d {
            mid[r * d + col] = y[r];
        }
    }
    // Right-multiply by L^-T: solve L z = row for each row.
    let mut reduced = vec![0.0; d * d];
    for row in 0..d {
        let m_row: Vec<f64> = (0..d).map(|c| mid[row * d + c]).collect();
        let z = forward_sub(&l, d, &m_row);
        for c in 0..d {
            reduced[row * d + c] = z[c];
        }
    }

    let (evals, evecs) = jacobi_eigen(&reduced, d);
    let (best_idx, &best_lb) = evals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("degree >= 1");
    let y: Vec<f64> = (0..d).map(|r| evecs[r * d + best_idx]).collect();
    let c = back_sub_transpose(&l, d, &y);

    let mut best = PolyFn::new(vec![0.0]);
    for (k, &ck) in c.iter().enumerate() {
        best = best.add_scaled(&basis[k + 1], ck);
    }
    // Back to original coordinates: g(y) = g_centered(y - mean).
    let best_poly = best.shift_arg(-mean);
    Ok(PolyRayleigh { best_lb, best_poly })
}

/// Dense lower-triangular Cholesky; None if not positive definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s.is_nan() || s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solve `L^T x = b`.
fn back_sub_transpose(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Cyclic Jacobi for small dense symmetric matrices. Returns eigenvalues and
/// the column-eigenvector matrix.
fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-15 * frob.max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m[p * n + q].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let evals: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    (evals, v)
}
