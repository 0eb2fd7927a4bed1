//! Symmetric tridiagonal eigenvalue tools: Sturm-sequence bisection for a
//! single eigenvalue and inverse iteration for its eigenvector.

use crate::rng::SplitMix64;

/// Symmetric tridiagonal matrix: `diag` of length n, `off` of length n-1.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (LDL^T pivot count).
    pub fn sturm_count(&self, x: f64) -> usize {
        let n = self.n();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let safe = if q.abs() < 1e-300 {
                if q >= 0.0 {
                    1e-300
                } else {
                    -1e-300
                }
            } else {
                q
            };
            q = (self.diag[i] - x) - self.off[i - 1] * self.off[i - 1] / safe;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// k-th smallest eigenvalue (0-indexed) by bisection to relative
    /// tolerance `rel_tol`.
    pub fn eigenvalue(&self, k: usize, rel_tol: f64) -> f64 {
        debug_assert!(k < self.n());
        let (mut a, mut b) = self.gershgorin();
        a -= 1e-12 * (1.0 + a.abs());
        b += 1e-12 * (1.0 + b.abs());
        for _ in 0..160 {
            let mid = 0.5 * (a + b);
            if b - a <= rel_tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
                break;
            }
            if self.sturm_count(mid) <= k {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * v[i + 1];
            }
            out[i] = s;
        }
        out
    }

    /// Solve `(T - shift I) x = rhs` by banded LU with partial pivoting.
    /// Near-singular pivots are floored, which is what inverse iteration
    /// wants: the solution explodes along the eigenvector.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.n();
        // Row i holds columns (i, i+1, i+2): (d, u1, u2). `low` is the
        // entry of row i+1 in column i before elimination.
        let mut d: Vec<f64> = self.diag.iter().map(|&v| v - shift).collect();
        let mut u1: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { self.off[i] } else { 0.0 })
            .collect();
        let mut u2 = vec![0.0; n];
        let mut x = rhs.to_vec();

        let scale = self
            .diag
            .iter()
            .map(|v| v.abs())
            .chain(self.off.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let floor = 1e-300_f64.max(scale * 1e-20 * f64::EPSILON);

        for i in 0..n - 1 {
            let mut low = self.off[i]; // row i+1, column i
            if low.abs() > d[i].abs() {
                std::mem::swap(&mut d[i], &mut low);
                // Old row i continues with (u1, u2); old row i+1 with (d, u1).
                let (ni_u1, ni_u2) = (d[i + 1], u1[i + 1]);
                d[i + 1] = u1[i];
                u1[i + 1] = u2[i];
                u1[i] = ni_u1;
                u2[i] = ni_u2;
                x.swap(i, i + 1);
            }
            let pivot = if d[i].abs() < floor {
                floor.copysign(d[i])
            } else {
                d[i]
            };
            let m = low / pivot;
            d[i + 1] -= m * u1[i];
            u1[i + 1] -= m * u2[i];
            x[i + 1] -= m * x[i];
        }

        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            let pivot = if d[i].abs() < floor {
                floor.copysign(d[i])
            } else {
                d[i]
            };
            x[i] = s / pivot;
        }
        x
    }

    /// Inverse iteration at `shift`, deflating against `ortho` when given.
    /// Returns the unit eigenvector, the Rayleigh quotient, and the
    /// 2-norm residual `|T v - rho v|`.
    pub fn inverse_iteration(
        &self,
        shift: f64,
        ortho: Option<&[f64]>,
        max_iter: usize,
        res_tol: f64,
    ) -> (Vec<f64>, f64, f64) {
        let n = self.n();
        let mut rng = SplitMix64::new(0x5eed_0000 ^ n as u64);
        let mut v: Vec<f64> = (0..n).map(|_| rng.uniform() - 0.5).collect();
        normalize(&mut v);

        let mut rho = shift;
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            let mut w = self.solve_shifted(shift, &v);
            if let Some(q) = ortho {
                let dot: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= dot * qi;
                }
            }
            normalize(&mut w);
            let tv = self.matvec(&w);
            rho = w.iter().zip(&tv).map(|(a, b)| a * b).sum();
            residual = tv
                .iter()
                .zip(&w)
                .map(|(t, x)| (t - rho * x) * (t - rho * x))
                .sum::<f64>()
                .sqrt();
            v = w;
            if residual <= res_tol {
                break;
            }
        }
        (v, rho, residual)
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Discrete 1D Laplacian with Dirichlet ends: eigenvalues
    /// 2 - 2 cos(k pi / (n+1)).
    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        }
    }

    #[test]
    fn sturm_count_matches_known_spectrum() {
        let t = laplacian(50);
        let eig = |k: usize| 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 51.0).cos();
        assert_eq!(t.sturm_count(eig(0) - 1e-9), 0);
        assert_eq!(t.sturm_count(eig(0) + 1e-9), 1);
        assert_eq!(t.sturm_count(eig(24) + 1e-9), 25);
        assert_eq!(t.sturm_count(10.0), 50);
    }

    #[test]
    fn bisection_finds_eigenvalues() {
        let t = laplacian(40);
        for k in [0usize, 1, 7, 39] {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 41.0).cos();
            let approx = t.eigenvalue(k, 1e-12);
            assert!((approx - exact).abs() < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn inverse_iteration_recovers_eigenvector() {
        let t = laplacian(60);
        let lam = t.eigenvalue(1, 1e-12);
        let (v, rho, res) = t.inverse_iteration(lam, None, 50, 1e-10);
        assert!((rho - lam).abs() < 1e-9);
        assert!(res < 1e-10);
        // Second mode: sin(2 pi (i+1)/61) up to sign and scale.
        let exact: Vec<f64> = (0..60)
            .map(|i| (2.0 * std::f64::consts::PI * (i + 1) as f64 / 61.0).sin())
            .collect();
        let dot: f64 = v.iter().zip(&exact).map(|(a, b)| a * b).sum();
        let norm: f64 = exact.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((dot.abs() / norm - 1.0).abs() < 1e-8);
    }

    #[test]
    fn shifted_solve_is_accurate() {
        let t = laplacian(30);
        let rhs: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = t.solve_shifted(0.5, &rhs);
        let mut tv = t.matvec(&x);
        for (ti, xi) in tv.iter_mut().zip(&x) {
            *ti -= 0.5 * xi;
        }
        for (lhs, want) in tv.iter().zip(&rhs) {
            assert!((lhs - want).abs() < 1e-10);
        }
    }
}
