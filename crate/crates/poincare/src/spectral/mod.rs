//! Spectral-gap estimation for the diffusion operator
//! `D_Y g = rho_Y g' + g''` attached to a smoothed mixture.
//!
//! In divergence form `D_Y g = (f g')' / f`, so a flux-conserving finite
//! difference stencil with zero-flux ends gives the generalized symmetric
//! eigenproblem `A g = lambda D g`, `D = diag(f_i)`. Constants span the
//! kernel; the next eigenvalue `lambda_1` is the spectral gap, and
//! `1 / lambda_1` estimates the Poincaré constant.

mod poly;
mod tridiag;

pub(crate) use poly::expect_poly;
pub use poly::{poly_rayleigh_bound, rayleigh_quotient, PolyFn, PolyRayleigh, MAX_POLY_DEGREE};
pub use tridiag::SymTridiag;

use crate::mixture::{MixtureError, SmoothedMixture};
use thiserror::Error;

/// Default grid resolution for desk-scale runs.
pub const DEFAULT_GRID_POINTS: usize = 4001;
/// Default window half-width in units of `sqrt(tau)` beyond the extreme atoms.
pub const DEFAULT_WIDTH: f64 = 10.0;
/// Hard ceiling for the automatic grid refinement at small `tau`.
pub const GRID_POINT_CAP: usize = 50_001;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("grid needs an odd point count >= 101, got {n}")]
    BadGrid { n: usize },
    #[error("window width multiplier must be >= 6, got {width}")]
    BadWidth { width: f64 },
    #[error("window too narrow: boundary density is {boundary_ratio:e} of the peak (limit 1e-10)")]
    WindowTooNarrow { boundary_ratio: f64 },
    #[error("grid cannot resolve tau: {needed} points needed, cap is {cap}")]
    GridCannotResolve { needed: usize, cap: usize },
    #[error("density underflows to zero inside the window at x = {x}")]
    DensityUnderflow { x: f64 },
    #[error("gap is not strictly positive: lambda_1 = {lambda1:e}")]
    NonPositiveGap { lambda1: f64 },
    #[error("inverse iteration stalled: residual {residual:e} after {iterations} iterations")]
    InverseIteration { residual: f64, iterations: usize },
    #[error("polynomial degree {degree} outside 1..={max}")]
    DegreeRange { degree: usize, max: usize },
    #[error("test function is degenerate under the mixture: E g'(Y)^2 = {energy:e}")]
    DegeneratePoly { energy: f64 },
    #[error("moment Gram matrix lost positive definiteness at order {order}")]
    GramConditioning { order: usize },
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// Discretized eigenproblem on a uniform grid.
#[derive(Debug, Clone)]
pub struct SpectralProblem {
    grid_lo: f64,
    h: f64,
    /// Density at the nodes.
    weights: Vec<f64>,
    /// Density at the cell midpoints.
    midpoint_weights: Vec<f64>,
    /// `B = D^{-1/2} A D^{-1/2}`, the standard symmetric form.
    matrix: SymTridiag,
    /// Simpson mass of the density over the window (close to 1).
    mass: f64,
    n_adjusted: bool,
}

impl SpectralProblem {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn window(&self) -> (f64, f64) {
        (self.grid_lo, self.grid_lo + self.h * (self.n() - 1) as f64)
    }

    pub fn grid_point(&self, i: usize) -> f64 {
        self.grid_lo + self.h * i as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.grid_point(i)).collect()
    }

    pub fn node_density(&self) -> &[f64] {
        &self.weights
    }

    pub fn midpoint_density(&self) -> &[f64] {
        &self.midpoint_weights
    }

    pub fn matrix(&self) -> &SymTridiag {
        &self.matrix
    }

    /// Whether the grid was refined beyond the requested point count to
    /// resolve a small `tau`.
    pub fn n_adjusted(&self) -> bool {
        self.n_adjusted
    }

    fn simpson_weight(&self, i: usize) -> f64 {
        let n = self.n();
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * self.h / 3.0
    }

    /// `E v(Y)` restricted to the window, by Simpson quadrature of the
    /// sampled values against the density.
    pub fn expect(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n());
        let sum: f64 = (0..self.n())
            .map(|i| self.simpson_weight(i) * self.weights[i] * values[i])
            .sum();
        sum / self.mass
    }

    /// Central differences, one-sided at the ends.
    pub fn gradient(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        out[0] = (values[1] - values[0]) / self.h;
        out[n - 1] = (values[n - 1] - values[n - 2]) / self.h;
        for i in 1..n - 1 {
            out[i] = (values[i + 1] - values[i - 1]) / (2.0 * self.h);
        }
        out
    }
}

/// Discretize `-D_Y` on `[min a - width sqrt(tau), max a + width sqrt(tau)]`
/// with `n_points` nodes (odd, >= 101) and zero-flux ends. The point count
/// is raised automatically (up to [`GRID_POINT_CAP`]) when the spacing could
/// not resolve the smoothing scale `sqrt(tau)/4`.
pub fn assemble(
    m: &SmoothedMixture,
    n_points: usize,
    width: f64,
) -> Result<SpectralProblem, SpectralError> {
    if n_points < 101 || n_points.is_multiple_of(2) {
        return Err(SpectralError::BadGrid { n: n_points });
    }
    if width.is_nan() || width < 6.0 {
        return Err(SpectralError::BadWidth { width });
    }
    let (lo, hi) = m.window(width);
    let span = hi - lo;
    let resolve = m.tau().sqrt() / 4.0;

    let mut n = n_points;
    let mut n_adjusted = false;
    if span / (n - 1) as f64 > resolve {
        let needed = (span / resolve).ceil() as usize + 1;
        let needed = if needed.is_multiple_of(2) {
            needed + 1
        } else {
            needed
        };
        if needed > GRID_POINT_CAP {
            return Err(SpectralError::GridCannotResolve {
                needed,
                cap: GRID_POINT_CAP,
            });
        }
        n = needed.max(n);
        n_adjusted = true;
    }

    let h = span / (n - 1) as f64;
    let weights: Vec<f64> = (0..n).map(|i| m.pdf(lo + h * i as f64)).collect();
    let midpoint_weights: Vec<f64> = (0..n - 1)
        .map(|i| m.pdf(lo + h * (i as f64 + 0.5)))
        .collect();

    let peak = weights.iter().fold(0.0f64, |a, &b| a.max(b));
    for (i, &f) in weights.iter().enumerate() {
        if f < f64::MIN_POSITIVE {
            return Err(SpectralError::DensityUnderflow {
                x: lo + h * i as f64,
            });
        }
    }
    let boundary_ratio = weights[0].max(weights[n - 1]) / peak;
    if boundary_ratio > 1e-10 {
        return Err(SpectralError::WindowTooNarrow { boundary_ratio });
    }

    let h2 = h * h;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for i in 0..n {
        let left = if i > 0 { midpoint_weights[i - 1] } else { 0.0 };
        let right = if i + 1 < n { midpoint_weights[i] } else { 0.0 };
        diag[i] = (left + right) / (h2 * weights[i]);
    }
    for i in 0..n - 1 {
        off[i] = -midpoint_weights[i] / (h2 * (weights[i] * weights[i + 1]).sqrt());
    }

    let mut problem = SpectralProblem {
        grid_lo: lo,
        h,
        weights,
        midpoint_weights,
        matrix: SymTridiag { diag, off },
        mass: 1.0,
        n_adjusted,
    };
    problem.mass = (0..n)
        .map(|i| problem.simpson_weight(i) * problem.weights[i])
        .sum();
    Ok(problem)
}

/// Spectral gap, Poincaré estimate, and the gap eigenfunction.
#[derive(Debug, Clone)]
pub struct GapResult {
    /// Least strictly positive eigenvalue of `-D_Y`.
    pub lambda1: f64,
    /// `1 / lambda1`.
    pub r_estimate: f64,
    /// Grid nodes, the eigenfunction normalized to mean 0 / variance 1 under
    /// the discrete measure, and the density at the nodes.
    pub grid: Vec<f64>,
    pub eigenfunction: Vec<f64>,
    pub density: Vec<f64>,
    /// `|B v - rho v|` of the converged eigenpair in the symmetric form.
    pub residual_norm: f64,
    /// Rayleigh quotient of the eigenfunction re-evaluated by quadrature;
    /// a lower-bound witness independent of the eigensolve.
    pub certified_rayleigh_lb: f64,
    pub n_points: usize,
    pub h: f64,
    pub window: (f64, f64),
    pub n_adjusted: bool,
}

/// Solve for the gap: Sturm bisection for `lambda_1`, inverse iteration for
/// the eigenvector (50 iterations, residual 1e-8).
pub fn solve_gap(p: &SpectralProblem) -> Result<GapResult, SpectralError> {
    let n = p.n();
    let b = p.matrix();
    let lambda1 = b.eigenvalue(1, 1e-10);
    if lambda1.is_nan() || lambda1 <= 0.0 {
        return Err(SpectralError::NonPositiveGap { lambda1 });
    }

    // The kernel of B is known analytically: D^{1/2} 1.
    let mut kernel: Vec<f64> = p.weights.iter().map(|&f| f.sqrt()).collect();
    let knorm = kernel.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in kernel.iter_mut() {
        *x /= knorm;
    }

    const MAX_ITER: usize = 50;
    const RES_TOL: f64 = 1e-8;
    let (v, _rho, residual) = b.inverse_iteration(lambda1, Some(&kernel), MAX_ITER, RES_TOL);
    if residual > RES_TOL {
        return Err(SpectralError::InverseIteration {
            residual,
            iterations: MAX_ITER,
        });
    }

    // Back to the generalized problem: g = D^{-1/2} v, normalized to unit
    // variance under the discrete measure, right end positive.
    let mut g: Vec<f64> = (0..n).map(|i| v[i] / p.weights[i].sqrt()).collect();
    let mean = p.expect(&g);
    for x in g.iter_mut() {
        *x -= mean;
    }
    let var = p.expect(&g.iter().map(|&x| x * x).collect::<Vec<_>>());
    let scale = 1.0 / var.sqrt();
    for x in g.iter_mut() {
        *x *= scale;
    }
    if g[n - 1] < 0.0 {
        for x in g.iter_mut() {
            *x = -*x;
        }
    }

    let var_g = p.expect(&g.iter().map(|&x| x * x).collect::<Vec<_>>()) - p.expect(&g).powi(2);
    let dg = p.gradient(&g);
    let energy = p.expect(&dg.iter().map(|&x| x * x).collect::<Vec<_>>());
    let certified_rayleigh_lb = var_g / energy;

    Ok(GapResult {
        lambda1,
        r_estimate: 1.0 / lambda1,
        grid: p.grid(),
        eigenfunction: g,
        density: p.weights.clone(),
        residual_norm: residual,
        certified_rayleigh_lb,
        n_points: n,
        h: p.h,
        window: p.window(),
        n_adjusted: p.n_adjusted,
    })
}

/// Assemble and solve in one call.
pub fn gap_estimate(
    m: &SmoothedMixture,
    n_points: usize,
    width: f64,
) -> Result<GapResult, SpectralError> {
    solve_gap(&assemble(m, n_points, width)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::DiscreteAtoms;

    fn two_point(tau: f64) -> SmoothedMixture {
        let d = DiscreteAtoms::new([(1.0, 0.5), (-1.0, 0.5)]).unwrap();
        SmoothedMixture::new(d, tau).unwrap()
    }

    #[test]
    fn assembly_validates_arguments() {
        let g = SmoothedMixture::gaussian(1.0).unwrap();
        assert!(matches!(
            assemble(&g, 100, 10.0),
            Err(SpectralError::BadGrid { .. })
        ));
        assert!(matches!(
            assemble(&g, 99, 10.0),
            Err(SpectralError::BadGrid { .. })
        ));
        assert!(matches!(
            assemble(&g, 2001, 5.0),
            Err(SpectralError::BadWidth { .. })
        ));
        // width 6 leaves e^{-18} ~ 1.5e-8 of the peak at the boundary.
        assert!(matches!(
            assemble(&g, 2001, 6.0),
            Err(SpectralError::WindowTooNarrow { .. })
        ));
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let g = SmoothedMixture::gaussian(1.0).unwrap();
        let p = assemble(&g, 2001, 10.0).unwrap();
        let lambda0 = p.matrix().eigenvalue(0, 1e-10);
        assert!(lambda0.abs() < 1e-8, "lambda_0 = {lambda0:e}");
    }

    #[test]
    fn stencil_applies_ou_operator_to_identity() {
        // For the standard normal, -D_Y x = x: check A x ~ 1 * D x away from
        // the (negligible-density) boundary rows.
        let g = SmoothedMixture::gaussian(1.0).unwrap();
        let p = assemble(&g, 2001, 10.0).unwrap();
        let n = p.n();
        let h2 = p.h() * p.h();
        for i in (n / 4)..(3 * n / 4) {
            let x = p.grid_point(i);
            let ax = -(p.midpoint_density()[i] * (p.grid_point(i + 1) - x)
                - p.midpoint_density()[i - 1] * (x - p.grid_point(i - 1)))
                / h2;
            let dx = p.node_density()[i] * x;
            assert!(
                (ax - dx).abs() <= 1e-4 * (1.0 + dx.abs()),
                "row {i}: A x = {ax}, D x = {dx}"
            );
        }
    }

    #[test]
    fn ou_gap_is_one() {
        let g = SmoothedMixture::gaussian(1.0).unwrap();
        let result = gap_estimate(&g, 2001, 10.0).unwrap();
        assert!(
            (result.lambda1 - 1.0).abs() < 1e-3,
            "lambda_1 = {}",
            result.lambda1
        );
        assert!((result.r_estimate - 1.0).abs() < 1e-3);
        assert!(result.residual_norm <= 1e-8);
        assert!(result.certified_rayleigh_lb <= result.r_estimate + 1e-3);
    }

    #[test]
    fn two_point_sits_in_the_sandwich() {
        let m = two_point(1.0);
        let result = gap_estimate(&m, 2001, 10.0).unwrap();
        assert!(result.r_estimate >= 2.0, "r = {}", result.r_estimate);
        assert!(result.r_estimate <= 1.0 + 2.0 * std::f64::consts::E.powi(2));
    }

    #[test]
    fn small_tau_triggers_grid_refinement() {
        let m = two_point(1e-3);
        let p = assemble(&m, 101, 10.0).unwrap();
        assert!(p.n_adjusted());
        assert!(p.h() <= m.tau().sqrt() / 4.0 + 1e-15);
        let tiny =
            SmoothedMixture::new(DiscreteAtoms::new([(1.0, 0.5), (-1.0, 0.5)]).unwrap(), 1e-9)
                .unwrap();
        assert!(matches!(
            assemble(&tiny, 101, 10.0),
            Err(SpectralError::GridCannotResolve { .. })
        ));
    }

    #[test]
    fn eigenfunction_is_normalized_and_deterministic() {
        let m = two_point(1.0);
        let a = gap_estimate(&m, 1001, 10.0).unwrap();
        let b = gap_estimate(&m, 1001, 10.0).unwrap();
        assert_eq!(a.eigenfunction, b.eigenfunction);
        let p = assemble(&m, 1001, 10.0).unwrap();
        let mean = p.expect(&a.eigenfunction);
        let var = p.expect(&a.eigenfunction.iter().map(|&x| x * x).collect::<Vec<_>>());
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-10);
        assert!(a.eigenfunction[p.n() - 1] >= 0.0);
    }
}
