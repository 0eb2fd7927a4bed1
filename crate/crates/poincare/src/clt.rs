//! Central-limit machinery: the exact powers-of-2 self-convolution
//! experiment, the scalar recursion that yields the `O(1/n)` rate, and
//! numeric checks of the two projection lemmas behind it.
//!
//! The doubling map is `S_{k+1} = standardize(S_k * S_k)` (convolution), so
//! `S_k` is the standardized sum of `2^k` iid copies. Along the way the
//! Poincaré estimate decreases toward 1, the fourth cumulant halves exactly,
//! and the dynamical-system inequality
//! `(R_{k+1} - 1)^2 <= C (R_k - R_{k+1})` holds with
//! `C = 18 R (I R + 1)` built from level-0 measurements.

use crate::bounds::thm13_bound;
use crate::mixture::{
    ConvolveOpts, MixtureError, SmoothedMixture, DEFAULT_ATOM_CAP, DEFAULT_MERGE_TOL,
};
use crate::spectral::{self, expect_poly, PolyFn, SpectralError};
use thiserror::Error;

/// Doubling levels above this produce atom counts past any reasonable cap.
pub const MAX_DOUBLING_LEVELS: u32 = 10;

#[derive(Debug, Error)]
pub enum CltError {
    #[error("levels {levels} above the doubling cap {max}")]
    TooManyLevels { levels: u32, max: u32 },
    #[error("u1 must lie in (0, 1], got {u1}")]
    BadU1 { u1: f64 },
    #[error("need at least one recursion step")]
    NoSteps,
    #[error("test function degree {degree} outside {min}..={max}")]
    DegreeRange {
        degree: usize,
        min: usize,
        max: usize,
    },
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy)]
pub struct CltConfig {
    pub grid_points: usize,
    pub width: f64,
    pub atom_cap: usize,
    pub merge_tol: f64,
    /// Absolute tolerance of the Fisher-information quadrature.
    pub quad_tol: f64,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            grid_points: spectral::DEFAULT_GRID_POINTS,
            width: spectral::DEFAULT_WIDTH,
            atom_cap: DEFAULT_ATOM_CAP,
            merge_tol: DEFAULT_MERGE_TOL,
            quad_tol: 1e-9,
        }
    }
}

/// Per-level diagnostics of the doubling experiment.
#[derive(Debug, Clone)]
pub struct CltLevel {
    pub level: u32,
    /// `n = 2^level` summands.
    pub n: u64,
    pub r_estimate: f64,
    pub thm13_ub: f64,
    pub fisher: f64,
    pub kappa4: f64,
    pub atom_count: usize,
    /// `n (r_estimate - 1)`, bounded by `C` when the rate theorem holds.
    pub rate_product: f64,
    /// `C (R_k - R_{k+1}) - (R_{k+1} - 1)^2` for the transition out of this
    /// level; `None` on the last level.
    pub dynsys_residual: Option<f64>,
    /// Per-transition constant `18 R_{k+1}^2 (1/R_k + I_k)`, recorded for
    /// comparison with the level-0 `C`; `None` on the last level.
    pub c_local: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CltHalt {
    pub level: u32,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CltTrace {
    pub levels: Vec<CltLevel>,
    /// `18 R (I R + 1)` from the level-0 chosen upper bound and Fisher
    /// information.
    pub c_used: f64,
    /// Set when a level failed (atom cap, eigensolver); the trace keeps the
    /// completed levels.
    pub halted: Option<CltHalt>,
}

/// Run the doubling experiment from `m0` (standardized internally) through
/// level `levels` inclusive.
pub fn run_doubling(
    m0: &SmoothedMixture,
    levels: u32,
    config: &CltConfig,
) -> Result<CltTrace, CltError> {
    if levels > MAX_DOUBLING_LEVELS {
        return Err(CltError::TooManyLevels {
            levels,
            max: MAX_DOUBLING_LEVELS,
        });
    }
    let conv_opts = ConvolveOpts {
        atom_cap: config.atom_cap,
        merge_tol: config.merge_tol,
    };

    let mut trace = CltTrace {
        levels: Vec::with_capacity(levels as usize + 1),
        c_used: f64::NAN,
        halted: None,
    };
    let mut current = m0.standardize();

    for k in 0..=levels {
        let measured = measure_level(&current, k, config);
        let level = match measured {
            Ok(level) => level,
            Err(err) => {
                trace.halted = Some(CltHalt {
                    level: k,
                    reason: err.to_string(),
                });
                break;
            }
        };
        if k == 0 {
            let r0 = level.thm13_ub;
            let i0 = level.fisher;
            trace.c_used = 18.0 * r0 * (i0 * r0 + 1.0);
        }
        if let Some(prev) = trace.levels.last_mut() {
            let r_prev = prev.r_estimate;
            let r_next = level.r_estimate;
            prev.dynsys_residual =
                Some(trace.c_used * (r_prev - r_next) - (r_next - 1.0) * (r_next - 1.0));
            prev.c_local = Some(18.0 * r_next * r_next * (1.0 / r_prev + prev.fisher));
        }
        trace.levels.push(level);

        if k < levels {
            match current.convolve_with(&current, &conv_opts) {
                Ok(sum) => current = sum.standardize(),
                Err(err) => {
                    trace.halted = Some(CltHalt {
                        level: k + 1,
                        reason: err.to_string(),
                    });
                    break;
                }
            }
        }
    }
    Ok(trace)
}

fn measure_level(s: &SmoothedMixture, k: u32, config: &CltConfig) -> Result<CltLevel, CltError> {
    let gap = spectral::gap_estimate(s, config.grid_points, config.width)?;
    let fisher = s.fisher_info_with(
        crate::mixture::DEFAULT_WINDOW,
        crate::quad::QuadOpts {
            abs_tol: config.quad_tol,
            max_depth: 48,
        },
    )?;
    let n = 1u64 << k;
    Ok(CltLevel {
        level: k,
        n,
        r_estimate: gap.r_estimate,
        thm13_ub: thm13_bound(s),
        fisher,
        kappa4: s.fourth_cumulant(),
        atom_count: s.atom_count(),
        rate_product: n as f64 * (gap.r_estimate - 1.0),
        dynsys_residual: None,
        c_local: None,
    })
}

/// Extremal trajectory of `u_k (1 + u_k) = u_{k-1}` with the two bound
/// families it must satisfy.
#[derive(Debug, Clone)]
pub struct RecursionTrace {
    /// `u[i]` is `u_{i+1}`; the sequence starts at `u_1`.
    pub u: Vec<f64>,
    /// `u_{2^r} <= 4 / 2^r` for every power of two in range.
    pub pow2_bound_ok: bool,
    /// `u_k <= 16 / k` for every `k` in range.
    pub fill_bound_ok: bool,
}

/// Iterate the positive root `u_k = (-1 + sqrt(1 + 4 u_{k-1})) / 2` from
/// `u_1` for `steps` terms. Any sequence satisfying the inequality form is
/// dominated by this trajectory.
pub fn recursion_extremal(u1: f64, steps: usize) -> Result<RecursionTrace, CltError> {
    if !(u1 > 0.0 && u1 <= 1.0) {
        return Err(CltError::BadU1 { u1 });
    }
    if steps == 0 {
        return Err(CltError::NoSteps);
    }
    let mut u = Vec::with_capacity(steps);
    u.push(u1);
    for _ in 1..steps {
        let prev = u[u.len() - 1];
        u.push(0.5 * (-1.0 + (1.0 + 4.0 * prev).sqrt()));
    }

    let mut pow2_bound_ok = true;
    let mut r = 0u32;
    while (1usize << r) <= steps {
        let k = 1usize << r;
        if u[k - 1] > 4.0 / k as f64 {
            pow2_bound_ok = false;
        }
        r += 1;
    }
    let fill_bound_ok = u
        .iter()
        .enumerate()
        .all(|(i, &uk)| uk <= 16.0 / (i + 1) as f64);

    Ok(RecursionTrace {
        u,
        pow2_bound_ok,
        fill_bound_ok,
    })
}

/// One projection-inequality check: for independent `X = N(0, x_tau)` and a
/// smoothed mixture `Y`,
/// `Var g(X+Y) <= (R_X + R_Y) E g'(X+Y)^2 - (R_X / (R_X I(Y) + 1)) Var g'(X+Y)`.
/// `R_Y` is replaced by its certified upper bound and `I(Y)` by `1/tau_Y`;
/// both substitutions only enlarge the right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct RdecCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn lemma_rdec_check(
    x_tau: f64,
    y: &SmoothedMixture,
    g: &PolyFn,
) -> Result<RdecCheck, CltError> {
    assert!(x_tau > 0.0, "x_tau must be positive");
    if g.degree() < 1 || g.degree() > 6 {
        return Err(CltError::DegreeRange {
            degree: g.degree(),
            min: 1,
            max: 6,
        });
    }
    let x = SmoothedMixture::gaussian(x_tau)?;
    let w = x.convolve(y)?;

    let mean_g = expect_poly(&w, g);
    let mean_g2 = expect_poly(&w, &g.mul(g));
    let var_g = mean_g2 - mean_g * mean_g;
    let dg = g.derivative();
    let mean_dg = expect_poly(&w, &dg);
    let mean_dg2 = expect_poly(&w, &dg.mul(&dg));
    if mean_dg2 < 1e-14 {
        return Err(CltError::Spectral(SpectralError::DegeneratePoly {
            energy: mean_dg2,
        }));
    }
    let var_dg = mean_dg2 - mean_dg * mean_dg;

    let r_x = x_tau; // exact for a Gaussian
    let r_y_upper = thm13_bound(y);
    let fisher_y_upper = 1.0 / y.tau();
    let rhs = (r_x + r_y_upper) * mean_dg2 - r_x / (r_x * fisher_y_upper + 1.0) * var_dg;
    let lhs = var_g;
    Ok(RdecCheck {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-9 * rhs.abs(),
    })
}

/// Near-linear-test-function check: shift `h` to `g = h + t0 x` at the
/// stationary maximum `t0` of `r(t) = Var(h + tW)/E(h' + t)^2`, then verify
/// `Var g / E g'^2 - Var(W) <= 3 R_W sqrt(delta_g)` with the certified upper
/// bound standing in for `R_W`.
#[derive(Debug, Clone, Copy)]
pub struct GbdCheck {
    /// `Var g / E g'^2 - Var(W)`; zero in the linear limit.
    pub lhs: f64,
    /// `3 R_upper sqrt(delta_g)`.
    pub rhs: f64,
    /// Stationary maximizer; infinite when the ratio has no finite maximum.
    pub t0: f64,
    /// `Var g'(W) / E g'(W)^2`.
    pub delta_g: f64,
    /// The sharper diagnostic `R_upper sqrt(delta / (1 - delta))`.
    pub tighter_rhs: f64,
    /// True when the ratio attains its supremum only at infinity and the
    /// linear limit (`delta_g = 0`, `lhs = 0`) was returned.
    pub linear_limit: bool,
    pub pass: bool,
}

pub fn lemma_gbd_check(w: &SmoothedMixture, h: &PolyFn) -> Result<GbdCheck, CltError> {
    let mean = w.mean();
    if mean.abs() > 1e-10 {
        return Err(CltError::Mixture(MixtureError::NotCentered { mean }));
    }
    if h.degree() < 1 || h.degree() > spectral::MAX_POLY_DEGREE {
        return Err(CltError::DegreeRange {
            degree: h.degree(),
            min: 1,
            max: spectral::MAX_POLY_DEGREE,
        });
    }

    let variance = w.variance();
    let mean_h = expect_poly(w, h);
    let mean_h2 = expect_poly(w, &h.mul(h));
    let var_h = mean_h2 - mean_h * mean_h;
    let cov_hw = expect_poly(w, &h.mul(&PolyFn::identity())); // E W = 0
    let dh = h.derivative();
    let mu = expect_poly(w, &dh);
    let energy_h = expect_poly(w, &dh.mul(&dh));

    // Stationarity of r(t) = (A + 2Bt + Vt^2)/(P + 2mu t + t^2) is the
    // quadratic (V mu - B) t^2 + (V P - A) t + (B P - A mu) = 0.
    let a2 = variance * mu - cov_hw;
    let a1 = variance * energy_h - var_h;
    let a0 = cov_hw * energy_h - var_h * mu;
    let scale = a2.abs().max(a1.abs()).max(a0.abs()).max(1e-300);

    let ratio_at = |t: f64| -> f64 {
        (var_h + 2.0 * cov_hw * t + variance * t * t) / (energy_h + 2.0 * mu * t + t * t)
    };

    let mut candidates: Vec<f64> = Vec::new();
    if a2.abs() > 1e-14 * scale {
        let disc = a1 * a1 - 4.0 * a2 * a0;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            candidates.push((-a1 + sq) / (2.0 * a2));
            candidates.push((-a1 - sq) / (2.0 * a2));
        }
    } else if a1.abs() > 1e-14 * scale {
        candidates.push(-a0 / a1);
    }

    let best = candidates
        .into_iter()
        .filter(|t| t.is_finite())
        .map(|t| (t, ratio_at(t)))
        .max_by(|a, b| a.1.total_cmp(&b.1));

    let linear_limit = match best {
        Some((_, r)) => r <= variance * (1.0 + 1e-12),
        None => true,
    };
    if linear_limit {
        return Ok(GbdCheck {
            lhs: 0.0,
            rhs: 0.0,
            t0: f64::INFINITY,
            delta_g: 0.0,
            tighter_rhs: 0.0,
            linear_limit: true,
            pass: true,
        });
    }
    let (t0, r0) = best.expect("checked above");

    let denom = energy_h + 2.0 * mu * t0 + t0 * t0; // E g'^2
    if denom < 1e-14 {
        return Err(CltError::Spectral(SpectralError::DegeneratePoly {
            energy: denom,
        }));
    }
    let var_dg = energy_h - mu * mu; // g' = h' + t0, so Var g' = Var h'
    let delta_g = (var_dg / denom).clamp(0.0, 1.0);
    let lhs = r0 - variance;
    let r_upper = thm13_bound(w);
    let rhs = 3.0 * r_upper * delta_g.sqrt();
    let tighter_rhs = if delta_g < 1.0 {
        r_upper * (delta_g / (1.0 - delta_g)).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(GbdCheck {
        lhs,
        rhs,
        t0,
        delta_g,
        tighter_rhs,
        linear_limit: false,
        pass: lhs <= rhs + 1e-9 * (1.0 + rhs.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::DiscreteAtoms;

    fn two_point(tau: f64) -> SmoothedMixture {
        let d = DiscreteAtoms::new([(1.0, 0.5), (-1.0, 0.5)]).unwrap();
        SmoothedMixture::new(d, tau).unwrap()
    }

    fn quick_config() -> CltConfig {
        CltConfig {
            grid_points: 1001,
            ..CltConfig::default()
        }
    }

    #[test]
    fn kappa4_halves_and_variance_stays_one() {
        let trace = run_doubling(&two_point(0.5), 4, &quick_config()).unwrap();
        assert!(trace.halted.is_none());
        assert_eq!(trace.levels.len(), 5);
        for pair in trace.levels.windows(2) {
            let ratio = pair[1].kappa4 / pair[0].kappa4;
            assert!(
                (ratio - 0.5).abs() < 1e-12,
                "kappa4 ratio {ratio} at level {}",
                pair[1].level
            );
        }
        // Lattice support: level k has 2^k + 1 atoms.
        for l in &trace.levels {
            assert_eq!(l.atom_count, (1usize << l.level) + 1);
        }
    }

    #[test]
    fn gaussian_start_is_a_fixed_point() {
        let g = SmoothedMixture::gaussian(2.0).unwrap();
        let trace = run_doubling(&g, 3, &quick_config()).unwrap();
        for l in &trace.levels {
            assert!(
                (l.r_estimate - 1.0).abs() < 1e-3,
                "level {}: r = {}",
                l.level,
                l.r_estimate
            );
            assert!(l.kappa4.abs() < 1e-12);
        }
    }

    #[test]
    fn r_estimates_decrease_and_dynsys_holds() {
        let trace = run_doubling(&two_point(0.5), 4, &quick_config()).unwrap();
        let c = trace.c_used;
        assert!(c.is_finite() && c > 0.0);
        for pair in trace.levels.windows(2) {
            assert!(pair[1].r_estimate <= pair[0].r_estimate + 5e-3);
        }
        for l in &trace.levels[..trace.levels.len() - 1] {
            let residual = l.dynsys_residual.unwrap();
            assert!(
                residual >= -1e-6 * (1.0 + c),
                "level {}: residual {residual}",
                l.level
            );
            assert!(l.c_local.unwrap() > 0.0);
        }
        assert!(trace.levels.last().unwrap().dynsys_residual.is_none());
    }

    #[test]
    fn doubling_rejects_too_many_levels() {
        assert!(matches!(
            run_doubling(&two_point(0.5), 11, &quick_config()),
            Err(CltError::TooManyLevels { .. })
        ));
    }

    #[test]
    fn doubling_halts_gracefully_on_atom_cap() {
        let config = CltConfig {
            atom_cap: 8,
            ..quick_config()
        };
        let trace = run_doubling(&two_point(0.5), 6, &config).unwrap();
        let halt = trace.halted.expect("must halt");
        assert!(halt.reason.contains("cap"));
        assert!(!trace.levels.is_empty());
        assert!(trace.levels.len() < 7);
    }

    #[test]
    fn recursion_first_step_is_golden() {
        let trace = recursion_extremal(1.0, 8).unwrap();
        assert!((trace.u[0] - 1.0).abs() < 1e-15);
        assert!((trace.u[1] - (5.0f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!(trace.pow2_bound_ok && trace.fill_bound_ok);
    }

    #[test]
    fn recursion_defines_the_iteration_exactly() {
        let trace = recursion_extremal(0.83, 4000).unwrap();
        for pair in trace.u.windows(2) {
            let (prev, next) = (pair[0], pair[1]);
            assert!(next > 0.0 && next < prev);
            assert!((next * (1.0 + next) - prev).abs() <= 1e-14 * (1.0 + prev));
        }
    }

    #[test]
    fn recursion_rejects_bad_start() {
        assert!(matches!(
            recursion_extremal(1.5, 10),
            Err(CltError::BadU1 { .. })
        ));
        assert!(matches!(
            recursion_extremal(0.0, 10),
            Err(CltError::BadU1 { .. })
        ));
        assert!(matches!(recursion_extremal(1.0, 0), Err(CltError::NoSteps)));
    }

    #[test]
    fn rdec_linear_test_function() {
        let g = PolyFn::new(vec![0.3, 2.0]); // 0.3 + 2x
        let check = lemma_rdec_check(1.0, &two_point(1.0), &g).unwrap();
        assert!(check.pass);
        // Var g' = 0, so RHS = (R_X + R_Y) E g'^2 while LHS = Var(W) c^2.
        let w_var = 1.0 + two_point(1.0).variance();
        assert!((check.lhs - 4.0 * w_var).abs() < 1e-10);
        assert!(check.rhs >= check.lhs);
    }

    #[test]
    fn rdec_centered_quadratic() {
        let y = two_point(1.0);
        // g = x^2 - E(X+Y)^2 with X = N(0,1): E W^2 = 3.
        let g = PolyFn::new(vec![-3.0, 0.0, 1.0]);
        let check = lemma_rdec_check(1.0, &y, &g).unwrap();
        assert!(check.pass, "lhs {} rhs {}", check.lhs, check.rhs);
    }

    #[test]
    fn rdec_rejects_degenerate_degree() {
        let y = two_point(1.0);
        assert!(matches!(
            lemma_rdec_check(1.0, &y, &PolyFn::new(vec![1.0])),
            Err(CltError::DegreeRange { .. })
        ));
        assert!(matches!(
            lemma_rdec_check(1.0, &y, &PolyFn::monomial(7)),
            Err(CltError::DegreeRange { .. })
        ));
    }

    #[test]
    fn gbd_linear_h_is_the_degenerate_constant_ratio() {
        let check = lemma_gbd_check(&two_point(1.0), &PolyFn::identity()).unwrap();
        assert!(check.linear_limit);
        assert_eq!(check.lhs, 0.0);
        assert!(check.pass);
    }

    #[test]
    fn gbd_gaussian_square_hits_the_linear_limit() {
        // r(t) = (2 + t^2)/(4 + t^2) rises to 1 at infinity; the only
        // stationary point t = 0 is the minimum.
        let g = SmoothedMixture::gaussian(1.0).unwrap();
        let check = lemma_gbd_check(&g, &PolyFn::monomial(2)).unwrap();
        assert!(check.linear_limit);
        assert_eq!(check.lhs, 0.0);
        assert!(check.pass);
    }

    #[test]
    fn gbd_asymmetric_mixture_has_finite_maximum() {
        // Skewed centered mixture: E W^3 != 0 makes t0 finite for h = x^2.
        let d = DiscreteAtoms::new([(2.0, 0.2), (-0.5, 0.8)]).unwrap();
        let w = SmoothedMixture::new(d, 0.5).unwrap();
        let check = lemma_gbd_check(&w, &PolyFn::monomial(2)).unwrap();
        assert!(!check.linear_limit);
        assert!(check.t0.is_finite());
        assert!(check.lhs >= 0.0, "max must dominate the variance");
        assert!(check.delta_g > 0.0 && check.delta_g < 1.0);
        assert!(check.pass, "lhs {} rhs {}", check.lhs, check.rhs);
        assert!(check.tighter_rhs.is_finite());
    }

    #[test]
    fn gbd_requires_centering() {
        let d = DiscreteAtoms::new([(1.0, 0.7), (-1.0, 0.3)]).unwrap();
        let w = SmoothedMixture::new(d, 1.0).unwrap();
        assert!(matches!(
            lemma_gbd_check(&w, &PolyFn::monomial(2)),
            Err(CltError::Mixture(MixtureError::NotCentered { .. }))
        ));
    }
}
