//! Closed-form and criterion-based bounds on the Poincaré constant,
//! assembled into a provenance-labeled sandwich report.
//!
//! Lower bounds come from test functions (variance from `g = x`, the
//! fourth-moment bound from `g = x^2 - 1`, and optionally the best
//! polynomial Rayleigh quotient). The certified upper bound is the mixture
//! constant `tau (1 + s e^s)` with `s = sigma^2 / (tau min_s p_s)`. The
//! tail-ratio scan `sup_x T(x)` with
//! `T(x) = (int_x^inf y f) / f(x)` is reported alongside as a criterion
//! diagnostic: it certifies *some* finite constant exists but its exact
//! relation to `R_Y` carries an unspecified universal factor, so it never
//! enters `chosen_upper`.

use crate::mixture::{DiscreteAtoms, MixtureError, SmoothedMixture, SpanStats, DEFAULT_WINDOW};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("tail ratio still increasing at the scan edge x = {edge_x}; widen the window")]
    EdgeIncreasing { edge_x: f64 },
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// Upper bound `tau (1 + s e^s)`, `s = sigma^2 / (tau min_s p_s)`, valid for
/// any discrete distribution smoothed by N(0, tau). Shift-invariant; returns
/// `tau` itself when the discrete part is a point mass.
pub fn thm13_bound(m: &SmoothedMixture) -> f64 {
    let sigma2 = m.discrete().variance();
    let tau = m.tau();
    let s = sigma2 / (tau * m.discrete().min_prob());
    tau * (1.0 + s * s.exp())
}

/// Span/partial-mean statistics of a centered discrete distribution; see
/// [`SpanStats`] for the two inequalities checked.
pub fn span_stats(d: &DiscreteAtoms) -> Result<SpanStats, MixtureError> {
    SpanStats::compute(d)
}

/// Test-function lower bounds on `R_Y`.
#[derive(Debug, Clone, Copy)]
pub struct LowerBounds {
    /// `Var(Y)`, attained by `g = x`; equality iff `Y` is normal.
    pub variance_lb: f64,
    /// `(E U^4 - 1)/4` on the standardized mixture `U`, rescaled by
    /// `Var(Y)`; comes from `g = x^2 - 1`.
    pub fourth_moment_lb: f64,
}

pub fn lower_bounds(m: &SmoothedMixture) -> LowerBounds {
    let variance = m.variance();
    let u = m.standardize();
    let eu4 = u.central_moment_unchecked(4);
    LowerBounds {
        variance_lb: variance,
        fourth_moment_lb: variance * (eu4 - 1.0) / 4.0,
    }
}

/// One point of the tail-ratio curve.
#[derive(Debug, Clone, Copy)]
pub struct BuPoint {
    pub x: f64,
    pub tail_moment: f64,
    pub density: f64,
    pub ratio: f64,
}

/// Result of [`bu_ratio_scan`]. Coordinates are for the centered mixture;
/// add `center_shift` to map back to the input scale.
#[derive(Debug, Clone)]
pub struct BuScan {
    pub sup: f64,
    pub argmax: f64,
    pub curve: Vec<BuPoint>,
    pub center_shift: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BuScanOpts {
    pub grid_points: usize,
    pub window_mult: f64,
    /// Absolute x-tolerance of the golden-section refinement.
    pub refine_tol: f64,
}

impl Default for BuScanOpts {
    fn default() -> Self {
        Self {
            grid_points: 4001,
            window_mult: DEFAULT_WINDOW,
            refine_tol: 1e-10,
        }
    }
}

/// Scan `T(x) = tail_first_moment(x) / f(x)` on a symmetric grid covering
/// the quadrature window, then refine the coarse maximum by golden section.
/// `sup_x T(x)` is the criterion diagnostic discussed at module level.
pub fn bu_ratio_scan(m: &SmoothedMixture, opts: &BuScanOpts) -> Result<BuScan, BoundsError> {
    let (centered, shift) = m.center();
    let (lo, hi) = centered.window(opts.window_mult);
    let half = lo.abs().max(hi.abs());
    let n = opts.grid_points.max(3);
    let h = 2.0 * half / (n - 1) as f64;

    let ratio_at = |x: f64| -> Result<f64, BoundsError> {
        let tail = centered.tail_first_moment(x)?;
        Ok(tail / centered.pdf(x))
    };

    let mut curve = Vec::with_capacity(n);
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..n {
        let x = -half + i as f64 * h;
        let tail = centered.tail_first_moment(x)?;
        let density = centered.pdf(x);
        let ratio = tail / density;
        if ratio > best.1 {
            best = (i, ratio);
        }
        curve.push(BuPoint {
            x,
            tail_moment: tail,
            density,
            ratio,
        });
    }

    let (imax, coarse_sup) = best;
    let edge_tol = 1e-12 * (1.0 + coarse_sup.abs());
    if imax == n - 1 && curve[n - 1].ratio > curve[n - 2].ratio + edge_tol {
        return Err(BoundsError::EdgeIncreasing {
            edge_x: curve[n - 1].x,
        });
    }
    if imax == 0 && curve[0].ratio > curve[1].ratio + edge_tol {
        return Err(BoundsError::EdgeIncreasing { edge_x: curve[0].x });
    }

    // Golden-section refinement on the bracket around the coarse maximum.
    let a = curve[imax.saturating_sub(1)].x;
    let b = curve[(imax + 1).min(n - 1)].x;
    let (x_ref, sup_ref) = golden_max(&ratio_at, a, b, opts.refine_tol)?;
    let (argmax, sup) = if sup_ref >= coarse_sup {
        (x_ref, sup_ref)
    } else {
        (curve[imax].x, coarse_sup)
    };

    Ok(BuScan {
        sup,
        argmax,
        curve,
        center_shift: shift,
    })
}

fn golden_max<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64), BoundsError>
where
    F: Fn(f64) -> Result<f64, BoundsError>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Outcome of the exponential-moment criterion
/// `E exp(|Y - EY| / (12 sqrt(r_upper))) <= 2`, which holds whenever
/// `r_upper` dominates the true constant.
#[derive(Debug, Clone, Copy)]
pub struct MomentTailCheck {
    pub value: f64,
    pub pass: bool,
}

pub fn moment_tail_check(
    m: &SmoothedMixture,
    r_upper: f64,
) -> Result<MomentTailCheck, MixtureError> {
    assert!(r_upper > 0.0, "r_upper must be positive");
    let value = m.exp_abs_moment(1.0 / (12.0 * r_upper.sqrt()))?;
    Ok(MomentTailCheck {
        value,
        pass: value <= 2.0,
    })
}

/// The full sandwich of lower and upper bounds with provenance labels.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub variance_lb: f64,
    pub fourth_moment_lb: f64,
    /// Best polynomial Rayleigh-quotient lower bound, filled by the caller
    /// from the spectral module.
    pub rayleigh_lb: Option<f64>,
    pub thm13_ub: f64,
    /// `sup_x T(x)` — diagnostic only, never part of `chosen_upper`.
    pub bu_ratio_ub: f64,
    pub bu_argmax: f64,
    /// Propagated bound for mixtures built as convolutions, when available.
    pub subadditive_ub: Option<f64>,
    pub chosen_lower: f64,
    pub chosen_lower_source: &'static str,
    pub chosen_upper: f64,
    pub chosen_upper_source: &'static str,
}

impl BoundReport {
    pub fn with_rayleigh(mut self, rayleigh_lb: f64) -> Self {
        self.rayleigh_lb = Some(rayleigh_lb);
        self.recompute_chosen();
        self
    }

    pub fn with_subadditive(mut self, subadditive_ub: f64) -> Self {
        self.subadditive_ub = Some(subadditive_ub);
        self.recompute_chosen();
        self
    }

    fn recompute_chosen(&mut self) {
        let mut lower = (self.variance_lb, "variance");
        if self.fourth_moment_lb > lower.0 {
            lower = (self.fourth_moment_lb, "fourth-moment");
        }
        if let Some(r) = self.rayleigh_lb {
            if r > lower.0 {
                lower = (r, "rayleigh");
            }
        }
        let mut upper = (self.thm13_ub, "thm13");
        if let Some(s) = self.subadditive_ub {
            if s < upper.0 {
                upper = (s, "subadditive");
            }
        }
        self.chosen_lower = lower.0;
        self.chosen_lower_source = lower.1;
        self.chosen_upper = upper.0;
        self.chosen_upper_source = upper.1;
    }
}

/// Assemble the closed-form part of the sandwich (everything except the
/// spectral estimate and polynomial Rayleigh bound).
pub fn bound_report(m: &SmoothedMixture, opts: &BuScanOpts) -> Result<BoundReport, BoundsError> {
    let lb = lower_bounds(m);
    let scan = bu_ratio_scan(m, opts)?;
    let mut report = BoundReport {
        variance_lb: lb.variance_lb,
        fourth_moment_lb: lb.fourth_moment_lb,
        rayleigh_lb: None,
        thm13_ub: thm13_bound(m),
        bu_ratio_ub: scan.sup,
        bu_argmax: scan.argmax,
        subadditive_ub: None,
        chosen_lower: 0.0,
        chosen_lower_source: "",
        chosen_upper: 0.0,
        chosen_upper_source: "",
    };
    report.recompute_chosen();
    Ok(report)
}
