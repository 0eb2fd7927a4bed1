//! Exact representation and closed-form arithmetic for Gaussian-smoothed
//! discrete distributions.
//!
//! A [`SmoothedMixture`] is `X + Z_tau` where `X` takes finitely many values
//! `a_1 > a_2 > ... > a_n` with probabilities `p_i` and `Z_tau` is an
//! independent N(0, tau). Its density is the mixture
//! `f(y) = sum_i p_i phi_tau(y - a_i)`, which keeps every operation in this
//! module closed-form: moments are binomial sums over atoms, convolution is
//! the pairwise atom sum, tail integrals and exponential moments reduce to
//! `Phi` evaluations.

use crate::gauss;
use crate::quad::{self, QuadError, QuadOpts};
use thiserror::Error;

/// Highest raw/central moment order served by the public accessors. Beyond
/// this the binomial sums start shedding digits.
pub const MAX_MOMENT: u32 = 16;

/// Internal ceiling for the polynomial machinery (Gram matrices of degree-12
/// test functions need moments up to order 26).
pub(crate) const MAX_INTERNAL_MOMENT: u32 = 32;

/// Default atom-count cap for convolutions.
pub const DEFAULT_ATOM_CAP: usize = 200_000;

/// Default relative merge tolerance: atoms closer than
/// `DEFAULT_MERGE_TOL * (1 + span)` collapse into one.
pub const DEFAULT_MERGE_TOL: f64 = 1e-9;

/// Default window half-width multiplier (in units of `sqrt(tau)`) beyond the
/// extreme atoms for quadrature-based operations.
pub const DEFAULT_WINDOW: f64 = 12.0;

#[derive(Debug, Error)]
pub enum MixtureError {
    #[error("a discrete distribution needs at least one atom")]
    Empty,
    #[error("atom {index} has non-finite value {value}")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("atom {index} has non-positive probability {prob}")]
    NonPositiveProb { index: usize, prob: f64 },
    #[error("atom probabilities sum to {sum}; more than 1e-9 away from 1")]
    BadNormalization { sum: f64 },
    #[error("smoothing variance must be positive and finite, got {tau}")]
    BadTau { tau: f64 },
    #[error("affine scale must be nonzero and finite")]
    BadScale,
    #[error("moment order {order} exceeds the supported maximum {max}")]
    MomentOrder { order: u32, max: u32 },
    #[error("convolution would produce {count} atoms, above the cap {cap}")]
    AtomCap { count: usize, cap: usize },
    #[error("operation requires a centered mixture; mean is {mean:e}")]
    NotCentered { mean: f64 },
    #[error("exponential moment overflows: log-scale {log_scale:.2} exceeds 700")]
    ExpOverflow { log_scale: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// One atom of the discrete part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Finitely supported distribution, atoms sorted by value strictly
/// decreasing. Probabilities are strictly positive and sum to 1 (up to
/// rounding); equal-value atoms are merged on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAtoms {
    atoms: Vec<Atom>,
}

impl DiscreteAtoms {
    /// Build from `(value, prob)` pairs in any order. Probabilities must sum
    /// to 1 within 1e-9; they are renormalized exactly afterwards.
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, MixtureError> {
        let pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(MixtureError::Empty);
        }
        let sum: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MixtureError::BadNormalization { sum });
        }
        Self::from_weights(pairs)
    }

    /// Build from `(value, weight)` pairs with arbitrary positive weights,
    /// normalizing to total mass 1.
    pub fn from_weights(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, MixtureError> {
        let mut atoms: Vec<Atom> = Vec::new();
        for (index, (value, prob)) in pairs.into_iter().enumerate() {
            if !value.is_finite() {
                return Err(MixtureError::NonFiniteValue { index, value });
            }
            if !prob.is_finite() || prob <= 0.0 {
                return Err(MixtureError::NonPositiveProb { index, prob });
            }
            atoms.push(Atom { value, prob });
        }
        if atoms.is_empty() {
            return Err(MixtureError::Empty);
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        for a in &mut atoms {
            a.prob /= total;
        }
        atoms.sort_by(|a, b| b.value.total_cmp(&a.value));
        let merged = merge_sorted(atoms, DEFAULT_MERGE_TOL);
        Ok(Self { atoms: merged })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one atom by construction
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[0].value
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].value
    }

    pub fn min_prob(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.prob)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.value).sum()
    }

    /// Variance, two-pass about the mean.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .map(|a| {
                let d = a.value - m;
                a.prob * d * d
            })
            .sum()
    }
}

/// Merge adjacent (sorted-descending) atoms closer than
/// `rel_tol * (1 + span)`; merged value is the probability-weighted mean.
fn merge_sorted(atoms: Vec<Atom>, rel_tol: f64) -> Vec<Atom> {
    let span = atoms[0].value - atoms[atoms.len() - 1].value;
    let tol = rel_tol * (1.0 + span);
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match merged.last_mut() {
            Some(last) if (last.value - atom.value).abs() <= tol => {
                let p = last.prob + atom.prob;
                last.value = (last.value * last.prob + atom.value * atom.prob) / p;
                last.prob = p;
            }
            _ => merged.push(atom),
        }
    }
    merged
}

/// Options for [`SmoothedMixture::convolve_with`].
#[derive(Debug, Clone, Copy)]
pub struct ConvolveOpts {
    pub atom_cap: usize,
    pub merge_tol: f64,
}

impl Default for ConvolveOpts {
    fn default() -> Self {
        Self {
            atom_cap: DEFAULT_ATOM_CAP,
            merge_tol: DEFAULT_MERGE_TOL,
        }
    }
}

/// Density, derivative, and score of a mixture at one point.
#[derive(Debug, Clone, Copy)]
pub struct PdfScore {
    pub density: f64,
    pub derivative: f64,
    /// `f'(x)/f(x)`, finite for every finite `x` even where the density
    /// underflows.
    pub score: f64,
}

/// Squared span, minimum probability, and partial means of a centered
/// discrete distribution, with the two technical inequalities they satisfy.
#[derive(Debug, Clone)]
pub struct SpanStats {
    /// Variance of the discrete part.
    pub sigma2: f64,
    /// `M = max` over adjacent sorted atoms of `|a_s^2 - a_{s+1}^2|` and
    /// `(a_s - a_{s+1})^2`.
    pub squared_span: f64,
    /// `min_s p_s`.
    pub pmin: f64,
    /// `u_j = sum_{i<=j} p_i a_i`; vanishes at `j = n` for centered input.
    pub partial_means: Vec<f64>,
    /// `u_j (a_j - a_{j+1}) <= sigma2` held for every adjacent pair.
    pub adjacent_ok: bool,
    /// `M * pmin <= 2 sigma2` held.
    pub span_ok: bool,
}

impl SpanStats {
    /// Compute the statistics for a centered discrete distribution
    /// (|mean| <= 1e-10 required).
    pub fn compute(d: &DiscreteAtoms) -> Result<Self, MixtureError> {
        let mean = d.mean();
        if mean.abs() > 1e-10 {
            return Err(MixtureError::NotCentered { mean });
        }
        let atoms = d.atoms();
        let sigma2 = d.variance();
        let pmin = d.min_prob();

        let mut squared_span = 0.0f64;
        for w in atoms.windows(2) {
            let (a, b) = (w[0].value, w[1].value);
            squared_span = squared_span
                .max((a * a - b * b).abs())
                .max((a - b) * (a - b));
        }

        let mut partial_means = Vec::with_capacity(atoms.len());
        let mut run = 0.0;
        for a in atoms {
            run += a.prob * a.value;
            partial_means.push(run);
        }

        // Comparisons carry a 1e-12 relative guard: the two-point case makes
        // u_j (a_j - a_{j+1}) = sigma2 an exact identity, which rounding can
        // tip either way.
        let slack = |rhs: f64| rhs * 1e-12 + 1e-300;
        let adjacent_ok = atoms
            .windows(2)
            .enumerate()
            .all(|(j, w)| partial_means[j] * (w[0].value - w[1].value) <= sigma2 + slack(sigma2));
        let span_ok = squared_span * pmin <= 2.0 * sigma2 + slack(2.0 * sigma2);

        Ok(Self {
            sigma2,
            squared_span,
            pmin,
            partial_means,
            adjacent_ok,
            span_ok,
        })
    }
}

/// A discrete distribution smoothed by an independent N(0, tau).
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedMixture {
    discrete: DiscreteAtoms,
    tau: f64,
}

impl SmoothedMixture {
    pub fn new(discrete: DiscreteAtoms, tau: f64) -> Result<Self, MixtureError> {
        if !tau.is_finite() || tau <= 0.0 {
            return Err(MixtureError::BadTau { tau });
        }
        Ok(Self { discrete, tau })
    }

    /// Pure N(0, tau): a single atom at the origin.
    pub fn gaussian(tau: f64) -> Result<Self, MixtureError> {
        Self::new(DiscreteAtoms::new([(0.0, 1.0)])?, tau)
    }

    pub fn discrete(&self) -> &DiscreteAtoms {
        &self.discrete
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn atom_count(&self) -> usize {
        self.discrete.len()
    }

    pub fn mean(&self) -> f64 {
        self.discrete.mean()
    }

    /// `Var(Y) = Var(X) + tau`, closed form.
    pub fn variance(&self) -> f64 {
        self.discrete.variance() + self.tau
    }

    /// Window `[min a - mult sqrt(tau), max a + mult sqrt(tau)]` containing
    /// all but `O(exp(-mult^2/2))` of the mass.
    pub fn window(&self, mult: f64) -> (f64, f64) {
        let pad = mult * self.tau.sqrt();
        (
            self.discrete.min_value() - pad,
            self.discrete.max_value() + pad,
        )
    }

    /// Density, derivative and score at `x`, evaluated in the log domain with
    /// a max-exponent shift so the score stays finite arbitrarily far from
    /// the support.
    pub fn pdf_score(&self, x: f64) -> PdfScore {
        assert!(x.is_finite(), "pdf_score requires finite x");
        let tau = self.tau;
        let mut max_exp = f64::NEG_INFINITY;
        for a in self.discrete.atoms() {
            let d = x - a.value;
            max_exp = max_exp.max(-d * d / (2.0 * tau));
        }
        let mut s0 = 0.0; // sum p_i w_i
        let mut s1 = 0.0; // sum p_i (-(x-a_i)/tau) w_i
        for a in self.discrete.atoms() {
            let d = x - a.value;
            let w = (-d * d / (2.0 * tau) - max_exp).exp();
            s0 += a.prob * w;
            s1 += a.prob * (-d / tau) * w;
        }
        let log_density = max_exp + s0.ln() - 0.5 * (2.0 * std::f64::consts::PI * tau).ln();
        let density = log_density.exp();
        let score = s1 / s0;
        PdfScore {
            density,
            derivative: score * density,
            score,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.pdf_score(x).density
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        assert!(x.is_finite(), "log_pdf requires finite x");
        let tau = self.tau;
        let mut max_exp = f64::NEG_INFINITY;
        for a in self.discrete.atoms() {
            let d = x - a.value;
            max_exp = max_exp.max(-d * d / (2.0 * tau));
        }
        let s0: f64 = self
            .discrete
            .atoms()
            .iter()
            .map(|a| {
                let d = x - a.value;
                a.prob * (-d * d / (2.0 * tau) - max_exp).exp()
            })
            .sum();
        max_exp + s0.ln() - 0.5 * (2.0 * std::f64::consts::PI * tau).ln()
    }

    /// Raw moment `E Y^k`, exact binomial sum over atoms and Gaussian central
    /// moments. Orders above [`MAX_MOMENT`] are rejected.
    pub fn moment(&self, k: u32) -> Result<f64, MixtureError> {
        if k > MAX_MOMENT {
            return Err(MixtureError::MomentOrder {
                order: k,
                max: MAX_MOMENT,
            });
        }
        Ok(self.raw_moment_unchecked(k))
    }

    /// Central moment `E (Y - EY)^k`, same closed form about the mean.
    pub fn central_moment(&self, k: u32) -> Result<f64, MixtureError> {
        if k > MAX_MOMENT {
            return Err(MixtureError::MomentOrder {
                order: k,
                max: MAX_MOMENT,
            });
        }
        Ok(self.central_moment_unchecked(k))
    }

    /// Fourth cumulant `kappa_4 = mu_4 - 3 mu_2^2` (central moments), the
    /// quantity that halves under standardized self-convolution.
    pub fn fourth_cumulant(&self) -> f64 {
        let mu2 = self.central_moment_unchecked(2);
        let mu4 = self.central_moment_unchecked(4);
        mu4 - 3.0 * mu2 * mu2
    }

    fn raw_moment_unchecked(&self, k: u32) -> f64 {
        let mut total = 0.0;
        for a in self.discrete.atoms() {
            let mut sum = 0.0;
            for j in (0..=k).step_by(2) {
                sum += gauss::binomial(k, j)
                    * a.value.powi((k - j) as i32)
                    * gauss::central_moment(self.tau, j);
            }
            total += a.prob * sum;
        }
        total
    }

    pub(crate) fn central_moment_unchecked(&self, k: u32) -> f64 {
        debug_assert!(k <= MAX_INTERNAL_MOMENT);
        let mean = self.mean();
        let mut total = 0.0;
        for a in self.discrete.atoms() {
            let c = a.value - mean;
            let mut sum = 0.0;
            for j in (0..=k).step_by(2) {
                sum += gauss::binomial(k, j)
                    * c.powi((k - j) as i32)
                    * gauss::central_moment(self.tau, j);
            }
            total += a.prob * sum;
        }
        total
    }

    /// Central moments `mu_0 ..= mu_k` in one pass, for the polynomial
    /// machinery. Internal orders go beyond the public cap.
    pub(crate) fn central_moments_up_to(&self, k: u32) -> Vec<f64> {
        (0..=k).map(|j| self.central_moment_unchecked(j)).collect()
    }

    /// Convolution with default cap and merge tolerance.
    pub fn convolve(&self, other: &Self) -> Result<Self, MixtureError> {
        self.convolve_with(other, &ConvolveOpts::default())
    }

    /// Exact convolution: atoms are all pairwise sums with product weights,
    /// merged within the tolerance; `tau` adds. Mean, variance and all
    /// cumulants are additive.
    pub fn convolve_with(&self, other: &Self, opts: &ConvolveOpts) -> Result<Self, MixtureError> {
        let count = self.discrete.len() * other.discrete.len();
        if count > opts.atom_cap {
            return Err(MixtureError::AtomCap {
                count,
                cap: opts.atom_cap,
            });
        }
        let mut pairs: Vec<Atom> = Vec::with_capacity(count);
        for a in self.discrete.atoms() {
            for b in other.discrete.atoms() {
                pairs.push(Atom {
                    value: a.value + b.value,
                    prob: a.prob * b.prob,
                });
            }
        }
        pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
        let merged = merge_sorted(pairs, opts.merge_tol);
        Ok(Self {
            discrete: DiscreteAtoms { atoms: merged },
            tau: self.tau + other.tau,
        })
    }

    /// Affine image `a Y + b`: atoms map `v -> a v + b`, `tau -> a^2 tau`.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self, MixtureError> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(MixtureError::BadScale);
        }
        let mut atoms: Vec<Atom> = self
            .discrete
            .atoms()
            .iter()
            .map(|at| Atom {
                value: a * at.value + b,
                prob: at.prob,
            })
            .collect();
        if a < 0.0 {
            atoms.reverse();
        }
        Ok(Self {
            discrete: DiscreteAtoms { atoms },
            tau: a * a * self.tau,
        })
    }

    /// Mean-zero copy plus the shift that was removed
    /// (`original = centered + shift`).
    pub fn center(&self) -> (Self, f64) {
        let shift = self.mean();
        let atoms: Vec<Atom> = self
            .discrete
            .atoms()
            .iter()
            .map(|a| Atom {
                value: a.value - shift,
                prob: a.prob,
            })
            .collect();
        (
            Self {
                discrete: DiscreteAtoms { atoms },
                tau: self.tau,
            },
            shift,
        )
    }

    /// Affine image with mean 0 and variance 1. Subtracting the mean before
    /// scaling keeps the centering exact to rounding.
    pub fn standardize(&self) -> Self {
        let mean = self.mean();
        let scale = 1.0 / self.variance().sqrt();
        let atoms: Vec<Atom> = self
            .discrete
            .atoms()
            .iter()
            .map(|a| Atom {
                value: (a.value - mean) * scale,
                prob: a.prob,
            })
            .collect();
        Self {
            discrete: DiscreteAtoms { atoms },
            tau: self.tau * scale * scale,
        }
    }

    /// Upper-tail first moment `int_x^inf y f(y) dy` for a centered mixture:
    /// `sum_i p_i [ tau phi_tau(x - a_i) + a_i Q((x - a_i)/sqrt(tau)) ]`.
    ///
    /// On the left half-line the equivalent complementary form
    /// `sum_i p_i [ tau phi_tau(x - a_i) - a_i Phi((x - a_i)/sqrt(tau)) ]`
    /// (valid because the full mean is zero) is used instead: there `Q`
    /// rounds to 1 and the direct sum would collapse to the rounding noise
    /// of the mean, while `Phi` stays tiny and keeps full relative accuracy.
    pub fn tail_first_moment(&self, x: f64) -> Result<f64, MixtureError> {
        assert!(x.is_finite(), "tail_first_moment requires finite x");
        let mean = self.mean();
        if mean.abs() > 1e-10 {
            return Err(MixtureError::NotCentered { mean });
        }
        let tau = self.tau;
        let rt = tau.sqrt();
        let mut total = 0.0;
        if x >= 0.0 {
            for a in self.discrete.atoms() {
                let d = x - a.value;
                total +=
                    a.prob * (tau * gauss::phi_tau(tau, d) + a.value * gauss::norm_tail(d / rt));
            }
        } else {
            for a in self.discrete.atoms() {
                let d = x - a.value;
                total +=
                    a.prob * (tau * gauss::phi_tau(tau, d) - a.value * gauss::norm_cdf(d / rt));
            }
        }
        Ok(total)
    }

    /// Exponential absolute moment `E exp(c |Y - EY|)`, exact per component:
    /// with `m_i = a_i - EY`,
    /// `E exp(c |m_i + sqrt(tau) Z|) = e^{c m_i + c^2 tau/2} Phi(m_i/sqrt(tau) + c sqrt(tau))
    ///                               + e^{-c m_i + c^2 tau/2} Phi(-m_i/sqrt(tau) + c sqrt(tau))`.
    pub fn exp_abs_moment(&self, c: f64) -> Result<f64, MixtureError> {
        assert!(c >= 0.0, "exp_abs_moment requires c >= 0");
        let mean = self.mean();
        let tau = self.tau;
        let rt = tau.sqrt();
        let max_abs = self
            .discrete
            .atoms()
            .iter()
            .map(|a| (a.value - mean).abs())
            .fold(0.0, f64::max);
        let log_scale = c * c * tau / 2.0 + c * max_abs;
        if log_scale > 700.0 {
            return Err(MixtureError::ExpOverflow { log_scale });
        }
        let mut total = 0.0;
        for a in self.discrete.atoms() {
            let m = a.value - mean;
            let plus = (c * m + c * c * tau / 2.0).exp() * gauss::norm_cdf(m / rt + c * rt);
            let minus = (-c * m + c * c * tau / 2.0).exp() * gauss::norm_cdf(-m / rt + c * rt);
            total += a.prob * (plus + minus);
        }
        Ok(total)
    }

    /// Fisher information `I(Y) = int f'(y)^2 / f(y) dy` by adaptive
    /// quadrature over the default window. Always `<= 1/tau` up to the
    /// quadrature tolerance.
    pub fn fisher_info(&self) -> Result<f64, MixtureError> {
        self.fisher_info_with(DEFAULT_WINDOW, QuadOpts::default())
    }

    pub fn fisher_info_with(&self, window_mult: f64, opts: QuadOpts) -> Result<f64, MixtureError> {
        let (lo, hi) = self.window(window_mult);
        let q = quad::integrate(
            |x| {
                let ps = self.pdf_score(x);
                // score^2 * density: remains 0, not NaN, where f underflows.
                ps.score * ps.score * ps.density
            },
            lo,
            hi,
            opts,
        )?;
        Ok(q.value)
    }
}
