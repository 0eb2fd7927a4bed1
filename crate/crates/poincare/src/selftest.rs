//! Deterministic invariant suites for the `selftest` command.
//!
//! Each suite re-runs one module's documented invariants on seeded random
//! inputs and reports a pass/fail count. The acceptance-grade versions (with
//! the full sample sizes) live in the test suite; these are sized to finish
//! in seconds.

use crate::bounds::{self, BuScanOpts};
use crate::clt;
use crate::mixture::{DiscreteAtoms, SmoothedMixture};
use crate::quad::{integrate, QuadOpts};
use crate::rng::SplitMix64;
use crate::spectral::{self, PolyFn};

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, message: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(message());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Random centered discrete distribution with `min_atoms..=max_atoms` atoms,
/// values in [-3, 3], probability floor away from zero.
pub fn random_centered_atoms(
    rng: &mut SplitMix64,
    min_atoms: usize,
    max_atoms: usize,
) -> DiscreteAtoms {
    let n = rng.int_range(min_atoms, max_atoms);
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.range(-3.0, 3.0), rng.range(0.05, 1.0)))
        .collect();
    let d = DiscreteAtoms::from_weights(pairs).expect("positive weights");
    let mean = d.mean();
    DiscreteAtoms::from_weights(d.atoms().iter().map(|a| (a.value - mean, a.prob)))
        .expect("recentering keeps weights")
}

/// Random smoothed mixture with atoms in [-2, 2].
pub fn random_mixture(
    rng: &mut SplitMix64,
    min_atoms: usize,
    max_atoms: usize,
    tau_lo: f64,
    tau_hi: f64,
) -> SmoothedMixture {
    let n = rng.int_range(min_atoms, max_atoms);
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.range(-2.0, 2.0), rng.range(0.05, 1.0)))
        .collect();
    let d = DiscreteAtoms::from_weights(pairs).expect("positive weights");
    SmoothedMixture::new(d, rng.range(tau_lo, tau_hi)).expect("tau positive")
}

/// Random polynomial of degree in `deg_lo..=deg_hi` with a guaranteed
/// non-degenerate linear part.
pub fn random_poly(rng: &mut SplitMix64, deg_lo: usize, deg_hi: usize) -> PolyFn {
    let degree = rng.int_range(deg_lo, deg_hi);
    let mut coeffs: Vec<f64> = (0..=degree).map(|_| rng.range(-1.0, 1.0)).collect();
    coeffs[1] += 0.5_f64.copysign(coeffs[1]);
    if coeffs[degree] == 0.0 {
        coeffs[degree] = 0.25;
    }
    PolyFn::new(coeffs)
}

pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        mixture_normalization(seed),
        mixture_score_identity(seed),
        mixture_tail_vs_quadrature(seed),
        mixture_convolution_additivity(seed),
        mixture_exp_moment_vs_quadrature(seed),
        mixture_span_stats(seed),
        bounds_scale_covariance(seed),
        bounds_bu_gaussian_constant(),
        bounds_moment_tail(seed),
        bounds_sandwich(seed),
        spectral_ou_gap(),
        spectral_rayleigh_consistency(),
        clt_doubling_invariants(),
        clt_recursion_bounds(),
        clt_rdec_property(seed),
        clt_gbd_property(seed),
    ]
}

fn quad_tol() -> QuadOpts {
    QuadOpts {
        abs_tol: 1e-10,
        max_depth: 48,
    }
}

fn mixture_normalization(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("mixture/density-normalization");
    let mut rng = SplitMix64::new(seed ^ 0x01);
    for i in 0..10 {
        let m = random_mixture(&mut rng, 1, 5, 0.1, 4.0);
        let (lo, hi) = m.window(12.0);
        let mass = integrate(|x| m.pdf(x), lo, hi, quad_tol()).map(|q| q.value);
        match mass {
            Ok(mass) => suite.check((mass - 1.0).abs() <= 1e-8, || {
                format!("case {i}: mass = {mass:.12}")
            }),
            Err(e) => suite.check(false, || format!("case {i}: quadrature failed: {e}")),
        }
    }
    suite
}

fn mixture_score_identity(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("mixture/score-is-log-density-gradient");
    let mut rng = SplitMix64::new(seed ^ 0x02);
    let h = 1e-5;
    for _ in 0..5 {
        let m = random_mixture(&mut rng, 1, 5, 0.2, 2.0);
        let (lo, hi) = m.window(8.0);
        let mut worst = 0.0f64;
        for i in 0..100 {
            let x = lo + (hi - lo) * i as f64 / 99.0;
            let fd = (m.log_pdf(x + h) - m.log_pdf(x - h)) / (2.0 * h);
            worst = worst.max((m.pdf_score(x).score - fd).abs());
        }
        suite.check(worst <= 1e-5, || format!("max |score - fd| = {worst:e}"));
    }
    suite
}

fn mixture_tail_vs_quadrature(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("mixture/tail-moment-vs-quadrature");
    let mut rng = SplitMix64::new(seed ^ 0x03);
    for i in 0..20 {
        let m = random_mixture(&mut rng, 1, 5, 0.3, 2.0);
        let (m, _) = m.center();
        let (lo, hi) = m.window(14.0);
        let x = rng.range(lo / 2.0, hi / 2.0);
        let closed = m.tail_first_moment(x).expect("centered");
        let oracle = integrate(|y| y * m.pdf(y), x, hi, quad_tol())
            .expect("quadrature")
            .value;
        suite.check((closed - oracle).abs() <= 1e-8, || {
            format!("case {i}: closed {closed} vs quadrature {oracle}")
        });
    }
    suite
}

fn mixture_convolution_additivity(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("mixture/convolution-cumulant-additivity");
    let mut rng = SplitMix64::new(seed ^ 0x04);
    for i in 0..20 {
        let a = random_mixture(&mut rng, 1, 4, 0.2, 2.0);
        let b = random_mixture(&mut rng, 1, 4, 0.2, 2.0);
        let c = a.convolve(&b).expect("small atom counts");
        let rel = |x: f64, y: f64| (x - y).abs() / (1.0 + x.abs().max(y.abs()));
        suite.check(rel(c.mean(), a.mean() + b.mean()) <= 1e-12, || {
            format!("case {i}: mean not additive")
        });
        suite.check(
            rel(c.variance(), a.variance() + b.variance()) <= 1e-12,
            || format!("case {i}: variance not additive"),
        );
        suite.check(
            rel(
                c.fourth_cumulant(),
                a.fourth_cumulant() + b.fourth_cumulant(),
            ) <= 1e-12,
            || format!("case {i}: kappa4 not additive"),
        );
    }
    suite
}

fn mixture_exp_moment_vs_quadrature(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("mixture/exp-abs-moment-vs-quadrature");
    let mut rng = SplitMix64::new(seed ^ 0x05);
    for i in 0..10 {
        let m = random_mixture(&mut rng, 1, 4, 0.1, 2.0);
        let c = rng.range(0.0, 1.0);
        let mean = m.mean();
        let closed = m.exp_abs_moment(c).expect("guarded");
        let (lo, hi) = m.window(14.0);
        let oracle = integrate(
            |y| (c * (y - mean).abs()).exp() * m.pdf(y),
            lo,
            hi,
            quad_tol(),
        )
        .expect("quadrature")
        .value;
        suite.check(((closed - oracle) / oracle).abs() <= 1e-7, || {
            format!("case {i}: closed {closed} vs quadrature {oracle}")
        });
    }
    suite
}

fn mixture_span_stats(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("mixture/span-stats-inequalities");
    let mut rng = SplitMix64::new(seed ^ 0x06);
    for i in 0..1000 {
        let d = random_centered_atoms(&mut rng, 2, 6);
        match bounds::span_stats(&d) {
            Ok(stats) => suite.check(stats.adjacent_ok && stats.span_ok, || {
                format!(
                    "case {i}: adjacent_ok={} span_ok={} atoms={:?}",
                    stats.adjacent_ok,
                    stats.span_ok,
                    d.atoms()
                )
            }),
            Err(e) => suite.check(false, || format!("case {i}: {e}")),
        }
    }
    suite
}

fn bounds_scale_covariance(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("bounds/thm13-scale-covariance");
    let mut rng = SplitMix64::new(seed ^ 0x07);
    for _ in 0..10 {
        let m = random_mixture(&mut rng, 2, 5, 0.2, 2.0);
        let base = bounds::thm13_bound(&m);
        for a in [0.5, 2.0] {
            let scaled = bounds::thm13_bound(&m.affine(a, 0.0).expect("a != 0"));
            suite.check(
                ((scaled - a * a * base) / (a * a * base)).abs() <= 1e-12,
                || format!("a = {a}: {scaled} vs {}", a * a * base),
            );
        }
    }
    suite
}

fn bounds_bu_gaussian_constant() -> SuiteReport {
    let mut suite = SuiteReport::new("bounds/bu-ratio-gaussian-constant");
    for tau in [0.25, 1.0, 4.0] {
        let g = SmoothedMixture::gaussian(tau).expect("tau > 0");
        match bounds::bu_ratio_scan(&g, &BuScanOpts::default()) {
            Ok(scan) => {
                let dev = scan
                    .curve
                    .iter()
                    .map(|p| (p.ratio - tau).abs())
                    .fold(0.0, f64::max);
                suite.check(dev < 1e-9 && (scan.sup - tau).abs() < 1e-9, || {
                    format!("tau {tau}: deviation {dev:e}")
                });
            }
            Err(e) => suite.check(false, || format!("tau {tau}: {e}")),
        }
    }
    suite
}

fn bounds_moment_tail(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("bounds/exp-moment-criterion");
    let mut rng = SplitMix64::new(seed ^ 0x08);
    for i in 0..100 {
        let m = random_mixture(&mut rng, 2, 5, 0.2, 2.0);
        let r_upper = bounds::thm13_bound(&m);
        match bounds::moment_tail_check(&m, r_upper) {
            Ok(check) => suite.check(check.pass, || {
                format!("case {i}: E exp = {} with r_upper {r_upper}", check.value)
            }),
            Err(e) => suite.check(false, || format!("case {i}: {e}")),
        }
    }
    suite
}

fn bounds_sandwich(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("bounds/sandwich-with-gap-estimate");
    let mut rng = SplitMix64::new(seed ^ 0x09);
    for i in 0..20 {
        let m = random_mixture(&mut rng, 2, 4, 0.3, 2.0);
        let lb = bounds::lower_bounds(&m);
        let ub = bounds::thm13_bound(&m);
        match spectral::gap_estimate(&m, 2001, 10.0) {
            Ok(gap) => {
                let lower = lb.variance_lb.max(lb.fourth_moment_lb);
                suite.check(
                    lower <= gap.r_estimate * 1.005 && gap.r_estimate <= ub * 1.005,
                    || format!("case {i}: lower {lower}, r {}, upper {ub}", gap.r_estimate),
                );
            }
            Err(e) => suite.check(false, || format!("case {i}: {e}")),
        }
    }
    suite
}

fn spectral_ou_gap() -> SuiteReport {
    let mut suite = SuiteReport::new("spectral/ou-gap-reference");
    for tau in [0.25, 1.0, 4.0] {
        let g = SmoothedMixture::gaussian(tau).expect("tau > 0");
        match spectral::gap_estimate(&g, 4001, 10.0) {
            Ok(gap) => suite.check(((gap.r_estimate - tau) / tau).abs() <= 1e-3, || {
                format!("tau {tau}: r = {}", gap.r_estimate)
            }),
            Err(e) => suite.check(false, || format!("tau {tau}: {e}")),
        }
    }
    suite
}

fn spectral_rayleigh_consistency() -> SuiteReport {
    let mut suite = SuiteReport::new("spectral/poly-rayleigh-consistency");
    let d = DiscreteAtoms::new([(1.0, 0.5), (-1.0, 0.5)]).expect("two atoms");
    let m = SmoothedMixture::new(d, 1.0).expect("tau > 0");
    match (
        spectral::gap_estimate(&m, 4001, 10.0),
        spectral::poly_rayleigh_bound(&m, 8),
    ) {
        (Ok(gap), Ok(poly)) => {
            suite.check(poly.best_lb >= 2.0, || format!("poly lb {}", poly.best_lb));
            suite.check(poly.best_lb <= gap.r_estimate + 1e-3, || {
                format!("poly lb {} above r {}", poly.best_lb, gap.r_estimate)
            });
            let mut last = 0.0;
            for degree in 1..=8 {
                let lb = spectral::poly_rayleigh_bound(&m, degree)
                    .map(|p| p.best_lb)
                    .unwrap_or(f64::NAN);
                suite.check(lb >= last - 1e-10, || {
                    format!("degree {degree} regressed: {lb} < {last}")
                });
                last = lb;
            }
        }
        (Err(e), _) => suite.check(false, || format!("gap: {e}")),
        (_, Err(e)) => suite.check(false, || format!("poly: {e}")),
    }
    suite
}

fn clt_doubling_invariants() -> SuiteReport {
    let mut suite = SuiteReport::new("clt/doubling-invariants");
    let d = DiscreteAtoms::new([(1.0, 0.5), (-1.0, 0.5)]).expect("two atoms");
    let m = SmoothedMixture::new(d, 0.5).expect("tau > 0");
    let config = clt::CltConfig {
        grid_points: 2001,
        ..clt::CltConfig::default()
    };
    match clt::run_doubling(&m, 4, &config) {
        Ok(trace) => {
            suite.check(trace.halted.is_none(), || "halted early".to_string());
            for pair in trace.levels.windows(2) {
                suite.check(
                    (pair[1].kappa4 / pair[0].kappa4 - 0.5).abs() <= 1e-12,
                    || format!("kappa4 ratio at level {}", pair[1].level),
                );
                suite.check(pair[1].r_estimate <= pair[0].r_estimate + 5e-3, || {
                    format!("r increased at level {}", pair[1].level)
                });
            }
            for l in &trace.levels[..trace.levels.len() - 1] {
                suite.check(
                    l.dynsys_residual.unwrap_or(f64::NEG_INFINITY) >= -1e-6 * (1.0 + trace.c_used),
                    || format!("dynsys residual at level {}", l.level),
                );
            }
        }
        Err(e) => suite.check(false, || format!("doubling failed: {e}")),
    }
    suite
}

fn clt_recursion_bounds() -> SuiteReport {
    let mut suite = SuiteReport::new("clt/recursion-bounds");
    for u1 in [1.0, 0.5, 0.123] {
        match clt::recursion_extremal(u1, 1 << 16) {
            Ok(trace) => suite.check(trace.pow2_bound_ok && trace.fill_bound_ok, || {
                format!("u1 = {u1}")
            }),
            Err(e) => suite.check(false, || format!("u1 = {u1}: {e}")),
        }
    }
    suite
}

fn clt_rdec_property(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("clt/projection-inequality");
    let mut rng = SplitMix64::new(seed ^ 0x0a);
    for i in 0..50 {
        let x_tau = rng.range(0.3, 3.0);
        let y = random_mixture(&mut rng, 2, 4, 0.3, 2.0);
        let g = random_poly(&mut rng, 2, 6);
        match clt::lemma_rdec_check(x_tau, &y, &g) {
            Ok(check) => suite.check(check.pass, || {
                format!("case {i}: lhs {} rhs {}", check.lhs, check.rhs)
            }),
            Err(e) => suite.check(false, || format!("case {i}: {e}")),
        }
    }
    suite
}

fn clt_gbd_property(seed: u64) -> SuiteReport {
    let mut suite = SuiteReport::new("clt/near-linear-test-function");
    let mut rng = SplitMix64::new(seed ^ 0x0b);
    for i in 0..50 {
        let d = random_centered_atoms(&mut rng, 2, 4);
        let w = SmoothedMixture::new(d, rng.range(0.3, 2.0)).expect("tau > 0");
        let h = random_poly(&mut rng, 2, 5);
        match clt::lemma_gbd_check(&w, &h) {
            Ok(check) => suite.check(check.pass, || {
                format!("case {i}: lhs {} rhs {}", check.lhs, check.rhs)
            }),
            Err(e) => suite.check(false, || format!("case {i}: {e}")),
        }
    }
    suite
}
