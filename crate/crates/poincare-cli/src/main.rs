//! `poincare` — spectral-gap constants of Gaussian-smoothed discrete
//! distributions from the command line.
//!
//! Subcommands: `bound`, `spectrum`, `bu-scan`, `clt`, `recursion`,
//! `selftest`. Outputs are JSON reports and plot-ready CSV tables in the
//! directory given by `--out`. Exit status: 0 success, 1 validation error,
//! 2 numerical failure.

use poincare::bounds::{self, BoundsError, BuScanOpts};
use poincare::clt::{self, CltConfig, CltError};
use poincare::io::{self, IoError, Meta};
use poincare::mixture::MixtureError;
use poincare::selftest;
use poincare::spectral::{self, SpectralError};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const USAGE: &str = "\
poincare <subcommand> [flags]

Subcommands:
  bound      closed-form bound sandwich + polynomial Rayleigh lower bound
  spectrum   finite-difference eigensolve of the diffusion operator
  bu-scan    tail-ratio criterion curve T(x) and its supremum
  clt        powers-of-2 self-convolution experiment
  recursion  extremal trajectory of u(1+u) = u_prev with its rate bounds
  selftest   run every module's invariant suite

Flags (env overrides in parentheses):
  --mixture PATH  mixture JSON (POINCARE_MIXTURE)
  --grid N        odd grid point count >= 101, default 4001 (POINCARE_GRID)
  --width W       window multiplier >= 6, default 10; the bu-scan window
                  never drops below 12 (POINCARE_WIDTH)
  --levels K      doubling levels, default 6 (POINCARE_LEVELS)
  --degree D      Rayleigh polynomial degree 1..12, default 8 (POINCARE_DEGREE)
  --out DIR       output directory, default . (POINCARE_OUT)
  --seed S        seed for property suites, default 42 (POINCARE_SEED)
  --u1 X          recursion start in (0,1], default 1.0 (POINCARE_U1)
  --steps N       recursion length, default 1048576 (POINCARE_STEPS)
  --atom-cap N    convolution atom cap, default 200000 (POINCARE_ATOM_CAP)
  --merge-tol T   atom merge tolerance, default 1e-9 (POINCARE_MERGE_TOL)
  --quad-tol T    quadrature tolerance, default 1e-9 (POINCARE_QUAD_TOL)

Mixture JSON: {\"atoms\":[{\"value\":1.0,\"prob\":0.5},...],\"tau\":1.0}";

#[derive(Debug, Clone)]
struct RunConfig {
    mixture: Option<PathBuf>,
    grid: usize,
    width: f64,
    levels: u32,
    degree: usize,
    out: PathBuf,
    seed: u64,
    u1: f64,
    steps: usize,
    atom_cap: usize,
    merge_tol: f64,
    quad_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mixture: None,
            grid: spectral::DEFAULT_GRID_POINTS,
            width: spectral::DEFAULT_WIDTH,
            levels: 6,
            degree: 8,
            out: PathBuf::from("."),
            seed: 42,
            u1: 1.0,
            steps: 1 << 20,
            atom_cap: poincare::mixture::DEFAULT_ATOM_CAP,
            merge_tol: poincare::mixture::DEFAULT_MERGE_TOL,
            quad_tol: 1e-9,
        }
    }
}

impl RunConfig {
    fn meta(&self) -> Meta {
        let mut meta = Meta::new();
        if let Some(path) = &self.mixture {
            meta.push("mixture", path.display());
        }
        meta.push("grid", self.grid);
        meta.push("width", self.width);
        meta.push("levels", self.levels);
        meta.push("degree", self.degree);
        meta.push("seed", self.seed);
        meta.push("u1", self.u1);
        meta.push("steps", self.steps);
        meta.push("atom_cap", self.atom_cap);
        meta.push("merge_tol", self.merge_tol);
        meta.push("quad_tol", self.quad_tol);
        meta
    }

    fn validate(&self) -> Result<(), String> {
        if self.grid < 101 || self.grid.is_multiple_of(2) {
            return Err(format!("--grid must be odd and >= 101, got {}", self.grid));
        }
        if self.width.is_nan() || self.width < 6.0 {
            return Err(format!("--width must be >= 6, got {}", self.width));
        }
        if self.degree < 1 || self.degree > spectral::MAX_POLY_DEGREE {
            return Err(format!(
                "--degree must lie in 1..={}, got {}",
                spectral::MAX_POLY_DEGREE,
                self.degree
            ));
        }
        if !(self.u1 > 0.0 && self.u1 <= 1.0) {
            return Err(format!("--u1 must lie in (0, 1], got {}", self.u1));
        }
        if self.steps == 0 {
            return Err("--steps must be at least 1".into());
        }
        if !self.merge_tol.is_finite()
            || self.merge_tol <= 0.0
            || !self.quad_tol.is_finite()
            || self.quad_tol <= 0.0
        {
            return Err("tolerances must be positive".into());
        }
        Ok(())
    }

    fn mixture_path(&self) -> Result<&Path, String> {
        self.mixture
            .as_deref()
            .ok_or_else(|| "this subcommand needs --mixture PATH".into())
    }
}

fn env_override(config: &mut RunConfig) -> Result<(), String> {
    fn get<T: std::str::FromStr>(key: &str, slot: &mut T) -> Result<(), String> {
        if let Ok(raw) = std::env::var(key) {
            *slot = raw
                .parse()
                .map_err(|_| format!("{key}={raw} is not a valid value"))?;
        }
        Ok(())
    }
    if let Ok(path) = std::env::var("POINCARE_MIXTURE") {
        config.mixture = Some(PathBuf::from(path));
    }
    if let Ok(path) = std::env::var("POINCARE_OUT") {
        config.out = PathBuf::from(path);
    }
    get("POINCARE_GRID", &mut config.grid)?;
    get("POINCARE_WIDTH", &mut config.width)?;
    get("POINCARE_LEVELS", &mut config.levels)?;
    get("POINCARE_DEGREE", &mut config.degree)?;
    get("POINCARE_SEED", &mut config.seed)?;
    get("POINCARE_U1", &mut config.u1)?;
    get("POINCARE_STEPS", &mut config.steps)?;
    get("POINCARE_ATOM_CAP", &mut config.atom_cap)?;
    get("POINCARE_MERGE_TOL", &mut config.merge_tol)?;
    get("POINCARE_QUAD_TOL", &mut config.quad_tol)?;
    Ok(())
}

fn parse_flags(args: &[String], config: &mut RunConfig) -> Result<(), String> {
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let mut value = |name: &str| -> Result<&String, String> {
            it.next().ok_or_else(|| format!("{name} needs a value"))
        };
        match flag.as_str() {
            "--mixture" => config.mixture = Some(PathBuf::from(value("--mixture")?)),
            "--out" => config.out = PathBuf::from(value("--out")?),
            "--grid" => config.grid = parse_num(value("--grid")?, "--grid")?,
            "--width" => config.width = parse_num(value("--width")?, "--width")?,
            "--levels" => config.levels = parse_num(value("--levels")?, "--levels")?,
            "--degree" => config.degree = parse_num(value("--degree")?, "--degree")?,
            "--seed" => config.seed = parse_num(value("--seed")?, "--seed")?,
            "--u1" => config.u1 = parse_num(value("--u1")?, "--u1")?,
            "--steps" => config.steps = parse_num(value("--steps")?, "--steps")?,
            "--atom-cap" => config.atom_cap = parse_num(value("--atom-cap")?, "--atom-cap")?,
            "--merge-tol" => config.merge_tol = parse_num(value("--merge-tol")?, "--merge-tol")?,
            "--quad-tol" => config.quad_tol = parse_num(value("--quad-tol")?, "--quad-tol")?,
            other => return Err(format!("unknown flag {other}")),
        }
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(raw: &str, flag: &str) -> Result<T, String> {
    raw.parse()
        .map_err(|_| format!("{flag} got an unparsable value: {raw}"))
}

/// 1 = validation error, 2 = numerical failure.
enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    fn status(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => m,
        }
    }
}

fn classify_mixture(err: MixtureError, stage: &str) -> Failure {
    let msg = format!("{stage}: {err}");
    match err {
        MixtureError::AtomCap { .. }
        | MixtureError::ExpOverflow { .. }
        | MixtureError::Quadrature(_) => Failure::Numerical(msg),
        _ => Failure::Validation(msg),
    }
}

fn classify_spectral(err: SpectralError, stage: &str) -> Failure {
    let msg = format!("{stage}: {err}");
    match err {
        SpectralError::BadGrid { .. }
        | SpectralError::BadWidth { .. }
        | SpectralError::DegreeRange { .. }
        | SpectralError::DegeneratePoly { .. } => Failure::Validation(msg),
        SpectralError::Mixture(inner) => classify_mixture(inner, stage),
        _ => Failure::Numerical(msg),
    }
}

fn classify_bounds(err: BoundsError, stage: &str) -> Failure {
    match err {
        BoundsError::EdgeIncreasing { .. } => Failure::Numerical(format!("{stage}: {err}")),
        BoundsError::Mixture(inner) => classify_mixture(inner, stage),
    }
}

fn classify_clt(err: CltError, stage: &str) -> Failure {
    match err {
        CltError::TooManyLevels { .. }
        | CltError::BadU1 { .. }
        | CltError::NoSteps
        | CltError::DegreeRange { .. } => Failure::Validation(format!("{stage}: {err}")),
        CltError::Mixture(inner) => classify_mixture(inner, stage),
        CltError::Spectral(inner) => classify_spectral(inner, stage),
    }
}

fn classify_io(err: IoError, stage: &str) -> Failure {
    match err {
        IoError::Mixture(inner) => classify_mixture(inner, stage),
        other => Failure::Validation(format!("{stage}: {other}")),
    }
}

fn load_mixture(config: &RunConfig) -> Result<poincare::SmoothedMixture, Failure> {
    let path = config.mixture_path().map_err(Failure::Validation)?;
    io::load_mixture(path).map_err(|e| classify_io(e, "loading mixture"))
}

fn ensure_out_dir(config: &RunConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(&config.out)
        .map_err(|e| Failure::Validation(format!("creating --out directory: {e}")))
}

fn write_json_report(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    io::write_json(path, value).map_err(|e| Failure::Validation(format!("writing {path:?}: {e}")))
}

/// The scan window never shrinks below the quadrature default: `--width`
/// only widens it (the spectral grid uses the flag value as-is).
fn scan_opts(config: &RunConfig) -> BuScanOpts {
    BuScanOpts {
        grid_points: config.grid,
        window_mult: config.width.max(poincare::mixture::DEFAULT_WINDOW),
        ..BuScanOpts::default()
    }
}

fn cmd_bound(config: &RunConfig) -> Result<String, Failure> {
    let m = load_mixture(config)?;
    ensure_out_dir(config)?;
    let scan_opts = scan_opts(config);
    let report =
        bounds::bound_report(&m, &scan_opts).map_err(|e| classify_bounds(e, "bound sandwich"))?;
    let poly = spectral::poly_rayleigh_bound(&m, config.degree)
        .map_err(|e| classify_spectral(e, "polynomial rayleigh bound"))?;
    let report = report.with_rayleigh(poly.best_lb);

    let path = config.out.join("bound_report.json");
    write_json_report(&path, &io::bound_report_json(&report, &config.meta()))?;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "bounds: {} <= R <= {}  (lower from {}, upper from {})",
        report.chosen_lower,
        report.chosen_upper,
        report.chosen_lower_source,
        report.chosen_upper_source
    );
    let _ = writeln!(
        summary,
        "  variance_lb={}  fourth_moment_lb={}  rayleigh_lb={}  thm13_ub={}  bu_ratio={} (diagnostic)",
        report.variance_lb,
        report.fourth_moment_lb,
        poly.best_lb,
        report.thm13_ub,
        report.bu_ratio_ub
    );
    let _ = write!(summary, "wrote {}", path.display());
    Ok(summary)
}

fn cmd_spectrum(config: &RunConfig) -> Result<String, Failure> {
    let m = load_mixture(config)?;
    ensure_out_dir(config)?;
    let gap = spectral::gap_estimate(&m, config.grid, config.width)
        .map_err(|e| classify_spectral(e, "eigensolve"))?;

    let json_path = config.out.join("gap_result.json");
    write_json_report(&json_path, &io::gap_result_json(&gap, &config.meta()))?;
    let csv_path = config.out.join("eigenfunction.csv");
    let mut buf = Vec::new();
    io::write_eigenfunction(&mut buf, &gap, &config.meta())
        .and_then(|()| std::fs::write(&csv_path, &buf))
        .map_err(|e| Failure::Validation(format!("writing {csv_path:?}: {e}")))?;

    Ok(format!(
        "lambda1={}  r_estimate={}  residual={}  certified_rayleigh_lb={}\nwrote {} and {}",
        gap.lambda1,
        gap.r_estimate,
        gap.residual_norm,
        gap.certified_rayleigh_lb,
        json_path.display(),
        csv_path.display()
    ))
}

fn cmd_bu_scan(config: &RunConfig) -> Result<String, Failure> {
    let m = load_mixture(config)?;
    ensure_out_dir(config)?;
    let scan = bounds::bu_ratio_scan(&m, &scan_opts(config))
        .map_err(|e| classify_bounds(e, "tail-ratio scan"))?;
    let path = config.out.join("bu_curve.csv");
    let mut buf = Vec::new();
    io::write_bu_curve(&mut buf, &scan, &config.meta())
        .and_then(|()| std::fs::write(&path, &buf))
        .map_err(|e| Failure::Validation(format!("writing {path:?}: {e}")))?;
    Ok(format!(
        "sup T(x) = {} at x = {} (centered coordinates, shift {})\nwrote {}",
        scan.sup,
        scan.argmax,
        scan.center_shift,
        path.display()
    ))
}

fn cmd_clt(config: &RunConfig) -> Result<String, Failure> {
    let m = load_mixture(config)?;
    ensure_out_dir(config)?;
    let clt_config = CltConfig {
        grid_points: config.grid,
        width: config.width,
        atom_cap: config.atom_cap,
        merge_tol: config.merge_tol,
        quad_tol: config.quad_tol,
    };
    let trace = clt::run_doubling(&m, config.levels, &clt_config)
        .map_err(|e| classify_clt(e, "doubling"))?;

    let path = config.out.join("clt_trace.csv");
    let mut buf = Vec::new();
    io::write_clt_trace(&mut buf, &trace, &config.meta())
        .and_then(|()| std::fs::write(&path, &buf))
        .map_err(|e| Failure::Validation(format!("writing {path:?}: {e}")))?;

    let mut summary = String::new();
    let _ = writeln!(summary, "C = 18 R (I R + 1) = {}", trace.c_used);
    for l in &trace.levels {
        let _ = writeln!(
            summary,
            "  k={} n={} r={:.6} thm13={:.6} fisher={:.6} kappa4={:+.3e} n(R-1)={:.4}",
            l.level, l.n, l.r_estimate, l.thm13_ub, l.fisher, l.kappa4, l.rate_product
        );
    }
    let _ = write!(summary, "wrote {}", path.display());
    if let Some(halt) = &trace.halted {
        return Err(Failure::Numerical(format!(
            "doubling halted at level {}: {} (partial trace written to {})",
            halt.level,
            halt.reason,
            path.display()
        )));
    }
    Ok(summary)
}

fn cmd_recursion(config: &RunConfig) -> Result<String, Failure> {
    ensure_out_dir(config)?;
    let trace = clt::recursion_extremal(config.u1, config.steps)
        .map_err(|e| classify_clt(e, "recursion"))?;
    let path = config.out.join("recursion_trace.csv");
    let mut buf = Vec::new();
    io::write_recursion_trace(&mut buf, &trace, &config.meta())
        .and_then(|()| std::fs::write(&path, &buf))
        .map_err(|e| Failure::Validation(format!("writing {path:?}: {e}")))?;
    let summary = format!(
        "u1={} steps={}  pow2_bound_ok={}  fill_bound_ok={}\nwrote {}",
        config.u1,
        config.steps,
        trace.pow2_bound_ok,
        trace.fill_bound_ok,
        path.display()
    );
    if trace.pow2_bound_ok && trace.fill_bound_ok {
        Ok(summary)
    } else {
        Err(Failure::Numerical(format!(
            "recursion bound violated\n{summary}"
        )))
    }
}

fn cmd_selftest(config: &RunConfig) -> Result<String, Failure> {
    let mut summary = String::new();
    let mut passed = 0usize;
    let mut failed = 0usize;
    for suite in selftest::run_all(config.seed) {
        if suite.passed() {
            passed += 1;
            let _ = writeln!(summary, "ok   {} ({} checks)", suite.name, suite.checks);
        } else {
            failed += 1;
            let _ = writeln!(
                summary,
                "FAIL {} ({} checks, {} failures)",
                suite.name,
                suite.checks,
                suite.failures.len()
            );
            for failure in suite.failures.iter().take(3) {
                let _ = writeln!(summary, "     {failure}");
            }
        }
    }
    let _ = write!(summary, "suites: {passed} passed, {failed} failed");
    if failed == 0 {
        Ok(summary)
    } else {
        Err(Failure::Numerical(summary))
    }
}

fn run() -> Result<String, Failure> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        if args.is_empty() {
            return Err(Failure::Validation(USAGE.to_string()));
        }
        return Ok(USAGE.to_string());
    }
    let subcommand = args[0].as_str();
    let mut config = RunConfig::default();
    env_override(&mut config).map_err(Failure::Validation)?;
    parse_flags(&args[1..], &mut config).map_err(Failure::Validation)?;
    config.validate().map_err(Failure::Validation)?;

    match subcommand {
        "bound" => cmd_bound(&config),
        "spectrum" => cmd_spectrum(&config),
        "bu-scan" => cmd_bu_scan(&config),
        "clt" => cmd_clt(&config),
        "recursion" => cmd_recursion(&config),
        "selftest" => cmd_selftest(&config),
        other => Err(Failure::Validation(format!(
            "unknown subcommand {other}\n\n{USAGE}"
        ))),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("{}", failure.message());
            ExitCode::from(failure.status())
        }
    }
}
