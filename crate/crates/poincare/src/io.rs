//! Wire formats: mixture JSON input, report JSON output, and plot-ready CSV
//! tables.
//!
//! Every output embeds a format version and the run configuration as
//! `# key=value` comment lines (CSV) or a `config` object (JSON). Floats are
//! printed with 17 significant digits so files round-trip bit-exactly;
//! non-finite JSON values serialize as `null`.

use crate::bounds::{BoundReport, BuScan};
use crate::clt::{CltTrace, RecursionTrace};
use crate::mixture::{DiscreteAtoms, MixtureError, SmoothedMixture};
use crate::spectral::GapResult;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed mixture JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 17-significant-digit scientific formatting; round-trips any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Key/value pairs embedded into every artifact.
#[derive(Debug, Clone, Default)]
pub struct Meta {
    entries: Vec<(String, String)>,
}

impl Meta {
    pub fn new() -> Self {
        let mut meta = Self::default();
        meta.push("format_version", FORMAT_VERSION);
        meta
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    fn comment_lines(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }

    fn json_object(&self) -> Value {
        let mut map = serde_json::Map::new();
        for (k, v) in &self.entries {
            map.insert(k.clone(), Value::String(v.clone()));
        }
        Value::Object(map)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct AtomSpec {
    value: f64,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MixtureSpec {
    atoms: Vec<AtomSpec>,
    tau: f64,
}

/// Parse the mixture JSON format
/// `{"atoms":[{"value":1.0,"prob":0.5},...],"tau":1.0}`. Probabilities are
/// normalized when within 1e-9 of summing to 1, otherwise rejected.
pub fn parse_mixture(text: &str) -> Result<SmoothedMixture, IoError> {
    let spec: MixtureSpec = serde_json::from_str(text)?;
    let atoms = DiscreteAtoms::new(spec.atoms.iter().map(|a| (a.value, a.prob)))?;
    Ok(SmoothedMixture::new(atoms, spec.tau)?)
}

pub fn load_mixture(path: &Path) -> Result<SmoothedMixture, IoError> {
    parse_mixture(&std::fs::read_to_string(path)?)
}

pub fn mixture_json(m: &SmoothedMixture) -> String {
    let spec = MixtureSpec {
        atoms: m
            .discrete()
            .atoms()
            .iter()
            .map(|a| AtomSpec {
                value: a.value,
                prob: a.prob,
            })
            .collect(),
        tau: m.tau(),
    };
    serde_json::to_string_pretty(&spec).expect("plain struct serializes")
}

pub fn bound_report_json(report: &BoundReport, meta: &Meta) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "config": meta.json_object(),
        "bounds": {
            "variance_lb": report.variance_lb,
            "fourth_moment_lb": report.fourth_moment_lb,
            "rayleigh_lb": report.rayleigh_lb,
            "thm13_ub": report.thm13_ub,
            "bu_ratio_ub": report.bu_ratio_ub,
            "bu_argmax": report.bu_argmax,
            "subadditive_ub": report.subadditive_ub,
        },
        "chosen_lower": report.chosen_lower,
        "chosen_lower_source": report.chosen_lower_source,
        "chosen_upper": report.chosen_upper,
        "chosen_upper_source": report.chosen_upper_source,
    })
}

pub fn gap_result_json(gap: &GapResult, meta: &Meta) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "config": meta.json_object(),
        "lambda1": gap.lambda1,
        "r_estimate": gap.r_estimate,
        "residual_norm": gap.residual_norm,
        "certified_rayleigh_lb": gap.certified_rayleigh_lb,
        "grid": {
            "n_points": gap.n_points,
            "h": gap.h,
            "window_lo": gap.window.0,
            "window_hi": gap.window.1,
            "n_adjusted": gap.n_adjusted,
        },
    })
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Tail-ratio curve: columns `x, tail_moment, density, ratio`.
pub fn write_bu_curve(out: &mut impl Write, scan: &BuScan, meta: &Meta) -> std::io::Result<()> {
    meta.comment_lines(out)?;
    writeln!(out, "# center_shift={}", fmt_f64(scan.center_shift))?;
    writeln!(out, "# sup={}", fmt_f64(scan.sup))?;
    writeln!(out, "# argmax={}", fmt_f64(scan.argmax))?;
    writeln!(out, "x,tail_moment,density,ratio")?;
    for p in &scan.curve {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(p.x),
            fmt_f64(p.tail_moment),
            fmt_f64(p.density),
            fmt_f64(p.ratio)
        )?;
    }
    Ok(())
}

/// Gap eigenfunction: columns `x, g, density`.
pub fn write_eigenfunction(
    out: &mut impl Write,
    gap: &GapResult,
    meta: &Meta,
) -> std::io::Result<()> {
    meta.comment_lines(out)?;
    writeln!(out, "# lambda1={}", fmt_f64(gap.lambda1))?;
    writeln!(out, "x,g,density")?;
    for i in 0..gap.grid.len() {
        writeln!(
            out,
            "{},{},{}",
            fmt_f64(gap.grid[i]),
            fmt_f64(gap.eigenfunction[i]),
            fmt_f64(gap.density[i])
        )?;
    }
    Ok(())
}

/// Doubling trace: columns
/// `k, n, r_estimate, thm13_ub, fisher, kappa4, rate_product, dynsys_residual, atom_count`.
pub fn write_clt_trace(out: &mut impl Write, trace: &CltTrace, meta: &Meta) -> std::io::Result<()> {
    meta.comment_lines(out)?;
    writeln!(out, "# c_used={}", fmt_f64(trace.c_used))?;
    if let Some(halt) = &trace.halted {
        writeln!(
            out,
            "# halted_at_level={} reason={}",
            halt.level, halt.reason
        )?;
    }
    writeln!(
        out,
        "k,n,r_estimate,thm13_ub,fisher,kappa4,rate_product,dynsys_residual,atom_count"
    )?;
    for l in &trace.levels {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            l.level,
            l.n,
            fmt_f64(l.r_estimate),
            fmt_f64(l.thm13_ub),
            fmt_f64(l.fisher),
            fmt_f64(l.kappa4),
            fmt_f64(l.rate_product),
            l.dynsys_residual.map(fmt_f64).unwrap_or_default(),
            l.atom_count
        )?;
    }
    Ok(())
}

/// Recursion trace: columns `k, u_k, bound_4_over_2r, bound_16_over_k`; the
/// power-of-two bound column is empty off the subsequence.
pub fn write_recursion_trace(
    out: &mut impl Write,
    trace: &RecursionTrace,
    meta: &Meta,
) -> std::io::Result<()> {
    meta.comment_lines(out)?;
    writeln!(out, "# pow2_bound_ok={}", trace.pow2_bound_ok)?;
    writeln!(out, "# fill_bound_ok={}", trace.fill_bound_ok)?;
    writeln!(out, "k,u_k,bound_4_over_2r,bound_16_over_k")?;
    for (i, &u) in trace.u.iter().enumerate() {
        let k = i + 1;
        let pow2 = if k.is_power_of_two() {
            fmt_f64(4.0 / k as f64)
        } else {
            String::new()
        };
        writeln!(
            out,
            "{},{},{},{}",
            k,
            fmt_f64(u),
            pow2,
            fmt_f64(16.0 / k as f64)
        )?;
    }
    Ok(())
}
