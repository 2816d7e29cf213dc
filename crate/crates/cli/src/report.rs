//! CSV emission and the `compare` join.
//!
//! Every file starts with `# tandem-iv schema v1`, uses LF line endings and
//! writes floats with Rust's shortest round-trip formatting. Missing values are
//! empty fields.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use crate::montecarlo::{EstimateRow, ExperimentReport, Scheme};
use crate::tasks::{BoundRow, ConverseRow, FrontRow, LppSummaryRow, LppTrialRow, ScanRow};

pub const SCHEMA_LINE: &str = "# tandem-iv schema v1";

pub const RESULTS_HEADER: &[&str] = &[
    "scheme",
    "k",
    "m",
    "eps_spec",
    "c",
    "delta_sep",
    "trials",
    "successes",
    "empirical",
    "empirical_se",
    "analytic",
    "analytic_kind",
    "verdict",
    "event_rate",
    "mean_delay",
    "delay_se",
    "p50",
    "p90",
];
pub const BOUNDS_HEADER: &[&str] = &[
    "k",
    "m",
    "eps_spec",
    "c",
    "delta_sep",
    "j",
    "log_escape",
    "success_lb",
    "vacuous",
];
pub const CONVERSE_HEADER: &[&str] = &["i", "n", "g", "cdf", "error_floor"];
pub const SCAN_HEADER: &[&str] = &["alpha", "i", "n", "g"];
pub const LPP_TRIALS_HEADER: &[&str] = &["k", "m", "eps", "trial", "G_km"];
pub const LPP_SUMMARY_HEADER: &[&str] = &[
    "k",
    "alpha",
    "eps",
    "trials",
    "mean_delay_per_hop",
    "prediction",
];
pub const COMPARE_HEADER: &[&str] = &[
    "x",
    "empirical",
    "empirical_se",
    "bound_or_prediction",
    "source_tag",
];
pub const FRONTS_HEADER: &[&str] = &["trial", "j", "n", "I"];

fn opt<T: Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Writes a schema-tagged CSV.
pub fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file))
}

fn results_record(r: &EstimateRow) -> Vec<String> {
    vec![
        r.scheme.as_str().to_string(),
        r.point.k.to_string(),
        r.point.m.to_string(),
        r.eps_spec.clone(),
        opt(r.point.c),
        opt(r.point.delta_sep),
        r.trials.to_string(),
        r.successes.to_string(),
        r.empirical.to_string(),
        r.empirical_se.to_string(),
        opt(r.analytic),
        r.analytic_kind.as_str().to_string(),
        r.verdict.as_str().to_string(),
        opt(r.event_rate),
        opt(r.mean_delay),
        opt(r.delay_se),
        opt(r.p50),
        opt(r.p90),
    ]
}

pub fn write_results(path: &Path, rows: &[EstimateRow]) -> Result<()> {
    write_table(path, RESULTS_HEADER, rows.iter().map(results_record))
}

/// Human-readable digest of the runs.
pub fn write_summary(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for w in reports.iter().flat_map(|r| &r.warnings) {
        writeln!(out, "warning: {w}")?;
    }
    for r in reports.iter().flat_map(|r| &r.rows) {
        let mut line = format!(
            "{} k={} m={} eps={}",
            r.scheme.as_str(),
            r.point.k,
            r.point.m,
            r.eps_spec
        );
        if let (Some(c), Some(d)) = (r.point.c, r.point.delta_sep) {
            line += &format!(" c={c} delta_sep={d}");
        }
        let what = if r.scheme == Scheme::Gsi {
            "deadline met"
        } else {
            "correct"
        };
        line += &format!(
            ": {what} in {}/{} trials ({:.6} +- {:.6})",
            r.successes, r.trials, r.empirical, r.empirical_se
        );
        if r.successes == r.trials {
            line += &format!(", all {what}");
        }
        if let Some(a) = r.analytic {
            line += &format!(", {} {a:.6}", r.analytic_kind.as_str());
        }
        if let Some(e) = r.event_rate {
            line += &format!(", event rate {e:.6}");
        }
        if let Some(d) = r.mean_delay {
            line += &format!(", mean delay {d:.3}");
        }
        line += &format!(" [{}]", r.verdict.as_str());
        writeln!(out, "{line}")?;
    }
    let fails: usize = reports.iter().map(ExperimentReport::failures).sum();
    let rows: usize = reports.iter().map(|r| r.rows.len()).sum();
    writeln!(out, "{rows} grid points, {fails} verdict failures")?;
    out.flush()?;
    Ok(())
}

pub fn write_bounds(path: &Path, rows: &[BoundRow]) -> Result<()> {
    write_table(
        path,
        BOUNDS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                r.m.to_string(),
                r.eps_spec.clone(),
                r.c.to_string(),
                r.delta_sep.to_string(),
                r.j.to_string(),
                r.log_escape.to_string(),
                r.success_lb.to_string(),
                (r.vacuous as u8).to_string(),
            ]
        }),
    )
}

pub fn write_converse(path: &Path, rows: &[ConverseRow]) -> Result<()> {
    write_table(
        path,
        CONVERSE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.i.to_string(),
                r.n.to_string(),
                r.g.to_string(),
                r.cdf.to_string(),
                r.error_floor.to_string(),
            ]
        }),
    )
}

pub fn write_scan(path: &Path, rows: &[ScanRow]) -> Result<()> {
    write_table(
        path,
        SCAN_HEADER,
        rows.iter().map(|r| {
            vec![
                r.alpha.to_string(),
                r.i.to_string(),
                r.n.to_string(),
                r.g.to_string(),
            ]
        }),
    )
}

pub fn write_lpp(dir: &Path, trials: &[LppTrialRow], summary: &[LppSummaryRow]) -> Result<()> {
    write_table(
        &dir.join("lpp_trials.csv"),
        LPP_TRIALS_HEADER,
        trials.iter().map(|r| {
            vec![
                r.k.to_string(),
                r.m.to_string(),
                r.eps.to_string(),
                r.trial.to_string(),
                r.g_km.to_string(),
            ]
        }),
    )?;
    write_table(
        &dir.join("lpp_summary.csv"),
        LPP_SUMMARY_HEADER,
        summary.iter().map(|r| {
            vec![
                r.k.to_string(),
                r.alpha.to_string(),
                r.eps.to_string(),
                r.trials.to_string(),
                r.mean_delay_per_hop.to_string(),
                r.prediction.to_string(),
            ]
        }),
    )
}

pub fn write_fronts(path: &Path, rows: &[FrontRow]) -> Result<()> {
    write_table(
        path,
        FRONTS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.trial.to_string(),
                r.j.to_string(),
                r.n.to_string(),
                r.position.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, Deserialize)]
struct ResultsLine {
    scheme: String,
    k: u64,
    m: u64,
    eps_spec: String,
    c: Option<f64>,
    delta_sep: Option<f64>,
    empirical: f64,
    empirical_se: f64,
    analytic: Option<f64>,
    analytic_kind: String,
    mean_delay: Option<f64>,
    delay_se: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct BoundsLine {
    k: u64,
    m: u64,
    eps_spec: String,
    c: f64,
    delta_sep: f64,
    success_lb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XVar {
    K,
    M,
    C,
    DeltaSep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub x: f64,
    pub empirical: f64,
    pub empirical_se: f64,
    pub bound_or_prediction: Option<f64>,
    pub source_tag: String,
}

/// `(k, m, eps_spec, c bits, delta_sep bits)`
type JoinKey = (u64, u64, String, u64, u64);

fn key(k: u64, m: u64, eps: &str, c: f64, d: f64) -> JoinKey {
    (k, m, eps.to_string(), c.to_bits(), d.to_bits())
}

/// Joins `results.csv` with an optional `bounds.csv` on
/// `(k, m, eps_spec, c, delta_sep)`. Bit-separation rows take their bound from
/// the bounds table when one is given and fail if it has no matching key.
/// GSI rows are reported per hop: mean completion over `k` against the
/// predicted delay per hop.
pub fn compare(results: &Path, bounds: Option<&Path>, x: XVar) -> Result<Vec<CompareRow>> {
    let mut table: Option<HashMap<JoinKey, f64>> = None;
    if let Some(path) = bounds {
        let mut map = HashMap::new();
        for line in reader(path)?.deserialize() {
            let b: BoundsLine = line.with_context(|| format!("reading {}", path.display()))?;
            map.insert(key(b.k, b.m, &b.eps_spec, b.c, b.delta_sep), b.success_lb);
        }
        table = Some(map);
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for line in reader(results)?.deserialize() {
        let r: ResultsLine = line.with_context(|| format!("reading {}", results.display()))?;
        let xv = match x {
            XVar::K => r.k as f64,
            XVar::M => r.m as f64,
            XVar::C => r.c.unwrap_or(f64::NAN),
            XVar::DeltaSep => r.delta_sep.unwrap_or(f64::NAN),
        };
        let row = match (r.scheme.as_str(), &table) {
            ("bitsep", Some(map)) => {
                let (c, d) = (r.c.unwrap_or(f64::NAN), r.delta_sep.unwrap_or(f64::NAN));
                match map.get(&key(r.k, r.m, &r.eps_spec, c, d)) {
                    Some(&lb) => CompareRow {
                        x: xv,
                        empirical: r.empirical,
                        empirical_se: r.empirical_se,
                        bound_or_prediction: Some(lb),
                        source_tag: "bounds".into(),
                    },
                    None => {
                        missing.push(format!(
                            "(k={}, m={}, eps_spec={}, c={c}, delta_sep={d})",
                            r.k, r.m, r.eps_spec
                        ));
                        continue;
                    }
                }
            }
            ("gsi", _) => {
                let k = r.k as f64;
                CompareRow {
                    x: xv,
                    empirical: r.mean_delay.map_or(f64::NAN, |d| d / k),
                    empirical_se: r.delay_se.map_or(f64::NAN, |s| s / k),
                    bound_or_prediction: r.analytic.map(|a| a / k),
                    source_tag: r.analytic_kind.clone(),
                }
            }
            _ => CompareRow {
                x: xv,
                empirical: r.empirical,
                empirical_se: r.empirical_se,
                bound_or_prediction: r.analytic,
                source_tag: r.analytic_kind.clone(),
            },
        };
        rows.push(row);
    }
    if !missing.is_empty() {
        bail!("no bounds row for {}", missing.join(", "));
    }
    Ok(rows)
}

pub fn write_compare(path: &Path, rows: &[CompareRow]) -> Result<()> {
    write_table(
        path,
        COMPARE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.x.to_string(),
                r.empirical.to_string(),
                r.empirical_se.to_string(),
                opt(r.bound_or_prediction),
                r.source_tag.clone(),
            ]
        }),
    )
}
