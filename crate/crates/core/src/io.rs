//! Plain-text and JSON artifact formats.
//!
//! Counts file:
//!
//! ```text
//! # comment lines and blank lines are ignored
//! <M> <D_lim> <N>
//! <n_j> ket <re_0> <im_0> ... <re_{D-1}> <im_{D-1}>
//! <n_j> matrix <re_00> <im_00> <re_01> <im_01> ...    (row-major D×D)
//! ```
//!
//! Estimator file:
//!
//! ```text
//! # estimator
//! dim <d>
//! limit_dim <D_lim>
//! mask <i_1> ... <i_d>
//! <re> <im> <re> <im> ...    (one line per row)
//! ```
//!
//! Floats are written in shortest round-trip form, so writing, reading and
//! writing again reproduces the same bytes.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::measurement::{CountData, POMSet};
use crate::nucleation::{NucleationStep, NucleationTrace};
use crate::quantum::{ComplexMatrix, DensityMatrix, POMOutcome, SubspaceMask, Tolerances};
use crate::validation::BootstrapStats;

/// Tolerance on negative eigenvalues and Hermiticity of ingested outcomes.
pub const INGEST_TOLERANCE: f64 = 1e-8;

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn push_complex(out: &mut String, z: C64) {
    write!(out, " {:e} {:e}", z.re, z.im).unwrap();
}

// counts -------------------------------------------------------------------

pub fn format_counts(pom: &POMSet, counts: &CountData) -> Result<String> {
    if pom.len() != counts.len() {
        return Err(Error::DimensionMismatch { expected: pom.len(), found: counts.len() });
    }
    let mut out = String::from("# cv-nucleation counts\n");
    writeln!(out, "{} {} {}", pom.len(), pom.dim(), counts.total()).unwrap();
    for (outcome, n) in pom.outcomes().iter().zip(counts.counts()) {
        write!(out, "{n}").unwrap();
        match outcome {
            POMOutcome::RankOne(v) => {
                out.push_str(" ket");
                v.iter().for_each(|&z| push_complex(&mut out, z));
            }
            POMOutcome::General(m) => {
                out.push_str(" matrix");
                m.row_major().into_iter().for_each(|z| push_complex(&mut out, z));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_counts(path: &Path, pom: &POMSet, counts: &CountData) -> Result<()> {
    write_file(path, &format_counts(pom, counts)?)
}

struct Lines<'a> {
    path: String,
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(path: &Path, text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Lines { path: path.display().to_string(), inner: it.peekable() }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        self.inner.next()
    }

    fn err(&self, line: usize, message: impl fmt::Display) -> Error {
        Error::Parse { path: self.path.clone(), line, message: message.to_string() }
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| self.err(0, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines<'_>, line: usize, token: &str, what: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    token.parse().map_err(|e| lines.err(line, format!("bad {what} {token:?}: {e}")))
}

fn parse_complex(lines: &Lines<'_>, line: usize, tokens: &[&str]) -> Result<Vec<C64>> {
    tokens
        .chunks(2)
        .map(|pair| {
            let re = parse_num(lines, line, pair[0], "real part")?;
            let im = parse_num(lines, line, pair[1], "imaginary part")?;
            Ok(C64::new(re, im))
        })
        .collect()
}

pub fn parse_counts(path: &Path, text: &str) -> Result<(POMSet, CountData)> {
    let mut lines = Lines::new(path, text);
    let (hl, header) = lines.expect("header")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(lines.err(hl, "header must be `M D_lim N`"));
    }
    let m: usize = parse_num(&lines, hl, fields[0], "outcome count")?;
    let dim: usize = parse_num(&lines, hl, fields[1], "dimension")?;
    let total: u64 = parse_num(&lines, hl, fields[2], "event total")?;
    if m == 0 || dim == 0 {
        return Err(lines.err(hl, "outcome count and dimension must be positive"));
    }

    let mut outcomes = Vec::with_capacity(m);
    let mut counts = Vec::with_capacity(m);
    for j in 0..m {
        let (ln, record) = lines.expect(&format!("outcome {j}"))?;
        let tokens: Vec<&str> = record.split_whitespace().collect();
        if tokens.len() < 2 {
            return Err(lines.err(ln, format!("outcome {j}: record too short")));
        }
        counts.push(parse_num::<u64>(&lines, ln, tokens[0], "count")?);
        let values = &tokens[2..];
        let outcome = match tokens[1] {
            "ket" => {
                if values.len() != 2 * dim {
                    return Err(lines.err(ln, format!("outcome {j}: expected {} reals, found {}", 2 * dim, values.len())));
                }
                POMOutcome::rank_one(parse_complex(&lines, ln, values)?)
            }
            "matrix" => {
                if values.len() != 2 * dim * dim {
                    return Err(lines.err(
                        ln,
                        format!("outcome {j}: expected {} reals, found {}", 2 * dim * dim, values.len()),
                    ));
                }
                let entries = parse_complex(&lines, ln, values)?;
                ComplexMatrix::from_row_major(dim, &entries)
                    .and_then(|mat| POMOutcome::from_matrix_with(mat, INGEST_TOLERANCE, INGEST_TOLERANCE))
            }
            other => return Err(lines.err(ln, format!("outcome {j}: unknown record kind {other:?}"))),
        }
        .map_err(|e| lines.err(ln, format!("outcome {j}: {e}")))?;
        outcomes.push(outcome);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(lines.err(ln, format!("more than the declared {m} outcome records")));
    }
    let sum: u64 = counts.iter().sum();
    if sum != total {
        return Err(lines.err(hl, format!("counts sum to {sum}, header declares N = {total}")));
    }
    let counts = CountData::new(counts, total).map_err(|e| lines.err(hl, e))?;
    Ok((POMSet::new(outcomes)?, counts))
}

/// Reads a counts file, enforcing every outcome and count invariant.
pub fn ingest_counts(path: &Path) -> Result<(POMSet, CountData)> {
    parse_counts(path, &read_file(path)?)
}

// estimators ---------------------------------------------------------------

pub fn format_estimator(rho: &DensityMatrix, mask: &SubspaceMask) -> Result<String> {
    if rho.dim() != mask.len() {
        return Err(Error::DimensionMismatch { expected: mask.len(), found: rho.dim() });
    }
    let mut out = String::from("# estimator\n");
    writeln!(out, "dim {}", rho.dim()).unwrap();
    writeln!(out, "limit_dim {}", mask.limit_dim()).unwrap();
    out.push_str("mask");
    mask.indices().iter().for_each(|i| write!(out, " {i}").unwrap());
    out.push('\n');
    for r in 0..rho.dim() {
        let mut row = String::new();
        (0..rho.dim()).for_each(|c| push_complex(&mut row, rho.get(r, c)));
        out.push_str(row.trim_start());
        out.push('\n');
    }
    Ok(out)
}

pub fn write_estimator(path: &Path, rho: &DensityMatrix, mask: &SubspaceMask) -> Result<()> {
    write_file(path, &format_estimator(rho, mask)?)
}

fn keyed<'a>(lines: &mut Lines<'a>, key: &str) -> Result<(usize, Vec<&'a str>)> {
    let (ln, l) = lines.expect(key)?;
    let mut tokens = l.split_whitespace();
    if tokens.next() != Some(key) {
        return Err(lines.err(ln, format!("expected `{key}`")));
    }
    Ok((ln, tokens.collect()))
}

pub fn parse_estimator(path: &Path, text: &str) -> Result<(DensityMatrix, SubspaceMask)> {
    let mut lines = Lines::new(path, text);
    let (ln, v) = keyed(&mut lines, "dim")?;
    let dim: usize = parse_num(&lines, ln, v.first().copied().unwrap_or(""), "dimension")?;
    let (ln, v) = keyed(&mut lines, "limit_dim")?;
    let limit: usize = parse_num(&lines, ln, v.first().copied().unwrap_or(""), "limit dimension")?;
    let (ln, v) = keyed(&mut lines, "mask")?;
    let indices = v.iter().map(|t| parse_num(&lines, ln, t, "mask index")).collect::<Result<Vec<usize>>>()?;
    let mask = SubspaceMask::new(limit, indices).map_err(|e| lines.err(ln, e))?;
    if mask.len() != dim {
        return Err(lines.err(ln, format!("mask has {} indices, dim is {dim}", mask.len())));
    }
    let mut entries = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        let (ln, row) = lines.expect(&format!("matrix row {r}"))?;
        let tokens: Vec<&str> = row.split_whitespace().collect();
        if tokens.len() != 2 * dim {
            return Err(lines.err(ln, format!("row {r}: expected {} reals, found {}", 2 * dim, tokens.len())));
        }
        entries.extend(parse_complex(&lines, ln, &tokens)?);
    }
    let rho = ComplexMatrix::from_row_major(dim, &entries)
        .and_then(|m| DensityMatrix::with_tolerances(m, &Tolerances { psd: INGEST_TOLERANCE, ..Tolerances::DEFAULT }))
        .map_err(|e| lines.err(0, e))?;
    Ok((rho, mask))
}

pub fn read_estimator(path: &Path) -> Result<(DensityMatrix, SubspaceMask)> {
    parse_estimator(path, &read_file(path)?)
}

// traces and statistics ----------------------------------------------------

/// A float that survives JSON even when infinite (written as a string).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&self.0.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Real(x)),
            Repr::Str(s) => s.parse().map(Real).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub recon_dim: usize,
    pub limit_dim: usize,
    pub mask: Vec<usize>,
    pub log_likelihood: Real,
    pub iterations: usize,
    pub converged: bool,
    pub prerr: Option<Real>,
    pub stats: Option<BootstrapStats>,
}

impl From<&NucleationStep> for StepRecord {
    fn from(s: &NucleationStep) -> Self {
        StepRecord {
            step: s.step,
            recon_dim: s.recon_dim,
            limit_dim: s.mask.limit_dim(),
            mask: s.mask.indices().to_vec(),
            log_likelihood: Real(s.log_likelihood),
            iterations: s.ml_result.iterations,
            converged: s.ml_result.converged,
            prerr: s.prerr.map(Real),
            stats: s.prerr_stats.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub steps: Vec<StepRecord>,
}

impl From<&NucleationTrace> for TraceRecord {
    fn from(t: &NucleationTrace) -> Self {
        TraceRecord { steps: t.steps.iter().map(StepRecord::from).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub recon_dim: usize,
    pub prerr: Real,
    pub stats: BootstrapStats,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn from_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse { path: path.display().to_string(), line: e.line(), message: e.to_string() })
}

pub fn format_trace_json(trace: &TraceRecord) -> String {
    to_json(trace)
}

pub fn parse_trace_json(path: &Path, text: &str) -> Result<TraceRecord> {
    from_json(path, text)
}

pub fn read_trace_json(path: &Path) -> Result<TraceRecord> {
    parse_trace_json(path, &read_file(path)?)
}

fn join_indices(idx: &[usize], sep: &str) -> String {
    idx.iter().map(usize::to_string).collect::<Vec<_>>().join(sep)
}

pub fn format_trace_csv(trace: &TraceRecord) -> String {
    let mut out = String::from("step,recon_dim,mask,log_likelihood,prerr,iterations,converged\n");
    for s in &trace.steps {
        let prerr = s.prerr.map(|p| p.0.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.step,
            s.recon_dim,
            join_indices(&s.mask, " "),
            s.log_likelihood.0,
            prerr,
            s.iterations,
            s.converged
        )
        .unwrap();
    }
    out
}

pub fn stats_records(trace: &TraceRecord) -> Vec<StatsRecord> {
    trace
        .steps
        .iter()
        .filter_map(|s| Some(StatsRecord { recon_dim: s.recon_dim, prerr: s.prerr?, stats: s.stats.clone()? }))
        .collect()
}

pub fn format_stats_json(stats: &[StatsRecord]) -> String {
    to_json(&stats)
}

pub fn parse_stats_json(path: &Path, text: &str) -> Result<Vec<StatsRecord>> {
    from_json(path, text)
}

pub const PLOT_HEADER: &str =
    "recon_dim,prerr,ci_low,ci_high,q1,q2,q3,mean,whisker_low,whisker_high,outliers";

/// One row per step, ordered by reconstruction dimension. Statistics columns
/// are empty for steps without bootstrap statistics; outliers are joined
/// with `;`.
pub fn format_plot_csv(trace: &TraceRecord) -> String {
    let mut steps: Vec<&StepRecord> = trace.steps.iter().collect();
    steps.sort_by_key(|s| s.recon_dim);
    let mut out = format!("{PLOT_HEADER}\n");
    for s in steps {
        let prerr = s.prerr.map(|p| p.0.to_string()).unwrap_or_default();
        write!(out, "{},{}", s.recon_dim, prerr).unwrap();
        match &s.stats {
            Some(b) => {
                for x in [b.ci_low, b.ci_high, b.q1, b.q2, b.q3, b.mean, b.whisker_low, b.whisker_high] {
                    write!(out, ",{x}").unwrap();
                }
                let outliers: Vec<String> = b.outliers.iter().map(f64::to_string).collect();
                write!(out, ",{}", outliers.join(";")).unwrap();
            }
            None => out.push_str(",,,,,,,,,"),
        }
        out.push('\n');
    }
    out
}

/// Writes `plot.csv` into `output_dir`.
pub fn emit_plot_data(trace: &NucleationTrace, output_dir: &Path) -> Result<PathBuf> {
    if !trace.steps.iter().any(|s| s.prerr_stats.is_some()) {
        return Err(Error::config("plot data needs at least one step with bootstrap statistics"));
    }
    let path = output_dir.join("plot.csv");
    write_file(&path, &format_plot_csv(&TraceRecord::from(trace)))?;
    Ok(path)
}
