//! Result rows and their persistence.
//!
//! One `ResultRecord` is the outcome of one replication at one grid
//! point. Records serialize to CSV (fixed, documented column order) or
//! JSONL (one object per line, stable field names). Floating values in
//! CSV carry 17 significant digits so a write-read round trip is exact.
//!
//! `wall_ms` is a diagnostic only: it is the one field excluded from the
//! canonical form used for determinism comparisons, since elapsed time
//! is never reproducible.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Experiment families the runner knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Connectivity probability over a retention grid.
    ConnectivitySweep,
    /// Distribution of the isolated-vertex count.
    PoissonCheck,
    /// Per-direction hyperplane connectivity and the quorum event.
    HyperplaneCheck,
    /// Exploration statistics conditioned on the quorum event.
    ExplorationCheck,
    /// Monte Carlo on instances small enough for the exact oracle.
    OracleCheck,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::ConnectivitySweep => "sweep",
            ExperimentKind::PoissonCheck => "poisson",
            ExperimentKind::HyperplaneCheck => "hyperplanes",
            ExperimentKind::ExplorationCheck => "explore",
            ExperimentKind::OracleCheck => "oracle",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "sweep" => ExperimentKind::ConnectivitySweep,
            "poisson" => ExperimentKind::PoissonCheck,
            "hyperplanes" => ExperimentKind::HyperplaneCheck,
            "explore" => ExperimentKind::ExplorationCheck,
            "oracle" => ExperimentKind::OracleCheck,
            other => return Err(Error::domain(format!("unknown experiment kind {other:?}"))),
        })
    }
}

/// Output file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

/// Outcome of one replication at one grid point.
///
/// Reproducible from `(config, grid_index, replication)` alone; `seed` is
/// the derived per-replication stream seed. Observables missing for the
/// experiment kind (or because the replication hit the resource guard)
/// are `None`, and `error` carries the guard message in the latter case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub kind: ExperimentKind,
    pub d: u32,
    pub n: u64,
    pub grid_index: u64,
    pub replication: u64,
    pub t: f64,
    pub lambda: f64,
    pub p: f64,
    pub master_seed: u64,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub is_connected: Option<bool>,
    pub num_components: Option<u64>,
    pub size_of_largest: Option<u64>,
    pub num_isolated: Option<u64>,
    pub giant_plus_isolated: Option<bool>,
    /// Per-direction counts of internally connected hyperplanes.
    pub hyperplane_connected_counts: Option<Vec<u64>>,
    /// The quorum event at `alpha` (every direction, both sides).
    pub quorum: Option<bool>,
    /// Qualifying edges explored (exploration experiments).
    pub explored: Option<u64>,
    /// Explorations that ended starved.
    pub starved: Option<u64>,
    pub wall_ms: f64,
    pub error: Option<String>,
}

pub const RECORD_CSV_HEADER: &str = "kind,d,n,grid_index,replication,t,lambda,p,master_seed,\
seed,alpha,is_connected,num_components,size_of_largest,num_isolated,giant_plus_isolated,\
hyperplane_connected_counts,quorum,explored,starved,wall_ms,error";

/// 17 significant digits: enough to reproduce any f64 exactly on parse.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(T::to_string).unwrap_or_default()
}

fn fmt_counts(c: &Option<Vec<u64>>) -> String {
    match c {
        None => String::new(),
        Some(v) => v.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
    }
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

impl ResultRecord {
    /// The canonical CSV line, minus the wall-time diagnostic; byte
    /// equality of these lines is the determinism contract.
    pub fn canonical_line(&self) -> String {
        let mut fields = self.csv_fields();
        fields.remove(20); // wall_ms
        fields.join(",")
    }

    pub fn to_csv_line(&self) -> String {
        self.csv_fields().join(",")
    }

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.kind.as_str().to_string(),
            self.d.to_string(),
            self.n.to_string(),
            self.grid_index.to_string(),
            self.replication.to_string(),
            fmt_f64(self.t),
            fmt_f64(self.lambda),
            fmt_f64(self.p),
            self.master_seed.to_string(),
            self.seed.to_string(),
            fmt_opt_f64(self.alpha),
            fmt_opt(&self.is_connected),
            fmt_opt(&self.num_components),
            fmt_opt(&self.size_of_largest),
            fmt_opt(&self.num_isolated),
            fmt_opt(&self.giant_plus_isolated),
            fmt_counts(&self.hyperplane_connected_counts),
            fmt_opt(&self.quorum),
            fmt_opt(&self.explored),
            fmt_opt(&self.starved),
            fmt_f64(self.wall_ms),
            csv_quote(self.error.as_deref().unwrap_or("")),
        ]
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields = split_csv(line);
        if fields.len() != 22 {
            return Err(Error::domain(format!(
                "expected 22 CSV fields, got {}",
                fields.len()
            )));
        }
        let f = &fields;
        Ok(ResultRecord {
            kind: ExperimentKind::parse(&f[0])?,
            d: parse(&f[1], "d")?,
            n: parse(&f[2], "n")?,
            grid_index: parse(&f[3], "grid_index")?,
            replication: parse(&f[4], "replication")?,
            t: parse(&f[5], "t")?,
            lambda: parse(&f[6], "lambda")?,
            p: parse(&f[7], "p")?,
            master_seed: parse(&f[8], "master_seed")?,
            seed: parse(&f[9], "seed")?,
            alpha: parse_opt(&f[10], "alpha")?,
            is_connected: parse_opt(&f[11], "is_connected")?,
            num_components: parse_opt(&f[12], "num_components")?,
            size_of_largest: parse_opt(&f[13], "size_of_largest")?,
            num_isolated: parse_opt(&f[14], "num_isolated")?,
            giant_plus_isolated: parse_opt(&f[15], "giant_plus_isolated")?,
            hyperplane_connected_counts: parse_counts(&f[16])?,
            quorum: parse_opt(&f[17], "quorum")?,
            explored: parse_opt(&f[18], "explored")?,
            starved: parse_opt(&f[19], "starved")?,
            wall_ms: parse(&f[20], "wall_ms")?,
            error: if f[21].is_empty() {
                None
            } else {
                Some(f[21].clone())
            },
        })
    }
}

fn parse<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::domain(format!("bad value {s:?} for field {name}")))
}

fn parse_opt<T: std::str::FromStr>(s: &str, name: &str) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse(s, name).map(Some)
    }
}

fn parse_counts(s: &str) -> Result<Option<Vec<u64>>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.split(';')
        .map(|part| parse(part, "hyperplane_connected_counts"))
        .collect::<Result<Vec<u64>>>()
        .map(Some)
}

/// Split one CSV line; only the last field (`error`) may be quoted.
fn split_csv(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if current.is_empty() && !quoted => quoted = true,
            '"' if quoted => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    current.push('"');
                } else {
                    quoted = false;
                }
            }
            ',' if !quoted => fields.push(std::mem::take(&mut current)),
            c => current.push(c),
        }
    }
    fields.push(current);
    fields
}

/// Per-grid-point aggregate of a record set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: ExperimentKind,
    pub d: u32,
    pub n: u64,
    pub grid_index: u64,
    pub t: f64,
    pub lambda: f64,
    pub p: f64,
    pub num_records: u64,
    pub num_errors: u64,
    pub connected: u64,
    pub p_connected: f64,
    /// 99% Wilson score interval for the connectivity proportion.
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Window limit `exp(-exp(-t))` at this grid point.
    pub predicted_connectivity: f64,
    pub mean_isolated: f64,
    /// Poisson rate the empirical distribution is compared against.
    pub mu: f64,
    pub tv_distance: f64,
    /// Frequency of the quorum event, when the experiment tracked it.
    pub quorum_frequency: Option<f64>,
    /// Fraction of explorations ending starved, when tracked.
    pub starved_fraction: Option<f64>,
    /// Empirical masses of the isolated-vertex count at 0..=20.
    pub y_pmf: Vec<f64>,
    /// Empirical mass above 20.
    pub y_tail: f64,
}

pub const SUMMARY_CSV_HEADER: &str = "kind,d,n,grid_index,t,lambda,p,num_records,num_errors,\
connected,p_connected,wilson_low,wilson_high,predicted_connectivity,mean_isolated,mu,\
tv_distance,quorum_frequency,starved_fraction,y_pmf,y_tail";

impl SummaryRow {
    pub fn to_csv_line(&self) -> String {
        let mut pmf = String::new();
        for (k, mass) in self.y_pmf.iter().enumerate() {
            if *mass > 0.0 {
                if !pmf.is_empty() {
                    pmf.push(';');
                }
                let _ = write!(pmf, "{k}:{}", fmt_f64(*mass));
            }
        }
        [
            self.kind.as_str().to_string(),
            self.d.to_string(),
            self.n.to_string(),
            self.grid_index.to_string(),
            fmt_f64(self.t),
            fmt_f64(self.lambda),
            fmt_f64(self.p),
            self.num_records.to_string(),
            self.num_errors.to_string(),
            self.connected.to_string(),
            fmt_f64(self.p_connected),
            fmt_f64(self.wilson_low),
            fmt_f64(self.wilson_high),
            fmt_f64(self.predicted_connectivity),
            fmt_f64(self.mean_isolated),
            fmt_f64(self.mu),
            fmt_f64(self.tv_distance),
            fmt_opt_f64(self.quorum_frequency),
            fmt_opt_f64(self.starved_fraction),
            pmf,
            fmt_f64(self.y_tail),
        ]
        .join(",")
    }
}

// ---------------------------------------------------------------------
// File IO.
// ---------------------------------------------------------------------

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write records in the given format. CSV starts with the fixed header;
/// an empty record set yields a header-only CSV or an empty JSONL.
pub fn write_records(path: &Path, format: OutputFormat, records: &[ResultRecord]) -> Result<()> {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(RECORD_CSV_HEADER);
            out.push('\n');
            for r in records {
                out.push_str(&r.to_csv_line());
                out.push('\n');
            }
        }
        OutputFormat::Jsonl => {
            for r in records {
                let line = serde_json::to_string(r)
                    .map_err(|e| Error::domain(format!("serialize record: {e}")))?;
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

/// Read records back; the inverse of [`write_records`].
pub fn read_records(path: &Path, format: OutputFormat) -> Result<Vec<ResultRecord>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut records = Vec::new();
    match format {
        OutputFormat::Csv => {
            let mut lines = text.lines();
            match lines.next() {
                Some(header) if header == RECORD_CSV_HEADER => {}
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        message: "missing or unexpected CSV header".to_string(),
                    })
                }
            }
            for line in lines {
                if line.is_empty() {
                    continue;
                }
                records.push(ResultRecord::from_csv_line(line).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?);
            }
        }
        OutputFormat::Jsonl => {
            for line in text.lines() {
                if line.is_empty() {
                    continue;
                }
                records.push(serde_json::from_str(line).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?);
            }
        }
    }
    Ok(records)
}

/// Write summary rows (CSV with header, or JSONL).
pub fn write_summaries(path: &Path, format: OutputFormat, rows: &[SummaryRow]) -> Result<()> {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(SUMMARY_CSV_HEADER);
            out.push('\n');
            for r in rows {
                out.push_str(&r.to_csv_line());
                out.push('\n');
            }
        }
        OutputFormat::Jsonl => {
            for r in rows {
                let line = serde_json::to_string(r)
                    .map_err(|e| Error::domain(format!("serialize summary: {e}")))?;
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}
