//! Versioned CSV outputs.
//!
//! All files are comma-separated UTF-8 with a header row and LF line
//! endings. The first column of every row is the schema version. Floats are
//! written in shortest round-trip scientific notation; an empty cell means
//! the quantity does not apply to that row.

use std::fs::File;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const META_TRACE_FILE: &str = "meta_trace.csv";

pub const METRICS_HEADER: [&str; 16] = [
    "schema",
    "run_id",
    "arm",
    "seed",
    "task_index",
    "task",
    "phase",
    "status",
    "epoch",
    "l_pde",
    "l_data",
    "l_gam",
    "l_support",
    "l_query",
    "field_mse",
    "wall_ms",
];

pub const SUMMARY_HEADER: [&str; 11] = [
    "schema",
    "run_id",
    "arm",
    "phase",
    "seed",
    "epoch",
    "n_tasks",
    "mean_field_mse",
    "mean_l_pde",
    "mean_l_data",
    "max_abs",
];

pub const META_TRACE_HEADER: [&str; 9] = [
    "schema",
    "run_id",
    "arm",
    "seed",
    "epoch",
    "l_meta",
    "gam_calls_support",
    "gam_calls_query",
    "wall_ms",
];

/// Columns that may differ between otherwise identical runs.
pub const TIMING_COLUMNS: [&str; 1] = ["wall_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Diverged,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Diverged => "diverged",
        }
    }
}

/// One row of `metrics.csv`: a task at a logged epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub run_id: String,
    pub arm: String,
    pub seed: u64,
    pub task_index: Option<usize>,
    pub task: String,
    pub phase: String,
    pub status: Status,
    pub epoch: usize,
    pub l_pde: Option<f64>,
    pub l_data: Option<f64>,
    pub l_gam: Option<f64>,
    pub l_support: Option<f64>,
    pub l_query: Option<f64>,
    pub field_mse: Option<f64>,
    pub wall_ms: u128,
}

impl MetricsRecord {
    pub fn new(run_id: &str, arm: &str, seed: u64, phase: &str) -> Self {
        MetricsRecord {
            run_id: run_id.to_string(),
            arm: arm.to_string(),
            seed,
            task_index: None,
            task: String::new(),
            phase: phase.to_string(),
            status: Status::Ok,
            epoch: 0,
            l_pde: None,
            l_data: None,
            l_gam: None,
            l_support: None,
            l_query: None,
            field_mse: None,
            wall_ms: 0,
        }
    }

    fn fields(&self) -> Vec<String> {
        vec![
            SCHEMA_VERSION.to_string(),
            self.run_id.clone(),
            self.arm.clone(),
            self.seed.to_string(),
            self.task_index.map(|i| i.to_string()).unwrap_or_default(),
            self.task.clone(),
            self.phase.clone(),
            self.status.name().to_string(),
            self.epoch.to_string(),
            num(self.l_pde),
            num(self.l_data),
            num(self.l_gam),
            num(self.l_support),
            num(self.l_query),
            num(self.field_mse),
            self.wall_ms.to_string(),
        ]
    }
}

/// Mean over the tasks of one arm and seed at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub run_id: String,
    pub arm: String,
    pub phase: String,
    pub seed: u64,
    pub epoch: usize,
    pub n_tasks: usize,
    pub mean_field_mse: f64,
    pub mean_l_pde: f64,
    pub mean_l_data: f64,
    pub max_abs: Option<f64>,
}

impl SummaryRecord {
    fn fields(&self) -> Vec<String> {
        vec![
            SCHEMA_VERSION.to_string(),
            self.run_id.clone(),
            self.arm.clone(),
            self.phase.clone(),
            self.seed.to_string(),
            self.epoch.to_string(),
            self.n_tasks.to_string(),
            num(Some(self.mean_field_mse)),
            num(Some(self.mean_l_pde)),
            num(Some(self.mean_l_data)),
            num(self.max_abs),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaTraceRecord {
    pub run_id: String,
    pub arm: String,
    pub seed: u64,
    pub epoch: usize,
    pub l_meta: f64,
    pub gam_calls_support: usize,
    pub gam_calls_query: usize,
    pub wall_ms: u128,
}

impl MetaTraceRecord {
    fn fields(&self) -> Vec<String> {
        vec![
            SCHEMA_VERSION.to_string(),
            self.run_id.clone(),
            self.arm.clone(),
            self.seed.to_string(),
            self.epoch.to_string(),
            num(Some(self.l_meta)),
            self.gam_calls_support.to_string(),
            self.gam_calls_query.to_string(),
            self.wall_ms.to_string(),
        ]
    }
}

pub fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_nan() => "NaN".to_string(),
        Some(x) => format!("{x:e}"),
        None => String::new(),
    }
}

/// Write `rows` under `header` to `path`, replacing any existing file.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_metrics(path: &Path, rows: &[MetricsRecord]) -> CliResult<()> {
    write_csv(path, &METRICS_HEADER, rows.iter().map(MetricsRecord::fields))
}

pub fn write_summary(path: &Path, rows: &[SummaryRecord]) -> CliResult<()> {
    write_csv(path, &SUMMARY_HEADER, rows.iter().map(SummaryRecord::fields))
}

pub fn write_meta_trace(path: &Path, rows: &[MetaTraceRecord]) -> CliResult<()> {
    write_csv(path, &META_TRACE_HEADER, rows.iter().map(MetaTraceRecord::fields))
}

/// A CSV file read back as header plus string rows, with the schema
/// version checked.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Table> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header.first().map(String::as_str) != Some("schema") {
            return Err(CliError::Core(gampinn_core::Error::Format(format!(
                "{}: first column is not `schema`",
                path.display()
            ))));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.get(0) != Some(&SCHEMA_VERSION.to_string()[..]) {
                return Err(CliError::Core(gampinn_core::Error::Format(format!(
                    "{}: unsupported schema version `{}`",
                    path.display(),
                    rec.get(0).unwrap_or("")
                ))));
            }
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Core(gampinn_core::Error::Format(format!("missing column `{name}`"))))
    }

    /// The table with timing columns removed, for run-to-run comparison.
    pub fn without_timing(&self) -> Table {
        let keep: Vec<usize> = (0..self.header.len())
            .filter(|&i| !TIMING_COLUMNS.contains(&self.header[i].as_str()))
            .collect();
        Table {
            header: keep.iter().map(|&i| self.header[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.0, -2.5e-7, 0.1 + 0.2, 1e300] {
            let s = num(Some(v));
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(num(None), "");
        assert_eq!(num(Some(f64::NAN)), "NaN");
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(METRICS_FILE);
        let mut rec = MetricsRecord::new("r", "maml", 3, "finetune");
        rec.task = "equation=burgers family=sincos params=0.3".into();
        rec.field_mse = Some(0.25);
        rec.wall_ms = 17;
        write_metrics(&path, &[rec]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        let t = Table::read(&path).unwrap();
        assert_eq!(t.header, METRICS_HEADER);
        assert_eq!(t.rows[0][t.column("field_mse").unwrap()], "2.5e-1");
        assert_eq!(t.rows[0][t.column("l_gam").unwrap()], "");
        assert!(t.without_timing().column("wall_ms").is_err());
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "schema,a\n9,1\n").unwrap();
        assert!(Table::read(&path).is_err());
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(Table::read(&path).is_err());
    }
}
