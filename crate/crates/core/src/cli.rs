//! Running configs and writing reports.
//!
//! A report is a TOML document:
//!
//! ```toml
//! [report]
//! id = "product"
//! experiment = "product"
//! config_hash = "…"        # sha256 of the [config] table below
//! seed = 7
//! pass = true
//! outcome = "rate"
//! notes = []
//!
//! [config]                 # the validated config, defaults filled
//! [[rows]]                 # k, hbar, error, norm_kind[, tolerance]
//! [[fits]]                 # slope fits, one per norm kind
//! [[table]]                # star_table only
//! [timing]                 # timestamp and wall_time_s; the only non-deterministic part
//! ```
//!
//! The CSV companion has the header `k,hbar,error,norm_kind`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{run_experiment, ConvergenceReport, DecayCheck, ErrorRow, FitSummary, StarTableRow};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::quantization::{assemble_toeplitz, HilbertSpec};

pub const CSV_HEADER: &str = "k,hbar,error,norm_kind";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub id: String,
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub pass: bool,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<i64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub timestamp: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub report: ReportHeader,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayCheck>,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<ErrorRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<FitSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<StarTableRow>,
    pub timing: Timing,
}

impl ReportFile {
    pub fn new(config: &ExperimentConfig, result: ConvergenceReport, wall_time_s: f64) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ReportFile {
            report: ReportHeader {
                id: result.id,
                experiment: result.experiment,
                config_hash: config.hash(),
                seed: result.seed,
                pass: result.pass,
                outcome: result.outcome,
                sign: result.sign,
                notes: result.notes,
            },
            decay: result.decay,
            config: config.clone(),
            rows: result.rows,
            fits: result.fits,
            table: result.table,
            timing: Timing {
                timestamp,
                wall_time_s,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("<report>", e.message().to_string()))
    }

    /// Whether the recorded hash matches a rehash of the echoed config.
    pub fn hash_matches(&self) -> bool {
        self.config.hash() == self.report.config_hash
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.k, r.hbar, r.error, r.norm_kind);
        }
        out
    }
}

/// Files written by [`run`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: ReportFile,
    pub report_path: PathBuf,
    pub csv_path: PathBuf,
}

impl RunOutput {
    pub fn pass(&self) -> bool {
        self.report.report.pass
    }
}

/// Runs the experiment and writes its report and CSV under `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    let start = Instant::now();
    let result = run_experiment(config)?;
    let report = ReportFile::new(config, result, start.elapsed().as_secs_f64());
    fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join(&config.output.report);
    let csv_path = out_dir.join(&config.output.csv);
    fs::write(&report_path, report.to_toml())?;
    fs::write(&csv_path, report.to_csv())?;
    Ok(RunOutput {
        report,
        report_path,
        csv_path,
    })
}

/// Human-readable star-product table.
pub fn format_star_table(rows: &[StarTableRow]) -> String {
    let mut out = String::from("order\tp\tq\tre\tim\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{:?}\t{:?}\t{}\t{}", r.order, r.p, r.q, r.re, r.im);
    }
    out
}

/// Writes `toeplitz_k{k}.csv` of `f` for every level of the sweep.
pub fn assemble(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (f, _) = config.functions()?;
    let f = f.ok_or_else(|| Error::config("f", "required for assemble"))?;
    fs::create_dir_all(out_dir)?;
    config
        .levels()
        .into_iter()
        .map(|k| {
            let spec = HilbertSpec::new(config.n, k, config.polarization)?;
            let q = assemble_toeplitz(&f, spec)?;
            let path = out_dir.join(format!("toeplitz_k{}.csv", k));
            fs::write(&path, q.to_csv())?;
            Ok(path)
        })
        .collect()
}

/// Strips the `[timing]` table, the only part of a report that varies between runs.
pub fn without_timing(report: &str) -> String {
    let mut out = String::new();
    let mut skipping = false;
    for line in report.lines() {
        if line.starts_with('[') {
            skipping = line.trim() == "[timing]";
        }
        if !skipping {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}
