use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{assignment_stats_from_f0s, AssignmentStats};
use crate::error::{Error, Result};
use crate::metrics::EvalRow;

use super::config::{ExperimentConfig, ReferenceMode};

/// Mean F0 of the two output channels of one row.
type ChannelF0s = (Option<f64>, Option<f64>);

pub const ROWS_FILE: &str = "rows.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.resolved.json";

#[derive(Clone, Debug, PartialEq)]
pub struct RowMetrics {
    pub eval: EvalRow,
    /// Per-channel mean F0 of the estimates (two-channel separators only).
    pub mean_f0_hz: Option<(Option<f64>, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowRecord {
    pub stimulus_id: String,
    pub deformation_id: String,
    pub separator_id: String,
    pub reference_mode: ReferenceMode,
    /// Failure message when the separator or the evaluation failed.
    pub outcome: std::result::Result<RowMetrics, String>,
}

impl RowRecord {
    pub fn sort_key(&self) -> (&str, &str, &str, ReferenceMode) {
        (
            &self.stimulus_id,
            &self.deformation_id,
            &self.separator_id,
            self.reference_mode,
        )
    }

    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

/// Summary over stimuli for one (deformation, separator, reference mode).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub deformation_id: String,
    pub separator_id: String,
    pub reference_mode: ReferenceMode,
    pub rows: usize,
    pub failed: usize,
    pub mean_si_sdr: Option<f64>,
    pub median_si_sdr: Option<f64>,
    pub mean_swap_events: Option<f64>,
    /// Fraction of successful rows with at least one swap event.
    pub swap_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct AssignmentSummary {
    included: usize,
    excluded: usize,
    frac_low_to_ch1: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    tool_version: &'static str,
    config_hash: String,
    seed: u64,
    rows: usize,
    failed_rows: usize,
    aggregate: &'a [AggregateRow],
    assignment: BTreeMap<&'a str, AssignmentSummary>,
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

fn aggregate(rows: &[RowRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(&str, &str, ReferenceMode), Vec<&RowRecord>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((&r.deformation_id, &r.separator_id, r.reference_mode))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((d, s, mode), members)| {
            let ok: Vec<&EvalRow> = members
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok().map(|m| &m.eval))
                .collect();
            let n = ok.len() as f64;
            let mut sdrs: Vec<f64> = ok.iter().map(|e| e.mean_si_sdr).collect();
            let mean_si_sdr = (!ok.is_empty()).then(|| sdrs.iter().sum::<f64>() / n);
            sdrs.sort_by(f64::total_cmp);
            AggregateRow {
                deformation_id: d.to_string(),
                separator_id: s.to_string(),
                reference_mode: mode,
                rows: members.len(),
                failed: members.len() - ok.len(),
                mean_si_sdr,
                median_si_sdr: median(&sdrs),
                mean_swap_events: (!ok.is_empty())
                    .then(|| ok.iter().map(|e| e.swap_events.len() as f64).sum::<f64>() / n),
                swap_rate: (!ok.is_empty()).then(|| {
                    ok.iter().filter(|e| !e.swap_events.is_empty()).count() as f64 / n
                }),
            }
        })
        .collect()
}

/// Results of one experiment, in deterministic order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub config: ExperimentConfig,
    pub rows: Vec<RowRecord>,
    pub aggregates: Vec<AggregateRow>,
    /// Per separator; rows of the first reference mode only, since F0s do
    /// not depend on the references.
    pub assignment: BTreeMap<String, std::result::Result<AssignmentStats, String>>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

fn write_csv<F>(path: &Path, header: &[&str], mut body: F) -> Result<()>
where
    F: FnMut(&mut csv::Writer<std::fs::File>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    body(&mut w).map_err(|e| csv_error(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

impl ReportBundle {
    pub fn new(config: ExperimentConfig, rows: Vec<RowRecord>) -> Self {
        let aggregates = aggregate(&rows);
        let first_mode = config.reference_mode.expand()[0];
        let mut f0s: BTreeMap<String, Vec<ChannelF0s>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.reference_mode == first_mode) {
            if let Ok(RowMetrics {
                mean_f0_hz: Some(pair),
                ..
            }) = &r.outcome
            {
                f0s.entry(r.separator_id.clone()).or_default().push(*pair);
            }
        }
        let assignment = f0s
            .into_iter()
            .map(|(sep, pairs)| {
                let stats = assignment_stats_from_f0s(&pairs).map_err(|e| e.to_string());
                (sep, stats)
            })
            .collect();
        Self {
            config,
            rows,
            aggregates,
            assignment,
        }
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn resolved_config_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.config)? + "\n")
    }

    /// Hex SHA-256 of the `config.resolved.json` bytes.
    pub fn config_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.resolved_config_json()?.as_bytes())))
    }

    /// Writes every report file into `dir`, creating it if needed.
    pub fn emit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths: Vec<PathBuf> = [
            ROWS_FILE,
            AGGREGATE_FILE,
            ASSIGNMENT_FILE,
            HISTOGRAM_FILE,
            SUMMARY_FILE,
            CONFIG_FILE,
        ]
        .iter()
        .map(|f| dir.join(f))
        .collect();
        self.write_rows(&paths[0])?;
        self.write_aggregate(&paths[1])?;
        self.write_assignment(&paths[2])?;
        self.write_histogram(&paths[3])?;

        let config_json = self.resolved_config_json()?;
        let summary = Summary {
            tool_version: env!("CARGO_PKG_VERSION"),
            config_hash: self.config_hash()?,
            seed: self.config.seed,
            rows: self.rows.len(),
            failed_rows: self.failed_rows(),
            aggregate: &self.aggregates,
            assignment: self
                .assignment
                .iter()
                .map(|(sep, stats)| {
                    let s = match stats {
                        Ok(a) => AssignmentSummary {
                            included: a.included,
                            excluded: a.excluded,
                            frac_low_to_ch1: Some(a.frac_low_to_ch1),
                            error: None,
                        },
                        Err(e) => AssignmentSummary {
                            included: 0,
                            excluded: 0,
                            frac_low_to_ch1: None,
                            error: Some(e.clone()),
                        },
                    };
                    (sep.as_str(), s)
                })
                .collect(),
        };
        let summary_json = serde_json::to_string_pretty(&summary)? + "\n";
        std::fs::write(&paths[4], summary_json).map_err(|e| Error::io(&paths[4], e))?;
        std::fs::write(&paths[5], config_json).map_err(|e| Error::io(&paths[5], e))?;
        Ok(paths)
    }

    fn write_rows(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &[
                "stimulus_id",
                "deformation_id",
                "separator_id",
                "reference_mode",
                "status",
                "mean_si_sdr",
                "si_sdr_per_channel",
                "permutation",
                "swap_events",
                "mean_f0_ch1",
                "mean_f0_ch2",
                "framewise_si_sdr",
                "error",
            ],
            |w| {
                for r in &self.rows {
                    let mut rec = vec![
                        r.stimulus_id.clone(),
                        r.deformation_id.clone(),
                        r.separator_id.clone(),
                        r.reference_mode.name().to_string(),
                    ];
                    match &r.outcome {
                        Ok(m) => {
                            let e = &m.eval;
                            let (f1, f2) = m.mean_f0_hz.unwrap_or((None, None));
                            rec.extend([
                                "ok".to_string(),
                                e.mean_si_sdr.to_string(),
                                join(&e.si_sdr_per_channel),
                                join(&e.chosen_permutation),
                                e.swap_events
                                    .iter()
                                    .map(|s| format!("{}+{}", s.start_frame, s.duration_frames))
                                    .collect::<Vec<_>>()
                                    .join(";"),
                                opt(f1),
                                opt(f2),
                                e.framewise_si_sdr
                                    .iter()
                                    .map(|v| v.map(|x| format!("{x:.3}")).unwrap_or_default())
                                    .collect::<Vec<_>>()
                                    .join(";"),
                                String::new(),
                            ]);
                        }
                        Err(msg) => {
                            rec.push("failed".into());
                            rec.extend(std::iter::repeat_n(String::new(), 7));
                            rec.push(msg.clone());
                        }
                    }
                    w.write_record(&rec)?;
                }
                Ok(())
            },
        )
    }

    fn write_aggregate(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &[
                "deformation_id",
                "separator_id",
                "reference_mode",
                "rows",
                "failed",
                "mean_si_sdr",
                "median_si_sdr",
                "mean_swap_events",
                "swap_rate",
            ],
            |w| {
                for a in &self.aggregates {
                    w.write_record([
                        a.deformation_id.clone(),
                        a.separator_id.clone(),
                        a.reference_mode.name().to_string(),
                        a.rows.to_string(),
                        a.failed.to_string(),
                        opt(a.mean_si_sdr),
                        opt(a.median_si_sdr),
                        opt(a.mean_swap_events),
                        opt(a.swap_rate),
                    ])?;
                }
                Ok(())
            },
        )
    }

    fn write_assignment(&self, path: &Path) -> Result<()> {
        let first_mode = self.config.reference_mode.expand()[0];
        write_csv(
            path,
            &[
                "separator_id",
                "stimulus_id",
                "deformation_id",
                "mean_f0_ch1",
                "mean_f0_ch2",
                "log2_ratio",
            ],
            |w| {
                for r in self.rows.iter().filter(|r| r.reference_mode == first_mode) {
                    let Ok(RowMetrics {
                        mean_f0_hz: Some((f1, f2)),
                        ..
                    }) = &r.outcome
                    else {
                        continue;
                    };
                    let ratio = match (f1, f2) {
                        (Some(a), Some(b)) => Some(b.log2() - a.log2()),
                        _ => None,
                    };
                    w.write_record([
                        r.separator_id.clone(),
                        r.stimulus_id.clone(),
                        r.deformation_id.clone(),
                        opt(*f1),
                        opt(*f2),
                        opt(ratio),
                    ])?;
                }
                Ok(())
            },
        )
    }

    fn write_histogram(&self, path: &Path) -> Result<()> {
        write_csv(path, &["separator_id", "bin_center", "density"], |w| {
            for (sep, stats) in &self.assignment {
                if let Ok(stats) = stats {
                    for bin in &stats.histogram {
                        w.write_record([
                            sep.clone(),
                            format!("{:.2}", bin.center),
                            bin.density.to_string(),
                        ])?;
                    }
                }
            }
            Ok(())
        })
    }
}
