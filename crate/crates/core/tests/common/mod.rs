#![allow(dead_code)]

use std::path::Path;

use sepprobe::harness::{DeformationEntry, ExperimentConfig, ReferenceMode, StimulusEntry};
use sepprobe::metrics::MetricsOptions;
use sepprobe::separators::{ExternalSeparator, SeparatorDescriptor};
use sepprobe::stimulus::AlternatingMixtureSpec;

pub const FIXTURE: &str = env!("CARGO_BIN_EXE_fixture-separator");

/// External separator running the fixture in `mode`.
pub fn fixture(mode: &str) -> ExternalSeparator {
    let mut sep = ExternalSeparator::for_command(FIXTURE);
    sep.command_template.push_str(&format!(" --mode {mode}"));
    sep.timeout_s = 30.0;
    sep
}

pub fn fixture_descriptor(mode: &str) -> SeparatorDescriptor {
    SeparatorDescriptor::external(format!("fixture_{mode}"), fixture(mode))
}

pub fn tone_stimulus(period_ms: f64, duration_s: f64) -> StimulusEntry {
    StimulusEntry::Alternating {
        id: None,
        spec: AlternatingMixtureSpec::new(117.0, 201.0, 3, period_ms / 1000.0, duration_s),
    }
}

pub fn small_config(
    deformations: Vec<DeformationEntry>,
    separators: Vec<SeparatorDescriptor>,
) -> ExperimentConfig {
    ExperimentConfig {
        stimuli: vec![tone_stimulus(62.0, 1.0), tone_stimulus(100.0, 1.0)],
        deformations,
        separators,
        metrics: MetricsOptions::default(),
        reference_mode: ReferenceMode::Clean,
        output_dir: None,
        seed: 7,
        sample_rate_hz: 8000,
    }
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub const REPORT_FILES: [&str; 6] = [
    "rows.csv",
    "aggregate.csv",
    "assignment.csv",
    "histogram.csv",
    "summary.json",
    "config.resolved.json",
];
