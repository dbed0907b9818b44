//! Built-in experiment grids. The tone stimuli stand in for speech when no
//! recordings are configured; swap `stimuli` for a manifest to run on a
//! corpus.

use crate::deform::FilterPreset;
use crate::error::{Error, Result};
use crate::metrics::MetricsOptions;
use crate::separators::SeparatorDescriptor;
use crate::signal::CANONICAL_SAMPLE_RATE;
use crate::stimulus::{AlternatingMixtureSpec, MuteTarget, DEFAULT_RAMP_MS};

use super::config::{DeformationEntry, ExperimentConfig, ReferenceMode, StimulusEntry};

pub const PRESET_NAMES: [&str; 4] = ["fig3", "fig5", "fig6", "fig7"];

pub const PRESET_F0_A: f64 = 117.0;
pub const PRESET_F0_B: f64 = 201.0;
pub const PRESET_HARMONICS: u32 = 5;
pub const PRESET_PERIOD_S: f64 = 0.062;
pub const PRESET_DURATION_S: f64 = 3.0;
pub const MUTE_GRID_PERIODS_MS: [f64; 6] = [30.0, 45.0, 62.0, 80.0, 100.0, 125.0];
pub const MUTE_GRID_DURATIONS_MS: [f64; 7] = [10.0, 15.0, 20.0, 31.0, 50.0, 75.0, 100.0];
pub const MUTE_GRID_SEEDS: u32 = 10;

/// F0 pairs for the assignment-bias preset, each in both orders so an
/// order-preserving separator scores exactly 0.5.
const ASSIGNMENT_PAIRS_HZ: [(f64, f64); 6] = [
    (100.0, 150.0),
    (110.0, 210.0),
    (117.0, 201.0),
    (130.0, 180.0),
    (150.0, 260.0),
    (180.0, 300.0),
];

fn base(stimuli: Vec<StimulusEntry>, deformations: Vec<DeformationEntry>) -> ExperimentConfig {
    ExperimentConfig {
        stimuli,
        deformations,
        separators: vec![
            SeparatorDescriptor::irm(),
            SeparatorDescriptor::ibm(),
            SeparatorDescriptor::identity_split(),
        ],
        metrics: MetricsOptions::default(),
        reference_mode: ReferenceMode::Clean,
        output_dir: None,
        seed: 0,
        sample_rate_hz: CANONICAL_SAMPLE_RATE,
    }
}

fn probe_tone() -> StimulusEntry {
    StimulusEntry::Alternating {
        id: None,
        spec: AlternatingMixtureSpec::new(
            PRESET_F0_A,
            PRESET_F0_B,
            PRESET_HARMONICS,
            PRESET_PERIOD_S,
            PRESET_DURATION_S,
        ),
    }
}

fn harmonics() -> Vec<u32> {
    (1..=PRESET_HARMONICS).collect()
}

/// Looks up a built-in configuration by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        // Low-pass and high-pass sweeps.
        "fig3" => base(
            vec![probe_tone()],
            vec![
                DeformationEntry::None,
                DeformationEntry::Preset {
                    name: FilterPreset::LpSweep,
                },
                DeformationEntry::Preset {
                    name: FilterPreset::HpSweep,
                },
            ],
        ),
        // Band-stop suite.
        "fig5" => base(
            vec![probe_tone()],
            vec![
                DeformationEntry::None,
                DeformationEntry::Preset {
                    name: FilterPreset::BandstopSuite,
                },
            ],
        ),
        // Tone-period × mute-length grid probing channel swaps.
        "fig6" => {
            let mut cfg = base(
                vec![StimulusEntry::AlternatingGrid {
                    f0_pairs_hz: vec![(PRESET_F0_A, PRESET_F0_B)],
                    harmonics: harmonics(),
                    periods_ms: MUTE_GRID_PERIODS_MS.to_vec(),
                    total_duration_s: PRESET_DURATION_S,
                    ramp_ms: DEFAULT_RAMP_MS,
                }],
                vec![
                    DeformationEntry::None,
                    DeformationEntry::MuteGrid {
                        targets: vec![MuteTarget::SourceA, MuteTarget::SourceB],
                        durations_ms: MUTE_GRID_DURATIONS_MS.to_vec(),
                        seeds: MUTE_GRID_SEEDS,
                        align_to_onset: true,
                    },
                ],
            );
            cfg.separators = vec![SeparatorDescriptor::irm()];
            cfg
        }
        // Output-channel assignment by F0.
        "fig7" => {
            let mut pairs: Vec<(f64, f64)> = ASSIGNMENT_PAIRS_HZ.to_vec();
            pairs.extend(ASSIGNMENT_PAIRS_HZ.iter().map(|&(a, b)| (b, a)));
            let mut cfg = base(
                vec![StimulusEntry::AlternatingGrid {
                    f0_pairs_hz: pairs,
                    harmonics: harmonics(),
                    periods_ms: vec![PRESET_PERIOD_S * 1000.0],
                    total_duration_s: PRESET_DURATION_S,
                    ramp_ms: DEFAULT_RAMP_MS,
                }],
                vec![DeformationEntry::None],
            );
            cfg.separators = vec![SeparatorDescriptor::irm(), SeparatorDescriptor::ibm()];
            cfg
        }
        other => {
            return Err(Error::UnknownPreset(format!(
                "{other} (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(cfg)
}
