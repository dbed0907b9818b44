//! Batch runner: stimulus × deformation × separator grids with deterministic
//! reports.

mod config;
mod presets;
mod report;

pub use config::{
    alternating_id, Deformation, DeformationEntry, ExperimentConfig, MutePlan, ReferenceMode,
    StimulusEntry,
};
pub use presets::{preset, PRESET_NAMES};
pub use report::{AggregateRow, ReportBundle, RowMetrics, RowRecord};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{channel_mean_f0s, F0Params};
use crate::deform::apply_filter;
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::separators::SeparatorDescriptor;
use crate::signal::Waveform;
use crate::stimulus::{random_mute, Stimulus};

/// RNG for the `seed_index`-th placement of a randomized mute. Independent of
/// the stimulus and of execution order.
fn mute_rng(seed: u64, seed_index: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (seed_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct Deformed {
    mixture: Waveform,
    /// What the oracles see and the deformed-reference mode scores against.
    sources: Vec<Waveform>,
    clean: Vec<Waveform>,
}

fn deform(stim: &Stimulus, d: &Deformation, seed: u64) -> Result<Deformed> {
    match d {
        Deformation::None => Ok(Deformed {
            mixture: stim.mixture.clone(),
            sources: stim.sources.clone(),
            clean: stim.sources.clone(),
        }),
        Deformation::Filter(f) => Ok(Deformed {
            mixture: apply_filter(&stim.mixture, f)?,
            sources: stim
                .sources
                .iter()
                .map(|s| apply_filter(s, f))
                .collect::<Result<_>>()?,
            clean: stim.sources.clone(),
        }),
        Deformation::Mute(plan) => {
            let event = match *plan {
                MutePlan::Fixed(ev) => ev,
                MutePlan::Random {
                    target,
                    duration_ms,
                    seed_index,
                    align_to_onset,
                } => random_mute(
                    stim,
                    target,
                    duration_ms / 1000.0,
                    align_to_onset,
                    &mut mute_rng(seed, seed_index),
                )?,
            };
            // A muted source is silent in the scene itself, so both reference
            // modes score against the muted sources.
            let muted = stim.apply_mute(&event)?;
            Ok(Deformed {
                mixture: muted.mixture,
                sources: muted.sources.clone(),
                clean: muted.sources,
            })
        }
    }
}

fn run_cell(
    stim_id: &str,
    stim: &Stimulus,
    deformation: &Deformation,
    separators: &[SeparatorDescriptor],
    config: &ExperimentConfig,
) -> Vec<RowRecord> {
    let modes = config.reference_mode.expand();
    let deformation_id = deformation.id();
    let deformed = deform(stim, deformation, config.seed);
    let f0_params = F0Params::default();
    let mut rows = Vec::new();
    for sep in separators {
        let separated = deformed
            .as_ref()
            .map_err(|e| Error::InvalidStimulus(e.to_string()))
            .and_then(|d| sep.separate(&d.mixture, &d.sources).map(|r| (d, r)));
        let mean_f0 = separated.as_ref().ok().and_then(|(_, r)| {
            (r.num_channels() == 2)
                .then(|| channel_mean_f0s(r, &f0_params).ok())
                .flatten()
        });
        for &mode in &modes {
            let outcome = match &separated {
                Ok((d, result)) => {
                    let refs = match mode {
                        ReferenceMode::Deformed => &d.sources,
                        _ => &d.clean,
                    };
                    evaluate(result, refs, &config.metrics)
                        .map(|eval| RowMetrics { eval, mean_f0_hz: mean_f0 })
                        .map_err(|e| e.to_string())
                }
                Err(e) => Err(e.to_string()),
            };
            rows.push(RowRecord {
                stimulus_id: stim_id.to_string(),
                deformation_id: deformation_id.clone(),
                separator_id: sep.id(),
                reference_mode: mode,
                outcome,
            });
        }
    }
    rows
}

/// Runs every cell of `config` on at most `jobs` worker threads (0 = one per
/// core). Configuration problems abort before any work; separator and
/// evaluation failures become failed rows.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ReportBundle> {
    config.validate()?;
    let stimuli = config.build_stimuli()?;
    let deformations = config.expand_deformations()?;
    let cells: Vec<(usize, usize)> = (0..stimuli.len())
        .flat_map(|s| (0..deformations.len()).map(move |d| (s, d)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut rows: Vec<RowRecord> = pool.install(|| {
        cells
            .par_iter()
            .flat_map_iter(|&(s, d)| {
                let (id, stim) = &stimuli[s];
                run_cell(id, stim, &deformations[d], &config.separators, config)
            })
            .collect()
    });
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut resolved = config.clone();
    resolved.output_dir = None;
    Ok(ReportBundle::new(resolved, rows))
}
