use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::deform::{preset_filters, FilterPreset, FilterSpec};
use crate::error::{Error, Result};
use crate::metrics::MetricsOptions;
use crate::separators::SeparatorDescriptor;
use crate::signal::CANONICAL_SAMPLE_RATE;
use crate::stimulus::{
    mix_speech, synth_alternating_mixture, AlternatingMixtureSpec, HarmonicToneSpec, MuteEvent,
    MuteTarget, SpeechMixSpec, Stimulus, DEFAULT_RAMP_MS,
};

fn default_sample_rate() -> u32 {
    CANONICAL_SAMPLE_RATE
}

fn default_true() -> bool {
    true
}

fn default_ramp() -> f64 {
    DEFAULT_RAMP_MS
}

/// Which signals the estimates are scored against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The undeformed sources.
    #[default]
    Clean,
    /// The sources passed through the same deformation as the mixture.
    Deformed,
    Both,
}

impl ReferenceMode {
    pub fn expand(self) -> Vec<ReferenceMode> {
        match self {
            ReferenceMode::Both => vec![ReferenceMode::Clean, ReferenceMode::Deformed],
            m => vec![m],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReferenceMode::Clean => "clean",
            ReferenceMode::Deformed => "deformed",
            ReferenceMode::Both => "both",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StimulusEntry {
    Alternating {
        id: Option<String>,
        spec: AlternatingMixtureSpec,
    },
    /// Cartesian product of f0 pairs and tone periods.
    AlternatingGrid {
        f0_pairs_hz: Vec<(f64, f64)>,
        harmonics: Vec<u32>,
        periods_ms: Vec<f64>,
        total_duration_s: f64,
        #[serde(default = "default_ramp")]
        ramp_ms: f64,
    },
    Speech {
        id: String,
        path_a: PathBuf,
        path_b: PathBuf,
        #[serde(default)]
        gain_db_b: f64,
    },
    /// CSV with header `id,path_a,path_b,gain_db_b`; relative paths resolve
    /// against the manifest's directory.
    Manifest { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeformationEntry {
    None,
    Filter { filter: FilterSpec },
    Preset { name: FilterPreset },
    Mute { event: MuteEvent },
    /// One mute per (target, duration, seed); the seed picks the placement.
    MuteGrid {
        targets: Vec<MuteTarget>,
        durations_ms: Vec<f64>,
        seeds: u32,
        #[serde(default = "default_true")]
        align_to_onset: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub stimuli: Vec<StimulusEntry>,
    pub deformations: Vec<DeformationEntry>,
    pub separators: Vec<SeparatorDescriptor>,
    #[serde(default)]
    pub metrics: MetricsOptions,
    #[serde(default)]
    pub reference_mode: ReferenceMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: u32,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative speech and manifest paths absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.stimuli {
            match s {
                StimulusEntry::Speech { path_a, path_b, .. } => {
                    fix(path_a);
                    fix(path_b);
                }
                StimulusEntry::Manifest { path } => fix(path),
                _ => {}
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stimuli.is_empty() {
            return Err(Error::Config("no stimuli".into()));
        }
        if self.separators.is_empty() {
            return Err(Error::Config("no separators".into()));
        }
        if self.deformations.is_empty() {
            return Err(Error::Config(
                "no deformations (use {\"kind\": \"none\"} for the undeformed case)".into(),
            ));
        }
        if self.sample_rate_hz != CANONICAL_SAMPLE_RATE {
            return Err(Error::Config(format!(
                "sample rate {} Hz; the toolkit runs at {CANONICAL_SAMPLE_RATE} Hz",
                self.sample_rate_hz
            )));
        }
        self.metrics.validate()?;
        let mut ids = BTreeSet::new();
        for sep in &self.separators {
            sep.validate()
                .map_err(|e| Error::Config(format!("separator {}: {e}", sep.id())))?;
            if !ids.insert(sep.id()) {
                return Err(Error::Config(format!("duplicate separator id {}", sep.id())));
            }
        }
        let mut ids = BTreeSet::new();
        for d in self.expand_deformations()? {
            if let Deformation::Filter(f) = &d {
                f.validate(self.sample_rate_hz)?;
            }
            if !ids.insert(d.id()) {
                return Err(Error::Config(format!("duplicate deformation {}", d.id())));
            }
        }
        Ok(())
    }

    pub fn expand_deformations(&self) -> Result<Vec<Deformation>> {
        let mut out = Vec::new();
        for entry in &self.deformations {
            match entry {
                DeformationEntry::None => out.push(Deformation::None),
                DeformationEntry::Filter { filter } => out.push(Deformation::Filter(*filter)),
                DeformationEntry::Preset { name } => {
                    out.extend(preset_filters(*name).into_iter().map(Deformation::Filter))
                }
                DeformationEntry::Mute { event } => out.push(Deformation::Mute(MutePlan::Fixed(*event))),
                DeformationEntry::MuteGrid {
                    targets,
                    durations_ms,
                    seeds,
                    align_to_onset,
                } => {
                    if targets.is_empty() || durations_ms.is_empty() || *seeds == 0 {
                        return Err(Error::Config("empty mute grid".into()));
                    }
                    for &target in targets {
                        for &duration_ms in durations_ms {
                            if !(duration_ms > 0.0) {
                                return Err(Error::Config(format!(
                                    "mute duration {duration_ms} ms"
                                )));
                            }
                            for seed_index in 0..*seeds {
                                out.push(Deformation::Mute(MutePlan::Random {
                                    target,
                                    duration_ms,
                                    seed_index,
                                    align_to_onset: *align_to_onset,
                                }));
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Builds every stimulus with its id. Ids must be unique.
    pub fn build_stimuli(&self) -> Result<Vec<(String, Stimulus)>> {
        let sr = self.sample_rate_hz;
        let mut out = Vec::new();
        for entry in &self.stimuli {
            match entry {
                StimulusEntry::Alternating { id, spec } => {
                    let id = id.clone().unwrap_or_else(|| alternating_id(spec));
                    out.push((id, synth_alternating_mixture(spec, sr)?));
                }
                StimulusEntry::AlternatingGrid {
                    f0_pairs_hz,
                    harmonics,
                    periods_ms,
                    total_duration_s,
                    ramp_ms,
                } => {
                    for &(fa, fb) in f0_pairs_hz {
                        for &period_ms in periods_ms {
                            let spec = AlternatingMixtureSpec {
                                tone_a: HarmonicToneSpec::new(fa, harmonics.iter().copied()),
                                tone_b: HarmonicToneSpec::new(fb, harmonics.iter().copied()),
                                tone_period_s: period_ms / 1000.0,
                                total_duration_s: *total_duration_s,
                                ramp_ms: *ramp_ms,
                                normalize_peak: true,
                            };
                            out.push((alternating_id(&spec), synth_alternating_mixture(&spec, sr)?));
                        }
                    }
                }
                StimulusEntry::Speech {
                    id,
                    path_a,
                    path_b,
                    gain_db_b,
                } => {
                    let spec = SpeechMixSpec {
                        path_a: path_a.clone(),
                        path_b: path_b.clone(),
                        gain_db_b: *gain_db_b,
                    };
                    out.push((id.clone(), load_speech(&spec, sr)?));
                }
                StimulusEntry::Manifest { path } => {
                    for (id, spec) in read_manifest(path)? {
                        out.push((id, load_speech(&spec, sr)?));
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        for (id, _) in &out {
            if !seen.insert(id.as_str()) {
                return Err(Error::Config(format!("duplicate stimulus id {id}")));
            }
        }
        Ok(out)
    }
}

fn load_speech(spec: &SpeechMixSpec, sr: u32) -> Result<Stimulus> {
    let stim = mix_speech(spec)?;
    if stim.sample_rate_hz() != sr {
        return Err(Error::Config(format!(
            "{} is sampled at {} Hz, expected {sr} Hz",
            spec.path_a.display(),
            stim.sample_rate_hz()
        )));
    }
    Ok(stim)
}

fn read_manifest(path: &Path) -> Result<Vec<(String, SpeechMixSpec)>> {
    #[derive(Deserialize)]
    struct Line {
        id: String,
        path_a: PathBuf,
        path_b: PathBuf,
        #[serde(default)]
        gain_db_b: Option<f64>,
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("manifest {}: {e}", path.display())))?;
    reader
        .deserialize::<Line>()
        .map(|line| {
            let line = line.map_err(|e| Error::Config(format!("manifest {}: {e}", path.display())))?;
            let abs = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
            Ok((
                line.id,
                SpeechMixSpec {
                    path_a: abs(line.path_a),
                    path_b: abs(line.path_b),
                    gain_db_b: line.gain_db_b.unwrap_or(0.0),
                },
            ))
        })
        .collect()
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x}").replace('.', "p")
    }
}

pub fn alternating_id(spec: &AlternatingMixtureSpec) -> String {
    let ks = |t: &HarmonicToneSpec| {
        t.harmonic_set()
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join("-")
    };
    let mut id = format!(
        "alt_f{}_f{}_p{}ms_h{}",
        fmt_num(spec.tone_a.f0_hz),
        fmt_num(spec.tone_b.f0_hz),
        fmt_num(spec.tone_period_s * 1000.0),
        ks(&spec.tone_a)
    );
    if spec.tone_b.harmonic_set() != spec.tone_a.harmonic_set() {
        id.push_str(&format!("_h{}", ks(&spec.tone_b)));
    }
    id
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MutePlan {
    Fixed(MuteEvent),
    Random {
        target: MuteTarget,
        duration_ms: f64,
        seed_index: u32,
        align_to_onset: bool,
    },
}

/// A fully expanded deformation applied to one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Deformation {
    None,
    Filter(FilterSpec),
    Mute(MutePlan),
}

impl Deformation {
    pub fn id(&self) -> String {
        match self {
            Deformation::None => "none".into(),
            Deformation::Filter(f) => f.id(),
            Deformation::Mute(MutePlan::Fixed(ev)) => format!(
                "mute_{}_{}ms_at{}ms",
                ev.target.short_name(),
                fmt_num((ev.duration_s * 1000.0 * 1e6).round() / 1e6),
                fmt_num((ev.start_s * 1000.0 * 1e6).round() / 1e6)
            ),
            Deformation::Mute(MutePlan::Random {
                target,
                duration_ms,
                seed_index,
                align_to_onset,
            }) => format!(
                "mute_{}_{}ms_{}{seed_index:02}",
                target.short_name(),
                fmt_num(*duration_ms),
                if *align_to_onset { "s" } else { "u" }
            ),
        }
    }
}
