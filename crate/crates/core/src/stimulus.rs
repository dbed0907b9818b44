//! Diagnostic stimuli: harmonic tones, alternating non-overlapping tone
//! mixtures, per-source mute intervals, and two-file speech mixtures.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{read_wav, sum_waveforms, Waveform};

/// Raised-cosine ramp applied at every gating edge.
pub const DEFAULT_RAMP_MS: f64 = 2.0;
/// Peak level used when a stimulus is peak-normalised.
pub const NORMALIZED_PEAK: f64 = 0.9;

fn default_one() -> f64 {
    1.0
}

fn default_ramp_ms() -> f64 {
    DEFAULT_RAMP_MS
}

fn default_true() -> bool {
    true
}

/// A tone `sum_k a_k sin(2 pi k f0 t)` over a chosen set of harmonic indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicToneSpec {
    pub f0_hz: f64,
    pub harmonics: Vec<u32>,
    /// Per-harmonic amplitude; harmonics not listed default to 1.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub amplitudes: BTreeMap<u32, f64>,
    #[serde(default = "default_one")]
    pub duration_s: f64,
    #[serde(default)]
    pub normalize_peak: bool,
}

impl HarmonicToneSpec {
    pub fn new(f0_hz: f64, harmonics: impl IntoIterator<Item = u32>) -> Self {
        Self {
            f0_hz,
            harmonics: harmonics.into_iter().collect(),
            amplitudes: BTreeMap::new(),
            duration_s: 1.0,
            normalize_peak: false,
        }
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = duration_s;
        self
    }

    pub fn amplitude(&self, k: u32) -> f64 {
        self.amplitudes.get(&k).copied().unwrap_or(1.0)
    }

    /// Sorted, de-duplicated harmonic indices.
    pub fn harmonic_set(&self) -> Vec<u32> {
        let mut ks = self.harmonics.clone();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.f0_hz.is_finite() && self.f0_hz > 0.0) {
            return Err(Error::InvalidStimulus(format!("f0 {} Hz", self.f0_hz)));
        }
        let ks = self.harmonic_set();
        let Some(&max_k) = ks.last() else {
            return Err(Error::InvalidStimulus("empty harmonic set".into()));
        };
        if ks[0] == 0 {
            return Err(Error::InvalidStimulus("harmonic index 0".into()));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if max_k as f64 * self.f0_hz >= nyquist {
            return Err(Error::InvalidStimulus(format!(
                "harmonic {max_k} of {} Hz aliases above {nyquist} Hz",
                self.f0_hz
            )));
        }
        for (k, a) in &self.amplitudes {
            if !(a.is_finite() && *a >= 0.0) {
                return Err(Error::InvalidStimulus(format!("amplitude a_{k} = {a}")));
            }
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::InvalidStimulus(format!(
                "duration {} s",
                self.duration_s
            )));
        }
        Ok(())
    }

    /// Raw (ungated, unnormalised) samples. Phase is reduced modulo one
    /// cycle in exact arithmetic where possible so that integer-period tones
    /// repeat bit for bit.
    fn render(&self, sample_rate: u32, len: usize) -> Vec<f64> {
        let sr = sample_rate as f64;
        let partials: Vec<(f64, f64)> = self
            .harmonic_set()
            .into_iter()
            .map(|k| (k as f64 * self.f0_hz, self.amplitude(k)))
            .filter(|(_, a)| *a != 0.0)
            .collect();
        (0..len)
            .map(|n| {
                partials
                    .iter()
                    .map(|&(f, a)| {
                        let cycles = (f * n as f64).rem_euclid(sr) / sr;
                        a * (2.0 * PI * cycles).sin()
                    })
                    .sum()
            })
            .collect()
    }
}

pub fn synth_tone(spec: &HarmonicToneSpec, sample_rate: u32) -> Result<Waveform> {
    spec.validate(sample_rate)?;
    let len = (spec.duration_s * sample_rate as f64).round() as usize;
    let mut samples = spec.render(sample_rate, len);
    if spec.normalize_peak {
        normalize_in_place(&mut samples, NORMALIZED_PEAK);
    }
    Waveform::new(samples, sample_rate)
}

fn normalize_in_place(samples: &mut [f64], target: f64) {
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        let g = target / peak;
        samples.iter_mut().for_each(|x| *x *= g);
    }
}

/// Two tones taking turns: `tone_a` plays during even half-periods starting
/// at t = 0 and `tone_b` during odd ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternatingMixtureSpec {
    pub tone_a: HarmonicToneSpec,
    pub tone_b: HarmonicToneSpec,
    /// Full a+b cycle; each tone is on for half of it.
    pub tone_period_s: f64,
    pub total_duration_s: f64,
    #[serde(default = "default_ramp_ms")]
    pub ramp_ms: f64,
    /// Rescale both sources by one common factor so the mixture peaks at 0.9.
    #[serde(default = "default_true")]
    pub normalize_peak: bool,
}

impl AlternatingMixtureSpec {
    /// Tones with harmonics `1..=num_harmonics` at unit amplitude, 2 ms ramps.
    pub fn new(
        f0_a: f64,
        f0_b: f64,
        num_harmonics: u32,
        tone_period_s: f64,
        total_duration_s: f64,
    ) -> Self {
        Self {
            tone_a: HarmonicToneSpec::new(f0_a, 1..=num_harmonics),
            tone_b: HarmonicToneSpec::new(f0_b, 1..=num_harmonics),
            tone_period_s,
            total_duration_s,
            ramp_ms: DEFAULT_RAMP_MS,
            normalize_peak: true,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        self.tone_a.validate(sample_rate)?;
        self.tone_b.validate(sample_rate)?;
        if !(self.tone_period_s.is_finite() && self.tone_period_s > 0.0) {
            return Err(Error::InvalidStimulus(format!(
                "tone period {} s",
                self.tone_period_s
            )));
        }
        if !(self.total_duration_s.is_finite() && self.total_duration_s > 0.0) {
            return Err(Error::InvalidStimulus(format!(
                "total duration {} s",
                self.total_duration_s
            )));
        }
        if !(self.ramp_ms.is_finite() && self.ramp_ms >= 0.0) {
            return Err(Error::InvalidStimulus(format!("ramp {} ms", self.ramp_ms)));
        }
        if self.tone_period_s / 2.0 < 2.0 * self.ramp_ms / 1000.0 {
            return Err(Error::InvalidStimulus(format!(
                "half period {} ms is shorter than two {} ms ramps",
                self.tone_period_s * 500.0,
                self.ramp_ms
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToneLabel {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuteTarget {
    SourceA,
    SourceB,
    Mixture,
}

impl MuteTarget {
    fn source_index(self) -> Option<usize> {
        match self {
            MuteTarget::SourceA => Some(0),
            MuteTarget::SourceB => Some(1),
            MuteTarget::Mixture => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MuteTarget::SourceA => "a",
            MuteTarget::SourceB => "b",
            MuteTarget::Mixture => "mix",
        }
    }
}

/// Silence inserted into one stream over `[start_s, start_s + duration_s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuteEvent {
    pub target: MuteTarget,
    pub start_s: f64,
    pub duration_s: f64,
}

impl MuteEvent {
    /// The zeroed sample range `[start, end)` for a signal of `len` samples.
    pub fn sample_range(&self, sample_rate: u32, len: usize) -> Result<(usize, usize)> {
        let total = len as f64 / sample_rate as f64;
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::InvalidStimulus(format!(
                "mute duration {} s",
                self.duration_s
            )));
        }
        if !(self.start_s.is_finite() && self.start_s >= 0.0)
            || self.start_s + self.duration_s > total + 1e-9
        {
            return Err(Error::InvalidStimulus(format!(
                "mute [{}, {}) s outside [0, {total}) s",
                self.start_s,
                self.start_s + self.duration_s
            )));
        }
        let sr = sample_rate as f64;
        let start = (self.start_s * sr).round() as usize;
        let end = (start + (self.duration_s * sr).round() as usize).min(len);
        Ok((start.min(len), end))
    }

    /// Gain envelope: 0 inside the interval, raised-cosine ramps of
    /// `ramp_len` samples on either side, 1 elsewhere.
    fn envelope(&self, sample_rate: u32, len: usize, ramp_len: usize) -> Result<Vec<f64>> {
        let (start, end) = self.sample_range(sample_rate, len)?;
        let mut g = vec![1.0; len];
        g[start..end].fill(0.0);
        for d in 1..=ramp_len {
            let w = 0.5 - 0.5 * (PI * d as f64 / (ramp_len + 1) as f64).cos();
            if let Some(i) = start.checked_sub(d) {
                g[i] = w;
            }
            if end - 1 + d < len {
                g[end - 1 + d] = w;
            }
        }
        Ok(g)
    }
}

/// A mixture with its ground-truth sources.
///
/// The unmuted sources are retained so that mute events compose by taking
/// the minimum gain per sample, which makes muting idempotent and
/// order-independent.
#[derive(Clone, Debug, PartialEq)]
pub struct Stimulus {
    pub mixture: Waveform,
    pub sources: Vec<Waveform>,
    /// Which tone is scheduled on at each sample (alternating mixtures only).
    pub activity: Option<Vec<ToneLabel>>,
    base_sources: Vec<Waveform>,
    mutes: Vec<MuteEvent>,
}

impl Stimulus {
    /// Builds a stimulus whose mixture is the in-order sum of `sources`.
    pub fn from_sources(sources: Vec<Waveform>) -> Result<Self> {
        let mixture = sum_waveforms(&sources)?;
        Ok(Self {
            mixture,
            base_sources: sources.clone(),
            sources,
            activity: None,
            mutes: Vec::new(),
        })
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.mixture.sample_rate_hz()
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }

    pub fn mutes(&self) -> &[MuteEvent] {
        &self.mutes
    }

    pub fn apply_mute(&self, event: &MuteEvent) -> Result<Stimulus> {
        if let Some(i) = event.target.source_index() {
            if i >= self.base_sources.len() {
                return Err(Error::InvalidStimulus(format!(
                    "mute targets source {} of {}",
                    i + 1,
                    self.base_sources.len()
                )));
            }
        }
        event.sample_range(self.sample_rate_hz(), self.len())?;
        let mut next = self.clone();
        if !next.mutes.contains(event) {
            next.mutes.push(*event);
        }
        next.render()?;
        Ok(next)
    }

    fn render(&mut self) -> Result<()> {
        let sr = self.sample_rate_hz();
        let len = self.len();
        let ramp_len = (DEFAULT_RAMP_MS * sr as f64 / 1000.0).round() as usize;
        let mut source_gain = vec![vec![1.0_f64; len]; self.base_sources.len()];
        let mut mix_gain = vec![1.0_f64; len];
        for event in &self.mutes {
            let env = event.envelope(sr, len, ramp_len)?;
            let gain = match event.target.source_index() {
                Some(i) => &mut source_gain[i],
                None => &mut mix_gain,
            };
            for (g, e) in gain.iter_mut().zip(env) {
                *g = g.min(e);
            }
        }
        self.sources = self
            .base_sources
            .iter()
            .zip(&source_gain)
            .map(|(s, g)| {
                Waveform::new(
                    s.samples().iter().zip(g).map(|(x, g)| x * g).collect(),
                    sr,
                )
            })
            .collect::<Result<_>>()?;
        let summed = sum_waveforms(&self.sources)?;
        self.mixture = Waveform::new(
            summed
                .samples()
                .iter()
                .zip(&mix_gain)
                .map(|(x, g)| x * g)
                .collect(),
            sr,
        )?;
        Ok(())
    }

    /// Start times (s) of every on-segment of the given tone.
    pub fn onsets(&self, label: ToneLabel) -> Vec<f64> {
        let Some(activity) = &self.activity else {
            return Vec::new();
        };
        let sr = self.sample_rate_hz() as f64;
        activity
            .iter()
            .enumerate()
            .filter(|&(n, l)| *l == label && (n == 0 || activity[n - 1] != label))
            .map(|(n, _)| n as f64 / sr)
            .collect()
    }
}

pub fn apply_mute(stimulus: &Stimulus, event: &MuteEvent) -> Result<Stimulus> {
    stimulus.apply_mute(event)
}

/// Half-period boundaries in samples.
fn segment_bounds(half_period_s: f64, sample_rate: u32, len: usize) -> Vec<usize> {
    let mut bounds = Vec::new();
    let mut j = 0usize;
    loop {
        let b = (j as f64 * half_period_s * sample_rate as f64).round() as usize;
        if b >= len {
            bounds.push(len);
            break;
        }
        bounds.push(b);
        j += 1;
    }
    bounds
}

pub fn synth_alternating_mixture(
    spec: &AlternatingMixtureSpec,
    sample_rate: u32,
) -> Result<Stimulus> {
    spec.validate(sample_rate)?;
    let len = (spec.total_duration_s * sample_rate as f64).round() as usize;
    let tone_a = spec.tone_a.render(sample_rate, len);
    let tone_b = spec.tone_b.render(sample_rate, len);
    let ramp_len = (spec.ramp_ms * sample_rate as f64 / 1000.0).round() as usize;
    let bounds = segment_bounds(spec.tone_period_s / 2.0, sample_rate, len);

    let mut src_a = vec![0.0; len];
    let mut src_b = vec![0.0; len];
    let mut activity = vec![ToneLabel::A; len];
    for (j, seg) in bounds.windows(2).enumerate() {
        let (lo, hi) = (seg[0], seg[1]);
        let seg_len = hi - lo;
        let (label, tone, dst) = if j % 2 == 0 {
            (ToneLabel::A, &tone_a, &mut src_a)
        } else {
            (ToneLabel::B, &tone_b, &mut src_b)
        };
        for i in 0..seg_len {
            let gate = if ramp_len == 0 {
                1.0
            } else {
                let up = ramp_gain(i, ramp_len);
                let down = ramp_gain(seg_len - 1 - i, ramp_len);
                up.min(down)
            };
            dst[lo + i] = tone[lo + i] * gate;
            activity[lo + i] = label;
        }
    }

    if spec.normalize_peak {
        let peak = src_a
            .iter()
            .zip(&src_b)
            .fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        if peak > 0.0 {
            let g = NORMALIZED_PEAK / peak;
            src_a.iter_mut().for_each(|x| *x *= g);
            src_b.iter_mut().for_each(|x| *x *= g);
        }
    }

    let mut stim = Stimulus::from_sources(vec![
        Waveform::new(src_a, sample_rate)?,
        Waveform::new(src_b, sample_rate)?,
    ])?;
    stim.activity = Some(activity);
    Ok(stim)
}

/// Rising half of a raised cosine sampled at bin centres; 1 past the ramp.
fn ramp_gain(i: usize, ramp_len: usize) -> f64 {
    if i >= ramp_len {
        1.0
    } else {
        0.5 - 0.5 * (PI * (i as f64 + 0.5) / ramp_len as f64).cos()
    }
}

/// Picks a mute of the given length for `target`. With `align_to_onset` the
/// mute starts at a randomly chosen onset of the targeted tone (alternating
/// stimuli only); otherwise the start is uniform over the valid range.
pub fn random_mute<R: Rng + ?Sized>(
    stimulus: &Stimulus,
    target: MuteTarget,
    duration_s: f64,
    align_to_onset: bool,
    rng: &mut R,
) -> Result<MuteEvent> {
    let total = stimulus.len() as f64 / stimulus.sample_rate_hz() as f64;
    if duration_s <= 0.0 || duration_s >= total {
        return Err(Error::InvalidStimulus(format!(
            "mute of {duration_s} s does not fit in {total} s"
        )));
    }
    let latest = total - duration_s;
    let label = match target {
        MuteTarget::SourceB => ToneLabel::B,
        _ => ToneLabel::A,
    };
    let candidates: Vec<f64> = if align_to_onset {
        stimulus
            .onsets(label)
            .into_iter()
            .filter(|&t| t <= latest)
            .collect()
    } else {
        Vec::new()
    };
    let start_s = if candidates.is_empty() {
        rng.random_range(0.0..=latest)
    } else {
        candidates[rng.random_range(0..candidates.len())]
    };
    Ok(MuteEvent {
        target,
        start_s,
        duration_s,
    })
}

/// Two recorded sources mixed at a relative level; truncated to the shorter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeechMixSpec {
    pub path_a: PathBuf,
    pub path_b: PathBuf,
    #[serde(default)]
    pub gain_db_b: f64,
}

pub fn mix_speech(spec: &SpeechMixSpec) -> Result<Stimulus> {
    let a = read_wav(&spec.path_a)?;
    let b = read_wav(&spec.path_b)?;
    mix_sources(&a, &b, spec.gain_db_b)
}

/// `mixture = a + 10^(gain_db_b/20) b` after truncating to the shorter
/// input. If the mixture would exceed full scale, all three signals are
/// rescaled by the same factor.
pub fn mix_sources(a: &Waveform, b: &Waveform, gain_db_b: f64) -> Result<Stimulus> {
    if a.sample_rate_hz() != b.sample_rate_hz() {
        return Err(Error::SampleRateMismatch(
            a.sample_rate_hz(),
            b.sample_rate_hz(),
        ));
    }
    let len = a.len().min(b.len());
    if len == 0 {
        return Err(Error::InvalidStimulus("sources do not overlap".into()));
    }
    if !gain_db_b.is_finite() {
        return Err(Error::InvalidStimulus(format!("gain {gain_db_b} dB")));
    }
    let gain = 10f64.powf(gain_db_b / 20.0);
    let a = a.truncated(len);
    let b = b.truncated(len).scaled(gain)?;
    let peak = a
        .samples()
        .iter()
        .zip(b.samples())
        .fold(0.0f64, |m, (x, y)| m.max((x + y).abs()));
    let (a, b) = if peak > 1.0 {
        (a.scaled(1.0 / peak)?, b.scaled(1.0 / peak)?)
    } else {
        (a, b)
    };
    Stimulus::from_sources(vec![a, b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SR: u32 = 8000;

    #[test]
    fn pure_sine_rms() {
        let w = synth_tone(&HarmonicToneSpec::new(1000.0, [1]), SR).unwrap();
        assert_eq!(w.len(), 8000);
        assert!((w.rms() - 1.0 / 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn tone_validation() {
        assert!(synth_tone(&HarmonicToneSpec::new(117.0, []), SR).is_err());
        assert!(synth_tone(&HarmonicToneSpec::new(117.0, [0, 1]), SR).is_err());
        // 35 * 117 = 4095 Hz > 4000 Hz
        assert!(synth_tone(&HarmonicToneSpec::new(117.0, 1..=35), SR).is_err());
        let mut neg = HarmonicToneSpec::new(117.0, [1]);
        neg.amplitudes.insert(1, -1.0);
        assert!(synth_tone(&neg, SR).is_err());
    }

    #[test]
    fn normalized_tone_peaks_at_point_nine() {
        let mut spec = HarmonicToneSpec::new(117.0, 1..=8);
        spec.normalize_peak = true;
        let w = synth_tone(&spec, SR).unwrap();
        assert!((w.peak() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn integer_period_tone_repeats_exactly() {
        let w = synth_tone(&HarmonicToneSpec::new(100.0, [1, 2, 3]), SR).unwrap();
        let x = w.samples();
        assert!((0..x.len() - 80).all(|n| x[n] == x[n + 80]));
    }

    #[test]
    fn alternation_schedule_and_exact_sum() {
        let spec = AlternatingMixtureSpec::new(117.0, 201.0, 3, 0.062, 3.0);
        let s = synth_alternating_mixture(&spec, SR).unwrap();
        let act = s.activity.as_ref().unwrap();
        assert_eq!(s.len(), 24000);
        // 31 ms half period = 248 samples
        assert_eq!(act[0], ToneLabel::A);
        assert_eq!(act[247], ToneLabel::A);
        assert_eq!(act[248], ToneLabel::B);
        assert_eq!(act[496], ToneLabel::A);
        let (a, b, m) = (
            s.sources[0].samples(),
            s.sources[1].samples(),
            s.mixture.samples(),
        );
        for n in 0..s.len() {
            assert_eq!(a[n] * b[n], 0.0);
            assert_eq!(m[n], a[n] + b[n]);
        }
        let ea = s.sources[0].energy();
        let eb = s.sources[1].energy();
        assert!((s.mixture.energy() - ea - eb).abs() <= 1e-9 * (ea + eb));
        assert!((s.mixture.peak() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn silent_tone_b_gives_gated_tone_a() {
        let mut spec = AlternatingMixtureSpec::new(117.0, 201.0, 3, 0.062, 1.0);
        for k in 1..=3 {
            spec.tone_b.amplitudes.insert(k, 0.0);
        }
        let s = synth_alternating_mixture(&spec, SR).unwrap();
        assert!(s.sources[1].samples().iter().all(|&x| x == 0.0));
        assert_eq!(s.mixture, s.sources[0]);
    }

    #[test]
    fn ramps_must_fit_half_period() {
        let mut spec = AlternatingMixtureSpec::new(117.0, 201.0, 3, 0.006, 1.0);
        assert!(synth_alternating_mixture(&spec, SR).is_err());
        spec.tone_period_s = 0.008;
        assert!(synth_alternating_mixture(&spec, SR).is_ok());
    }

    fn stim() -> Stimulus {
        synth_alternating_mixture(&AlternatingMixtureSpec::new(117.0, 201.0, 3, 0.062, 3.0), SR)
            .unwrap()
    }

    #[test]
    fn mute_source_a_silences_mixture_where_only_a_plays() {
        let s = stim();
        // Segment 4 (t = 124 ms .. 155 ms) is an a-segment.
        let ev = MuteEvent {
            target: MuteTarget::SourceA,
            start_s: 0.124,
            duration_s: 0.031,
        };
        let m = s.apply_mute(&ev).unwrap();
        let (lo, hi) = ev.sample_range(SR, s.len()).unwrap();
        assert_eq!((lo, hi), (992, 1240));
        assert!(m.mixture.samples()[lo..hi].iter().all(|&x| x == 0.0));
        assert_eq!(m.sources[1], s.sources[1]);
        for n in 0..m.len() {
            assert_eq!(
                m.mixture.samples()[n],
                m.sources[0].samples()[n] + m.sources[1].samples()[n]
            );
        }
    }

    #[test]
    fn muting_an_inactive_source_changes_nothing() {
        let s = stim();
        // b is off for [0, 31 ms) and the ramps stay inside a's segment.
        let ev = MuteEvent {
            target: MuteTarget::SourceB,
            start_s: 0.005,
            duration_s: 0.02,
        };
        let m = s.apply_mute(&ev).unwrap();
        for (x, y) in m.mixture.samples().iter().zip(s.mixture.samples()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn mute_sample_count() {
        let w = Waveform::new(vec![1.0; 16000], SR).unwrap();
        let s = Stimulus::from_sources(vec![w.clone(), Waveform::zeros(16000, SR).unwrap()])
            .unwrap();
        let ev = MuteEvent {
            target: MuteTarget::SourceA,
            start_s: 1.0,
            duration_s: 0.015,
        };
        let m = s.apply_mute(&ev).unwrap();
        let x = m.sources[0].samples();
        let zeros = x.iter().filter(|&&v| v == 0.0).count();
        assert_eq!(zeros, 120);
        assert!(x[8000..8120].iter().all(|&v| v == 0.0));
        let ramp = 16;
        let touched = x.iter().filter(|&&v| v != 1.0).count();
        assert_eq!(touched, 120 + 2 * ramp);
        assert_eq!(x[8000 - ramp - 1], 1.0);
        assert_eq!(x[8120 + ramp], 1.0);
    }

    #[test]
    fn mixture_mute_leaves_sources() {
        let s = stim();
        let ev = MuteEvent {
            target: MuteTarget::Mixture,
            start_s: 0.5,
            duration_s: 0.05,
        };
        let m = s.apply_mute(&ev).unwrap();
        assert_eq!(m.sources, s.sources);
        let (lo, hi) = ev.sample_range(SR, s.len()).unwrap();
        assert!(m.mixture.samples()[lo..hi].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mute_is_idempotent_and_bounds_checked() {
        let s = stim();
        let ev = MuteEvent {
            target: MuteTarget::SourceA,
            start_s: 1.0,
            duration_s: 0.031,
        };
        let once = s.apply_mute(&ev).unwrap();
        let twice = once.apply_mute(&ev).unwrap();
        assert_eq!(once.mixture, twice.mixture);
        assert_eq!(once.sources, twice.sources);

        let late = MuteEvent {
            start_s: 2.99,
            ..ev
        };
        assert!(s.apply_mute(&late).is_err());
        let zero = MuteEvent {
            duration_s: 0.0,
            ..ev
        };
        assert!(s.apply_mute(&zero).is_err());
    }

    #[test]
    fn aligned_random_mute_starts_on_target_onset() {
        let s = stim();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let onsets = s.onsets(ToneLabel::A);
        for _ in 0..20 {
            let ev = random_mute(&s, MuteTarget::SourceA, 0.031, true, &mut rng).unwrap();
            assert!(onsets.contains(&ev.start_s));
            s.apply_mute(&ev).unwrap();
        }
    }

    #[test]
    fn speech_mix_arithmetic() {
        let a = Waveform::new((0..100).map(|n| (n as f64 * 0.1).sin() * 0.4).collect(), SR)
            .unwrap();
        let neg = a.scaled(-1.0).unwrap();
        let cancel = mix_sources(&a, &neg, 0.0).unwrap();
        assert!(cancel.mixture.samples().iter().all(|&x| x == 0.0));

        let half = mix_sources(&a, &a, -6.02).unwrap();
        let ratio = half.sources[1].energy().sqrt() / a.energy().sqrt();
        assert!((ratio - 0.5).abs() < 1e-4);

        let longer = Waveform::new(vec![0.1; 150], SR).unwrap();
        assert_eq!(mix_sources(&a, &longer, 0.0).unwrap().len(), 100);

        let other_rate = Waveform::new(vec![0.1; 100], 16000).unwrap();
        assert!(matches!(
            mix_sources(&a, &other_rate, 0.0),
            Err(Error::SampleRateMismatch(..))
        ));
    }

    #[test]
    fn speech_mix_rescales_on_overflow() {
        let a = Waveform::new(vec![0.8; 10], SR).unwrap();
        let s = mix_sources(&a, &a, 0.0).unwrap();
        assert!((s.mixture.peak() - 1.0).abs() < 1e-12);
        assert!((s.sources[0].samples()[0] - 0.5).abs() < 1e-12);
    }
}
