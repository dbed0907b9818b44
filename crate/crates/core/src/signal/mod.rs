//! Sample-domain and time-frequency primitives shared by every other module.

mod stft;
mod wav;

pub use stft::{istft, stft, ComplexSpectrogram, StftConfig, WindowKind};
pub use wav::{read_wav, read_wav_channel, write_wav, WavEncoding, WriteReport};

use crate::error::{Error, Result};

/// Sample rate used throughout the toolkit (the WSJ-2-mix convention).
pub const CANONICAL_SAMPLE_RATE: u32 = 8000;

/// A uniformly sampled mono signal.
///
/// Samples are kept in `f64`; the nominal range is [-1, 1] but nothing here
/// enforces it. Every sample is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidWaveform("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidWaveform(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.energy() / self.samples.len() as f64).sqrt()
        }
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|x| x * gain).collect(),
            self.sample_rate_hz,
        )
    }

    /// Sample-wise sum. Rates and lengths must match.
    pub fn add(&self, other: &Waveform) -> Result<Self> {
        self.check_compatible(other)?;
        Self::new(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            self.sample_rate_hz,
        )
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Truncates or zero-pads to exactly `len` samples.
    pub fn fit_to_len(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub fn check_compatible(&self, other: &Waveform) -> Result<()> {
        if self.sample_rate_hz != other.sample_rate_hz {
            return Err(Error::SampleRateMismatch(
                self.sample_rate_hz,
                other.sample_rate_hz,
            ));
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch(self.len(), other.len()));
        }
        Ok(())
    }
}

/// Sums a set of equally shaped waveforms sample by sample, in order.
pub fn sum_waveforms(waves: &[Waveform]) -> Result<Waveform> {
    let first = waves
        .first()
        .ok_or_else(|| Error::InvalidWaveform("cannot sum an empty set".into()))?;
    let mut acc = first.samples.clone();
    for w in &waves[1..] {
        first.check_compatible(w)?;
        for (a, b) in acc.iter_mut().zip(&w.samples) {
            *a += b;
        }
    }
    Waveform::new(acc, first.sample_rate_hz)
}

pub(crate) fn db_power(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}
