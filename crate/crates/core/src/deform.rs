//! Zero-phase spectral filters used to remove low, high, or intermediate
//! harmonics from a stimulus.
//!
//! The whole signal is transformed with one FFT, multiplied by a real gain
//! mask and transformed back, so the output has the input's length and no
//! delay. The mask is 1 in the passband, 0 in the stopband and follows a
//! raised cosine across a transition band of `transition_hz` centred on each
//! cutoff.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Waveform;

pub const DEFAULT_TRANSITION_HZ: f64 = 20.0;

fn default_transition() -> f64 {
    DEFAULT_TRANSITION_HZ
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Lowpass,
    Highpass,
    Bandstop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// Lower cutoff: used by highpass and bandstop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_lo_hz: Option<f64>,
    /// Upper cutoff: used by lowpass and bandstop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_hi_hz: Option<f64>,
    #[serde(default = "default_transition")]
    pub transition_hz: f64,
}

impl FilterSpec {
    pub fn lowpass(cutoff_hz: f64) -> Self {
        Self {
            kind: FilterKind::Lowpass,
            f_lo_hz: None,
            f_hi_hz: Some(cutoff_hz),
            transition_hz: DEFAULT_TRANSITION_HZ,
        }
    }

    pub fn highpass(cutoff_hz: f64) -> Self {
        Self {
            kind: FilterKind::Highpass,
            f_lo_hz: Some(cutoff_hz),
            f_hi_hz: None,
            transition_hz: DEFAULT_TRANSITION_HZ,
        }
    }

    pub fn bandstop(lo_hz: f64, hi_hz: f64) -> Self {
        Self {
            kind: FilterKind::Bandstop,
            f_lo_hz: Some(lo_hz),
            f_hi_hz: Some(hi_hz),
            transition_hz: DEFAULT_TRANSITION_HZ,
        }
    }

    pub fn with_transition(mut self, transition_hz: f64) -> Self {
        self.transition_hz = transition_hz;
        self
    }

    /// Stable identifier such as `lp_300`, `hp_180` or `bs_350_400`.
    pub fn id(&self) -> String {
        let hz = |f: Option<f64>| format_hz(f.unwrap_or(f64::NAN));
        let base = match self.kind {
            FilterKind::Lowpass => format!("lp_{}", hz(self.f_hi_hz)),
            FilterKind::Highpass => format!("hp_{}", hz(self.f_lo_hz)),
            FilterKind::Bandstop => format!("bs_{}_{}", hz(self.f_lo_hz), hz(self.f_hi_hz)),
        };
        if self.transition_hz == DEFAULT_TRANSITION_HZ {
            base
        } else {
            format!("{base}_tw{}", format_hz(self.transition_hz))
        }
    }

    fn cutoffs(&self) -> Result<(Option<f64>, Option<f64>)> {
        let need = |f: Option<f64>, name: &str| {
            f.ok_or_else(|| Error::InvalidFilter(format!("{:?} needs {name}", self.kind)))
        };
        Ok(match self.kind {
            FilterKind::Lowpass => (None, Some(need(self.f_hi_hz, "f_hi_hz")?)),
            FilterKind::Highpass => (Some(need(self.f_lo_hz, "f_lo_hz")?), None),
            FilterKind::Bandstop => (
                Some(need(self.f_lo_hz, "f_lo_hz")?),
                Some(need(self.f_hi_hz, "f_hi_hz")?),
            ),
        })
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        let tw = self.transition_hz;
        if !(tw.is_finite() && tw > 0.0) {
            return Err(Error::InvalidFilter(format!("transition width {tw} Hz")));
        }
        let (lo, hi) = self.cutoffs()?;
        for f in lo.iter().chain(hi.iter()) {
            if !(f.is_finite() && *f > 0.0 && *f < nyquist) {
                return Err(Error::InvalidFilter(format!(
                    "cutoff {f} Hz outside (0, {nyquist}) Hz"
                )));
            }
            if f - tw / 2.0 <= 0.0 || f + tw / 2.0 >= nyquist {
                return Err(Error::InvalidFilter(format!(
                    "transition band around {f} Hz crosses DC or Nyquist"
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if lo >= hi {
                return Err(Error::InvalidFilter(format!(
                    "band-stop needs f_lo < f_hi, got {lo} >= {hi}"
                )));
            }
        }
        Ok(())
    }

    /// Mask gain at frequency `f_hz` (non-negative).
    pub fn gain_at(&self, f_hz: f64) -> f64 {
        let tw = self.transition_hz;
        match self.kind {
            FilterKind::Lowpass => lowpass_gain(f_hz, self.f_hi_hz.unwrap_or(0.0), tw),
            FilterKind::Highpass => 1.0 - lowpass_gain(f_hz, self.f_lo_hz.unwrap_or(0.0), tw),
            FilterKind::Bandstop => {
                let above_lo = 1.0 - lowpass_gain(f_hz, self.f_lo_hz.unwrap_or(0.0), tw);
                let below_hi = lowpass_gain(f_hz, self.f_hi_hz.unwrap_or(0.0), tw);
                1.0 - above_lo * below_hi
            }
        }
    }
}

fn format_hz(f: f64) -> String {
    if f.fract() == 0.0 {
        format!("{f:.0}")
    } else {
        format!("{f}").replace('.', "p")
    }
}

fn lowpass_gain(f: f64, cutoff: f64, tw: f64) -> f64 {
    let edge = cutoff - tw / 2.0;
    if f <= edge {
        1.0
    } else if f >= cutoff + tw / 2.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * (f - edge) / tw).cos())
    }
}

pub fn apply_filter(waveform: &Waveform, spec: &FilterSpec) -> Result<Waveform> {
    let sr = waveform.sample_rate_hz();
    spec.validate(sr)?;
    let n = waveform.len();
    if n == 0 {
        return Ok(waveform.clone());
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = waveform
        .samples()
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        // Mirror so that the mask is Hermitian-symmetric and the output real.
        let bin = k.min(n - k);
        *c *= spec.gain_at(bin as f64 * sr as f64 / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Waveform::new(buf.iter().map(|c| c.re / n as f64).collect(), sr)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterPreset {
    LpSweep,
    HpSweep,
    BandstopSuite,
}

impl FilterPreset {
    pub const ALL: [FilterPreset; 3] = [
        FilterPreset::LpSweep,
        FilterPreset::HpSweep,
        FilterPreset::BandstopSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterPreset::LpSweep => "lp_sweep",
            FilterPreset::HpSweep => "hp_sweep",
            FilterPreset::BandstopSuite => "bandstop_suite",
        }
    }
}

impl std::str::FromStr for FilterPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Parses the identifiers produced by [`FilterSpec::id`].
impl std::str::FromStr for FilterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidFilter(format!("cannot parse filter id {s:?}"));
        let hz = |t: &str| t.replace('p', ".").parse::<f64>().map_err(|_| bad());
        let mut parts: Vec<&str> = s.split('_').collect();
        let transition = match parts.last() {
            Some(t) if t.starts_with("tw") => {
                let tw = hz(&t[2..])?;
                parts.pop();
                Some(tw)
            }
            _ => None,
        };
        let spec = match parts.as_slice() {
            ["lp", f] => FilterSpec::lowpass(hz(f)?),
            ["hp", f] => FilterSpec::highpass(hz(f)?),
            ["bs", lo, hi] => FilterSpec::bandstop(hz(lo)?, hz(hi)?),
            _ => return Err(bad()),
        };
        Ok(match transition {
            Some(tw) => spec.with_transition(tw),
            None => spec,
        })
    }
}

pub const LP_SWEEP_HZ: [f64; 3] = [300.0, 700.0, 1200.0];
pub const HP_SWEEP_HZ: [f64; 4] = [180.0, 300.0, 400.0, 700.0];
/// Nested stop bands from widest to narrowest. Only the outermost and the
/// innermost band are fixed by the original protocol; the six in between
/// are defaults.
pub const BANDSTOP_SUITE_HZ: [(f64, f64); 8] = [
    (200.0, 800.0),
    (200.0, 700.0),
    (250.0, 700.0),
    (250.0, 650.0),
    (300.0, 650.0),
    (300.0, 600.0),
    (350.0, 600.0),
    (350.0, 400.0),
];

pub fn preset_filters(preset: FilterPreset) -> Vec<FilterSpec> {
    match preset {
        FilterPreset::LpSweep => LP_SWEEP_HZ.iter().map(|&f| FilterSpec::lowpass(f)).collect(),
        FilterPreset::HpSweep => HP_SWEEP_HZ.iter().map(|&f| FilterSpec::highpass(f)).collect(),
        FilterPreset::BandstopSuite => BANDSTOP_SUITE_HZ
            .iter()
            .map(|&(lo, hi)| FilterSpec::bandstop(lo, hi))
            .collect(),
    }
}

pub fn preset_filters_by_name(name: &str) -> Result<Vec<FilterSpec>> {
    Ok(preset_filters(name.parse()?))
}
