//! F0 tracking of separated channels and the channel-assignment statistic:
//! the distribution over mixtures of `log2(f0(ch2) / f0(ch1))`, where each
//! f0 is the mean over voiced frames of one output channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::SeparationResult;
use crate::signal::Waveform;

pub const HISTOGRAM_MIN: f64 = -2.0;
pub const HISTOGRAM_MAX: f64 = 2.0;
pub const HISTOGRAM_BIN_WIDTH: f64 = 0.1;

/// A candidate peak must reach this fraction of the strongest peak; the
/// shortest such lag wins, which avoids picking a multiple of the period.
const PEAK_FRACTION: f64 = 0.8;
/// Correlation this close to 1 means the frame repeats exactly at the lag.
const EXACT_PERIOD_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct F0Params {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub min_hz: f64,
    pub max_hz: f64,
    /// Frames quieter than this RMS level are unvoiced.
    pub silence_dbfs: f64,
    /// Minimum normalised autocorrelation at the chosen peak.
    pub min_clarity: f64,
}

impl Default for F0Params {
    fn default() -> Self {
        Self {
            frame_ms: 40.0,
            hop_ms: 10.0,
            min_hz: 60.0,
            max_hz: 400.0,
            silence_dbfs: -45.0,
            min_clarity: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    /// One entry per analysis frame; `None` for unvoiced frames.
    pub frame_f0_hz: Vec<Option<f64>>,
    pub hop_s: f64,
    /// Mean over voiced frames, `None` if there are none.
    pub mean_f0_hz: Option<f64>,
}

impl F0Track {
    pub fn voiced_frames(&self) -> usize {
        self.frame_f0_hz.iter().flatten().count()
    }
}

struct LagRange {
    min: usize,
    max: usize,
    window: usize,
}

pub fn estimate_f0(waveform: &Waveform, params: &F0Params) -> Result<F0Track> {
    let sr = waveform.sample_rate_hz() as f64;
    if !(params.min_hz > 0.0 && params.min_hz < params.max_hz) {
        return Err(Error::InvalidAnalysis(format!(
            "search range [{}, {}] Hz",
            params.min_hz, params.max_hz
        )));
    }
    if sr < 2.0 * params.max_hz {
        return Err(Error::InvalidAnalysis(format!(
            "search maximum {} Hz exceeds Nyquist of {} Hz",
            params.max_hz,
            sr / 2.0
        )));
    }
    let frame_len = (params.frame_ms * sr / 1000.0).round() as usize;
    let hop = (params.hop_ms * sr / 1000.0).round() as usize;
    let lags = LagRange {
        min: ((sr / params.max_hz).floor() as usize).max(2),
        max: (sr / params.min_hz).ceil() as usize,
        window: 0,
    };
    if hop == 0 || frame_len <= lags.max + 2 {
        return Err(Error::InvalidAnalysis(format!(
            "frame of {frame_len} samples cannot hold a lag of {} samples",
            lags.max
        )));
    }
    let lags = LagRange {
        window: frame_len - lags.max - 1,
        ..lags
    };

    let x = waveform.samples();
    let num_frames = if x.len() >= frame_len {
        (x.len() - frame_len) / hop + 1
    } else {
        0
    };
    let gate = 10f64.powf(params.silence_dbfs / 20.0);
    let frame_f0_hz: Vec<Option<f64>> = (0..num_frames)
        .map(|f| {
            let frame = &x[f * hop..f * hop + frame_len];
            let rms = (frame.iter().map(|v| v * v).sum::<f64>() / frame_len as f64).sqrt();
            if rms < gate {
                return None;
            }
            frame_f0(frame, &lags, sr, params)
        })
        .collect();

    let voiced: Vec<f64> = frame_f0_hz.iter().flatten().copied().collect();
    let mean_f0_hz = (!voiced.is_empty()).then(|| voiced.iter().sum::<f64>() / voiced.len() as f64);
    Ok(F0Track {
        frame_f0_hz,
        hop_s: hop as f64 / sr,
        mean_f0_hz,
    })
}

fn normalized_autocorrelation(frame: &[f64], lag: usize, window: usize) -> f64 {
    let a = &frame[..window];
    let b = &frame[lag..lag + window];
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    let den = (aa * bb).sqrt();
    if den > 0.0 {
        ab / den
    } else {
        0.0
    }
}

fn frame_f0(frame: &[f64], lags: &LagRange, sr: f64, params: &F0Params) -> Option<f64> {
    // r[i] holds the lag (lags.min - 1 + i).
    let r: Vec<f64> = (lags.min - 1..=lags.max + 1)
        .map(|lag| normalized_autocorrelation(frame, lag, lags.window))
        .collect();
    let peaks: Vec<usize> = (1..r.len() - 1)
        .filter(|&i| r[i] > 0.0 && r[i] >= r[i - 1] && r[i] > r[i + 1])
        .collect();
    let strongest = peaks.iter().map(|&i| r[i]).fold(f64::MIN, f64::max);
    let &i = peaks
        .iter()
        .find(|&&i| r[i] >= PEAK_FRACTION * strongest)?;
    if r[i] < params.min_clarity {
        return None;
    }
    let (prev, cur, next) = (r[i - 1], r[i], r[i + 1]);
    let curvature = prev - 2.0 * cur + next;
    // A frame that repeats exactly at an integer lag has that lag as its
    // period; interpolating would only add the window's asymmetry.
    let offset = if curvature < 0.0 && cur < 1.0 - EXACT_PERIOD_SLACK {
        (0.5 * (prev - next) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let lag = (lags.min - 1 + i) as f64 + offset;
    let f0 = sr / lag;
    (params.min_hz..=params.max_hz).contains(&f0).then_some(f0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub center: f64,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentStats {
    /// `log2(f0(ch2)) - log2(f0(ch1))` for every included mixture.
    pub log2_ratios: Vec<f64>,
    /// Density over [-2, 2] in 0.1-wide bins; out-of-range ratios land in
    /// the edge bins.
    pub histogram: Vec<HistogramBin>,
    /// Fraction of included mixtures whose lower-F0 output is channel 1.
    pub frac_low_to_ch1: f64,
    pub included: usize,
    /// Mixtures skipped because a channel had no voiced frame.
    pub excluded: usize,
}

/// Mean F0 of each output channel of a two-channel result.
pub fn channel_mean_f0s(
    result: &SeparationResult,
    params: &F0Params,
) -> Result<(Option<f64>, Option<f64>)> {
    if result.num_channels() != 2 {
        return Err(Error::UnsupportedChannels(
            result.num_channels(),
            "assignment statistics need exactly two channels",
        ));
    }
    Ok((
        estimate_f0(&result.estimates[0], params)?.mean_f0_hz,
        estimate_f0(&result.estimates[1], params)?.mean_f0_hz,
    ))
}

pub fn assignment_stats(results: &[SeparationResult], params: &F0Params) -> Result<AssignmentStats> {
    if results.is_empty() {
        return Err(Error::InvalidAnalysis("empty result list".into()));
    }
    let f0s = results
        .iter()
        .map(|r| channel_mean_f0s(r, params))
        .collect::<Result<Vec<_>>>()?;
    assignment_stats_from_f0s(&f0s)
}

/// Assignment statistics from per-mixture `(ch1, ch2)` mean F0s.
pub fn assignment_stats_from_f0s(f0s: &[(Option<f64>, Option<f64>)]) -> Result<AssignmentStats> {
    if f0s.is_empty() {
        return Err(Error::InvalidAnalysis("empty result list".into()));
    }
    let log2_ratios: Vec<f64> = f0s
        .iter()
        .filter_map(|pair| match pair {
            (Some(a), Some(b)) => Some(b.log2() - a.log2()),
            _ => None,
        })
        .collect();
    let included = log2_ratios.len();
    let excluded = f0s.len() - included;
    if included == 0 {
        return Err(Error::NoUsableMixtures);
    }
    let num_bins = ((HISTOGRAM_MAX - HISTOGRAM_MIN) / HISTOGRAM_BIN_WIDTH).round() as usize;
    let mut counts = vec![0usize; num_bins];
    for &r in &log2_ratios {
        let idx = ((r - HISTOGRAM_MIN) / HISTOGRAM_BIN_WIDTH).floor();
        let idx = (idx.max(0.0) as usize).min(num_bins - 1);
        counts[idx] += 1;
    }
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| HistogramBin {
            center: HISTOGRAM_MIN + HISTOGRAM_BIN_WIDTH * (i as f64 + 0.5),
            density: c as f64 / (included as f64 * HISTOGRAM_BIN_WIDTH),
        })
        .collect();
    let low_first = log2_ratios.iter().filter(|&&r| r > 0.0).count();
    Ok(AssignmentStats {
        frac_low_to_ch1: low_first as f64 / included as f64,
        log2_ratios,
        histogram,
        included,
        excluded,
    })
}
