use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    /// Periodic window of length `len`. The periodic Hann form is the one that
    /// sums to a constant at hop = len/2.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    #[serde(default)]
    pub window: WindowKind,
    pub fft_len: usize,
}

impl Default for StftConfig {
    /// Hann, 32 ms window and 16 ms hop at 8 kHz.
    fn default() -> Self {
        Self {
            window_len: 256,
            hop: 128,
            window: WindowKind::Hann,
            fft_len: 256,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_len || self.window_len > self.fft_len {
            return Err(Error::InvalidStft(format!(
                "need 0 < hop ({}) <= window_len ({}) <= fft_len ({})",
                self.hop, self.window_len, self.fft_len
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Zeros assumed before the first and after the last sample, so every
    /// sample of the signal lies under the full set of overlapping frames.
    pub fn edge_pad(&self) -> usize {
        self.window_len - self.hop
    }

    /// Frames needed for a signal of `len` samples.
    pub fn num_frames_for(&self, len: usize) -> usize {
        (len - 1 + self.edge_pad()) / self.hop + 1
    }

    /// The constant overlap-add sum of the window at this hop, or `None` when
    /// the sum varies by more than 1e-9 relative.
    pub fn cola_constant(&self) -> Option<f64> {
        let w = self.window.coefficients(self.window_len);
        let sums: Vec<f64> = (0..self.hop)
            .map(|n| w.iter().skip(n).step_by(self.hop).sum())
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        (max > 0.0 && (max - min) <= 1e-9 * max).then_some(max)
    }
}

/// Frames indexed `[frame, bin]`, one-sided (`fft_len/2 + 1` bins).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    pub frames: Array2<Complex64>,
    pub config: StftConfig,
    pub sample_rate_hz: u32,
    /// Length of the analysed signal, used to trim the inverse.
    pub signal_len: usize,
}

impl ComplexSpectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.frames.ncols()
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate_hz as f64 / self.config.fft_len as f64
    }

    /// Energy of the windowed frames recovered from the one-sided spectrum.
    pub fn parseval_energy(&self) -> f64 {
        let n = self.config.fft_len;
        let mut total = 0.0;
        for row in self.frames.rows() {
            for (k, x) in row.iter().enumerate() {
                let weight = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                    1.0
                } else {
                    2.0
                };
                total += weight * x.norm_sqr();
            }
        }
        total / n as f64
    }

    /// A spectrogram with the same layout and new frame contents.
    pub fn with_frames(&self, frames: Array2<Complex64>) -> Result<Self> {
        if frames.dim() != self.frames.dim() {
            return Err(Error::InvalidStft(format!(
                "frame grid {:?} does not match {:?}",
                frames.dim(),
                self.frames.dim()
            )));
        }
        Ok(Self {
            frames,
            config: self.config,
            sample_rate_hz: self.sample_rate_hz,
            signal_len: self.signal_len,
        })
    }
}

/// Frame `f` covers samples `[f*hop - pad, f*hop - pad + window_len)` with
/// `pad = window_len - hop`; samples outside the signal are zero.
pub fn stft(waveform: &Waveform, config: &StftConfig) -> Result<ComplexSpectrogram> {
    config.validate()?;
    let x = waveform.samples();
    if x.len() < config.window_len {
        return Err(Error::SignalTooShort {
            len: x.len(),
            needed: config.window_len,
        });
    }
    let num_frames = config.num_frames_for(x.len());
    let pad = config.edge_pad();
    let bins = config.num_bins();
    let window = config.window.coefficients(config.window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.fft_len);

    let mut frames = Array2::<Complex64>::zeros((num_frames, bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); config.fft_len];
    for (f, mut row) in frames.rows_mut().into_iter().enumerate() {
        buf.fill(Complex64::new(0.0, 0.0));
        for (i, w) in window.iter().enumerate() {
            if let Some(&v) = (f * config.hop + i).checked_sub(pad).and_then(|n| x.get(n)) {
                buf[i] = Complex64::new(v * w, 0.0);
            }
        }
        fft.process(&mut buf);
        for (dst, src) in row.iter_mut().zip(&buf[..bins]) {
            *dst = *src;
        }
    }
    Ok(ComplexSpectrogram {
        frames,
        config: *config,
        sample_rate_hz: waveform.sample_rate_hz(),
        signal_len: x.len(),
    })
}

/// Weighted overlap-add inverse: each frame is windowed again and the sum is
/// normalised by the accumulated squared window. Masked spectra thus keep
/// tapered frame edges, and unmodified spectra reconstruct exactly.
///
/// Requires a COLA window/hop pair.
pub fn istft(spec: &ComplexSpectrogram) -> Result<Waveform> {
    let cfg = &spec.config;
    cfg.validate()?;
    let cola = cfg.cola_constant().ok_or_else(|| {
        Error::InvalidStft(format!(
            "{:?} window of {} samples with hop {} does not satisfy COLA",
            cfg.window, cfg.window_len, cfg.hop
        ))
    })?;
    if spec.num_bins() != cfg.num_bins() {
        return Err(Error::InvalidStft(format!(
            "expected {} bins, found {}",
            cfg.num_bins(),
            spec.num_bins()
        )));
    }
    let n = cfg.fft_len;
    let window = cfg.window.coefficients(cfg.window_len);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let pad = cfg.edge_pad();
    let span = (spec.num_frames().saturating_sub(1)) * cfg.hop + cfg.window_len;
    let mut acc = vec![0.0; span];
    let mut wsum = vec![0.0; span];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];

    for (f, row) in spec.frames.rows().into_iter().enumerate() {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = if k < row.len() {
                row[k]
            } else {
                row[n - k].conj()
            };
        }
        // Nyquist and DC bins of a real signal are real.
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[n / 2].im = 0.0;
        }
        ifft.process(&mut buf);
        let start = f * cfg.hop;
        for i in 0..cfg.window_len {
            if start + i < pad {
                continue;
            }
            acc[start + i - pad] += window[i] * buf[i].re / n as f64;
            wsum[start + i - pad] += window[i] * window[i];
        }
    }

    let floor = 1e-8 * cola;
    let out: Vec<f64> = acc
        .iter()
        .zip(&wsum)
        .take(spec.signal_len)
        .map(|(a, w)| if *w > floor { a / w } else { 0.0 })
        .collect();
    let mut out = out;
    out.resize(spec.signal_len, 0.0);
    Waveform::new(out, spec.sample_rate_hz)
}
