use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{istft, stft, sum_waveforms, StftConfig, Waveform};

const MASK_EPS: f64 = 1e-12;
/// Largest tolerated `|mixture - sum(sources)| / |mixture|`.
const MAX_RESIDUAL: f64 = 1e-3;

fn check_inputs(mixture: &Waveform, sources: &[Waveform]) -> Result<()> {
    if sources.len() < 2 {
        return Err(Error::UnsupportedChannels(
            sources.len(),
            "oracle masks need at least two sources",
        ));
    }
    for s in sources {
        mixture.check_compatible(s)?;
    }
    let sum = sum_waveforms(sources)?;
    let residual: f64 = mixture
        .samples()
        .iter()
        .zip(sum.samples())
        .map(|(m, s)| (m - s).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = mixture.energy().sqrt();
    if residual > MAX_RESIDUAL * norm {
        return Err(Error::InvalidSeparator(format!(
            "sources do not sum to the mixture (relative residual {:.3e})",
            residual / norm.max(f64::MIN_POSITIVE)
        )));
    }
    Ok(())
}

fn source_magnitudes(sources: &[Waveform], cfg: &StftConfig) -> Result<Vec<Array2<f64>>> {
    sources
        .iter()
        .map(|s| Ok(stft(s, cfg)?.frames.mapv(|c| c.norm())))
        .collect()
}

/// Ratio masks `|S_i| / (sum_j |S_j| + eps)`.
pub fn irm_masks(sources: &[Waveform], cfg: &StftConfig) -> Result<Vec<Array2<f64>>> {
    let mags = source_magnitudes(sources, cfg)?;
    let mut total = Array2::<f64>::zeros(mags[0].dim());
    for m in &mags {
        total += m;
    }
    Ok(mags
        .iter()
        .map(|m| {
            let mut mask = m.clone();
            Zip::from(&mut mask)
                .and(&total)
                .for_each(|v, &t| *v /= t + MASK_EPS);
            mask
        })
        .collect())
}

/// Binary masks selecting the loudest source per bin; ties go to the lowest
/// index.
pub fn ibm_masks(sources: &[Waveform], cfg: &StftConfig) -> Result<Vec<Array2<f64>>> {
    let mags = source_magnitudes(sources, cfg)?;
    let (frames, bins) = mags[0].dim();
    let mut masks = vec![Array2::<f64>::zeros((frames, bins)); mags.len()];
    for f in 0..frames {
        for b in 0..bins {
            let mut best = 0;
            for i in 1..mags.len() {
                if mags[i][[f, b]] > mags[best][[f, b]] {
                    best = i;
                }
            }
            masks[best][[f, b]] = 1.0;
        }
    }
    Ok(masks)
}

fn apply_masks(
    mixture: &Waveform,
    masks: &[Array2<f64>],
    cfg: &StftConfig,
) -> Result<Vec<Waveform>> {
    let spec = stft(mixture, cfg)?;
    masks
        .iter()
        .map(|mask| {
            let mut frames = spec.frames.clone();
            Zip::from(&mut frames)
                .and(mask)
                .for_each(|c: &mut Complex64, &m| *c *= m);
            istft(&spec.with_frames(frames)?)
        })
        .collect()
}

/// Ideal ratio mask separation; channel order follows `sources`.
pub fn separate_irm(
    mixture: &Waveform,
    sources: &[Waveform],
    cfg: &StftConfig,
) -> Result<Vec<Waveform>> {
    check_inputs(mixture, sources)?;
    apply_masks(mixture, &irm_masks(sources, cfg)?, cfg)
}

/// Ideal binary mask separation; channel order follows `sources`.
pub fn separate_ibm(
    mixture: &Waveform,
    sources: &[Waveform],
    cfg: &StftConfig,
) -> Result<Vec<Waveform>> {
    check_inputs(mixture, sources)?;
    apply_masks(mixture, &ibm_masks(sources, cfg)?, cfg)
}

/// Every channel receives `mixture / C`: the no-separation baseline.
pub fn identity_split(mixture: &Waveform, num_channels: usize) -> Result<Vec<Waveform>> {
    if num_channels < 2 {
        return Err(Error::UnsupportedChannels(
            num_channels,
            "identity split needs at least two channels",
        ));
    }
    let part = mixture.scaled(1.0 / num_channels as f64)?;
    Ok(vec![part; num_channels])
}
