//! Separation quality metrics.
//!
//! SI-SDR projects the estimate onto the reference, `s_t = (<est, s> / |s|^2) s`,
//! and reports `10 log10(|s_t|^2 / |est - s_t|^2)`. All dB values are clamped
//! to `[-80, 80]`; a perfect estimate (error energy below 1e-16 of the target)
//! reports exactly the cap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{db_power, Waveform};

pub const DB_CAP: f64 = 80.0;
const PERFECT_REL_EPS: f64 = 1e-16;
/// Permutation scores closer than this are ties; the lexicographically
/// smaller permutation wins.
pub const PIT_TIE_TOLERANCE_DB: f64 = 1e-9;
/// Upper bound on channels for exhaustive permutation search.
pub const MAX_PIT_CHANNELS: usize = 8;

pub const DEFAULT_FRAME_MS: f64 = 32.0;
pub const DEFAULT_HOP_MS: f64 = 16.0;
pub const DEFAULT_SWAP_MARGIN_DB: f64 = 3.0;
pub const DEFAULT_SILENCE_DBFS: f64 = -60.0;

fn ratio_db(target: f64, error: f64) -> f64 {
    if target <= 0.0 {
        return -DB_CAP;
    }
    if error <= PERFECT_REL_EPS * target {
        return DB_CAP;
    }
    db_power(target / error).clamp(-DB_CAP, DB_CAP)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sufficient statistics for SI-SDR over one or more aligned segment pairs.
#[derive(Clone, Copy, Default)]
struct Projection {
    cross: f64,
    ref_energy: f64,
    est_energy: f64,
}

impl Projection {
    fn accumulate(&mut self, est: &[f64], reference: &[f64]) {
        self.cross += dot(est, reference);
        self.ref_energy += dot(reference, reference);
        self.est_energy += dot(est, est);
    }

    /// Error energy is recomputed sample by sample rather than expanded
    /// algebraically, which would cancel catastrophically near perfection.
    fn si_sdr(&self, pairs: &[(&[f64], &[f64])]) -> f64 {
        let alpha = self.cross / self.ref_energy;
        let target = alpha * alpha * self.ref_energy;
        let error: f64 = pairs
            .iter()
            .flat_map(|(e, r)| e.iter().zip(r.iter()))
            .map(|(e, r)| (e - alpha * r).powi(2))
            .sum();
        ratio_db(target, error)
    }
}

pub fn si_sdr_slices(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::LengthMismatch(estimate.len(), reference.len()));
    }
    let mut p = Projection::default();
    p.accumulate(estimate, reference);
    if p.ref_energy == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(p.si_sdr(&[(estimate, reference)]))
}

pub fn si_sdr(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    estimate.check_compatible(reference)?;
    si_sdr_slices(estimate.samples(), reference.samples())
}

pub fn snr(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    estimate.check_compatible(reference)?;
    let s = reference.samples();
    let signal = dot(s, s);
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let error: f64 = estimate
        .samples()
        .iter()
        .zip(s)
        .map(|(e, r)| (e - r).powi(2))
        .sum();
    Ok(ratio_db(signal, error))
}

/// Separator output with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationResult {
    pub estimates: Vec<Waveform>,
    pub separator_id: String,
    pub stimulus_id: String,
    pub deformation_id: String,
}

impl SeparationResult {
    pub fn new(estimates: Vec<Waveform>) -> Self {
        Self {
            estimates,
            separator_id: String::new(),
            stimulus_id: String::new(),
            deformation_id: String::new(),
        }
    }

    pub fn num_channels(&self) -> usize {
        self.estimates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimates.len() < 2 {
            return Err(Error::UnsupportedChannels(
                self.estimates.len(),
                "at least two output channels are required",
            ));
        }
        for e in &self.estimates[1..] {
            self.estimates[0].check_compatible(e)?;
        }
        Ok(())
    }

    /// Estimates re-ordered so that position `r` holds the channel assigned to
    /// reference `r` by `permutation` (which maps estimate -> reference).
    fn ordered_by_reference<'a>(&'a self, permutation: &[usize]) -> Vec<&'a [f64]> {
        let mut out = vec![&[][..]; permutation.len()];
        for (e, &r) in permutation.iter().enumerate() {
            out[r] = self.estimates[e].samples();
        }
        out
    }
}

fn check_pair(result: &SeparationResult, references: &[Waveform]) -> Result<()> {
    result.validate()?;
    if result.estimates.len() != references.len() {
        return Err(Error::ChannelMismatch {
            estimates: result.estimates.len(),
            references: references.len(),
        });
    }
    if result.estimates.len() > MAX_PIT_CHANNELS {
        return Err(Error::UnsupportedChannels(
            result.estimates.len(),
            "exhaustive permutation search is limited to 8 channels",
        ));
    }
    for r in references {
        result.estimates[0].check_compatible(r)?;
    }
    Ok(())
}

/// All permutations of `0..n` in lexicographic order.
pub fn lexicographic_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut out = vec![perm.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
        out.push(perm.clone());
    }
}

/// Best-permutation assignment over the full signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PitScore {
    /// `permutation[e]` is the reference index assigned to estimate `e`.
    pub permutation: Vec<usize>,
    /// SI-SDR of each estimate channel against its assigned reference.
    pub si_sdr_per_channel: Vec<f64>,
    pub mean_si_sdr: f64,
}

pub fn pit_eval(result: &SeparationResult, references: &[Waveform]) -> Result<PitScore> {
    check_pair(result, references)?;
    let c = references.len();
    // scores[e][r]
    let mut scores = vec![vec![0.0; c]; c];
    for (e, est) in result.estimates.iter().enumerate() {
        for (r, reference) in references.iter().enumerate() {
            scores[e][r] = si_sdr(est, reference)?;
        }
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in lexicographic_permutations(c) {
        let mean = perm
            .iter()
            .enumerate()
            .map(|(e, &r)| scores[e][r])
            .sum::<f64>()
            / c as f64;
        if best
            .as_ref()
            .is_none_or(|(b, _)| mean > b + PIT_TIE_TOLERANCE_DB)
        {
            best = Some((mean, perm));
        }
    }
    let (mean_si_sdr, permutation) = best.expect("at least one permutation");
    Ok(PitScore {
        si_sdr_per_channel: permutation
            .iter()
            .enumerate()
            .map(|(e, &r)| scores[e][r])
            .collect(),
        permutation,
        mean_si_sdr,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsOptions {
    #[serde(default = "d_frame")]
    pub frame_ms: f64,
    #[serde(default = "d_hop")]
    pub hop_ms: f64,
    #[serde(default = "d_margin")]
    pub swap_margin_db: f64,
    #[serde(default = "d_silence")]
    pub silence_dbfs: f64,
}

fn d_frame() -> f64 {
    DEFAULT_FRAME_MS
}
fn d_hop() -> f64 {
    DEFAULT_HOP_MS
}
fn d_margin() -> f64 {
    DEFAULT_SWAP_MARGIN_DB
}
fn d_silence() -> f64 {
    DEFAULT_SILENCE_DBFS
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            frame_ms: DEFAULT_FRAME_MS,
            hop_ms: DEFAULT_HOP_MS,
            swap_margin_db: DEFAULT_SWAP_MARGIN_DB,
            silence_dbfs: DEFAULT_SILENCE_DBFS,
        }
    }
}

impl MetricsOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms >= 10.0) {
            return Err(Error::Config(format!(
                "frame_ms must be >= 10, got {}",
                self.frame_ms
            )));
        }
        if !(self.hop_ms > 0.0 && self.hop_ms.is_finite()) {
            return Err(Error::Config(format!("hop_ms {}", self.hop_ms)));
        }
        if !(self.swap_margin_db >= 0.0) {
            return Err(Error::Config(format!(
                "swap_margin_db {}",
                self.swap_margin_db
            )));
        }
        if !self.silence_dbfs.is_finite() {
            return Err(Error::Config("silence_dbfs must be finite".into()));
        }
        Ok(())
    }
}

/// Frame grid in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameGrid {
    pub frame_len: usize,
    pub hop: usize,
    pub num_frames: usize,
}

impl FrameGrid {
    pub fn new(frame_ms: f64, hop_ms: f64, sample_rate: u32, signal_len: usize) -> Result<Self> {
        if !(frame_ms >= 10.0) {
            return Err(Error::Config(format!("frame_ms must be >= 10, got {frame_ms}")));
        }
        let frame_len = (frame_ms * sample_rate as f64 / 1000.0).round() as usize;
        let hop = (hop_ms * sample_rate as f64 / 1000.0).round() as usize;
        if hop == 0 {
            return Err(Error::Config(format!("hop of {hop_ms} ms is under one sample")));
        }
        if frame_len > signal_len {
            return Err(Error::SignalTooShort {
                len: signal_len,
                needed: frame_len,
            });
        }
        Ok(Self {
            frame_len,
            hop,
            num_frames: (signal_len - frame_len) / hop + 1,
        })
    }

    pub fn range(&self, frame: usize) -> std::ops::Range<usize> {
        let start = frame * self.hop;
        start..start + self.frame_len
    }
}

/// Frame-level scorer. A frame's value is the SI-SDR of all channels taken
/// together (concatenated), so a frame in which one reference is silent is
/// still scored and energy placed in the wrong channel is penalised.
struct FrameScorer<'a> {
    result: &'a SeparationResult,
    references: Vec<&'a [f64]>,
    grid: FrameGrid,
    silence_power: f64,
}

impl<'a> FrameScorer<'a> {
    fn new(
        result: &'a SeparationResult,
        references: &'a [Waveform],
        frame_ms: f64,
        hop_ms: f64,
        silence_dbfs: f64,
    ) -> Result<Self> {
        let grid = FrameGrid::new(
            frame_ms,
            hop_ms,
            references[0].sample_rate_hz(),
            references[0].len(),
        )?;
        Ok(Self {
            result,
            references: references.iter().map(|r| r.samples()).collect(),
            grid,
            silence_power: 10f64.powf(silence_dbfs / 10.0),
        })
    }

    fn is_silent(&self, frame: usize) -> bool {
        let range = self.grid.range(frame);
        self.references.iter().all(|r| {
            let seg = &r[range.clone()];
            dot(seg, seg) / (seg.len() as f64) < self.silence_power
        })
    }

    fn score(&self, frame: usize, permutation: &[usize]) -> f64 {
        let range = self.grid.range(frame);
        let ordered = self.result.ordered_by_reference(permutation);
        let pairs: Vec<(&[f64], &[f64])> = ordered
            .iter()
            .zip(&self.references)
            .map(|(e, r)| (&e[range.clone()], &r[range.clone()]))
            .collect();
        let mut p = Projection::default();
        for (e, r) in &pairs {
            p.accumulate(e, r);
        }
        p.si_sdr(&pairs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FramewiseScores {
    pub grid: FrameGrid,
    /// `None` where every reference is silent.
    pub values: Vec<Option<f64>>,
}

/// Per-frame SI-SDR under the global best permutation.
pub fn framewise_si_sdr(
    result: &SeparationResult,
    references: &[Waveform],
    frame_ms: f64,
    hop_ms: f64,
) -> Result<FramewiseScores> {
    check_pair(result, references)?;
    // Silent references have no global SI-SDR; their frames are all
    // undefined, so any assignment will do.
    let permutation = match pit_eval(result, references) {
        Ok(p) => p.permutation,
        Err(Error::ZeroReference) => (0..references.len()).collect(),
        Err(e) => return Err(e),
    };
    framewise_with_permutation(
        result,
        references,
        &permutation,
        frame_ms,
        hop_ms,
        DEFAULT_SILENCE_DBFS,
    )
}

fn framewise_with_permutation(
    result: &SeparationResult,
    references: &[Waveform],
    permutation: &[usize],
    frame_ms: f64,
    hop_ms: f64,
    silence_dbfs: f64,
) -> Result<FramewiseScores> {
    let scorer = FrameScorer::new(result, references, frame_ms, hop_ms, silence_dbfs)?;
    let values = (0..scorer.grid.num_frames)
        .map(|f| (!scorer.is_silent(f)).then(|| scorer.score(f, permutation)))
        .collect();
    Ok(FramewiseScores {
        grid: scorer.grid,
        values,
    })
}

/// A maximal run of frames where the locally best channel assignment
/// differs from the global one by more than the margin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapEvent {
    pub start_frame: usize,
    pub duration_frames: usize,
    /// Local assignment during the event (estimate -> reference).
    pub permutation: Vec<usize>,
}

/// Detects channel swaps for two-channel results. Frames are `frame_ms` long
/// with 50% overlap. Silent frames neither open nor close a run.
pub fn detect_swaps(
    result: &SeparationResult,
    references: &[Waveform],
    frame_ms: f64,
) -> Result<Vec<SwapEvent>> {
    detect_swaps_with(
        result,
        references,
        frame_ms,
        DEFAULT_SWAP_MARGIN_DB,
        DEFAULT_SILENCE_DBFS,
    )
}

pub fn detect_swaps_with(
    result: &SeparationResult,
    references: &[Waveform],
    frame_ms: f64,
    margin_db: f64,
    silence_dbfs: f64,
) -> Result<Vec<SwapEvent>> {
    check_pair(result, references)?;
    if result.num_channels() != 2 {
        return Err(Error::UnsupportedChannels(
            result.num_channels(),
            "swap detection supports exactly two channels",
        ));
    }
    let global = pit_eval(result, references)?.permutation;
    let swapped: Vec<usize> = global.iter().rev().copied().collect();
    let scorer = FrameScorer::new(result, references, frame_ms, frame_ms / 2.0, silence_dbfs)?;

    let mut events = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    for f in 0..scorer.grid.num_frames {
        if scorer.is_silent(f) {
            continue;
        }
        let is_swapped = scorer.score(f, &swapped) - scorer.score(f, &global) > margin_db;
        match (is_swapped, open) {
            (true, None) => open = Some((f, f)),
            (true, Some((start, _))) => open = Some((start, f)),
            (false, Some((start, last))) => {
                events.push(SwapEvent {
                    start_frame: start,
                    duration_frames: last - start + 1,
                    permutation: swapped.clone(),
                });
                open = None;
            }
            (false, None) => {}
        }
    }
    if let Some((start, last)) = open {
        events.push(SwapEvent {
            start_frame: start,
            duration_frames: last - start + 1,
            permutation: swapped,
        });
    }
    Ok(events)
}

/// Everything the harness reports for one separated mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub si_sdr_per_channel: Vec<f64>,
    pub mean_si_sdr: f64,
    pub chosen_permutation: Vec<usize>,
    pub framewise_si_sdr: Vec<Option<f64>>,
    pub swap_events: Vec<SwapEvent>,
}

/// Global PIT scores, framewise scores and (for two channels) swap events.
pub fn evaluate(
    result: &SeparationResult,
    references: &[Waveform],
    options: &MetricsOptions,
) -> Result<EvalRow> {
    options.validate()?;
    let pit = pit_eval(result, references)?;
    let framewise = framewise_with_permutation(
        result,
        references,
        &pit.permutation,
        options.frame_ms,
        options.hop_ms,
        options.silence_dbfs,
    )?;
    let swap_events = if result.num_channels() == 2 {
        detect_swaps_with(
            result,
            references,
            options.frame_ms,
            options.swap_margin_db,
            options.silence_dbfs,
        )?
    } else {
        Vec::new()
    };
    Ok(EvalRow {
        si_sdr_per_channel: pit.si_sdr_per_channel,
        mean_si_sdr: pit.mean_si_sdr,
        chosen_permutation: pit.permutation,
        framewise_si_sdr: framewise.values,
        swap_events,
    })
}
