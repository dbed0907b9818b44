use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

/// Outcome of a write. PCM16 clipping is counted here rather than silently
/// applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WriteReport {
    pub clipped: usize,
}

/// Reads the first channel of a PCM16 or float32 WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    read_wav_channel(path, 0)
}

pub fn read_wav_channel(path: impl AsRef<Path>, channel: usize) -> Result<Waveform> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    if file_len == 0 {
        return Err(Error::EmptyAudio(path.to_path_buf()));
    }
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channel >= channels {
        return Err(Error::MalformedWav(format!(
            "channel {channel} requested but file has {channels}"
        )));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!("{fmt:?} {bits}-bit")));
        }
    };

    let samples: Vec<f64> = interleaved
        .into_iter()
        .skip(channel)
        .step_by(channels)
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyAudio(path.to_path_buf()));
    }
    Waveform::new(samples, spec.sample_rate)
}

/// Writes a mono WAV file.
///
/// In PCM16 mode samples outside [-1, 1] are clipped and counted in the
/// returned report. Float32 output is lossless for values representable as
/// `f32`.
pub fn write_wav(
    waveform: &Waveform,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<WriteReport> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: waveform.sample_rate_hz(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let write_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::MalformedWav(other.to_string()),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(write_err)?;
    let mut report = WriteReport::default();
    match encoding {
        WavEncoding::Pcm16 => {
            for &x in waveform.samples() {
                if x.abs() > 1.0 {
                    report.clipped += 1;
                }
                let q = (x.clamp(-1.0, 1.0) * PCM16_SCALE)
                    .round()
                    .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
                writer.write_sample(q).map_err(write_err)?;
            }
        }
        WavEncoding::Float32 => {
            for &x in waveform.samples() {
                writer.write_sample(x as f32).map_err(write_err)?;
            }
        }
    }
    writer.finalize().map_err(write_err)?;
    Ok(report)
}

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported => Error::UnsupportedEncoding("unsupported WAV format".into()),
        hound::Error::IoError(io) => Error::MalformedWav(io.to_string()),
        other => Error::MalformedWav(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn silence_round_trip_pcm16() {
        let dir = tmp();
        let p = dir.path().join("s.wav");
        write_wav(&Waveform::zeros(8000, 8000).unwrap(), &p, WavEncoding::Pcm16).unwrap();
        let w = read_wav(&p).unwrap();
        assert_eq!(w.len(), 8000);
        assert_eq!(w.sample_rate_hz(), 8000);
        assert!(w.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn full_scale_square_decodes_within_one_lsb() {
        let dir = tmp();
        let p = dir.path().join("sq.wav");
        let sq: Vec<f64> = (0..800).map(|n| if (n / 20) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let rep = write_wav(&Waveform::new(sq.clone(), 8000).unwrap(), &p, WavEncoding::Pcm16)
            .unwrap();
        assert_eq!(rep.clipped, 0);
        let w = read_wav(&p).unwrap();
        let lsb = 1.0 / 32768.0;
        for (x, y) in w.samples().iter().zip(&sq) {
            let analytic = if *y > 0.0 { 32767.0 / 32768.0 } else { -1.0 };
            assert!((x - analytic).abs() <= lsb);
            assert!((x - y).abs() <= lsb);
        }
    }

    #[test]
    fn pcm16_half_is_exact_within_quantization() {
        let dir = tmp();
        let p = dir.path().join("h.wav");
        write_wav(&Waveform::new(vec![0.5; 4], 8000).unwrap(), &p, WavEncoding::Pcm16).unwrap();
        let w = read_wav(&p).unwrap();
        assert!(w.samples().iter().all(|x| (x - 0.5).abs() <= 2f64.powi(-15)));
    }

    #[test]
    fn pcm16_clipping_is_counted() {
        let dir = tmp();
        let p = dir.path().join("c.wav");
        let rep = write_wav(
            &Waveform::new(vec![0.0, 1.5, -0.25], 8000).unwrap(),
            &p,
            WavEncoding::Pcm16,
        )
        .unwrap();
        assert_eq!(rep.clipped, 1);
        let w = read_wav(&p).unwrap();
        assert!((w.samples()[1] - 1.0).abs() <= 1.0 / 32768.0);
    }

    #[test]
    fn truncated_header_is_malformed() {
        let dir = tmp();
        let p = dir.path().join("t.wav");
        std::fs::write(&p, b"RIFF\x24\x00\x00\x00WAVEfm").unwrap();
        let err = read_wav(&p).unwrap_err();
        assert!(matches!(err, Error::MalformedWav(_)), "{err}");
        assert!(err.to_string().starts_with("malformed WAV"));
    }

    #[test]
    fn empty_file_and_unsupported_encoding() {
        let dir = tmp();
        let empty = dir.path().join("e.wav");
        std::fs::write(&empty, b"").unwrap();
        assert!(matches!(read_wav(&empty), Err(Error::EmptyAudio(_))));

        let p24 = dir.path().join("p24.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p24, spec).unwrap();
        w.write_sample(1i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p24), Err(Error::UnsupportedEncoding(_))));
    }

    #[test]
    fn channel_selection() {
        let dir = tmp();
        let p = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        for i in 0..5 {
            w.write_sample(i as f32 * 0.1).unwrap();
            w.write_sample(-(i as f32) * 0.1).unwrap();
        }
        w.finalize().unwrap();
        let left = read_wav(&p).unwrap();
        let right = read_wav_channel(&p, 1).unwrap();
        assert_eq!(left.samples()[2], 0.2f32 as f64);
        assert_eq!(right.samples()[2], -0.2f32 as f64);
        assert!(read_wav_channel(&p, 2).is_err());
    }

    #[test]
    fn unwritable_path_errors() {
        let w = Waveform::zeros(4, 8000).unwrap();
        let err = write_wav(&w, "/nonexistent-dir/x/y.wav", WavEncoding::Float32).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn round_trip_within_encoding_precision(
            raw in proptest::collection::vec(-1.0f32..=1.0f32, 1..400),
        ) {
            let dir = tmp();
            let w = Waveform::new(raw.iter().map(|&x| x as f64).collect(), 8000).unwrap();

            let pf = dir.path().join("f.wav");
            write_wav(&w, &pf, WavEncoding::Float32).unwrap();
            prop_assert_eq!(read_wav(&pf).unwrap(), w.clone());

            let pi = dir.path().join("i.wav");
            write_wav(&w, &pi, WavEncoding::Pcm16).unwrap();
            let back = read_wav(&pi).unwrap();
            for (a, b) in back.samples().iter().zip(w.samples()) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}
