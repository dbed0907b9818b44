//! Client for separators running as external processes.
//!
//! The mixture is written to a private temporary directory and the command
//! is run as `<command> --input {input} --outdir {outdir} --num-speakers C`.
//! The process must leave `est1.wav` .. `estC.wav` (mono, float32 or PCM16,
//! mixture sample rate) in `{outdir}` and exit with status 0.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{read_wav, write_wav, StftConfig, WavEncoding, Waveform};

pub const INPUT_PLACEHOLDER: &str = "{input}";
pub const OUTDIR_PLACEHOLDER: &str = "{outdir}";
pub const SPEAKERS_PLACEHOLDER: &str = "{num_speakers}";

const POLL_INTERVAL: Duration = Duration::from_millis(5);
/// Longest stderr excerpt kept in an error.
const STDERR_TAIL: usize = 4000;

fn default_timeout() -> f64 {
    120.0
}

fn default_speakers() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSeparator {
    /// Whitespace-separated argv; placeholders are substituted per token.
    pub command_template: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_speakers")]
    pub num_speakers: usize,
}

impl ExternalSeparator {
    /// The normative invocation for a bare command.
    pub fn for_command(command: &str) -> Self {
        Self {
            command_template: format!(
                "{command} --input {INPUT_PLACEHOLDER} --outdir {OUTDIR_PLACEHOLDER} --num-speakers {SPEAKERS_PLACEHOLDER}"
            ),
            timeout_s: default_timeout(),
            num_speakers: default_speakers(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.command_template.split_whitespace().next().is_none() {
            return Err(Error::InvalidSeparator("empty command template".into()));
        }
        for p in [INPUT_PLACEHOLDER, OUTDIR_PLACEHOLDER] {
            if !self.command_template.contains(p) {
                return Err(Error::InvalidSeparator(format!(
                    "command template lacks {p}"
                )));
            }
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(Error::InvalidSeparator(format!(
                "timeout {} s",
                self.timeout_s
            )));
        }
        if self.num_speakers < 2 {
            return Err(Error::InvalidSeparator(format!(
                "num_speakers {}",
                self.num_speakers
            )));
        }
        Ok(())
    }

    fn argv(&self, input: &Path, outdir: &Path) -> Vec<String> {
        self.command_template
            .split_whitespace()
            .map(|tok| {
                tok.replace(INPUT_PLACEHOLDER, &input.to_string_lossy())
                    .replace(OUTDIR_PLACEHOLDER, &outdir.to_string_lossy())
                    .replace(SPEAKERS_PLACEHOLDER, &self.num_speakers.to_string())
            })
            .collect()
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> Option<thread::JoinHandle<Vec<u8>>> {
    pipe.map(|mut p| {
        thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = p.read_to_end(&mut buf);
            buf
        })
    })
}

fn tail(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes);
    let text = text.trim();
    let start = text
        .char_indices()
        .rev()
        .nth(STDERR_TAIL)
        .map_or(0, |(i, _)| i);
    text[start..].to_string()
}

/// Index of an `est<N>.wav` file name.
fn estimate_index(name: &str) -> Option<usize> {
    name.strip_prefix("est")?
        .strip_suffix(".wav")?
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

fn collect_estimates(outdir: &Path, expected: usize) -> Result<Vec<PathBuf>> {
    let mut found: Vec<usize> = std::fs::read_dir(outdir)
        .map_err(|e| Error::io(outdir, e))?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| estimate_index(&entry.file_name().to_string_lossy()))
        .collect();
    found.sort_unstable();
    if found != (1..=expected).collect::<Vec<_>>() {
        return Err(Error::EstimateCount {
            expected,
            found: found.len(),
        });
    }
    Ok(found
        .into_iter()
        .map(|i| outdir.join(format!("est{i}.wav")))
        .collect())
}

/// Runs the external separator on `mixture`. The temporary directory is
/// removed on every exit path.
pub fn separate_external(sep: &ExternalSeparator, mixture: &Waveform) -> Result<Vec<Waveform>> {
    sep.validate()?;
    let workdir = tempfile::Builder::new()
        .prefix("sepprobe-")
        .tempdir()
        .map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let input = workdir.path().join("mixture.wav");
    let outdir = workdir.path().join("out");
    std::fs::create_dir(&outdir).map_err(|e| Error::io(&outdir, e))?;
    write_wav(mixture, &input, WavEncoding::Float32)?;

    let argv = sep.argv(&input, &outdir);
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::ExternalFailed {
            status: "spawn failure".into(),
            stderr: format!("{}: {e}", argv[0]),
        })?;
    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());

    let deadline = Instant::now() + Duration::from_secs_f64(sep.timeout_s);
    let status = loop {
        match child.try_wait().map_err(|e| Error::io(&argv[0], e))? {
            Some(status) => break status,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                // Grandchildren may still hold the pipes; the drain threads
                // are left detached.
                return Err(Error::ExternalTimeout(sep.timeout_s));
            }
            None => thread::sleep(POLL_INTERVAL),
        }
    };
    let stderr = stderr.and_then(|h| h.join().ok()).unwrap_or_default();
    let stdout = stdout.and_then(|h| h.join().ok()).unwrap_or_default();
    if !status.success() {
        let mut diag = tail(&stderr);
        if diag.is_empty() {
            diag = tail(&stdout);
        }
        return Err(Error::ExternalFailed {
            status: status.to_string(),
            stderr: diag,
        });
    }

    let tolerance = StftConfig::default().window_len;
    collect_estimates(&outdir, sep.num_speakers)?
        .iter()
        .map(|path| {
            let est = read_wav(path)?;
            if est.sample_rate_hz() != mixture.sample_rate_hz() {
                return Err(Error::SampleRateMismatch(
                    est.sample_rate_hz(),
                    mixture.sample_rate_hz(),
                ));
            }
            if est.len().abs_diff(mixture.len()) > tolerance {
                return Err(Error::LengthMismatch(est.len(), mixture.len()));
            }
            Ok(est.fit_to_len(mixture.len()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_validation() {
        let ok = ExternalSeparator::for_command("model");
        ok.validate().unwrap();
        let argv = ok.argv(Path::new("/tmp/in.wav"), Path::new("/tmp/out"));
        assert_eq!(
            argv,
            vec!["model", "--input", "/tmp/in.wav", "--outdir", "/tmp/out", "--num-speakers", "2"]
        );
        let missing = ExternalSeparator {
            command_template: "model --input {input}".into(),
            ..ok.clone()
        };
        assert!(missing.validate().is_err());
        let blank = ExternalSeparator {
            command_template: "   ".into(),
            ..ok
        };
        assert!(blank.validate().is_err());
    }

    #[test]
    fn estimate_names() {
        assert_eq!(estimate_index("est1.wav"), Some(1));
        assert_eq!(estimate_index("est12.wav"), Some(12));
        assert_eq!(estimate_index("est0.wav"), None);
        assert_eq!(estimate_index("estimate.wav"), None);
        assert_eq!(estimate_index("est1.flac"), None);
    }

    #[test]
    fn spawn_failure_is_reported() {
        let sep = ExternalSeparator::for_command("/nonexistent/separator-binary");
        let mix = Waveform::zeros(800, 8000).unwrap();
        assert!(matches!(
            separate_external(&sep, &mix),
            Err(Error::ExternalFailed { .. })
        ));
    }
}
