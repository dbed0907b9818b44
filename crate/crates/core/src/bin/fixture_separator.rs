//! Test double for the external-separator process contract.
//!
//! `fixture-separator --input IN --outdir DIR --num-speakers C [--mode M]`
//!
//! Modes: `copy` (every estimate is input/C), `swap` (two estimates: first
//! and second halves of the input swapped between channels), `fail`,
//! `missing` (writes only est1), `extra` (writes C+1 files), `sleep`
//! (never finishes in time), `wrong-rate` (16 kHz output), `short` (drops
//! one second).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sepprobe::signal::{read_wav, write_wav, WavEncoding, Waveform};

#[derive(Parser)]
struct Args {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, default_value_t = 2)]
    num_speakers: usize,
    #[arg(long, default_value = "copy")]
    mode: String,
}

fn write(outdir: &std::path::Path, i: usize, w: &Waveform) -> sepprobe::Result<()> {
    write_wav(w, outdir.join(format!("est{i}.wav")), WavEncoding::Float32).map(|_| ())
}

fn run(args: &Args) -> sepprobe::Result<()> {
    let mix = read_wav(&args.input)?;
    let c = args.num_speakers;
    let part = mix.scaled(1.0 / c as f64)?;
    match args.mode.as_str() {
        "copy" => (1..=c).try_for_each(|i| write(&args.outdir, i, &part)),
        "swap" => {
            let n = mix.len();
            let s = mix.samples();
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            a[..n / 2].copy_from_slice(&s[..n / 2]);
            b[n / 2..].copy_from_slice(&s[n / 2..]);
            write(&args.outdir, 1, &Waveform::new(a, mix.sample_rate_hz())?)?;
            write(&args.outdir, 2, &Waveform::new(b, mix.sample_rate_hz())?)
        }
        "missing" => write(&args.outdir, 1, &part),
        "extra" => (1..=c + 1).try_for_each(|i| write(&args.outdir, i, &part)),
        "sleep" => {
            std::thread::sleep(std::time::Duration::from_secs(30));
            Ok(())
        }
        "wrong-rate" => {
            let up = Waveform::new(part.samples().to_vec(), 16_000)?;
            (1..=c).try_for_each(|i| write(&args.outdir, i, &up))
        }
        "short" => {
            let cut = part.truncated(part.len().saturating_sub(part.sample_rate_hz() as usize));
            (1..=c).try_for_each(|i| write(&args.outdir, i, &cut))
        }
        other => Err(sepprobe::Error::InvalidSeparator(format!("unknown mode {other}"))),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.mode == "fail" {
        eprintln!("fixture-separator: simulated model failure");
        return ExitCode::from(3);
    }
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fixture-separator: {e}");
            ExitCode::FAILURE
        }
    }
}
