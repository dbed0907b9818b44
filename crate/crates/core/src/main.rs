use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sepprobe::analysis::{assignment_stats, F0Params};
use sepprobe::deform::{apply_filter, FilterSpec};
use sepprobe::harness::{preset, run_experiment, ExperimentConfig, PRESET_NAMES};
use sepprobe::metrics::{evaluate, MetricsOptions, SeparationResult};
use sepprobe::separators::{ExternalSeparator, SeparatorDescriptor};
use sepprobe::signal::{read_wav, write_wav, WavEncoding, Waveform, CANONICAL_SAMPLE_RATE};
use sepprobe::stimulus::{
    synth_alternating_mixture, AlternatingMixtureSpec, HarmonicToneSpec, MuteEvent, MuteTarget,
};
use sepprobe::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_CELL_FAILURES: u8 = 2;

#[derive(Parser)]
#[command(name = "sepprobe", version, about = "Robustness probes for source-separation systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an alternating two-tone mixture and its sources as WAV files.
    Synth(SynthArgs),
    /// Filter or mute a WAV file.
    Deform(DeformArgs),
    /// Score estimates against references (PIT SI-SDR, framewise scores, swaps).
    Eval(EvalArgs),
    /// Run an experiment grid and write reports.
    Run(RunArgs),
    /// Channel-assignment statistics over two-channel separator outputs.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoding {
    F32,
    Pcm16,
}

impl From<Encoding> for WavEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::F32 => WavEncoding::Float32,
            Encoding::Pcm16 => WavEncoding::Pcm16,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMuteTarget {
    A,
    B,
    Mix,
}

impl From<CliMuteTarget> for MuteTarget {
    fn from(t: CliMuteTarget) -> Self {
        match t {
            CliMuteTarget::A => MuteTarget::SourceA,
            CliMuteTarget::B => MuteTarget::SourceB,
            CliMuteTarget::Mix => MuteTarget::Mixture,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 117.0)]
    f0_a: f64,
    #[arg(long, default_value_t = 201.0)]
    f0_b: f64,
    /// Comma-separated harmonic numbers, e.g. `1,2,3,5`.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    harmonics: Vec<u32>,
    #[arg(long, default_value_t = 62.0)]
    period_ms: f64,
    #[arg(long, default_value_t = 3.0)]
    duration_s: f64,
    /// Mute one stream: target (a, b or mix).
    #[arg(long, requires_all = ["mute_start_s", "mute_ms"])]
    mute: Option<CliMuteTarget>,
    #[arg(long)]
    mute_start_s: Option<f64>,
    #[arg(long)]
    mute_ms: Option<f64>,
    #[arg(long, value_enum, default_value = "f32")]
    encoding: Encoding,
    /// Output directory for mixture.wav, source1.wav and source2.wav.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DeformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Filter id such as `lp_300`, `hp_180` or `bs_350_400`.
    #[arg(long, conflicts_with = "mute_start_s")]
    filter: Option<FilterSpec>,
    #[arg(long, requires = "mute_ms")]
    mute_start_s: Option<f64>,
    #[arg(long)]
    mute_ms: Option<f64>,
    #[arg(long, value_enum, default_value = "f32")]
    encoding: Encoding,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, num_args = 1.., required = true)]
    estimates: Vec<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    references: Vec<PathBuf>,
    #[arg(long, default_value_t = MetricsOptions::default().frame_ms)]
    frame_ms: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: fig3, fig5, fig6 or fig7.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Adds an external separator invoked as
    /// `<cmd> --input IN --outdir DIR --num-speakers C`.
    #[arg(long)]
    separator_cmd: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    /// Directories each holding est1.wav and est2.wav.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
}

fn write_all(dir: &Path, files: &[(&str, &Waveform)], enc: WavEncoding) -> sepprobe::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    for (name, w) in files {
        let path = dir.join(name);
        let report = write_wav(w, &path, enc)?;
        if report.clipped > 0 {
            eprintln!("warning: {} samples clipped in {}", report.clipped, path.display());
        }
        println!("{}", path.display());
    }
    Ok(())
}

fn synth(a: SynthArgs) -> sepprobe::Result<()> {
    let spec = AlternatingMixtureSpec {
        tone_a: HarmonicToneSpec::new(a.f0_a, a.harmonics.iter().copied()),
        tone_b: HarmonicToneSpec::new(a.f0_b, a.harmonics.iter().copied()),
        tone_period_s: a.period_ms / 1000.0,
        total_duration_s: a.duration_s,
        ..AlternatingMixtureSpec::new(a.f0_a, a.f0_b, 1, a.period_ms / 1000.0, a.duration_s)
    };
    let mut stim = synth_alternating_mixture(&spec, CANONICAL_SAMPLE_RATE)?;
    if let (Some(target), Some(start_s), Some(ms)) = (a.mute, a.mute_start_s, a.mute_ms) {
        stim = stim.apply_mute(&MuteEvent {
            target: target.into(),
            start_s,
            duration_s: ms / 1000.0,
        })?;
    }
    write_all(
        &a.out,
        &[
            ("mixture.wav", &stim.mixture),
            ("source1.wav", &stim.sources[0]),
            ("source2.wav", &stim.sources[1]),
        ],
        a.encoding.into(),
    )
}

fn deform(a: DeformArgs) -> sepprobe::Result<()> {
    let input = read_wav(&a.input)?;
    let output = if let Some(filter) = a.filter {
        filter.validate(input.sample_rate_hz())?;
        apply_filter(&input, &filter)?
    } else if let (Some(start_s), Some(ms)) = (a.mute_start_s, a.mute_ms) {
        let stim = sepprobe::stimulus::Stimulus::from_sources(vec![input])?;
        stim.apply_mute(&MuteEvent {
            target: MuteTarget::Mixture,
            start_s,
            duration_s: ms / 1000.0,
        })?
        .mixture
    } else {
        return Err(Error::Config("give --filter or --mute-start-s/--mute-ms".into()));
    };
    let report = write_wav(&output, &a.output, a.encoding.into())?;
    if report.clipped > 0 {
        eprintln!("warning: {} samples clipped", report.clipped);
    }
    Ok(())
}

fn read_all(paths: &[PathBuf]) -> sepprobe::Result<Vec<Waveform>> {
    paths.iter().map(read_wav).collect()
}

fn eval(a: EvalArgs) -> sepprobe::Result<()> {
    let result = SeparationResult::new(read_all(&a.estimates)?);
    let references = read_all(&a.references)?;
    let options = MetricsOptions {
        frame_ms: a.frame_ms,
        hop_ms: a.frame_ms / 2.0,
        ..MetricsOptions::default()
    };
    let row = evaluate(&result, &references, &options)?;
    let out = json!({
        "mean_si_sdr": row.mean_si_sdr,
        "si_sdr_per_channel": row.si_sdr_per_channel,
        "permutation": row.chosen_permutation,
        "framewise_si_sdr": row.framewise_si_sdr,
        "swap_events": row.swap_events,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn stats(a: StatsArgs) -> sepprobe::Result<()> {
    let results = a
        .dirs
        .iter()
        .map(|d| {
            Ok(SeparationResult::new(vec![
                read_wav(d.join("est1.wav"))?,
                read_wav(d.join("est2.wav"))?,
            ]))
        })
        .collect::<sepprobe::Result<Vec<_>>>()?;
    let stats = assignment_stats(&results, &F0Params::default())?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn load_config(a: &RunArgs) -> sepprobe::Result<ExperimentConfig> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name).map_err(|e| Error::Config(e.to_string()))?,
        (None, None) => {
            return Err(Error::Config(format!(
                "give --config or --preset ({})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(cmd) = &a.separator_cmd {
        cfg.separators.push(SeparatorDescriptor::external(
            "external",
            ExternalSeparator::for_command(cmd),
        ));
    }
    cfg.validate().map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    })?;
    Ok(cfg)
}

fn run(a: RunArgs) -> ExitCode {
    let cfg = match load_config(&a) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("sepprobe: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let bundle = match run_experiment(&cfg, a.jobs) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("sepprobe: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = bundle.emit(&a.out) {
        eprintln!("sepprobe: {e}");
        return ExitCode::FAILURE;
    }
    let failed = bundle.failed_rows();
    println!(
        "{} rows ({} failed) written to {}",
        bundle.rows.len(),
        failed,
        a.out.display()
    );
    if failed > 0 {
        ExitCode::from(EXIT_CELL_FAILURES)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(a) => return run(a),
        Command::Synth(a) => synth(a),
        Command::Deform(a) => deform(a),
        Command::Eval(a) => eval(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sepprobe: {e}");
            ExitCode::FAILURE
        }
    }
}
