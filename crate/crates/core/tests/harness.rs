mod common;

use std::collections::BTreeMap;

use common::{read, small_config, tone_stimulus, REPORT_FILES};
use sepprobe::deform::{FilterPreset, FilterSpec};
use sepprobe::harness::{
    run_experiment, DeformationEntry, ExperimentConfig, ReferenceMode, StimulusEntry,
};
use sepprobe::separators::SeparatorDescriptor;
use sepprobe::signal::{write_wav, WavEncoding, Waveform};
use sepprobe::stimulus::MuteTarget;
use sepprobe::Error;
use sha2::{Digest, Sha256};

fn three_deformations() -> Vec<DeformationEntry> {
    vec![
        DeformationEntry::None,
        DeformationEntry::Filter {
            filter: FilterSpec::bandstop(350.0, 400.0),
        },
        DeformationEntry::MuteGrid {
            targets: vec![MuteTarget::SourceA],
            durations_ms: vec![31.0],
            seeds: 1,
            align_to_onset: true,
        },
    ]
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let cfg = small_config(
        three_deformations(),
        vec![SeparatorDescriptor::irm(), SeparatorDescriptor::ibm()],
    );
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_experiment(&cfg, 1).unwrap().emit(&a).unwrap();
    run_experiment(&cfg, 4).unwrap().emit(&b).unwrap();
    for f in REPORT_FILES {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f} differs");
    }
}

#[test]
fn counting_and_config_hash() {
    let cfg = small_config(
        three_deformations(),
        vec![SeparatorDescriptor::irm(), SeparatorDescriptor::identity_split()],
    );
    let bundle = run_experiment(&cfg, 0).unwrap();
    assert_eq!(bundle.rows.len(), 2 * 3 * 2);
    assert_eq!(bundle.failed_rows(), 0);

    let dir = tempfile::tempdir().unwrap();
    bundle.emit(dir.path()).unwrap();
    let aggregate = String::from_utf8(read(&dir.path().join("aggregate.csv"))).unwrap();
    assert_eq!(aggregate.lines().count(), 1 + 6);

    let summary: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("summary.json"))).unwrap();
    let resolved = read(&dir.path().join("config.resolved.json"));
    let hash = hex::encode(Sha256::digest(&resolved));
    assert_eq!(summary["config_hash"], hash.as_str());
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["rows"], 12);

    // The resolved config reproduces the run.
    let again: ExperimentConfig = serde_json::from_slice(&resolved).unwrap();
    assert_eq!(run_experiment(&again, 1).unwrap().rows, bundle.rows);
}

#[test]
fn rows_are_sorted_and_complete() {
    let mut cfg = small_config(
        three_deformations(),
        vec![SeparatorDescriptor::identity_split(), SeparatorDescriptor::irm()],
    );
    cfg.reference_mode = ReferenceMode::Both;
    let bundle = run_experiment(&cfg, 3).unwrap();
    assert_eq!(bundle.rows.len(), 2 * 3 * 2 * 2);
    let keys: Vec<_> = bundle.rows.iter().map(|r| r.sort_key()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    // Unfiltered and muted cells score identically in both modes.
    for pair in bundle.rows.chunks(2) {
        assert_eq!(pair[0].reference_mode, ReferenceMode::Clean);
        assert_eq!(pair[1].reference_mode, ReferenceMode::Deformed);
        if !pair[0].deformation_id.starts_with("bs_") {
            assert_eq!(pair[0].outcome, pair[1].outcome);
        }
    }
}

#[test]
fn aggregates_match_recomputation_from_rows() {
    let cfg = small_config(
        three_deformations(),
        vec![SeparatorDescriptor::irm(), SeparatorDescriptor::identity_split()],
    );
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, 2).unwrap().emit(dir.path()).unwrap();

    let mut groups: BTreeMap<(String, String, String), Vec<(f64, usize)>> = BTreeMap::new();
    let mut rows = csv::Reader::from_path(dir.path().join("rows.csv")).unwrap();
    for rec in rows.deserialize::<BTreeMap<String, String>>() {
        let rec = rec.unwrap();
        let swaps = rec["swap_events"].split(';').filter(|s| !s.is_empty()).count();
        groups
            .entry((
                rec["deformation_id"].clone(),
                rec["separator_id"].clone(),
                rec["reference_mode"].clone(),
            ))
            .or_default()
            .push((rec["mean_si_sdr"].parse().unwrap(), swaps));
    }
    let mut agg = csv::Reader::from_path(dir.path().join("aggregate.csv")).unwrap();
    let mut seen = 0;
    for rec in agg.deserialize::<BTreeMap<String, String>>() {
        let rec = rec.unwrap();
        let key = (
            rec["deformation_id"].clone(),
            rec["separator_id"].clone(),
            rec["reference_mode"].clone(),
        );
        let vals = &groups[&key];
        let mean = vals.iter().map(|v| v.0).sum::<f64>() / vals.len() as f64;
        let mut sorted: Vec<f64> = vals.iter().map(|v| v.0).collect();
        sorted.sort_by(f64::total_cmp);
        let median = 0.5 * (sorted[0] + sorted[1]);
        let swaps = vals.iter().map(|v| v.1 as f64).sum::<f64>() / vals.len() as f64;
        assert_eq!(rec["rows"].parse::<usize>().unwrap(), vals.len());
        assert_eq!(rec["mean_si_sdr"].parse::<f64>().unwrap(), mean);
        assert_eq!(rec["median_si_sdr"].parse::<f64>().unwrap(), median);
        assert_eq!(rec["mean_swap_events"].parse::<f64>().unwrap(), swaps);
        seen += 1;
    }
    assert_eq!(seen, groups.len());
}

#[test]
fn bandstop_suite_identity_split_baseline() {
    let mut cfg = small_config(
        vec![DeformationEntry::Preset {
            name: FilterPreset::BandstopSuite,
        }],
        vec![SeparatorDescriptor::identity_split()],
    );
    // Against the deformed sources the split scores +x and -x dB on the two
    // channels of a time-disjoint mixture.
    cfg.reference_mode = ReferenceMode::Deformed;
    let bundle = run_experiment(&cfg, 0).unwrap();
    assert_eq!(bundle.aggregates.len(), 8);
    for a in &bundle.aggregates {
        let m = a.mean_si_sdr.unwrap();
        assert!(m.abs() < 0.5, "{}: {m}", a.deformation_id);
    }
}

#[test]
fn validation_errors_abort_before_work() {
    let mut cfg = small_config(vec![DeformationEntry::None], vec![SeparatorDescriptor::irm()]);
    cfg.stimuli.clear();
    assert!(matches!(run_experiment(&cfg, 1), Err(Error::Config(_))));

    let cfg = small_config(vec![], vec![SeparatorDescriptor::irm()]);
    assert!(matches!(run_experiment(&cfg, 1), Err(Error::Config(_))));

    let cfg = small_config(
        vec![DeformationEntry::None],
        vec![SeparatorDescriptor::irm(), SeparatorDescriptor::irm()],
    );
    assert!(matches!(run_experiment(&cfg, 1), Err(Error::Config(_))));

    let mut cfg = small_config(vec![DeformationEntry::None], vec![SeparatorDescriptor::irm()]);
    cfg.stimuli.push(tone_stimulus(62.0, 1.0));
    assert!(matches!(run_experiment(&cfg, 1), Err(Error::Config(_))));

    let cfg = small_config(
        vec![DeformationEntry::Filter {
            filter: FilterSpec::lowpass(3995.0),
        }],
        vec![SeparatorDescriptor::irm()],
    );
    assert!(run_experiment(&cfg, 1).is_err());

    let bad = r#"{"stimuli": [], "deformations": [], "separators": [], "bogus": 1}"#;
    assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))));
}

#[test]
fn seeds_move_mute_placements_deterministically() {
    let grid = |seed| {
        let mut cfg = small_config(
            vec![DeformationEntry::MuteGrid {
                targets: vec![MuteTarget::SourceB],
                durations_ms: vec![20.0],
                seeds: 3,
                align_to_onset: false,
            }],
            vec![SeparatorDescriptor::identity_split()],
        );
        cfg.seed = seed;
        run_experiment(&cfg, 0).unwrap().rows
    };
    let a = grid(1);
    assert_eq!(a, grid(1));
    assert_ne!(a, grid(2));
    assert_eq!(a.len(), 2 * 3);
}

#[test]
fn speech_manifest_stimuli() {
    let dir = tempfile::tempdir().unwrap();
    let noise = |seed: u64| {
        let mut state = seed;
        let samples = (0..8000)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.5
            })
            .collect();
        Waveform::new(samples, 8000).unwrap()
    };
    for (name, seed) in [("s1.wav", 1), ("s2.wav", 2), ("s3.wav", 3)] {
        write_wav(&noise(seed), dir.path().join(name), WavEncoding::Float32).unwrap();
    }
    let manifest = dir.path().join("pairs.csv");
    std::fs::write(
        &manifest,
        "id,path_a,path_b,gain_db_b\npair1,s1.wav,s2.wav,0\npair2,s2.wav,s3.wav,-6\n",
    )
    .unwrap();
    let mut cfg = small_config(vec![DeformationEntry::None], vec![SeparatorDescriptor::irm()]);
    cfg.stimuli = vec![
        StimulusEntry::Manifest { path: manifest },
        StimulusEntry::Speech {
            id: "direct".into(),
            path_a: dir.path().join("s1.wav"),
            path_b: dir.path().join("s3.wav"),
            gain_db_b: 3.0,
        },
    ];
    let bundle = run_experiment(&cfg, 0).unwrap();
    let ids: Vec<&str> = bundle.rows.iter().map(|r| r.stimulus_id.as_str()).collect();
    assert_eq!(ids, ["direct", "pair1", "pair2"]);
    assert_eq!(bundle.failed_rows(), 0);

    cfg.stimuli = vec![StimulusEntry::Speech {
        id: "gone".into(),
        path_a: dir.path().join("missing.wav"),
        path_b: dir.path().join("s1.wav"),
        gain_db_b: 0.0,
    }];
    assert!(run_experiment(&cfg, 0).is_err());
}
