mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fixture_descriptor, read, small_config, REPORT_FILES};
use sepprobe::harness::DeformationEntry;
use sepprobe::separators::SeparatorDescriptor;
use sepprobe::signal::read_wav;

const BIN: &str = env!("CARGO_BIN_EXE_sepprobe");

fn sepprobe(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let cfg = small_config(vec![DeformationEntry::None], vec![SeparatorDescriptor::irm()]);
    std::fs::write(&good, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = sepprobe(&["run", "--config", path(&good), "--out", path(&out), "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in REPORT_FILES {
        assert!(out.join(f).is_file(), "{f}");
    }

    let failing = dir.path().join("failing.json");
    let cfg = small_config(
        vec![DeformationEntry::None],
        vec![SeparatorDescriptor::irm(), fixture_descriptor("fail")],
    );
    std::fs::write(&failing, serde_json::to_string(&cfg).unwrap()).unwrap();
    let o = sepprobe(&["run", "--config", path(&failing), "--out", path(&dir.path().join("f"))]);
    assert_eq!(o.status.code(), Some(2));
    let rows = String::from_utf8(read(&dir.path().join("f/rows.csv"))).unwrap();
    assert_eq!(rows.lines().filter(|l| l.contains(",failed,")).count(), 2);

    let empty = dir.path().join("empty.json");
    std::fs::write(
        &empty,
        r#"{"stimuli": [], "deformations": [{"kind": "none"}], "separators": [{"kind": "irm_oracle"}]}"#,
    )
    .unwrap();
    let o = sepprobe(&["run", "--config", path(&empty), "--out", path(&dir.path().join("e"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no stimuli"));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    let o = sepprobe(&["run", "--config", path(&broken), "--out", path(&dir.path().join("b"))]);
    assert_eq!(o.status.code(), Some(1));

    let o = sepprobe(&["run", "--preset", "fig99", "--out", path(&dir.path().join("p"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_override_and_separator_cmd() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let cfg = small_config(vec![DeformationEntry::None], vec![SeparatorDescriptor::ibm()]);
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = sepprobe(&[
        "run",
        "--config",
        path(&cfg_path),
        "--out",
        path(&out),
        "--seed",
        "99",
        "--separator-cmd",
        common::FIXTURE,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["seed"], 99);
    assert_eq!(summary["rows"], 4);
    let rows = String::from_utf8(read(&out.join("rows.csv"))).unwrap();
    assert_eq!(rows.lines().filter(|l| l.contains(",external,")).count(), 2);
}

#[test]
fn synth_deform_eval_stats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = sepprobe(&[
        "synth",
        "--harmonics",
        "1,2,3",
        "--duration-s",
        "1",
        "--mute",
        "a",
        "--mute-start-s",
        "0.5",
        "--mute-ms",
        "31",
        "--out",
        path(d),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mix = read_wav(d.join("mixture.wav")).unwrap();
    assert_eq!(mix.len(), 8000);
    let s1 = read_wav(d.join("source1.wav")).unwrap();
    assert!(s1.samples()[4000..4248].iter().all(|&x| x == 0.0));

    let o = sepprobe(&[
        "deform",
        "--input",
        path(&d.join("mixture.wav")),
        "--output",
        path(&d.join("lp.wav")),
        "--filter",
        "lp_300",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_wav(d.join("lp.wav")).unwrap().len(), 8000);
    let o = sepprobe(&[
        "deform",
        "--input",
        path(&d.join("mixture.wav")),
        "--output",
        path(&d.join("x.wav")),
        "--filter",
        "zz_1",
    ]);
    assert!(!o.status.success());

    let o = sepprobe(&[
        "eval",
        "--estimates",
        path(&d.join("source2.wav")),
        path(&d.join("source1.wav")),
        "--references",
        path(&d.join("source1.wav")),
        path(&d.join("source2.wav")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mean_si_sdr"], 80.0);
    assert_eq!(v["permutation"], serde_json::json!([1, 0]));

    let pair = d.join("pair");
    std::fs::create_dir(&pair).unwrap();
    std::fs::copy(d.join("source1.wav"), pair.join("est1.wav")).unwrap();
    std::fs::copy(d.join("source2.wav"), pair.join("est2.wav")).unwrap();
    let o = sepprobe(&["stats", path(&pair)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["included"], 1);
    assert_eq!(v["frac_low_to_ch1"], 1.0);

    let o = sepprobe(&["eval", "--estimates", path(&d.join("nope.wav")), "--references", path(&d.join("source1.wav"))]);
    assert_eq!(o.status.code(), Some(1));
}
