use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hrrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrrp")).args(args).output().expect("spawn hrrp")
}

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

/// Drops the wall-time column so reruns can be compared.
fn strip_timing(csv: &str) -> String {
    let mut lines = csv.lines();
    let magic = lines.next().unwrap();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let t = header.iter().position(|h| *h == "wall_time").unwrap();
    let mut out = vec![magic.to_string()];
    for l in csv.lines().skip(1) {
        let cols: Vec<&str> = l.split(',').enumerate().filter(|(i, _)| *i != t).map(|(_, c)| c).collect();
        out.push(cols.join(","));
    }
    out.join("\n")
}

#[test]
fn design_sd_writes_parseable_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    ok(&hrrp(&["design-sd", "--config", s(&toy()), "--out", s(dir.path())]));
    let text = fs::read_to_string(dir.path().join("sd.txt")).unwrap();
    let sd = hrrp_core::SensingDictionary::from_text(&text).unwrap();
    assert_eq!(sd.w.shape(), (8, 8));
    assert!(sd.objective() < 1e-9);
    assert!(dir.path().join("sd_trace.csv").exists());
}

#[test]
fn simulate_then_recover_every_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&hrrp(&["simulate", "--config", s(&toy()), "--out", s(out)]));
    let meas = out.join("measurement.txt");
    for alg in ["omp", "omp-sd", "a-omp"] {
        let o = hrrp(&["recover", "--config", s(&toy()), "--out", s(out), "--measurement", s(&meas), "--algorithm", alg]);
        ok(&o);
        let srp = fs::read_to_string(out.join("srp.csv")).unwrap();
        // magic + header + one row per cell
        assert_eq!(srp.lines().count(), 2 + 8);
        let strong = srp.lines().skip(2).filter(|l| {
            let mag: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
            mag > 0.5
        });
        assert_eq!(strong.count(), 2, "{alg}");
        assert!(fs::read_to_string(out.join("srp.svg")).unwrap().starts_with("<svg"));
    }
}

#[test]
fn bench_then_export_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&hrrp(&["bench", "--config", s(&toy()), "--out", s(a.path())]));
    ok(&hrrp(&["export", "--input", s(&a.path().join("trials.csv")), "--out", s(b.path())]));
    for f in ["summary.csv", "cde.csv", "timing.csv", "success_vs_snr.svg", "cde_20dB.svg", "cde_noiseless.svg"] {
        assert!(fs::read(a.path().join(f)).unwrap() == fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn bench_reruns_agree_apart_from_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&hrrp(&["bench", "--config", s(&toy()), "--out", s(a.path())]));
    ok(&hrrp(&["bench", "--config", s(&toy()), "--out", s(b.path()), "--threads", "2"]));
    for f in ["trials.csv", "summary.csv"] {
        let x = fs::read_to_string(a.path().join(f)).unwrap();
        let y = fs::read_to_string(b.path().join(f)).unwrap();
        assert!(strip_timing(&x) == strip_timing(&y), "{f} differs between runs");
    }
    assert!(fs::read(a.path().join("cde.csv")).unwrap() == fs::read(b.path().join("cde.csv")).unwrap());
}

#[test]
fn seed_override_changes_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&hrrp(&["bench", "--config", s(&toy()), "--out", s(a.path())]));
    ok(&hrrp(&["bench", "--config", s(&toy()), "--out", s(b.path()), "--seed", "99"]));
    let x = fs::read_to_string(a.path().join("trials.csv")).unwrap();
    let y = fs::read_to_string(b.path().join("trials.csv")).unwrap();
    assert!(strip_timing(&x) != strip_timing(&y));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text = fs::read_to_string(toy()).unwrap().replace("count = 8", "count = 9");
    fs::write(&cfg, text).unwrap();
    let o = hrrp(&["design-sd", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(&cfg, "[scenario]\nf0 = \"fast\"\n").unwrap();
    assert_eq!(hrrp(&["bench", "--config", s(&cfg)]).status.code(), Some(2));

    let missing = dir.path().join("nope.toml");
    assert_eq!(hrrp(&["bench", "--config", s(&missing)]).status.code(), Some(2));
}

#[test]
fn measurement_length_mismatch_exits_2_with_both_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let meas = dir.path().join("m.txt");
    let mut text = String::from("# hrrp-measurement v1\ncount 7\npulses 0 1 2 3 4 5 6\nsnr noiseless\nnoise_seed 0\ndata\n");
    for _ in 0..7 {
        text.push_str("1.0 0.0\n");
    }
    fs::write(&meas, text).unwrap();
    let o = hrrp(&["recover", "--config", s(&toy()), "--out", s(dir.path()), "--measurement", s(&meas), "--algorithm", "omp"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains('8') && err.contains('7'), "{err}");
}

#[test]
fn truncated_measurement_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let meas = dir.path().join("m.txt");
    fs::write(&meas, "# hrrp-measurement v1\ncount 8\npulses 0 1 2 3 4 5 6 7\nsnr 10\nnoise_seed 0\ndata\n1 0\n").unwrap();
    let o = hrrp(&["recover", "--config", s(&toy()), "--out", s(dir.path()), "--measurement", s(&meas)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wrong_shape_sensing_dictionary_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&hrrp(&["simulate", "--config", s(&toy()), "--out", s(out)]));
    let sd = hrrp_core::SensingDictionary {
        w: hrrp_core::ComplexMatrix::zeros(4, 4),
        b1: 0.0,
        b2: 0.0,
        gamma: 0.5,
        trace: Default::default(),
        digest: String::new(),
    };
    fs::write(out.join("sd.txt"), sd.to_text()).unwrap();
    let o = hrrp(&[
        "recover",
        "--config",
        s(&toy()),
        "--out",
        s(out),
        "--measurement",
        s(&out.join("measurement.txt")),
        "--sd",
        s(&out.join("sd.txt")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coherence_writes_report_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    ok(&hrrp(&["coherence", "--config", s(&toy()), "--out", s(dir.path())]));
    for f in ["coherence.csv", "iai_histograms.csv", "iai_original.svg", "iai_designed.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let rows = fs::read_to_string(dir.path().join("coherence.csv")).unwrap();
    assert!(rows.lines().any(|l| l.starts_with("mip,")));
}
