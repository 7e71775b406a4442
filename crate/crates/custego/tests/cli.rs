//! End-to-end checks of the `custego` binary: synth -> encode -> decode,
//! embed -> extract round trips for both schemes, and error exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_custego"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("spawn custego");
    assert!(
        out.status.success(),
        "custego {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("custego-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn synth_encode_decode_round_trip() {
    let dir = tmp_dir("codec");
    run_ok(&["synth", "--out", &p(&dir, "corpus"), "--videos", "1", "--frames", "2", "--size", "64", "--seed", "3"]);
    let y4m = std::fs::read_dir(dir.join("corpus")).unwrap().next().unwrap().unwrap().path();
    let out = run_ok(&["encode", "--input", y4m.to_str().unwrap(), "--output", &p(&dir, "a.cusg"), "--qp", "32"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["frames"], 2);
    assert!(v["psnr"].as_f64().unwrap() > 25.0);
    let out = run_ok(&["decode", "--input", &p(&dir, "a.cusg"), "--output", &p(&dir, "a.y4m")]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["frames"], 2);
    assert!(dir.join("a.y4m").is_file());
}

#[test]
fn embed_extract_round_trip_both_schemes() {
    let dir = tmp_dir("stego");
    run_ok(&["synth", "--out", &p(&dir, "corpus"), "--videos", "1", "--frames", "2", "--size", "128", "--seed", "9"]);
    let y4m = std::fs::read_dir(dir.join("corpus")).unwrap().next().unwrap().unwrap().path();
    let input = y4m.to_str().unwrap();
    std::fs::write(dir.join("msg.bin"), b"hi!").unwrap();

    for (scheme, side) in [("full", true), ("8x8", false)] {
        let mut args = vec![
            "embed", "--input", input, "--output", &p(&dir, "s.cusg"),
            "--header-out", &p(&dir, "s.json"), "--message-file", &p(&dir, "msg.bin"),
            "--qp", "26", "--payload", "0.5", "--scheme", scheme, "--seed", "4",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        if side {
            args.extend(["--sideinfo-out".into(), p(&dir, "s.side")]);
        }
        let out = run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["message_bits"], 24);

        let mut args = vec![
            "extract", "--input", &p(&dir, "s.cusg"), "--header", &p(&dir, "s.json"),
            "--output", &p(&dir, "m.out"),
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        if side {
            args.extend(["--sideinfo".into(), p(&dir, "s.side")]);
        }
        run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(std::fs::read(dir.join("m.out")).unwrap(), b"hi!", "scheme {scheme}");
    }
}

#[test]
fn error_exit_codes() {
    let dir = tmp_dir("errors");
    // malformed bitstream -> format error, exit 2
    std::fs::write(dir.join("bad.cusg"), b"not a bitstream").unwrap();
    let out = bin()
        .args(["decode", "--input", &p(&dir, "bad.cusg"), "--output", &p(&dir, "x.y4m")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // message larger than capacity -> capacity error, exit 3
    run_ok(&["synth", "--out", &p(&dir, "corpus"), "--videos", "1", "--frames", "1", "--size", "64", "--seed", "1"]);
    let y4m = std::fs::read_dir(dir.join("corpus")).unwrap().next().unwrap().unwrap().path();
    std::fs::write(dir.join("big.bin"), vec![0xAB; 4096]).unwrap();
    let out = bin()
        .args([
            "embed", "--input", y4m.to_str().unwrap(), "--output", &p(&dir, "s.cusg"),
            "--header-out", &p(&dir, "s.json"), "--message-file", &p(&dir, "big.bin"),
            "--scheme", "8x8", "--payload", "0.5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
