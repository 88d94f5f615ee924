// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use snnaccel::golden::network::synthetic_image;
use snnaccel::io::TensorFile;

const BIN: &str = env!("CARGO_BIN_EXE_snnaccel");

fn spec(name: &str) -> String {
    format!("{}/specs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn snnaccel(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_desk_image(dir: &Path, seed: u64) -> String {
    let path = dir.join("image.vst");
    TensorFile::U8(synthetic_image([3, 8, 8], seed))
        .save(&path)
        .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn functional_run_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let image = write_desk_image(dir.path(), 7);
    let report = dir.path().join("report.json");
    let o = snnaccel(&[
        "run",
        "--spec",
        &spec("desk.json"),
        "--mode",
        "functional",
        "--image",
        &image,
        "--seed",
        "7",
        "--clock-mhz",
        "500",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("equivalence: PASS"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["verdict"], "PASS");
    assert_eq!(json["mode"], "functional");
    assert_eq!(json["phases"].as_array().unwrap().len(), 4);
    let layer_sum: u64 = json["layers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["cycles"].as_u64().unwrap())
        .sum();
    assert_eq!(layer_sum, json["total_cycles"].as_u64().unwrap());
}

#[test]
fn shape_only_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("full.json");
    let o = snnaccel(&[
        "run",
        "--spec",
        &spec("spikformer-v2-8-512.json"),
        "--mode",
        "shape-only",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("equivalence: not checked"));

    let o = snnaccel(&[
        "compare",
        "--report",
        report.to_str().unwrap(),
        "--reference",
        "table2",
    ]);
    let text = stdout(&o);
    assert!(text.contains("WSSL share > 60%: PASS"), "{text}");
    // exit status mirrors the mandatory tier, whichever way it goes
    let order_ok = text.contains("PASS-ORDER (WSSL > STDP > SSSC > ZSC): PASS");
    assert_eq!(o.status.success(), order_ok);
    assert_eq!(o.status.code(), Some(if order_ok { 0 } else { 1 }));
}

#[test]
fn cycle_mode_needs_no_image() {
    let o = snnaccel(&["run", "--spec", &spec("desk.json"), "--mode", "cycle"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("cycle mode"));
}

#[test]
fn metrics_arithmetic() {
    let o = snnaccel(&[
        "metrics",
        "--pes",
        "4096",
        "--clock-mhz",
        "500",
        "--area-mm2",
        "0.844",
        "--power-mw",
        "416.1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("peak throughput: 4096 GSOPS"), "{text}");
    assert!(text.contains("area efficiency: 4.853 TSOPS/mm2"), "{text}");
    assert!(text.contains("energy efficiency: 9.844 TSOPS/W"), "{text}");
}

#[test]
fn usage_errors_exit_with_two() {
    let o = snnaccel(&["metrics", "--pes", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = snnaccel(&["run", "--spec", &spec("desk.json"), "--mode", "functional"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("image"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(spec("desk.json"))
        .unwrap()
        .replace("\"classes\": 10", "\"classes\": true");
    std::fs::write(&bad, text).unwrap();
    let o = snnaccel(&["run", "--spec", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`classes`"));

    let o = snnaccel(&["compare", "--report", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wrong_image_shape_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("img.vst");
    TensorFile::U8(synthetic_image([3, 4, 4], 1))
        .save(&path)
        .unwrap();
    let o = snnaccel(&[
        "run",
        "--spec",
        &spec("desk.json"),
        "--mode",
        "functional",
        "--image",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
