//! Integration coverage for the CLI surface and the on-disk formats that
//! external consumers (training code) depend on.

use std::path::{Path, PathBuf};
use std::process::Command;

use bgaug::dataset::read_packed;
use bgaug::imaging::Raster;
use bgaug::io;
use bgaug::manifest::{DatasetManifest, Label, ManifestEntry};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_bgaug")
}

fn write_frames(dir: &Path, count: usize, with_masks: bool) -> PathBuf {
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).unwrap();
    if with_masks {
        std::fs::create_dir_all(dir.join("masks")).unwrap();
    }
    let mut entries = Vec::new();
    for i in 0..count {
        let px: Vec<u8> = (0..160 * 160).map(|k| ((k + 37 * i) % 256) as u8).collect();
        let name = format!("f{i}.png");
        io::save_grayscale(&frames_dir.join(&name), &Raster::new(160, 160, px).unwrap()).unwrap();
        let mask = if with_masks {
            let mpx: Vec<u8> = (0..160 * 160)
                .map(|k| if k % 160 > 40 && k % 160 < 120 { 255 } else { 0 })
                .collect();
            let mname = format!("masks/m{i}.png");
            io::save_grayscale(&dir.join(&mname), &Raster::new(160, 160, mpx).unwrap()).unwrap();
            Some(PathBuf::from(mname))
        } else {
            None
        };
        entries.push(ManifestEntry {
            frame: PathBuf::from(&name),
            mask,
            detections: None,
            label: Label { x: i as f64 * 0.25, y: -(i as f64) * 0.1, phi: 0.3 },
            subject_id: "t".into(),
            override_person_index: None,
        });
    }
    let manifest = DatasetManifest::new(PathBuf::from("frames"), entries, dir.to_path_buf());
    let path = dir.join("manifest.json");
    manifest.save(&path).unwrap();
    path
}

fn write_pool(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..3u32 {
        let px: Vec<u8> = (0..200 * 200).map(|k| ((k as u32 * (i + 3)) % 256) as u8).collect();
        io::save_grayscale(&dir.join(format!("p{i}.png")), &Raster::new(200, 200, px).unwrap())
            .unwrap();
    }
}

#[test]
fn packed_archive_size_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_frames(tmp.path(), 6, false);
    let out = tmp.path().join("out");
    let status = Command::new(bin())
        .args([
            "augment",
            "--manifest", manifest.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--seed", "1",
            "--mode", "aug",
            "--epochs", "1",
            "--steps", "1",
            "--batch", "2",
            "--split", "0.2",
            "--format", "packed",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let data = std::fs::read(out.join("data.bin")).unwrap();
    // header 12 bytes, then per sample 160*96 pixels + three f32 labels
    assert_eq!(data.len(), 12 + 2 * (160 * 96 + 12));
    let (w, h, samples) = read_packed(&out.join("data.bin")).unwrap();
    assert_eq!((w, h), (160, 96));
    assert_eq!(samples.len(), 2);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn empty_packed_archive_is_valid() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_frames(tmp.path(), 3, false);
    let out = tmp.path().join("out");
    let status = Command::new(bin())
        .args([
            "augment",
            "--manifest", manifest.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--seed", "1",
            "--mode", "aug",
            "--epochs", "0",
            "--format", "packed",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let (_, _, samples) = read_packed(&out.join("data.bin")).unwrap();
    assert!(samples.is_empty());
}

#[test]
fn png_csv_round_trip_within_f32() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_frames(tmp.path(), 5, false);
    let out = tmp.path().join("out");
    let status = Command::new(bin())
        .args([
            "augment",
            "--manifest", manifest.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--seed", "9",
            "--mode", "aug",
            "--epochs", "1",
            "--steps", "2",
            "--batch", "2",
            "--format", "png",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let mut reader = csv::Reader::from_path(out.join("labels.csv")).unwrap();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let id = &record[0];
        let png = out.join(format!("{id}.png"));
        let img = io::load_grayscale(&png).unwrap();
        assert_eq!((img.width(), img.height()), (160, 96));
        let x: f32 = record[1].parse().unwrap();
        assert!(x.is_finite());
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn bgaug_without_masks_fails_fast_with_listing() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_frames(tmp.path(), 4, false);
    write_pool(&tmp.path().join("pool"));
    let output = Command::new(bin())
        .args([
            "augment",
            "--manifest", manifest.to_str().unwrap(),
            "--pool", tmp.path().join("pool").to_str().unwrap(),
            "--out", tmp.path().join("out").to_str().unwrap(),
            "--seed", "1",
            "--mode", "bgaug",
            "--epochs", "1",
            "--steps", "1",
            "--batch", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "expected data-error exit code");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("missing"), "stderr: {stderr}");
    assert!(stderr.contains("f0.png") || stderr.contains("f1.png"), "stderr: {stderr}");
}

#[test]
fn aug_mode_works_without_pool_or_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_frames(tmp.path(), 4, false);
    let status = Command::new(bin())
        .args([
            "augment",
            "--manifest", manifest.to_str().unwrap(),
            "--out", tmp.path().join("out").to_str().unwrap(),
            "--seed", "2",
            "--mode", "aug",
            "--epochs", "1",
            "--steps", "1",
            "--batch", "2",
        ])
        .env_remove("BGAUG_POOL")
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn hex_seed_accepted_and_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_frames(tmp.path(), 3, false);
    let out = tmp.path().join("out");
    let status = Command::new(bin())
        .args([
            "augment",
            "--manifest", manifest.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--seed", "0xDEADBEEF",
            "--mode", "aug",
            "--epochs", "1",
            "--steps", "1",
            "--batch", "1",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(summary["plan"]["seed"].as_u64(), Some(0xDEADBEEF));
}

#[test]
fn pool_stats_reports_counts() {
    let tmp = tempfile::tempdir().unwrap();
    write_pool(tmp.path());
    // one thumbnail that must be skipped
    io::save_grayscale(&tmp.path().join("tiny.png"), &Raster::filled(8, 8, 1)).unwrap();
    let output = Command::new(bin())
        .args(["pool-stats", "--pool", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("entries: 3"), "{stdout}");
    assert!(stdout.contains("skipped: 1"), "{stdout}");
}

#[test]
fn pose_derive_then_eval_r2() {
    let tmp = tempfile::tempdir().unwrap();
    let frames = tmp.path().join("frames.csv");
    let drone = tmp.path().join("drone.csv");
    let subject = tmp.path().join("subject.csv");
    let mut f = String::from("frame_id,timestamp_s\n");
    for i in 0..20 {
        f.push_str(&format!("fr{i},{}\n", i as f64 * 0.1));
    }
    std::fs::write(&frames, f).unwrap();
    let track = |phase: f64| {
        let mut s = String::from("timestamp_s,px,py,pz,qx,qy,qz,qw\n");
        for i in 0..40 {
            let t = i as f64 * 0.05;
            let half = (0.3 * t + phase) / 2.0;
            s.push_str(&format!(
                "{t},{},{},1.0,0,0,{},{}\n",
                t.sin() + phase,
                t.cos(),
                half.sin(),
                half.cos()
            ));
        }
        s
    };
    std::fs::write(&drone, track(0.0)).unwrap();
    std::fs::write(&subject, track(1.0)).unwrap();
    let labels = tmp.path().join("labels.csv");
    let status = Command::new(bin())
        .args([
            "pose-derive",
            "--frames", frames.to_str().unwrap(),
            "--drone", drone.to_str().unwrap(),
            "--subject", subject.to_str().unwrap(),
            "--out", labels.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // perfect predictions: R^2 must be 1 for x and y
    let report_path = tmp.path().join("report.json");
    let output = Command::new(bin())
        .args([
            "eval-r2",
            "--labels", labels.to_str().unwrap(),
            "--predictions", labels.to_str().unwrap(),
            "--out", report_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert!((report["x"]["r2"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((report["y"]["r2"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((report["phi"]["r2"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(report["n"].as_u64(), Some(20));
}

#[test]
fn center_crop_outputs_match_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_frames(tmp.path(), 4, false);
    let out = tmp.path().join("eval");
    let run = || {
        Command::new(bin())
            .args([
                "center-crop",
                "--manifest", manifest.to_str().unwrap(),
                "--out", out.to_str().unwrap(),
            ])
            .status()
            .unwrap()
    };
    assert!(run().success());
    let img = io::load_grayscale(&out.join("f0.png")).unwrap();
    assert_eq!((img.width(), img.height()), (160, 96));
    // rows [32, 128) of the source
    let src = io::load_grayscale(&tmp.path().join("frames/f0.png")).unwrap();
    for y in 0..96 {
        for x in [0u32, 100] {
            assert_eq!(img.get(x, y), src.get(x, y + 32));
        }
    }
    let first = std::fs::read(out.join("f0.png")).unwrap();
    assert!(run().success());
    assert_eq!(std::fs::read(out.join("f0.png")).unwrap(), first);
}

#[test]
fn broken_manifest_exits_with_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("manifest.json");
    std::fs::write(&path, "{not json").unwrap();
    let output = Command::new(bin())
        .args([
            "augment",
            "--manifest", path.to_str().unwrap(),
            "--out", tmp.path().join("out").to_str().unwrap(),
            "--seed", "1",
            "--mode", "aug",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn missing_pool_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_frames(tmp.path(), 3, true);
    let output = Command::new(bin())
        .args([
            "augment",
            "--manifest", manifest.to_str().unwrap(),
            "--pool", tmp.path().join("nope").to_str().unwrap(),
            "--out", tmp.path().join("out").to_str().unwrap(),
            "--seed", "1",
            "--mode", "bgaug",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn two_runs_same_seed_identical_archives() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_frames(tmp.path(), 8, true);
    write_pool(&tmp.path().join("pool"));
    let run = |out: &Path| {
        let status = Command::new(bin())
            .args([
                "augment",
                "--manifest", manifest.to_str().unwrap(),
                "--pool", tmp.path().join("pool").to_str().unwrap(),
                "--out", out.to_str().unwrap(),
                "--seed", "42",
                "--mode", "bgaug",
                "--epochs", "2",
                "--steps", "3",
                "--batch", "4",
                "--format", "packed",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&a);
    run(&b);
    assert_eq!(
        std::fs::read(a.join("data.bin")).unwrap(),
        std::fs::read(b.join("data.bin")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("manifest.json")).unwrap(),
        std::fs::read(b.join("manifest.json")).unwrap()
    );
}
