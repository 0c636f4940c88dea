//! Drives the `mmreg` binary end to end on tiny inputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mmreg::frame::ChannelId;
use mmreg::pipeline::read_sequence;

fn mmreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmreg"))
        .args(args)
        .env("MMREG_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mmreg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny_synth(dir: &Path, frames: &str) {
    ok(&[
        "synth",
        "--out",
        p(dir),
        "--frames",
        frames,
        "--width",
        "96",
        "--height",
        "64",
        "--objects",
        "6",
    ]);
}

#[test]
fn help_lists_defaults() {
    let dataset = ok(&["dataset", "--help"]);
    for needle in [
        "[default: 32]",
        "[default: GrLUV]",
        "[default: 45]",
        "[default: 16]",
        "[default: 9]",
        "[default: 0.0375]",
    ] {
        assert!(dataset.contains(needle), "dataset help lacks {needle}");
    }
    let train = ok(&["train", "--help"]);
    for needle in [
        "[default: 32,32,64]",
        "[default: 5]",
        "[default: 100]",
        "[default: 0.01]",
        "[default: 0.9]",
        "[default: 30]",
    ] {
        assert!(train.contains(needle), "train help lacks {needle}");
    }
    assert!(ok(&["flow", "--help"]).contains("[default: 200]"));
    assert!(ok(&["eval", "--help"]).contains("[default: 1,2,3,4,5,6,7,8]"));
    assert!(ok(&["synth", "--help"]).contains("[default: 800]"));
}

#[test]
fn synth_is_reproducible_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    tiny_synth(&a, "2");
    tiny_synth(&b, "2");
    for name in ["frame_00000.mmf", "frame_00001.mmf", "sequence.txt"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let settings = |d: &Path| -> Vec<String> {
        let text = fs::read_to_string(d.join("synth_config.txt")).unwrap();
        text.lines()
            .filter(|l| !l.starts_with("out="))
            .map(String::from)
            .collect()
    };
    assert_eq!(settings(&a), settings(&b));
    assert!(settings(&a).contains(&"seed=1".to_string()));
    let bad = mmreg(&["synth", "--out", p(&dir.path().join("c")), "--frames", "0"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("frames"));
    assert!(!mmreg(&["synth", "--out", p(&dir.path().join("d")), "--noise", "0.5"])
        .status
        .success());
}

#[test]
fn full_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (raw, full, ds, model, report) = (
        dir.path().join("raw"),
        dir.path().join("full"),
        dir.path().join("ds"),
        dir.path().join("model"),
        dir.path().join("report"),
    );
    tiny_synth(&raw, "3");
    ok(&["flow", "--input", p(&raw), "--out", p(&full), "--iterations", "20"]);
    let (frames, _) = read_sequence(&full).unwrap();
    assert_eq!(frames.len(), 3);
    for id in [ChannelId::Gr, ChannelId::U, ChannelId::V] {
        assert!(frames.iter().all(|f| f.get(id).is_some()));
    }

    let msg = ok(&["dataset", "--input", p(&full), "--out", p(&ds), "--tau", "0"]);
    // 3 frames x 9 offsets x (2 x 3 windows).
    assert!(msg.starts_with("162 patches"), "{msg}");
    assert_eq!(fs::read_to_string(ds.join("patches.idx")).unwrap().lines().count(), 163);

    ok(&[
        "train",
        "--dataset",
        p(&ds),
        "--out",
        p(&model),
        "--epochs",
        "2",
        "--batch",
        "8",
        "--max-samples",
        "40",
        "--filters",
        "4,4,8",
    ]);
    let losses = fs::read_to_string(model.join("loss.csv")).unwrap();
    assert_eq!(losses.lines().count(), 3);
    assert!(losses.starts_with("epoch,loss\n1,"));
    let resolved = fs::read_to_string(model.join("train_config.txt")).unwrap();
    assert!(resolved.contains("filters=4,4,8") && resolved.contains("max-samples=40"));

    let summary = ok(&[
        "eval",
        "--checkpoint",
        p(&model.join("model.mmrc")),
        "--frames",
        p(&full),
        "--out",
        p(&report),
        "--k",
        "1,2,3",
        "--tau",
        "0",
    ]);
    assert!(summary.contains("patch_mean_diag_accuracy="));
    assert!(summary.contains("patches=162"));
    let temporal = fs::read_to_string(report.join("temporal.csv")).unwrap();
    assert!(temporal.starts_with("k,1,2,3\nmean_diag_accuracy,"));
    for name in [
        "patch_confusion.csv",
        "image_confusion.csv",
        "patch_confusion.ppm",
        "patch_map_f0_c8.ppm",
        "eval_config.txt",
    ] {
        assert!(report.join(name).exists(), "{name}");
    }
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# tiny scene\nframes=3\nseed=7\nwidth=64\nheight=48\nobjects=4\n").unwrap();
    let out = dir.path().join("s");
    ok(&["synth", "--config", p(&cfg), "--out", p(&out), "--frames", "2"]);
    let resolved = fs::read_to_string(out.join("synth_config.txt")).unwrap();
    assert!(resolved.contains("frames=2\n"), "{resolved}");
    assert!(resolved.contains("seed=7\n"));
    assert!(resolved.contains("noise=0.02\n"));
    assert_eq!(read_sequence(&out).unwrap().0.len(), 2);

    // A resolved config replays as a config file.
    let again = dir.path().join("again");
    ok(&[
        "synth",
        "--config",
        p(&out.join("synth_config.txt")),
        "--out",
        p(&again),
    ]);
    assert_eq!(read_sequence(&again).unwrap().0, read_sequence(&out).unwrap().0);

    fs::write(&cfg, "frames=2\nbogus=1\n").unwrap();
    assert!(!mmreg(&["synth", "--config", p(&cfg), "--out", p(&out)])
        .status
        .success());
}

#[test]
fn untrained_checkpoint_and_single_frame_flow() {
    let dir = tempfile::tempdir().unwrap();
    let (raw, full, ds, model) = (
        dir.path().join("raw"),
        dir.path().join("full"),
        dir.path().join("ds"),
        dir.path().join("model"),
    );
    tiny_synth(&raw, "1");
    ok(&["flow", "--input", p(&raw), "--out", p(&full)]);
    let (frames, _) = read_sequence(&full).unwrap();
    for id in [ChannelId::U, ChannelId::V] {
        assert!(frames[0].require(id).unwrap().data().iter().all(|&x| x == 0.5));
    }
    ok(&[
        "dataset",
        "--input",
        p(&full),
        "--out",
        p(&ds),
        "--channels",
        "RGBLUV",
        "--tau",
        "0",
    ]);
    ok(&[
        "train",
        "--dataset",
        p(&ds),
        "--out",
        p(&model),
        "--epochs",
        "0",
        "--channels",
        "RGBL",
    ]);
    assert!(model.join("model.mmrc").exists());
    assert_eq!(fs::read_to_string(model.join("loss.csv")).unwrap(), "epoch,loss\n");
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = mmreg(&[
        "eval",
        "--checkpoint",
        p(&dir.path().join("nope.mmrc")),
        "--frames",
        p(dir.path()),
        "--out",
        p(dir.path()),
    ]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.mmrc"));

    let threads = Command::new(env!("CARGO_BIN_EXE_mmreg"))
        .args([
            "synth",
            "--out",
            p(&dir.path().join("x")),
            "--frames",
            "2",
            "--width",
            "32",
            "--height",
            "32",
        ])
        .env("MMREG_THREADS", "many")
        .output()
        .unwrap();
    assert!(!threads.status.success());
    assert!(!mmreg(&["dataset", "--input", p(dir.path()), "--out", p(dir.path())])
        .status
        .success());
    assert!(!mmreg(&["frobnicate"]).status.success());
}
