//! Scoring a sequence with reference classifiers whose answers are known.

use mmreg::eval::{confusion_from_csv, emit_report, evaluate_run, PatchClassifier};
use mmreg::frame::{ChannelId, DatasetParams, Frame, Plane};
use mmreg::offsets::{EllipseSpec, OffsetTable};
use mmreg::{Result, Tensor};

/// Recovers the depth shift of a `Gr,L` patch whose unshifted depth equals
/// its grayscale: the right offset reproduces Gr exactly wherever both
/// windows overlap.
struct ShiftMatch {
    offsets: OffsetTable,
}

impl PatchClassifier for ShiftMatch {
    fn classes(&self) -> usize {
        self.offsets.len()
    }

    fn classify(&self, patch: &Tensor<f32>) -> Result<usize> {
        let p = patch.shape()[0] as i32;
        let at = |r: i32, c: i32, ch: usize| patch.data()[((r * p + c) * 2) as usize + ch];
        let mut best = (f64::INFINITY, 0);
        for off in self.offsets.classes() {
            let (mut sse, mut n) = (0.0, 0);
            for r in 0..p {
                for c in 0..p {
                    let (sr, sc) = (r - off.dy, c - off.dx);
                    if (0..p).contains(&sr) && (0..p).contains(&sc) {
                        sse += ((at(r, c, 1) - at(sr, sc, 0)) as f64).powi(2);
                        n += 1;
                    }
                }
            }
            let score = sse / n as f64;
            if score < best.0 {
                best = (score, off.id);
            }
        }
        Ok(best.1)
    }
}

struct Constant(usize);

impl PatchClassifier for Constant {
    fn classes(&self) -> usize {
        9
    }

    fn classify(&self, _: &Tensor<f32>) -> Result<usize> {
        Ok(self.0)
    }
}

fn textured_frame(w: usize, h: usize, seed: usize) -> Frame {
    let data: Vec<f32> = (0..w * h)
        .map(|i| {
            let (r, c) = ((i / w) as f32, (i % w) as f32);
            let s = seed as f32;
            (0.5 + 0.25 * (0.37 * c + s).sin() * (0.23 * r).cos()
                + 0.25 * (0.11 * (r + c) + 0.05 * r * r / h as f32 + s).sin())
            .clamp(0.0, 1.0)
        })
        .collect();
    let plane = Plane::new(w, h, data).unwrap();
    Frame::new(w, h)
        .with(ChannelId::Gr, plane.clone())
        .unwrap()
        .with(ChannelId::L, plane)
        .unwrap()
}

fn flat_frame(w: usize, h: usize) -> Frame {
    Frame::new(w, h)
        .with(ChannelId::Gr, Plane::filled(w, h, 0.3))
        .unwrap()
        .with(ChannelId::L, Plane::filled(w, h, 0.3))
        .unwrap()
}

fn setup() -> (OffsetTable, DatasetParams) {
    let offsets = OffsetTable::from_ellipse(&EllipseSpec::default()).unwrap();
    let params = DatasetParams {
        tau: 0.0,
        ..DatasetParams::new("Gr,L".parse().unwrap())
    };
    (offsets, params)
}

#[test]
fn exact_classifier_scores_perfectly_at_every_level() {
    let (offsets, params) = setup();
    let frames: Vec<Frame> = (0..3).map(|s| textured_frame(128, 64, s)).collect();
    let clf = ShiftMatch {
        offsets: offsets.clone(),
    };
    let report = evaluate_run(&clf, &frames, &offsets, &params, &[1, 2, 3]).unwrap();
    // 3 frames x 9 classes x (2 x 4 windows).
    assert_eq!(report.patch.total(), 216);
    assert_eq!(report.patch.mean_diagonal_accuracy().unwrap(), 100.0);
    assert_eq!(report.image.mean_diagonal_accuracy().unwrap(), 100.0);
    assert_eq!(report.undecided, 0);
    for (t, windows) in report.temporal.iter().zip([3, 2, 1]) {
        assert_eq!(t.confusion.total(), 9 * windows);
        assert_eq!(t.accuracy().unwrap(), 100.0);
    }
}

#[test]
fn constant_classifier_scores_chance() {
    let (offsets, params) = setup();
    let frames: Vec<Frame> = (0..2).map(|s| textured_frame(96, 64, s)).collect();
    let report = evaluate_run(&Constant(4), &frames, &offsets, &params, &[1, 2]).unwrap();
    assert!((report.patch.mean_diagonal_accuracy().unwrap() - 100.0 / 9.0).abs() < 1e-9);
    assert!((report.image.mean_diagonal_accuracy().unwrap() - 100.0 / 9.0).abs() < 1e-9);
    assert_eq!(report.image.row(0)[4], 2);
}

#[test]
fn image_decision_is_histogram_argmax() {
    let (offsets, params) = setup();
    let frames: Vec<Frame> = (0..2).map(|s| textured_frame(160, 96, s + 5)).collect();
    let report = evaluate_run(&Constant(2), &frames, &offsets, &params, &[1]).unwrap();
    for r in &report.results {
        let mut counts = vec![0usize; 9];
        for &p in &r.predictions {
            counts[p] += 1;
        }
        assert_eq!(r.vote.histogram.counts(), counts.as_slice());
        let best = (0..9).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap();
        assert_eq!(r.vote.class, Some(best));
        assert!(report.image.get(r.truth, best) > 0);
    }
}

#[test]
fn frames_without_patches_are_undecided() {
    let (offsets, _) = setup();
    let params = DatasetParams::new("Gr,L".parse().unwrap());
    let frames = vec![textured_frame(96, 64, 1), flat_frame(96, 64), textured_frame(96, 64, 2)];
    let clf = ShiftMatch {
        offsets: offsets.clone(),
    };
    let report = evaluate_run(&clf, &frames, &offsets, &params, &[1, 3]).unwrap();
    let flat: Vec<_> = report.results.iter().filter(|r| r.frame_index == 1).collect();
    assert!(flat.iter().all(|r| r.predictions.is_empty() && r.vote.class.is_none()));
    assert!(report.undecided >= 9);
    assert_eq!(report.image.total() as usize + report.undecided, 27);
    // The k=1 window over the flat frame is undecided; k=3 fuses it away.
    assert!(report.temporal[0].undecided >= 9);
    assert_eq!(report.temporal[1].undecided, 0);

    let dead = evaluate_run(&clf, &[flat_frame(64, 64)], &offsets, &params, &[1]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_report(&dead, dir.path()).is_err());
}

#[test]
fn rejects_bad_requests() {
    let (offsets, params) = setup();
    let frames = vec![textured_frame(96, 64, 0)];
    let clf = ShiftMatch {
        offsets: offsets.clone(),
    };
    assert!(evaluate_run(&clf, &frames, &offsets, &params, &[0]).is_err());
    assert!(evaluate_run(&clf, &frames, &offsets, &params, &[2]).is_err());
    assert!(evaluate_run(&clf, &[], &offsets, &params, &[1]).is_err());
    let three = OffsetTable::from_ellipse(&EllipseSpec {
        n_classes: 3,
        ..EllipseSpec::default()
    })
    .unwrap();
    assert!(evaluate_run(&clf, &frames, &three, &params, &[1]).is_err());
}

#[test]
fn report_files_are_written_and_readable() {
    let (offsets, params) = setup();
    let frames: Vec<Frame> = (0..2).map(|s| textured_frame(96, 64, s)).collect();
    let clf = ShiftMatch {
        offsets: offsets.clone(),
    };
    let report = evaluate_run(&clf, &frames, &offsets, &params, &[1, 2]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let summary = emit_report(&report, &out).unwrap();
    assert_eq!(summary.get("patch_mean_diag_accuracy"), Some("100.0000"));
    let cm = confusion_from_csv(&std::fs::read_to_string(out.join("patch_confusion.csv")).unwrap()).unwrap();
    assert_eq!(cm, report.patch);
    let map = std::fs::read(out.join("patch_map_f0_c0.ppm")).unwrap();
    // 3 x 2 grid of 8-pixel cells.
    assert!(map.starts_with(b"P6\n24 16\n255\n"));
    assert_eq!(
        std::fs::read_to_string(out.join("temporal.csv")).unwrap(),
        "k,1,2\nmean_diag_accuracy,100.00,100.00\nundecided,0,0\n"
    );

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    assert!(emit_report(&report, blocker.join("sub")).is_err());
}
