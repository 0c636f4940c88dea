//! Scoring: confusion matrices, mean-diagonal accuracy, patch, image and
//! temporally fused evaluation of a classifier over a frame sequence.

mod report;

pub use report::{
    confusion_from_csv, confusion_to_csv, emit_report, heatmap_ppm, patch_map_ppm, write_ablation_csv, AblationRow,
    PALETTE,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{check_offset, patch_grid, stack_patch, surviving_origins, DatasetParams, Frame, PatchGrid};
use crate::model::{predict_patch, temporal_fuse, vote_frame, FrameVote, Network, VoteHistogram};
use crate::offsets::OffsetTable;
use crate::tensor::Tensor;

/// Square count matrix indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("confusion matrix rows must form a non-empty square"));
        }
        Ok(Self {
            classes: n,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.classes..(truth + 1) * self.classes]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        self.add_count(truth, predicted, 1)
    }

    pub fn add_count(&mut self, truth: usize, predicted: usize, count: u64) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::invalid(format!(
                "pair ({truth}, {predicted}) out of range for {} classes",
                self.classes
            )));
        }
        self.counts[truth * self.classes + predicted] += count;
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::invalid(format!(
                "cannot merge {}-class and {}-class matrices",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of all samples on the diagonal, percent.
    pub fn raw_accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyDataset("confusion matrix has no samples".into()));
        }
        let diag: u64 = (0..self.classes).map(|i| self.get(i, i)).sum();
        Ok(100.0 * diag as f64 / total as f64)
    }

    /// Row-normalized rates, `0` for empty rows.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|i| {
                let row = self.row(i);
                let sum: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if sum == 0 { 0.0 } else { c as f64 / sum as f64 })
                    .collect()
            })
            .collect()
    }

    /// Mean of per-class recall, percent. Classes without samples are left
    /// out of the mean.
    pub fn mean_diagonal_accuracy(&self) -> Result<f64> {
        let mut sum = 0.0;
        let mut used = 0usize;
        for i in 0..self.classes {
            let total: u64 = self.row(i).iter().sum();
            if total == 0 {
                log::warn!("class {i} has no samples; excluded from mean-diagonal accuracy");
                continue;
            }
            sum += self.get(i, i) as f64 / total as f64;
            used += 1;
        }
        if used == 0 {
            return Err(Error::EmptyDataset("confusion matrix has no samples".into()));
        }
        Ok(100.0 * sum / used as f64)
    }
}

/// Anything that maps a `p×p×C` patch to a class id.
pub trait PatchClassifier: Sync {
    fn classes(&self) -> usize;
    fn classify(&self, patch: &Tensor<f32>) -> Result<usize>;
}

impl PatchClassifier for Network<f32> {
    fn classes(&self) -> usize {
        self.config().classes
    }

    fn classify(&self, patch: &Tensor<f32>) -> Result<usize> {
        Ok(predict_patch(self, patch)?.0)
    }
}

/// Predictions for one frame under one offset class.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame_index: usize,
    pub truth: usize,
    pub origins: Vec<(usize, usize)>,
    pub predictions: Vec<usize>,
    pub vote: FrameVote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalResult {
    pub k: usize,
    pub confusion: ConfusionMatrix,
    /// Windows whose fused histogram was empty.
    pub undecided: usize,
}

impl TemporalResult {
    pub fn accuracy(&self) -> Result<f64> {
        self.confusion.mean_diagonal_accuracy()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub frames: usize,
    pub grid: PatchGrid,
    pub patch: ConfusionMatrix,
    pub image: ConfusionMatrix,
    /// Frame/class pairs with no surviving patch.
    pub undecided: usize,
    pub temporal: Vec<TemporalResult>,
    /// Ordered by frame, then class.
    pub results: Vec<FrameResult>,
}

impl EvalReport {
    pub fn result(&self, frame_index: usize, truth: usize) -> Option<&FrameResult> {
        self.results
            .iter()
            .find(|r| r.frame_index == frame_index && r.truth == truth)
    }
}

/// Shifts every frame by every offset class, classifies the surviving
/// patches and scores patch, image and fused decisions.
///
/// Temporal fusion with window `k` slides over all runs of `k` consecutive
/// frames for every class.
pub fn evaluate_run<C: PatchClassifier + ?Sized>(
    classifier: &C,
    frames: &[Frame],
    offsets: &OffsetTable,
    params: &DatasetParams,
    k_values: &[usize],
) -> Result<EvalReport> {
    let first = frames
        .first()
        .ok_or_else(|| Error::EmptyDataset("evaluation needs at least one frame".into()))?;
    let classes = offsets.len();
    if classifier.classes() != classes {
        return Err(Error::invalid(format!(
            "classifier has {} classes but the offset table has {classes}",
            classifier.classes()
        )));
    }
    if let Some(&k) = k_values.iter().find(|&&k| k == 0 || k > frames.len()) {
        return Err(Error::invalid(format!(
            "fusion window {k} must be between 1 and the frame count {}",
            frames.len()
        )));
    }
    let grid = patch_grid(first.width(), first.height(), params.patch_size, params.stride)?;
    for f in frames {
        if (f.width(), f.height()) != (first.width(), first.height()) {
            return Err(Error::invalid(format!(
                "frames differ in size: {}x{} vs {}x{}",
                f.width(),
                f.height(),
                first.width(),
                first.height()
            )));
        }
        for off in offsets.classes() {
            check_offset(f, off)?;
        }
    }

    let jobs: Vec<(usize, usize)> = (0..frames.len())
        .flat_map(|f| (0..classes).map(move |c| (f, c)))
        .collect();
    let results: Vec<FrameResult> = jobs
        .par_iter()
        .map(|&(fi, ci)| {
            let frame = &frames[fi];
            let off = &offsets.classes()[ci];
            let origins = surviving_origins(frame, off, params)?;
            let predictions = origins
                .iter()
                .map(|&o| {
                    let patch = stack_patch(
                        frame,
                        &params.channels,
                        o,
                        params.patch_size,
                        Some((off.dx, off.dy, params.fill)),
                    )?;
                    classifier.classify(&patch)
                })
                .collect::<Result<Vec<_>>>()?;
            let vote = vote_frame(&predictions, classes)?;
            Ok(FrameResult {
                frame_index: fi,
                truth: ci,
                origins,
                predictions,
                vote,
            })
        })
        .collect::<Result<_>>()?;

    let mut patch = ConfusionMatrix::new(classes);
    let mut image = ConfusionMatrix::new(classes);
    let mut undecided = 0;
    for r in &results {
        for &p in &r.predictions {
            patch.add(r.truth, p)?;
        }
        match r.vote.class {
            Some(c) => image.add(r.truth, c)?,
            None => undecided += 1,
        }
    }

    let temporal = k_values
        .iter()
        .map(|&k| {
            let mut confusion = ConfusionMatrix::new(classes);
            let mut undecided = 0;
            for c in 0..classes {
                for start in 0..=frames.len() - k {
                    let hists: Vec<VoteHistogram> = (start..start + k)
                        .map(|f| results[f * classes + c].vote.histogram.clone())
                        .collect();
                    match temporal_fuse(&hists)? {
                        Some(p) => confusion.add(c, p)?,
                        None => undecided += 1,
                    }
                }
            }
            Ok(TemporalResult {
                k,
                confusion,
                undecided,
            })
        })
        .collect::<Result<_>>()?;

    Ok(EvalReport {
        frames: frames.len(),
        grid,
        patch,
        image,
        undecided,
        temporal,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scores_full_marks() {
        let mut cm = ConfusionMatrix::new(9);
        for i in 0..9 {
            cm.add_count(i, i, 7).unwrap();
        }
        assert_eq!(cm.mean_diagonal_accuracy().unwrap(), 100.0);
        assert_eq!(cm.raw_accuracy().unwrap(), 100.0);
    }

    #[test]
    fn uniform_scores_one_ninth() {
        let cm = ConfusionMatrix::from_rows(vec![vec![5; 9]; 9]).unwrap();
        assert!((cm.mean_diagonal_accuracy().unwrap() - 100.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn mean_diagonal_weights_classes_equally() {
        // Class 0 has 90 correct of 100; class 1 has 0 of 10.
        let cm = ConfusionMatrix::from_rows(vec![vec![90, 10], vec![10, 0]]).unwrap();
        assert!((cm.mean_diagonal_accuracy().unwrap() - 45.0).abs() < 1e-12);
        assert!((cm.raw_accuracy().unwrap() - 900.0 / 11.0).abs() < 1e-9);
    }

    #[test]
    fn empty_rows_are_skipped() {
        let cm = ConfusionMatrix::from_rows(vec![vec![3, 1, 0], vec![0, 0, 0], vec![0, 0, 2]]).unwrap();
        assert!((cm.mean_diagonal_accuracy().unwrap() - 87.5).abs() < 1e-12);
        assert!(ConfusionMatrix::new(3).mean_diagonal_accuracy().is_err());
    }

    #[test]
    fn rejects_out_of_range_and_mismatched_merges() {
        let mut cm = ConfusionMatrix::new(3);
        assert!(cm.add(3, 0).is_err());
        assert!(cm.merge(&ConfusionMatrix::new(4)).is_err());
        assert!(ConfusionMatrix::from_rows(vec![vec![1, 2]]).is_err());
    }
}
