//! Patch-vote aggregation per frame and across consecutive frames.

use crate::error::{Error, Result};

use super::network::argmax;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteHistogram {
    counts: Vec<usize>,
}

impl VoteHistogram {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![0; classes],
        }
    }

    pub fn from_counts(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn add(&mut self, class: usize) -> Result<()> {
        let n = self.counts.len();
        let slot = self
            .counts
            .get_mut(class)
            .ok_or_else(|| Error::invalid(format!("class {class} out of range for {n} classes")))?;
        *slot += 1;
        Ok(())
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Most voted class, lowest id on ties; `None` without votes.
    pub fn winner(&self) -> Option<usize> {
        (self.total() > 0).then(|| argmax(&self.counts))
    }
}

/// Outcome of voting one frame. `class` is `None` when no patch survived
/// the variance filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameVote {
    pub class: Option<usize>,
    pub histogram: VoteHistogram,
}

pub fn vote_frame(predictions: &[usize], classes: usize) -> Result<FrameVote> {
    let mut histogram = VoteHistogram::new(classes);
    for &p in predictions {
        histogram.add(p)?;
    }
    Ok(FrameVote {
        class: histogram.winner(),
        histogram,
    })
}

/// Sums the histograms of consecutive frames and takes the argmax.
pub fn temporal_fuse(histograms: &[VoteHistogram]) -> Result<Option<usize>> {
    let first = histograms
        .first()
        .ok_or_else(|| Error::invalid("temporal fusion needs at least one frame"))?;
    let mut sum = VoteHistogram::new(first.classes());
    for h in histograms {
        if h.classes() != sum.classes() {
            return Err(Error::invalid(format!(
                "histograms disagree on class count: {} vs {}",
                h.classes(),
                sum.classes()
            )));
        }
        for (s, &c) in sum.counts.iter_mut().zip(&h.counts) {
            *s += c;
        }
    }
    Ok(sum.winner())
}
