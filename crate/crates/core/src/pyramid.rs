//! Temporal scale pyramid: the union of features extracted at frame strides
//! `1..=V+1`.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::media::{temporal_subsample, VideoClip};
use crate::par::{self, Execution};

/// Highest supported pyramid level.
pub const MAX_LEVEL: usize = 5;

/// Counts frames handed to the extractor, across clips and threads.
#[derive(Debug, Default)]
pub struct FrameCounter(AtomicU64);

impl FrameCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, frames: usize) {
        self.0.fetch_add(frames as u64, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Frames processed by a level-`level` pyramid over a clip of `frame_count`
/// frames: `Σ_{v=0..=level} ceil(T / (v+1))`.
pub fn frame_cost(level: usize, frame_count: usize) -> u64 {
    (1..=level + 1).map(|s| frame_count.div_ceil(s) as u64).sum()
}

/// Runs `extractor` on the clip subsampled at every stride `v+1` for
/// `v ≤ level`, tags rows with `v` and concatenates the sets stride-major.
///
/// The extractor sees the subsampled clip, so its temporal positions are
/// relative to that clip's length. The union keeps the original frame count.
pub fn tsp_extract<F>(
    clip: &VideoClip,
    level: usize,
    exec: Execution,
    counter: Option<&FrameCounter>,
    extractor: F,
) -> Result<FeatureSet>
where
    F: Fn(&VideoClip) -> Result<FeatureSet> + Sync,
{
    if level > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!("pyramid level {level} exceeds {MAX_LEVEL}")));
    }
    let parts = par::map_range(exec, level + 1, |v| -> Result<FeatureSet> {
        let sub = temporal_subsample(clip, v + 1)?;
        if let Some(c) = counter {
            c.add(sub.len());
        }
        Ok(extractor(&sub)?.with_stride_tag(v as u32))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    FeatureSet::concat(&parts, clip.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Channel, Location};
    use proptest::prelude::*;

    #[test]
    fn cost_examples() {
        assert_eq!(frame_cost(2, 600), 1100);
        assert_eq!(frame_cost(0, 600), 600);
        assert_eq!(frame_cost(2, 7), 14);
    }

    proptest! {
        #[test]
        fn level_two_costs_at_most_twice(t in 1usize..5000) {
            prop_assert!(frame_cost(2, t) <= 2 * t as u64);
        }
    }

    /// One row per frame, with the frame's first pixel as its value.
    fn toy_extractor(c: &VideoClip) -> Result<FeatureSet> {
        let data = c.frames().iter().map(|f| f[0] as f32).collect();
        let locs = (0..c.len())
            .map(|t| Location {
                x: 0.0,
                y: 0.0,
                t: t as f32 / c.len() as f32,
                frame_index: t as u32,
                stride_tag: 0,
            })
            .collect();
        FeatureSet::new(vec![Channel::new("v", 1, data)?], locs, c.len())
    }

    fn ramp(n: usize) -> VideoClip {
        VideoClip::new(1, 1, (0..n).map(|t| vec![t as u8]).collect(), "ramp").unwrap()
    }

    #[test]
    fn union_is_stride_major_and_counted() {
        let clip = ramp(7);
        let counter = FrameCounter::new();
        let fs = tsp_extract(&clip, 2, Execution::Parallel, Some(&counter), toy_extractor).unwrap();
        assert_eq!(counter.get(), frame_cost(2, 7));
        assert_eq!(fs.channel("v").unwrap().data, vec![0., 1., 2., 3., 4., 5., 6., 0., 2., 4., 6., 0., 3., 6.]);
        let tags: Vec<u32> = fs.locations().iter().map(|l| l.stride_tag).collect();
        assert_eq!(tags, vec![0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2]);
        assert_eq!(fs.clip_frame_count(), 7);
        assert!(fs.locations().iter().all(|l| (0.0..1.0).contains(&l.t)));
    }

    #[test]
    fn level_zero_is_plain_extraction() {
        let clip = ramp(9);
        let fs = tsp_extract(&clip, 0, Execution::Sequential, None, toy_extractor).unwrap();
        assert_eq!(fs.to_bytes().unwrap(), toy_extractor(&clip).unwrap().to_bytes().unwrap());
    }

    #[test]
    fn level_above_five_rejected() {
        assert!(tsp_extract(&ramp(3), 6, Execution::Sequential, None, toy_extractor).is_err());
    }

    proptest! {
        #[test]
        fn levels_are_nested(n in 1usize..40, level in 1usize..=5) {
            let clip = ramp(n);
            let hi = tsp_extract(&clip, level, Execution::Sequential, None, toy_extractor).unwrap();
            let lo = tsp_extract(&clip, level - 1, Execution::Sequential, None, toy_extractor).unwrap();
            let keep: Vec<usize> = (0..hi.rows()).filter(|&i| (hi.locations()[i].stride_tag as usize) < level).collect();
            prop_assert_eq!(hi.select(&keep), lo);
        }
    }
}
