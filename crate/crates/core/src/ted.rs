//! Temporal extension descriptor: one normalized-time column per channel.

use crate::error::{Error, Result};
use crate::features::{Channel, FeatureSet};

/// Appends each row's `t` to every channel. Applying it twice is an error.
pub fn ted_augment(features: &FeatureSet) -> Result<FeatureSet> {
    if features.ted_applied() {
        return Err(Error::TedAlreadyApplied);
    }
    let locs = features.locations();
    let channels = features
        .channels()
        .iter()
        .map(|c| {
            let mut data = Vec::with_capacity(c.data.len() + locs.len());
            for (i, l) in locs.iter().enumerate() {
                data.extend_from_slice(c.row(i));
                data.push(l.t);
            }
            Channel::new(c.name.clone(), c.dim + 1, data)
        })
        .collect::<Result<_>>()?;
    Ok(FeatureSet::new(channels, locs.to_vec(), features.clip_frame_count())?.with_ted_flag(true))
}
