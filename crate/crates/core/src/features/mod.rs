//! Dense-trajectory local features.
//!
//! Points are seeded on a grid, tracked for `track_length` frames through a
//! block-matching flow field and described by four channels: trajectory
//! shape, HOG, HOF and MBH. Channels are reduced to half dimension by PCA and
//! augmented with the trajectory's normalized spatial position.

mod descriptor;
mod feature_set;
mod flow;
mod pca;
mod plane;
mod track;

pub use descriptor::{root_sift, DescriptorParams};
pub use feature_set::{Channel, FeatureSet, Location, CHANNELS, FEATURE_MAGIC};
pub use flow::{block_match_flow, FlowField, FlowParams};
pub use pca::{fit_pca, fit_pca_channel, PcaChannel, PcaModel, PCA_MAGIC};
pub use plane::Plane;
pub use track::{compute_descriptors, ClipMotion};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::VideoClip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractParams {
    pub sample_step: usize,
    pub track_length: usize,
    /// Tracks whose summed displacement is below this (pixels) are static.
    pub prune_threshold: f64,
    /// Largest single-step displacement (pixels) before a track is dropped.
    pub drift_cap: f64,
    /// Seeds need a structure-tensor eigenvalue above this fraction of the
    /// frame's strongest one.
    pub min_quality: f64,
    /// Absolute floor on the seed eigenvalue, so flat frames seed nothing.
    pub min_corner: f64,
    pub flow: FlowParams,
    pub descriptor: DescriptorParams,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            sample_step: 4,
            track_length: 15,
            prune_threshold: 1.0,
            drift_cap: 8.0,
            min_quality: 0.001,
            min_corner: 1e-3,
            flow: FlowParams::default(),
            descriptor: DescriptorParams::default(),
        }
    }
}

impl ExtractParams {
    pub fn validate(&self) -> Result<()> {
        if self.sample_step == 0 || self.track_length == 0 {
            return Err(Error::Config("sample_step and track_length must be positive".into()));
        }
        let d = &self.descriptor;
        if d.cells_xy == 0 || d.cells_t == 0 || d.bins == 0 || d.patch_size < d.cells_xy {
            return Err(Error::Config("descriptor grid must be non-empty".into()));
        }
        if d.cells_t > self.track_length {
            return Err(Error::Config("more temporal cells than tracked frames".into()));
        }
        Ok(())
    }

    /// Raw (pre-PCA) dimensions per channel, in canonical order.
    pub fn raw_dims(&self) -> [usize; 4] {
        let d = &self.descriptor;
        [2 * self.track_length, d.hog_dim(), d.hof_dim(), d.mbh_dim()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedTrajectory {
    pub start_frame: usize,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDescriptorBundle {
    pub traj: Vec<f64>,
    pub hog: Vec<f64>,
    pub hof: Vec<f64>,
    pub mbh: Vec<f64>,
    pub x_norm: f64,
    pub y_norm: f64,
    pub t_norm: f64,
    pub frame_index: usize,
}

/// Tracks dense points through `clip`. Clips shorter than
/// `track_length + 1` frames give no trajectories.
pub fn extract_trajectories(clip: &VideoClip, params: &ExtractParams) -> Result<Vec<TrackedTrajectory>> {
    params.validate()?;
    Ok(track::run_tracker(clip, params, false)?.into_iter().map(|(t, _)| t).collect())
}

/// Trajectories with their descriptors, computed in one streaming pass.
pub fn extract_descriptors(clip: &VideoClip, params: &ExtractParams) -> Result<Vec<(TrackedTrajectory, RawDescriptorBundle)>> {
    params.validate()?;
    track::run_tracker(clip, params, true)?
        .into_iter()
        .map(|(t, b)| b.map(|b| (t, b)).ok_or_else(|| Error::Internal("descriptor missing".into())))
        .collect()
}

/// Raw descriptor channels of `clip` with their locations, before PCA.
pub fn extract_raw_features(clip: &VideoClip, params: &ExtractParams) -> Result<FeatureSet> {
    let bundles = extract_descriptors(clip, params)?;
    let dims = params.raw_dims();
    let mut data: [Vec<f32>; 4] = Default::default();
    let mut locations = Vec::with_capacity(bundles.len());
    for (_, b) in &bundles {
        for (buf, src) in data.iter_mut().zip([&b.traj, &b.hog, &b.hof, &b.mbh]) {
            buf.extend(src.iter().map(|&v| v as f32));
        }
        locations.push(Location {
            x: b.x_norm as f32,
            y: b.y_norm as f32,
            t: b.t_norm as f32,
            frame_index: b.frame_index as u32,
            stride_tag: 0,
        });
    }
    let channels = CHANNELS
        .iter()
        .zip(dims)
        .zip(data)
        .map(|((name, dim), d)| Channel::new(*name, dim, d))
        .collect::<Result<_>>()?;
    FeatureSet::new(channels, locations, clip.len())
}

/// Projects every channel with `pca` and appends `(x, y)` to each row.
pub fn project_features(raw: &FeatureSet, pca: &PcaModel) -> Result<FeatureSet> {
    if raw.ted_applied() {
        return Err(Error::InvalidArgument("cannot project a feature set with the time column".into()));
    }
    let mut channels = Vec::with_capacity(raw.channels().len());
    for c in raw.channels() {
        let model = pca.channel(&c.name).ok_or_else(|| Error::MissingChannel(c.name.clone()))?;
        if model.in_dim != c.dim {
            return Err(Error::Dim {
                expected: model.in_dim,
                got: c.dim,
            });
        }
        let dim = model.out_dim + 2;
        let mut data = Vec::with_capacity(raw.rows() * dim);
        for (i, loc) in raw.locations().iter().enumerate() {
            model.project_row(c.row(i), &mut data);
            data.push(loc.x);
            data.push(loc.y);
        }
        channels.push(Channel::new(c.name.clone(), dim, data)?);
    }
    FeatureSet::new(channels, raw.locations().to_vec(), raw.clip_frame_count())
}

/// Extraction, PCA and spatial augmentation for one clip.
pub fn build_feature_set(clip: &VideoClip, pca: &PcaModel, params: &ExtractParams) -> Result<FeatureSet> {
    project_features(&extract_raw_features(clip, params)?, pca)
}
