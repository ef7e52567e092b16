//! Row-aligned multi-channel feature matrices and their binary file format.

use std::path::Path;

use crate::binio::{self, put_f32, put_len, put_name, put_u32, Reader};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"TFEA";
const FEATURE_VERSION: u32 = 1;

/// Channel names in their canonical order.
pub const CHANNELS: [&str; 4] = ["traj", "hog", "hof", "mbh"];

/// A named row-major matrix of `rows × dim` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Channel {
    pub fn new(name: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "channel {name}: {} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        Ok(Channel { name, dim, data })
    }

    pub fn empty(name: impl Into<String>, dim: usize) -> Self {
        Channel {
            name: name.into(),
            dim,
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Where a feature sits in its clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub x: f32,
    pub y: f32,
    pub t: f32,
    pub frame_index: u32,
    /// Pyramid level (`stride - 1`) the feature was extracted at.
    pub stride_tag: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    channels: Vec<Channel>,
    locations: Vec<Location>,
    clip_frame_count: usize,
    ted_applied: bool,
}

impl FeatureSet {
    pub fn new(channels: Vec<Channel>, locations: Vec<Location>, clip_frame_count: usize) -> Result<Self> {
        let set = FeatureSet {
            channels,
            locations,
            clip_frame_count,
            ted_applied: false,
        };
        set.check()?;
        Ok(set)
    }

    fn check(&self) -> Result<()> {
        let n = self.locations.len();
        for c in &self.channels {
            if c.dim == 0 || c.data.len() != n * c.dim {
                return Err(Error::InvalidArgument(format!(
                    "channel {} has {} values, expected {n} rows of dimension {}",
                    c.name,
                    c.data.len(),
                    c.dim
                )));
            }
        }
        for (i, c) in self.channels.iter().enumerate() {
            if self.channels[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidArgument(format!("duplicate channel {}", c.name)));
            }
        }
        Ok(())
    }

    pub(crate) fn with_ted_flag(mut self, ted_applied: bool) -> Self {
        self.ted_applied = ted_applied;
        self
    }

    /// Marks every row as extracted at pyramid level `tag`.
    pub fn with_stride_tag(mut self, tag: u32) -> Self {
        self.locations.iter_mut().for_each(|l| l.stride_tag = tag);
        self
    }

    pub fn rows(&self) -> usize {
        self.locations.len()
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn clip_frame_count(&self) -> usize {
        self.clip_frame_count
    }

    pub fn ted_applied(&self) -> bool {
        self.ted_applied
    }

    /// Channel names and dimensions, in order.
    pub fn schema(&self) -> Vec<(String, usize)> {
        self.channels.iter().map(|c| (c.name.clone(), c.dim)).collect()
    }

    /// A set with the given schema and no rows.
    pub fn empty(schema: &[(String, usize)], clip_frame_count: usize) -> Self {
        FeatureSet {
            channels: schema.iter().map(|(n, d)| Channel::empty(n.clone(), *d)).collect(),
            locations: Vec::new(),
            clip_frame_count,
            ted_applied: false,
        }
    }

    /// The subset of rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureSet {
        let channels = self
            .channels
            .iter()
            .map(|c| Channel {
                name: c.name.clone(),
                dim: c.dim,
                data: indices.iter().flat_map(|&i| c.row(i).iter().copied()).collect(),
            })
            .collect();
        FeatureSet {
            channels,
            locations: indices.iter().map(|&i| self.locations[i]).collect(),
            clip_frame_count: self.clip_frame_count,
            ted_applied: self.ted_applied,
        }
    }

    /// Stacks the rows of `parts` in order. All parts must share one schema.
    pub fn concat(parts: &[FeatureSet], clip_frame_count: usize) -> Result<FeatureSet> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let schema = first.schema();
        let mut out = FeatureSet::empty(&schema, clip_frame_count).with_ted_flag(first.ted_applied);
        for p in parts {
            if p.schema() != schema || p.ted_applied != first.ted_applied {
                return Err(Error::InvalidArgument("feature sets have different channel layouts".into()));
            }
            for (o, c) in out.channels.iter_mut().zip(&p.channels) {
                o.data.extend_from_slice(&c.data);
            }
            out.locations.extend_from_slice(&p.locations);
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(FEATURE_MAGIC);
        put_u32(&mut out, FEATURE_VERSION);
        out.push(u8::from(self.ted_applied));
        put_len(&mut out, self.clip_frame_count)?;
        put_len(&mut out, self.rows())?;
        put_len(&mut out, self.channels.len())?;
        for c in &self.channels {
            put_name(&mut out, &c.name);
            put_len(&mut out, c.dim)?;
            for &v in &c.data {
                put_f32(&mut out, v);
            }
        }
        for l in &self.locations {
            put_f32(&mut out, l.x);
            put_f32(&mut out, l.y);
            put_f32(&mut out, l.t);
            put_u32(&mut out, l.frame_index);
            put_u32(&mut out, l.stride_tag);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<FeatureSet> {
        let mut r = Reader::new(bytes, "feature set", origin);
        r.magic(FEATURE_MAGIC)?;
        let version = r.u32()?;
        if version != FEATURE_VERSION {
            return Err(r.fail(format!("unsupported version {version}")));
        }
        let ted_applied = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(r.fail(format!("bad flag byte {b}"))),
        };
        let clip_frame_count = r.len()?;
        let n_rows = r.len()?;
        let n_channels = r.len()?;
        let mut channels = Vec::new();
        for _ in 0..n_channels {
            let name = r.name()?;
            let dim = r.len()?;
            if dim == 0 {
                return Err(r.fail(format!("channel {name} has dimension 0")));
            }
            let data = r.f32_vec(n_rows.saturating_mul(dim))?;
            channels.push(Channel { name, dim, data });
        }
        if r.remaining() < n_rows.saturating_mul(20) {
            return Err(r.fail("location table truncated"));
        }
        let mut locations = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            locations.push(Location {
                x: r.f32()?,
                y: r.f32()?,
                t: r.f32()?,
                frame_index: r.u32()?,
                stride_tag: r.u32()?,
            });
        }
        r.finish()?;
        let set = FeatureSet {
            channels,
            locations,
            clip_frame_count,
            ted_applied,
        };
        set.check().map_err(|e| r.fail(e.to_string()))?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<FeatureSet> {
        let bytes = binio::read_file(path)?;
        FeatureSet::from_bytes(&bytes, &path.display().to_string())
    }
}
