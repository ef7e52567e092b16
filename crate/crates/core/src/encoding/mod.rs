//! Mixture codebooks, Fisher vector encoding and the encoding container.

mod fisher;
mod gmm;

pub use fisher::{fisher_encode, normalize};
pub use gmm::{fit_gmm, GmmChannel, GmmFit, GmmParams, VARIANCE_FLOOR_RATIO, WEIGHT_FLOOR};

use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{self, put_f32, put_len, put_name, Reader};
use crate::error::{Error, Result};
use crate::features::{Channel, FeatureSet};
use crate::par::Execution;

pub const CODEBOOK_MAGIC: &[u8; 4] = b"TGMM";
pub const ENCODING_MAGIC: &[u8; 4] = b"TENC";

/// Per-channel mixtures, in encoding order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GmmCodebook {
    pub channels: Vec<GmmChannel>,
}

impl GmmCodebook {
    pub fn channel(&self, name: &str) -> Option<&GmmChannel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// Length of one whole-clip encoding.
    pub fn encoding_dim(&self) -> usize {
        self.channels.iter().map(|c| 2 * c.k * c.dim).sum()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CODEBOOK_MAGIC);
        put_len(&mut out, self.channels.len())?;
        for c in &self.channels {
            put_name(&mut out, &c.name);
            put_len(&mut out, c.k)?;
            put_len(&mut out, c.dim)?;
            for &v in c.weights.iter().chain(&c.means).chain(&c.variances) {
                put_f32(&mut out, v as f32);
            }
        }
        Ok(out)
    }

    /// Parses a codebook. Weights are renormalized after widening to f64.
    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<GmmCodebook> {
        let mut r = Reader::new(bytes, "codebook", origin);
        r.magic(CODEBOOK_MAGIC)?;
        let n = r.len()?;
        let mut channels = Vec::new();
        for _ in 0..n {
            let name = r.name()?;
            let k = r.len()?;
            let dim = r.len()?;
            let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
            let mut weights = widen(r.f32_vec(k)?);
            let means = widen(r.f32_vec(k.saturating_mul(dim))?);
            let variances = widen(r.f32_vec(k.saturating_mul(dim))?);
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= s);
            let ch = GmmChannel {
                name,
                k,
                dim,
                weights,
                means,
                variances,
            };
            ch.validate().map_err(|e| r.fail(e.to_string()))?;
            channels.push(ch);
        }
        r.finish()?;
        Ok(GmmCodebook { channels })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<GmmCodebook> {
        let bytes = binio::read_file(path)?;
        GmmCodebook::from_bytes(&bytes, &path.display().to_string())
    }
}

/// Rows drawn from a collection of feature sets for codebook fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSample {
    pub channels: Vec<Channel>,
    pub with_replacement: bool,
}

/// Draws `n` rows uniformly across all `sets`: without replacement when
/// enough rows exist, otherwise with replacement (and a warning).
pub fn sample_descriptors(sets: &[FeatureSet], n: usize, seed: u64) -> Result<DescriptorSample> {
    let first = sets
        .first()
        .ok_or_else(|| Error::InvalidArgument("no feature sets to sample from".into()))?;
    let schema = first.schema();
    if sets.iter().any(|s| s.schema() != schema) {
        return Err(Error::InvalidArgument("feature sets have different channel layouts".into()));
    }
    let offsets: Vec<usize> = sets
        .iter()
        .scan(0usize, |acc, s| {
            let start = *acc;
            *acc += s.rows();
            Some(start)
        })
        .collect();
    let total: usize = sets.iter().map(FeatureSet::rows).sum();
    if total == 0 {
        return Err(Error::InsufficientSamples {
            channel: schema.first().map(|s| s.0.clone()).unwrap_or_default(),
            detail: "feature sets contain no rows".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_replacement = n > total;
    let picks: Vec<usize> = if with_replacement {
        log::warn!("sampling {n} rows with replacement from {total} available");
        (0..n).map(|_| rng.random_range(0..total)).collect()
    } else {
        index::sample(&mut rng, total, n).into_vec()
    };
    let mut channels: Vec<Channel> = schema
        .iter()
        .map(|(name, dim)| Channel::new(name.clone(), *dim, Vec::with_capacity(n * dim)))
        .collect::<Result<_>>()?;
    for g in picks {
        let s = offsets.partition_point(|&o| o <= g) - 1;
        let row = g - offsets[s];
        for (out, src) in channels.iter_mut().zip(sets[s].channels()) {
            out.data.extend_from_slice(src.row(row));
        }
    }
    Ok(DescriptorSample {
        channels,
        with_replacement,
    })
}

/// One contiguous block of an [`Encoding`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutEntry {
    pub channel: String,
    /// Number of temporal regions at this block's pyramid level.
    pub level: u32,
    pub region: u32,
    pub offset: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub vector: Vec<f32>,
    pub layout: Vec<LayoutEntry>,
}

impl Encoding {
    pub fn len(&self) -> usize {
        self.vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vector.is_empty()
    }

    pub fn block(&self, entry: &LayoutEntry) -> &[f32] {
        &self.vector[entry.offset..entry.offset + entry.length]
    }

    /// Appends `other`, shifting its layout offsets.
    pub fn extend(&mut self, other: Encoding) {
        let base = self.vector.len();
        self.layout.extend(other.layout.into_iter().map(|mut e| {
            e.offset += base;
            e
        }));
        self.vector.extend(other.vector);
    }

    /// Sets the pyramid level and region of every block.
    pub fn with_region(mut self, level: u32, region: u32) -> Self {
        for e in &mut self.layout {
            e.level = level;
            e.region = region;
        }
        self
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(ENCODING_MAGIC);
        put_len(&mut out, self.layout.len())?;
        for e in &self.layout {
            put_name(&mut out, &e.channel);
            binio::put_u32(&mut out, e.level);
            binio::put_u32(&mut out, e.region);
            put_len(&mut out, e.offset)?;
            put_len(&mut out, e.length)?;
        }
        put_len(&mut out, self.vector.len())?;
        for &v in &self.vector {
            put_f32(&mut out, v);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Encoding> {
        let mut r = Reader::new(bytes, "encoding", origin);
        r.magic(ENCODING_MAGIC)?;
        let n = r.len()?;
        let mut layout = Vec::new();
        for _ in 0..n {
            layout.push(LayoutEntry {
                channel: r.name()?,
                level: r.u32()?,
                region: r.u32()?,
                offset: r.len()?,
                length: r.len()?,
            });
        }
        let len = r.len()?;
        let vector = r.f32_vec(len)?;
        r.finish()?;
        let mut next = 0;
        for e in &layout {
            if e.offset != next {
                return Err(r.fail(format!("block {} does not follow the previous one", e.channel)));
            }
            next += e.length;
        }
        if next != len {
            return Err(r.fail(format!("layout covers {next} values, payload has {len}")));
        }
        Ok(Encoding { vector, layout })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Encoding> {
        let bytes = binio::read_file(path)?;
        Encoding::from_bytes(&bytes, &path.display().to_string())
    }
}

/// Concatenates named per-channel blocks in `order`. Every name in `order`
/// must be present.
pub fn concat_channels(blocks: &[(String, Vec<f64>)], order: &[&str]) -> Result<Encoding> {
    let mut enc = Encoding {
        vector: Vec::new(),
        layout: Vec::new(),
    };
    for &name in order {
        let (_, v) = blocks
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))?;
        enc.layout.push(LayoutEntry {
            channel: name.to_string(),
            level: 1,
            region: 0,
            offset: enc.vector.len(),
            length: v.len(),
        });
        enc.vector.extend(v.iter().map(|&x| x as f32));
    }
    Ok(enc)
}

/// Raw Fisher vectors of every codebook channel of `features`.
pub fn raw_fisher_blocks(features: &FeatureSet, codebook: &GmmCodebook, exec: Execution) -> Result<Vec<(String, Vec<f64>)>> {
    codebook
        .channels
        .iter()
        .map(|g| {
            let c = features.channel(&g.name).ok_or_else(|| Error::MissingChannel(g.name.clone()))?;
            Ok((g.name.clone(), fisher_encode(&c.data, c.dim, g, exec)?))
        })
        .collect()
}

/// Whole-clip encoding: per-channel Fisher vectors, each power and L2
/// normalized, in codebook channel order.
pub fn encode_features(features: &FeatureSet, codebook: &GmmCodebook, exec: Execution) -> Result<Encoding> {
    let blocks = raw_fisher_blocks(features, codebook, exec)?
        .into_iter()
        .map(|(n, v)| Ok((n, normalize(&v)?)))
        .collect::<Result<Vec<_>>>()?;
    let order: Vec<&str> = codebook.channels.iter().map(|c| c.name.as_str()).collect();
    concat_channels(&blocks, &order)
}
