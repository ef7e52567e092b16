//! Temporal division pyramid: per-region encodings concatenated in temporal
//! order, for one level or for every level up to a given one.

use serde::{Deserialize, Serialize};

use crate::encoding::{concat_channels, normalize, raw_fisher_blocks, Encoding, GmmCodebook};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivisionMode {
    /// Only the regions of the requested level.
    #[default]
    Single,
    /// Levels `1, 2, …, n` concatenated.
    Pyramid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionNorm {
    /// Every region block is power and L2 normalized on its own.
    #[default]
    PerRegion,
    /// Regions are power normalized and the whole concatenation is L2
    /// normalized once.
    Global,
}

fn check_divisions(n: usize) -> Result<()> {
    if matches!(n, 1 | 2 | 4 | 8) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("temporal divisions must be 1, 2, 4 or 8, got {n}")))
    }
}

/// Region of a row at temporal position `t` among `n` regions.
pub fn region_of(t: f32, n: usize) -> usize {
    ((t as f64 * n as f64).floor().max(0.0) as usize).min(n - 1)
}

/// Row indices of each of the `n` temporal regions, in input order.
pub fn partition_rows(features: &FeatureSet, n: usize) -> Result<Vec<Vec<usize>>> {
    check_divisions(n)?;
    let mut regions = vec![Vec::new(); n];
    for (i, l) in features.locations().iter().enumerate() {
        regions[region_of(l.t, n)].push(i);
    }
    Ok(regions)
}

/// Splits `features` into `n` disjoint temporal regions.
pub fn partition_features(features: &FeatureSet, n: usize) -> Result<Vec<FeatureSet>> {
    Ok(partition_rows(features, n)?.iter().map(|r| features.select(r)).collect())
}

fn region_encoding(region: &FeatureSet, codebook: &GmmCodebook, norm: RegionNorm, exec: Execution) -> Result<Encoding> {
    let blocks = raw_fisher_blocks(region, codebook, exec)?
        .into_iter()
        .map(|(name, v)| {
            let v = match norm {
                RegionNorm::PerRegion => normalize(&v)?,
                RegionNorm::Global => v.iter().map(|&x| x.signum() * x.abs().sqrt()).collect(),
            };
            Ok((name, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let order: Vec<&str> = codebook.channels.iter().map(|c| c.name.as_str()).collect();
    concat_channels(&blocks, &order)
}

/// Encodes `features` at `level` regions (single mode) or at every level
/// `1, 2, …, level` (pyramid mode). Empty regions give zero blocks.
pub fn tdp_encode(
    features: &FeatureSet,
    codebook: &GmmCodebook,
    level: usize,
    mode: DivisionMode,
    norm: RegionNorm,
    exec: Execution,
) -> Result<Encoding> {
    check_divisions(level)?;
    let levels: Vec<usize> = match mode {
        DivisionMode::Single => vec![level],
        DivisionMode::Pyramid => (0..=level.trailing_zeros()).map(|p| 1 << p).collect(),
    };
    let mut out = Encoding {
        vector: Vec::new(),
        layout: Vec::new(),
    };
    for n in levels {
        for (r, region) in partition_features(features, n)?.iter().enumerate() {
            out.extend(region_encoding(region, codebook, norm, exec)?.with_region(n as u32, r as u32));
        }
    }
    if norm == RegionNorm::Global {
        let v: Vec<f64> = out.vector.iter().map(|&x| x as f64).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            out.vector = v.iter().map(|x| (x / n) as f32).collect();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_features, GmmChannel};
    use crate::features::{Channel, Location};
    use proptest::prelude::*;

    fn set(ts: &[f32]) -> FeatureSet {
        let data = ts.iter().enumerate().flat_map(|(i, &t)| [t * 3.0 - 1.0, (i % 5) as f32 * 0.3]).collect();
        let locs = ts
            .iter()
            .map(|&t| Location {
                x: 0.5,
                y: 0.5,
                t,
                frame_index: 0,
                stride_tag: 0,
            })
            .collect();
        FeatureSet::new(vec![Channel::new("a", 2, data).unwrap()], locs, 100).unwrap()
    }

    fn codebook() -> GmmCodebook {
        GmmCodebook {
            channels: vec![GmmChannel {
                name: "a".into(),
                k: 2,
                dim: 2,
                weights: vec![0.4, 0.6],
                means: vec![-0.5, 0.2, 1.0, 0.8],
                variances: vec![0.5, 0.7, 0.9, 0.4],
            }],
        }
    }

    #[test]
    fn half_open_boundaries() {
        let fs = set(&[0.49, 0.50]);
        let regions = partition_rows(&fs, 2).unwrap();
        assert_eq!(regions, vec![vec![0], vec![1]]);
        assert_eq!(region_of(1.0, 4), 3);
        assert!(partition_rows(&fs, 3).is_err());
    }

    #[test]
    fn level_one_is_whole_clip() {
        let fs = set(&[0.1, 0.3, 0.6, 0.9]);
        let cb = codebook();
        let whole = encode_features(&fs, &cb, Execution::Sequential).unwrap();
        for mode in [DivisionMode::Single, DivisionMode::Pyramid] {
            let e = tdp_encode(&fs, &cb, 1, mode, RegionNorm::PerRegion, Execution::Sequential).unwrap();
            assert_eq!(e, whole);
        }
    }

    #[test]
    fn pyramid_dimensions_and_order() {
        let fs = set(&[0.1, 0.3, 0.6, 0.9]);
        let cb = codebook();
        let d = cb.encoding_dim();
        for (level, blocks) in [(1, 1), (2, 3), (4, 7), (8, 15)] {
            let p = tdp_encode(&fs, &cb, level, DivisionMode::Pyramid, RegionNorm::PerRegion, Execution::Parallel).unwrap();
            assert_eq!(p.len(), blocks * d);
            let s = tdp_encode(&fs, &cb, level, DivisionMode::Single, RegionNorm::PerRegion, Execution::Parallel).unwrap();
            assert_eq!(s.len(), level * d);
        }
        let p = tdp_encode(&fs, &cb, 2, DivisionMode::Pyramid, RegionNorm::PerRegion, Execution::Parallel).unwrap();
        let tags: Vec<(u32, u32)> = p.layout.iter().map(|e| (e.level, e.region)).collect();
        assert_eq!(tags, vec![(1, 0), (2, 0), (2, 1)]);
    }

    #[test]
    fn empty_region_is_zero_block() {
        let fs = set(&[0.1, 0.2]);
        let e = tdp_encode(&fs, &codebook(), 2, DivisionMode::Single, RegionNorm::PerRegion, Execution::Sequential).unwrap();
        assert!(e.block(&e.layout[1]).iter().all(|&x| x == 0.0));
        let n: f32 = e.block(&e.layout[0]).iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-6);
    }

    #[test]
    fn global_norm_gives_unit_vector() {
        let fs = set(&[0.1, 0.7]);
        let e = tdp_encode(&fs, &codebook(), 2, DivisionMode::Pyramid, RegionNorm::Global, Execution::Sequential).unwrap();
        let n: f64 = e.vector.iter().map(|&x| x as f64 * x as f64).sum();
        assert!((n - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn regions_partition_rows(ts in proptest::collection::vec(0.0f32..1.0, 0..60), p in 0u32..4) {
            let n = 1usize << p;
            let fs = set(&ts);
            let regions = partition_rows(&fs, n).unwrap();
            let mut all: Vec<usize> = regions.concat();
            all.sort();
            prop_assert_eq!(all, (0..ts.len()).collect::<Vec<_>>());
            for w in regions.windows(2) {
                for &a in &w[0] {
                    for &b in &w[1] {
                        prop_assert!(ts[a] <= ts[b]);
                    }
                }
            }
        }
    }
}
