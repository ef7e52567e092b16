//! In-memory experiment runner shared by the disk stages and level sweeps.

use crate::division::tdp_encode;
use crate::encoding::{fit_gmm, sample_descriptors, Encoding, GmmCodebook};
use crate::error::{Error, Result};
use crate::features::{extract_raw_features, fit_pca, project_features, ExtractParams, FeatureSet, PcaModel};
use crate::learn::{cross_validate, EvalReport, Fold, SvmParams};
use crate::media::{temporal_smooth, temporal_subsample, DatasetManifest, VideoClip};
use crate::par::{self, Execution};
use crate::pyramid::MAX_LEVEL;
use crate::ted::ted_augment;

use super::config::{EncodeConfig, FitConfig};

/// Fitted projection and codebook with the per-channel EM log-likelihood
/// curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub pca: PcaModel,
    pub codebook: GmmCodebook,
    pub curves: Vec<(String, Vec<f64>)>,
}

/// Raw per-stride features of every clip, so that pyramids of any level up to
/// the bank's depth are assembled without re-extraction.
#[derive(Debug, Clone)]
pub struct RawBank {
    strides: Vec<Vec<FeatureSet>>,
    frame_counts: Vec<usize>,
}

impl RawBank {
    /// Extracts strides `1..=max_level + 1` of every clip after optional
    /// temporal smoothing.
    pub fn build(
        clips: &[VideoClip],
        max_level: usize,
        smoothing: f64,
        params: &ExtractParams,
        exec: Execution,
    ) -> Result<RawBank> {
        if max_level > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!("pyramid level {max_level} exceeds {MAX_LEVEL}")));
        }
        let smoothed = par::map(exec, clips, |c| temporal_smooth(c, smoothing))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let jobs: Vec<(usize, usize)> = (0..clips.len())
            .flat_map(|c| (0..=max_level).map(move |v| (c, v)))
            .collect();
        let mut sets = par::map(exec, &jobs, |&(c, v)| -> Result<FeatureSet> {
            let sub = temporal_subsample(&smoothed[c], v + 1)?;
            Ok(extract_raw_features(&sub, params)?.with_stride_tag(v as u32))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter();
        let strides = (0..clips.len())
            .map(|_| sets.by_ref().take(max_level + 1).collect())
            .collect();
        Ok(RawBank {
            strides,
            frame_counts: clips.iter().map(VideoClip::len).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.strides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strides.is_empty()
    }

    pub fn max_level(&self) -> usize {
        self.strides.first().map_or(0, |s| s.len() - 1)
    }

    /// The raw pyramid of clip `clip` at `level`, identical to running the
    /// pyramid extractor on it.
    pub fn pyramid(&self, clip: usize, level: usize) -> Result<FeatureSet> {
        if level > self.max_level() {
            return Err(Error::InvalidArgument(format!(
                "level {level} exceeds the bank depth {}",
                self.max_level()
            )));
        }
        FeatureSet::concat(&self.strides[clip][..=level], self.frame_counts[clip])
    }
}

/// PCA projection, spatial augmentation and optional time column.
pub fn featurize(raw: &FeatureSet, pca: &PcaModel, ted: bool) -> Result<FeatureSet> {
    let projected = project_features(raw, pca)?;
    if ted {
        ted_augment(&projected)
    } else {
        Ok(projected)
    }
}

/// Fits PCA on a sample of raw rows, then one mixture per channel on a sample
/// of the projected (and optionally time-augmented) rows.
pub fn fit_models(raw: &[FeatureSet], ted: bool, fit: &FitConfig, seed: u64, exec: Execution) -> Result<Models> {
    let pca = fit_pca(&sample_descriptors(raw, fit.pca_samples, seed)?.channels)?;
    let processed = par::map(exec, raw, |r| featurize(r, &pca, ted))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let sample = sample_descriptors(&processed, fit.gmm_samples, seed.wrapping_add(1))?;
    let mut channels = Vec::new();
    let mut curves = Vec::new();
    for (i, c) in sample.channels.iter().enumerate() {
        let mut f = fit_gmm(c, &fit.gmm, seed.wrapping_add(2 + i as u64), exec)?;
        if !f.converged {
            log::warn!("{}: EM stopped after {} iterations", c.name, fit.gmm.max_iter);
        }
        f.model.quantize();
        curves.push((c.name.clone(), f.log_likelihood));
        channels.push(f.model);
    }
    Ok(Models {
        pca,
        codebook: GmmCodebook { channels },
        curves,
    })
}

pub fn encode_clip(features: &FeatureSet, codebook: &GmmCodebook, encode: &EncodeConfig, exec: Execution) -> Result<Encoding> {
    tdp_encode(features, codebook, encode.tdp_level, encode.mode, encode.region_norm, exec)
}

pub fn to_f64(encoding: &Encoding) -> Vec<f64> {
    encoding.vector.iter().map(|&v| v as f64).collect()
}

/// Everything that varies between runs on one raw bank.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub tsp_level: usize,
    pub ted: bool,
    pub fit: FitConfig,
    pub encode: EncodeConfig,
    pub svm: SvmParams,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub models: Models,
    pub encodings: Vec<Encoding>,
}

/// Fits models on every clip (unsupervised), encodes, and cross-validates
/// over `folds`.
pub fn run_experiment(
    bank: &RawBank,
    manifest: &DatasetManifest,
    folds: &[Fold],
    spec: &ExperimentSpec,
    exec: Execution,
) -> Result<ExperimentOutcome> {
    if bank.len() != manifest.entries.len() {
        return Err(Error::Dim {
            expected: manifest.entries.len(),
            got: bank.len(),
        });
    }
    let raw = par::map_range(exec, bank.len(), |i| bank.pyramid(i, spec.tsp_level))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let models = fit_models(&raw, spec.ted, &spec.fit, spec.seed, exec)?;
    let encodings = par::map(exec, &raw, |r| {
        encode_clip(&featurize(r, &models.pca, spec.ted)?, &models.codebook, &spec.encode, Execution::Sequential)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let x: Vec<Vec<f64>> = encodings.iter().map(to_f64).collect();
    let mut report = cross_validate(&x, &manifest.labels(), folds, &spec.svm, manifest.metric, exec)?;
    report.attach_tsvf(manifest)?;
    Ok(ExperimentOutcome {
        report,
        models,
        encodings,
    })
}
