//! Declarative experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::division::{DivisionMode, RegionNorm};
use crate::encoding::GmmParams;
use crate::error::{Error, Result};
use crate::features::ExtractParams;
use crate::learn::SvmParams;
use crate::media::SynthSpec;
use crate::pyramid::MAX_LEVEL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Rows sampled for PCA fitting.
    pub pca_samples: usize,
    /// Rows sampled for mixture fitting.
    pub gmm_samples: usize,
    pub gmm: GmmParams,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            pca_samples: 256_000,
            gmm_samples: 256_000,
            gmm: GmmParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodeConfig {
    pub tdp_level: usize,
    pub mode: DivisionMode,
    pub region_norm: RegionNorm,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            tdp_level: 1,
            mode: DivisionMode::Single,
            region_norm: RegionNorm::PerRegion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    #[default]
    LeaveOneGroupOut,
    /// Train on every group not listed in `test_groups`, test on those.
    FixedSplit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub test_groups: Vec<String>,
    /// Report to compute per-class deltas and the improvement split against.
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    #[default]
    TspLevel,
    TdpLevel,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::TspLevel => "tsp",
            SweepParameter::TdpLevel => "tdp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            parameter: SweepParameter::TspLevel,
            values: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Dataset manifest; defaults to `<out>/manifest.tsv`.
    pub manifest: Option<PathBuf>,
    /// Directory receiving every artifact.
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub synth: SynthSpec,
    pub extract: ExtractParams,
    /// Temporal Gaussian smoothing applied before subsampling; 0 disables it.
    pub smoothing: f64,
    pub tsp_level: usize,
    pub ted: bool,
    pub fit: FitConfig,
    pub encode: EncodeConfig,
    pub svm: SvmParams,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            manifest: None,
            out: PathBuf::from("tempyr-out"),
            seed: 0,
            workers: 0,
            synth: SynthSpec::default(),
            extract: ExtractParams::default(),
            smoothing: 0.0,
            tsp_level: 0,
            ted: false,
            fit: FitConfig::default(),
            encode: EncodeConfig::default(),
            svm: SvmParams::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.extract.validate()?;
        if self.tsp_level > MAX_LEVEL {
            return Err(Error::Config(format!("tsp_level {} exceeds {MAX_LEVEL}", self.tsp_level)));
        }
        if !matches!(self.encode.tdp_level, 1 | 2 | 4 | 8) {
            return Err(Error::Config(format!("tdp_level must be 1, 2, 4 or 8, got {}", self.encode.tdp_level)));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Config("smoothing must be a finite non-negative scale".into()));
        }
        if self.fit.gmm.components == 0 || self.fit.pca_samples == 0 || self.fit.gmm_samples == 0 {
            return Err(Error::Config("fit sample counts and components must be positive".into()));
        }
        if self.svm.c.is_nan() || self.svm.c <= 0.0 {
            return Err(Error::Config("svm.c must be positive".into()));
        }
        if self.eval.protocol == Protocol::FixedSplit && self.eval.test_groups.is_empty() {
            return Err(Error::Config("fixed-split protocol needs eval.test_groups".into()));
        }
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| self.out.join("manifest.tsv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = Config {
            tsp_level: 2,
            ..Config::default()
        };
        cfg.encode.mode = DivisionMode::Pyramid;
        cfg.eval.protocol = Protocol::FixedSplit;
        cfg.eval.test_groups = vec!["g0".into()];
        let back = Config::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = Config::parse("tsp_level = 1\n[encode]\ntdp_level = 2\nmode = \"pyramid\"\n").unwrap();
        assert_eq!(cfg.tsp_level, 1);
        assert_eq!(cfg.encode.mode, DivisionMode::Pyramid);
        assert_eq!(cfg.fit, FitConfig::default());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in ["tsp_level = 9", "[encode]\ntdp_level = 3", "bogus = 1", "smoothing = -1.0"] {
            let err = Config::parse(text).unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }
}
