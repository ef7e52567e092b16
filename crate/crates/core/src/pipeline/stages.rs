//! Disk-backed pipeline stages. Every artifact lives under the configured
//! output directory and is written atomically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::binio;
use crate::encoding::{Encoding, GmmCodebook};
use crate::error::{Error, Result};
use crate::features::{build_feature_set, extract_raw_features, FeatureSet, PcaModel};
use crate::learn::{
    cross_validate, fixed_split, improvement_split, leave_one_group_out_folds, mtsvf, train_one_vs_all, EvalReport,
    Fold, LinearModel,
};
use crate::media::{generate_synthetic_dataset, load_frame_sequence, temporal_smooth, DatasetManifest, VideoClip};
use crate::par::{self, Execution};
use crate::pyramid::{tsp_extract, FrameCounter};
use crate::ted::ted_augment;

use super::config::{Config, Protocol, SweepParameter};
use super::experiment::{encode_clip, fit_models, to_f64};

/// Artifact locations under an output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn raw(&self, stem: &str) -> PathBuf {
        self.root.join("raw").join(format!("{stem}.tfea"))
    }

    pub fn features(&self, stem: &str) -> PathBuf {
        self.root.join("features").join(format!("{stem}.tfea"))
    }

    pub fn frames(&self) -> PathBuf {
        self.root.join("features").join("frames.tsv")
    }

    pub fn encoding(&self, stem: &str) -> PathBuf {
        self.root.join("encodings").join(format!("{stem}.tenc"))
    }

    pub fn pca(&self) -> PathBuf {
        self.root.join("models").join("pca.tpca")
    }

    pub fn codebook(&self) -> PathBuf {
        self.root.join("models").join("codebook.tgmm")
    }

    pub fn loglik(&self) -> PathBuf {
        self.root.join("models").join("loglik.tsv")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("models").join("svm.tsvm")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("reports").join("report.tsv")
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("reports").join("stats.tsv")
    }

    pub fn sweep_dir(&self, name: &str) -> PathBuf {
        self.root.join("sweep").join(name)
    }

    pub fn sweep_report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(format!("sweep_{name}.tsv"))
    }
}

/// Artifact stem of manifest entry `index`: its position plus the clip's file
/// stem, unique even when clip names repeat across directories.
pub fn clip_stem(manifest: &DatasetManifest, index: usize) -> String {
    let stem = manifest.entries[index]
        .clip_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:05}_{stem}")
}

/// Outcome of a per-clip stage; failed clips were logged and skipped.
#[derive(Debug, Default)]
pub struct StageSummary {
    pub written: usize,
    pub failures: Vec<(String, Error)>,
}

impl StageSummary {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn collect(stems: Vec<String>, results: Vec<Result<()>>) -> StageSummary {
        let mut s = StageSummary::default();
        for (stem, r) in stems.into_iter().zip(results) {
            match r {
                Ok(()) => s.written += 1,
                Err(e) => {
                    log::error!("{stem}: {e}");
                    s.failures.push((stem, e));
                }
            }
        }
        s
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    binio::write_atomic(path, text.as_bytes())
}

pub fn load_manifest(cfg: &Config) -> Result<DatasetManifest> {
    DatasetManifest::load(&cfg.manifest_path())
}

fn load_clip(cfg: &Config, manifest: &DatasetManifest, index: usize) -> Result<VideoClip> {
    let clip = load_frame_sequence(&manifest.resolve(&manifest.entries[index]))?;
    temporal_smooth(&clip, cfg.smoothing)
}

fn stems(manifest: &DatasetManifest) -> Vec<String> {
    (0..manifest.entries.len()).map(|i| clip_stem(manifest, i)).collect()
}

/// Renders the configured synthetic dataset into the output directory.
pub fn run_synth(cfg: &Config) -> Result<DatasetManifest> {
    generate_synthetic_dataset(&cfg.synth, cfg.seed, &cfg.out)
}

/// Raw pyramid extraction without PCA (the fitting bootstrap).
fn bootstrap_raw(cfg: &Config, manifest: &DatasetManifest, exec: Execution) -> Result<(Vec<FeatureSet>, StageSummary)> {
    let layout = Layout::new(&cfg.out);
    let names = stems(manifest);
    let results = par::map_range(exec, manifest.entries.len(), |i| -> Result<FeatureSet> {
        let clip = load_clip(cfg, manifest, i)?;
        let raw = tsp_extract(&clip, cfg.tsp_level, exec, None, |c| extract_raw_features(c, &cfg.extract))?;
        raw.save(&layout.raw(&names[i]))?;
        Ok(raw)
    });
    let mut sets = Vec::new();
    let mut units = Vec::new();
    for r in results {
        match r {
            Ok(s) => {
                sets.push(s);
                units.push(Ok(()));
            }
            Err(e) => units.push(Err(e)),
        }
    }
    Ok((sets, StageSummary::collect(names, units)))
}

/// Fits PCA and the codebook from a raw bootstrap extraction of every clip
/// and records the EM log-likelihood curves.
pub fn run_fit(cfg: &Config, exec: Execution) -> Result<StageSummary> {
    cfg.validate()?;
    let manifest = load_manifest(cfg)?;
    let layout = Layout::new(&cfg.out);
    let (raw, summary) = bootstrap_raw(cfg, &manifest, exec)?;
    if raw.is_empty() {
        return Err(Error::InvalidArgument("no clip could be extracted for fitting".into()));
    }
    let models = fit_models(&raw, cfg.ted, &cfg.fit, cfg.seed, exec)?;
    models.pca.save(&layout.pca())?;
    models.codebook.save(&layout.codebook())?;
    let mut curve = String::from("channel\titeration\tmean_log_likelihood\n");
    for (name, ll) in &models.curves {
        for (i, v) in ll.iter().enumerate() {
            let _ = writeln!(curve, "{name}\t{i}\t{v}");
        }
    }
    write_text(&layout.loglik(), &curve)?;
    Ok(summary)
}

/// Reads a log-likelihood curve file back as `(channel, values)` pairs.
pub fn read_loglik(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let bytes = binio::read_file(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let origin = path.display().to_string();
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::format("log-likelihood curve", origin, format!("bad line {line:?}")));
        }
        let v: f64 = f[2]
            .parse()
            .map_err(|_| Error::format("log-likelihood curve", origin.clone(), format!("bad value {:?}", f[2])))?;
        match out.last_mut() {
            Some((name, vals)) if name == f[0] => vals.push(v),
            _ => out.push((f[0].to_string(), vec![v])),
        }
    }
    Ok(out)
}

/// Result of [`run_extract`].
#[derive(Debug, Default)]
pub struct ExtractSummary {
    pub stage: StageSummary,
    /// Frames fed to the extractor over all clips and pyramid levels.
    pub processed_frames: u64,
}

/// Smoothing, pyramid extraction, projection and optional time column for
/// every clip; writes one feature file per clip and the frame counters.
pub fn run_extract(cfg: &Config, exec: Execution) -> Result<ExtractSummary> {
    cfg.validate()?;
    let manifest = load_manifest(cfg)?;
    let layout = Layout::new(&cfg.out);
    let pca = PcaModel::load(&layout.pca())?;
    let names = stems(&manifest);
    let total = FrameCounter::new();
    let results = par::map_range(exec, manifest.entries.len(), |i| -> Result<u64> {
        let clip = load_clip(cfg, &manifest, i)?;
        let counter = FrameCounter::new();
        let fs = tsp_extract(&clip, cfg.tsp_level, exec, Some(&counter), |c| {
            build_feature_set(c, &pca, &cfg.extract)
        })?;
        let fs = if cfg.ted { ted_augment(&fs)? } else { fs };
        fs.save(&layout.features(&names[i]))?;
        Ok(counter.get())
    });
    let mut frames = String::from("clip\tframes\n");
    let mut units = Vec::new();
    for (name, r) in names.iter().zip(results) {
        match r {
            Ok(n) => {
                total.add(n as usize);
                let _ = writeln!(frames, "{name}\t{n}");
                units.push(Ok(()));
            }
            Err(e) => units.push(Err(e)),
        }
    }
    let _ = writeln!(frames, "total\t{}", total.get());
    write_text(&layout.frames(), &frames)?;
    Ok(ExtractSummary {
        stage: StageSummary::collect(names, units),
        processed_frames: total.get(),
    })
}

/// Temporal-division encoding of every feature file.
pub fn run_encode(cfg: &Config, exec: Execution) -> Result<StageSummary> {
    cfg.validate()?;
    let manifest = load_manifest(cfg)?;
    let layout = Layout::new(&cfg.out);
    let codebook = GmmCodebook::load(&layout.codebook())?;
    let names = stems(&manifest);
    let results = par::map(exec, &names, |name| -> Result<()> {
        let fs = FeatureSet::load(&layout.features(name))?;
        encode_clip(&fs, &codebook, &cfg.encode, Execution::Sequential)?.save(&layout.encoding(name))
    });
    Ok(StageSummary::collect(names, results))
}

fn load_encodings(cfg: &Config, manifest: &DatasetManifest) -> Result<Vec<Vec<f64>>> {
    let layout = Layout::new(&cfg.out);
    stems(manifest)
        .iter()
        .map(|n| Encoding::load(&layout.encoding(n)).map(|e| to_f64(&e)))
        .collect()
}

/// The evaluation folds the configuration asks for.
pub fn protocol_folds(cfg: &Config, manifest: &DatasetManifest) -> Result<Vec<Fold>> {
    let groups: Vec<String> = manifest.entries.iter().map(|e| e.group.clone()).collect();
    match cfg.eval.protocol {
        Protocol::LeaveOneGroupOut => leave_one_group_out_folds(&groups),
        Protocol::FixedSplit => {
            let known = manifest.groups();
            if let Some(g) = cfg.eval.test_groups.iter().find(|g| !known.contains(g)) {
                return Err(Error::Config(format!("test group {g} is not in the manifest")));
            }
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..groups.len()).partition(|&i| cfg.eval.test_groups.contains(&groups[i]));
            Ok(vec![fixed_split(train, test)?])
        }
    }
}

/// Trains the final one-vs-all model on the training clips of the protocol
/// (every clip under leave-one-group-out).
pub fn run_train(cfg: &Config, exec: Execution) -> Result<LinearModel> {
    cfg.validate()?;
    let manifest = load_manifest(cfg)?;
    let x = load_encodings(cfg, &manifest)?;
    let labels = manifest.labels();
    let train: Vec<usize> = match cfg.eval.protocol {
        Protocol::LeaveOneGroupOut => (0..x.len()).collect(),
        Protocol::FixedSplit => protocol_folds(cfg, &manifest)?.remove(0).train,
    };
    let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
    let tl: Vec<String> = train.iter().map(|&i| labels[i].clone()).collect();
    let (mut model, fits) = train_one_vs_all(&tx, &tl, &cfg.svm, exec)?;
    for (c, f) in model.classes.iter().zip(&fits) {
        log::info!("{c}: {} sweeps, duality gap {:.3e}", f.sweeps, f.gap());
    }
    model.quantize();
    model.save(&Layout::new(&cfg.out).model())?;
    Ok(model)
}

/// Cross-validates the encodings under the configured protocol and writes
/// the report, with deltas and the improvement split when a baseline report
/// is available.
pub fn run_eval(cfg: &Config, exec: Execution) -> Result<EvalReport> {
    cfg.validate()?;
    let manifest = load_manifest(cfg)?;
    let x = load_encodings(cfg, &manifest)?;
    let folds = protocol_folds(cfg, &manifest)?;
    let mut report = cross_validate(&x, &manifest.labels(), &folds, &cfg.svm, manifest.metric, exec)?;
    report.attach_tsvf(&manifest)?;
    if let Some(path) = &cfg.eval.baseline {
        if path.exists() {
            let baseline = EvalReport::load(path)?;
            compare(&mut report, &path.display().to_string(), &baseline, &manifest)?;
        } else {
            log::warn!("baseline report {} not found; omitting the improvement split", path.display());
        }
    }
    report.save(&Layout::new(&cfg.out).report())?;
    Ok(report)
}

/// Adds per-class deltas and the improvement split against `baseline`.
pub fn compare(report: &mut EvalReport, name: &str, baseline: &EvalReport, manifest: &DatasetManifest) -> Result<()> {
    report.attach_baseline(name, baseline)?;
    let split = improvement_split(baseline, report, manifest)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
    report.info.extend([
        ("improved".to_string(), split.improved.join(",")),
        ("declined".to_string(), split.declined.join(",")),
        ("improved_mtsvf".to_string(), opt(split.improved_mtsvf)),
        ("declined_mtsvf".to_string(), opt(split.declined_mtsvf)),
    ]);
    Ok(())
}

/// Per-class duration variation of the manifest.
pub fn run_stats(cfg: &Config) -> Result<(f64, Vec<(String, f64)>)> {
    let manifest = load_manifest(cfg)?;
    let (mean, per_class) = mtsvf(&manifest)?;
    let mut text = String::from("label\ttsvf\n");
    for (l, v) in &per_class {
        let _ = writeln!(text, "{l}\t{v}");
    }
    let _ = writeln!(text, "\n[summary]\nmtsvf={mean}");
    write_text(&Layout::new(&cfg.out).stats(), &text)?;
    Ok((mean, per_class))
}

/// Runs fit, extract, encode and eval once per sweep value, each in its own
/// subdirectory, and compares every level against the first one.
pub fn run_sweep(cfg: &Config, exec: Execution) -> Result<Vec<(usize, EvalReport)>> {
    cfg.validate()?;
    if cfg.sweep.values.is_empty() {
        return Err(Error::Config("sweep.values is empty".into()));
    }
    let layout = Layout::new(&cfg.out);
    let manifest = load_manifest(cfg)?;
    let mut reports: Vec<(usize, EvalReport)> = Vec::new();
    for &v in &cfg.sweep.values {
        let name = format!("{}{v}", cfg.sweep.parameter.as_str());
        let mut sub = cfg.clone();
        sub.manifest = Some(cfg.manifest_path());
        sub.out = layout.sweep_dir(&name);
        sub.eval.baseline = None;
        match cfg.sweep.parameter {
            SweepParameter::TspLevel => sub.tsp_level = v,
            SweepParameter::TdpLevel => sub.encode.tdp_level = v,
        }
        sub.validate()?;
        for summary in [run_fit(&sub, exec)?, run_extract(&sub, exec)?.stage, run_encode(&sub, exec)?] {
            if let Some((stem, e)) = summary.failures.into_iter().next() {
                return Err(Error::InvalidArgument(format!("sweep {name}: clip {stem} failed: {e}")));
            }
        }
        let mut report = run_eval(&sub, exec)?;
        if let Some((v0, first)) = reports.first() {
            compare(&mut report, &format!("{}{v0}", cfg.sweep.parameter.as_str()), first, &manifest)?;
        }
        report.save(&layout.sweep_report(&name))?;
        log::info!("{name}: {} = {:.4}", report.metric.as_str(), report.headline());
        reports.push((v, report));
    }
    Ok(reports)
}
