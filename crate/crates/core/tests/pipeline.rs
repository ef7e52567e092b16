use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use tempyr::division::DivisionMode;
use tempyr::encoding::{Encoding, GmmCodebook};
use tempyr::features::{build_feature_set, FeatureSet, PcaModel};
use tempyr::learn::EvalReport;
use tempyr::media::{load_frame_sequence, DatasetManifest, ManifestEntry, SynthSpec};
use tempyr::par::Execution;
use tempyr::pipeline::{self, clip_stem, Config, Layout, Protocol};
use tempyr::pyramid::frame_cost;

const EXEC: Execution = Execution::Parallel;

fn tiny_config(out: &Path) -> Config {
    let mut synth = SynthSpec::velocity(3, 4);
    synth.width = 40;
    synth.height = 40;
    synth.base_length = 36;
    synth.groups = 2;
    synth.amplitude = [5.0, 6.0];
    synth.blob_radius = [3.0, 4.0];
    let mut cfg = Config {
        out: out.to_path_buf(),
        synth,
        ..Config::default()
    };
    cfg.fit.pca_samples = 3000;
    cfg.fit.gmm_samples = 3000;
    cfg.fit.gmm.components = 4;
    cfg
}

struct Fixture {
    _dir: tempfile::TempDir,
    cfg: Config,
}

/// Synthesized, fitted, extracted and encoded once for all tests.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        pipeline::run_synth(&cfg).unwrap();
        assert!(pipeline::run_fit(&cfg, EXEC).unwrap().ok());
        assert!(pipeline::run_extract(&cfg, EXEC).unwrap().stage.ok());
        assert!(pipeline::run_encode(&cfg, EXEC).unwrap().ok());
        Fixture { _dir: dir, cfg }
    })
}

/// A config writing to a fresh directory but reading the fixture's manifest.
fn derived(out: &Path) -> Config {
    let base = &fixture().cfg;
    Config {
        out: out.to_path_buf(),
        manifest: Some(base.manifest_path()),
        ..base.clone()
    }
}

fn copy_models(from: &Config, to: &Config) {
    let (a, b) = (Layout::new(&from.out), Layout::new(&to.out));
    fs::create_dir_all(b.pca().parent().unwrap()).unwrap();
    fs::copy(a.pca(), b.pca()).unwrap();
    fs::copy(a.codebook(), b.codebook()).unwrap();
}

fn manifest() -> DatasetManifest {
    DatasetManifest::load(&fixture().cfg.manifest_path()).unwrap()
}

#[test]
fn encodings_follow_the_dimension_law() {
    let cfg = &fixture().cfg;
    let layout = Layout::new(&cfg.out);
    let codebook = GmmCodebook::load(&layout.codebook()).unwrap();
    let pca = PcaModel::load(&layout.pca()).unwrap();
    let d: usize = pca
        .channels
        .iter()
        .map(|c| 2 * cfg.fit.gmm.components * (c.out_dim + 2))
        .sum();
    assert_eq!(codebook.encoding_dim(), d);
    let m = manifest();
    for i in 0..m.entries.len() {
        let e = Encoding::load(&layout.encoding(&clip_stem(&m, i))).unwrap();
        assert_eq!(e.len(), d);
    }
}

#[test]
fn pyramid_level_two_encoding_triples_the_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = derived(dir.path());
    cfg.encode.tdp_level = 2;
    cfg.encode.mode = DivisionMode::Pyramid;
    copy_models(&fixture().cfg, &cfg);
    let m = manifest();
    let (src, dst) = (Layout::new(&fixture().cfg.out), Layout::new(&cfg.out));
    fs::create_dir_all(dst.features("x").parent().unwrap()).unwrap();
    for i in 0..m.entries.len() {
        let s = clip_stem(&m, i);
        fs::copy(src.features(&s), dst.features(&s)).unwrap();
    }
    assert!(pipeline::run_encode(&cfg, EXEC).unwrap().ok());
    let d = GmmCodebook::load(&dst.codebook()).unwrap().encoding_dim();
    let e = Encoding::load(&dst.encoding(&clip_stem(&m, 0))).unwrap();
    assert_eq!(e.len(), 3 * d);
}

#[test]
fn level_zero_extraction_matches_the_plain_extractor() {
    let cfg = &fixture().cfg;
    let layout = Layout::new(&cfg.out);
    let pca = PcaModel::load(&layout.pca()).unwrap();
    let m = manifest();
    for i in [0, 5, 11] {
        let clip = load_frame_sequence(&m.resolve(&m.entries[i])).unwrap();
        let plain = build_feature_set(&clip, &pca, &cfg.extract).unwrap();
        let written = fs::read(layout.features(&clip_stem(&m, i))).unwrap();
        assert_eq!(written, plain.to_bytes().unwrap());
    }
}

#[test]
fn pyramid_extraction_counts_processed_frames() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = derived(dir.path());
    cfg.tsp_level = 2;
    copy_models(&fixture().cfg, &cfg);
    let s = pipeline::run_extract(&cfg, EXEC).unwrap();
    assert!(s.stage.ok());
    let want: u64 = manifest().entries.iter().map(|e| frame_cost(2, e.duration_frames as usize)).sum();
    assert_eq!(s.processed_frames, want);
    let m = manifest();
    let tags: Vec<u32> = (0..m.entries.len())
        .flat_map(|i| {
            let fs = FeatureSet::load(&Layout::new(&cfg.out).features(&clip_stem(&m, i))).unwrap();
            fs.locations().iter().map(|l| l.stride_tag).collect::<Vec<_>>()
        })
        .collect();
    assert!(tags.iter().all(|&t| t <= 2));
    assert!(tags.iter().any(|&t| t > 0));
}

#[test]
fn unreadable_clip_is_skipped_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = manifest();
    m.entries.push(ManifestEntry {
        clip_path: PathBuf::from("clips/missing.vclp"),
        label: m.entries[0].label.clone(),
        group: m.entries[0].group.clone(),
        duration_frames: 30,
    });
    let path = dir.path().join("manifest.tsv");
    m.save(&path).unwrap();
    // Relative clip paths must still resolve against the original data.
    let mut text = fs::read_to_string(&path).unwrap();
    text = text.replace("clips/", &format!("{}/clips/", fixture().cfg.out.display()));
    fs::write(&path, text).unwrap();
    let mut cfg = derived(dir.path());
    cfg.manifest = Some(path);
    copy_models(&fixture().cfg, &cfg);
    let s = pipeline::run_extract(&cfg, EXEC).unwrap();
    assert_eq!(s.stage.failures.len(), 1);
    assert_eq!(s.stage.written, 12);
    assert!(s.stage.failures[0].1.to_string().contains("missing.vclp"));
}

#[test]
fn fitting_is_deterministic_with_a_monotone_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = derived(dir.path());
    assert!(pipeline::run_fit(&cfg, EXEC).unwrap().ok());
    let (a, b) = (Layout::new(&fixture().cfg.out), Layout::new(&cfg.out));
    assert_eq!(fs::read(a.pca()).unwrap(), fs::read(b.pca()).unwrap());
    assert_eq!(fs::read(a.codebook()).unwrap(), fs::read(b.codebook()).unwrap());
    assert_eq!(fs::read(a.loglik()).unwrap(), fs::read(b.loglik()).unwrap());
    let curves = pipeline::read_loglik(&b.loglik()).unwrap();
    assert_eq!(curves.len(), 4);
    for (name, ll) in curves {
        assert!(!ll.is_empty());
        for w in ll.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{name}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn too_many_components_names_the_channel() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = derived(dir.path());
    cfg.fit.gmm_samples = 10;
    cfg.fit.gmm.components = 16;
    let err = pipeline::run_fit(&cfg, EXEC).unwrap_err().to_string();
    assert!(err.contains("traj"), "{err}");
}

#[test]
fn corrupt_feature_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = derived(dir.path());
    copy_models(&fixture().cfg, &cfg);
    let m = manifest();
    let (src, dst) = (Layout::new(&fixture().cfg.out), Layout::new(&cfg.out));
    fs::create_dir_all(dst.features("x").parent().unwrap()).unwrap();
    for i in 0..m.entries.len() {
        let s = clip_stem(&m, i);
        fs::copy(src.features(&s), dst.features(&s)).unwrap();
    }
    let bad = dst.features(&clip_stem(&m, 3));
    let bytes = fs::read(&bad).unwrap();
    fs::write(&bad, &bytes[..bytes.len() / 2]).unwrap();
    let s = pipeline::run_encode(&cfg, EXEC).unwrap();
    assert_eq!(s.failures.len(), 1);
    assert!(s.failures[0].1.to_string().contains(&bad.display().to_string()));
}

#[test]
fn missing_codebook_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = derived(dir.path());
    assert!(pipeline::run_encode(&cfg, EXEC).is_err());
}

fn with_encodings(out: &Path) -> Config {
    let cfg = derived(out);
    let m = manifest();
    let (src, dst) = (Layout::new(&fixture().cfg.out), Layout::new(&cfg.out));
    fs::create_dir_all(dst.encoding("x").parent().unwrap()).unwrap();
    for i in 0..m.entries.len() {
        let s = clip_stem(&m, i);
        fs::copy(src.encoding(&s), dst.encoding(&s)).unwrap();
    }
    cfg
}

#[test]
fn fixed_split_reports_exactly_the_test_clips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = with_encodings(dir.path());
    cfg.eval.protocol = Protocol::FixedSplit;
    cfg.eval.test_groups = vec!["g1".into()];
    let r = pipeline::run_eval(&cfg, EXEC).unwrap();
    let n_test = manifest().entries.iter().filter(|e| e.group == "g1").count();
    assert_eq!(r.folds.len(), 1);
    assert_eq!(r.folds[0].n_test, n_test);
    assert_eq!(r.folds[0].n_train, manifest().entries.len() - n_test);
    let model = pipeline::run_train(&cfg, EXEC).unwrap();
    assert_eq!(model.classes.len(), 3);

    cfg.eval.test_groups = vec!["nope".into()];
    assert!(pipeline::run_eval(&cfg, EXEC).unwrap_err().is_config());
}

#[test]
fn baseline_comparison_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = with_encodings(dir.path());
    cfg.eval.baseline = Some(dir.path().join("absent.tsv"));
    let r = pipeline::run_eval(&cfg, EXEC).unwrap();
    assert!(r.baseline.is_none() && r.info.is_empty());
    assert_eq!(r.folds.len(), 2);

    let saved = dir.path().join("base.tsv");
    r.save(&saved).unwrap();
    cfg.eval.baseline = Some(saved);
    let r2 = pipeline::run_eval(&cfg, EXEC).unwrap();
    assert!(r2.classes.iter().all(|c| c.delta == Some(0.0)));
    assert!(r2.info.iter().any(|(k, v)| k == "declined" && v.is_empty()));
    assert!(r2.info.iter().any(|(k, v)| k == "declined_mtsvf" && v == "-"));
    let back = EvalReport::load(&Layout::new(&cfg.out).report()).unwrap();
    assert_eq!(back, r2);
}

#[test]
fn stats_match_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = derived(dir.path());
    let (mean, per_class) = pipeline::run_stats(&cfg).unwrap();
    assert_eq!(per_class.len(), 3);
    assert!((mean - per_class.iter().map(|c| c.1).sum::<f64>() / 3.0).abs() < 1e-15);
    assert!(Layout::new(&cfg.out).stats().exists());
}
