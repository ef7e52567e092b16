use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::binio;
use crate::error::{Error, Result};

/// Which per-class metric a dataset is natively evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Accuracy,
    AveragePrecision,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::AveragePrecision => "ap",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        match s.trim() {
            "accuracy" | "acc" => Some(Metric::Accuracy),
            "ap" | "map" => Some(Metric::AveragePrecision),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub clip_path: PathBuf,
    pub label: String,
    pub group: String,
    pub duration_frames: u64,
}

/// Labeled clips with recording groups and durations.
///
/// Text form: one `clip_path<TAB>label<TAB>group<TAB>duration_frames` line
/// per clip. Blank lines and `#` comments are skipped; a `# metric: ap`
/// comment declares the dataset's native metric.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub metric: Metric,
    /// Directory that relative clip paths are resolved against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = DatasetManifest {
            entries,
            metric: Metric::Accuracy,
            root: PathBuf::new(),
        };
        m.validate("manifest")?;
        Ok(m)
    }

    fn validate(&self, origin: &str) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::format("manifest", origin, "no entries"));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.label.is_empty() || e.group.is_empty() {
                return Err(Error::format("manifest", origin, format!("entry {i}: empty label or group")));
            }
            if e.duration_frames == 0 {
                return Err(Error::format("manifest", origin, format!("entry {i}: duration must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut metric = Metric::Accuracy;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("metric:") {
                    metric = Metric::parse(v)
                        .ok_or_else(|| Error::format("manifest", origin, format!("line {}: unknown metric {v:?}", lineno + 1)))?;
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::format(
                    "manifest",
                    origin,
                    format!("line {}: expected 4 tab-separated fields, got {}", lineno + 1, fields.len()),
                ));
            }
            let duration_frames = fields[3]
                .trim()
                .parse()
                .map_err(|_| Error::format("manifest", origin, format!("line {}: bad duration {:?}", lineno + 1, fields[3])))?;
            entries.push(ManifestEntry {
                clip_path: PathBuf::from(fields[0]),
                label: fields[1].to_string(),
                group: fields[2].to_string(),
                duration_frames,
            });
        }
        let m = DatasetManifest {
            entries,
            metric,
            root: PathBuf::new(),
        };
        m.validate(origin)?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = binio::read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::format("manifest", path.display().to_string(), "not UTF-8"))?;
        let mut m = Self::parse(&text, &path.display().to_string())?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.metric != Metric::Accuracy {
            let _ = writeln!(out, "# metric: {}", self.metric.as_str());
        }
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", e.clip_path.display(), e.label, e.group, e.duration_frames);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.clip_path.is_absolute() {
            entry.clip_path.clone()
        } else {
            self.root.join(&entry.clip_path)
        }
    }

    /// Sorted distinct labels; this is the class order used everywhere.
    pub fn classes(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Sorted distinct group ids.
    pub fn groups(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.group.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let text = "# metric: ap\n# free comment\na.vclp\twalk\tg0\t30\n\nb.vclp\trun\tg1\t12\n";
        let m = DatasetManifest::parse(text, "t").unwrap();
        assert_eq!(m.metric, Metric::AveragePrecision);
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.classes(), vec!["run", "walk"]);
        assert_eq!(m.groups(), vec!["g0", "g1"]);
        let again = DatasetManifest::parse(&m.to_text(), "t").unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_invalid_rows() {
        assert!(DatasetManifest::parse("a\tb\tc\n", "t").is_err());
        assert!(DatasetManifest::parse("a\tb\tg\t0\n", "t").is_err());
        assert!(DatasetManifest::parse("a\tb\t\t3\n", "t").is_err());
        assert!(DatasetManifest::parse("a\tb\tg\tx\n", "t").is_err());
        assert!(DatasetManifest::parse("", "t").is_err());
    }

    #[test]
    fn resolves_relative_to_manifest_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        std::fs::write(&p, "clips/a.vclp\tx\tg\t5\n").unwrap();
        let m = DatasetManifest::load(&p).unwrap();
        assert_eq!(m.resolve(&m.entries[0]), dir.path().join("clips/a.vclp"));
    }
}
