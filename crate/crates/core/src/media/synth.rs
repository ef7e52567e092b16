//! Deterministic synthetic action clips.
//!
//! Every clip shows one anti-aliased, internally textured disc moving over a
//! static textured background.
//!
//! * **Velocity mode**: each class is a closed motion path (circle,
//!   figure-eight, …). A clip traverses the whole path once per cycle at a
//!   per-clip playback speed factor `s` drawn from the class's range; the
//!   clip has `floor((base_length − 1)/s) + 1` frames so faster clips are
//!   shorter and move `s` times further per frame.
//! * **Order mode**: classes come in pairs. The forward class performs a
//!   rest / gesture A / rest / gesture B / rest script where A and B are
//!   oscillations along perpendicular axes; the paired class plays the very
//!   same clip backwards. Each oscillation is symmetric under time reversal,
//!   so the two classes differ only in the order of their gestures.
//!
//! Clips are assigned to groups round-robin by their index within the class,
//! so clip `i` of every class lands in group `i mod groups`.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

use super::{write_clip_container, DatasetManifest, ManifestEntry, Metric, VideoClip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    Velocity,
    Order,
}

/// Closed motion paths used as velocity-mode classes, in class order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathShape {
    CircleCcw,
    CircleCw,
    FigureEight,
    Square,
    Line,
    Trefoil,
}

impl PathShape {
    pub const ALL: [PathShape; 6] = [
        PathShape::CircleCcw,
        PathShape::CircleCw,
        PathShape::FigureEight,
        PathShape::Square,
        PathShape::Line,
        PathShape::Trefoil,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PathShape::CircleCcw => "circle_ccw",
            PathShape::CircleCw => "circle_cw",
            PathShape::FigureEight => "figure_eight",
            PathShape::Square => "square",
            PathShape::Line => "line",
            PathShape::Trefoil => "trefoil",
        }
    }

    /// Unit-scale position at path parameter `u` (one period per unit).
    pub fn point(self, u: f64) -> (f64, f64) {
        let a = 2.0 * PI * u;
        match self {
            PathShape::CircleCcw => (a.cos(), -a.sin()),
            PathShape::CircleCw => (a.cos(), a.sin()),
            PathShape::FigureEight => (a.sin(), 0.5 * (2.0 * a).sin()),
            PathShape::Line => (a.sin(), 0.0),
            PathShape::Trefoil => {
                let r = 0.6 + 0.4 * (3.0 * a).cos();
                (r * a.cos(), r * a.sin())
            }
            PathShape::Square => {
                let f = u.rem_euclid(1.0) * 4.0;
                let side = f.floor();
                let s = f - side;
                match side as u32 {
                    0 => (-1.0 + 2.0 * s, -1.0),
                    1 => (1.0, -1.0 + 2.0 * s),
                    2 => (1.0 - 2.0 * s, 1.0),
                    _ => (-1.0, 1.0 - 2.0 * s),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub mode: SynthMode,
    pub classes: usize,
    pub clips_per_class: usize,
    pub width: usize,
    pub height: usize,
    /// Frame count of a clip at speed factor 1.
    pub base_length: usize,
    pub groups: usize,
    /// Speed-factor ranges `[lo, hi]`, cycled over classes.
    pub speed_ranges: Vec<[f64; 2]>,
    /// Path period repetitions per clip (velocity mode).
    pub cycles: f64,
    /// Path half-extent range in pixels.
    pub amplitude: [f64; 2],
    pub blob_radius: [f64; 2],
    /// Oscillation period range in frames (order mode).
    pub oscillation_period: [f64; 2],
    /// Split each class's speed range into `groups` equal bands and draw a
    /// clip's speed from its group's band, so every group has its own tempo.
    pub group_tempo: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            mode: SynthMode::Velocity,
            classes: 3,
            clips_per_class: 50,
            width: 64,
            height: 64,
            base_length: 96,
            groups: 5,
            speed_ranges: vec![[1.0, 3.0]],
            cycles: 1.0,
            amplitude: [9.0, 12.0],
            blob_radius: [5.0, 7.0],
            oscillation_period: [10.0, 14.0],
            group_tempo: false,
        }
    }
}

impl SynthSpec {
    pub fn order(classes: usize, clips_per_class: usize) -> Self {
        SynthSpec {
            mode: SynthMode::Order,
            classes,
            clips_per_class,
            base_length: 160,
            speed_ranges: vec![[1.0, 1.0]],
            amplitude: [4.0, 6.0],
            ..SynthSpec::default()
        }
    }

    pub fn velocity(classes: usize, clips_per_class: usize) -> Self {
        SynthSpec {
            classes,
            clips_per_class,
            ..SynthSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.classes < 2 {
            return bad(format!("synth needs >= 2 classes, got {}", self.classes));
        }
        if self.clips_per_class < 2 {
            return bad(format!("synth needs >= 2 clips per class, got {}", self.clips_per_class));
        }
        if self.mode == SynthMode::Order && !self.classes.is_multiple_of(2) {
            return bad("order mode needs an even number of classes (forward/reversed pairs)".into());
        }
        if self.groups == 0 {
            return bad("groups must be >= 1".into());
        }
        if self.width < 16 || self.height < 16 || self.base_length < 2 {
            return bad("resolution must be at least 16x16 and base_length >= 2".into());
        }
        if self.mode == SynthMode::Velocity && self.classes > PathShape::ALL.len() {
            return bad(format!("velocity mode supports at most {} classes", PathShape::ALL.len()));
        }
        if self.speed_ranges.is_empty() {
            return bad("speed_ranges must not be empty".into());
        }
        for r in &self.speed_ranges {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return bad(format!("invalid speed range {r:?}"));
            }
        }
        for (name, r) in [
            ("amplitude", self.amplitude),
            ("blob_radius", self.blob_radius),
            ("oscillation_period", self.oscillation_period),
        ] {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return bad(format!("invalid {name} range {r:?}"));
            }
        }
        if self.cycles.is_nan() || self.cycles <= 0.0 {
            return bad("cycles must be positive".into());
        }
        Ok(())
    }

    pub fn class_label(&self, class: usize) -> String {
        match self.mode {
            SynthMode::Velocity => PathShape::ALL[class].name().to_string(),
            SynthMode::Order => format!("pair{}_{}", class / 2, if class.is_multiple_of(2) { "fwd" } else { "rev" }),
        }
    }

    pub fn speed_range(&self, class: usize) -> [f64; 2] {
        self.speed_ranges[class % self.speed_ranges.len()]
    }

    /// Frame count of a clip played at `speed`.
    pub fn clip_length(&self, speed: f64) -> usize {
        ((self.base_length - 1) as f64 / speed).floor() as usize + 1
    }
}

/// Everything random about one clip; rendering is a pure function of this.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipParams {
    pub speed: f64,
    pub center: (f64, f64),
    pub rotation: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub blob_radius: f64,
    pub texture_seed: u64,
    /// Order mode: segment boundaries as fractions of the clip, the
    /// half-period counts and initial signs of both gestures.
    pub script: [f64; 4],
    pub half_periods: [u32; 2],
    pub signs: [f64; 2],
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn clip_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ stream) ^ index))
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

impl ClipParams {
    /// Samples the parameters of clip `index` of `class`. In order mode the
    /// two classes of a pair share parameters clip for clip.
    pub fn sample(spec: &SynthSpec, seed: u64, class: usize, index: usize) -> ClipParams {
        let stream = match spec.mode {
            SynthMode::Velocity => class as u64,
            SynthMode::Order => (class / 2) as u64,
        };
        let mut rng = clip_rng(seed, stream, index as u64);
        let range = spec.speed_range(class);
        let speed = if spec.group_tempo {
            let band = (index % spec.groups) as f64 + rng.random_range(0.0..1.0);
            range[0] + (range[1] - range[0]) * band / spec.groups as f64
        } else {
            uniform(&mut rng, range)
        };
        let amplitude = uniform(&mut rng, spec.amplitude);
        let blob_radius = uniform(&mut rng, spec.blob_radius);
        let margin_x = (spec.width as f64 / 2.0 - amplitude - blob_radius - 2.0).max(0.0);
        let margin_y = (spec.height as f64 / 2.0 - amplitude - blob_radius - 2.0).max(0.0);
        let center = (
            spec.width as f64 / 2.0 + rng.random_range(-1.0..=1.0) * margin_x,
            spec.height as f64 / 2.0 + rng.random_range(-1.0..=1.0) * margin_y,
        );
        // Order-mode gestures are told apart by their axes, so only a small
        // jitter is allowed there; a full turn would map A onto B.
        let rotation = match spec.mode {
            SynthMode::Velocity => rng.random_range(0.0..2.0 * PI),
            SynthMode::Order => rng.random_range(-0.25..0.25),
        };
        let phase = rng.random_range(0.0..1.0);
        let texture_seed = rng.random();

        // rest | gesture A | rest | gesture B | rest
        // At the order-mode length every rest outlasts a default-length track,
        // so no trajectory sees both gestures. Rest lengths vary by more than
        // a track's lifetime so that gesture onsets carry no fixed phase
        // relative to the tracker's seeding cycle.
        let rest = [0.0; 3].map(|_: f64| rng.random_range(0.14..0.30));
        let gest = [0.0; 2].map(|_: f64| rng.random_range(0.22..0.26));
        let total: f64 = rest.iter().sum::<f64>() + gest.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut script = [0.0; 4];
        for (i, len) in [rest[0], gest[0], rest[1], gest[1]].iter().enumerate() {
            acc += len / total;
            script[i] = acc;
        }
        let mut half_periods = [0u32; 2];
        let mut signs = [1.0; 2];
        let base = (spec.base_length - 1) as f64;
        for g in 0..2 {
            let len = base * gest[g] / total;
            let period = uniform(&mut rng, spec.oscillation_period);
            half_periods[g] = ((2.0 * len / period).round() as u32).max(1);
            signs[g] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        ClipParams {
            speed,
            center,
            rotation,
            phase,
            amplitude,
            blob_radius,
            texture_seed,
            script,
            half_periods,
            signs,
        }
    }
}

/// Value noise in `[0, 1]`: random lattice values every `cell` pixels,
/// bilinearly interpolated.
struct ValueNoise {
    grid: Vec<f64>,
    gw: usize,
    gh: usize,
    cell: f64,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, w: f64, h: f64, cell: f64) -> Self {
        let gw = (w / cell).ceil() as usize + 2;
        let gh = (h / cell).ceil() as usize + 2;
        let grid = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        ValueNoise { grid, gw, gh, cell }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let gx = (x / self.cell).clamp(0.0, (self.gw - 1) as f64 - 1e-9);
        let gy = (y / self.cell).clamp(0.0, (self.gh - 1) as f64 - 1e-9);
        let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
        let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
        let g = |ix: usize, iy: usize| self.grid[iy * self.gw + ix];
        let top = g(x0, y0) * (1.0 - fx) + g(x0 + 1, y0) * fx;
        let bot = g(x0, y0 + 1) * (1.0 - fx) + g(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

struct Scene {
    width: usize,
    height: usize,
    background: Vec<f64>,
    blob: ValueNoise,
    blob_radius: f64,
}

impl Scene {
    fn new(spec: &SynthSpec, params: &ClipParams) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(params.texture_seed);
        let (w, h) = (spec.width as f64, spec.height as f64);
        let coarse = ValueNoise::new(&mut rng, w, h, 7.0);
        let fine = ValueNoise::new(&mut rng, w, h, 3.0);
        let mut background = Vec::with_capacity(spec.width * spec.height);
        for y in 0..spec.height {
            for x in 0..spec.width {
                let v = 0.55 * coarse.at(x as f64, y as f64) + 0.45 * fine.at(x as f64, y as f64);
                background.push(30.0 + 100.0 * v);
            }
        }
        let span = 2.0 * params.blob_radius + 4.0;
        let blob = ValueNoise::new(&mut rng, span, span, 2.5);
        Scene {
            width: spec.width,
            height: spec.height,
            background,
            blob,
            blob_radius: params.blob_radius,
        }
    }

    fn render(&self, cx: f64, cy: f64) -> Vec<u8> {
        let mut px = self.background.clone();
        let r = self.blob_radius;
        let x0 = ((cx - r - 1.0).floor().max(0.0)) as usize;
        let x1 = ((cx + r + 1.0).ceil().min(self.width as f64 - 1.0)).max(0.0) as usize;
        let y0 = ((cy - r - 1.0).floor().max(0.0)) as usize;
        let y1 = ((cy + r + 1.0).ceil().min(self.height as f64 - 1.0)).max(0.0) as usize;
        let off = r + 2.0;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let coverage = (r + 0.5 - (dx * dx + dy * dy).sqrt()).clamp(0.0, 1.0);
                if coverage > 0.0 {
                    let tex = 160.0 + 90.0 * self.blob.at(dx + off, dy + off);
                    let i = y * self.width + x;
                    px[i] = coverage * tex + (1.0 - coverage) * px[i];
                }
            }
        }
        px.into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()
    }
}

/// Blob centre for velocity-mode `shape` at frame `t`.
pub fn velocity_position(spec: &SynthSpec, shape: PathShape, params: &ClipParams, t: usize) -> (f64, f64) {
    let progress = (t as f64 * params.speed / (spec.base_length - 1) as f64).min(1.0);
    let (ux, uy) = shape.point(params.phase + spec.cycles * progress);
    let (s, c) = params.rotation.sin_cos();
    (
        params.center.0 + params.amplitude * (c * ux - s * uy),
        params.center.1 + params.amplitude * (s * ux + c * uy),
    )
}

/// Blob centre for the forward order-mode script at frame `t` of a clip of
/// `len` frames; `pair` selects the gesture axes.
pub fn order_position(params: &ClipParams, pair: usize, t: usize, len: usize) -> (f64, f64) {
    let u = if len > 1 { t as f64 / (len - 1) as f64 } else { 0.0 };
    let bounds = [0.0, params.script[0], params.script[1], params.script[2], params.script[3]];
    let axis0 = params.rotation + pair as f64 * 0.4;
    let mut offset = 0.0;
    let mut axis = axis0;
    for (g, (start, end)) in [(bounds[1], bounds[2]), (bounds[3], bounds[4])].into_iter().enumerate() {
        if u >= start && u < end {
            let local = (u - start) / (end - start);
            // A symmetric Hann envelope starts and ends each gesture at rest.
            let envelope = (PI * local).sin().powi(2);
            offset = params.signs[g] * params.amplitude * envelope * (PI * params.half_periods[g] as f64 * local).sin();
            axis = axis0 + g as f64 * PI / 2.0;
        }
    }
    let (s, c) = axis.sin_cos();
    (params.center.0 + offset * c, params.center.1 + offset * s)
}

/// Renders clip `index` of `class`.
pub fn render_clip(spec: &SynthSpec, class: usize, index: usize, seed: u64) -> Result<(VideoClip, ClipParams)> {
    let params = ClipParams::sample(spec, seed, class, index);
    let clip = render_with_params(spec, class, &params, format!("{}_{index:03}", spec.class_label(class)))?;
    Ok((clip, params))
}

pub fn render_with_params(spec: &SynthSpec, class: usize, params: &ClipParams, id: String) -> Result<VideoClip> {
    let scene = Scene::new(spec, params);
    let len = spec.clip_length(params.speed);
    let frames: Vec<Vec<u8>> = match spec.mode {
        SynthMode::Velocity => {
            let shape = PathShape::ALL[class];
            (0..len)
                .map(|t| {
                    let (x, y) = velocity_position(spec, shape, params, t);
                    scene.render(x, y)
                })
                .collect()
        }
        SynthMode::Order => {
            let mut frames: Vec<Vec<u8>> = (0..len)
                .map(|t| {
                    let (x, y) = order_position(params, class / 2, t, len);
                    scene.render(x, y)
                })
                .collect();
            if class % 2 == 1 {
                frames.reverse();
            }
            frames
        }
    };
    VideoClip::new(spec.width, spec.height, frames, id)
}

/// Renders the whole dataset in memory. Entries are listed class-major with
/// clip paths `clips/<label>_<index>.vclp`.
pub fn render_synthetic_dataset(spec: &SynthSpec, seed: u64) -> Result<(DatasetManifest, Vec<VideoClip>)> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.classes)
        .flat_map(|c| (0..spec.clips_per_class).map(move |i| (c, i)))
        .collect();
    let clips = par::map(Execution::Parallel, &jobs, |&(c, i)| render_clip(spec, c, i, seed).map(|r| r.0))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let entries = jobs
        .iter()
        .zip(&clips)
        .map(|(&(c, i), clip)| ManifestEntry {
            clip_path: format!("clips/{}_{i:03}.vclp", spec.class_label(c)).into(),
            label: spec.class_label(c),
            group: format!("g{}", i % spec.groups),
            duration_frames: clip.len() as u64,
        })
        .collect();
    let manifest = DatasetManifest {
        entries,
        metric: Metric::Accuracy,
        root: Default::default(),
    };
    Ok((manifest, clips))
}

/// Renders the dataset and writes `manifest.tsv` plus one `VCLP` container
/// per clip under `out_dir`.
pub fn generate_synthetic_dataset(spec: &SynthSpec, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    let (mut manifest, clips) = render_synthetic_dataset(spec, seed)?;
    manifest.root = out_dir.to_path_buf();
    for (e, clip) in manifest.entries.iter().zip(&clips) {
        write_clip_container(clip, &out_dir.join(&e.clip_path))?;
    }
    manifest.save(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: SynthMode) -> SynthSpec {
        let mut s = match mode {
            SynthMode::Velocity => SynthSpec::velocity(3, 2),
            SynthMode::Order => SynthSpec::order(2, 2),
        };
        s.width = 40;
        s.height = 40;
        s.base_length = 40;
        s.amplitude = [5.0, 6.0];
        s.blob_radius = [3.0, 4.0];
        s
    }

    /// Intensity-weighted centroid of pixels brighter than any background value.
    fn centroid(clip: &VideoClip, t: usize) -> (f64, f64) {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for y in 0..clip.height() {
            for x in 0..clip.width() {
                let v = clip.pixel(t, x, y) as f64;
                if v > 145.0 {
                    let w = v - 145.0;
                    sx += w * x as f64;
                    sy += w * y as f64;
                    sw += w;
                }
            }
        }
        (sx / sw, sy / sw)
    }

    #[test]
    fn deterministic_on_disk() {
        let spec = small(SynthMode::Velocity);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ma = generate_synthetic_dataset(&spec, 7, a.path()).unwrap();
        generate_synthetic_dataset(&spec, 7, b.path()).unwrap();
        let read = |d: &Path, p: &Path| std::fs::read(d.join(p)).unwrap();
        assert_eq!(read(a.path(), "manifest.tsv".as_ref()), read(b.path(), "manifest.tsv".as_ref()));
        for e in &ma.entries {
            assert_eq!(read(a.path(), &e.clip_path), read(b.path(), &e.clip_path));
        }
        let (_, other) = render_synthetic_dataset(&spec, 8).unwrap();
        let (_, same) = render_synthetic_dataset(&spec, 7).unwrap();
        assert_ne!(other, same);
    }

    #[test]
    fn manifest_groups_and_durations() {
        let mut spec = small(SynthMode::Velocity);
        spec.clips_per_class = 4;
        spec.groups = 3;
        let (m, clips) = render_synthetic_dataset(&spec, 1).unwrap();
        assert_eq!(m.entries.len(), 12);
        assert_eq!(m.classes().len(), 3);
        for (k, (e, c)) in m.entries.iter().zip(&clips).enumerate() {
            assert_eq!(e.duration_frames as usize, c.len());
            assert_eq!(e.group, format!("g{}", (k % 4) % 3));
        }
    }

    #[test]
    fn order_pair_is_frame_reversal() {
        let spec = small(SynthMode::Order);
        for i in 0..2 {
            let (fwd, _) = render_clip(&spec, 0, i, 3).unwrap();
            let (rev, _) = render_clip(&spec, 1, i, 3).unwrap();
            assert_eq!(fwd.len(), rev.len());
            let t_len = fwd.len();
            for t in 0..t_len {
                assert_eq!(rev.frame(t), fwd.frame(t_len - 1 - t));
            }
        }
    }

    #[test]
    fn order_script_moves_then_rests() {
        let spec = small(SynthMode::Order);
        let p = ClipParams::sample(&spec, 11, 0, 0);
        let len = spec.clip_length(1.0);
        let start = order_position(&p, 0, 0, len);
        let end = order_position(&p, 0, len - 1, len);
        assert_eq!(start, p.center);
        assert_eq!(end, p.center);
        let moved = (0..len)
            .map(|t| order_position(&p, 0, t, len))
            .filter(|&q| (q.0 - p.center.0).hypot(q.1 - p.center.1) > 1.0)
            .count();
        assert!(moved > len / 5, "{moved} of {len}");
    }

    #[test]
    fn group_tempo_gives_each_group_its_own_band() {
        let mut spec = SynthSpec::velocity(3, 30);
        spec.groups = 3;
        spec.group_tempo = true;
        for class in 0..3 {
            for i in 0..30 {
                let s = ClipParams::sample(&spec, 2, class, i).speed;
                let band = (i % 3) as f64;
                let (lo, hi) = (1.0 + 2.0 * band / 3.0, 1.0 + 2.0 * (band + 1.0) / 3.0);
                assert!(s >= lo - 1e-12 && s <= hi + 1e-12, "clip {i}: {s}");
            }
        }
    }

    #[test]
    fn order_rests_outlast_a_default_track() {
        let spec = SynthSpec::order(2, 4);
        let len = spec.clip_length(1.0);
        let window = crate::features::ExtractParams::default().track_length + 1;
        for i in 0..20 {
            let p = ClipParams::sample(&spec, 9, 0, i);
            let edges = [0.0, p.script[0], p.script[1], p.script[2], p.script[3], 1.0];
            for r in [(edges[0], edges[1]), (edges[2], edges[3]), (edges[4], edges[5])] {
                assert!((r.1 - r.0) * (len - 1) as f64 > window as f64, "{r:?}");
            }
        }
    }

    #[test]
    fn speed_factor_scales_displacement() {
        let mut spec = small(SynthMode::Velocity);
        spec.base_length = 41;
        spec.speed_ranges = vec![[1.0, 1.0]];
        let base = ClipParams::sample(&spec, 5, 0, 0);
        let fast = ClipParams { speed: 2.0, ..base.clone() };
        let c1 = render_with_params(&spec, 0, &base, "s1".into()).unwrap();
        let c2 = render_with_params(&spec, 0, &fast, "s2".into()).unwrap();
        assert_eq!(c1.len(), 41);
        assert_eq!(c2.len(), 21);
        // Same path: frame t of the fast clip shows frame 2t of the slow one.
        for t in 0..c2.len() {
            let (a, b) = (centroid(&c2, t), centroid(&c1, 2 * t));
            assert!((a.0 - b.0).abs() < 0.3 && (a.1 - b.1).abs() < 0.3, "t={t}: {a:?} vs {b:?}");
        }
        let step = |c: &VideoClip, t: usize| {
            let (a, b) = (centroid(c, t), centroid(c, t + 1));
            (b.0 - a.0).hypot(b.1 - a.1)
        };
        let slow: f64 = (0..c2.len() - 1).map(|t| step(&c1, 2 * t) + step(&c1, 2 * t + 1)).sum();
        let quick: f64 = (0..c2.len() - 1).map(|t| step(&c2, t)).sum();
        let per_frame_ratio = (quick / (c2.len() - 1) as f64) / (slow / (2 * (c2.len() - 1)) as f64);
        assert!((per_frame_ratio - 2.0).abs() < 0.15, "ratio {per_frame_ratio}");
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = small(SynthMode::Velocity);
        s.classes = 1;
        assert!(s.validate().is_err());
        let mut s = small(SynthMode::Order);
        s.classes = 3;
        assert!(s.validate().is_err());
        let mut s = small(SynthMode::Velocity);
        s.clips_per_class = 1;
        assert!(s.validate().is_err());
    }
}
