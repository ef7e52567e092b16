use crate::error::{Error, Result};

/// A grayscale frame sequence. Frames are row-major `height × width` planes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoClip {
    width: usize,
    height: usize,
    frames: Vec<Vec<u8>>,
    source_id: String,
}

impl VideoClip {
    pub fn new(width: usize, height: usize, frames: Vec<Vec<u8>>, source_id: impl Into<String>) -> Result<Self> {
        let source_id = source_id.into();
        if frames.is_empty() {
            return Err(Error::EmptyClip(source_id));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!("clip {source_id} has zero-sized frames")));
        }
        for (index, f) in frames.iter().enumerate() {
            if f.len() != width * height {
                return Err(Error::Format {
                    kind: "frame",
                    origin: source_id,
                    detail: format!("frame {index} has {} bytes, expected {}", f.len(), width * height),
                });
            }
        }
        Ok(VideoClip {
            width,
            height,
            frames,
            source_id,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; a clip holds at least one frame.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[Vec<u8>] {
        &self.frames
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn pixel(&self, t: usize, x: usize, y: usize) -> u8 {
        self.frames[t][y * self.width + x]
    }

    /// The clip with frame order reversed.
    pub fn reversed(&self) -> VideoClip {
        let mut frames = self.frames.clone();
        frames.reverse();
        VideoClip {
            frames,
            ..self.clone()
        }
    }
}

/// Keeps frames `0, stride, 2·stride, …`; the result has `ceil(T / stride)` frames.
pub fn temporal_subsample(clip: &VideoClip, stride: usize) -> Result<VideoClip> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    Ok(VideoClip {
        width: clip.width,
        height: clip.height,
        frames: clip.frames.iter().step_by(stride).cloned().collect(),
        source_id: clip.source_id.clone(),
    })
}

/// Truncated (±3σ) temporal Gaussian kernel; index `r` is the centre tap.
pub(crate) fn gaussian_taps(alpha: f64) -> Vec<f64> {
    let radius = (3.0 * alpha).ceil() as usize;
    (0..=2 * radius)
        .map(|i| {
            let k = i as f64 - radius as f64;
            (-k * k / (2.0 * alpha * alpha)).exp()
        })
        .collect()
}

/// Per-pixel temporal Gaussian smoothing with standard deviation `alpha`
/// frames. The kernel is truncated at `3·alpha` and renormalized where it
/// overhangs the clip ends. `alpha == 0` returns the clip unchanged.
pub fn temporal_smooth(clip: &VideoClip, alpha: f64) -> Result<VideoClip> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("smoothing scale must be finite and >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(clip.clone());
    }
    let taps = gaussian_taps(alpha);
    let radius = (taps.len() / 2) as isize;
    let t_len = clip.len() as isize;
    let n_px = clip.width * clip.height;
    let mut out = Vec::with_capacity(clip.len());
    let mut acc = vec![0f64; n_px];
    for t in 0..t_len {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut norm = 0.0;
        for (i, &w) in taps.iter().enumerate() {
            let s = t + i as isize - radius;
            if s < 0 || s >= t_len {
                continue;
            }
            norm += w;
            for (a, &p) in acc.iter_mut().zip(&clip.frames[s as usize]) {
                *a += w * p as f64;
            }
        }
        out.push(acc.iter().map(|a| (a / norm).round().clamp(0.0, 255.0) as u8).collect());
    }
    Ok(VideoClip {
        width: clip.width,
        height: clip.height,
        frames: out,
        source_id: clip.source_id.clone(),
    })
}
