//! Frame sequences: loading, temporal transforms, manifests and the
//! synthetic benchmark generator.

mod clip;
mod io;
mod manifest;
pub mod synth;

pub use clip::{temporal_smooth, temporal_subsample, VideoClip};
pub use io::{load_frame_sequence, read_clip_container, write_clip_container, write_pgm_dir, CLIP_MAGIC};
pub use manifest::{DatasetManifest, ManifestEntry, Metric};
pub use synth::{generate_synthetic_dataset, render_synthetic_dataset, SynthMode, SynthSpec};
