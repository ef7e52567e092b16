//! Temporal representations for action recognition.
//!
//! The crate builds a compact dense-trajectory / Fisher-vector / linear-SVM
//! pipeline and three temporal extensions on top of it:
//!
//! * **Temporal scale pyramid** ([`pyramid`]): features are extracted from the
//!   clip at frame strides `1..=V+1` and unioned, so actions performed at
//!   different velocities share local features.
//! * **Temporal extension descriptor** ([`ted`]): every local descriptor gets
//!   one extra dimension holding its normalized temporal position.
//! * **Temporal division pyramid** ([`division`]): the clip is cut into
//!   `1, 2, 4, 8` temporal regions which are encoded separately and
//!   concatenated.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.

pub mod binio;
pub mod division;
pub mod encoding;
pub mod error;
pub mod features;
pub mod learn;
pub mod media;
pub mod par;
pub mod pipeline;
pub mod pyramid;
pub mod ted;

pub use error::{Error, Result};
