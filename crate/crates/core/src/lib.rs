//! Layout-pattern toolkit: bitmap codecs, squish encoding, pixel design-rule
//! checking, template denoising, diversity metrics, representative selection,
//! a generate/denoise/check loop and a constraint-based legalizer.

pub mod denoise;
pub mod drc;
pub mod error;
pub mod genloop;
pub mod grid;
pub mod legalizer;
pub mod metrics;
pub mod par;
pub mod proto;
pub mod seed;
pub mod selection;
pub mod squish;

pub use error::{Error, Result};
pub use grid::{MaskSetId, MaskSpec, PatternGrid, Rect};
