//! Mask schedules, the variation-backend contract, and the iterative
//! generation pipeline.

mod masks;
mod pipeline;
mod stochastic;
mod synth;

pub use masks::{
    all_builtin_masks, builtin_mask_set, mask_from_violations, next_mask_indices,
    set_for_iteration, RepairMask, MASKS_PER_SET, MIN_MASK_GRID,
};
pub use pipeline::{
    denoise_ablation, run_pipeline, DenoiseAblation, GenerationConfig, IterationStats, Pipeline,
    PipelineOutput, SnapshotStats, restore_known,
};
pub use stochastic::{stochastic_vary, StochasticBackend, StochasticParams, BACKEND_NAME};
pub use synth::synthetic_uni_starters;

use crate::error::{Error, Result};
use crate::grid::{assert_mask_preserving, MaskSpec, PatternGrid};

/// One call to a variation backend.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendRequest {
    pub id: u64,
    pub pattern: PatternGrid,
    pub mask: MaskSpec,
    pub num_variations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendResponse {
    Variations { id: u64, variations: Vec<PatternGrid> },
    Error { id: u64, error: String },
}

impl BackendResponse {
    pub fn id(&self) -> u64 {
        match self {
            Self::Variations { id, .. } | Self::Error { id, .. } => *id,
        }
    }
}

/// Anything that can produce masked variations of a pattern.
pub trait VariationBackend: Send + Sync {
    fn name(&self) -> &str;
    fn vary(&self, req: &BackendRequest) -> Result<Vec<PatternGrid>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    WrongShape,
    OutsideMask,
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        self == Self::Accept
    }
}

/// Shape and mask-preservation check for one variation.
pub fn check_variation(parent: &PatternGrid, mask: &MaskSpec, v: &PatternGrid) -> Verdict {
    if v.width() != parent.width() || v.height() != parent.height() || v.pitch_nm() != parent.pitch_nm() {
        return Verdict::WrongShape;
    }
    match assert_mask_preserving(parent, v, mask) {
        Ok(true) => Verdict::Accept,
        Ok(false) => Verdict::OutsideMask,
        Err(_) => Verdict::WrongShape,
    }
}

/// Per-variation verdicts for a response to `req`.
pub fn validate_variation(req: &BackendRequest, resp: &BackendResponse) -> Result<Vec<Verdict>> {
    if resp.id() != req.id {
        return Err(Error::Protocol {
            path: "id".into(),
            msg: format!("expected {}, got {}", req.id, resp.id()),
        });
    }
    match resp {
        BackendResponse::Error { error, .. } => Err(Error::Backend(error.clone())),
        BackendResponse::Variations { variations, .. } => Ok(variations
            .iter()
            .map(|v| check_variation(&req.pattern, &req.mask, v))
            .collect()),
    }
}
