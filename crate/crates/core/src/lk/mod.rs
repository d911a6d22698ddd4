//! Lucas–Kanade machinery: sparse pyramidal point tracking and dense
//! inverse-compositional alignment with an NCC objective.

mod ic;
mod klt;

pub use ic::{delta_warp, ic_refine, inverse_delta_warp, IcConfig, IcResult, IcTemplate};
pub use klt::{klt_track, klt_track_pyramids, KltConfig, Pyramid, TrackStatus, TrackedPoint};

use thiserror::Error;

use crate::geom::GeomError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LkError {
    #[error("only {active} active template pixels, need at least {needed}")]
    TooFewPixels { active: usize, needed: usize },
    #[error("image contains non-finite values")]
    NonFiniteImage,
    #[error("template has no intensity variation over its support")]
    DegenerateTemplate,
    #[error("mask has {got} entries, template has {expected} pixels")]
    MaskSize { expected: usize, got: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
}
