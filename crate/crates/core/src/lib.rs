//! Clip-level losses, gradient checking, retrieval metrics and inference for
//! temporal moment retrieval with multiple answer segments.

pub mod error;
pub mod gradcheck;
pub mod inference;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod pairset;
pub mod toy;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ClipEmbeddings, GroundTruthEntry, LossResult, LossWeights, MarginParams, PredictionWindow, QueryId, Segment,
    SegmentIndices,
};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/pairs.md")]
    pub mod pairs {}
    #[doc = include_str!("../../../book/src/losses.md")]
    pub mod losses {}
    #[doc = include_str!("../../../book/src/gradcheck.md")]
    pub mod gradcheck {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub mod metrics {}
    #[doc = include_str!("../../../book/src/inference.md")]
    pub mod inference {}
    #[doc = include_str!("../../../book/src/toy.md")]
    pub mod toy {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
