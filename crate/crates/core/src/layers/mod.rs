//! Forward and backward passes of the architectural blocks.
//!
//! Every backward pass consumes the cache produced by its forward call and
//! accumulates parameter gradients into a zeroed copy of the parameters.

mod attention;
mod embedding;
mod encoder;
mod gru;
mod head;
mod summary;

pub use attention::{combine, context_from_scores, AttentionCache, AttentionHead, AttentionOutput, AttentionParams};
pub use embedding::EmbeddingTable;
pub use encoder::{BiGruCache, BiGruParams};
pub use gru::{GruCache, GruCellParams, GruInputGrads};
pub use head::{FeedforwardHead, HeadCache};
pub use summary::SummaryProjection;
