//! Fingerprint identification engine fusing local (minutiae, virtual minutiae)
//! and global (fixed-length embedding) similarity in a three-stage pruned search.
//!
//! The crate is organized around the lifecycle of a search:
//! templates ([`template`], [`codec`], [`ingest`]) are produced by a provider
//! ([`synth`]) or ingested from external extractor output, compared with the
//! local matcher ([`matcher`]) and global cosine, aligned ([`align`]) for
//! re-embedding, and ranked by the staged engine ([`search`]). Results are
//! scored by the evaluation metrics in [`metrics`]. Classical image operations
//! (mask post-processing, orientation fields, virtual-minutia placement) live
//! in [`mask`].

pub mod align;
pub mod codec;
pub mod ingest;
pub mod mask;
pub mod matcher;
pub mod metrics;
pub mod search;
pub mod synth;
pub mod template;
