//! Corpus ingestion and the on-disk artifacts: embeddings, quality scores,
//! shards, selections and `key = value` metadata.

mod container;
mod embeddings;
mod kv;
mod quality;
mod selection;
mod shard;

pub(crate) use container::{check_payload_len, Header, HEADER_LEN};
pub(crate) use quality::write_text;

pub(crate) use embeddings::dot;
pub use embeddings::{
    decode_embeddings, encode_embeddings, load_embeddings, normalize_rows, write_embeddings,
    EmbeddingMatrix, EMBEDDING_MAGIC,
};
pub use kv::KvConfig;
pub use quality::{
    compose_quality, load_scores, midpoint_ranks, prune_by_quality, quantile_map,
    write_composite_scores, write_raw_scores, QualityTable, RawScores, COMPOSITE_MAX, EDU_MAX,
};
pub use selection::{
    metadata_path, read_selection, read_selection_result, write_selection, SelectionResult,
};
pub use shard::{split_shards, Shard};
