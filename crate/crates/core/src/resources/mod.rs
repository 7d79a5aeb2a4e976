//! Read-only lexical resources: corpus frequency tables and word embeddings.

mod embeddings;
mod frequency;

pub use embeddings::{cosine, load_embeddings, parse_embeddings, EmbeddingTable};
pub use frequency::{
    build_frequency_table, count_tokens, load_frequency_table, open_corpus, parse_frequency_table,
    save_frequency_table, write_frequency_table, FrequencyTable, DEFAULT_LINE_LIMIT,
};
