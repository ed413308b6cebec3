//! Black-box generative text steganography over LLM user interfaces.
//!
//! Secret bits are carried by keyword choices: a shared catalog of subject,
//! predicate, object, and emotion keywords is expanded into fixed index
//! spaces (2^18 / 2^18 / 2^18 / 2^10), and each generated sentence encodes
//! one 64-bit chunk as four location indices. The within-block offsets are
//! XOR-masked with a key schedule derived from a pre-shared 64-bit key and
//! the sentence's release timecode, and travel alongside the text in an
//! envelope. A reject-sampling loop only releases sentences whose keywords
//! survive LLM extraction.

pub mod augment;
pub mod catalog;
pub mod cipher;
pub mod codec;
pub mod metrics;
pub mod pipeline;
pub mod provider;

pub use augment::{augment, AugmentedCatalog, AugmentedSubset};
pub use catalog::{KeywordCatalog, KeywordSubset, SubsetRole};
pub use cipher::{ChunkGroup, PrivateKey, StampSet, TimeCode};
pub use codec::SentencePlan;
pub use pipeline::{Envelope, RunReport, SessionConfig};
pub use provider::{LlmProvider, MockBehavior, MockProvider, PromptLibrary};
