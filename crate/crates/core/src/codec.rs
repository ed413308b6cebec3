//! The steganographic mapping proper: chunk groups to keyword plans and back.
//!
//! A 64-bit chunk group is read directly as four location indices into the
//! augmented subsets. What travels on the channel is the keyword choice plus
//! the masked within-block offset (the stamp); recovery re-derives the
//! location index as `block base + offset`.

use thiserror::Error;

use crate::augment::{AugmentError, AugmentedCatalog};
use crate::catalog::SubsetRole;
use crate::cipher::{
    self, decrypt_offsets, encrypt_offsets, ChunkGroup, CipherError, PrivateKey, StampSet,
    TimeCode,
};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("keyword '{surface}' not in the {role} subset")]
    UnknownKeyword { role: SubsetRole, surface: String },
    #[error("{role} offset {offset} out of range for keyword '{surface}' (block length {length}): wrong key, wrong timecode, or corrupted stamp")]
    OffsetOutOfRange {
        role: SubsetRole,
        surface: String,
        offset: u32,
        length: u32,
    },
    #[error("message needs {expected} timecodes, got {got}")]
    TimeCodeCountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

/// One planned keyword: its surface, location index, and block offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedKeyword {
    pub surface: String,
    pub lc_idx: u32,
    pub re_idx: u32,
}

/// The four keyword choices carrying one 64-bit chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePlan {
    pub subject: PlannedKeyword,
    pub predicate: PlannedKeyword,
    pub object: PlannedKeyword,
    pub emotion: PlannedKeyword,
}

impl SentencePlan {
    pub fn surfaces(&self) -> [&str; 4] {
        [
            &self.subject.surface,
            &self.predicate.surface,
            &self.object.surface,
            &self.emotion.surface,
        ]
    }

    pub fn offsets(&self) -> ChunkGroup {
        ChunkGroup {
            subject_idx: self.subject.re_idx,
            predicate_idx: self.predicate.re_idx,
            object_idx: self.object.re_idx,
            emotion_idx: self.emotion.re_idx,
        }
    }
}

fn plan_field(
    augs: &AugmentedCatalog,
    role: SubsetRole,
    lc_idx: u32,
) -> Result<PlannedKeyword, CodecError> {
    let aug = augs.subset(role);
    let surface = aug.keyword_at(lc_idx)?.to_string();
    let block = aug.block_of(&surface)?;
    Ok(PlannedKeyword {
        re_idx: lc_idx - block.base,
        lc_idx,
        surface,
    })
}

/// Map a chunk group onto keyword choices. The chunk fields are the location
/// indices; widths must match the augmented capacities.
pub fn plan_sentence(chunk: ChunkGroup, augs: &AugmentedCatalog) -> Result<SentencePlan, CodecError> {
    Ok(SentencePlan {
        subject: plan_field(augs, SubsetRole::Subject, chunk.subject_idx)?,
        predicate: plan_field(augs, SubsetRole::Predicate, chunk.predicate_idx)?,
        object: plan_field(augs, SubsetRole::Object, chunk.object_idx)?,
        emotion: plan_field(augs, SubsetRole::Emotion, chunk.emotion_idx)?,
    })
}

fn recover_field(
    augs: &AugmentedCatalog,
    role: SubsetRole,
    surface: &str,
    offset: u32,
) -> Result<u32, CodecError> {
    let aug = augs.subset(role);
    let block = aug.block_of(surface).map_err(|_| CodecError::UnknownKeyword {
        role,
        surface: surface.to_string(),
    })?;
    if offset >= block.length {
        return Err(CodecError::OffsetOutOfRange {
            role,
            surface: surface.to_string(),
            offset,
            length: block.length,
        });
    }
    Ok(block.base + offset)
}

/// Rebuild a chunk group from extracted surfaces and the envelope stamps.
pub fn recover_chunk(
    surfaces: [&str; 4],
    stamps: StampSet,
    key: PrivateKey,
    t: TimeCode,
    augs: &AugmentedCatalog,
) -> Result<ChunkGroup, CodecError> {
    let offsets = decrypt_offsets(stamps, key, t);
    Ok(ChunkGroup {
        subject_idx: recover_field(augs, SubsetRole::Subject, surfaces[0], offsets.subject_idx)?,
        predicate_idx: recover_field(
            augs,
            SubsetRole::Predicate,
            surfaces[1],
            offsets.predicate_idx,
        )?,
        object_idx: recover_field(augs, SubsetRole::Object, surfaces[2], offsets.object_idx)?,
        emotion_idx: recover_field(augs, SubsetRole::Emotion, surfaces[3], offsets.emotion_idx)?,
    })
}

/// Number of sentences a payload of `len` bytes occupies.
pub fn sentence_count(len: usize) -> usize {
    (32 + 8 * len + 63) / 64
}

/// Frame a payload and plan one sentence per 64-bit chunk, stamping each
/// with its own timecode.
pub fn embed_message(
    payload: &[u8],
    key: PrivateKey,
    timecodes: &[TimeCode],
    augs: &AugmentedCatalog,
) -> Result<Vec<(SentencePlan, StampSet)>, CodecError> {
    let frame = cipher::frame(payload);
    let chunks = cipher::split_chunks(&frame);
    if timecodes.len() != chunks.len() {
        return Err(CodecError::TimeCodeCountMismatch {
            expected: chunks.len(),
            got: timecodes.len(),
        });
    }
    chunks
        .into_iter()
        .zip(timecodes)
        .map(|(chunk, &t)| {
            let plan = plan_sentence(chunk, augs)?;
            let stamps = encrypt_offsets(plan.offsets(), key, t);
            Ok((plan, stamps))
        })
        .collect()
}

/// Inverse of [`embed_message`] + framing: sentences must arrive in original
/// order (the envelope carries sequence numbers).
pub fn decode_message(
    sentences: &[([&str; 4], StampSet, TimeCode)],
    key: PrivateKey,
    augs: &AugmentedCatalog,
) -> Result<Vec<u8>, CodecError> {
    if sentences.is_empty() {
        return Err(CipherError::TruncatedStream { need: 8, have: 0 }.into());
    }
    let chunks = sentences
        .iter()
        .map(|&(surfaces, stamps, t)| recover_chunk(surfaces, stamps, key, t, augs))
        .collect::<Result<Vec<_>, _>>()?;
    let frame = cipher::join_chunks(&chunks)?;
    Ok(cipher::deframe(&frame)?)
}
