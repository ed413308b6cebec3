//! End-to-end orchestration: plan, generate, verify by extraction, and on
//! reject obtain feedback and escalate the prompts before regenerating.
//!
//! An envelope is only ever emitted after one full extraction pass returned
//! exactly the planned keyword tuple, so whatever the provider generated is
//! known-recoverable at emission time.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentedCatalog;
use crate::catalog::{CatalogError, KeywordCatalog};
use crate::cipher::{self, encrypt_offsets, CipherError, PrivateKey, StampSet, TimeCode};
use crate::codec::{self, CodecError};
use crate::provider::{
    self, ExtractionResult, LlmProvider, PromptLibrary, PromptRole, ProviderError,
};

pub const ENVELOPE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("sentence {sentence}: no accepted generation after {attempts} attempts")]
    MaxRejectionsExceeded { sentence: usize, attempts: u32 },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error("envelope {seq} was made with catalog {envelope}, loaded catalog is {catalog}")]
    FingerprintMismatch {
        seq: u32,
        envelope: String,
        catalog: String,
    },
    #[error("envelope sequence incomplete: missing {0}")]
    MissingSequence(u32),
    #[error("duplicate envelope sequence number {0}")]
    DuplicateSequence(u32),
    #[error("unsupported envelope version {0}")]
    VersionUnsupported(u32),
    #[error("envelope {seq}: extraction failed: {raw}")]
    ExtractionFailed { seq: u32, raw: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed envelope record: {0}")]
    Schema(String),
}

/// One stego unit as it travels on the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub version: u32,
    pub seq: u32,
    pub stego_text: String,
    pub timecode: TimeCode,
    pub stamps: StampSet,
    pub fingerprint: String,
    pub theme: String,
}

/// Wire form: one JSON object per line, fixed field order, timecode and
/// stamps as their fixed-width text encodings.
#[derive(Serialize, Deserialize)]
struct EnvelopeWire {
    version: u32,
    seq: u32,
    stego_text: String,
    timecode: String,
    stamps: String,
    fingerprint: String,
    theme: String,
}

impl Envelope {
    fn to_wire(&self) -> EnvelopeWire {
        EnvelopeWire {
            version: self.version,
            seq: self.seq,
            stego_text: self.stego_text.clone(),
            timecode: self.timecode.format(),
            stamps: self.stamps.format(),
            fingerprint: self.fingerprint.clone(),
            theme: self.theme.clone(),
        }
    }

    fn from_wire(wire: EnvelopeWire) -> Result<Envelope, PipelineError> {
        if wire.version != ENVELOPE_VERSION {
            return Err(PipelineError::VersionUnsupported(wire.version));
        }
        let timecode = TimeCode::parse(&wire.timecode)
            .map_err(|e| PipelineError::Schema(format!("bad timecode '{}': {e}", wire.timecode)))?;
        let stamps = StampSet::parse(&wire.stamps)
            .ok_or_else(|| PipelineError::Schema(format!("bad stamps '{}'", wire.stamps)))?;
        Ok(Envelope {
            version: wire.version,
            seq: wire.seq,
            stego_text: wire.stego_text,
            timecode,
            stamps,
            fingerprint: wire.fingerprint,
            theme: wire.theme,
        })
    }
}

/// Source of release timecodes.
pub enum Clock {
    /// Wall clock, UTC, second granularity.
    System,
    /// Fixed start advancing `step_secs` per sentence; reproducible runs.
    Fixed { next: u64, step_secs: u64 },
}

impl Clock {
    pub fn fixed(start: TimeCode, step_secs: u64) -> Clock {
        Clock::Fixed {
            next: timecode_to_secs(start),
            step_secs,
        }
    }

    fn now(&mut self) -> TimeCode {
        match self {
            Clock::System => {
                let now = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .expect("clock before epoch")
                    .as_secs();
                secs_to_timecode(now)
            }
            Clock::Fixed { next, step_secs } => {
                let t = secs_to_timecode(*next);
                *next += *step_secs;
                t
            }
        }
    }
}

/// Civil-from-days conversion (Howard Hinnant's algorithm), year folded to 0-99.
fn secs_to_timecode(epoch_secs: u64) -> TimeCode {
    let days = (epoch_secs / 86_400) as i64;
    let rem = epoch_secs % 86_400;
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if m <= 2 { y + 1 } else { y };
    TimeCode::new(
        (year % 100) as u8,
        m as u8,
        d as u8,
        (rem / 3600) as u8,
        ((rem / 60) % 60) as u8,
        (rem % 60) as u8,
    )
    .expect("calendar conversion is in range")
}

/// Inverse of [`secs_to_timecode`] for two-digit years, anchored at 2000.
fn timecode_to_secs(t: TimeCode) -> u64 {
    let y = 2000 + t.yy as i64;
    let (y, m) = if t.mm <= 2 { (y - 1, t.mm as i64 + 9) } else { (y, t.mm as i64 - 3) };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let doy = (153 * m + 2) / 5 + t.dd as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    let days = era * 146_097 + doe - 719_468;
    days as u64 * 86_400 + t.hh as u64 * 3600 + t.mi as u64 * 60 + t.ss as u64
}

/// Per-run settings.
pub struct SessionConfig {
    pub max_iterations: u32,
    pub max_len: u32,
    pub theme: String,
    pub clock: Clock,
}

impl SessionConfig {
    pub fn new(theme: impl Into<String>) -> SessionConfig {
        SessionConfig {
            max_iterations: 8,
            max_len: 30,
            theme: theme.into(),
            clock: Clock::System,
        }
    }
}

/// What happened during one embed run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub per_sentence_iterations: Vec<u32>,
    pub reject_rate: f64,
    pub final_revisions: BTreeMap<&'static str, u32>,
    pub total_words: u64,
    pub embedded_bits: u64,
    pub payload_bytes: u64,
}

impl RunReport {
    pub fn mean_iterations(&self) -> f64 {
        let n = self.per_sentence_iterations.len().max(1) as f64;
        self.per_sentence_iterations.iter().map(|&i| i as f64).sum::<f64>() / n
    }
}

fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Run the reject-sampling loop over every chunk of the payload.
pub fn embed_pipeline(
    payload: &[u8],
    key: PrivateKey,
    provider: &mut dyn LlmProvider,
    catalog: &KeywordCatalog,
    session: &mut SessionConfig,
) -> Result<(Vec<Envelope>, RunReport), PipelineError> {
    catalog.validate()?;
    assert!(session.max_iterations >= 1);
    let augs = AugmentedCatalog::from_catalog(catalog).map_err(CodecError::from)?;
    let mut library = PromptLibrary::builtin();

    let frame = cipher::frame(payload);
    let chunks = cipher::split_chunks(&frame);

    let mut envelopes = Vec::with_capacity(chunks.len());
    let mut iterations = Vec::with_capacity(chunks.len());
    let mut total_generations = 0u64;
    let mut rejected = 0u64;
    let mut total_words = 0u64;

    for (seq, chunk) in chunks.into_iter().enumerate() {
        let plan = codec::plan_sentence(chunk, &augs)?;
        let mut accepted = false;
        for attempt in 1..=session.max_iterations {
            // First attempt goes through the embedding prompt; retries use
            // the generation prompt tuned by the feedback loop.
            let role = if attempt == 1 {
                PromptRole::Embedding
            } else {
                PromptRole::Generation
            };
            let text = provider::generate_stego_text(
                provider,
                library.active(role),
                &plan,
                &session.theme,
                session.max_len,
            )?;
            total_generations += 1;
            let extraction = provider::extract_keywords(
                provider,
                library.active(PromptRole::Extraction),
                &text,
                catalog,
            )?;
            if extraction.surfaces() == Some(plan.surfaces()) {
                let timecode = session.clock.now();
                let stamps = encrypt_offsets(plan.offsets(), key, timecode);
                total_words += word_count(&text);
                envelopes.push(Envelope {
                    version: ENVELOPE_VERSION,
                    seq: seq as u32,
                    stego_text: text,
                    timecode,
                    stamps,
                    fingerprint: catalog.fingerprint.clone(),
                    theme: session.theme.clone(),
                });
                iterations.push(attempt);
                accepted = true;
                break;
            }
            rejected += 1;
            if attempt == session.max_iterations {
                break;
            }
            let feedback = provider::request_feedback(
                provider,
                library.active(PromptRole::Feedback),
                &text,
                &plan,
                &extraction,
            );
            for role in [
                PromptRole::Generation,
                PromptRole::Embedding,
                PromptRole::Extraction,
            ] {
                let improved = provider::optimize_prompt(provider, &feedback, library.active(role));
                library.push(improved);
            }
        }
        if !accepted {
            return Err(PipelineError::MaxRejectionsExceeded {
                sentence: seq,
                attempts: session.max_iterations,
            });
        }
    }

    let report = RunReport {
        reject_rate: rejected as f64 / total_generations.max(1) as f64,
        per_sentence_iterations: iterations,
        final_revisions: library.active_revisions(),
        total_words,
        embedded_bits: envelopes.len() as u64 * 64,
        payload_bytes: payload.len() as u64,
    };
    Ok((envelopes, report))
}

/// Recover the payload from a complete envelope sequence.
pub fn extract_pipeline(
    envelopes: &[Envelope],
    key: PrivateKey,
    provider: &mut dyn LlmProvider,
    catalog: &KeywordCatalog,
) -> Result<Vec<u8>, PipelineError> {
    catalog.validate()?;
    let augs = AugmentedCatalog::from_catalog(catalog).map_err(CodecError::from)?;
    let library = PromptLibrary::builtin();

    let mut ordered: Vec<Option<&Envelope>> = vec![None; envelopes.len()];
    for env in envelopes {
        if env.version != ENVELOPE_VERSION {
            return Err(PipelineError::VersionUnsupported(env.version));
        }
        if env.fingerprint != catalog.fingerprint {
            return Err(PipelineError::FingerprintMismatch {
                seq: env.seq,
                envelope: env.fingerprint.clone(),
                catalog: catalog.fingerprint.clone(),
            });
        }
        let slot = ordered
            .get_mut(env.seq as usize)
            .ok_or(PipelineError::MissingSequence(envelopes.len() as u32 - 1))?;
        if slot.is_some() {
            return Err(PipelineError::DuplicateSequence(env.seq));
        }
        *slot = Some(env);
    }
    let mut chunks = Vec::with_capacity(envelopes.len());
    for (i, slot) in ordered.iter().enumerate() {
        let env = slot.ok_or(PipelineError::MissingSequence(i as u32))?;
        let extraction = provider::extract_keywords(
            provider,
            library.active(PromptRole::Extraction),
            &env.stego_text,
            catalog,
        )?;
        let surfaces = match &extraction {
            ExtractionResult::Ok { .. } => extraction.surfaces().unwrap(),
            ExtractionResult::ParseFailure { raw } => {
                return Err(PipelineError::ExtractionFailed {
                    seq: env.seq,
                    raw: raw.clone(),
                })
            }
        };
        chunks.push(codec::recover_chunk(
            surfaces,
            env.stamps,
            key,
            env.timecode,
            &augs,
        )?);
    }
    if chunks.is_empty() {
        return Err(CipherError::TruncatedStream { need: 8, have: 0 }.into());
    }
    let frame = cipher::join_chunks(&chunks).map_err(CodecError::from)?;
    Ok(cipher::deframe(&frame).map_err(CodecError::from)?)
}

/// Serialize envelopes, one JSON record per line. Byte-stable for equal input.
pub fn write_envelopes(envelopes: &[Envelope], destination: &Path) -> Result<(), PipelineError> {
    let mut out = Vec::new();
    for env in envelopes {
        serde_json::to_writer(&mut out, &env.to_wire())
            .map_err(|e| PipelineError::Schema(e.to_string()))?;
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(destination)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_envelopes(source: &Path) -> Result<Vec<Envelope>, PipelineError> {
    let file = std::fs::File::open(source)?;
    let reader = std::io::BufReader::new(file);
    let mut envelopes = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: EnvelopeWire = serde_json::from_str(&line)
            .map_err(|e| PipelineError::Schema(format!("line {}: {e}", lineno + 1)))?;
        envelopes.push(Envelope::from_wire(wire)?);
    }
    Ok(envelopes)
}
