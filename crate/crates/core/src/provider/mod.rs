//! LLM access layer: prompt templates, a chat-completion HTTP client, and a
//! deterministic offline mock.
//!
//! Every prompt rendered here starts with a `# task: <name>` marker line.
//! Real models ignore it as context; the mock dispatches on it.

mod http;
mod mock;
mod templates;

pub use http::{HttpProvider, ProviderConfig};
pub use mock::{MockBehavior, MockProvider};
pub use templates::{PromptLibrary, PromptRole, PromptTemplate, TemplateError};

use thiserror::Error;

use crate::catalog::{canonicalize, KeywordCatalog};
use crate::codec::SentencePlan;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("authentication failure: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("template error: {0}")]
    Template(#[from] TemplateError),
}

/// Anything that can answer a rendered prompt with text.
pub trait LlmProvider {
    fn complete(&mut self, prompt: &str) -> Result<String, ProviderError>;
}

/// Extract the contents of a `<tag>...</tag>` block from a reply, ignoring
/// any commentary around it.
pub fn answer_block<'a>(reply: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = reply.find(&open)? + open.len();
    let end = reply[start..].find(&close)? + start;
    Some(&reply[start..end])
}

/// Four extracted surfaces, or why they could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractionResult {
    Ok {
        subject: String,
        predicate: String,
        object: String,
        emotion: String,
    },
    ParseFailure {
        raw: String,
    },
}

impl ExtractionResult {
    pub fn surfaces(&self) -> Option<[&str; 4]> {
        match self {
            ExtractionResult::Ok {
                subject,
                predicate,
                object,
                emotion,
            } => Some([subject, predicate, object, emotion]),
            ExtractionResult::ParseFailure { .. } => None,
        }
    }
}

/// Render the embedding/generation template for a plan and ask for one stego
/// sentence.
pub fn generate_stego_text(
    provider: &mut dyn LlmProvider,
    template: &PromptTemplate,
    plan: &SentencePlan,
    theme: &str,
    max_len: u32,
) -> Result<String, ProviderError> {
    let max_len = max_len.to_string();
    let prompt = template.render(&[
        ("theme", theme),
        ("subject", &plan.subject.surface),
        ("predicate", &plan.predicate.surface),
        ("object", &plan.object.surface),
        ("emotion", &plan.emotion.surface),
        ("max_len", &max_len),
    ])?;
    provider.complete(&prompt)
}

/// Ask the provider which catalog keywords appear in `text`.
///
/// The reply must carry a strict `<answer>` block, one `role: surface` line
/// per role; anything else is a parse failure carried in the result.
pub fn extract_keywords(
    provider: &mut dyn LlmProvider,
    template: &PromptTemplate,
    text: &str,
    catalog: &KeywordCatalog,
) -> Result<ExtractionResult, ProviderError> {
    let candidates = catalog
        .subsets()
        .iter()
        .flat_map(|s| {
            s.entries
                .iter()
                .map(|k| format!("{}: {}", s.role, k.surface))
        })
        .collect::<Vec<_>>()
        .join("\n");
    let prompt = template.render(&[("stego_text", text), ("candidates", &candidates)])?;
    let reply = provider.complete(&prompt)?;
    Ok(parse_extraction_reply(&reply))
}

fn parse_extraction_reply(reply: &str) -> ExtractionResult {
    let Some(block) = answer_block(reply, "answer") else {
        return ExtractionResult::ParseFailure {
            raw: reply.to_string(),
        };
    };
    let mut fields: [Option<String>; 4] = [None, None, None, None];
    for line in block.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((role, surface)) = line.split_once(':') else {
            return ExtractionResult::ParseFailure {
                raw: reply.to_string(),
            };
        };
        let slot = match role.trim() {
            "subject" => 0,
            "predicate" => 1,
            "object" => 2,
            "emotion" => 3,
            _ => {
                return ExtractionResult::ParseFailure {
                    raw: reply.to_string(),
                }
            }
        };
        let surface = canonicalize(surface);
        if surface.is_empty() || fields[slot].is_some() {
            return ExtractionResult::ParseFailure {
                raw: reply.to_string(),
            };
        }
        fields[slot] = Some(surface);
    }
    match fields {
        [Some(subject), Some(predicate), Some(object), Some(emotion)] => ExtractionResult::Ok {
            subject,
            predicate,
            object,
            emotion,
        },
        _ => ExtractionResult::ParseFailure {
            raw: reply.to_string(),
        },
    }
}

/// Ask the provider why extraction missed; never fails the caller.
pub fn request_feedback(
    provider: &mut dyn LlmProvider,
    template: &PromptTemplate,
    text: &str,
    expected: &SentencePlan,
    got: &ExtractionResult,
) -> String {
    let expected_str = format!(
        "subject: {}\npredicate: {}\nobject: {}\nemotion: {}",
        expected.subject.surface,
        expected.predicate.surface,
        expected.object.surface,
        expected.emotion.surface
    );
    let got_str = match got {
        ExtractionResult::Ok {
            subject,
            predicate,
            object,
            emotion,
        } => {
            assert!(
                [subject, predicate, object, emotion]
                    .iter()
                    .zip(expected.surfaces())
                    .any(|(g, e)| g.as_str() != e),
                "feedback requested for a matching extraction"
            );
            format!(
                "subject: {subject}\npredicate: {predicate}\nobject: {object}\nemotion: {emotion}"
            )
        }
        ExtractionResult::ParseFailure { raw } => format!("unparseable reply: {raw}"),
    };
    let rendered = template.render(&[
        ("stego_text", text),
        ("expected", &expected_str),
        ("got", &got_str),
    ]);
    match rendered.map(|p| provider.complete(&p)) {
        Ok(Ok(reply)) => reply,
        Ok(Err(e)) => {
            log::warn!("feedback request failed: {e}; using canned feedback");
            canned_feedback(expected, got)
        }
        Err(e) => {
            log::warn!("feedback template error: {e}; using canned feedback");
            canned_feedback(expected, got)
        }
    }
}

fn canned_feedback(expected: &SentencePlan, got: &ExtractionResult) -> String {
    match got {
        ExtractionResult::Ok {
            subject,
            predicate,
            object,
            emotion,
        } => {
            let mut wrong = Vec::new();
            for (role, g, e) in [
                ("subject", subject.as_str(), expected.subject.surface.as_str()),
                ("predicate", predicate.as_str(), expected.predicate.surface.as_str()),
                ("object", object.as_str(), expected.object.surface.as_str()),
                ("emotion", emotion.as_str(), expected.emotion.surface.as_str()),
            ] {
                if g != e {
                    wrong.push(format!("{role} came back as '{g}' instead of '{e}'"));
                }
            }
            format!(
                "The sentence did not survive extraction: {}. \
                 Keep every required keyword verbatim in the sentence.",
                wrong.join("; ")
            )
        }
        ExtractionResult::ParseFailure { .. } => {
            "The extraction reply was unparseable. The sentence must state each \
             required keyword verbatim so it can be recovered."
                .to_string()
        }
    }
}

/// Ask the provider for an improved template body; on any failure, fall back
/// to the next built-in revision tier for the role.
pub fn optimize_prompt(
    provider: &mut dyn LlmProvider,
    feedback: &str,
    template: &PromptTemplate,
) -> PromptTemplate {
    let prompt = format!(
        "# task: optimize-prompt\n\
         role: {}\n\
         revision: {}\n\
         The prompt below failed to produce a recoverable sentence.\n\
         Feedback:\n{}\n\
         Current prompt:\n<template>\n{}\n</template>\n\
         Reply with an improved prompt inside a single <template> block, \
         keeping every {{placeholder}} intact.",
        template.role.as_str(),
        template.revision,
        feedback,
        template.body
    );
    let fallback = || templates::builtin_tier(template.role, template.revision + 1);
    let reply = match provider.complete(&prompt) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("prompt optimization failed: {e}; using built-in tier");
            let mut t = fallback();
            t.revision = template.revision + 1;
            return t;
        }
    };
    let body = answer_block(&reply, "template").map(|b| b.trim().to_string());
    let candidate = body.and_then(|body| {
        let t = PromptTemplate {
            role: template.role,
            body,
            revision: template.revision + 1,
        };
        t.validate().ok().map(|_| t)
    });
    candidate.unwrap_or_else(|| {
        let mut t = fallback();
        t.revision = template.revision + 1;
        t
    })
}

/// Test helpers shared across the crate's unit tests.
pub mod testing {
    use super::*;

    /// A deterministic catalog built through the mock provider.
    pub fn fixture_catalog(theme: &str) -> KeywordCatalog {
        let mut mock = MockProvider::new(1, MockBehavior::Exact);
        crate::catalog::build_catalog(&mut mock, &PromptLibrary::builtin(), theme)
            .expect("mock catalog build")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_block_skips_commentary() {
        let reply = "Sure, here you go:\n<answer>\nsubject: dancer\npredicate: announced\n\
                     object: song\nemotion: positive\n</answer>\nHope that helps!";
        let got = parse_extraction_reply(reply);
        assert_eq!(
            got,
            ExtractionResult::Ok {
                subject: "dancer".into(),
                predicate: "announced".into(),
                object: "song".into(),
                emotion: "positive".into(),
            }
        );
    }

    #[test]
    fn missing_role_is_parse_failure() {
        let reply = "<answer>\nsubject: dancer\npredicate: announced\nobject: song\n</answer>";
        assert!(matches!(
            parse_extraction_reply(reply),
            ExtractionResult::ParseFailure { .. }
        ));
    }

    #[test]
    fn no_block_is_parse_failure() {
        assert!(matches!(
            parse_extraction_reply("the keywords are dancer and song"),
            ExtractionResult::ParseFailure { .. }
        ));
    }
}
