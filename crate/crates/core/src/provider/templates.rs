//! Versioned prompt templates for the six prompt roles.
//!
//! Three built-in revision tiers ship per role so the feedback loop can
//! escalate offline: tier 0 is the plain instruction, tier 1 tightens the
//! output contract, tier 2 spells everything out.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template body is empty")]
    EmptyBody,
    #[error("template for role '{role}' is missing required placeholder {{{placeholder}}}")]
    MissingPlaceholder {
        role: &'static str,
        placeholder: &'static str,
    },
    #[error("rendered prompt still contains placeholder {{{0}}}")]
    Unresolved(String),
}

/// The six prompt roles of the embed/extract protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PromptRole {
    Keyword,
    Evaluation,
    Embedding,
    Generation,
    Extraction,
    Feedback,
}

impl PromptRole {
    pub const ALL: [PromptRole; 6] = [
        PromptRole::Keyword,
        PromptRole::Evaluation,
        PromptRole::Embedding,
        PromptRole::Generation,
        PromptRole::Extraction,
        PromptRole::Feedback,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptRole::Keyword => "keyword",
            PromptRole::Evaluation => "evaluation",
            PromptRole::Embedding => "embedding",
            PromptRole::Generation => "generation",
            PromptRole::Extraction => "extraction",
            PromptRole::Feedback => "feedback",
        }
    }

    /// Placeholders the role's contract requires in every template body.
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            PromptRole::Keyword => &["theme"],
            PromptRole::Evaluation => &["theme", "keywords"],
            PromptRole::Embedding | PromptRole::Generation => {
                &["theme", "subject", "predicate", "object", "emotion", "max_len"]
            }
            PromptRole::Extraction => &["stego_text", "candidates"],
            PromptRole::Feedback => &["stego_text", "expected", "got"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub role: PromptRole,
    pub body: String,
    pub revision: u32,
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), TemplateError> {
        if self.body.trim().is_empty() {
            return Err(TemplateError::EmptyBody);
        }
        for placeholder in self.role.required_placeholders() {
            if !self.body.contains(&format!("{{{placeholder}}}")) {
                return Err(TemplateError::MissingPlaceholder {
                    role: self.role.as_str(),
                    placeholder,
                });
            }
        }
        Ok(())
    }

    /// Substitute placeholders; any `{name}` left over is an error.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = self.body.clone();
        for (name, value) in vars {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        if let Some(unresolved) = find_placeholder(&out) {
            return Err(TemplateError::Unresolved(unresolved));
        }
        Ok(out)
    }
}

/// First `{word}` occurrence in a rendered prompt, if any.
fn find_placeholder(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = text[i + 1..].find('}') {
                let inner = &text[i + 1..i + 1 + end];
                if !inner.is_empty()
                    && inner
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    return Some(inner.to_string());
                }
            }
        }
        i += 1;
    }
    None
}

/// Append-only revision history per role, with one active revision each.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    history: BTreeMap<PromptRole, Vec<PromptTemplate>>,
    active: BTreeMap<PromptRole, u32>,
}

impl PromptLibrary {
    /// Library seeded with tier-0 built-ins for every role.
    pub fn builtin() -> PromptLibrary {
        let mut history = BTreeMap::new();
        let mut active = BTreeMap::new();
        for role in PromptRole::ALL {
            history.insert(role, vec![builtin_tier(role, 0)]);
            active.insert(role, 0);
        }
        PromptLibrary { history, active }
    }

    pub fn active(&self, role: PromptRole) -> &PromptTemplate {
        let rev = self.active[&role];
        self.history[&role]
            .iter()
            .find(|t| t.revision == rev)
            .expect("active revision exists in history")
    }

    /// Append a new revision and make it active. Revisions never decrease.
    pub fn push(&mut self, template: PromptTemplate) {
        let role = template.role;
        let current = self.active[&role];
        assert!(
            template.revision > current,
            "revision must increase ({} -> {})",
            current,
            template.revision
        );
        self.history.get_mut(&role).unwrap().push(template);
        self.active.insert(role, self.history[&role].last().unwrap().revision);
    }

    pub fn active_revisions(&self) -> BTreeMap<&'static str, u32> {
        self.active.iter().map(|(r, &v)| (r.as_str(), v)).collect()
    }

    pub fn history_len(&self, role: PromptRole) -> usize {
        self.history[&role].len()
    }
}

/// Built-in template for a role at escalation tier `min(revision, 2)`.
pub fn builtin_tier(role: PromptRole, revision: u32) -> PromptTemplate {
    let tier = revision.min(2) as usize;
    let body = match role {
        PromptRole::Keyword => KEYWORD_TIERS[tier],
        PromptRole::Evaluation => EVALUATION_TIERS[tier],
        PromptRole::Embedding => EMBEDDING_TIERS[tier],
        PromptRole::Generation => GENERATION_TIERS[tier],
        PromptRole::Extraction => EXTRACTION_TIERS[tier],
        PromptRole::Feedback => FEEDBACK_TIERS[tier],
    };
    PromptTemplate {
        role,
        body: body.to_string(),
        revision,
    }
}

const KEYWORD_TIERS: [&str; 3] = [
    "# task: keyword\n\
     Theme: {theme}\n\
     Propose keyword subsets for sentences about this theme: 16 subjects, 16 \
     predicates, 16 objects, and 3 emotions (negative, positive, neutral), each \
     with a sampling probability reflecting how natural the word is for the theme.\n\
     Answer inside a <keywords> block, one line per keyword, formatted exactly as\n\
     role: word = probability",
    "# task: keyword\n\
     Theme: {theme}\n\
     List exactly 16 subject words, 16 predicate words, 16 object words, and the 3 \
     emotion words negative, positive, neutral, all lowercase, each with a positive \
     probability. Do not add commentary inside the block.\n\
     Answer inside a <keywords> block, one line per keyword:\n\
     role: word = probability",
    "# task: keyword\n\
     Theme: {theme}\n\
     Output only a <keywords> block. It must contain exactly 51 lines: 16 starting \
     with 'subject:', 16 with 'predicate:', 16 with 'object:', and 3 with 'emotion:' \
     (negative, positive, neutral). Every line ends with '= p' where p > 0. Single \
     lowercase words only, no duplicates.",
];

const EVALUATION_TIERS: [&str; 3] = [
    "# task: evaluation\n\
     Theme: {theme}\n\
     Score how well each keyword below fits fluent sentences about the theme. \
     Higher scores mean the keyword should be sampled more often.\n\
     {keywords}\n\
     Answer inside a <keywords> block, one line per keyword:\n\
     role: word = score",
    "# task: evaluation\n\
     Theme: {theme}\n\
     Assign every keyword below a positive numeric score; keep the exact words and \
     their order. Higher means more natural for the theme.\n\
     {keywords}\n\
     Answer inside a <keywords> block:\n\
     role: word = score",
    "# task: evaluation\n\
     Theme: {theme}\n\
     Output only a <keywords> block that repeats each line below verbatim with \
     ' = score' appended, where score is a positive number. Same order, no \
     additions, no omissions.\n\
     {keywords}",
];

const EMBEDDING_TIERS: [&str; 3] = [
    "# task: embed\n\
     Theme: {theme}\n\
     Write one fluent sentence (at most {max_len} words) on this theme that uses \
     all of these words naturally:\n\
     subject: {subject}\n\
     predicate: {predicate}\n\
     object: {object}\n\
     emotion: {emotion}\n\
     The emotion word sets the tone and should appear in the sentence.",
    "# task: embed\n\
     Theme: {theme}\n\
     Write one sentence of at most {max_len} words about the theme. The sentence \
     must contain each of these words verbatim, unchanged and uninflected:\n\
     subject: {subject}\n\
     predicate: {predicate}\n\
     object: {object}\n\
     emotion: {emotion}",
    "# task: embed\n\
     Theme: {theme}\n\
     Output exactly one sentence, nothing else, at most {max_len} words, on the \
     theme. It must contain each word below verbatim. Do not inflect, pluralize, \
     or synonymize them.\n\
     subject: {subject}\n\
     predicate: {predicate}\n\
     object: {object}\n\
     emotion: {emotion}",
];

const GENERATION_TIERS: [&str; 3] = [
    "# task: generate\n\
     Theme: {theme}\n\
     The previous attempt lost some required words. Write one varied, natural \
     sentence (at most {max_len} words) about the theme containing all of:\n\
     subject: {subject}\n\
     predicate: {predicate}\n\
     object: {object}\n\
     emotion: {emotion}",
    "# task: generate\n\
     Theme: {theme}\n\
     Regenerate the sentence. Hard requirements: at most {max_len} words, on \
     theme, and the exact words below appear verbatim:\n\
     subject: {subject}\n\
     predicate: {predicate}\n\
     object: {object}\n\
     emotion: {emotion}",
    "# task: generate\n\
     Theme: {theme}\n\
     Output exactly one sentence and nothing else. At most {max_len} words. It \
     must contain each word below unchanged. Prefer a simple clause structure \
     over style.\n\
     subject: {subject}\n\
     predicate: {predicate}\n\
     object: {object}\n\
     emotion: {emotion}",
];

const EXTRACTION_TIERS: [&str; 3] = [
    "# task: extract\n\
     From the candidate keywords below, identify which subject, predicate, object, \
     and emotion appear in the text.\n\
     Candidates:\n{candidates}\n\
     Text: {stego_text}\n\
     Answer inside an <answer> block with exactly four lines:\n\
     subject: word\npredicate: word\nobject: word\nemotion: word",
    "# task: extract\n\
     Match the text against the candidate list only; never invent words. Pick \
     exactly one candidate per role, the longest match if several apply.\n\
     Candidates:\n{candidates}\n\
     Text: {stego_text}\n\
     Answer inside an <answer> block, four lines, 'role: word'.",
    "# task: extract\n\
     Output only an <answer> block with exactly four lines 'subject: w', \
     'predicate: w', 'object: w', 'emotion: w'. Each w must be copied verbatim \
     from the candidate list and must occur in the text.\n\
     Candidates:\n{candidates}\n\
     Text: {stego_text}",
];

const FEEDBACK_TIERS: [&str; 3] = [
    "# task: feedback\n\
     A generated sentence failed keyword recovery.\n\
     Sentence: {stego_text}\n\
     Required keywords:\n{expected}\n\
     Recovered instead:\n{got}\n\
     Explain briefly what went wrong and how the next sentence should change.",
    "# task: feedback\n\
     Diagnose the recovery failure. Name each required keyword that is missing or \
     altered in the sentence, and state the single most important fix.\n\
     Sentence: {stego_text}\n\
     Required:\n{expected}\n\
     Recovered:\n{got}",
    "# task: feedback\n\
     List, one per line, every required keyword below that does not occur verbatim \
     in the sentence, then one imperative instruction for regeneration.\n\
     Sentence: {stego_text}\n\
     Required:\n{expected}\n\
     Recovered:\n{got}",
];
