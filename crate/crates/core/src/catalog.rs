//! Keyword catalog: the four shared keyword subsets that carry secret bits.
//!
//! A catalog is built once (normally by asking the LLM for themed keywords),
//! shared between both endpoints out of band, and pinned by a SHA-256
//! fingerprint so drift is detected instead of silently corrupting payloads.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::provider::{self, LlmProvider, PromptLibrary, PromptRole, ProviderError};

/// Probability sum tolerance after normalization.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("provider error: {0}")]
    Provider(#[from] ProviderError),
    #[error("malformed provider reply: {0}")]
    MalformedReply(String),
    #[error("invalid catalog: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog fingerprint mismatch: stored {stored}, computed {computed}")]
    FingerprintMismatch { stored: String, computed: String },
    #[error("unsupported catalog version {0}")]
    VersionUnsupported(u32),
    #[error("catalog file is not valid JSON: {0}")]
    Schema(#[from] serde_json::Error),
}

/// The four grammatical roles a sentence keyword can play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetRole {
    Subject,
    Predicate,
    Object,
    Emotion,
}

impl SubsetRole {
    pub const ALL: [SubsetRole; 4] = [
        SubsetRole::Subject,
        SubsetRole::Predicate,
        SubsetRole::Object,
        SubsetRole::Emotion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SubsetRole::Subject => "subject",
            SubsetRole::Predicate => "predicate",
            SubsetRole::Object => "object",
            SubsetRole::Emotion => "emotion",
        }
    }

    pub fn parse(s: &str) -> Option<SubsetRole> {
        match s {
            "subject" => Some(SubsetRole::Subject),
            "predicate" => Some(SubsetRole::Predicate),
            "object" => Some(SubsetRole::Object),
            "emotion" => Some(SubsetRole::Emotion),
            _ => None,
        }
    }

    /// Required entry count for this role.
    pub fn expected_len(self) -> usize {
        match self {
            SubsetRole::Emotion => 3,
            _ => 16,
        }
    }

    /// Full-scale augmented capacity for this role.
    pub fn capacity(self) -> u32 {
        match self {
            SubsetRole::Emotion => 1 << 10,
            _ => 1 << 18,
        }
    }

    /// Secret bits carried by one index in this role's augmented set.
    pub fn index_width(self) -> u8 {
        match self {
            SubsetRole::Emotion => 10,
            _ => 18,
        }
    }
}

impl fmt::Display for SubsetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One keyword with its sampling probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub surface: String,
    pub probability: f64,
}

/// Collapse whitespace and lowercase, the canonical surface form used
/// everywhere keyword equality is decided.
pub fn canonicalize(surface: &str) -> String {
    surface
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// An ordered keyword list for one role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSubset {
    pub role: SubsetRole,
    pub entries: Vec<Keyword>,
}

impl KeywordSubset {
    /// Build a subset from (surface, weight) pairs, canonicalizing surfaces
    /// and normalizing weights to sum to 1.
    pub fn new(
        role: SubsetRole,
        pairs: Vec<(String, f64)>,
    ) -> Result<KeywordSubset, CatalogError> {
        if pairs.len() != role.expected_len() {
            return Err(CatalogError::Invalid(format!(
                "{} subset needs {} entries, got {}",
                role,
                role.expected_len(),
                pairs.len()
            )));
        }
        let mut entries = Vec::with_capacity(pairs.len());
        let mut seen = HashSet::new();
        let mut total = 0.0f64;
        for (surface, weight) in pairs {
            let canon = canonicalize(&surface);
            if canon.is_empty() {
                return Err(CatalogError::Invalid(format!("{role}: empty keyword")));
            }
            if !seen.insert(canon.clone()) {
                return Err(CatalogError::Invalid(format!(
                    "{role}: duplicate keyword '{canon}'"
                )));
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(CatalogError::Invalid(format!(
                    "{role}: keyword '{canon}' has non-positive probability {weight}"
                )));
            }
            total += weight;
            entries.push(Keyword {
                surface: canon,
                probability: weight,
            });
        }
        for kw in &mut entries {
            kw.probability /= total;
        }
        Ok(KeywordSubset { role, entries })
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.entries.iter().map(|k| k.surface.as_str()).collect()
    }

    pub fn probability_sum(&self) -> f64 {
        self.entries.iter().map(|k| k.probability).sum()
    }

    fn validate(&self) -> Result<(), CatalogError> {
        if self.entries.len() != self.role.expected_len() {
            return Err(CatalogError::Invalid(format!(
                "{} subset needs {} entries, got {}",
                self.role,
                self.role.expected_len(),
                self.entries.len()
            )));
        }
        let mut seen = HashSet::new();
        for kw in &self.entries {
            if kw.surface.is_empty() || kw.surface != canonicalize(&kw.surface) {
                return Err(CatalogError::Invalid(format!(
                    "{}: keyword '{}' is not canonical",
                    self.role, kw.surface
                )));
            }
            if !seen.insert(kw.surface.as_str()) {
                return Err(CatalogError::Invalid(format!(
                    "{}: duplicate keyword '{}'",
                    self.role, kw.surface
                )));
            }
            if !(kw.probability.is_finite() && kw.probability > 0.0) {
                return Err(CatalogError::Invalid(format!(
                    "{}: keyword '{}' has non-positive probability",
                    self.role, kw.surface
                )));
            }
        }
        if (self.probability_sum() - 1.0).abs() > PROB_SUM_TOL {
            return Err(CatalogError::Invalid(format!(
                "{}: probabilities sum to {}, expected 1",
                self.role,
                self.probability_sum()
            )));
        }
        Ok(())
    }
}

/// The complete shared keyword catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordCatalog {
    pub theme: String,
    pub version: u32,
    pub subject: KeywordSubset,
    pub predicate: KeywordSubset,
    pub object: KeywordSubset,
    pub emotion: KeywordSubset,
    pub fingerprint: String,
}

/// Serialized form with subsets keyed by role name; field order is fixed so
/// canonical bytes are stable.
#[derive(Serialize, Deserialize)]
struct CatalogFile {
    theme: String,
    version: u32,
    subsets: CatalogSubsets,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct CatalogSubsets {
    subject: Vec<Keyword>,
    predicate: Vec<Keyword>,
    object: Vec<Keyword>,
    emotion: Vec<Keyword>,
}

impl KeywordCatalog {
    pub fn assemble(
        theme: String,
        version: u32,
        subject: KeywordSubset,
        predicate: KeywordSubset,
        object: KeywordSubset,
        emotion: KeywordSubset,
    ) -> Result<KeywordCatalog, CatalogError> {
        let mut catalog = KeywordCatalog {
            theme,
            version,
            subject,
            predicate,
            object,
            emotion,
            fingerprint: String::new(),
        };
        catalog.fingerprint = catalog.compute_fingerprint();
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn subset(&self, role: SubsetRole) -> &KeywordSubset {
        match role {
            SubsetRole::Subject => &self.subject,
            SubsetRole::Predicate => &self.predicate,
            SubsetRole::Object => &self.object,
            SubsetRole::Emotion => &self.emotion,
        }
    }

    pub fn subsets(&self) -> [&KeywordSubset; 4] {
        [&self.subject, &self.predicate, &self.object, &self.emotion]
    }

    /// Canonical bytes of everything the fingerprint covers.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let file = CatalogFile {
            theme: self.theme.clone(),
            version: self.version,
            subsets: CatalogSubsets {
                subject: self.subject.entries.clone(),
                predicate: self.predicate.entries.clone(),
                object: self.object.entries.clone(),
                emotion: self.emotion.entries.clone(),
            },
            fingerprint: String::new(),
        };
        serde_json::to_vec(&file).expect("catalog serialization cannot fail")
    }

    pub fn compute_fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.version == 0 {
            return Err(CatalogError::VersionUnsupported(0));
        }
        let roles = [
            (SubsetRole::Subject, &self.subject),
            (SubsetRole::Predicate, &self.predicate),
            (SubsetRole::Object, &self.object),
            (SubsetRole::Emotion, &self.emotion),
        ];
        for (role, subset) in roles {
            if subset.role != role {
                return Err(CatalogError::Invalid(format!(
                    "subset stored under {role} declares role {}",
                    subset.role
                )));
            }
            subset.validate()?;
        }
        let computed = self.compute_fingerprint();
        if computed != self.fingerprint {
            return Err(CatalogError::FingerprintMismatch {
                stored: self.fingerprint.clone(),
                computed,
            });
        }
        Ok(())
    }

    pub fn save(&self, destination: &Path) -> Result<(), CatalogError> {
        self.validate()?;
        let file = CatalogFile {
            theme: self.theme.clone(),
            version: self.version,
            subsets: CatalogSubsets {
                subject: self.subject.entries.clone(),
                predicate: self.predicate.entries.clone(),
                object: self.object.entries.clone(),
                emotion: self.emotion.entries.clone(),
            },
            fingerprint: self.fingerprint.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&file)?;
        bytes.push(b'\n');
        std::fs::write(destination, bytes)?;
        Ok(())
    }

    pub fn load(source: &Path) -> Result<KeywordCatalog, CatalogError> {
        let bytes = std::fs::read(source)?;
        let file: CatalogFile = serde_json::from_slice(&bytes)?;
        if file.version == 0 {
            return Err(CatalogError::VersionUnsupported(0));
        }
        let catalog = KeywordCatalog {
            theme: file.theme,
            version: file.version,
            subject: KeywordSubset {
                role: SubsetRole::Subject,
                entries: file.subsets.subject,
            },
            predicate: KeywordSubset {
                role: SubsetRole::Predicate,
                entries: file.subsets.predicate,
            },
            object: KeywordSubset {
                role: SubsetRole::Object,
                entries: file.subsets.object,
            },
            emotion: KeywordSubset {
                role: SubsetRole::Emotion,
                entries: file.subsets.emotion,
            },
            fingerprint: file.fingerprint,
        };
        catalog.validate()?;
        Ok(catalog)
    }
}

/// Ask the provider for four themed keyword subsets and parse its reply.
///
/// The reply must contain a `<keywords>` block with one `role: surface = weight`
/// line per keyword, exactly 16/16/16/3 lines per role. Weights are
/// normalized per subset.
pub fn build_catalog(
    provider: &mut dyn LlmProvider,
    library: &PromptLibrary,
    theme: &str,
) -> Result<KeywordCatalog, CatalogError> {
    let prompt = library
        .active(PromptRole::Keyword)
        .render(&[("theme", theme)])
        .map_err(|e| CatalogError::Invalid(e.to_string()))?;
    let reply = provider.complete(&prompt)?;
    let mut parsed = parse_keyword_lines(&reply)?;
    let mut subsets = Vec::new();
    for role in SubsetRole::ALL {
        let pairs = parsed.remove(&role).unwrap_or_default();
        if pairs.len() != role.expected_len() {
            return Err(CatalogError::MalformedReply(format!(
                "expected {} {} keywords, got {}",
                role.expected_len(),
                role,
                pairs.len()
            )));
        }
        subsets.push(KeywordSubset::new(role, pairs).map_err(|e| match e {
            CatalogError::Invalid(msg) => CatalogError::MalformedReply(msg),
            other => other,
        })?);
    }
    let emotion = subsets.pop().unwrap();
    let object = subsets.pop().unwrap();
    let predicate = subsets.pop().unwrap();
    let subject = subsets.pop().unwrap();
    KeywordCatalog::assemble(theme.to_string(), 1, subject, predicate, object, emotion)
}

/// Ask the provider to score every keyword, then replace probabilities with
/// the normalized scores. Surfaces and their order never change.
pub fn optimize_probabilities(
    provider: &mut dyn LlmProvider,
    library: &PromptLibrary,
    catalog: &KeywordCatalog,
) -> Result<KeywordCatalog, CatalogError> {
    catalog.validate()?;
    let listing = catalog
        .subsets()
        .iter()
        .flat_map(|s| {
            s.entries
                .iter()
                .map(|k| format!("{}: {}", s.role, k.surface))
        })
        .collect::<Vec<_>>()
        .join("\n");
    let prompt = library
        .active(PromptRole::Evaluation)
        .render(&[("theme", catalog.theme.as_str()), ("keywords", &listing)])
        .map_err(|e| CatalogError::Invalid(e.to_string()))?;
    let reply = provider.complete(&prompt)?;
    let parsed = parse_keyword_lines(&reply)?;

    let mut rescored = Vec::new();
    for subset in catalog.subsets() {
        let scores = parsed.get(&subset.role).cloned().unwrap_or_default();
        if scores.len() != subset.entries.len() {
            return Err(CatalogError::MalformedReply(format!(
                "{}: expected {} scores, got {}",
                subset.role,
                subset.entries.len(),
                scores.len()
            )));
        }
        let mut pairs = Vec::new();
        for (kw, (surface, score)) in subset.entries.iter().zip(&scores) {
            if canonicalize(surface) != kw.surface {
                return Err(CatalogError::MalformedReply(format!(
                    "{}: score for '{}' does not match keyword '{}'",
                    subset.role, surface, kw.surface
                )));
            }
            pairs.push((kw.surface.clone(), *score));
        }
        rescored.push(KeywordSubset::new(subset.role, pairs).map_err(|e| match e {
            CatalogError::Invalid(msg) => CatalogError::MalformedReply(msg),
            other => other,
        })?);
    }
    let emotion = rescored.pop().unwrap();
    let object = rescored.pop().unwrap();
    let predicate = rescored.pop().unwrap();
    let subject = rescored.pop().unwrap();
    let optimized = KeywordCatalog::assemble(
        catalog.theme.clone(),
        catalog.version + 1,
        subject,
        predicate,
        object,
        emotion,
    )?;
    debug_assert_eq!(
        optimized
            .subsets()
            .iter()
            .map(|s| s.surfaces())
            .collect::<Vec<_>>(),
        catalog
            .subsets()
            .iter()
            .map(|s| s.surfaces())
            .collect::<Vec<_>>()
    );
    Ok(optimized)
}

/// Parse `role: surface = number` lines from a `<keywords>` block.
fn parse_keyword_lines(
    reply: &str,
) -> Result<std::collections::BTreeMap<SubsetRole, Vec<(String, f64)>>, CatalogError> {
    let block = provider::answer_block(reply, "keywords").ok_or_else(|| {
        CatalogError::MalformedReply("reply has no <keywords> block".to_string())
    })?;
    let mut out: std::collections::BTreeMap<SubsetRole, Vec<(String, f64)>> =
        std::collections::BTreeMap::new();
    for line in block.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (role_part, rest) = line.split_once(':').ok_or_else(|| {
            CatalogError::MalformedReply(format!("line '{line}' is not 'role: surface = weight'"))
        })?;
        let role = SubsetRole::parse(role_part.trim()).ok_or_else(|| {
            CatalogError::MalformedReply(format!("unknown role '{}'", role_part.trim()))
        })?;
        let (surface, weight) = rest.rsplit_once('=').ok_or_else(|| {
            CatalogError::MalformedReply(format!("line '{line}' has no '= weight' part"))
        })?;
        let weight: f64 = weight.trim().parse().map_err(|_| {
            CatalogError::MalformedReply(format!("'{}' is not a number", weight.trim()))
        })?;
        out.entry(role)
            .or_default()
            .push((surface.trim().to_string(), weight));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::testing::fixture_catalog;
    use crate::provider::{MockBehavior, MockProvider};

    fn builtin_library() -> PromptLibrary {
        PromptLibrary::builtin()
    }

    #[test]
    fn mock_build_yields_valid_catalog() {
        let mut mock = MockProvider::new(7, MockBehavior::Exact);
        let catalog =
            build_catalog(&mut mock, &builtin_library(), "Entertainment News").unwrap();
        assert_eq!(catalog.subject.entries.len(), 16);
        assert_eq!(catalog.emotion.entries.len(), 3);
        for subset in catalog.subsets() {
            assert!((subset.probability_sum() - 1.0).abs() <= PROB_SUM_TOL);
        }
        catalog.validate().unwrap();
    }

    struct FixedReply(String);
    impl LlmProvider for FixedReply {
        fn complete(&mut self, _prompt: &str) -> Result<String, ProviderError> {
            Ok(self.0.clone())
        }
    }

    fn fixture_reply(subject_count: usize, weight: f64) -> String {
        let mut lines = Vec::new();
        for i in 0..subject_count {
            lines.push(format!("subject: subj{i} = {weight}"));
        }
        for i in 0..16 {
            lines.push(format!("predicate: pred{i} = {weight}"));
        }
        for i in 0..16 {
            lines.push(format!("object: obj{i} = {weight}"));
        }
        for e in ["negative", "positive", "neutral"] {
            lines.push(format!("emotion: {e} = {weight}"));
        }
        format!("<keywords>\n{}\n</keywords>", lines.join("\n"))
    }

    #[test]
    fn short_subject_list_is_malformed() {
        let mut p = FixedReply(fixture_reply(15, 0.1));
        let err = build_catalog(&mut p, &builtin_library(), "t").unwrap_err();
        assert!(matches!(err, CatalogError::MalformedReply(_)), "{err}");
    }

    #[test]
    fn unnormalized_weights_are_divided_by_their_sum() {
        // 16 subjects at 0.2 each sum to 3.2; each must come out as 0.2/3.2.
        let mut p = FixedReply(fixture_reply(16, 0.2));
        let catalog = build_catalog(&mut p, &builtin_library(), "t").unwrap();
        for kw in &catalog.subject.entries {
            assert!((kw.probability - 0.2 / 3.2).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_probability_rejected() {
        let mut p = FixedReply(fixture_reply(16, 0.0));
        assert!(build_catalog(&mut p, &builtin_library(), "t").is_err());
    }

    #[test]
    fn optimize_uniform_scores_gives_uniform_probabilities() {
        let catalog = fixture_catalog("t");
        struct UniformScores;
        impl LlmProvider for UniformScores {
            fn complete(&mut self, prompt: &str) -> Result<String, ProviderError> {
                // Echo every listed keyword back with score 1.
                let mut lines = Vec::new();
                for line in prompt.lines() {
                    let t = line.trim();
                    if SubsetRole::ALL
                        .iter()
                        .any(|r| t.starts_with(&format!("{r}: ")))
                    {
                        lines.push(format!("{t} = 1.0"));
                    }
                }
                Ok(format!("<keywords>\n{}\n</keywords>", lines.join("\n")))
            }
        }
        let out =
            optimize_probabilities(&mut UniformScores, &builtin_library(), &catalog).unwrap();
        assert_eq!(out.version, catalog.version + 1);
        for kw in &out.subject.entries {
            assert!((kw.probability - 1.0 / 16.0).abs() < 1e-12);
        }
        for kw in &out.emotion.entries {
            assert!((kw.probability - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn optimize_doubled_first_score() {
        let catalog = fixture_catalog("t");
        struct DoubledFirst;
        impl LlmProvider for DoubledFirst {
            fn complete(&mut self, prompt: &str) -> Result<String, ProviderError> {
                let mut lines = Vec::new();
                let mut first_subject = true;
                for line in prompt.lines() {
                    let t = line.trim();
                    if SubsetRole::ALL
                        .iter()
                        .any(|r| t.starts_with(&format!("{r}: ")))
                    {
                        let score = if t.starts_with("subject: ") && first_subject {
                            first_subject = false;
                            2.0
                        } else {
                            1.0
                        };
                        lines.push(format!("{t} = {score}"));
                    }
                }
                Ok(format!("<keywords>\n{}\n</keywords>", lines.join("\n")))
            }
        }
        let out = optimize_probabilities(&mut DoubledFirst, &builtin_library(), &catalog).unwrap();
        assert!((out.subject.entries[0].probability - 2.0 / 17.0).abs() < 1e-12);
        for kw in &out.subject.entries[1..] {
            assert!((kw.probability - 1.0 / 17.0).abs() < 1e-12);
        }
        // Surfaces and order unchanged.
        assert_eq!(
            out.subject.surfaces(),
            catalog.subject.surfaces()
        );
    }

    #[test]
    fn optimize_propagates_provider_error() {
        let catalog = fixture_catalog("t");
        struct Timeout;
        impl LlmProvider for Timeout {
            fn complete(&mut self, _prompt: &str) -> Result<String, ProviderError> {
                Err(ProviderError::Timeout("deadline exceeded".to_string()))
            }
        }
        let err = optimize_probabilities(&mut Timeout, &builtin_library(), &catalog).unwrap_err();
        assert!(matches!(err, CatalogError::Provider(_)));
    }

    #[test]
    fn save_load_round_trip() {
        let catalog = fixture_catalog("Entertainment News");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        catalog.save(&path).unwrap();
        let loaded = KeywordCatalog::load(&path).unwrap();
        assert_eq!(loaded, catalog);
    }

    #[test]
    fn edited_file_fails_fingerprint() {
        let catalog = fixture_catalog("t");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        catalog.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let first = catalog.subject.entries[0].surface.clone();
        let tampered = text.replacen(&first, "tampered", 1);
        assert_ne!(text, tampered);
        std::fs::write(&path, tampered).unwrap();
        let err = KeywordCatalog::load(&path).unwrap_err();
        assert!(matches!(err, CatalogError::FingerprintMismatch { .. }), "{err}");
    }

    #[test]
    fn version_zero_rejected() {
        let catalog = fixture_catalog("t");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        catalog.save(&path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 0");
        std::fs::write(&path, text).unwrap();
        let err = KeywordCatalog::load(&path).unwrap_err();
        assert!(matches!(err, CatalogError::VersionUnsupported(0)));
    }

    #[test]
    fn canonical_bytes_deterministic() {
        let catalog = fixture_catalog("t");
        assert_eq!(catalog.canonical_bytes(), catalog.canonical_bytes());
    }
}
