//! Deterministic offline provider.
//!
//! Dispatches on the `# task:` marker line of each prompt and answers from
//! fixed word lists and a seeded RNG, so any (seed, call sequence) pair
//! reproduces the exact same transcript on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::templates::{builtin_tier, PromptRole};
use super::{LlmProvider, ProviderError};

const SUBJECTS: [&str; 16] = [
    "dancer", "director", "singer", "actress", "producer", "critic", "band", "studio",
    "composer", "host", "rapper", "audience", "screenwriter", "celebrity", "drummer",
    "violinist",
];
const PREDICATES: [&str; 16] = [
    "announced", "praised", "released", "criticized", "premiered", "celebrated",
    "reviewed", "launched", "performed", "revealed", "promoted", "discussed",
    "unveiled", "cancelled", "postponed", "applauded",
];
const OBJECTS: [&str; 16] = [
    "album", "film", "concert", "trailer", "festival", "award", "sequel",
    "documentary", "soundtrack", "premiere", "contract", "interview", "ceremony",
    "rehearsal", "screenplay", "tour",
];
const EMOTIONS: [&str; 3] = ["negative", "positive", "neutral"];

/// How the mock behaves on generation calls.
#[derive(Debug, Clone)]
pub enum MockBehavior {
    /// Every generated sentence contains all four keywords.
    Exact,
    /// Each generation drops a keyword with this probability, independently.
    Noisy { drop_rate: f64 },
    /// Per-generation drop probabilities, cycled. `[1.0, 0.0]` makes every
    /// first attempt fail and every second attempt succeed.
    Scripted { pattern: Vec<f64> },
}

pub struct MockProvider {
    rng: ChaCha8Rng,
    behavior: MockBehavior,
    generation_calls: u64,
}

impl MockProvider {
    pub fn new(seed: u64, behavior: MockBehavior) -> MockProvider {
        MockProvider {
            rng: ChaCha8Rng::seed_from_u64(seed),
            behavior,
            generation_calls: 0,
        }
    }

    fn keyword_reply(&mut self) -> String {
        let mut lines = Vec::new();
        for (i, w) in SUBJECTS.iter().enumerate() {
            lines.push(format!("subject: {w} = {}", 16 - i));
        }
        for (i, w) in PREDICATES.iter().enumerate() {
            lines.push(format!("predicate: {w} = {}", 16 - i));
        }
        for (i, w) in OBJECTS.iter().enumerate() {
            lines.push(format!("object: {w} = {}", 16 - i));
        }
        for (w, score) in EMOTIONS.iter().zip([0.25, 0.45, 0.30]) {
            lines.push(format!("emotion: {w} = {score}"));
        }
        format!("<keywords>\n{}\n</keywords>", lines.join("\n"))
    }

    fn evaluation_reply(&mut self, prompt: &str) -> String {
        // Score every listed keyword equally.
        let lines: Vec<String> = role_lines(prompt)
            .into_iter()
            .map(|(role, word)| format!("{role}: {word} = 1.0"))
            .collect();
        format!("<keywords>\n{}\n</keywords>", lines.join("\n"))
    }

    fn generation_reply(&mut self, prompt: &str) -> String {
        self.generation_calls += 1;
        let theme = marked_line(prompt, "Theme: ").unwrap_or("the news");
        let mut kw = [""; 4];
        for (role, word) in role_lines(prompt) {
            match role {
                "subject" => kw[0] = word,
                "predicate" => kw[1] = word,
                "object" => kw[2] = word,
                _ => kw[3] = word,
            }
        }
        let drop_rate = match &self.behavior {
            MockBehavior::Exact => 0.0,
            MockBehavior::Noisy { drop_rate } => *drop_rate,
            MockBehavior::Scripted { pattern } => {
                pattern[(self.generation_calls as usize - 1) % pattern.len()]
            }
        };
        let mut kw: Vec<String> = kw.iter().map(|s| s.to_string()).collect();
        if self.rng.gen::<f64>() < drop_rate {
            let slot = (self.generation_calls % 4) as usize;
            kw[slot] = "something".to_string();
        }
        let variant = self.rng.gen_range(0u8..3);
        match variant {
            0 => format!(
                "In {theme} today, the {} {} a new {} to a {} reception.",
                kw[0], kw[1], kw[2], kw[3]
            ),
            1 => format!(
                "The {} {} the {} this week, and the {} mood around {theme} was hard to miss.",
                kw[0], kw[1], kw[2], kw[3]
            ),
            _ => format!(
                "Fans of {theme} watched as the {} {} the {}, a decidedly {} moment.",
                kw[0], kw[1], kw[2], kw[3]
            ),
        }
    }

    fn extraction_reply(&mut self, prompt: &str) -> String {
        let text = marked_line(prompt, "Text: ").unwrap_or("").to_lowercase();
        let words: Vec<&str> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect();
        let mut best: [Option<&str>; 4] = [None; 4];
        for (role, candidate) in candidate_lines(prompt) {
            let slot = match role {
                "subject" => 0,
                "predicate" => 1,
                "object" => 2,
                _ => 3,
            };
            // Whole-word match, longest candidate wins.
            let cand_words: Vec<&str> = candidate.split(' ').collect();
            let found = words
                .windows(cand_words.len().max(1))
                .any(|w| w == cand_words.as_slice());
            if found && best[slot].map_or(true, |b| candidate.len() > b.len()) {
                best[slot] = Some(candidate);
            }
        }
        let line = |role: &str, v: Option<&str>| match v {
            Some(w) => format!("{role}: {w}"),
            None => format!("{role}: (missing)"),
        };
        format!(
            "<answer>\n{}\n{}\n{}\n{}\n</answer>",
            line("subject", best[0]),
            line("predicate", best[1]),
            line("object", best[2]),
            line("emotion", best[3]),
        )
    }

    fn feedback_reply(&mut self, prompt: &str) -> String {
        let _ = prompt;
        "Some required keywords are missing or altered in the sentence. \
         Regenerate it so every required keyword appears verbatim."
            .to_string()
    }

    fn optimize_reply(&mut self, prompt: &str) -> String {
        let role = marked_line(prompt, "role: ")
            .and_then(parse_role)
            .unwrap_or(PromptRole::Generation);
        let revision: u32 = marked_line(prompt, "revision: ")
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        let next = builtin_tier(role, revision + 1);
        format!("<template>\n{}\n</template>", next.body)
    }
}

fn parse_role(s: &str) -> Option<PromptRole> {
    PromptRole::ALL.into_iter().find(|r| r.as_str() == s.trim())
}

/// Value of the first line starting with `marker`.
fn marked_line<'a>(prompt: &'a str, marker: &str) -> Option<&'a str> {
    prompt
        .lines()
        .find_map(|l| l.trim().strip_prefix(marker))
        .map(str::trim)
}

/// All `role: word` lines for the four subset roles, top to bottom.
fn role_lines(prompt: &str) -> Vec<(&str, &str)> {
    prompt
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            for role in ["subject", "predicate", "object", "emotion"] {
                if let Some(word) = l.strip_prefix(&format!("{role}: ")) {
                    return Some((role, word.trim()));
                }
            }
            None
        })
        .collect()
}

/// `role: word` lines between the `Candidates:` and `Text:` markers.
fn candidate_lines(prompt: &str) -> Vec<(&str, &str)> {
    let mut inside = false;
    let mut out = Vec::new();
    for l in prompt.lines() {
        let l = l.trim();
        if l == "Candidates:" {
            inside = true;
            continue;
        }
        if l.starts_with("Text:") {
            break;
        }
        if inside {
            for role in ["subject", "predicate", "object", "emotion"] {
                if let Some(word) = l.strip_prefix(&format!("{role}: ")) {
                    out.push((role, word.trim()));
                }
            }
        }
    }
    out
}

impl LlmProvider for MockProvider {
    fn complete(&mut self, prompt: &str) -> Result<String, ProviderError> {
        let task = marked_line(prompt, "# task: ").ok_or_else(|| {
            ProviderError::Transport("mock received a prompt without a task marker".to_string())
        })?;
        Ok(match task {
            "keyword" => self.keyword_reply(),
            "evaluation" => self.evaluation_reply(prompt),
            "embed" | "generate" => self.generation_reply(prompt),
            "extract" => self.extraction_reply(prompt),
            "feedback" => self.feedback_reply(prompt),
            "optimize-prompt" => self.optimize_reply(prompt),
            other => {
                return Err(ProviderError::Transport(format!(
                    "mock cannot handle task '{other}'"
                )))
            }
        })
    }
}
