//! Quantitative metrics: embedding capacity, perplexity under a pluggable
//! token scorer, steganalysis accuracy, and per-dimension Gaussian KL
//! divergence.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("word count is zero")]
    ZeroWords,
    #[error("text has no tokens")]
    EmptyText,
    #[error("scorer assigned probability {p} to token '{token}'")]
    BadProbability { token: String, p: f64 },
    #[error("confusion counts are all zero")]
    EmptyCounts,
    #[error("need at least 2 samples per dimension, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: {x} vs {y}")]
    DimensionMismatch { x: usize, y: usize },
}

/// Secret bits per stego word (bpw).
pub fn embedding_capacity(total_bits: u64, total_words: u64) -> Result<f64, MetricsError> {
    if total_words == 0 {
        return Err(MetricsError::ZeroWords);
    }
    Ok(total_bits as f64 / total_words as f64)
}

/// Whitespace tokenization; punctuation stays attached to its word.
pub fn word_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Next-token probability given a prefix. Probabilities must be in (0, 1].
pub trait TokenScorer {
    fn prob(&self, prefix: &[&str], next: &str) -> f64;
}

/// exp of the mean negative log-probability over the token sequence.
pub fn perplexity(scorer: &dyn TokenScorer, tokens: &[&str]) -> Result<f64, MetricsError> {
    if tokens.is_empty() {
        return Err(MetricsError::EmptyText);
    }
    let mut log_sum = 0.0f64;
    for i in 0..tokens.len() {
        let p = scorer.prob(&tokens[..i], tokens[i]);
        if !(p > 0.0 && p <= 1.0) {
            return Err(MetricsError::BadProbability {
                token: tokens[i].to_string(),
                p,
            });
        }
        log_sum += p.ln();
    }
    Ok((-log_sum / tokens.len() as f64).exp())
}

/// Add-one-smoothed n-gram scorer trained on a plain-text corpus.
///
/// `p(w | ctx) = (count(ctx, w) + 1) / (count(ctx) + V)` with V the training
/// vocabulary size plus one slot for unseen tokens.
pub struct NgramScorer {
    order: usize,
    context_counts: HashMap<Vec<String>, u64>,
    ngram_counts: HashMap<Vec<String>, u64>,
    vocab: usize,
}

impl NgramScorer {
    pub fn train(corpus: &str, order: usize) -> NgramScorer {
        assert!(order >= 1);
        let mut context_counts: HashMap<Vec<String>, u64> = HashMap::new();
        let mut ngram_counts: HashMap<Vec<String>, u64> = HashMap::new();
        let mut vocab: std::collections::HashSet<String> = std::collections::HashSet::new();
        for line in corpus.lines() {
            let tokens: Vec<String> = line
                .split_whitespace()
                .map(|t| t.to_lowercase())
                .collect();
            for token in &tokens {
                vocab.insert(token.clone());
            }
            for i in 0..tokens.len() {
                let start = i.saturating_sub(order - 1);
                let ctx: Vec<String> = tokens[start..i].to_vec();
                let mut ngram = ctx.clone();
                ngram.push(tokens[i].clone());
                *context_counts.entry(ctx).or_default() += 1;
                *ngram_counts.entry(ngram).or_default() += 1;
            }
        }
        NgramScorer {
            order,
            context_counts,
            ngram_counts,
            vocab: vocab.len() + 1,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }
}

impl TokenScorer for NgramScorer {
    fn prob(&self, prefix: &[&str], next: &str) -> f64 {
        let start = prefix.len().saturating_sub(self.order - 1);
        let ctx: Vec<String> = prefix[start..].iter().map(|t| t.to_lowercase()).collect();
        let mut ngram = ctx.clone();
        ngram.push(next.to_lowercase());
        let ctx_count = self.context_counts.get(&ctx).copied().unwrap_or(0);
        let ngram_count = self.ngram_counts.get(&ngram).copied().unwrap_or(0);
        (ngram_count as f64 + 1.0) / (ctx_count as f64 + self.vocab as f64)
    }
}

/// Steganalysis confusion counts; stego texts are the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

pub fn accuracy(c: ConfusionCounts) -> Result<f64, MetricsError> {
    let total = c.tp + c.tn + c.fp + c.fn_;
    if total == 0 {
        return Err(MetricsError::EmptyCounts);
    }
    Ok((c.tp + c.tn) as f64 / total as f64)
}

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

pub const SIGMA_FLOOR: f64 = 1e-12;

/// Summarize per-dimension samples: `samples[d]` holds the values observed
/// for dimension d. Sigma is floored at 1e-12 so degenerate dimensions stay
/// usable in the KLD formula.
pub fn gaussian_summarize(samples: &[Vec<f64>]) -> Result<GaussianSummary, MetricsError> {
    let mut mu = Vec::with_capacity(samples.len());
    let mut sigma = Vec::with_capacity(samples.len());
    for dim in samples {
        if dim.len() < 2 {
            return Err(MetricsError::TooFewSamples(dim.len()));
        }
        let n = dim.len() as f64;
        let mean = dim.iter().sum::<f64>() / n;
        let var = dim.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        mu.push(mean);
        sigma.push(var.sqrt().max(SIGMA_FLOOR));
    }
    Ok(GaussianSummary { mu, sigma })
}

/// Sum over dimensions of
/// `log(sigma_y/sigma_x) + (sigma_x^2 + (mu_x - mu_y)^2) / (2 sigma_y^2) - 1/2`.
pub fn kld_gaussian(x: &GaussianSummary, y: &GaussianSummary) -> Result<f64, MetricsError> {
    if x.mu.len() != y.mu.len() {
        return Err(MetricsError::DimensionMismatch {
            x: x.mu.len(),
            y: y.mu.len(),
        });
    }
    let mut total = 0.0;
    for i in 0..x.mu.len() {
        let (mx, sx) = (x.mu[i], x.sigma[i]);
        let (my, sy) = (y.mu[i], y.sigma[i]);
        total += (sy / sx).ln() + (sx * sx + (mx - my).powi(2)) / (2.0 * sy * sy) - 0.5;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn capacity_values() {
        assert!((embedding_capacity(64, 13).unwrap() - 4.923).abs() < 5e-4);
        assert_eq!(embedding_capacity(0, 10).unwrap(), 0.0);
        assert_eq!(embedding_capacity(1, 0).unwrap_err(), MetricsError::ZeroWords);
        // Reference rate: 1.39 bpw at mean length 14.391 means ~20 bits per
        // sentence under the same formula.
        let bits: f64 = 1.39 * 14.391;
        assert!((embedding_capacity(bits.round() as u64, 14) .unwrap() - 1.43).abs() < 0.01);
    }

    struct Fixed(f64);
    impl TokenScorer for Fixed {
        fn prob(&self, _prefix: &[&str], _next: &str) -> f64 {
            self.0
        }
    }

    #[test]
    fn two_quarter_tokens_give_ppl_4() {
        assert_eq!(perplexity(&Fixed(0.25), &["a", "b"]).unwrap(), 4.0);
    }

    #[test]
    fn uniform_scorer_gives_vocab_size() {
        let v = 128.0;
        let ppl = perplexity(&Fixed(1.0 / v), &["x"; 17]).unwrap();
        assert!((ppl - v).abs() < 1e-9);
    }

    #[test]
    fn empty_text_and_bad_prob() {
        assert_eq!(perplexity(&Fixed(0.5), &[]).unwrap_err(), MetricsError::EmptyText);
        assert!(matches!(
            perplexity(&Fixed(0.0), &["a"]).unwrap_err(),
            MetricsError::BadProbability { .. }
        ));
    }

    #[test]
    fn bigram_scorer_matches_hand_computation() {
        // Corpus: three "sentences", vocabulary {the, dog, cat, runs} -> V = 5.
        let corpus = "the dog runs\nthe cat runs\nthe dog sleeps";
        let scorer = NgramScorer::train(corpus, 2);
        assert_eq!(scorer.vocab_size(), 6); // the,dog,cat,runs,sleeps + unseen

        // Hand-computed brute-force log sum for "the dog runs":
        // p(the | <start>) = (count([], the)=3? No: empty context counts every
        //   line-initial position) -> ctx [] seen 3 times, ngram [the] 3 times
        //   = (3+1)/(3+6)
        // p(dog | the) = (2+1)/(3+6)
        // p(runs | dog) = (1+1)/(2+6)
        let p1: f64 = 4.0 / 9.0;
        let p2: f64 = 3.0 / 9.0;
        let p3: f64 = 2.0 / 8.0;
        let expected = (-(p1.ln() + p2.ln() + p3.ln()) / 3.0).exp();
        let got = perplexity(&scorer, &["the", "dog", "runs"]).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn perplexity_invariant_under_relabeling() {
        let corpus = "aa bb cc\naa bb dd";
        let scorer = NgramScorer::train(corpus, 2);
        let relabeled = NgramScorer::train(&corpus.replace("aa", "zz"), 2);
        let a = perplexity(&scorer, &["aa", "bb", "cc"]).unwrap();
        let b = perplexity(&relabeled, &["zz", "bb", "cc"]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn accuracy_cases() {
        let perfect = ConfusionCounts { tp: 500, tn: 500, fp: 0, fn_: 0 };
        assert_eq!(accuracy(perfect).unwrap(), 1.0);
        let near_chance = ConfusionCounts { tp: 515, tn: 516, fp: 484, fn_: 485 };
        assert_eq!(accuracy(near_chance).unwrap(), 0.5155);
        let zero = ConfusionCounts { tp: 0, tn: 0, fp: 0, fn_: 0 };
        assert_eq!(accuracy(zero).unwrap_err(), MetricsError::EmptyCounts);
    }

    #[test]
    fn summarize_basics() {
        let s = gaussian_summarize(&[vec![0.0, 2.0]]).unwrap();
        assert_eq!(s.mu, vec![1.0]);
        assert_eq!(s.sigma, vec![1.0]);
        let degenerate = gaussian_summarize(&[vec![3.0, 3.0, 3.0]]).unwrap();
        assert_eq!(degenerate.sigma, vec![SIGMA_FLOOR]);
        assert!(matches!(
            gaussian_summarize(&[vec![1.0]]),
            Err(MetricsError::TooFewSamples(1))
        ));
    }

    #[test]
    fn summarize_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dims: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..50).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let s = gaussian_summarize(&dims).unwrap();
        for (d, dim) in dims.iter().enumerate() {
            let n = dim.len() as f64;
            let mean: f64 = dim.iter().sum::<f64>() / n;
            let var: f64 = dim.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            assert!((s.mu[d] - mean).abs() <= 1e-12);
            assert!((s.sigma[d] - var.sqrt()).abs() <= 1e-12);
        }
    }

    #[test]
    fn kld_identity_and_hand_value() {
        let x = GaussianSummary { mu: vec![0.0], sigma: vec![1.0] };
        assert_eq!(kld_gaussian(&x, &x).unwrap(), 0.0);
        let y = GaussianSummary { mu: vec![1.0], sigma: vec![1.0] };
        assert!((kld_gaussian(&x, &y).unwrap() - 0.5).abs() < 1e-15);
        let z = GaussianSummary { mu: vec![0.0, 1.0], sigma: vec![1.0, 2.0] };
        assert!(matches!(
            kld_gaussian(&x, &z),
            Err(MetricsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kld_nonnegative_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let dims = rng.gen_range(1..6);
            let summary = |rng: &mut ChaCha8Rng| GaussianSummary {
                mu: (0..dims).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                sigma: (0..dims).map(|_| rng.gen_range(0.01..3.0)).collect(),
            };
            let x = summary(&mut rng);
            let y = summary(&mut rng);
            assert!(kld_gaussian(&x, &y).unwrap() >= -1e-12);
            assert!(kld_gaussian(&x, &x).unwrap().abs() == 0.0);
        }
    }

    #[test]
    fn kld_grows_with_sigma_y_when_far() {
        // With sigma_x = sigma_y = 1 and means 3 apart, widening y first
        // lowers then raises the divergence; check the formula reacts.
        let x = GaussianSummary { mu: vec![0.0], sigma: vec![1.0] };
        let at = |sy: f64| {
            kld_gaussian(
                &x,
                &GaussianSummary { mu: vec![3.0], sigma: vec![sy] },
            )
            .unwrap()
        };
        assert!(at(1.0) > at(3.0)); // widening toward the optimum shrinks it
        assert!(at(30.0) > at(3.0)); // overshooting grows it again
    }
}
