//! Operator entry point: catalog management, key generation, embed/extract,
//! metrics, and an offline mock demo.
//!
//! Diagnostics go to stderr; payload data goes to the file or stream named
//! by `--out`. Exit status is nonzero on any failure.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stega_core::augment::AugmentedCatalog;
use stega_core::catalog::{self, KeywordCatalog};
use stega_core::cipher::{PrivateKey, TimeCode};
use stega_core::metrics::{
    accuracy, embedding_capacity, gaussian_summarize, kld_gaussian, perplexity, word_tokens,
    ConfusionCounts, NgramScorer,
};
use stega_core::pipeline::{
    embed_pipeline, extract_pipeline, read_envelopes, write_envelopes, Clock, RunReport,
    SessionConfig,
};
use stega_core::provider::{
    HttpProvider, LlmProvider, MockBehavior, MockProvider, PromptLibrary, ProviderConfig,
};

#[derive(Parser)]
#[command(name = "stega", version, about = "Keyword steganography over LLM interfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Provider selection shared by commands that talk to an LLM.
#[derive(Args)]
struct ProviderArgs {
    /// Use the deterministic offline mock provider.
    #[arg(long, conflicts_with = "endpoint")]
    mock: bool,
    /// Seed for the mock provider.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Mock keyword drop rate per generation (0.0 = exact).
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
    /// Chat-completion endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model identifier sent to the endpoint.
    #[arg(long, default_value = "gpt-4")]
    model: String,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = "STEGA_API_TOKEN")]
    auth_env: String,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Transport retries on transient failures.
    #[arg(long, default_value_t = 2)]
    retries: u32,
}

impl ProviderArgs {
    fn build(&self) -> Result<Box<dyn LlmProvider>, String> {
        if self.mock {
            let behavior = if self.drop_rate > 0.0 {
                MockBehavior::Noisy {
                    drop_rate: self.drop_rate,
                }
            } else {
                MockBehavior::Exact
            };
            return Ok(Box::new(MockProvider::new(self.seed, behavior)));
        }
        let endpoint = self
            .endpoint
            .clone()
            .ok_or("either --mock or --endpoint is required")?;
        let config = ProviderConfig {
            endpoint,
            model: self.model.clone(),
            auth_env: self.auth_env.clone(),
            timeout_secs: self.timeout,
            max_retries: self.retries,
            decoding: serde_json::Map::new(),
        };
        HttpProvider::new(config)
            .map(|p| Box::new(p) as Box<dyn LlmProvider>)
            .map_err(|e| e.to_string())
    }

    /// Mock runs get a fixed clock so envelope files are bit-reproducible.
    fn clock(&self) -> Clock {
        if self.mock {
            Clock::fixed(TimeCode::new(25, 1, 1, 0, 0, 0).unwrap(), 1)
        } else {
            Clock::System
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build or inspect a keyword catalog.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Generate a fresh 64-bit key file (16 lowercase hex digits).
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed a payload into stego envelopes.
    Embed {
        /// Payload file; stdin when omitted.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "Entertainment News")]
        theme: String,
        #[arg(long, default_value_t = 8)]
        max_iters: u32,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Recover a payload from an envelope file.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        /// Payload destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Compute a metric.
    Metrics {
        #[command(subcommand)]
        metric: MetricCommand,
    },
    /// Offline smoke test: keygen, catalog build, embed, extract, compare.
    Demo {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "Entertainment News")]
        theme: String,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    Build {
        #[arg(long)]
        theme: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    Inspect {
        #[arg(long)]
        catalog: PathBuf,
    },
}

#[derive(Subcommand)]
enum MetricCommand {
    /// Embedding capacity (bits per word) of an envelope file.
    Ec {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Perplexity of a text under an add-one-smoothed n-gram scorer.
    Ppl {
        #[arg(long = "in")]
        input: PathBuf,
        /// Training corpus, one sentence per line.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Gaussian KL divergence between two sample matrices (JSON rows).
    Kld {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        against: PathBuf,
    },
    /// Steganalysis accuracy from confusion counts.
    Acc {
        #[arg(long)]
        tp: u64,
        #[arg(long)]
        tn: u64,
        #[arg(long)]
        fp: u64,
        #[arg(long = "fn")]
        fn_: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn read_key(path: &Path) -> Result<PrivateKey, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read key {path:?}: {e}"))?;
    PrivateKey::from_hex(&text).ok_or_else(|| format!("{path:?} is not 16 hex digits"))
}

fn print_report(report: &RunReport) -> Result<(), String> {
    println!("sentences:      {}", report.per_sentence_iterations.len());
    println!("mean iterations: {:.3}", report.mean_iterations());
    println!("reject rate:    {:.3}", report.reject_rate);
    println!("total words:    {}", report.total_words);
    let ec = embedding_capacity(report.embedded_bits, report.total_words)
        .map_err(|e| e.to_string())?;
    println!("capacity:       {ec:.3} bpw");
    let json = serde_json::to_string(report).map_err(|e| e.to_string())?;
    println!("{json}");
    Ok(())
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Catalog { action } => match action {
            CatalogAction::Build {
                theme,
                out,
                provider,
            } => {
                let mut llm = provider.build()?;
                let library = PromptLibrary::builtin();
                let built = catalog::build_catalog(llm.as_mut(), &library, &theme)
                    .map_err(|e| e.to_string())?;
                built.save(&out).map_err(|e| e.to_string())?;
                eprintln!("catalog written to {out:?} (fingerprint {})", built.fingerprint);
                Ok(())
            }
            CatalogAction::Inspect { catalog } => {
                let loaded = KeywordCatalog::load(&catalog).map_err(|e| e.to_string())?;
                let augs = AugmentedCatalog::from_catalog(&loaded).map_err(|e| e.to_string())?;
                println!("theme:       {}", loaded.theme);
                println!("version:     {}", loaded.version);
                println!("fingerprint: {}", loaded.fingerprint);
                for subset in loaded.subsets() {
                    let aug = augs.subset(subset.role);
                    println!(
                        "{} ({} entries, capacity {}, sum p = {:.12}):",
                        subset.role,
                        subset.entries.len(),
                        aug.capacity,
                        subset.probability_sum()
                    );
                    for (kw, block) in subset.entries.iter().zip(&aug.blocks) {
                        println!(
                            "  {:<16} p={:<22} block [{}, {})",
                            kw.surface,
                            kw.probability,
                            block.base,
                            block.base + block.length
                        );
                    }
                }
                Ok(())
            }
        },
        Command::Keygen { out } => {
            let key = PrivateKey {
                k64: rand::Rng::gen(&mut rand::rngs::OsRng),
            };
            std::fs::write(&out, format!("{}\n", key.to_hex()))
                .map_err(|e| format!("cannot write {out:?}: {e}"))?;
            eprintln!("key written to {out:?}");
            Ok(())
        }
        Command::Embed {
            input,
            key,
            catalog,
            out,
            theme,
            max_iters,
            provider,
        } => {
            let payload = match input {
                Some(path) => std::fs::read(&path)
                    .map_err(|e| format!("cannot read payload {path:?}: {e}"))?,
                None => {
                    let mut buf = Vec::new();
                    std::io::stdin()
                        .read_to_end(&mut buf)
                        .map_err(|e| e.to_string())?;
                    buf
                }
            };
            let key = read_key(&key)?;
            let loaded = KeywordCatalog::load(&catalog).map_err(|e| e.to_string())?;
            let mut session = SessionConfig {
                max_iterations: max_iters,
                max_len: 30,
                theme,
                clock: provider.clock(),
            };
            let mut llm = provider.build()?;
            let (envelopes, report) =
                embed_pipeline(&payload, key, llm.as_mut(), &loaded, &mut session)
                    .map_err(|e| e.to_string())?;
            write_envelopes(&envelopes, &out).map_err(|e| e.to_string())?;
            print_report(&report)?;
            Ok(())
        }
        Command::Extract {
            input,
            key,
            catalog,
            out,
            provider,
        } => {
            let envelopes = read_envelopes(&input).map_err(|e| e.to_string())?;
            let key = read_key(&key)?;
            let loaded = KeywordCatalog::load(&catalog).map_err(|e| e.to_string())?;
            let mut llm = provider.build()?;
            let payload = extract_pipeline(&envelopes, key, llm.as_mut(), &loaded)
                .map_err(|e| e.to_string())?;
            match out {
                Some(path) => std::fs::write(&path, &payload)
                    .map_err(|e| format!("cannot write {path:?}: {e}"))?,
                None => {
                    use std::io::Write;
                    std::io::stdout()
                        .write_all(&payload)
                        .map_err(|e| e.to_string())?;
                }
            }
            Ok(())
        }
        Command::Metrics { metric } => run_metric(metric),
        Command::Demo { seed, theme } => demo(seed, &theme),
    }
}

fn run_metric(metric: MetricCommand) -> Result<(), String> {
    match metric {
        MetricCommand::Ec { input } => {
            let envelopes = read_envelopes(&input).map_err(|e| e.to_string())?;
            let bits = envelopes.len() as u64 * 64;
            let words: u64 = envelopes
                .iter()
                .map(|e| word_tokens(&e.stego_text).len() as u64)
                .sum();
            let ec = embedding_capacity(bits, words).map_err(|e| e.to_string())?;
            println!("sentences: {}", envelopes.len());
            println!("bits:      {bits}");
            println!("words:     {words}");
            println!("ec_bpw:    {ec:.6}");
            Ok(())
        }
        MetricCommand::Ppl {
            input,
            corpus,
            order,
        } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| format!("cannot read {input:?}: {e}"))?;
            let corpus = std::fs::read_to_string(&corpus)
                .map_err(|e| format!("cannot read {corpus:?}: {e}"))?;
            let scorer = NgramScorer::train(&corpus, order);
            let lowered = text.to_lowercase();
            let tokens = word_tokens(&lowered);
            let ppl = perplexity(&scorer, &tokens).map_err(|e| e.to_string())?;
            println!("tokens: {}", tokens.len());
            println!("ppl:    {ppl:.6}");
            Ok(())
        }
        MetricCommand::Kld { input, against } => {
            let x = load_samples(&input)?;
            let y = load_samples(&against)?;
            let sx = gaussian_summarize(&x).map_err(|e| e.to_string())?;
            let sy = gaussian_summarize(&y).map_err(|e| e.to_string())?;
            let kld = kld_gaussian(&sx, &sy).map_err(|e| e.to_string())?;
            println!("dimensions: {}", sx.mu.len());
            println!("kld:        {kld:.9}");
            Ok(())
        }
        MetricCommand::Acc { tp, tn, fp, fn_ } => {
            let acc = accuracy(ConfusionCounts { tp, tn, fp, fn_ }).map_err(|e| e.to_string())?;
            println!("accuracy: {acc:.4}");
            Ok(())
        }
    }
}

/// JSON file of sample rows -> per-dimension columns.
fn load_samples(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(&text).map_err(|e| format!("{path:?}: {e}"))?;
    if rows.is_empty() {
        return Err(format!("{path:?}: no samples"));
    }
    let dims = rows[0].len();
    if rows.iter().any(|r| r.len() != dims) {
        return Err(format!("{path:?}: ragged sample rows"));
    }
    Ok((0..dims)
        .map(|d| rows.iter().map(|r| r[d]).collect())
        .collect())
}

fn demo(seed: u64, theme: &str) -> Result<(), String> {
    let dir = tempfile_dir()?;
    let key_path = dir.join("demo.key");
    let catalog_path = dir.join("demo.catalog.json");
    let env_path = dir.join("demo.envelopes.jsonl");
    let payload = b"meet at the old pier at nine".to_vec();

    run(Command::Keygen {
        out: key_path.clone(),
    })?;
    let mut mock = MockProvider::new(seed, MockBehavior::Exact);
    let library = PromptLibrary::builtin();
    let built =
        catalog::build_catalog(&mut mock, &library, theme).map_err(|e| e.to_string())?;
    built.save(&catalog_path).map_err(|e| e.to_string())?;

    let key = read_key(&key_path)?;
    let mut session = SessionConfig {
        max_iterations: 8,
        max_len: 30,
        theme: theme.to_string(),
        clock: Clock::fixed(TimeCode::new(25, 1, 1, 0, 0, 0).unwrap(), 1),
    };
    let (envelopes, report) =
        embed_pipeline(&payload, key, &mut mock, &built, &mut session).map_err(|e| e.to_string())?;
    write_envelopes(&envelopes, &env_path).map_err(|e| e.to_string())?;
    for env in &envelopes {
        println!("[{}] {}  {}", env.seq, env.timecode.format(), env.stego_text);
    }
    print_report(&report)?;

    let loaded = read_envelopes(&env_path).map_err(|e| e.to_string())?;
    let decoded =
        extract_pipeline(&loaded, key, &mut mock, &built).map_err(|e| e.to_string())?;
    if decoded != payload {
        return Err("demo round trip failed: decoded payload differs".to_string());
    }
    println!("round trip ok: {:?}", String::from_utf8_lossy(&decoded));
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

fn tempfile_dir() -> Result<PathBuf, String> {
    let dir = std::env::temp_dir().join(format!("stega-demo-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    Ok(dir)
}
