//! Python bindings for the keyword steganography toolkit.
//!
//! The module exposes catalog management, mock-provider embed/extract, and
//! the evaluation metrics. Envelope files use the same JSONL wire format as
//! the command-line tool, so artifacts are interchangeable.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use stega_core::catalog::{self, KeywordCatalog};
use stega_core::cipher::{PrivateKey, TimeCode};
use stega_core::metrics;
use stega_core::pipeline::{
    embed_pipeline, extract_pipeline, read_envelopes, write_envelopes, Clock, SessionConfig,
};
use stega_core::provider::{MockBehavior, MockProvider, PromptLibrary};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_key(key_hex: &str) -> PyResult<PrivateKey> {
    PrivateKey::from_hex(key_hex)
        .ok_or_else(|| value_err("key must be exactly 16 hex digits"))
}

fn mock_provider(seed: u64, drop_rate: f64) -> MockProvider {
    let behavior = if drop_rate > 0.0 {
        MockBehavior::Noisy { drop_rate }
    } else {
        MockBehavior::Exact
    };
    MockProvider::new(seed, behavior)
}

/// A validated keyword catalog with a content fingerprint.
#[pyclass(name = "Catalog")]
struct PyCatalog {
    inner: KeywordCatalog,
}

#[pymethods]
impl PyCatalog {
    #[getter]
    fn theme(&self) -> &str {
        &self.inner.theme
    }

    #[getter]
    fn version(&self) -> u32 {
        self.inner.version
    }

    #[getter]
    fn fingerprint(&self) -> &str {
        &self.inner.fingerprint
    }

    /// (surface, probability) pairs for one of "subject", "predicate",
    /// "object", "emotion".
    fn keywords(&self, role: &str) -> PyResult<Vec<(String, f64)>> {
        let role = stega_core::catalog::SubsetRole::parse(role)
            .ok_or_else(|| value_err(format!("unknown subset role '{role}'")))?;
        Ok(self
            .inner
            .subset(role)
            .entries
            .iter()
            .map(|k| (k.surface.clone(), k.probability))
            .collect())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(runtime_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyCatalog> {
        Ok(PyCatalog {
            inner: KeywordCatalog::load(&path).map_err(runtime_err)?,
        })
    }
}

/// Generate a fresh random 64-bit key as 16 lowercase hex digits.
#[pyfunction]
fn generate_key() -> String {
    let key = PrivateKey {
        k64: rand::Rng::gen(&mut rand::rngs::OsRng),
    };
    key.to_hex()
}

/// Build a keyword catalog through the deterministic mock provider.
#[pyfunction]
#[pyo3(signature = (theme, seed = 1))]
fn build_catalog(theme: &str, seed: u64) -> PyResult<PyCatalog> {
    let mut provider = mock_provider(seed, 0.0);
    let library = PromptLibrary::builtin();
    let inner = catalog::build_catalog(&mut provider, &library, theme).map_err(runtime_err)?;
    Ok(PyCatalog { inner })
}

/// Embed `payload` into stego envelopes written as JSONL to `out_path`,
/// using the mock provider. Returns a run-report dict.
#[pyfunction]
#[pyo3(signature = (payload, key_hex, catalog, out_path, seed = 42, drop_rate = 0.0, max_iterations = 8))]
#[allow(clippy::too_many_arguments)]
fn embed(
    py: Python<'_>,
    payload: Vec<u8>,
    key_hex: &str,
    catalog: &PyCatalog,
    out_path: PathBuf,
    seed: u64,
    drop_rate: f64,
    max_iterations: u32,
) -> PyResult<Py<PyDict>> {
    let key = parse_key(key_hex)?;
    let mut provider = mock_provider(seed, drop_rate);
    let mut session = SessionConfig {
        max_iterations,
        max_len: 30,
        theme: catalog.inner.theme.clone(),
        clock: Clock::fixed(TimeCode::new(25, 1, 1, 0, 0, 0).unwrap(), 1),
    };
    let (envelopes, report) =
        embed_pipeline(&payload, key, &mut provider, &catalog.inner, &mut session)
            .map_err(runtime_err)?;
    write_envelopes(&envelopes, &out_path).map_err(runtime_err)?;

    let out = PyDict::new(py);
    out.set_item("sentences", report.per_sentence_iterations.len())?;
    out.set_item("iterations", report.per_sentence_iterations.clone())?;
    out.set_item("mean_iterations", report.mean_iterations())?;
    out.set_item("reject_rate", report.reject_rate)?;
    out.set_item("total_words", report.total_words)?;
    out.set_item("embedded_bits", report.embedded_bits)?;
    out.set_item(
        "capacity_bpw",
        metrics::embedding_capacity(report.embedded_bits, report.total_words)
            .map_err(runtime_err)?,
    )?;
    Ok(out.into())
}

/// Recover a payload from a JSONL envelope file using the mock provider.
#[pyfunction]
#[pyo3(signature = (in_path, key_hex, catalog, seed = 42))]
fn extract(
    py: Python<'_>,
    in_path: PathBuf,
    key_hex: &str,
    catalog: &PyCatalog,
    seed: u64,
) -> PyResult<Py<PyBytes>> {
    let key = parse_key(key_hex)?;
    let envelopes = read_envelopes(&in_path).map_err(runtime_err)?;
    let mut provider = mock_provider(seed, 0.0);
    let payload = extract_pipeline(&envelopes, key, &mut provider, &catalog.inner)
        .map_err(runtime_err)?;
    Ok(PyBytes::new(py, &payload).into())
}

/// Number of sentences needed for a payload of `payload_bytes` bytes.
#[pyfunction]
fn sentence_count(payload_bytes: usize) -> usize {
    stega_core::codec::sentence_count(payload_bytes)
}

/// Embedding capacity in bits per word.
#[pyfunction]
fn embedding_capacity(bits: u64, words: u64) -> PyResult<f64> {
    metrics::embedding_capacity(bits, words).map_err(value_err)
}

/// Steganalysis accuracy from confusion counts.
#[pyfunction(name = "accuracy")]
#[pyo3(signature = (tp, tn, fp, fn_))]
fn accuracy_py(tp: u64, tn: u64, fp: u64, fn_: u64) -> PyResult<f64> {
    metrics::accuracy(metrics::ConfusionCounts { tp, tn, fp, fn_ }).map_err(value_err)
}

/// Perplexity of `text` under an add-one-smoothed n-gram model trained on
/// `corpus` (one sentence per line).
#[pyfunction]
#[pyo3(signature = (text, corpus, order = 2))]
fn perplexity(text: &str, corpus: &str, order: usize) -> PyResult<f64> {
    let scorer = metrics::NgramScorer::train(corpus, order);
    let lowered = text.to_lowercase();
    let tokens = metrics::word_tokens(&lowered);
    metrics::perplexity(&scorer, &tokens).map_err(value_err)
}

/// Gaussian KL divergence between two sample matrices (rows are samples).
#[pyfunction]
fn kld(x_rows: Vec<Vec<f64>>, y_rows: Vec<Vec<f64>>) -> PyResult<f64> {
    let transpose = |rows: &[Vec<f64>]| -> PyResult<Vec<Vec<f64>>> {
        let dims = rows.first().map(|r| r.len()).unwrap_or(0);
        if dims == 0 || rows.iter().any(|r| r.len() != dims) {
            return Err(value_err("samples must be non-empty rows of equal length"));
        }
        Ok((0..dims)
            .map(|d| rows.iter().map(|r| r[d]).collect())
            .collect())
    };
    let sx = metrics::gaussian_summarize(&transpose(&x_rows)?).map_err(value_err)?;
    let sy = metrics::gaussian_summarize(&transpose(&y_rows)?).map_err(value_err)?;
    metrics::kld_gaussian(&sx, &sy).map_err(value_err)
}

#[pymodule]
fn stega_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCatalog>()?;
    m.add_function(wrap_pyfunction!(generate_key, m)?)?;
    m.add_function(wrap_pyfunction!(build_catalog, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(sentence_count, m)?)?;
    m.add_function(wrap_pyfunction!(embedding_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy_py, m)?)?;
    m.add_function(wrap_pyfunction!(perplexity, m)?)?;
    m.add_function(wrap_pyfunction!(kld, m)?)?;
    Ok(())
}
