//! Python bindings: corpora, training, parsing, confidence scores, DLMs,
//! evaluation and agreement selection.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use semiparse::confidence::{self, ConfidenceMethod};
use semiparse::corpus::{self, Format};
use semiparse::decoder::decode_corpus;
use semiparse::dlm::{self, UnitScheme};
use semiparse::error::Error;
use semiparse::eval::{self, EvalOptions};
use semiparse::learn::{train_on_corpus, LearnerConfig, TrainConfig};
use semiparse::model::WeightModel;
use semiparse::semisup::{self, AgreementCriteria};

fn err(e: Error) -> PyErr {
    match e {
        Error::File { .. } | Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parsed<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// One sentence with optional gold or predicted annotation.
#[pyclass(module = "pysemiparse", from_py_object)]
#[derive(Clone)]
pub struct Sentence {
    inner: corpus::Sentence,
}

#[pymethods]
impl Sentence {
    /// Builds a sentence from `(form, pos, head, deprel)` rows; heads are
    /// 1-based with 0 for the root.
    #[new]
    fn new(rows: Vec<(String, String, usize, String)>) -> Self {
        Sentence {
            inner: corpus::Sentence::from_rows(&rows),
        }
    }

    #[getter]
    fn forms(&self) -> Vec<String> {
        self.inner.forms().map(str::to_owned).collect()
    }

    #[getter]
    fn tags(&self) -> Vec<String> {
        self.inner.tokens.iter().map(|t| t.pos_str().to_owned()).collect()
    }

    #[getter]
    fn heads(&self) -> Vec<Option<usize>> {
        self.inner.heads()
    }

    #[getter]
    fn labels(&self) -> Vec<Option<String>> {
        self.inner.tokens.iter().map(|t| t.deprel.clone()).collect()
    }

    /// Copy without heads and labels.
    fn stripped(&self) -> Self {
        Sentence {
            inner: self.inner.stripped(),
        }
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate_tree().map_err(err)
    }

    fn is_projective(&self) -> bool {
        self.inner.is_projective()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Sentence({:?})", self.forms().join(" "))
    }
}

fn unwrap(sentences: &[Sentence]) -> Vec<corpus::Sentence> {
    sentences.iter().map(|s| s.inner.clone()).collect()
}

fn wrap(sentences: Vec<corpus::Sentence>) -> Vec<Sentence> {
    sentences.into_iter().map(|inner| Sentence { inner }).collect()
}

#[pyfunction]
#[pyo3(signature = (path, format = "conll06"))]
fn read_conll(path: &str, format: &str) -> PyResult<Vec<Sentence>> {
    Ok(wrap(corpus::read_conll_file(path, parsed::<Format>(format)?).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (path, sentences, format = "conll06"))]
fn write_conll(path: &str, sentences: Vec<Sentence>, format: &str) -> PyResult<()> {
    corpus::write_conll_file(path, &unwrap(&sentences), parsed::<Format>(format)?).map_err(err)
}

/// Dependency language model table.
#[pyclass(module = "pysemiparse")]
pub struct DlmTable {
    inner: dlm::DlmTable,
}

#[pymethods]
impl DlmTable {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(DlmTable {
            inner: dlm::DlmTable::load(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    /// `(PH, PM, PL)` entry counts.
    fn class_sizes(&self) -> (usize, usize, usize) {
        self.inner.class_sizes()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(signature = (sentences, order = 1, min_count = 3, unit = "form"))]
fn extract_dlm(sentences: Vec<Sentence>, order: usize, min_count: usize, unit: &str) -> PyResult<DlmTable> {
    let scheme = parsed::<UnitScheme>(unit)?;
    Ok(DlmTable {
        inner: dlm::extract_dlm(&unwrap(&sentences), order, min_count, scheme).map_err(err)?,
    })
}

/// A trained parser.
#[pyclass(module = "pysemiparse")]
pub struct Model {
    inner: WeightModel,
}

#[pymethods]
impl Model {
    /// Trains on gold sentences. `dlms` are DLM file paths; the model
    /// records them and reloads them in `Model.load`.
    #[staticmethod]
    #[pyo3(signature = (
        sentences, system = "arc-standard-swap", beam = 40, iterations = 25, hash_bits = 22,
        early_update = false, average = true, dlms = Vec::new()
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        sentences: Vec<Sentence>,
        system: &str,
        beam: usize,
        iterations: usize,
        hash_bits: u32,
        early_update: bool,
        average: bool,
        dlms: Vec<String>,
    ) -> PyResult<Self> {
        let config = LearnerConfig {
            system: parsed(system)?,
            hash_bits,
            train: TrainConfig {
                beam,
                iterations,
                early_update,
                average,
            },
            ..LearnerConfig::default()
        };
        let tables = dlms
            .into_iter()
            .map(|p| dlm::DlmTable::load(&p).map(|t| (p, t)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let corpus = unwrap(&sentences);
        let inner = py
            .detach(|| train_on_corpus(&corpus, &config, &tables))
            .map_err(err)?;
        Ok(Model { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Model {
            inner: WeightModel::load(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn system(&self) -> String {
        self.inner.system().to_string()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().names().to_vec()
    }

    /// Parses each sentence; returns `(tree, parse score)` pairs.
    #[pyo3(signature = (sentences, beam = 40))]
    fn parse(&self, py: Python<'_>, sentences: Vec<Sentence>, beam: usize) -> PyResult<Vec<(Sentence, f64)>> {
        let raw: Vec<_> = sentences.iter().map(|s| s.inner.stripped()).collect();
        let out = py.detach(|| decode_corpus(&raw, &self.inner, beam, None)).map_err(err)?;
        Ok(out.into_iter().map(|(inner, score)| (Sentence { inner }, score)).collect())
    }

    /// Parses and scores each sentence; one dict per sentence with keys
    /// `sentence`, `raw`, `adjusted` and `delta` (None when not computed).
    #[pyo3(signature = (sentences, beam = 40, d = Some(0.015), delta = false))]
    fn confidence<'py>(
        &self,
        py: Python<'py>,
        sentences: Vec<Sentence>,
        beam: usize,
        d: Option<f64>,
        delta: bool,
    ) -> PyResult<Vec<Bound<'py, pyo3::types::PyDict>>> {
        let raw: Vec<_> = sentences.iter().map(|s| s.inner.stripped()).collect();
        let scored = py
            .detach(|| confidence::score_corpus(&raw, &self.inner, beam, d, delta))
            .map_err(err)?;
        scored
            .into_iter()
            .map(|p| {
                let dict = pyo3::types::PyDict::new(py);
                dict.set_item("raw", p.raw)?;
                dict.set_item("adjusted", p.adjusted.map(|a| a.1))?;
                dict.set_item("delta", p.delta)?;
                dict.set_item("sentence", Sentence { inner: p.sentence })?;
                Ok(dict)
            })
            .collect()
    }
}

/// `(UAS, LAS)` of `pred` against `gold`.
#[pyfunction]
#[pyo3(signature = (gold, pred, include_punctuation = true))]
fn evaluate(gold: Vec<Sentence>, pred: Vec<Sentence>, include_punctuation: bool) -> PyResult<(f64, f64)> {
    let opts = EvalOptions {
        include_punctuation,
        ..EvalOptions::including_punctuation()
    };
    let r = eval::attachment_scores(&unwrap(&gold), &unwrap(&pred), &opts).map_err(err)?;
    Ok((r.uas(), r.las()))
}

/// Randomised comparison of two systems; returns `(p, swapped)` where
/// `swapped` means the second system scored higher.
#[pyfunction]
#[pyo3(signature = (gold, first, second, iterations = 10000, seed = 0))]
fn significance(
    gold: Vec<Sentence>,
    first: Vec<Sentence>,
    second: Vec<Sentence>,
    iterations: usize,
    seed: u64,
) -> PyResult<(f64, bool)> {
    let r = eval::significance(
        &unwrap(&gold),
        &unwrap(&first),
        &unwrap(&second),
        iterations,
        seed,
        &EvalOptions::including_punctuation(),
    )
    .map_err(err)?;
    Ok((r.p, r.swapped))
}

/// Sentences two parsers annotated identically.
#[pyfunction]
#[pyo3(signature = (a, b, min_length = None, max_selected = None))]
fn select_agreement(
    a: Vec<Sentence>,
    b: Vec<Sentence>,
    min_length: Option<usize>,
    max_selected: Option<usize>,
) -> PyResult<Vec<Sentence>> {
    let criteria = AgreementCriteria {
        min_length,
        max_selected,
    };
    let (selected, _) = semisup::select_agreement(&unwrap(&a), &unwrap(&b), &criteria).map_err(err)?;
    Ok(wrap(selected))
}

/// Indices of `scores` in descending order (stable).
#[pyfunction]
fn rank(scores: Vec<f64>) -> PyResult<Vec<usize>> {
    let parses: Vec<_> = scores
        .into_iter()
        .map(|s| confidence::ScoredParse::new(corpus::Sentence::new(Vec::new()), s))
        .collect();
    confidence::rank_by_confidence(&parses, ConfidenceMethod::Raw).map_err(err)
}

#[pyfunction]
fn adjusted_score(raw: f64, length: usize, d: f64) -> f64 {
    confidence::adjusted_score(raw, length, d)
}

#[pymodule]
fn pysemiparse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Sentence>()?;
    m.add_class::<Model>()?;
    m.add_class::<DlmTable>()?;
    m.add_function(wrap_pyfunction!(read_conll, m)?)?;
    m.add_function(wrap_pyfunction!(write_conll, m)?)?;
    m.add_function(wrap_pyfunction!(extract_dlm, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(significance, m)?)?;
    m.add_function(wrap_pyfunction!(select_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_score, m)?)?;
    Ok(())
}
