//! Data selection for co-training, tri-training and confidence-based
//! self-training, and the end-to-end pipeline that ties them together.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::confidence::{rank_by_confidence, score_corpus, ConfidenceMethod, ScoredParse, DEFAULT_D};
use crate::corpus::{read_conll_file, read_treebank, write_conll_file, Format, Sentence};
use crate::decoder::{decode_corpus, DEFAULT_BEAM};
use crate::error::{Error, Result};
use crate::eval::{attachment_scores, check_aligned, EvalOptions, EvalResult};
use crate::learn::{train_on_corpus, LearnerConfig, TrainConfig, DEFAULT_ITERATIONS};
use crate::model::{WeightModel, DEFAULT_HASH_BITS};
use crate::transition::System;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AgreementCriteria {
    pub min_length: Option<usize>,
    pub max_selected: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionReport {
    pub total: usize,
    pub candidates: usize,
    pub selected: usize,
    pub agreement_rate: f64,
    /// Mean length of the selected sentences.
    pub average_length: f64,
}

impl SelectionReport {
    pub fn new(total: usize, candidates: usize, selected: &[Sentence]) -> Self {
        let tokens: usize = selected.iter().map(Sentence::len).sum();
        SelectionReport {
            total,
            candidates,
            selected: selected.len(),
            agreement_rate: if total == 0 { 0.0 } else { candidates as f64 / total as f64 },
            average_length: if selected.is_empty() {
                0.0
            } else {
                tokens as f64 / selected.len() as f64
            },
        }
    }
}

impl fmt::Display for SelectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sentences\t{}", self.total)?;
        writeln!(f, "candidates\t{}", self.candidates)?;
        writeln!(f, "selected\t{}", self.selected)?;
        writeln!(f, "agreement-rate\t{:.4}", self.agreement_rate)?;
        writeln!(f, "average-length\t{:.2}", self.average_length)
    }
}

fn same_tree(a: &Sentence, b: &Sentence) -> bool {
    a.tokens.iter().zip(&b.tokens).all(|(x, y)| x.head == y.head && x.deprel == y.deprel)
}

/// Sentences on which both parses agree on every head and label, filtered
/// by `criteria`, in corpus order.
pub fn select_agreement(a: &[Sentence], b: &[Sentence], criteria: &AgreementCriteria) -> Result<(Vec<Sentence>, SelectionReport)> {
    select_agreement_excluding(a, b, None, criteria)
}

/// Like [`select_agreement`], but with `exclude` given, sentences on which
/// that third parse also agrees are dropped from the candidates.
pub fn select_agreement_excluding(
    a: &[Sentence],
    b: &[Sentence],
    exclude: Option<&[Sentence]>,
    criteria: &AgreementCriteria,
) -> Result<(Vec<Sentence>, SelectionReport)> {
    check_aligned(a, b)?;
    if let Some(c) = exclude {
        check_aligned(a, c)?;
    }
    let mut candidates = 0;
    let mut selected = Vec::new();
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if !same_tree(x, y) || exclude.is_some_and(|c| same_tree(x, &c[i])) {
            continue;
        }
        candidates += 1;
        if criteria.min_length.is_some_and(|m| x.len() < m) {
            continue;
        }
        if criteria.max_selected.is_some_and(|m| selected.len() >= m) {
            continue;
        }
        selected.push(x.clone());
    }
    let report = SelectionReport::new(a.len(), candidates, &selected);
    Ok((selected, report))
}

pub fn build_boosted_trainset(base: &[Sentence], additional: &[Sentence]) -> Vec<Sentence> {
    base.iter().chain(additional).cloned().collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Amount {
    Fraction(f64),
    Count(usize),
}

impl Amount {
    fn resolve(self, n: usize) -> Result<usize> {
        match self {
            Amount::Fraction(f) if f > 0.0 && f <= 1.0 => Ok((f * n as f64).floor() as usize),
            Amount::Fraction(f) => Err(Error::InvalidArgument(format!("fraction {f} is outside (0, 1]"))),
            Amount::Count(c) if c > n => {
                warn!("requested {c} sentences but only {n} are available; selecting all");
                Ok(n)
            }
            Amount::Count(c) => Ok(c),
        }
    }
}

/// Top sentences by confidence. Returns their indices (in rank order) and
/// the parses.
pub fn self_training_select(parses: &[ScoredParse], method: ConfidenceMethod, amount: Amount) -> Result<(Vec<usize>, Vec<Sentence>)> {
    let k = amount.resolve(parses.len())?;
    let order = rank_by_confidence(parses, method)?;
    let top: Vec<usize> = order.into_iter().take(k).collect();
    let sentences = top.iter().map(|&i| parses[i].sentence.clone()).collect();
    Ok((top, sentences))
}

/// A uniformly random subset of the given size, in corpus order.
pub fn random_select(sentences: &[Sentence], amount: Amount, seed: u64) -> Result<Vec<Sentence>> {
    let k = amount.resolve(sentences.len())?;
    let mut idx: Vec<usize> = (0..sentences.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| sentences[i].clone()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    SelfTraining,
    CoTraining,
    TriTraining,
    /// Random selection of the self-training amount, as a baseline.
    RandomSelection,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self_training" | "self-training" => Ok(Method::SelfTraining),
            "co_training" | "co-training" => Ok(Method::CoTraining),
            "tri_training" | "tri-training" => Ok(Method::TriTraining),
            "random" => Ok(Method::RandomSelection),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::SelfTraining => "self_training",
            Method::CoTraining => "co_training",
            Method::TriTraining => "tri_training",
            Method::RandomSelection => "random",
        })
    }
}

/// Pipeline settings, read from a flat `key = value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSpec {
    pub method: Method,
    pub train: PathBuf,
    pub unlabelled: PathBuf,
    pub test: Option<PathBuf>,
    pub output: PathBuf,
    pub format: Format,
    pub beam: usize,
    pub iterations: usize,
    pub hash_bits: u32,
    pub early_update: bool,
    pub seed: u64,
    pub amount: Amount,
    pub confidence: ConfidenceMethod,
    pub criteria: AgreementCriteria,
    /// Tri-training only; must be given explicitly.
    pub exclude_evaluation_learner: Option<bool>,
    pub include_punctuation: bool,
}

impl PipelineSpec {
    pub fn new(method: Method, train: impl Into<PathBuf>, unlabelled: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        PipelineSpec {
            method,
            train: train.into(),
            unlabelled: unlabelled.into(),
            test: None,
            output: output.into(),
            format: Format::Conll06,
            beam: DEFAULT_BEAM,
            iterations: DEFAULT_ITERATIONS,
            hash_bits: DEFAULT_HASH_BITS,
            early_update: false,
            seed: 0,
            amount: Amount::Fraction(0.5),
            confidence: ConfidenceMethod::Adjusted(DEFAULT_D),
            criteria: AgreementCriteria::default(),
            exclude_evaluation_learner: None,
            include_punctuation: true,
        }
    }

    /// Parses the spec text. Relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim().replace('-', "_");
            if kv.insert(k.clone(), v.trim().to_owned()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", n + 1)));
            }
        }
        let mut take = |k: &str| kv.remove(k);
        let required = |v: Option<String>, k: &str| v.ok_or_else(|| Error::Config(format!("missing key {k:?}")));
        let path = |v: String| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        fn num<T: FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {k:?}")))
        }
        fn flag(k: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("bad boolean {v:?} for {k:?}"))),
            }
        }

        let method: Method = required(take("method"), "method")?.parse()?;
        let mut spec = PipelineSpec::new(
            method,
            path(required(take("train"), "train")?),
            path(required(take("unlabelled"), "unlabelled")?),
            path(required(take("output"), "output")?),
        );
        spec.test = take("test").map(path);
        if let Some(v) = take("format") {
            spec.format = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        }
        if let Some(v) = take("beam") {
            spec.beam = num("beam", &v)?;
        }
        if let Some(v) = take("iterations") {
            spec.iterations = num("iterations", &v)?;
        }
        if let Some(v) = take("hash_bits") {
            spec.hash_bits = num("hash_bits", &v)?;
        }
        if let Some(v) = take("early_update") {
            spec.early_update = flag("early_update", &v)?;
        }
        if let Some(v) = take("seed") {
            spec.seed = num("seed", &v)?;
        }
        match (take("fraction"), take("count")) {
            (Some(_), Some(_)) => return Err(Error::Config("give either fraction or count, not both".into())),
            (Some(f), None) => spec.amount = Amount::Fraction(num("fraction", &f)?),
            (None, Some(c)) => spec.amount = Amount::Count(num("count", &c)?),
            (None, None) => {}
        }
        if let Some(v) = take("confidence") {
            spec.confidence = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        }
        if let Some(v) = take("d") {
            spec.confidence = ConfidenceMethod::Adjusted(num("d", &v)?);
        }
        if let Some(v) = take("min_length") {
            spec.criteria.min_length = Some(num("min_length", &v)?);
        }
        if let Some(v) = take("max_selected") {
            spec.criteria.max_selected = Some(num("max_selected", &v)?);
        }
        if let Some(v) = take("exclude_evaluation_learner") {
            spec.exclude_evaluation_learner = Some(flag("exclude_evaluation_learner", &v)?);
        }
        if let Some(v) = take("include_punctuation") {
            spec.include_punctuation = flag("include_punctuation", &v)?;
        }
        if let Some(k) = kv.keys().next() {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        PipelineSpec::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks every input exists and every setting is usable.
    pub fn validate(&self) -> Result<()> {
        let inputs = [Some(&self.train), Some(&self.unlabelled), self.test.as_ref()];
        for p in inputs.into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("missing input file {}", p.display())));
            }
        }
        if self.beam == 0 || self.iterations == 0 {
            return Err(Error::Config("beam and iterations must be at least 1".into()));
        }
        if let Amount::Fraction(f) = self.amount {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("fraction {f} is outside (0, 1]")));
            }
        }
        if self.method == Method::TriTraining && self.exclude_evaluation_learner.is_none() {
            return Err(Error::Config("tri_training needs exclude_evaluation_learner = true|false".into()));
        }
        if self.method == Method::CoTraining && self.exclude_evaluation_learner == Some(true) {
            return Err(Error::Config("co_training uses the evaluation learner as a source; exclusion is undefined".into()));
        }
        Ok(())
    }

    fn learner(&self, system: System, beam: usize) -> LearnerConfig {
        LearnerConfig {
            system,
            hash_bits: self.hash_bits,
            train: TrainConfig {
                beam,
                iterations: self.iterations,
                early_update: self.early_update,
                average: true,
            },
            ..LearnerConfig::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub model: WeightModel,
    pub model_path: PathBuf,
    pub selection: SelectionReport,
    pub baseline: Option<EvalResult>,
    pub retrained: Option<EvalResult>,
}

impl PipelineOutput {
    pub fn evaluation_report(&self) -> Option<String> {
        let (b, r) = (self.baseline?, self.retrained?);
        Some(format!(
            "model\tUAS\tLAS\nbaseline\t{:.4}\t{:.4}\nretrained\t{:.4}\t{:.4}\n",
            b.uas(),
            b.las(),
            r.uas(),
            r.las()
        ))
    }
}

/// Runs a complete semi-supervised experiment: trains the source
/// learner(s), parses the unlabelled corpus, selects sentences, retrains the
/// evaluation learner on the boosted set and writes `model.bin`,
/// `selection.txt`, `selected.conll` and (with a test set) `evaluation.txt`
/// into the output directory.
pub fn run_pipeline(spec: &PipelineSpec) -> Result<PipelineOutput> {
    spec.validate()?;
    let train = read_treebank(&spec.train, spec.format)?;
    let unlabelled: Vec<Sentence> = read_conll_file(&spec.unlabelled, spec.format)?
        .iter()
        .map(Sentence::stripped)
        .collect();
    let test = match &spec.test {
        Some(p) => Some(read_treebank(p, spec.format)?),
        None => None,
    };
    fs::create_dir_all(&spec.output).map_err(|e| Error::file(&spec.output, e))?;

    let eval_learner = spec.learner(System::ArcStandardSwap, spec.beam);
    info!("training the evaluation learner on {} sentences", train.len());
    let base = train_on_corpus(&train, &eval_learner, &[])?;

    let (selected, report) = match spec.method {
        Method::SelfTraining => {
            let d = match spec.confidence {
                ConfidenceMethod::Adjusted(d) => Some(d),
                _ => None,
            };
            let scored = score_corpus(&unlabelled, &base, spec.beam, d, spec.confidence == ConfidenceMethod::Delta)?;
            let (_, chosen) = self_training_select(&scored, spec.confidence, spec.amount)?;
            let report = SelectionReport::new(unlabelled.len(), unlabelled.len(), &chosen);
            (chosen, report)
        }
        Method::RandomSelection => {
            let parsed: Vec<Sentence> = decode_corpus(&unlabelled, &base, spec.beam, None)?
                .into_iter()
                .map(|(s, _)| s)
                .collect();
            let chosen = random_select(&parsed, spec.amount, spec.seed)?;
            let report = SelectionReport::new(unlabelled.len(), unlabelled.len(), &chosen);
            (chosen, report)
        }
        Method::CoTraining | Method::TriTraining => {
            let eager = train_on_corpus(&train, &spec.learner(System::ArcEager, spec.beam), &[])?;
            let parse = |m: &WeightModel, beam: usize| -> Result<Vec<Sentence>> {
                Ok(decode_corpus(&unlabelled, m, beam, None)?
                    .into_iter()
                    .map(|(s, _)| s)
                    .collect())
            };
            let by_eager = parse(&eager, spec.beam)?;
            if spec.method == Method::CoTraining {
                select_agreement(&parse(&base, spec.beam)?, &by_eager, &spec.criteria)?
            } else {
                // the second source is a greedy arc-standard learner
                let greedy = train_on_corpus(&train, &spec.learner(System::ArcStandardSwap, 1), &[])?;
                let by_greedy = parse(&greedy, 1)?;
                let exclude = if spec.exclude_evaluation_learner == Some(true) {
                    Some(parse(&base, spec.beam)?)
                } else {
                    None
                };
                select_agreement_excluding(&by_greedy, &by_eager, exclude.as_deref(), &spec.criteria)?
            }
        }
    };
    info!("selected {} of {} unlabelled sentences", selected.len(), unlabelled.len());

    let boosted = build_boosted_trainset(&train, &selected);
    let model = train_on_corpus(&boosted, &eval_learner, &[])?;
    let model_path = spec.output.join("model.bin");
    model.save(&model_path)?;
    fs::write(spec.output.join("selection.txt"), report.to_string()).map_err(|e| Error::file(spec.output.join("selection.txt"), e))?;
    write_conll_file(spec.output.join("selected.conll"), &selected, spec.format)?;

    let mut out = PipelineOutput {
        model,
        model_path,
        selection: report,
        baseline: None,
        retrained: None,
    };
    if let Some(test) = test {
        let opts = EvalOptions {
            include_punctuation: spec.include_punctuation,
            ..Default::default()
        };
        let raw: Vec<Sentence> = test.iter().map(Sentence::stripped).collect();
        let score = |m: &WeightModel| -> Result<EvalResult> {
            let pred: Vec<Sentence> = decode_corpus(&raw, m, spec.beam, None)?
                .into_iter()
                .map(|(s, _)| s)
                .collect();
            attachment_scores(&test, &pred, &opts)
        };
        out.baseline = Some(score(&base)?);
        out.retrained = Some(score(&out.model)?);
        let text = out.evaluation_report().expect("both scores set");
        fs::write(spec.output.join("evaluation.txt"), text).map_err(|e| Error::file(spec.output.join("evaluation.txt"), e))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(form: &str, n: usize, head_shift: usize) -> Sentence {
        let rows: Vec<(String, String, usize, String)> = (1..=n)
            .map(|i| (format!("{form}{i}"), "N".into(), if i == 1 { 0 } else { (i + head_shift - 1) % i }, "X".into()))
            .collect();
        Sentence::from_rows(&rows)
    }

    #[test]
    fn identical_and_disjoint() {
        let a = vec![s("a", 3, 0), s("b", 5, 0)];
        let (sel, rep) = select_agreement(&a, &a, &AgreementCriteria::default()).unwrap();
        assert_eq!(sel.len(), 2);
        assert_eq!(rep.agreement_rate, 1.0);
        let b = vec![s("a", 3, 1), s("b", 5, 1)];
        let (sel, _) = select_agreement(&a, &b, &AgreementCriteria::default()).unwrap();
        assert!(sel.is_empty());
    }

    #[test]
    fn min_length_and_cap() {
        let a = vec![s("a", 4, 0), s("b", 5, 0), s("c", 6, 0)];
        let c = AgreementCriteria {
            min_length: Some(5),
            max_selected: Some(1),
        };
        let (sel, rep) = select_agreement(&a, &a, &c).unwrap();
        assert_eq!(sel, vec![a[1].clone()]);
        assert_eq!((rep.candidates, rep.selected), (3, 1));
    }

    #[test]
    fn misaligned_corpora() {
        let a = vec![s("a", 3, 0), s("b", 3, 0)];
        let b = vec![s("a", 3, 0), s("c", 3, 0)];
        match select_agreement(&a, &b, &AgreementCriteria::default()) {
            Err(Error::Alignment { index: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boosted_concatenation() {
        let base: Vec<_> = (0..10).map(|i| s(&format!("b{i}x"), 2, 0)).collect();
        let add: Vec<_> = (0..5).map(|i| s(&format!("a{i}x"), 3, 0)).collect();
        let out = build_boosted_trainset(&base, &add);
        assert_eq!(out.len(), 15);
        assert_eq!(&out[..10], &base[..]);
        assert_eq!(build_boosted_trainset(&base, &[]), base);
    }

    #[test]
    fn self_training_amounts() {
        let parses: Vec<_> = (0..10)
            .map(|i| ScoredParse::new(s(&format!("w{i}x"), 2, 0), i as f64))
            .collect();
        let (idx, _) = self_training_select(&parses, ConfidenceMethod::Raw, Amount::Fraction(0.5)).unwrap();
        assert_eq!(idx, vec![9, 8, 7, 6, 5]);
        let (idx, _) = self_training_select(&parses, ConfidenceMethod::Raw, Amount::Count(50)).unwrap();
        assert_eq!(idx.len(), 10);
        assert!(self_training_select(&parses, ConfidenceMethod::Raw, Amount::Fraction(0.0)).is_err());
        assert!(self_training_select(&parses, ConfidenceMethod::Raw, Amount::Fraction(1.5)).is_err());
    }

    #[test]
    fn spec_parsing() {
        let text = "method = tri_training\ntrain = t.conll\nunlabelled = u.conll # raw\noutput = out\nbeam = 8\nmin-length = 5\nexclude_evaluation_learner = false\n";
        let spec = PipelineSpec::parse(text, Path::new("/data")).unwrap();
        assert_eq!(spec.method, Method::TriTraining);
        assert_eq!(spec.train, PathBuf::from("/data/t.conll"));
        assert_eq!(spec.beam, 8);
        assert_eq!(spec.criteria.min_length, Some(5));
        assert_eq!(spec.amount, Amount::Fraction(0.5));
        assert!(PipelineSpec::parse("method = self_training\n", Path::new(".")).is_err());
        assert!(PipelineSpec::parse(&format!("{text}bogus = 1\n"), Path::new(".")).is_err());
    }

    #[test]
    fn missing_resource_is_a_config_error() {
        let spec = PipelineSpec::new(Method::SelfTraining, "/nonexistent/t.conll", "/nonexistent/u.conll", "/tmp/x");
        match run_pipeline(&spec) {
            Err(Error::Config(m)) => assert!(m.contains("t.conll")),
            other => panic!("{other:?}"),
        }
    }
}
