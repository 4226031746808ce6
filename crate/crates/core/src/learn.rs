//! Online passive-aggressive training over beam-decoded sequences.

use log::{info, warn};

use crate::corpus::Sentence;
use crate::decoder::{search_tracked, DecodeConstraint};
use crate::error::{Error, Result};
use crate::dlm::DlmTable;
use crate::features::{FeatureVector, TemplateSet};
use crate::model::{WeightModel, DEFAULT_HASH_BITS};
use crate::transition::{oracle_sequence, LabelId, Labels, System, Transition};

pub const DEFAULT_ITERATIONS: usize = 25;

/// A sentence together with the transition sequence that derives its tree.
#[derive(Clone, Debug)]
pub struct LabeledExample {
    pub sentence: Sentence,
    pub gold: Vec<Transition>,
}

impl LabeledExample {
    pub fn new(sentence: Sentence, model: &WeightModel) -> Result<Self> {
        let gold = oracle_sequence(&sentence, model.system(), model.labels())?;
        Ok(LabeledExample { sentence, gold })
    }

    /// Builds examples for every sentence the oracle accepts. Rejected
    /// sentences are reported by index.
    pub fn from_corpus(sentences: &[Sentence], model: &WeightModel) -> (Vec<Self>, Vec<(usize, Error)>) {
        let mut ok = Vec::new();
        let mut rejected = Vec::new();
        for (i, s) in sentences.iter().enumerate() {
            match LabeledExample::new(s.clone(), model) {
                Ok(e) => ok.push(e),
                Err(e) => rejected.push((i, e)),
            }
        }
        (ok, rejected)
    }

    fn gold_tree(&self, model: &WeightModel) -> Vec<(usize, LabelId)> {
        let mut config = model.system().initial(&self.sentence);
        for &t in &self.gold {
            config.apply_unchecked(t);
        }
        config.tree(model.labels())
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub beam: usize,
    pub iterations: usize,
    /// Update at the step where the gold prefix leaves the beam instead of
    /// after the full decode.
    pub early_update: bool,
    /// Keep averaged weights and decode with them afterwards.
    pub average: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beam: crate::decoder::DEFAULT_BEAM,
            iterations: DEFAULT_ITERATIONS,
            early_update: false,
            average: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochStats {
    pub updates: usize,
    /// Tokens with correct head and label in the epoch's own decodes.
    pub correct: usize,
    pub tokens: usize,
}

impl EpochStats {
    pub fn las(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.correct as f64 / self.tokens as f64
        }
    }
}

/// Gold feature vector of a transition sequence, summed over steps.
pub fn sequence_features(model: &WeightModel, sentence: &Sentence, seq: &[Transition]) -> FeatureVector {
    let mut config = model.system().initial(sentence);
    let mut out = FeatureVector::new();
    for &t in seq {
        out += &model.extract_features(&config, t, sentence);
        config.apply_unchecked(t);
    }
    out
}

/// Trains `model` in place for `config.iterations` passes over `examples`
/// in their given order.
pub fn train(model: &mut WeightModel, examples: &[LabeledExample], config: &TrainConfig) -> Result<Vec<EpochStats>> {
    if config.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    if config.beam == 0 {
        return Err(Error::InvalidArgument("beam size must be at least 1".into()));
    }
    let gold_trees: Vec<_> = examples.iter().map(|e| e.gold_tree(model)).collect();
    let gold_features: Vec<_> = examples
        .iter()
        .map(|e| sequence_features(model, &e.sentence, &e.gold))
        .collect();

    model.set_averaged(None);
    let mut accumulated = if config.average {
        vec![0.0; model.weights().len()]
    } else {
        Vec::new()
    };
    let mut counter = 1.0f64;
    let mut stats = Vec::with_capacity(config.iterations);

    for epoch in 0..config.iterations {
        let mut epoch_stats = EpochStats::default();
        for (i, ex) in examples.iter().enumerate() {
            let outcome = search_tracked(
                &ex.sentence,
                model,
                config.beam,
                DecodeConstraint::none(),
                Some(&ex.gold),
                config.early_update,
            )
            .map_err(|e| e.in_sentence(i))?;

            let predicted = outcome.best.config.tree(model.labels());
            epoch_stats.tokens += predicted.len();
            epoch_stats.correct += predicted.iter().zip(&gold_trees[i]).filter(|(p, g)| p == g).count();

            let applied = match &outcome.fell_out {
                Some((steps, best)) => {
                    let prefix = sequence_features(model, &ex.sentence, &ex.gold[..*steps]);
                    model.pa_update(&prefix, &best.features())
                }
                None if predicted != gold_trees[i] => model.pa_update(&gold_features[i], &outcome.best.features()),
                None => Vec::new(),
            };
            if !applied.is_empty() {
                epoch_stats.updates += 1;
                if config.average {
                    for (id, step) in applied {
                        accumulated[id as usize] += counter * step;
                    }
                }
            }
            counter += 1.0;
        }
        info!(
            "epoch {}: {} updates, training LAS {:.2}%",
            epoch + 1,
            epoch_stats.updates,
            100.0 * epoch_stats.las()
        );
        stats.push(epoch_stats);
    }

    if config.average {
        let averaged = model
            .weights()
            .iter()
            .zip(&accumulated)
            .map(|(w, u)| w - u / counter)
            .collect();
        model.set_averaged(Some(averaged));
    }
    Ok(stats)
}

/// Everything needed to train a model from a treebank.
#[derive(Clone, Debug)]
pub struct LearnerConfig {
    pub system: System,
    pub templates: TemplateSet,
    pub hash_bits: u32,
    pub train: TrainConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            system: System::ArcStandardSwap,
            templates: TemplateSet::standard(),
            hash_bits: DEFAULT_HASH_BITS,
            train: TrainConfig::default(),
        }
    }
}

/// Builds a fresh model over the corpus labels and trains it. Sentences the
/// oracle cannot derive are skipped with a warning.
pub fn train_on_corpus(sentences: &[Sentence], config: &LearnerConfig, dlms: &[(String, DlmTable)]) -> Result<WeightModel> {
    let labels = Labels::from_corpus(sentences)?;
    let mut model = WeightModel::new(config.system, labels, config.templates.clone(), config.hash_bits)?;
    for (path, table) in dlms {
        model.attach_dlm(path.clone(), table.clone());
    }
    let (examples, rejected) = LabeledExample::from_corpus(sentences, &model);
    if !rejected.is_empty() {
        warn!(
            "{} of {} sentences skipped by the {} oracle (first: sentence {}: {})",
            rejected.len(),
            sentences.len(),
            config.system,
            rejected[0].0,
            rejected[0].1
        );
    }
    train(&mut model, &examples, &config.train)?;
    Ok(model)
}
