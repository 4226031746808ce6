//! Beam-search decoding.
//!
//! Every hypothesis in the beam is expanded with every permissible
//! transition; terminal hypotheses are carried over unchanged. The `b`
//! best by accumulated score survive each round (ties keep insertion order)
//! and the search stops once every survivor is terminal. Greedy decoding is
//! the special case `b = 1`. Outside training, hypotheses that reach the
//! same stack, buffer and arcs are merged and only the best-scoring one is
//! kept, since features never look at the history.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::model::WeightModel;
use crate::transition::{Configuration, LabelId, Transition};

pub const DEFAULT_BEAM: usize = 40;

/// A labelled edge the decoder must not produce.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecodeConstraint {
    pub forbidden: Option<(usize, usize, LabelId)>,
}

impl DecodeConstraint {
    pub fn none() -> Self {
        DecodeConstraint::default()
    }

    pub fn forbid(head: usize, dependent: usize, label: LabelId) -> Self {
        DecodeConstraint {
            forbidden: Some((head, dependent, label)),
        }
    }

    fn admits(&self, arc: Option<(usize, usize, LabelId)>) -> bool {
        match (self.forbidden, arc) {
            (Some(f), Some(a)) => f != a,
            _ => true,
        }
    }
}

#[derive(Debug)]
struct Step {
    ids: Vec<u32>,
    prev: Option<Arc<Step>>,
}

/// Beam entry: configuration, accumulated score and (shared) accumulated
/// feature trail.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    pub config: Configuration,
    pub score: f64,
    trail: Option<Arc<Step>>,
    on_gold: bool,
}

impl Hypothesis {
    pub fn initial(config: Configuration) -> Self {
        Hypothesis {
            config,
            score: 0.0,
            trail: None,
            on_gold: true,
        }
    }

    /// Sum of the feature vectors of every transition taken.
    pub fn features(&self) -> FeatureVector {
        let mut out = FeatureVector::new();
        let mut cur = self.trail.as_deref();
        while let Some(step) = cur {
            for &id in &step.ids {
                out.push(id);
            }
            cur = step.prev.as_deref();
        }
        out
    }

    pub fn transitions_taken(&self) -> usize {
        self.config.history().len()
    }

    /// Accumulated score divided by the number of transitions.
    pub fn normalized_score(&self) -> f64 {
        match self.transitions_taken() {
            0 => 0.0,
            n => self.score / n as f64,
        }
    }
}

/// Result of a search that tracks a gold sequence.
pub(crate) struct TrackedSearch {
    pub best: Hypothesis,
    /// Set when the gold prefix fell out of the beam: `(prefix length, best
    /// hypothesis at that point)`.
    pub fell_out: Option<(usize, Hypothesis)>,
}

enum Entry {
    Carry(usize),
    Expand(usize),
}

struct Candidate {
    parent: usize,
    transition: Transition,
    score: f64,
}

/// Runs the beam search and returns the best terminal hypothesis.
pub fn search(
    sentence: &Sentence,
    model: &WeightModel,
    beam: usize,
    constraint: DecodeConstraint,
) -> Result<Hypothesis> {
    search_tracked(sentence, model, beam, constraint, None, false).map(|s| s.best)
}

pub(crate) fn search_tracked(
    sentence: &Sentence,
    model: &WeightModel,
    beam_size: usize,
    constraint: DecodeConstraint,
    gold: Option<&[Transition]>,
    stop_when_gold_lost: bool,
) -> Result<TrackedSearch> {
    if beam_size == 0 {
        return Err(Error::InvalidArgument("beam size must be at least 1".into()));
    }
    if model.labels().is_empty() {
        return Err(Error::InvalidArgument("model has no labels".into()));
    }
    let transitions = model.transitions();
    let weights = model.active_weights();
    let mut beam = vec![Hypothesis::initial(model.system().initial(sentence))];
    let mut steps = 0;
    while beam.iter().any(|h| !h.config.is_terminal()) {
        let mut candidates = Vec::new();
        let mut features = Vec::with_capacity(beam.len());
        for (p, h) in beam.iter().enumerate() {
            if h.config.is_terminal() {
                features.push(None);
                continue;
            }
            let cf = model.config_features(&h.config, sentence);
            for &t in &transitions {
                if !h.config.permissible(t) || !constraint.admits(h.config.arc_created(t)) {
                    continue;
                }
                candidates.push(Candidate {
                    parent: p,
                    transition: t,
                    score: h.score + cf.score(t, weights),
                });
            }
            features.push(Some(cf));
        }
        // terminal hypotheses compete in their original beam position
        let mut pool: Vec<(f64, Entry)> = Vec::with_capacity(candidates.len() + beam.len());
        let mut ci = 0;
        for (p, h) in beam.iter().enumerate() {
            if h.config.is_terminal() {
                pool.push((h.score, Entry::Carry(p)));
            } else {
                while ci < candidates.len() && candidates[ci].parent == p {
                    pool.push((candidates[ci].score, Entry::Expand(ci)));
                    ci += 1;
                }
            }
        }
        if pool.is_empty() {
            return Err(Error::InfeasibleConstraint);
        }
        // stable: equal scores keep insertion order
        pool.sort_by(|a, b| b.0.total_cmp(&a.0));
        let recombine = gold.is_none();
        if !recombine {
            pool.truncate(beam_size);
        }
        let mut seen = HashSet::new();
        let mut next = Vec::with_capacity(pool.len().min(beam_size));
        for (score, entry) in pool {
            if next.len() == beam_size {
                break;
            }
            if recombine {
                let config = match entry {
                    Entry::Expand(ci) => {
                        let c = &candidates[ci];
                        let mut config = beam[c.parent].config.clone();
                        config.apply_unchecked(c.transition);
                        config
                    }
                    Entry::Carry(p) => beam[p].config.clone(),
                };
                if !seen.insert(config.state()) {
                    continue;
                }
            }
            match entry {
                Entry::Expand(ci) => {
                    let c = &candidates[ci];
                    let parent = &beam[c.parent];
                    let cf = features[c.parent].as_ref().expect("expanded parent");
                    let mut config = parent.config.clone();
                    config.apply_unchecked(c.transition);
                    let on_gold = parent.on_gold
                        && gold.is_some_and(|g| g.get(parent.transitions_taken()) == Some(&c.transition));
                    next.push(Hypothesis {
                        config,
                        score,
                        trail: Some(Arc::new(Step {
                            ids: cf.ids(c.transition).collect(),
                            prev: parent.trail.clone(),
                        })),
                        on_gold,
                    });
                }
                Entry::Carry(p) => next.push(beam[p].clone()),
            }
        }
        beam = next;
        steps += 1;
        if stop_when_gold_lost && gold.is_some() && !beam.iter().any(|h| h.on_gold) {
            return Ok(TrackedSearch {
                best: beam[0].clone(),
                fell_out: Some((steps, beam[0].clone())),
            });
        }
    }
    Ok(TrackedSearch {
        best: beam.swap_remove(0),
        fell_out: None,
    })
}

/// Decodes one sentence. Returns the annotated tree and the parse score
/// (accumulated score over the number of transitions).
pub fn decode(
    sentence: &Sentence,
    model: &WeightModel,
    beam: usize,
    constraint: DecodeConstraint,
) -> Result<(Sentence, f64)> {
    let best = search(sentence, model, beam, constraint)?;
    Ok((best.config.to_sentence(sentence, model.labels()), best.normalized_score()))
}

/// Decodes every sentence, in parallel when `workers` allows it. Output
/// order follows input order.
pub fn decode_corpus(
    sentences: &[Sentence],
    model: &WeightModel,
    beam: usize,
    workers: Option<usize>,
) -> Result<Vec<(Sentence, f64)>> {
    let run = || {
        sentences
            .par_iter()
            .enumerate()
            .map(|(i, s)| decode(s, model, beam, DecodeConstraint::none()).map_err(|e| e.in_sentence(i)))
            .collect::<Result<Vec<_>>>()
    };
    match workers {
        Some(1) => sentences
            .iter()
            .enumerate()
            .map(|(i, s)| decode(s, model, beam, DecodeConstraint::none()).map_err(|e| e.in_sentence(i)))
            .collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Writes `index<TAB>score` lines.
pub fn write_score_sidecar<W: std::io::Write>(mut w: W, scores: &[f64]) -> Result<()> {
    for (i, s) in scores.iter().enumerate() {
        writeln!(w, "{i}\t{s}")?;
    }
    w.flush()?;
    Ok(())
}
