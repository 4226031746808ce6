//! Confidence scores for automatically parsed sentences.
//!
//! Three scores are supported: the parse score itself, the parse score
//! penalised by sentence length (`raw - L * d`), and Delta, the mean gap
//! between the best tree and the best tree that avoids each of its labelled
//! edges in turn.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::Sentence;
use crate::decoder::{search, DecodeConstraint};
use crate::error::{Error, Result};
use crate::model::WeightModel;

pub const DEFAULT_D: f64 = 0.015;
pub const BINS: usize = 100;
/// Upper end of the score range covered by the bins.
pub const SCORE_RANGE: f64 = 3.0;

/// A parsed sentence with its confidence scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredParse {
    pub sentence: Sentence,
    pub raw: f64,
    /// `(d, raw - L * d)` when computed.
    pub adjusted: Option<(f64, f64)>,
    pub delta: Option<f64>,
}

impl ScoredParse {
    pub fn new(sentence: Sentence, raw: f64) -> Self {
        ScoredParse {
            sentence,
            raw,
            adjusted: None,
            delta: None,
        }
    }

    pub fn len(&self) -> usize {
        self.sentence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence.is_empty()
    }

    pub fn with_adjustment(mut self, d: f64) -> Self {
        self.adjusted = Some((d, adjusted_score(self.raw, self.len(), d)));
        self
    }
}

pub fn adjusted_score(raw: f64, length: usize, d: f64) -> f64 {
    raw - length as f64 * d
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConfidenceMethod {
    Raw,
    Adjusted(f64),
    Delta,
}

impl ConfidenceMethod {
    fn name(&self) -> &'static str {
        match self {
            ConfidenceMethod::Raw => "raw",
            ConfidenceMethod::Adjusted(_) => "adjusted",
            ConfidenceMethod::Delta => "delta",
        }
    }

    pub fn score(&self, p: &ScoredParse) -> Option<f64> {
        match self {
            ConfidenceMethod::Raw => Some(p.raw),
            ConfidenceMethod::Adjusted(d) => Some(adjusted_score(p.raw, p.len(), *d)),
            ConfidenceMethod::Delta => p.delta,
        }
    }
}

impl fmt::Display for ConfidenceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfidenceMethod::Adjusted(d) => write!(f, "adjusted(d={d})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ConfidenceMethod {
    type Err = Error;

    /// `raw`, `delta`, `adjusted` (default d) or `adjusted:<d>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "raw" => Ok(ConfidenceMethod::Raw),
            None if s == "delta" => Ok(ConfidenceMethod::Delta),
            None if s == "adjusted" => Ok(ConfidenceMethod::Adjusted(DEFAULT_D)),
            Some(("adjusted", d)) => d
                .parse()
                .map(ConfidenceMethod::Adjusted)
                .map_err(|_| Error::InvalidArgument(format!("bad d value {d:?}"))),
            _ => Err(Error::InvalidArgument(format!("unknown confidence method {s:?}"))),
        }
    }
}

/// Indices of `parses` in descending order of the method's score; ties keep
/// input order.
pub fn rank_by_confidence(parses: &[ScoredParse], method: ConfidenceMethod) -> Result<Vec<usize>> {
    let scores = parses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            method.score(p).ok_or_else(|| {
                Error::InvalidArgument(format!("sentence {i} has no {} score", method.name()))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..parses.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(order)
}

/// 1-based bin of a score; out-of-range scores fall into the end bins.
pub fn bin_of(score: f64) -> usize {
    let width = SCORE_RANGE / BINS as f64;
    let raw = (score / width).floor();
    if raw.is_nan() || raw < 0.0 {
        1
    } else {
        (raw as usize + 1).min(BINS)
    }
}

/// Estimated accuracy of bin `i`.
pub fn bin_center(i: usize) -> f64 {
    (i as f64 - 0.5) / BINS as f64
}

/// Binned root-mean-square error between score-implied and actual accuracy.
pub fn rms_calibration_error(scores: &[f64], accuracies: &[f64]) -> f64 {
    assert_eq!(scores.len(), accuracies.len());
    let mut n = [0usize; BINS + 1];
    let mut sum = [0.0f64; BINS + 1];
    for (&s, &a) in scores.iter().zip(accuracies) {
        let b = bin_of(s);
        n[b] += 1;
        sum[b] += a;
    }
    let mut num = 0.0;
    let mut den = 0usize;
    for i in 1..=BINS {
        if n[i] == 0 {
            continue;
        }
        let actual = sum[i] / n[i] as f64;
        num += n[i] as f64 * (bin_center(i) - actual).powi(2);
        den += n[i];
    }
    if den == 0 {
        0.0
    } else {
        (num / den as f64).sqrt()
    }
}

/// `d` from 0 to 0.05 in steps of 0.005.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.005).collect()
}

/// One development sentence for tuning: parse score, length, and its actual
/// accuracy in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TuningItem {
    pub raw: f64,
    pub length: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DTuningReport {
    pub grid: Vec<(f64, f64)>,
    pub chosen_d: f64,
}

impl DTuningReport {
    pub fn chosen_error(&self) -> f64 {
        self.grid
            .iter()
            .find(|(d, _)| *d == self.chosen_d)
            .map(|(_, e)| *e)
            .unwrap_or(f64::NAN)
    }
}

impl fmt::Display for DTuningReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "d\tf_r")?;
        for (d, e) in &self.grid {
            let mark = if *d == self.chosen_d { "\t*" } else { "" };
            writeln!(f, "{d:.3}\t{e:.6}{mark}")?;
        }
        write!(f, "chosen d = {:.3}", self.chosen_d)
    }
}

/// Picks the `d` with the smallest `f_r`; ties go to the smaller `d`.
pub fn tune_d(items: &[TuningItem], grid: &[f64]) -> Result<DTuningReport> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("tuning corpus is empty".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("d grid is empty".into()));
    }
    let accuracies: Vec<f64> = items.iter().map(|i| i.accuracy).collect();
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let results: Vec<(f64, f64)> = sorted
        .iter()
        .map(|&d| {
            let scores: Vec<f64> = items.iter().map(|i| adjusted_score(i.raw, i.length, d)).collect();
            (d, rms_calibration_error(&scores, &accuracies))
        })
        .collect();
    let mut chosen = results[0];
    for &r in &results[1..] {
        if r.1 < chosen.1 {
            chosen = r;
        }
    }
    Ok(DTuningReport {
        grid: results,
        chosen_d: chosen.0,
    })
}

/// Per-edge breakdown of a Delta computation.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaDetails {
    pub best: f64,
    /// `(head, dependent, label, best score without that edge)`.
    pub alternatives: Vec<(usize, usize, u32, f64)>,
    pub delta: f64,
}

/// Delta: mean over the edges of the best tree of
/// `|best - best score of a tree without that labelled edge|`, all scores
/// normalised by transition count.
pub fn delta_details(sentence: &Sentence, model: &WeightModel, beam: usize) -> Result<DeltaDetails> {
    if sentence.is_empty() {
        return Err(Error::InvalidArgument("Delta needs a non-empty sentence".into()));
    }
    let best = search(sentence, model, beam, DecodeConstraint::none())?;
    let edges: Vec<(usize, usize, u32)> = best
        .config
        .tree(model.labels())
        .into_iter()
        .enumerate()
        .map(|(i, (h, l))| (h, i + 1, l))
        .collect();
    let alternatives = edges
        .par_iter()
        .map(|&(h, d, l)| {
            let alt = search(sentence, model, beam, DecodeConstraint::forbid(h, d, l))?;
            Ok((h, d, l, alt.normalized_score()))
        })
        .collect::<Result<Vec<_>>>()?;
    let best_score = best.normalized_score();
    let sum: f64 = alternatives.iter().map(|a| (best_score - a.3).abs()).sum();
    Ok(DeltaDetails {
        best: best_score,
        delta: sum / sentence.len() as f64,
        alternatives,
    })
}

pub fn delta_score(sentence: &Sentence, model: &WeightModel, beam: usize) -> Result<f64> {
    delta_details(sentence, model, beam).map(|d| d.delta)
}

/// Parses every sentence and attaches the requested confidence scores.
pub fn score_corpus(
    sentences: &[Sentence],
    model: &WeightModel,
    beam: usize,
    d: Option<f64>,
    with_delta: bool,
) -> Result<Vec<ScoredParse>> {
    sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let best = search(s, model, beam, DecodeConstraint::none()).map_err(|e| e.in_sentence(i))?;
            let mut p = ScoredParse::new(best.config.to_sentence(s, model.labels()), best.normalized_score());
            if let Some(d) = d {
                p = p.with_adjustment(d);
            }
            if with_delta && !s.is_empty() {
                p.delta = Some(delta_score(s, model, beam).map_err(|e| e.in_sentence(i))?);
            }
            Ok(p)
        })
        .collect()
}

/// `index<TAB>raw<TAB>adjusted<TAB>delta`, absent values as `_`.
pub fn write_confidence_sidecar<W: Write>(mut w: W, parses: &[ScoredParse]) -> Result<()> {
    for (i, p) in parses.iter().enumerate() {
        let adj = p.adjusted.map_or_else(|| "_".to_owned(), |(_, a)| a.to_string());
        let delta = p.delta.map_or_else(|| "_".to_owned(), |d| d.to_string());
        writeln!(w, "{i}\t{}\t{adj}\t{delta}", p.raw)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sidecar written by [`write_confidence_sidecar`] back onto parses.
pub fn read_confidence_sidecar<R: std::io::BufRead>(r: R, parses: &mut [ScoredParse], d: Option<f64>) -> Result<()> {
    for (line_no, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            line: line_no + 1,
            message: m.to_owned(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let i: usize = cols[0].parse().map_err(|_| bad("bad index"))?;
        let p = parses.get_mut(i).ok_or_else(|| bad("index beyond corpus"))?;
        p.raw = cols[1].parse().map_err(|_| bad("bad raw score"))?;
        if cols[2] != "_" {
            let a: f64 = cols[2].parse().map_err(|_| bad("bad adjusted score"))?;
            p.adjusted = Some((d.unwrap_or(f64::NAN), a));
        }
        if cols[3] != "_" {
            p.delta = Some(cols[3].parse().map_err(|_| bad("bad delta"))?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjusted_arithmetic() {
        assert!((adjusted_score(2.0, 20, 0.015) - 1.7).abs() < 1e-12);
        assert_eq!(adjusted_score(2.5, 13, 0.0), 2.5);
        let gap = adjusted_score(1.0, 20, 0.015) - adjusted_score(1.0, 40, 0.015);
        assert!((gap - 0.3).abs() < 1e-12);
    }

    fn parses(scores: &[f64]) -> Vec<ScoredParse> {
        scores
            .iter()
            .map(|&s| ScoredParse::new(Sentence::from_rows(&[("x", "X", 0, "R")]), s))
            .collect()
    }

    #[test]
    fn ranking() {
        assert_eq!(rank_by_confidence(&parses(&[1.0, 3.0, 2.0]), ConfidenceMethod::Raw).unwrap(), vec![1, 2, 0]);
        assert_eq!(rank_by_confidence(&parses(&[1.0; 4]), ConfidenceMethod::Raw).unwrap(), vec![0, 1, 2, 3]);
        let err = rank_by_confidence(&parses(&[1.0]), ConfidenceMethod::Delta).unwrap_err();
        assert!(err.to_string().contains("delta"));
    }

    #[test]
    fn bins() {
        assert_eq!(bin_of(-1.0), 1);
        assert_eq!(bin_of(0.0), 1);
        assert_eq!(bin_of(0.0299), 1);
        assert_eq!(bin_of(0.031), 2);
        assert_eq!(bin_of(2.999), 100);
        assert_eq!(bin_of(7.0), 100);
        assert!((bin_center(1) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn constant_corpus_ties_to_zero() {
        let items = vec![
            TuningItem {
                raw: 1.0,
                length: 0,
                accuracy: 0.5
            };
            5
        ];
        let r = tune_d(&items, &default_grid()).unwrap();
        assert_eq!(r.chosen_d, 0.0);
        assert!(r.grid.windows(2).all(|w| w[0].1 == w[1].1));
        assert!(tune_d(&[], &default_grid()).is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("adjusted".parse::<ConfidenceMethod>().unwrap(), ConfidenceMethod::Adjusted(DEFAULT_D));
        assert_eq!("adjusted:0.02".parse::<ConfidenceMethod>().unwrap(), ConfidenceMethod::Adjusted(0.02));
        assert!("bogus".parse::<ConfidenceMethod>().is_err());
    }
}
