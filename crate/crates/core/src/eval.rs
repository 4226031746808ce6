//! Attachment scores, the randomized comparator, per-label scores,
//! known/unknown splits and sentence-level bucket analysis.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const DEFAULT_SIGNIFICANCE_ITERATIONS: usize = 10_000;

/// Which tokens count as punctuation: POS tags made only of punctuation
/// characters, plus an explicit list.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PunctuationTags {
    pub extra: BTreeSet<String>,
}

impl PunctuationTags {
    pub fn with_extra<I: IntoIterator<Item = S>, S: Into<String>>(tags: I) -> Self {
        PunctuationTags {
            extra: tags.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_punctuation(&self, pos: &str) -> bool {
        (!pos.is_empty() && pos.chars().all(|c| c.is_ascii_punctuation())) || self.extra.contains(pos)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub include_punctuation: bool,
    pub punctuation: PunctuationTags,
}

impl EvalOptions {
    pub fn including_punctuation() -> Self {
        EvalOptions {
            include_punctuation: true,
            ..Default::default()
        }
    }

    fn scored(&self, gold_pos: &str) -> bool {
        self.include_punctuation || !self.punctuation.is_punctuation(gold_pos)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalResult {
    pub correct_heads: usize,
    pub correct_labeled: usize,
    pub total: usize,
    pub include_punctuation: bool,
}

impl EvalResult {
    pub fn uas(&self) -> f64 {
        ratio(self.correct_heads, self.total)
    }

    pub fn las(&self) -> f64 {
        ratio(self.correct_labeled, self.total)
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    fn merge(&mut self, other: &EvalResult) {
        self.correct_heads += other.correct_heads;
        self.correct_labeled += other.correct_labeled;
        self.total += other.total;
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "UAS -\tLAS -\t(0/0, empty)");
        }
        write!(
            f,
            "UAS {:.2}\tLAS {:.2}\t({}/{}/{})",
            100.0 * self.uas(),
            100.0 * self.las(),
            self.correct_labeled,
            self.correct_heads,
            self.total
        )
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Checks that `pred` holds the same sentences (same forms) as `gold`.
pub fn check_aligned(gold: &[Sentence], pred: &[Sentence]) -> Result<()> {
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Alignment {
                index: i,
                message: format!("{} tokens vs {}", g.len(), p.len()),
            });
        }
        if let Some((a, b)) = g.forms().zip(p.forms()).find(|(a, b)| a != b) {
            return Err(Error::Alignment {
                index: i,
                message: format!("form {a:?} vs {b:?}"),
            });
        }
    }
    if gold.len() != pred.len() {
        return Err(Error::Alignment {
            index: gold.len().min(pred.len()),
            message: format!("{} sentences vs {}", gold.len(), pred.len()),
        });
    }
    Ok(())
}

fn sentence_result<F: Fn(&str) -> bool>(gold: &Sentence, pred: &Sentence, opts: &EvalOptions, keep: F) -> EvalResult {
    let mut r = EvalResult {
        include_punctuation: opts.include_punctuation,
        ..Default::default()
    };
    for (g, p) in gold.tokens.iter().zip(&pred.tokens) {
        if !opts.scored(g.pos_str()) || !keep(&g.form) {
            continue;
        }
        r.total += 1;
        if g.head == p.head {
            r.correct_heads += 1;
            if g.deprel == p.deprel {
                r.correct_labeled += 1;
            }
        }
    }
    r
}

/// Per-sentence results, aligned with the input.
pub fn sentence_scores(gold: &[Sentence], pred: &[Sentence], opts: &EvalOptions) -> Result<Vec<EvalResult>> {
    check_aligned(gold, pred)?;
    Ok(gold
        .iter()
        .zip(pred)
        .map(|(g, p)| sentence_result(g, p, opts, |_| true))
        .collect())
}

pub fn attachment_scores(gold: &[Sentence], pred: &[Sentence], opts: &EvalOptions) -> Result<EvalResult> {
    let mut total = EvalResult {
        include_punctuation: opts.include_punctuation,
        ..Default::default()
    };
    for r in sentence_scores(gold, pred, opts)? {
        total.merge(&r);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceResult {
    pub p: f64,
    pub i_less: usize,
    pub iterations: usize,
    /// The inputs were swapped so that the first has the higher LAS.
    pub swapped: bool,
    /// Both inputs have identical per-sentence scores.
    pub degenerate: bool,
}

impl SignificanceResult {
    pub fn stars(&self) -> &'static str {
        if self.p < 0.01 {
            "**"
        } else if self.p < 0.05 {
            "*"
        } else {
            ""
        }
    }
}

impl fmt::Display for SignificanceResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p = {:.4}{}\t({}/{})", self.p, self.stars(), self.i_less, self.iterations)?;
        if self.swapped {
            f.write_str("\tinputs swapped")?;
        }
        if self.degenerate {
            f.write_str("\tdegenerate: identical per-sentence scores")?;
        }
        Ok(())
    }
}

/// Randomized comparator: samples sentences uniformly with a seeded
/// generator and counts how often the better system is strictly worse on
/// the sampled sentence.
pub fn significance(
    gold: &[Sentence],
    first: &[Sentence],
    second: &[Sentence],
    iterations: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<SignificanceResult> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument("comparator needs at least one sentence".into()));
    }
    let mut a = sentence_scores(gold, first, opts)?;
    let mut b = sentence_scores(gold, second, opts)?;
    let overall = |rs: &[EvalResult]| {
        let mut t = EvalResult::default();
        rs.iter().for_each(|r| t.merge(r));
        t.las()
    };
    let swapped = overall(&a) < overall(&b);
    if swapped {
        std::mem::swap(&mut a, &mut b);
    }
    let la: Vec<f64> = a.iter().map(EvalResult::las).collect();
    let lb: Vec<f64> = b.iter().map(EvalResult::las).collect();
    let degenerate = la == lb;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut i_less = 0;
    for _ in 0..iterations {
        let k = rng.gen_range(0..la.len());
        if la[k] < lb[k] {
            i_less += 1;
        }
    }
    Ok(SignificanceResult {
        p: i_less as f64 / iterations as f64,
        i_less,
        iterations,
        swapped,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelScore {
    pub label: String,
    pub predicted: usize,
    pub gold: usize,
    pub correct: usize,
}

impl LabelScore {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f_score(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Mislabelled-token counts keyed by (gold label, predicted label).
pub type ConfusionMatrix = BTreeMap<(String, String), usize>;

/// Label precision/recall over all tokens. A token's label counts as correct
/// when the predicted label equals the gold one.
pub fn label_scores(gold: &[Sentence], pred: &[Sentence]) -> Result<(Vec<LabelScore>, ConfusionMatrix)> {
    check_aligned(gold, pred)?;
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    let mut confusion = ConfusionMatrix::new();
    for (gs, ps) in gold.iter().zip(pred) {
        for (g, p) in gs.tokens.iter().zip(&ps.tokens) {
            let (gl, pl) = (g.deprel_str(), p.deprel_str());
            counts.entry(pl.to_owned()).or_default().0 += 1;
            counts.entry(gl.to_owned()).or_default().1 += 1;
            if gl == pl {
                counts.get_mut(gl).expect("inserted").2 += 1;
            } else {
                *confusion.entry((gl.to_owned(), pl.to_owned())).or_default() += 1;
            }
        }
    }
    let scores = counts
        .into_iter()
        .map(|(label, (predicted, gold, correct))| LabelScore {
            label,
            predicted,
            gold,
            correct,
        })
        .collect();
    Ok((scores, confusion))
}

/// Scores tokens whose form is in `vocabulary` and those that are not.
pub fn unknown_split(
    gold: &[Sentence],
    pred: &[Sentence],
    vocabulary: &HashSet<String>,
    opts: &EvalOptions,
) -> Result<(EvalResult, EvalResult)> {
    check_aligned(gold, pred)?;
    let mut known = EvalResult {
        include_punctuation: opts.include_punctuation,
        ..Default::default()
    };
    let mut unknown = known;
    for (g, p) in gold.iter().zip(pred) {
        known.merge(&sentence_result(g, p, opts, |f| vocabulary.contains(f)));
        unknown.merge(&sentence_result(g, p, opts, |f| !vocabulary.contains(f)));
    }
    Ok((known, unknown))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    Length,
    UnknownWords,
    Prepositions,
    Conjunctions,
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "length" => Ok(Factor::Length),
            "unknown" | "unknown-words" => Ok(Factor::UnknownWords),
            "prepositions" => Ok(Factor::Prepositions),
            "conjunctions" => Ok(Factor::Conjunctions),
            _ => Err(Error::InvalidArgument(format!("unknown factor {s:?}"))),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Factor::Length => "length",
            Factor::UnknownWords => "unknown-words",
            Factor::Prepositions => "prepositions",
            Factor::Conjunctions => "conjunctions",
        })
    }
}

/// Resources the factors need.
#[derive(Clone, Debug)]
pub struct BucketContext {
    pub vocabulary: Option<HashSet<String>>,
    pub preposition_tags: BTreeSet<String>,
    pub conjunction_tags: BTreeSet<String>,
}

impl Default for BucketContext {
    fn default() -> Self {
        BucketContext {
            vocabulary: None,
            preposition_tags: ["IN".to_owned()].into(),
            conjunction_tags: ["CC".to_owned()].into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bucket {
    /// Smallest factor value in the bucket.
    pub key: usize,
    pub label: String,
    pub better: usize,
    pub worse: usize,
    pub unchanged: usize,
}

impl Bucket {
    pub fn sentences(&self) -> usize {
        self.better + self.worse + self.unchanged
    }

    fn pct(&self, n: usize) -> f64 {
        100.0 * ratio(n, self.sentences())
    }

    pub fn better_pct(&self) -> f64 {
        self.pct(self.better)
    }

    pub fn worse_pct(&self) -> f64 {
        self.pct(self.worse)
    }

    pub fn unchanged_pct(&self) -> f64 {
        self.pct(self.unchanged)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketReport {
    pub factor: Factor,
    pub buckets: Vec<Bucket>,
}

impl BucketReport {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\tbetter%\tworse%\tno-change%\tsentences\n", self.factor);
        for b in &self.buckets {
            out.push_str(&format!(
                "{}\t{:.2}\t{:.2}\t{:.2}\t{}\n",
                b.label,
                b.better_pct(),
                b.worse_pct(),
                b.unchanged_pct(),
                b.sentences()
            ));
        }
        out
    }
}

impl fmt::Display for BucketReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8} {:>8} {:>10} {:>9}", self.factor, "better%", "worse%", "no-change%", "sentences")?;
        for b in &self.buckets {
            writeln!(
                f,
                "{:<10} {:>8.2} {:>8.2} {:>10.2} {:>9}",
                b.label,
                b.better_pct(),
                b.worse_pct(),
                b.unchanged_pct(),
                b.sentences()
            )?;
        }
        Ok(())
    }
}

pub const LENGTH_BUCKET_WIDTH: usize = 4;

fn factor_value(s: &Sentence, factor: Factor, ctx: &BucketContext) -> usize {
    match factor {
        Factor::Length => s.len(),
        Factor::UnknownWords => {
            let vocab = ctx.vocabulary.as_ref().expect("checked by caller");
            s.forms().filter(|f| !vocab.contains(*f)).count()
        }
        Factor::Prepositions => s.tokens.iter().filter(|t| ctx.preposition_tags.contains(t.pos_str())).count(),
        Factor::Conjunctions => s.tokens.iter().filter(|t| ctx.conjunction_tags.contains(t.pos_str())).count(),
    }
}

/// Groups sentences by `factor` and counts how many the new parse improves,
/// worsens or leaves unchanged in per-sentence LAS.
pub fn bucket_analysis(
    gold: &[Sentence],
    base: &[Sentence],
    new: &[Sentence],
    factor: Factor,
    ctx: &BucketContext,
    opts: &EvalOptions,
) -> Result<BucketReport> {
    match factor {
        Factor::UnknownWords if ctx.vocabulary.is_none() => {
            return Err(Error::Config("unknown-words factor needs a training vocabulary".into()))
        }
        Factor::Prepositions if ctx.preposition_tags.is_empty() => {
            return Err(Error::Config("prepositions factor needs a POS tag set".into()))
        }
        Factor::Conjunctions if ctx.conjunction_tags.is_empty() => {
            return Err(Error::Config("conjunctions factor needs a POS tag set".into()))
        }
        _ => {}
    }
    let sb = sentence_scores(gold, base, opts)?;
    let sn = sentence_scores(gold, new, opts)?;
    let mut buckets: BTreeMap<usize, Bucket> = BTreeMap::new();
    for (i, s) in gold.iter().enumerate() {
        let v = factor_value(s, factor, ctx);
        let (key, label) = match factor {
            Factor::Length => {
                let lo = v.saturating_sub(1) / LENGTH_BUCKET_WIDTH * LENGTH_BUCKET_WIDTH + 1;
                (lo, format!("{lo}-{}", lo + LENGTH_BUCKET_WIDTH - 1))
            }
            _ => (v, v.to_string()),
        };
        let b = buckets.entry(key).or_insert_with(|| Bucket {
            key,
            label,
            better: 0,
            worse: 0,
            unchanged: 0,
        });
        let (old, new) = (sb[i].las(), sn[i].las());
        if new > old {
            b.better += 1;
        } else if new < old {
            b.worse += 1;
        } else {
            b.unchanged += 1;
        }
    }
    Ok(BucketReport {
        factor,
        buckets: buckets.into_values().collect(),
    })
}

/// Tab-separated label table.
pub fn label_scores_tsv(scores: &[LabelScore]) -> String {
    let mut out = String::from("label\tpredicted\tgold\tcorrect\tprecision\trecall\tf\n");
    for s in scores {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\n",
            s.label,
            s.predicted,
            s.gold,
            s.correct,
            s.precision(),
            s.recall(),
            s.f_score()
        ));
    }
    out
}

pub fn confusion_tsv(confusion: &ConfusionMatrix) -> String {
    let mut out = String::from("gold\tpredicted\tcount\n");
    for ((g, p), n) in confusion {
        out.push_str(&format!("{g}\t{p}\t{n}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(rows: &[(&str, &str, usize, &str)]) -> Sentence {
        Sentence::from_rows(rows)
    }

    #[test]
    fn eight_of_ten_heads_seven_labels() {
        let gold: Vec<_> = (1..=10).map(|i| (format!("w{i}"), "N".to_owned(), 0usize, "A".to_owned())).collect();
        let mut pred = gold.clone();
        pred[0].2 = 3;
        pred[1].2 = 3;
        pred[2].3 = "B".into();
        let g = Sentence::from_rows(&gold);
        let p = Sentence::from_rows(&pred);
        let r = attachment_scores(&[g.clone()], &[p], &EvalOptions::default()).unwrap();
        assert_eq!((r.correct_heads, r.correct_labeled, r.total), (8, 7, 10));
        assert!((r.uas() - 0.8).abs() < 1e-12 && (r.las() - 0.7).abs() < 1e-12);
        let same = attachment_scores(&[g.clone()], &[g], &EvalOptions::default()).unwrap();
        assert_eq!((same.uas(), same.las()), (1.0, 1.0));
    }

    #[test]
    fn punctuation_flag() {
        let g = sent(&[("a", "N", 0, "ROOT"), (",", ",", 1, "P"), ("b", "N", 1, "X"), (".", ".", 1, "P")]);
        let with = attachment_scores(&[g.clone()], &[g.clone()], &EvalOptions::including_punctuation()).unwrap();
        let without = attachment_scores(&[g.clone()], &[g.clone()], &EvalOptions::default()).unwrap();
        assert_eq!(with.total - without.total, 2);
        let tags = PunctuationTags::with_extra(["PUNCT"]);
        assert!(tags.is_punctuation("PUNCT") && tags.is_punctuation("``") && !tags.is_punctuation("-LRB-"));
    }

    #[test]
    fn misalignment_names_index() {
        let a = sent(&[("a", "N", 0, "R")]);
        let b = sent(&[("b", "N", 0, "R")]);
        match attachment_scores(&[a.clone(), a], &[b.clone(), b], &EvalOptions::default()) {
            Err(Error::Alignment { index: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn label_hand_arithmetic() {
        let g = sent(&[("a", "N", 2, "SBJ"), ("b", "V", 0, "OBJ")]);
        let p = sent(&[("a", "N", 2, "SBJ"), ("b", "V", 0, "SBJ")]);
        let (scores, confusion) = label_scores(&[g], &[p]).unwrap();
        let sbj = scores.iter().find(|s| s.label == "SBJ").unwrap();
        let obj = scores.iter().find(|s| s.label == "OBJ").unwrap();
        assert_eq!((sbj.precision(), sbj.recall()), (0.5, 1.0));
        assert_eq!((obj.precision(), obj.recall(), obj.f_score()), (0.0, 0.0, 0.0));
        assert_eq!(confusion[&("OBJ".to_owned(), "SBJ".to_owned())], 1);
    }

    #[test]
    fn identical_inputs_are_degenerate() {
        let g = sent(&[("a", "N", 0, "R")]);
        let r = significance(&[g.clone()], &[g.clone()], &[g.clone()], 100, 1, &EvalOptions::default()).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.degenerate && !r.swapped);
    }

    #[test]
    fn worse_first_input_is_swapped() {
        let g = sent(&[("a", "N", 0, "R")]);
        let bad = sent(&[("a", "N", 0, "Q")]);
        let r = significance(&[g.clone()], &[bad], &[g.clone()], 100, 1, &EvalOptions::default()).unwrap();
        assert!(r.swapped);
        assert_eq!(r.i_less, 0);
    }

    #[test]
    fn unknown_split_partitions() {
        let g = sent(&[("a", "N", 0, "R"), ("b", "N", 1, "X")]);
        let all: HashSet<String> = ["a".into(), "b".into()].into();
        let (k, u) = unknown_split(&[g.clone()], &[g.clone()], &all, &EvalOptions::default()).unwrap();
        assert_eq!((k.total, u.total), (2, 0));
        assert!(u.is_empty() && u.to_string().contains("empty"));
        let (k, u) = unknown_split(&[g.clone()], &[g], &HashSet::new(), &EvalOptions::default()).unwrap();
        assert_eq!((k.total, u.total), (0, 2));
    }

    #[test]
    fn buckets() {
        let g = sent(&[("a", "N", 0, "R"), ("b", "IN", 1, "X")]);
        let bad = sent(&[("a", "N", 0, "R"), ("b", "IN", 1, "Y")]);
        let ctx = BucketContext::default();
        let opts = EvalOptions::default();
        let r = bucket_analysis(&[g.clone()], &[bad.clone()], &[g.clone()], Factor::Length, &ctx, &opts).unwrap();
        assert_eq!(r.buckets.len(), 1);
        let b = &r.buckets[0];
        assert_eq!((b.label.as_str(), b.better_pct(), b.worse_pct(), b.unchanged_pct(), b.sentences()), ("1-4", 100.0, 0.0, 0.0, 1));
        let same = bucket_analysis(&[g.clone()], &[bad.clone()], &[bad.clone()], Factor::Prepositions, &ctx, &opts).unwrap();
        assert_eq!((same.buckets[0].key, same.buckets[0].unchanged_pct()), (1, 100.0));
        assert!(bucket_analysis(&[g.clone()], &[bad.clone()], &[g], Factor::UnknownWords, &ctx, &opts).is_err());
    }
}
