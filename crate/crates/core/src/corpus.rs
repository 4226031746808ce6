//! Reading and writing dependency treebanks in CoNLL column formats.
//!
//! Two layouts are supported:
//!
//! * `conll06`: the 10-column CoNLL-X layout
//!   (`ID FORM LEMMA CPOSTAG POSTAG FEATS HEAD DEPREL PHEAD PDEPREL`).
//! * `conll09`: the CoNLL-2009 layout with at least 14 columns
//!   (`ID FORM LEMMA PLEMMA POS PPOS FEAT PFEAT HEAD PHEAD DEPREL PDEPREL FILLPRED PRED APRED*`).
//!
//! Columns that are not modelled explicitly are carried through untouched, so
//! reading and writing a file reproduces every populated column.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Underscore marks an absent column value.
pub const ABSENT: &str = "_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Format {
    Conll06,
    Conll09,
}

impl Format {
    fn min_columns(self) -> usize {
        match self {
            Format::Conll06 => 10,
            Format::Conll09 => 14,
        }
    }

    fn exact(self) -> bool {
        matches!(self, Format::Conll06)
    }

    fn lemma_col(self) -> usize {
        2
    }

    fn pos_col(self) -> usize {
        match self {
            Format::Conll06 => 4,
            Format::Conll09 => 4,
        }
    }

    fn head_col(self) -> usize {
        match self {
            Format::Conll06 => 6,
            Format::Conll09 => 8,
        }
    }

    fn deprel_col(self) -> usize {
        match self {
            Format::Conll06 => 7,
            Format::Conll09 => 10,
        }
    }

    /// Column positions that are carried as opaque strings.
    fn opaque_cols(self) -> &'static [usize] {
        match self {
            Format::Conll06 => &[3, 5, 8, 9],
            Format::Conll09 => &[3, 5, 6, 7, 9, 11, 12, 13],
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conll06" | "conllx" | "conll-x" | "conll07" => Ok(Format::Conll06),
            "conll09" | "conll2009" => Ok(Format::Conll09),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Conll06 => f.write_str("conll06"),
            Format::Conll09 => f.write_str("conll09"),
        }
    }
}

/// One treebank row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: Option<String>,
    pub pos: Option<String>,
    /// Head position, 0 for the artificial root.
    pub head: Option<usize>,
    pub deprel: Option<String>,
    /// Remaining columns in file order, kept verbatim.
    pub extra: Vec<String>,
}

impl Token {
    pub fn new(index: usize, form: impl Into<String>) -> Self {
        Token {
            index,
            form: form.into(),
            lemma: None,
            pos: None,
            head: None,
            deprel: None,
            extra: Vec::new(),
        }
    }

    pub fn with_pos(mut self, pos: impl Into<String>) -> Self {
        self.pos = Some(pos.into());
        self
    }

    pub fn with_head(mut self, head: usize, deprel: impl Into<String>) -> Self {
        self.head = Some(head);
        self.deprel = Some(deprel.into());
        self
    }

    pub fn pos_str(&self) -> &str {
        self.pos.as_deref().unwrap_or(ABSENT)
    }

    pub fn deprel_str(&self) -> &str {
        self.deprel.as_deref().unwrap_or(ABSENT)
    }
}

/// An annotated sentence. Position 0 is the implicit artificial root.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    /// Builds a sentence from `(form, pos, head, deprel)` tuples.
    pub fn from_rows<S: AsRef<str>>(rows: &[(S, S, usize, S)]) -> Self {
        let tokens = rows
            .iter()
            .enumerate()
            .map(|(i, (form, pos, head, rel))| {
                Token::new(i + 1, form.as_ref())
                    .with_pos(pos.as_ref())
                    .with_head(*head, rel.as_ref())
            })
            .collect();
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at 1-based position `index`.
    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    /// Head of every token; index 0 of the result is unused.
    pub fn heads(&self) -> Vec<Option<usize>> {
        std::iter::once(None)
            .chain(self.tokens.iter().map(|t| t.head))
            .collect()
    }

    pub fn is_fully_annotated(&self) -> bool {
        self.tokens.iter().all(|t| t.head.is_some() && t.deprel.is_some())
    }

    /// Heads and labels removed, everything else kept.
    pub fn stripped(&self) -> Sentence {
        let tokens = self
            .tokens
            .iter()
            .map(|t| Token {
                head: None,
                deprel: None,
                ..t.clone()
            })
            .collect();
        Sentence { tokens }
    }

    /// Same tokens with the given `(head, label)` per token.
    pub fn with_arcs(&self, arcs: &[(usize, String)]) -> Sentence {
        assert_eq!(arcs.len(), self.len());
        let tokens = self
            .tokens
            .iter()
            .zip(arcs)
            .map(|(t, (h, l))| Token {
                head: Some(*h),
                deprel: Some(l.clone()),
                ..t.clone()
            })
            .collect();
        Sentence { tokens }
    }

    /// Accepts exactly the head assignments forming a single tree rooted at 0
    /// with one root dependent.
    pub fn validate_tree(&self) -> Result<()> {
        let n = self.len();
        let mut roots = 0;
        for t in &self.tokens {
            let head = t
                .head
                .ok_or_else(|| Error::Validation(format!("token {} has no head", t.index)))?;
            if head > n {
                return Err(Error::Validation(format!(
                    "token {} has out-of-range head {head}",
                    t.index
                )));
            }
            if head == t.index {
                return Err(Error::Validation(format!("token {} heads itself", t.index)));
            }
            if head == 0 {
                roots += 1;
            }
        }
        if n > 0 && roots != 1 {
            return Err(Error::Validation(format!(
                "expected exactly one root dependent, found {roots}"
            )));
        }
        let heads = self.heads();
        // 0 = unvisited, 1 = on current path, 2 = reaches root
        let mut state = vec![0u8; n + 1];
        state[0] = 2;
        for start in 1..=n {
            let mut path = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                path.push(cur);
                cur = heads[cur].expect("checked above");
            }
            if state[cur] == 1 {
                return Err(Error::Validation(format!("cycle through token {cur}")));
            }
            for p in path {
                state[p] = 2;
            }
        }
        Ok(())
    }

    /// True when no two arcs cross in surface order. Requires a valid tree.
    pub fn is_projective(&self) -> bool {
        let arcs: Vec<(usize, usize)> = self
            .tokens
            .iter()
            .filter_map(|t| t.head.map(|h| (h.min(t.index), h.max(t.index))))
            .collect();
        for (i, &(a, b)) in arcs.iter().enumerate() {
            for &(c, d) in &arcs[i + 1..] {
                if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                    return false;
                }
            }
        }
        true
    }
}

/// Sentence, token and vocabulary counts of a corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub average_length: f64,
    pub vocabulary: BTreeSet<String>,
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Sentences\t{}", self.sentences)?;
        writeln!(f, "Tokens\t{}", self.tokens)?;
        writeln!(f, "Avg. Length\t{:.2}", self.average_length)?;
        write!(f, "Vocabulary\t{}", self.vocabulary.len())
    }
}

pub fn corpus_stats(sentences: &[Sentence]) -> CorpusStats {
    let tokens: usize = sentences.iter().map(Sentence::len).sum();
    let vocabulary = sentences
        .iter()
        .flat_map(|s| s.forms().map(str::to_owned))
        .collect();
    let average_length = if sentences.is_empty() {
        0.0
    } else {
        tokens as f64 / sentences.len() as f64
    };
    CorpusStats {
        sentences: sentences.len(),
        tokens,
        average_length,
        vocabulary,
    }
}

fn opt(value: &str) -> Option<String> {
    if value == ABSENT {
        None
    } else {
        Some(value.to_owned())
    }
}

fn parse_row(line: &str, line_no: usize, format: Format) -> Result<Token> {
    let cols: Vec<&str> = line.split('\t').collect();
    let bad_count = if format.exact() {
        cols.len() != format.min_columns()
    } else {
        cols.len() < format.min_columns()
    };
    if bad_count {
        return Err(Error::Parse {
            line: line_no,
            message: format!(
                "expected {} columns for {format}, found {}",
                format.min_columns(),
                cols.len()
            ),
        });
    }
    let index: usize = cols[0].parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("token index {:?} is not an integer", cols[0]),
    })?;
    if cols[1].is_empty() {
        return Err(Error::Parse {
            line: line_no,
            message: "empty form".into(),
        });
    }
    let head_col = cols[format.head_col()];
    let head = if head_col == ABSENT {
        None
    } else {
        Some(head_col.parse::<usize>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("head {head_col:?} is not an integer"),
        })?)
    };
    let mut extra: Vec<String> = format
        .opaque_cols()
        .iter()
        .map(|&c| cols[c].to_owned())
        .collect();
    extra.extend(cols[format.min_columns()..].iter().map(|c| (*c).to_owned()));
    Ok(Token {
        index,
        form: cols[1].to_owned(),
        lemma: opt(cols[format.lemma_col()]),
        pos: opt(cols[format.pos_col()]),
        head,
        deprel: opt(cols[format.deprel_col()]),
        extra,
    })
}

fn finish_sentence(tokens: Vec<Token>, first_line: usize) -> Result<Sentence> {
    let n = tokens.len();
    for (i, t) in tokens.iter().enumerate() {
        if t.index != i + 1 {
            return Err(Error::Parse {
                line: first_line + i,
                message: format!("expected token index {}, found {}", i + 1, t.index),
            });
        }
        if let Some(h) = t.head {
            if h > n {
                return Err(Error::Validation(format!(
                    "line {}: head {h} out of range for sentence of length {n}",
                    first_line + i
                )));
            }
            if h == t.index {
                return Err(Error::Validation(format!(
                    "line {}: token {h} heads itself",
                    first_line + i
                )));
            }
        }
    }
    Ok(Sentence { tokens })
}

/// Reads all sentences from a CoNLL stream in file order.
pub fn read_conll<R: BufRead>(reader: R, format: Format) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut first_line = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                sentences.push(finish_sentence(std::mem::take(&mut tokens), first_line)?);
            }
            continue;
        }
        if tokens.is_empty() {
            first_line = line_no;
        }
        tokens.push(parse_row(line, line_no, format)?);
    }
    if !tokens.is_empty() {
        sentences.push(finish_sentence(tokens, first_line)?);
    }
    Ok(sentences)
}

fn field(value: &Option<String>) -> &str {
    value.as_deref().unwrap_or(ABSENT)
}

/// Writes sentences in the given format, one blank line after each sentence.
pub fn write_conll<W: Write>(mut writer: W, sentences: &[Sentence], format: Format) -> Result<()> {
    let width = format.min_columns();
    for sentence in sentences {
        for t in &sentence.tokens {
            let extra_fixed = format.opaque_cols().len();
            let mut cols = vec![ABSENT.to_owned(); width];
            cols[0] = t.index.to_string();
            cols[1] = t.form.clone();
            cols[format.lemma_col()] = field(&t.lemma).to_owned();
            cols[format.pos_col()] = field(&t.pos).to_owned();
            cols[format.head_col()] = t.head.map_or_else(|| ABSENT.to_owned(), |h| h.to_string());
            cols[format.deprel_col()] = field(&t.deprel).to_owned();
            for (&c, v) in format.opaque_cols().iter().zip(&t.extra) {
                cols[c] = v.clone();
            }
            if !format.exact() && t.extra.len() > extra_fixed {
                cols.extend(t.extra[extra_fixed..].iter().cloned());
            }
            writeln!(writer, "{}", cols.join("\t"))?;
        }
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_conll_file(path: impl AsRef<Path>, format: Format) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_conll(BufReader::new(file), format)
}

pub fn write_conll_file(path: impl AsRef<Path>, sentences: &[Sentence], format: Format) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_conll(BufWriter::new(file), sentences, format)
}

/// Reads a corpus and rejects any sentence that is not a single rooted tree.
pub fn read_treebank(path: impl AsRef<Path>, format: Format) -> Result<Vec<Sentence>> {
    let sentences = read_conll_file(path, format)?;
    for (i, s) in sentences.iter().enumerate() {
        s.validate_tree().map_err(|e| e.in_sentence(i))?;
    }
    Ok(sentences)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOM: &str = "1\tTom\t_\tN\tNNP\t_\t2\tSBJ\t_\t_\n2\tplays\tplay\tV\tVBZ\t_\t0\tROOT\t_\t_\n\n";

    #[test]
    fn reads_two_row_block() {
        let s = read_conll(TOM.as_bytes(), Format::Conll06).unwrap();
        assert_eq!(s.len(), 1);
        let t = &s[0].tokens;
        assert_eq!((t[0].form.as_str(), t[0].head, t[0].deprel_str()), ("Tom", Some(2), "SBJ"));
        assert_eq!((t[1].form.as_str(), t[1].head, t[1].deprel_str()), ("plays", Some(0), "ROOT"));
        assert_eq!(t[0].lemma, None);
        assert_eq!(t[1].lemma.as_deref(), Some("play"));
    }

    #[test]
    fn empty_stream() {
        assert!(read_conll("".as_bytes(), Format::Conll06).unwrap().is_empty());
        let mut out = Vec::new();
        write_conll(&mut out, &[], Format::Conll06).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn non_integer_head_reports_line() {
        let text = "1\tTom\t_\tN\tNNP\t_\t2\tSBJ\t_\t_\n2\tplays\t_\tV\tVBZ\t_\tx\tROOT\t_\t_\n";
        match read_conll(text.as_bytes(), Format::Conll06) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count() {
        let text = "1\tTom\t_\tN\n";
        assert!(matches!(
            read_conll(text.as_bytes(), Format::Conll06),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn out_of_range_head_is_validation_error() {
        let text = "1\tTom\t_\tN\tNNP\t_\t5\tSBJ\t_\t_\n";
        assert!(matches!(
            read_conll(text.as_bytes(), Format::Conll06),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn absent_lemma_written_as_underscore() {
        let s = Sentence::from_rows(&[("Tom", "NNP", 0, "ROOT")]);
        let mut out = Vec::new();
        write_conll(&mut out, &[s], Format::Conll06).unwrap();
        let line = String::from_utf8(out).unwrap();
        assert_eq!(line.lines().next().unwrap().split('\t').nth(2), Some("_"));
    }

    #[test]
    fn conll09_round_trip_keeps_extra_columns() {
        let text = "1\tTom\ttom\ttom\tNNP\tNNP\t_\t_\t2\t2\tSBJ\tSBJ\t_\t_\tA0\n\
                    2\tplays\tplay\tplay\tVBZ\tVBZ\t_\t_\t0\t0\tROOT\tROOT\tY\tplay.01\t_\n\n";
        let s = read_conll(text.as_bytes(), Format::Conll09).unwrap();
        assert_eq!(s[0].tokens[1].head, Some(0));
        let mut out = Vec::new();
        write_conll(&mut out, &s, Format::Conll09).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn stats() {
        let a = Sentence::from_rows(&[("a", "X", 0, "R"), ("b", "X", 1, "L"), ("a", "X", 1, "L")]);
        let b = Sentence::from_rows(&[
            ("c", "X", 0, "R"),
            ("d", "X", 1, "L"),
            ("e", "X", 1, "L"),
            ("a", "X", 1, "L"),
            ("b", "X", 1, "L"),
        ]);
        let st = corpus_stats(&[a, b]);
        assert_eq!((st.sentences, st.tokens, st.average_length), (2, 8, 4.0));
        assert_eq!(st.vocabulary.len(), 5);
        let empty = corpus_stats(&[]);
        assert_eq!((empty.sentences, empty.tokens, empty.average_length), (0, 0, 0.0));
    }

    #[test]
    fn rejects_multi_root_and_cycles() {
        let multi = Sentence::from_rows(&[("a", "X", 0, "R"), ("b", "X", 0, "R")]);
        assert!(multi.validate_tree().is_err());
        let cycle = Sentence::from_rows(&[("a", "X", 0, "R"), ("b", "X", 3, "L"), ("c", "X", 2, "L")]);
        assert!(cycle.validate_tree().is_err());
        let ok = Sentence::from_rows(&[("a", "X", 2, "L"), ("b", "X", 0, "R"), ("c", "X", 2, "L")]);
        assert!(ok.validate_tree().is_ok());
    }

    #[test]
    fn projectivity() {
        let proj = Sentence::from_rows(&[("a", "X", 2, "L"), ("b", "X", 0, "R"), ("c", "X", 2, "L")]);
        assert!(proj.is_projective());
        // 1->3 crosses 2->4
        let np = Sentence::from_rows(&[
            ("a", "X", 0, "R"),
            ("b", "X", 4, "L"),
            ("c", "X", 1, "L"),
            ("d", "X", 1, "L"),
        ]);
        assert!(!np.is_projective());
    }
}
