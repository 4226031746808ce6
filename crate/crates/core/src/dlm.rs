//! N-gram dependency language models.
//!
//! A model estimates how likely a word is as the next child of a head given
//! the N-1 children already attached on the same side between the two
//! (nearest first). Probabilities are estimated by relative frequency over an
//! automatically parsed corpus and then replaced by one of three coarse
//! classes according to their rank in the globally sorted list: the top 10%
//! become `PH`, the next 20% `PM`, the rest `PL`. Events absent from the table
//! are `PO`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::transition::{Configuration, System};

pub const ROOT_UNIT: &str = "<root>";
pub const PAD_UNIT: &str = "<s>";
pub const DEFAULT_MIN_COUNT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProbClass {
    PH,
    PM,
    PL,
    PO,
}

impl ProbClass {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for ProbClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbClass::PH => "PH",
            ProbClass::PM => "PM",
            ProbClass::PL => "PL",
            ProbClass::PO => "PO",
        })
    }
}

impl FromStr for ProbClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PH" => Ok(ProbClass::PH),
            "PM" => Ok(ProbClass::PM),
            "PL" => Ok(ProbClass::PL),
            "PO" => Ok(ProbClass::PO),
            _ => Err(Error::Format(format!("unknown probability class {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn as_str(self) -> &'static str {
        match self {
            Side::Left => "L",
            Side::Right => "R",
        }
    }
}

/// What a unit of the model is made of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnitScheme {
    /// Lowercased word form.
    Form,
    Pos,
    /// Lowercased form and tag joined by `/`.
    FormPos,
}

impl UnitScheme {
    pub fn unit(self, sentence: &Sentence, index: usize) -> String {
        if index == 0 {
            return ROOT_UNIT.to_owned();
        }
        let t = sentence.token(index);
        match self {
            UnitScheme::Form => t.form.to_lowercase(),
            UnitScheme::Pos => t.pos_str().to_owned(),
            UnitScheme::FormPos => format!("{}/{}", t.form.to_lowercase(), t.pos_str()),
        }
    }
}

impl fmt::Display for UnitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitScheme::Form => "form",
            UnitScheme::Pos => "pos",
            UnitScheme::FormPos => "form+pos",
        })
    }
}

impl FromStr for UnitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "form" | "word" => Ok(UnitScheme::Form),
            "pos" => Ok(UnitScheme::Pos),
            "form+pos" | "formpos" | "form-pos" => Ok(UnitScheme::FormPos),
            other => Err(Error::InvalidArgument(format!("unknown unit scheme {other:?}"))),
        }
    }
}

/// Head plus history of previously attached children (nearest first).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DlmKey {
    pub side: Side,
    pub head: String,
    pub context: Vec<String>,
}

impl DlmKey {
    pub fn new(side: Side, head: impl Into<String>, context: Vec<String>) -> Self {
        DlmKey {
            side,
            head: head.into(),
            context,
        }
    }

    pub fn order(&self) -> usize {
        self.context.len() + 1
    }
}

const SEP: char = '\u{1f}';

fn join_key(side: Side, head: &str, context: &[&str], child: &str, buf: &mut String) {
    buf.clear();
    buf.push_str(side.as_str());
    buf.push(SEP);
    buf.push_str(head);
    for c in context {
        buf.push(SEP);
        buf.push_str(c);
    }
    buf.push(SEP);
    buf.push_str(child);
}

fn split_key(joined: &str) -> (DlmKey, String) {
    let mut parts: Vec<&str> = joined.split(SEP).collect();
    let child = parts.pop().expect("child").to_owned();
    let side = if parts[0] == "L" { Side::Left } else { Side::Right };
    let head = parts[1].to_owned();
    let context = parts[2..].iter().map(|s| (*s).to_owned()).collect();
    (DlmKey { side, head, context }, child)
}

/// A classified dependency language model.
#[derive(Clone, Debug, PartialEq)]
pub struct DlmTable {
    order: usize,
    min_count: usize,
    scheme: UnitScheme,
    entries: HashMap<String, ProbClass>,
}

impl DlmTable {
    pub fn empty(order: usize, min_count: usize, scheme: UnitScheme) -> Self {
        DlmTable {
            order,
            min_count,
            scheme,
            entries: HashMap::new(),
        }
    }

    /// Classifies already estimated probabilities. Entries are ranked by
    /// descending probability; the first ⌈10%⌉ are `PH`, up to ⌈30%⌉ `PM`,
    /// the rest `PL`. Entries tied with the last entry of a class join it.
    pub fn from_probabilities(
        order: usize,
        min_count: usize,
        scheme: UnitScheme,
        mut scored: Vec<(DlmKey, String, f64)>,
    ) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidArgument("DLM order must be at least 1".into()));
        }
        if let Some((k, _, _)) = scored.iter().find(|(k, _, _)| k.order() != order) {
            return Err(Error::InvalidArgument(format!(
                "entry with head {:?} has order {}, table order is {order}",
                k.head,
                k.order()
            )));
        }
        scored.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| (&a.0, &a.1).cmp(&(&b.0, &b.1))));
        let m = scored.len();
        let mut entries = HashMap::with_capacity(m);
        if m > 0 {
            let ph_cut = scored[(m + 9) / 10 - 1].2;
            let pm_cut = scored[(3 * m + 9) / 10 - 1].2;
            let mut buf = String::new();
            for (key, child, p) in &scored {
                let class = if *p >= ph_cut {
                    ProbClass::PH
                } else if *p >= pm_cut {
                    ProbClass::PM
                } else {
                    ProbClass::PL
                };
                let ctx: Vec<&str> = key.context.iter().map(String::as_str).collect();
                join_key(key.side, &key.head, &ctx, child, &mut buf);
                entries.insert(buf.clone(), class);
            }
        }
        Ok(DlmTable {
            order,
            min_count,
            scheme,
            entries,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn scheme(&self) -> UnitScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup_class(&self, key: &DlmKey, child: &str) -> ProbClass {
        if key.order() != self.order {
            return ProbClass::PO;
        }
        let ctx: Vec<&str> = key.context.iter().map(String::as_str).collect();
        let mut buf = String::new();
        self.lookup_parts(key.side, &key.head, &ctx, child, &mut buf)
    }

    fn lookup_parts(&self, side: Side, head: &str, context: &[&str], child: &str, buf: &mut String) -> ProbClass {
        join_key(side, head, context, child, buf);
        self.entries.get(buf.as_str()).copied().unwrap_or(ProbClass::PO)
    }

    /// `(class size PH, PM, PL)`.
    pub fn class_sizes(&self) -> (usize, usize, usize) {
        self.entries.values().fold((0, 0, 0), |(h, m, l), c| match c {
            ProbClass::PH => (h + 1, m, l),
            ProbClass::PM => (h, m + 1, l),
            _ => (h, m, l + 1),
        })
    }

    /// Entries sorted by key.
    pub fn entries(&self) -> Vec<(DlmKey, String, ProbClass)> {
        let mut out: Vec<_> = self
            .entries
            .iter()
            .map(|(k, c)| {
                let (key, child) = split_key(k);
                (key, child, *c)
            })
            .collect();
        out.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        out
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "#dlm\torder={}\tmin_count={}\tunits={}",
            self.order, self.min_count, self.scheme
        )?;
        for (key, child, class) in self.entries() {
            let ctx: Vec<String> = key.context.iter().map(|c| escape(c)).collect();
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                self.order,
                key.side.as_str(),
                escape(&key.head),
                ctx.join("|"),
                escape(&child),
                class
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Format("empty DLM file".into()))?;
        let mut order = None;
        let mut min_count = None;
        let mut scheme = None;
        let mut fields = header.split('\t');
        if fields.next() != Some("#dlm") {
            return Err(Error::Format("missing #dlm header".into()));
        }
        for f in fields {
            match f.split_once('=') {
                Some(("order", v)) => order = v.parse().ok(),
                Some(("min_count", v)) => min_count = v.parse().ok(),
                Some(("units", v)) => scheme = v.parse().ok(),
                _ => return Err(Error::Format(format!("bad header field {f:?}"))),
            }
        }
        let (order, min_count, scheme) = match (order, min_count, scheme) {
            (Some(o), Some(m), Some(s)) => (o, m, s),
            _ => return Err(Error::Format("incomplete DLM header".into())),
        };
        let mut table = DlmTable::empty(order, min_count, scheme);
        let mut buf = String::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |m: &str| Error::Parse {
                line: i + 2,
                message: m.to_owned(),
            };
            if cols.len() != 6 {
                return Err(bad("expected 6 columns"));
            }
            if cols[0].parse::<usize>().ok() != Some(order) {
                return Err(bad("order column disagrees with header"));
            }
            let side = match cols[1] {
                "L" => Side::Left,
                "R" => Side::Right,
                _ => return Err(bad("side must be L or R")),
            };
            let ctx: Vec<String> = if cols[3].is_empty() {
                Vec::new()
            } else {
                cols[3].split('|').map(unescape).collect()
            };
            if ctx.len() + 1 != order {
                return Err(bad("context length does not match order"));
            }
            let ctx_ref: Vec<&str> = ctx.iter().map(String::as_str).collect();
            let class: ProbClass = cols[5].parse()?;
            join_key(side, &unescape(cols[2]), &ctx_ref, &unescape(cols[4]), &mut buf);
            table.entries.insert(buf.clone(), class);
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::file(path, e))?;
        DlmTable::read(BufReader::new(f))
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '%' => out.push_str("%25"),
            '\t' => out.push_str("%09"),
            '\n' => out.push_str("%0A"),
            '|' => out.push_str("%7C"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    s.replace("%7C", "|")
        .replace("%0A", "\n")
        .replace("%09", "\t")
        .replace("%25", "%")
}

/// Children of every head, split by side and ordered outward from the head.
fn sided_children(sentence: &Sentence) -> Vec<[Vec<usize>; 2]> {
    let n = sentence.len();
    let mut out = vec![[Vec::new(), Vec::new()]; n + 1];
    for t in &sentence.tokens {
        let h = t.head.expect("annotated");
        if t.index < h {
            out[h][0].push(t.index);
        } else {
            out[h][1].push(t.index);
        }
    }
    for sides in &mut out {
        sides[0].reverse();
    }
    out
}

/// Raw counts `(key, child) -> count` for one order.
pub fn count_events(sentences: &[Sentence], order: usize, scheme: UnitScheme) -> Result<BTreeMap<(DlmKey, String), usize>> {
    let mut counts = BTreeMap::new();
    for (i, s) in sentences.iter().enumerate() {
        s.validate_tree().map_err(|e| e.in_sentence(i))?;
        let units: Vec<String> = (0..=s.len()).map(|k| scheme.unit(s, k)).collect();
        for (head, sides) in sided_children(s).iter().enumerate() {
            for (side, kids) in [Side::Left, Side::Right].into_iter().zip(sides) {
                for (k, &child) in kids.iter().enumerate() {
                    let context = (1..order)
                        .map(|back| {
                            k.checked_sub(back)
                                .map_or_else(|| PAD_UNIT.to_owned(), |p| units[kids[p]].clone())
                        })
                        .collect();
                    let key = DlmKey::new(side, units[head].clone(), context);
                    *counts.entry((key, units[child].clone())).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Estimates relative-frequency probabilities, drops events seen fewer than
/// `min_count` times and classifies the rest.
pub fn extract_dlm(sentences: &[Sentence], order: usize, min_count: usize, scheme: UnitScheme) -> Result<DlmTable> {
    if order < 1 {
        return Err(Error::InvalidArgument("DLM order must be at least 1".into()));
    }
    let counts = count_events(sentences, order, scheme)?;
    let mut totals: BTreeMap<&DlmKey, usize> = BTreeMap::new();
    for ((key, _), c) in &counts {
        *totals.entry(key).or_insert(0) += c;
    }
    let scored = counts
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|((key, child), &c)| (key.clone(), child.clone(), c as f64 / totals[key] as f64))
        .collect();
    DlmTable::from_probabilities(order, min_count, scheme, scored)
}

/// A table attached to a model under index `index` (NO_DLM).
#[derive(Clone, Debug)]
pub struct DlmAttachment {
    pub path: String,
    pub index: u32,
    pub table: Arc<DlmTable>,
}

/// `(NO_DLM, class of the stack top, class of the item below)` per attached
/// table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DlmClasses {
    pub index: u32,
    pub top: ProbClass,
    pub second: ProbClass,
}

/// The two tokens an arc transition may join: `(s0, s1)` for arc-standard,
/// `(b0, s0)` for arc-eager.
pub fn arc_pair(config: &Configuration) -> Option<(usize, usize)> {
    match config.system() {
        System::ArcStandardSwap => Some((config.stack_top(0)?, config.stack_top(1)?)),
        System::ArcEager => Some((config.buffer_at(0)?, config.stack_top(0)?)),
    }
}

/// Class of `child` as the next dependent of `head`, with the history taken
/// from dependents of `head` already attached on the same side and closer
/// to the head.
fn class_as_child(
    table: &DlmTable,
    config: &Configuration,
    sentence: &Sentence,
    head: usize,
    child: usize,
    buf: &mut String,
) -> ProbClass {
    if child == 0 {
        return ProbClass::PO;
    }
    let side = if child < head { Side::Left } else { Side::Right };
    let (lo, hi) = if child < head { (child, head) } else { (head, child) };
    let mut previous: Vec<usize> = config.dependents(head).filter(|&d| lo < d && d < hi).collect();
    // nearest to the child first
    previous.sort_by_key(|&d| d.abs_diff(child));
    let scheme = table.scheme();
    let units: Vec<String> = previous
        .iter()
        .take(table.order() - 1)
        .map(|&d| scheme.unit(sentence, d))
        .collect();
    let mut ctx: Vec<&str> = units.iter().map(String::as_str).collect();
    ctx.resize(table.order() - 1, PAD_UNIT);
    let head_unit = scheme.unit(sentence, head);
    let child_unit = scheme.unit(sentence, child);
    table.lookup_parts(side, &head_unit, &ctx, &child_unit, buf)
}

/// Classes of the two arc candidates, each taken as the next child of the
/// other, for every attached table.
pub fn classify_for_configuration(
    tables: &[DlmAttachment],
    config: &Configuration,
    sentence: &Sentence,
) -> Vec<DlmClasses> {
    let Some((top, second)) = arc_pair(config) else {
        return Vec::new();
    };
    let mut buf = String::new();
    tables
        .iter()
        .map(|a| DlmClasses {
            index: a.index,
            top: class_as_child(&a.table, config, sentence, second, top, &mut buf),
            second: class_as_child(&a.table, config, sentence, top, second, &mut buf),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(head: &str) -> DlmKey {
        DlmKey::new(Side::Left, head, Vec::new())
    }

    #[test]
    fn ten_distinct_probabilities_split_1_2_7() {
        let scored = (0..10)
            .map(|i| (key(&format!("h{i}")), "c".to_owned(), 1.0 - i as f64 * 0.05))
            .collect();
        let t = DlmTable::from_probabilities(1, 3, UnitScheme::Form, scored).unwrap();
        assert_eq!(t.class_sizes(), (1, 2, 7));
        assert_eq!(t.lookup_class(&key("h0"), "c"), ProbClass::PH);
        assert_eq!(t.lookup_class(&key("h1"), "c"), ProbClass::PM);
        assert_eq!(t.lookup_class(&key("h2"), "c"), ProbClass::PM);
        assert_eq!(t.lookup_class(&key("h3"), "c"), ProbClass::PL);
    }

    #[test]
    fn ties_at_cut_take_the_better_class() {
        let probs = [0.9, 0.9, 0.5, 0.5, 0.5, 0.1, 0.1, 0.1, 0.1, 0.1];
        let scored = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (key(&format!("h{i}")), "c".to_owned(), p))
            .collect();
        let t = DlmTable::from_probabilities(1, 3, UnitScheme::Form, scored).unwrap();
        assert_eq!(t.class_sizes(), (2, 3, 5));
    }

    #[test]
    fn lookup_unseen_and_empty() {
        let t = DlmTable::empty(2, 3, UnitScheme::Form);
        let k = DlmKey::new(Side::Right, "plays", vec![PAD_UNIT.into()]);
        assert_eq!(t.lookup_class(&k, "football"), ProbClass::PO);
    }

    fn tom_plays() -> Sentence {
        Sentence::from_rows(&[("Tom", "NNP", 2, "SBJ"), ("plays", "VBZ", 0, "ROOT"), ("football", "NN", 2, "OBJ")])
    }

    #[test]
    fn unigram_hand_count() {
        let corpus = vec![tom_plays(), tom_plays(), tom_plays()];
        let t = extract_dlm(&corpus, 1, 3, UnitScheme::Form).unwrap();
        assert_eq!(t.lookup_class(&DlmKey::new(Side::Left, "plays", vec![]), "tom"), ProbClass::PH);
        let counts = count_events(&corpus, 1, UnitScheme::Form).unwrap();
        assert_eq!(counts[&(DlmKey::new(Side::Left, "plays", vec![]), "tom".to_owned())], 3);
        // count 2 is below the minimum frequency
        let t2 = extract_dlm(&corpus[..2], 1, 3, UnitScheme::Form).unwrap();
        assert!(t2.is_empty());
    }

    #[test]
    fn text_round_trip() {
        let corpus = vec![tom_plays(); 4];
        let t = extract_dlm(&corpus, 2, 3, UnitScheme::FormPos).unwrap();
        let mut out = Vec::new();
        t.write(&mut out).unwrap();
        let back = DlmTable::read(out.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn escaping() {
        for s in ["a|b", "50%", "x\ty", "plain"] {
            assert_eq!(unescape(&escape(s)), s);
        }
    }
}
