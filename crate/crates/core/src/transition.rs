//! Parser configurations and the two transition systems.
//!
//! The primary system is arc-standard extended with `Swap` for
//! non-projective trees. The artificial root (position 0) sits at the bottom
//! of the stack from the start and receives its single dependent with the
//! last `RightArc`. Arc-eager is provided as a second system so that two
//! learners can disagree in a structured way.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub type LabelId = u32;

/// Sorted label inventory; ids follow lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labels {
    names: Vec<String>,
    root: LabelId,
}

impl Labels {
    /// `root` names the label given to root attachments made at finalization.
    pub fn new<I, S>(names: I, root: &str) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = names.into_iter().map(Into::into).collect();
        names.sort();
        names.dedup();
        if names.is_empty() {
            return Err(Error::InvalidArgument("label inventory is empty".into()));
        }
        let root = names
            .binary_search_by(|n| n.as_str().cmp(root))
            .map_err(|_| Error::UnknownLabel(root.to_owned()))? as LabelId;
        Ok(Labels { names, root })
    }

    /// Collects every label in the corpus. The root label is the one most
    /// often attached to position 0 (ties go to the smaller name).
    pub fn from_corpus(sentences: &[Sentence]) -> Result<Self> {
        let mut root_counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut names = Vec::new();
        for t in sentences.iter().flat_map(|s| &s.tokens) {
            if let Some(rel) = &t.deprel {
                names.push(rel.clone());
                if t.head == Some(0) {
                    *root_counts.entry(rel).or_default() += 1;
                }
            }
        }
        let root = root_counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(r, _)| r.to_string())
            .or_else(|| names.iter().min().cloned())
            .ok_or_else(|| Error::InvalidArgument("corpus has no labels".into()))?;
        Labels::new(names, &root)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<LabelId> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| i as LabelId)
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn root(&self) -> LabelId {
        self.root
    }

    fn require(&self, name: &str) -> Result<LabelId> {
        self.id(name).ok_or_else(|| Error::UnknownLabel(name.to_owned()))
    }
}

/// A parser action. The derived order is the tie-breaking order used when
/// scores are equal: `Shift < LeftArc < RightArc < Swap < Reduce`, then by
/// label id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Transition {
    Shift,
    LeftArc(LabelId),
    RightArc(LabelId),
    Swap,
    Reduce,
}

impl Transition {
    pub fn label(self) -> Option<LabelId> {
        match self {
            Transition::LeftArc(l) | Transition::RightArc(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_arc(self) -> bool {
        self.label().is_some()
    }

    /// Stable numeric code used for feature hashing.
    pub fn code(self) -> (u8, u32) {
        match self {
            Transition::Shift => (0, 0),
            Transition::LeftArc(l) => (1, l),
            Transition::RightArc(l) => (2, l),
            Transition::Swap => (3, 0),
            Transition::Reduce => (4, 0),
        }
    }

    pub fn display<'a>(&self, labels: &'a Labels) -> TransitionDisplay<'a> {
        TransitionDisplay {
            transition: *self,
            labels,
        }
    }
}

pub struct TransitionDisplay<'a> {
    transition: Transition,
    labels: &'a Labels,
}

impl fmt::Display for TransitionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.transition {
            Transition::Shift => f.write_str("Shift"),
            Transition::LeftArc(l) => write!(f, "LeftArc({})", self.labels.name(l)),
            Transition::RightArc(l) => write!(f, "RightArc({})", self.labels.name(l)),
            Transition::Swap => f.write_str("Swap"),
            Transition::Reduce => f.write_str("Reduce"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum System {
    ArcStandardSwap,
    ArcEager,
}

impl System {
    pub fn tag(self) -> u8 {
        match self {
            System::ArcStandardSwap => 0,
            System::ArcEager => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(System::ArcStandardSwap),
            1 => Some(System::ArcEager),
            _ => None,
        }
    }

    /// Every transition of this system for the inventory, in tie-break order.
    pub fn transitions(self, labels: &Labels) -> Vec<Transition> {
        let n = labels.len() as LabelId;
        let mut out = vec![Transition::Shift];
        out.extend((0..n).map(Transition::LeftArc));
        out.extend((0..n).map(Transition::RightArc));
        match self {
            System::ArcStandardSwap => out.push(Transition::Swap),
            System::ArcEager => out.push(Transition::Reduce),
        }
        out
    }

    pub fn initial(self, sentence: &Sentence) -> Configuration {
        Configuration::initial(self, sentence.len())
    }

    pub fn oracle(self, sentence: &Sentence, labels: &Labels) -> Result<Vec<Transition>> {
        oracle_sequence(sentence, self, labels)
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arc-standard" | "arc_standard" | "arc-standard-swap" | "arc_standard_swap" | "swap" => {
                Ok(System::ArcStandardSwap)
            }
            "arc-eager" | "arc_eager" | "eager" => Ok(System::ArcEager),
            other => Err(Error::InvalidArgument(format!("unknown transition system {other:?}"))),
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            System::ArcStandardSwap => f.write_str("arc-standard-swap"),
            System::ArcEager => f.write_str("arc-eager"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConfigState {
    stack: Vec<usize>,
    buffer: Vec<usize>,
    heads: Vec<Option<(usize, LabelId)>>,
}

/// Parser state: stack, buffer, labelled arcs and the applied history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    system: System,
    stack: Vec<usize>,
    /// Stored back to front: the buffer head is the last element.
    buffer: Vec<usize>,
    heads: Vec<Option<(usize, LabelId)>>,
    history: Vec<Transition>,
}

impl Configuration {
    pub fn initial(system: System, len: usize) -> Self {
        Configuration {
            system,
            stack: vec![0],
            buffer: (1..=len).rev().collect(),
            heads: vec![None; len + 1],
            history: Vec::new(),
        }
    }

    pub fn system(&self) -> System {
        self.system
    }

    /// Number of real tokens.
    pub fn len(&self) -> usize {
        self.heads.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stack bottom first, top last.
    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    /// Buffer head first.
    pub fn buffer(&self) -> Vec<usize> {
        self.buffer.iter().rev().copied().collect()
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// `i`-th item from the stack top (`s0`, `s1`, ...).
    pub fn stack_top(&self, i: usize) -> Option<usize> {
        self.stack.len().checked_sub(i + 1).map(|k| self.stack[k])
    }

    /// `i`-th item of the buffer (`b0`, `b1`, ...).
    pub fn buffer_at(&self, i: usize) -> Option<usize> {
        self.buffer.len().checked_sub(i + 1).map(|k| self.buffer[k])
    }

    pub fn history(&self) -> &[Transition] {
        &self.history
    }

    /// Stack, buffer and arcs, without the history. Two configurations with
    /// equal states score every continuation identically.
    pub fn state(&self) -> ConfigState {
        ConfigState {
            stack: self.stack.clone(),
            buffer: self.buffer.clone(),
            heads: self.heads.clone(),
        }
    }

    pub fn head_of(&self, dependent: usize) -> Option<(usize, LabelId)> {
        self.heads[dependent]
    }

    /// All arcs as `(head, dependent, label)`, ordered by dependent.
    pub fn arcs(&self) -> Vec<(usize, usize, LabelId)> {
        self.heads
            .iter()
            .enumerate()
            .filter_map(|(d, a)| a.map(|(h, l)| (h, d, l)))
            .collect()
    }

    pub fn has_arc(&self, head: usize, dependent: usize, label: LabelId) -> bool {
        dependent < self.heads.len() && self.heads[dependent] == Some((head, label))
    }

    /// Attached dependents of `head`, ascending by position.
    pub fn dependents(&self, head: usize) -> impl Iterator<Item = usize> + '_ {
        self.heads
            .iter()
            .enumerate()
            .filter(move |(_, a)| matches!(a, Some((h, _)) if *h == head))
            .map(|(d, _)| d)
    }

    pub fn leftmost_dependent(&self, head: usize) -> Option<usize> {
        self.dependents(head).next().filter(|&d| d < head)
    }

    pub fn rightmost_dependent(&self, head: usize) -> Option<usize> {
        self.dependents(head).last().filter(|&d| d > head)
    }

    /// (left, right) counts of attached dependents.
    pub fn valency(&self, head: usize) -> (usize, usize) {
        self.dependents(head)
            .fold((0, 0), |(l, r), d| if d < head { (l + 1, r) } else { (l, r + 1) })
    }

    pub fn is_terminal(&self) -> bool {
        match self.system {
            System::ArcStandardSwap => self.buffer.is_empty() && self.stack.len() == 1,
            System::ArcEager => self.buffer.is_empty(),
        }
    }

    pub fn permissible(&self, t: Transition) -> bool {
        let s0 = self.stack_top(0);
        let s1 = self.stack_top(1);
        match (self.system, t) {
            (_, Transition::Shift) => !self.buffer.is_empty(),
            (System::ArcStandardSwap, Transition::LeftArc(_)) => matches!(s1, Some(i) if i != 0),
            // the root takes its dependent only once everything else is done
            (System::ArcStandardSwap, Transition::RightArc(_)) => match s1 {
                Some(0) => self.buffer.is_empty(),
                Some(_) => true,
                None => false,
            },
            (System::ArcStandardSwap, Transition::Swap) => {
                matches!((s1, s0), (Some(i), Some(j)) if 0 < i && i < j)
            }
            (System::ArcStandardSwap, Transition::Reduce) => false,
            (System::ArcEager, Transition::LeftArc(_)) => {
                !self.buffer.is_empty() && matches!(s0, Some(i) if i != 0 && self.heads[i].is_none())
            }
            (System::ArcEager, Transition::RightArc(_)) => match s0 {
                Some(0) => {
                    !self.buffer.is_empty() && !self.heads.iter().any(|a| matches!(a, Some((0, _))))
                }
                Some(_) => !self.buffer.is_empty(),
                None => false,
            },
            (System::ArcEager, Transition::Reduce) => matches!(s0, Some(i) if self.heads[i].is_some()),
            (System::ArcEager, Transition::Swap) => false,
        }
    }

    /// The `(head, dependent, label)` arc that `t` would add, if any.
    pub fn arc_created(&self, t: Transition) -> Option<(usize, usize, LabelId)> {
        let label = t.label()?;
        let (head, dep) = match (self.system, t) {
            (System::ArcStandardSwap, Transition::LeftArc(_)) => (self.stack_top(0)?, self.stack_top(1)?),
            (System::ArcStandardSwap, _) => (self.stack_top(1)?, self.stack_top(0)?),
            (System::ArcEager, Transition::LeftArc(_)) => (self.buffer_at(0)?, self.stack_top(0)?),
            (System::ArcEager, _) => (self.stack_top(0)?, self.buffer_at(0)?),
        };
        Some((head, dep, label))
    }

    /// Applies `t` to a copy of this configuration.
    pub fn apply(&self, t: Transition) -> Result<Configuration> {
        if !self.permissible(t) {
            return Err(Error::NotPermissible {
                transition: format!("{t:?}"),
            });
        }
        let mut next = self.clone();
        next.apply_unchecked(t);
        Ok(next)
    }

    /// In-place application. The caller guarantees permissibility.
    pub(crate) fn apply_unchecked(&mut self, t: Transition) {
        match (self.system, t) {
            (_, Transition::Shift) => {
                let b = self.buffer.pop().expect("shift on empty buffer");
                self.stack.push(b);
            }
            (System::ArcStandardSwap, Transition::LeftArc(l)) => {
                let j = self.stack.pop().expect("s0");
                let i = self.stack.pop().expect("s1");
                self.heads[i] = Some((j, l));
                self.stack.push(j);
            }
            (System::ArcStandardSwap, Transition::RightArc(l)) => {
                let j = self.stack.pop().expect("s0");
                let i = *self.stack.last().expect("s1");
                self.heads[j] = Some((i, l));
            }
            (System::ArcStandardSwap, Transition::Swap) => {
                let j = self.stack.pop().expect("s0");
                let i = self.stack.pop().expect("s1");
                self.stack.push(j);
                self.buffer.push(i);
            }
            (System::ArcEager, Transition::LeftArc(l)) => {
                let i = self.stack.pop().expect("s0");
                let j = *self.buffer.last().expect("b0");
                self.heads[i] = Some((j, l));
            }
            (System::ArcEager, Transition::RightArc(l)) => {
                let i = *self.stack.last().expect("s0");
                let j = self.buffer.pop().expect("b0");
                self.heads[j] = Some((i, l));
                self.stack.push(j);
            }
            (System::ArcEager, Transition::Reduce) => {
                self.stack.pop();
            }
            (System::ArcStandardSwap, Transition::Reduce) | (System::ArcEager, Transition::Swap) => {
                unreachable!("transition not part of {}", self.system)
            }
        }
        self.history.push(t);
    }

    /// Head and label of every token (index 0 unused). Tokens left unattached
    /// by arc-eager are attached to the root with the root label.
    pub fn tree(&self, labels: &Labels) -> Vec<(usize, LabelId)> {
        self.heads
            .iter()
            .skip(1)
            .map(|a| a.unwrap_or((0, labels.root())))
            .collect()
    }

    /// Copy of `sentence` annotated with this configuration's tree.
    pub fn to_sentence(&self, sentence: &Sentence, labels: &Labels) -> Sentence {
        let arcs: Vec<(usize, String)> = self
            .tree(labels)
            .into_iter()
            .map(|(h, l)| (h, labels.name(l).to_owned()))
            .collect();
        sentence.with_arcs(&arcs)
    }
}

/// Gold `(head, label id)` per token, index 0 unused.
fn gold_arcs(sentence: &Sentence, labels: &Labels) -> Result<Vec<(usize, LabelId)>> {
    sentence.validate_tree()?;
    let mut arcs = vec![(0, 0)];
    for t in &sentence.tokens {
        let head = t.head.expect("validated");
        let label = labels.require(t.deprel.as_deref().unwrap_or(""))?;
        arcs.push((head, label));
    }
    Ok(arcs)
}

/// Position of every node (root included) in the inorder traversal of the
/// gold tree. Sorting by this order makes the tree projective.
pub fn projective_order(heads: &[usize]) -> Vec<usize> {
    let n = heads.len() - 1;
    let mut children = vec![Vec::new(); n + 1];
    for d in 1..=n {
        children[heads[d]].push(d);
    }
    let mut order = vec![0; n + 1];
    let mut next = 0;
    // explicit stack of (node, expanded)
    let mut work = vec![(0usize, false)];
    while let Some((node, expanded)) = work.pop() {
        if expanded {
            order[node] = next;
            next += 1;
            continue;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = children[node].iter().partition(|&&c| c < node);
        for &c in right.iter().rev() {
            work.push((c, false));
        }
        work.push((node, true));
        for &c in left.iter().rev() {
            work.push((c, false));
        }
    }
    order
}

/// Static oracle: derives a transition sequence that rebuilds the gold tree.
///
/// Arc-standard with swap swaps eagerly whenever the two top stack items are
/// out of projective order. An arc is built once the dependent has collected
/// all of its own dependents and no buffer token precedes the stack top in
/// projective order.
pub fn oracle_sequence(sentence: &Sentence, system: System, labels: &Labels) -> Result<Vec<Transition>> {
    let gold = gold_arcs(sentence, labels)?;
    match system {
        System::ArcStandardSwap => swap_oracle(sentence.len(), &gold),
        System::ArcEager => {
            if !sentence.is_projective() {
                return Err(Error::UnsupportedStructure(
                    "arc-eager cannot derive a non-projective tree".into(),
                ));
            }
            eager_oracle(sentence.len(), &gold)
        }
    }
}

fn swap_oracle(n: usize, gold: &[(usize, LabelId)]) -> Result<Vec<Transition>> {
    let heads: Vec<usize> = gold.iter().map(|a| a.0).collect();
    let order = projective_order(&heads);
    let mut pending = vec![0usize; n + 1];
    for d in 1..=n {
        pending[heads[d]] += 1;
    }
    let mut config = Configuration::initial(System::ArcStandardSwap, n);
    let mut out = Vec::new();
    while !config.is_terminal() {
        let t = next_swap_action(&config, gold, &order, &pending)?;
        if let Transition::LeftArc(_) | Transition::RightArc(_) = t {
            let s0 = config.stack_top(0).expect("s0");
            let s1 = config.stack_top(1).expect("s1");
            let head = if matches!(t, Transition::LeftArc(_)) { s0 } else { s1 };
            pending[head] -= 1;
        }
        config.apply_unchecked(t);
        out.push(t);
    }
    Ok(out)
}

fn next_swap_action(
    config: &Configuration,
    gold: &[(usize, LabelId)],
    order: &[usize],
    pending: &[usize],
) -> Result<Transition> {
    if let (Some(s0), Some(s1)) = (config.stack_top(0), config.stack_top(1)) {
        let settled = config.buffer.iter().all(|&b| order[b] > order[s0]);
        if settled {
            if s1 != 0 && gold[s1].0 == s0 && pending[s1] == 0 {
                return Ok(Transition::LeftArc(gold[s1].1));
            }
            if gold[s0].0 == s1 && pending[s0] == 0 && (s1 != 0 || config.buffer.is_empty()) {
                return Ok(Transition::RightArc(gold[s0].1));
            }
        }
        if s1 != 0 && order[s0] < order[s1] {
            if config.permissible(Transition::Swap) {
                return Ok(Transition::Swap);
            }
            return Err(Error::UnsupportedStructure(format!(
                "oracle cannot order tokens {s1} and {s0}"
            )));
        }
    }
    if !config.buffer.is_empty() {
        return Ok(Transition::Shift);
    }
    Err(Error::UnsupportedStructure("oracle reached a dead end".into()))
}

fn eager_oracle(n: usize, gold: &[(usize, LabelId)]) -> Result<Vec<Transition>> {
    let mut pending = vec![0usize; n + 1];
    for d in 1..=n {
        pending[gold[d].0] += 1;
    }
    let mut config = Configuration::initial(System::ArcEager, n);
    let mut out = Vec::new();
    while !config.is_terminal() {
        let s0 = config.stack_top(0);
        let b0 = config.buffer_at(0).expect("non-terminal");
        let t = match s0 {
            Some(s) if s != 0 && gold[s].0 == b0 => Transition::LeftArc(gold[s].1),
            Some(s) if gold[b0].0 == s => Transition::RightArc(gold[b0].1),
            Some(s) if config.heads[s].is_some() && pending[s] == 0 => Transition::Reduce,
            _ => Transition::Shift,
        };
        if !config.permissible(t) {
            return Err(Error::UnsupportedStructure("oracle reached a dead end".into()));
        }
        match t {
            Transition::LeftArc(_) => pending[b0] -= 1,
            Transition::RightArc(_) => pending[s0.expect("s0")] -= 1,
            _ => {}
        }
        config.apply_unchecked(t);
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Labels {
        Labels::new(["DET", "NMOD", "OBJ", "PC", "ROOT", "SBJ", "VG"], "ROOT").unwrap()
    }

    fn hearing() -> Sentence {
        Sentence::from_rows(&[
            ("A", "DT", 2, "DET"),
            ("hearing", "NN", 3, "SBJ"),
            ("is", "VBZ", 0, "ROOT"),
            ("scheduled", "VBN", 3, "VG"),
            ("on", "IN", 2, "NMOD"),
            ("the", "DT", 7, "DET"),
            ("issue", "NN", 5, "PC"),
        ])
    }

    #[test]
    fn initial_configuration() {
        let c = System::ArcStandardSwap.initial(&hearing());
        assert_eq!(c.stack(), &[0]);
        assert_eq!(c.buffer(), vec![1, 2, 3, 4, 5, 6, 7]);
        assert!(c.arcs().is_empty());
        assert!(c.history().is_empty());
        let empty = System::ArcStandardSwap.initial(&Sentence::default());
        assert!(empty.is_terminal());
    }

    fn config_with_stack(stack: &[usize], n: usize) -> Configuration {
        let mut c = Configuration::initial(System::ArcStandardSwap, n);
        c.stack = stack.to_vec();
        c.buffer.retain(|b| !stack.contains(b));
        c
    }

    #[test]
    fn swap_and_left_arc_conditions() {
        assert!(config_with_stack(&[0, 3, 5], 5).permissible(Transition::Swap));
        assert!(!config_with_stack(&[0, 5, 3], 5).permissible(Transition::Swap));
        let c = config_with_stack(&[0, 4], 5);
        assert!(!c.permissible(Transition::LeftArc(0)));
        assert!(!c.permissible(Transition::Swap));
    }

    #[test]
    fn right_arc_removes_dependent() {
        let labels = Labels::new(["OBJ", "ROOT", "SBJ"], "ROOT").unwrap();
        let c = config_with_stack(&[0, 2, 3], 3);
        let obj = labels.id("OBJ").unwrap();
        let next = c.apply(Transition::RightArc(obj)).unwrap();
        assert_eq!(next.arcs(), vec![(2, 3, obj)]);
        assert_eq!(next.stack(), &[0, 2]);
        // the original is untouched
        assert!(c.arcs().is_empty());
        assert_eq!(c.stack(), &[0, 2, 3]);
    }

    #[test]
    fn non_permissible_apply_is_an_error() {
        let c = config_with_stack(&[0, 4], 5);
        assert!(matches!(c.apply(Transition::LeftArc(0)), Err(Error::NotPermissible { .. })));
    }

    #[test]
    fn shift_shift_then_swaps_restore_buffer() {
        let l = labels();
        let det = l.id("DET").unwrap();
        let mut c = System::ArcStandardSwap.initial(&hearing());
        for t in [
            Transition::Shift,
            Transition::Shift,
            Transition::LeftArc(det),
            Transition::Shift,
            Transition::Shift,
            Transition::Shift,
            Transition::Swap,
            Transition::Swap,
        ] {
            c = c.apply(t).unwrap();
        }
        assert_eq!(c.stack(), &[0, 2, 5]);
        assert_eq!(c.buffer(), vec![3, 4, 6, 7]);
    }

    #[test]
    fn projective_tree_needs_no_swap() {
        let s = Sentence::from_rows(&[
            ("Tom", "NNP", 2, "SBJ"),
            ("plays", "VBZ", 0, "ROOT"),
            ("football", "NN", 2, "OBJ"),
        ]);
        let l = labels();
        let seq = oracle_sequence(&s, System::ArcStandardSwap, &l).unwrap();
        assert!(!seq.contains(&Transition::Swap));
        let eager = oracle_sequence(&s, System::ArcEager, &l).unwrap();
        let mut c = System::ArcEager.initial(&s);
        for t in eager {
            c = c.apply(t).unwrap();
        }
        assert!(c.is_terminal());
        assert_eq!(c.tree(&l), vec![(2, 5), (0, 4), (2, 2)]);
    }

    #[test]
    fn arc_eager_rejects_non_projective() {
        assert!(matches!(
            oracle_sequence(&hearing(), System::ArcEager, &labels()),
            Err(Error::UnsupportedStructure(_))
        ));
    }

    #[test]
    fn unknown_label_in_gold() {
        let s = Sentence::from_rows(&[("x", "X", 0, "NOPE")]);
        assert!(matches!(
            oracle_sequence(&s, System::ArcStandardSwap, &labels()),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn projective_order_of_hearing_tree() {
        let heads = [0, 2, 3, 0, 3, 2, 7, 5];
        let order = projective_order(&heads);
        // A hearing on the issue is scheduled
        assert_eq!(&order[1..], &[1, 2, 6, 7, 3, 4, 5]);
    }

    #[test]
    fn label_inventory_from_corpus() {
        let l = Labels::from_corpus(&[hearing()]).unwrap();
        assert_eq!(l.name(l.root()), "ROOT");
        assert_eq!(l.names()[0], "DET");
        assert!(Transition::Shift < Transition::LeftArc(0));
        assert!(Transition::LeftArc(5) < Transition::RightArc(0));
        assert!(Transition::RightArc(9) < Transition::Swap);
    }
}
