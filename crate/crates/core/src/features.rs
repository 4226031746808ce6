//! Binary feature templates and hashed sparse feature vectors.
//!
//! Every feature is the conjunction of a template instantiation over the
//! configuration with the candidate transition. Features are mapped to
//! weight indices with 64-bit FNV-1a over the template id, the attribute
//! bytes and the transition code, masked to the model's hash width.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use crate::corpus::Sentence;
use crate::dlm::{classify_for_configuration, DlmAttachment};
use crate::error::{Error, Result};
use crate::transition::{Configuration, Transition};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fnv(u64);

impl Fnv {
    pub fn new() -> Self {
        Fnv(FNV_OFFSET)
    }

    pub fn bytes(mut self, bytes: &[u8]) -> Self {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        self
    }

    /// Attribute followed by a 0xFF separator (never valid inside UTF-8).
    pub fn attr(self, s: &str) -> Self {
        self.bytes(s.as_bytes()).bytes(&[0xff])
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

impl Default for Fnv {
    fn default() -> Self {
        Fnv::new()
    }
}

/// Sparse feature counts keyed by hashed id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureVector(BTreeMap<u32, u32>);

impl FeatureVector {
    pub fn new() -> Self {
        FeatureVector::default()
    }

    pub fn from_ids<I: IntoIterator<Item = u32>>(ids: I) -> Self {
        let mut v = FeatureVector::new();
        for id in ids {
            v.push(id);
        }
        v
    }

    pub fn push(&mut self, id: u32) {
        *self.0.entry(id).or_insert(0) += 1;
    }

    pub fn add_count(&mut self, id: u32, count: u32) {
        if count > 0 {
            *self.0.entry(id).or_insert(0) += count;
        }
    }

    pub fn get(&self, id: u32) -> u32 {
        self.0.get(&id).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    /// Number of distinct ids.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&c| u64::from(c)).sum()
    }
}

impl AddAssign<&FeatureVector> for FeatureVector {
    fn add_assign(&mut self, rhs: &FeatureVector) {
        for (id, c) in rhs.iter() {
            self.add_count(id, c);
        }
    }
}

impl Add for &FeatureVector {
    type Output = FeatureVector;

    fn add(self, rhs: &FeatureVector) -> FeatureVector {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

/// Base feature templates over the configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Template {
    Bias,
    S0w,
    S0p,
    S1w,
    S1p,
    S2w,
    S2p,
    B0w,
    B0p,
    B1w,
    B1p,
    B2w,
    B2p,
    S0wS1w,
    S0pS1p,
    S0wS1p,
    S0pS1w,
    S0wB0w,
    S0pB0p,
    S0wB0p,
    S0pB0w,
    S0pS1pB0p,
    S0LeftChild,
    S0RightChild,
    S1LeftChild,
    S1RightChild,
    S0S1Distance,
    S0Valency,
    S1Valency,
}

impl Template {
    pub const ALL: [Template; 29] = [
        Template::Bias,
        Template::S0w,
        Template::S0p,
        Template::S1w,
        Template::S1p,
        Template::S2w,
        Template::S2p,
        Template::B0w,
        Template::B0p,
        Template::B1w,
        Template::B1p,
        Template::B2w,
        Template::B2p,
        Template::S0wS1w,
        Template::S0pS1p,
        Template::S0wS1p,
        Template::S0pS1w,
        Template::S0wB0w,
        Template::S0pB0p,
        Template::S0wB0p,
        Template::S0pB0w,
        Template::S0pS1pB0p,
        Template::S0LeftChild,
        Template::S0RightChild,
        Template::S1LeftChild,
        Template::S1RightChild,
        Template::S0S1Distance,
        Template::S0Valency,
        Template::S1Valency,
    ];

    pub fn id(self) -> u16 {
        self as u16
    }

    pub fn name(self) -> &'static str {
        match self {
            Template::Bias => "bias",
            Template::S0w => "s0.w",
            Template::S0p => "s0.p",
            Template::S1w => "s1.w",
            Template::S1p => "s1.p",
            Template::S2w => "s2.w",
            Template::S2p => "s2.p",
            Template::B0w => "b0.w",
            Template::B0p => "b0.p",
            Template::B1w => "b1.w",
            Template::B1p => "b1.p",
            Template::B2w => "b2.w",
            Template::B2p => "b2.p",
            Template::S0wS1w => "s0.w+s1.w",
            Template::S0pS1p => "s0.p+s1.p",
            Template::S0wS1p => "s0.w+s1.p",
            Template::S0pS1w => "s0.p+s1.w",
            Template::S0wB0w => "s0.w+b0.w",
            Template::S0pB0p => "s0.p+b0.p",
            Template::S0wB0p => "s0.w+b0.p",
            Template::S0pB0w => "s0.p+b0.w",
            Template::S0pS1pB0p => "s0.p+s1.p+b0.p",
            Template::S0LeftChild => "s0.lc.p+l",
            Template::S0RightChild => "s0.rc.p+l",
            Template::S1LeftChild => "s1.lc.p+l",
            Template::S1RightChild => "s1.rc.p+l",
            Template::S0S1Distance => "s0.p+s1.p+dist",
            Template::S0Valency => "s0.p+val",
            Template::S1Valency => "s1.p+val",
        }
    }

    /// True when the template reads a word form.
    pub fn uses_form(self) -> bool {
        self.name().contains(".w")
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Template::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown feature template {s:?}")))
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ids of the seven DLM templates; kept apart from the base template ids.
pub const DLM_TEMPLATE_BASE: u16 = 1000;
pub const DLM_TEMPLATE_ROWS: u16 = 7;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    templates: Vec<Template>,
}

impl TemplateSet {
    pub fn standard() -> Self {
        TemplateSet {
            templates: Template::ALL.to_vec(),
        }
    }

    /// Every template that does not look at word forms.
    pub fn form_blind() -> Self {
        TemplateSet {
            templates: Template::ALL.iter().copied().filter(|t| !t.uses_form()).collect(),
        }
    }

    pub fn new(templates: Vec<Template>) -> Self {
        TemplateSet { templates }
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::standard()
    }
}

const NONE: &str = "<none>";
const ROOT: &str = "<root>";

struct View<'a> {
    config: &'a Configuration,
    sentence: &'a Sentence,
}

impl<'a> View<'a> {
    fn word(&self, i: Option<usize>) -> &'a str {
        match i {
            None => NONE,
            Some(0) => ROOT,
            Some(i) => &self.sentence.token(i).form,
        }
    }

    fn pos(&self, i: Option<usize>) -> &'a str {
        match i {
            None => NONE,
            Some(0) => ROOT,
            Some(i) => self.sentence.token(i).pos_str(),
        }
    }

    fn child(&self, head: Option<usize>, leftmost: bool, labels: &mut String) -> Fnv {
        let child = head.and_then(|h| {
            if leftmost {
                self.config.leftmost_dependent(h)
            } else {
                self.config.rightmost_dependent(h)
            }
        });
        labels.clear();
        if let Some((_, l)) = child.and_then(|c| self.config.head_of(c)) {
            labels.push_str(&l.to_string());
        } else {
            labels.push_str(NONE);
        }
        Fnv::new().attr(self.pos(child)).attr(labels)
    }
}

fn distance_bucket(a: usize, b: usize) -> &'static str {
    match a.abs_diff(b) {
        0 => "0",
        1 => "1",
        2 => "2",
        3 => "3",
        4 => "4",
        5..=9 => "5-9",
        _ => "10+",
    }
}

/// Template instantiations of one configuration; conjoining them with a
/// transition yields that transition's feature ids.
#[derive(Clone, Debug)]
pub struct ConfigFeatures {
    base: Vec<u64>,
    dlm: Vec<u64>,
    mask: u32,
}

impl ConfigFeatures {
    pub fn compute(
        config: &Configuration,
        sentence: &Sentence,
        templates: &TemplateSet,
        dlms: &[DlmAttachment],
        hash_bits: u32,
    ) -> Self {
        let v = View { config, sentence };
        let s0 = config.stack_top(0);
        let s1 = config.stack_top(1);
        let s2 = config.stack_top(2);
        let b0 = config.buffer_at(0);
        let b1 = config.buffer_at(1);
        let b2 = config.buffer_at(2);
        let mut scratch = String::new();
        let base = templates
            .templates()
            .iter()
            .map(|&t| {
                let h = Fnv::new().bytes(&t.id().to_le_bytes());
                let h = match t {
                    Template::Bias => h,
                    Template::S0w => h.attr(v.word(s0)),
                    Template::S0p => h.attr(v.pos(s0)),
                    Template::S1w => h.attr(v.word(s1)),
                    Template::S1p => h.attr(v.pos(s1)),
                    Template::S2w => h.attr(v.word(s2)),
                    Template::S2p => h.attr(v.pos(s2)),
                    Template::B0w => h.attr(v.word(b0)),
                    Template::B0p => h.attr(v.pos(b0)),
                    Template::B1w => h.attr(v.word(b1)),
                    Template::B1p => h.attr(v.pos(b1)),
                    Template::B2w => h.attr(v.word(b2)),
                    Template::B2p => h.attr(v.pos(b2)),
                    Template::S0wS1w => h.attr(v.word(s0)).attr(v.word(s1)),
                    Template::S0pS1p => h.attr(v.pos(s0)).attr(v.pos(s1)),
                    Template::S0wS1p => h.attr(v.word(s0)).attr(v.pos(s1)),
                    Template::S0pS1w => h.attr(v.pos(s0)).attr(v.word(s1)),
                    Template::S0wB0w => h.attr(v.word(s0)).attr(v.word(b0)),
                    Template::S0pB0p => h.attr(v.pos(s0)).attr(v.pos(b0)),
                    Template::S0wB0p => h.attr(v.word(s0)).attr(v.pos(b0)),
                    Template::S0pB0w => h.attr(v.pos(s0)).attr(v.word(b0)),
                    Template::S0pS1pB0p => h.attr(v.pos(s0)).attr(v.pos(s1)).attr(v.pos(b0)),
                    Template::S0LeftChild => h.attr(v.pos(s0)).bytes(&v.child(s0, true, &mut scratch).finish().to_le_bytes()),
                    Template::S0RightChild => h.attr(v.pos(s0)).bytes(&v.child(s0, false, &mut scratch).finish().to_le_bytes()),
                    Template::S1LeftChild => h.attr(v.pos(s1)).bytes(&v.child(s1, true, &mut scratch).finish().to_le_bytes()),
                    Template::S1RightChild => h.attr(v.pos(s1)).bytes(&v.child(s1, false, &mut scratch).finish().to_le_bytes()),
                    Template::S0S1Distance => {
                        let d = match (s0, s1) {
                            (Some(a), Some(b)) => distance_bucket(a, b),
                            _ => NONE,
                        };
                        h.attr(v.pos(s0)).attr(v.pos(s1)).attr(d)
                    }
                    Template::S0Valency | Template::S1Valency => {
                        let node = if t == Template::S0Valency { s0 } else { s1 };
                        let (l, r) = node.map_or((0, 0), |n| config.valency(n));
                        h.attr(v.pos(node)).bytes(&(l as u32).to_le_bytes()).bytes(&(r as u32).to_le_bytes())
                    }
                };
                h.finish()
            })
            .collect();
        let dlm = if dlms.is_empty() {
            Vec::new()
        } else {
            dlm_states(config, sentence, dlms)
        };
        ConfigFeatures {
            base,
            dlm,
            mask: mask(hash_bits),
        }
    }

    /// Feature ids of this configuration conjoined with `t`. DLM features
    /// only fire for arc transitions.
    pub fn ids(&self, t: Transition) -> impl Iterator<Item = u32> + '_ {
        let (kind, label) = t.code();
        let mut suffix = [0u8; 5];
        suffix[0] = kind;
        suffix[1..].copy_from_slice(&label.to_le_bytes());
        let dlm: &[u64] = if t.is_arc() { &self.dlm } else { &[] };
        self.base
            .iter()
            .chain(dlm)
            .map(move |&state| (Fnv(state).bytes(&suffix).finish() as u32) & self.mask)
    }

    pub fn vector(&self, t: Transition) -> FeatureVector {
        FeatureVector::from_ids(self.ids(t))
    }

    pub fn score(&self, t: Transition, weights: &[f64]) -> f64 {
        self.ids(t).map(|id| weights[id as usize]).sum()
    }

    /// Number of DLM template instantiations carried (0 without tables).
    pub fn dlm_count(&self) -> usize {
        self.dlm.len()
    }
}

pub fn mask(hash_bits: u32) -> u32 {
    if hash_bits >= 32 {
        u32::MAX
    } else {
        (1u32 << hash_bits) - 1
    }
}

fn dlm_states(config: &Configuration, sentence: &Sentence, dlms: &[DlmAttachment]) -> Vec<u64> {
    let Some((top, second)) = crate::dlm::arc_pair(config) else {
        return Vec::new();
    };
    let v = View { config, sentence };
    let (t, s) = (Some(top), Some(second));
    let mut out = Vec::with_capacity(dlms.len() * DLM_TEMPLATE_ROWS as usize);
    for c in classify_for_configuration(dlms, config, sentence) {
        for row in 0..DLM_TEMPLATE_ROWS {
            let h = Fnv::new()
                .bytes(&(DLM_TEMPLATE_BASE + row).to_le_bytes())
                .bytes(&c.index.to_le_bytes())
                .bytes(&[c.top.code(), c.second.code()]);
            let h = match row {
                0 => h,
                1 => h.attr(v.pos(t)),
                2 => h.attr(v.word(t)),
                3 => h.attr(v.pos(s)),
                4 => h.attr(v.word(s)),
                5 => h.attr(v.pos(t)).attr(v.pos(s)),
                _ => h.attr(v.word(t)).attr(v.word(s)),
            };
            out.push(h.finish());
        }
    }
    out
}
