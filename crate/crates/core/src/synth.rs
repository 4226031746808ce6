//! Synthetic treebanks: uniformly random trees and a small grammar with
//! lexically determined PP attachment, usable as a pair of domains.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::Sentence;

/// Random head vector for `n` tokens (entry `i` is the head of token `i+1`)
/// forming a single tree under the root.
pub fn random_heads<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k] - 1] = order[rng.gen_range(0..k)];
    }
    heads
}

/// Random tree over `n` tokens with random forms, tags and labels. The
/// token attached to the root gets `labels[0]`.
pub fn random_sentence<R: Rng>(rng: &mut R, n: usize, labels: &[&str]) -> Sentence {
    let heads = random_heads(rng, n);
    let rows: Vec<(String, String, usize, String)> = heads
        .iter()
        .map(|&h| {
            let label = if h == 0 {
                labels[0]
            } else {
                labels[rng.gen_range(0..labels.len())]
            };
            (
                format!("w{}", rng.gen_range(0..20)),
                format!("T{}", rng.gen_range(0..4)),
                h,
                label.to_owned(),
            )
        })
        .collect();
    Sentence::from_rows(&rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    /// `D N V D N`
    Transitive,
    /// `D N V D N with D N`; the PP attaches to the object when the object
    /// is a noun-attaching noun, otherwise to the verb.
    AmbiguousPp,
    /// `D N V D N of|by D N`; `of` follows noun-attaching objects and
    /// attaches to them, `by` follows the others and attaches to the verb.
    CuedPp,
    /// `D N with D N V D N`; only noun-attaching nouns take a PP in subject
    /// position, and it always attaches to them.
    SubjectPp,
}

/// Vocabulary and construction mix of one domain. Tags are `D N V P`,
/// labels `ROOT ARG MOD`.
#[derive(Clone, Debug)]
pub struct Domain {
    pub determiners: Vec<String>,
    pub verbs: Vec<String>,
    /// Nouns whose PPs attach to them.
    pub pp_nouns: Vec<String>,
    pub plain_nouns: Vec<String>,
    /// Relative frequency of transitive, ambiguous, cued and subject-PP
    /// sentences.
    pub mix: [f64; 4],
    /// Probability that a PP is annotated with the wrong site.
    pub noise: f64,
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl Domain {
    pub fn with_prefix(prefix: &str, nouns: usize, verbs: usize, mix: [f64; 4], noise: f64) -> Self {
        Domain {
            determiners: vec!["the".into(), "a".into()],
            verbs: words(&format!("{prefix}v"), verbs),
            pp_nouns: words(&format!("{prefix}pn"), nouns),
            plain_nouns: words(&format!("{prefix}n"), nouns),
            mix,
            noise,
        }
    }

    pub fn source() -> Self {
        Domain::with_prefix("s", 12, 8, [0.25, 0.35, 0.25, 0.15], 0.0)
    }

    /// Same grammar over a disjoint noun and verb vocabulary.
    pub fn target() -> Self {
        Domain::with_prefix("t", 12, 8, [0.15, 0.35, 0.2, 0.3], 0.0)
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    fn pick<'a, R: Rng>(rng: &mut R, v: &'a [String]) -> &'a str {
        &v[rng.gen_range(0..v.len())]
    }

    fn noun<R: Rng>(&self, rng: &mut R) -> &str {
        if rng.gen_bool(0.5) {
            Self::pick(rng, &self.pp_nouns)
        } else {
            Self::pick(rng, &self.plain_nouns)
        }
    }

    pub fn construction<R: Rng>(&self, rng: &mut R) -> Construction {
        let total: f64 = self.mix.iter().sum();
        let mut x = rng.gen_range(0.0..total);
        for (i, &w) in self.mix.iter().enumerate() {
            if x < w {
                return [
                    Construction::Transitive,
                    Construction::AmbiguousPp,
                    Construction::CuedPp,
                    Construction::SubjectPp,
                ][i];
            }
            x -= w;
        }
        Construction::SubjectPp
    }

    pub fn sentence<R: Rng>(&self, rng: &mut R, kind: Construction) -> Sentence {
        let d = |rng: &mut R| Self::pick(rng, &self.determiners).to_owned();
        let row = |f: String, t: &str, h: usize, l: &str| (f, t.to_owned(), h, l.to_owned());
        if kind == Construction::SubjectPp {
            let rows = vec![
                row(d(rng), "D", 2, "MOD"),
                row(Self::pick(rng, &self.pp_nouns).to_owned(), "N", 6, "ARG"),
                row("with".to_owned(), "P", 2, "MOD"),
                row(d(rng), "D", 5, "MOD"),
                row(self.noun(rng).to_owned(), "N", 3, "ARG"),
                row(Self::pick(rng, &self.verbs).to_owned(), "V", 0, "ROOT"),
                row(d(rng), "D", 8, "MOD"),
                row(self.noun(rng).to_owned(), "N", 6, "ARG"),
            ];
            return Sentence::from_rows(&rows);
        }
        let mut rows = vec![
            row(d(rng), "D", 2, "MOD"),
            row(self.noun(rng).to_owned(), "N", 3, "ARG"),
            row(Self::pick(rng, &self.verbs).to_owned(), "V", 0, "ROOT"),
            row(d(rng), "D", 5, "MOD"),
            row(self.noun(rng).to_owned(), "N", 3, "ARG"),
        ];
        if kind == Construction::Transitive {
            return Sentence::from_rows(&rows);
        }
        let noun_site = self.pp_nouns.contains(&rows[4].0);
        let (prep, mut site) = match (kind, noun_site) {
            (Construction::CuedPp, true) => ("of", 5),
            (Construction::CuedPp, false) => ("by", 3),
            (_, true) => ("with", 5),
            (_, false) => ("with", 3),
        };
        if self.noise > 0.0 && rng.gen_bool(self.noise) {
            site = 8 - site;
        }
        rows.push(row(prep.to_owned(), "P", site, "MOD"));
        rows.push(row(d(rng), "D", 8, "MOD"));
        rows.push(row(self.noun(rng).to_owned(), "N", 6, "ARG"));
        Sentence::from_rows(&rows)
    }

    pub fn corpus<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<Sentence> {
        (0..n)
            .map(|_| {
                let kind = self.construction(rng);
                self.sentence(rng, kind)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_trees_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=12 {
            for _ in 0..20 {
                let s = random_sentence(&mut rng, n, &["ROOT", "A", "B"]);
                s.validate_tree().unwrap();
            }
        }
    }

    #[test]
    fn grammar_trees_are_valid_and_projective() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for s in Domain::source().corpus(&mut rng, 200) {
            s.validate_tree().unwrap();
            assert!(s.is_projective());
        }
    }
}
