use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semiparse::confidence::{
    adjusted_score, bin_center, bin_of, delta_score, rank_by_confidence, rms_calibration_error, ConfidenceMethod,
    ScoredParse,
};
use semiparse::corpus::{read_conll, write_conll, Format, Sentence};
use semiparse::decoder::{decode_corpus, search, DecodeConstraint};
use semiparse::dlm::{count_events, DlmKey, DlmTable, Side, UnitScheme};
use semiparse::eval::{attachment_scores, label_scores, EvalOptions};
use semiparse::features::TemplateSet;
use semiparse::model::WeightModel;
use semiparse::semisup::{run_pipeline, select_agreement, AgreementCriteria, Amount, Method, PipelineSpec};
use semiparse::synth::{random_sentence, Domain};
use semiparse::transition::{Configuration, Labels, System, Transition};

const LABELS: [&str; 3] = ["ROOT", "A", "B"];

fn labels() -> Labels {
    Labels::new(LABELS, "ROOT").unwrap()
}

fn tree(seed: u64, n: usize) -> Sentence {
    random_sentence(&mut ChaCha8Rng::seed_from_u64(seed), n, &LABELS)
}

fn random_model(seed: u64, system: System) -> WeightModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = WeightModel::new(system, labels(), TemplateSet::standard(), 12).unwrap();
    for w in m.weights_mut() {
        *w = rng.gen_range(-1.0..1.0);
    }
    m
}

fn greedy(model: &WeightModel, s: &Sentence) -> Vec<Transition> {
    let mut c = model.system().initial(s);
    while !c.is_terminal() {
        let mut best: Option<(f64, Transition)> = None;
        for t in model.transitions() {
            if !c.permissible(t) {
                continue;
            }
            let score = model.score(&model.extract_features(&c, t, s));
            if best.map_or(true, |(b, _)| score > b) {
                best = Some((score, t));
            }
        }
        c = c.apply(best.unwrap().1).unwrap();
    }
    c.history().to_vec()
}

type Fields = (usize, String, Option<String>, Option<String>, Option<usize>, Option<String>);

fn populated(corpus: &[Sentence]) -> Vec<Vec<Fields>> {
    corpus
        .iter()
        .map(|s| {
            s.tokens
                .iter()
                .map(|t| (t.index, t.form.clone(), t.lemma.clone(), t.pos.clone(), t.head, t.deprel.clone()))
                .collect()
        })
        .collect()
}

/// Reference tree check: one root child, every token reaches the root.
fn is_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().filter(|&&h| h == 0).count() != 1 {
        return false;
    }
    (1..=n).all(|start| {
        let mut cur = start;
        for _ in 0..=n {
            if cur == 0 {
                return true;
            }
            let h = heads[cur - 1];
            if h == cur {
                return false;
            }
            cur = h;
        }
        false
    })
}

fn system() -> impl Strategy<Value = System> {
    prop_oneof![Just(System::ArcStandardSwap), Just(System::ArcEager)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conll_write_read_is_identity(seed in any::<u64>(), sizes in prop::collection::vec(1usize..12, 0..6)) {
        let corpus: Vec<Sentence> = sizes.iter().enumerate().map(|(i, &n)| tree(seed ^ i as u64, n)).collect();
        for format in [Format::Conll06, Format::Conll09] {
            let mut buf = Vec::new();
            write_conll(&mut buf, &corpus, format).unwrap();
            let back = read_conll(&buf[..], format).unwrap();
            prop_assert_eq!(populated(&back), populated(&corpus));
        }
    }

    #[test]
    fn tree_validation_matches_reference(heads in (1usize..=10).prop_flat_map(|n| prop::collection::vec(0..=n, n))) {
        let rows: Vec<(String, String, usize, String)> = heads
            .iter()
            .map(|&h| ("w".to_owned(), "T".to_owned(), h, "A".to_owned()))
            .collect();
        let s = Sentence::from_rows(&rows);
        prop_assert_eq!(s.validate_tree().is_ok(), is_tree(&heads));
    }

    #[test]
    fn random_walks_terminate_without_deadlock(seed in any::<u64>(), n in 1usize..=12, sys in system()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = tree(seed, n).stripped();
        let transitions = sys.transitions(&labels());
        let mut c: Configuration = sys.initial(&s);
        let mut steps = 0;
        while !c.is_terminal() {
            let allowed: Vec<Transition> = transitions.iter().copied().filter(|&t| c.permissible(t)).collect();
            prop_assert!(!allowed.is_empty(), "deadlock after {:?}", c.history());
            let next = c.apply(*allowed.choose(&mut rng).unwrap()).unwrap();
            // an attached token keeps its head
            for d in 1..=n {
                if let Some(arc) = c.head_of(d) {
                    prop_assert_eq!(next.head_of(d), Some(arc));
                }
            }
            c = next;
            steps += 1;
            prop_assert!(steps <= 4 * n * n + 4, "{} steps on {} tokens", steps, n);
        }
    }

    #[test]
    fn model_round_trip_preserves_scores(seed in any::<u64>(), ids in prop::collection::vec(0u32..4096, 1..50)) {
        let mut m = random_model(seed, System::ArcStandardSwap);
        m.set_averaged(Some(m.weights().iter().map(|w| w / 2.0).collect()));
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = WeightModel::read_with(&buf[..], |p| panic!("unexpected DLM {p}")).unwrap();
        let v = semiparse::features::FeatureVector::from_ids(ids);
        prop_assert_eq!(back.score(&v).to_bits(), m.score(&v).to_bits());
        prop_assert_eq!(back.raw_score(&v).to_bits(), m.raw_score(&v).to_bits());
    }

    #[test]
    fn beam_one_is_greedy(seed in any::<u64>(), n in 1usize..=10, sys in system()) {
        let model = random_model(seed, sys);
        let s = tree(seed, n).stripped();
        let found = search(&s, &model, 1, DecodeConstraint::none()).unwrap();
        let expected = greedy(&model, &s);
        prop_assert_eq!(found.config.history(), expected.as_slice());
    }

    #[test]
    fn accumulated_score_matches_recomputation(seed in any::<u64>(), n in 1usize..=10, beam in 1usize..=16) {
        let model = random_model(seed, System::ArcStandardSwap);
        let s = tree(seed, n).stripped();
        let found = search(&s, &model, beam, DecodeConstraint::none()).unwrap();
        let recomputed = model.score(&found.features());
        prop_assert!((found.score - recomputed).abs() <= 1e-9 * recomputed.abs().max(1.0));
    }

    #[test]
    fn constrained_result_avoids_the_edge(seed in any::<u64>(), n in 2usize..=8, beam in 1usize..=8) {
        let model = random_model(seed, System::ArcStandardSwap);
        let s = tree(seed, n).stripped();
        let best = search(&s, &model, beam, DecodeConstraint::none()).unwrap();
        let (h, d, l) = best.config.arcs()[0];
        let alt = search(&s, &model, beam, DecodeConstraint::forbid(h, d, l)).unwrap();
        prop_assert!(!alt.config.has_arc(h, d, l));
    }

    #[test]
    fn corpus_decoding_ignores_worker_count(seed in any::<u64>()) {
        let model = random_model(seed, System::ArcStandardSwap);
        let corpus: Vec<Sentence> = (0..12).map(|i| tree(seed ^ i, 1 + i as usize % 8).stripped()).collect();
        let one = decode_corpus(&corpus, &model, 4, Some(1)).unwrap();
        let many = decode_corpus(&corpus, &model, 4, Some(3)).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn adjusted_score_falls_with_length(raw in -10.0f64..10.0, d in 0.0001f64..0.1, l in 0usize..200) {
        prop_assert!(adjusted_score(raw, l + 1, d) < adjusted_score(raw, l, d));
    }

    #[test]
    fn zero_adjustment_ranks_like_raw(raws in prop::collection::vec(-3.0f64..3.0, 0..40)) {
        let parses: Vec<ScoredParse> = raws
            .iter()
            .enumerate()
            .map(|(i, &r)| ScoredParse::new(tree(i as u64, 1 + i % 9), r).with_adjustment(0.0))
            .collect();
        prop_assert_eq!(
            rank_by_confidence(&parses, ConfidenceMethod::Adjusted(0.0)).unwrap(),
            rank_by_confidence(&parses, ConfidenceMethod::Raw).unwrap()
        );
    }

    #[test]
    fn calibration_error_properties(seed in any::<u64>(), len in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.5..3.5)).collect();
        let exact: Vec<f64> = scores.iter().map(|&s| bin_center(bin_of(s))).collect();
        prop_assert!(rms_calibration_error(&scores, &exact) < 1e-12);
        let acc: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f = rms_calibration_error(&scores, &acc);
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(&mut rng);
        let (s2, a2): (Vec<f64>, Vec<f64>) = idx.iter().map(|&i| (scores[i], acc[i])).unzip();
        prop_assert!((rms_calibration_error(&s2, &a2) - f).abs() < 1e-12);
        // one bin off its center makes the error positive
        let mut off = exact.clone();
        off[0] += 0.25;
        prop_assert!(rms_calibration_error(&scores, &off) > 0.0);
    }

    #[test]
    fn delta_is_non_negative(seed in any::<u64>(), n in 1usize..=6) {
        let model = random_model(seed, System::ArcStandardSwap);
        let s = tree(seed, n).stripped();
        prop_assert!(delta_score(&s, &model, 4).unwrap() >= 0.0);
    }

    #[test]
    fn class_partition_sizes(probs in prop::collection::hash_set(1u32..1_000_000, 1..300)) {
        let m = probs.len();
        let scored = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (DlmKey::new(Side::Left, format!("h{i}"), vec![]), "c".to_owned(), p as f64 / 1e6))
            .collect();
        let t = DlmTable::from_probabilities(1, 3, UnitScheme::Form, scored).unwrap();
        let (ph, pm, pl) = t.class_sizes();
        prop_assert_eq!(ph, (m as f64 * 0.1).ceil() as usize);
        prop_assert_eq!(ph + pm, (m as f64 * 0.3).ceil() as usize);
        prop_assert_eq!(ph + pm + pl, m);
    }

    #[test]
    fn one_event_per_attached_token(seed in any::<u64>(), sizes in prop::collection::vec(1usize..12, 1..8)) {
        let corpus: Vec<Sentence> = sizes.iter().enumerate().map(|(i, &n)| tree(seed ^ i as u64, n)).collect();
        for order in 1..=3 {
            let counts = count_events(&corpus, order, UnitScheme::Form).unwrap();
            prop_assert_eq!(counts.values().sum::<usize>(), sizes.iter().sum::<usize>());
        }
    }

    #[test]
    fn evaluation_bounds(seed in any::<u64>(), sizes in prop::collection::vec(1usize..10, 1..20)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gold: Vec<Sentence> = sizes.iter().enumerate().map(|(i, &n)| tree(seed ^ i as u64, n)).collect();
        let pred: Vec<Sentence> = gold
            .iter()
            .map(|g| {
                let mut p = g.clone();
                for t in &mut p.tokens {
                    if rng.gen_bool(0.3) {
                        t.head = Some(rng.gen_range(0..=g.len()));
                    }
                    if rng.gen_bool(0.3) {
                        t.deprel = Some(LABELS[rng.gen_range(0..3)].to_owned());
                    }
                }
                p
            })
            .collect();
        let r = attachment_scores(&gold, &pred, &EvalOptions::including_punctuation()).unwrap();
        prop_assert!(r.correct_labeled <= r.correct_heads && r.correct_heads <= r.total);
        prop_assert!(r.las() <= r.uas());
        let (scores, _) = label_scores(&gold, &pred).unwrap();
        for s in scores {
            prop_assert!(s.correct <= s.predicted.min(s.gold));
        }
    }

    #[test]
    fn agreement_selection_properties(
        seed in any::<u64>(),
        count in 1usize..40,
        min_length in 0usize..10,
        cap in 0usize..40,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Sentence> = (0..count).map(|i| tree(seed ^ i as u64, rng.gen_range(1..10))).collect();
        let b: Vec<Sentence> = a
            .iter()
            .map(|s| {
                let mut o = s.clone();
                if rng.gen_bool(0.5) {
                    o.tokens[0].deprel = Some("other".into());
                }
                o
            })
            .collect();
        let run = |x: &[Sentence], y: &[Sentence], c: AgreementCriteria| select_agreement(x, y, &c).unwrap().0;
        let forms = |v: Vec<Sentence>| v.iter().map(|s| s.forms().map(str::to_owned).collect::<Vec<_>>()).collect::<Vec<_>>();
        let crit = AgreementCriteria { min_length: Some(min_length), max_selected: Some(cap) };
        prop_assert_eq!(forms(run(&a, &b, crit)), forms(run(&b, &a, crit)));

        let longer = AgreementCriteria { min_length: Some(min_length + 1), ..crit };
        let base = forms(run(&a, &b, AgreementCriteria { max_selected: None, ..crit }));
        let raised = forms(run(&a, &b, AgreementCriteria { max_selected: None, ..longer }));
        prop_assert!(raised.iter().all(|s| base.contains(s)));

        let small = forms(run(&a, &b, crit));
        let large = forms(run(&a, &b, AgreementCriteria { max_selected: Some(cap + 1), ..crit }));
        prop_assert!(small.iter().all(|s| large.contains(s)));
    }
}

/// Best score at every beam size `b` in 1, 2, 4, 8 is at least the score at
/// the previous size.
#[test]
fn best_score_grows_with_beam() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut violations = Vec::new();
    for case in 0..300 {
        let model = random_model(rng.gen(), System::ArcStandardSwap);
        let s = tree(rng.gen(), rng.gen_range(1..=10)).stripped();
        let scores: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&b| search(&s, &model, b, DecodeConstraint::none()).unwrap().score)
            .collect();
        if scores.windows(2).any(|w| w[1] < w[0] - 1e-9) {
            violations.push((case, scores));
        }
    }
    assert!(violations.is_empty(), "{} of 300 instances: {:?}", violations.len(), &violations[..violations.len().min(3)]);
}

#[test]
fn constrained_score_never_exceeds_unconstrained() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let (mut violations, mut checked) = (0, 0);
    for _ in 0..300 {
        let model = random_model(rng.gen(), System::ArcStandardSwap);
        let s = tree(rng.gen(), rng.gen_range(2..=8)).stripped();
        let best = search(&s, &model, 8, DecodeConstraint::none()).unwrap();
        for (h, d, l) in best.config.arcs() {
            let alt = search(&s, &model, 8, DecodeConstraint::forbid(h, d, l)).unwrap();
            checked += 1;
            if alt.score > best.score + 1e-9 {
                violations += 1;
            }
        }
    }
    assert!(violations == 0, "{violations} of {checked} constrained decodes score above the unconstrained best");
}

#[test]
fn pipelines_are_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, corpus: &[Sentence]| {
        let p = dir.path().join(name);
        semiparse::corpus::write_conll_file(&p, corpus, Format::Conll06).unwrap();
        p
    };
    let train = write("train.conll", &Domain::source().corpus(&mut rng, 30));
    let unlabelled = write("unlabelled.conll", &Domain::target().corpus(&mut rng, 60));
    for method in [Method::SelfTraining, Method::RandomSelection, Method::TriTraining] {
        let outputs: Vec<_> = (0..2)
            .map(|run| {
                let out = dir.path().join(format!("{method:?}-{run}"));
                let mut spec = PipelineSpec::new(method, &train, &unlabelled, &out);
                spec.beam = 4;
                spec.iterations = 3;
                spec.seed = 5;
                spec.amount = Amount::Fraction(0.5);
                spec.exclude_evaluation_learner = (method == Method::TriTraining).then_some(true);
                run_pipeline(&spec).unwrap();
                ["model.bin", "selection.txt", "selected.conll"].map(|f| std::fs::read(out.join(f)).unwrap())
            })
            .collect();
        assert!(outputs[0] == outputs[1], "{method:?} outputs differ between identical runs");
    }
}
