"""Smoke test for the pysemiparse extension: train, parse, score, select."""

import os
import random
import tempfile

import pysemiparse as sp


def toy_corpus(n, seed):
    rng = random.Random(seed)
    verbs = ["sees", "likes", "takes"]
    nouns = ["dog", "cat", "man", "box"]
    out = []
    for _ in range(n):
        rows = [
            ("the", "D", 2, "MOD"),
            (rng.choice(nouns), "N", 3, "ARG"),
            (rng.choice(verbs), "V", 0, "ROOT"),
            ("a", "D", 5, "MOD"),
            (rng.choice(nouns), "N", 3, "ARG"),
        ]
        out.append(sp.Sentence(rows))
    return out


def main():
    train = toy_corpus(40, 1)
    test = toy_corpus(10, 2)
    for s in train:
        s.validate()

    model = sp.Model.train(train, beam=4, iterations=5)
    assert model.system == "arc-standard-swap"
    assert "ROOT" in model.labels

    parsed = model.parse(test, beam=4)
    assert len(parsed) == len(test)
    trees = [t for t, _ in parsed]
    uas, las = sp.evaluate(test, trees)
    assert 0.0 <= las <= uas <= 1.0
    print(f"UAS {uas:.3f} LAS {las:.3f}")

    scored = model.confidence(test, beam=4, d=0.015, delta=True)
    assert all(item["delta"] >= 0.0 for item in scored)
    assert abs(scored[0]["adjusted"] - sp.adjusted_score(scored[0]["raw"], 5, 0.015)) < 1e-12
    order = sp.rank([item["adjusted"] for item in scored])
    assert sorted(order) == list(range(len(test)))

    agreed = sp.select_agreement(trees, trees, min_length=5)
    assert len(agreed) == len(trees)

    p, swapped = sp.significance(test, trees, trees, iterations=100, seed=0)
    assert 0.0 <= p <= 1.0

    with tempfile.TemporaryDirectory() as d:
        corpus = os.path.join(d, "auto.conll")
        sp.write_conll(corpus, trees)
        back = sp.read_conll(corpus)
        assert [(s.forms, s.heads, s.labels) for s in back] == [(s.forms, s.heads, s.labels) for s in trees]
        table = sp.extract_dlm(trees + train, order=1, min_count=3)
        dlm_path = os.path.join(d, "auto.dlm")
        table.save(dlm_path)
        assert len(sp.DlmTable.load(dlm_path)) == len(table)

        with_dlm = sp.Model.train(train, beam=4, iterations=3, dlms=[dlm_path])
        model_path = os.path.join(d, "model.bin")
        with_dlm.save(model_path)
        again = sp.Model.load(model_path)
        assert again.parse(test, beam=4) == with_dlm.parse(test, beam=4)

    try:
        sp.read_conll("/nonexistent/file.conll")
    except OSError:
        pass
    else:
        raise AssertionError("missing file did not raise")
    print("smoke test passed")


if __name__ == "__main__":
    main()
