#!/usr/bin/env python3
"""Hand-derived EM/F1 for the evaluator fixture. Normalization: lower-case,
drop ASCII punctuation, drop the words a/an/the, collapse whitespace. F1 is
the harmonic mean of token-bag precision and recall (0 with no overlap); each
question takes the max over its gold answers.

Reads tests/oracles/eval_cases.tsv (prediction <TAB> gold1|gold2...) and
writes data/golden/eval_expected.tsv with per-case EM and F1 plus a final
"MEAN" row, all as percentages.
"""
import collections
import os
import re
import string

HERE = os.path.dirname(__file__)


def normalize(s):
    s = s.lower()
    s = "".join(ch for ch in s if ch not in set(string.punctuation))
    s = re.sub(r"\b(a|an|the)\b", " ", s)
    return " ".join(s.split())


def f1(pred, gold):
    p, g = normalize(pred).split(), normalize(gold).split()
    common = collections.Counter(p) & collections.Counter(g)
    same = sum(common.values())
    if same == 0:
        return 0.0
    prec, rec = same / len(p), same / len(g)
    return 2 * prec * rec / (prec + rec)


def main():
    rows = []
    with open(os.path.join(HERE, "eval_cases.tsv")) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            pred, golds = line.split("\t")
            golds = golds.split("|")
            em = max(float(normalize(pred) == normalize(g)) for g in golds)
            rows.append((pred, "|".join(golds), 100 * em, 100 * max(f1(pred, g) for g in golds)))
    out = os.path.join(HERE, "..", "..", "data", "golden", "eval_expected.tsv")
    with open(out, "w") as f:
        for pred, golds, em, score in rows:
            f.write(f"{pred}\t{golds}\t{em:.6f}\t{score:.6f}\n")
        n = len(rows)
        f.write(f"MEAN\t\t{sum(r[2] for r in rows) / n:.6f}\t{sum(r[3] for r in rows) / n:.6f}\n")


if __name__ == "__main__":
    main()
