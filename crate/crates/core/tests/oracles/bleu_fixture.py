"""Reference corpus BLEU-4 for a frozen set of 20 token-sequence pairs.

Precisions are kept as exact fractions; a zero precision for n >= 2 becomes
1 / (total + 1). Hypotheses are random edits of random references over a small
code-like alphabet, so most n-gram orders have partial matches.

    python3 bleu_fixture.py > ../fixtures/bleu_20.json
"""
import json
import math
import random
from collections import Counter
from fractions import Fraction

ALPHABET = ["x", "df", "(", ")", ".", ",", "=", "sort", "pd", "np", "len", "1", "key", "'a'", "[", "]"]


def ngrams(seq, n):
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def corpus_bleu(hyps, refs):
    match = [0] * 4
    total = [0] * 4
    hyp_len = sum(len(h) for h in hyps)
    ref_len = sum(len(r) for r in refs)
    for h, r in zip(hyps, refs):
        for n in range(1, 5):
            hc, rc = ngrams(h, n), ngrams(r, n)
            match[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            total[n - 1] += max(len(h) - n + 1, 0)
    if match[0] == 0 or hyp_len == 0:
        return 0.0
    precisions = []
    for n in range(4):
        if match[n] == 0:
            precisions.append(Fraction(1, total[n] + 1))
        else:
            precisions.append(Fraction(match[n], total[n]))
    geo = math.exp(sum(math.log(p) for p in precisions) / 4)
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    return 100 * bp * geo


def mutate(rng, ref):
    out = list(ref)
    for _ in range(rng.randint(0, 4)):
        op = rng.random()
        if op < 0.4 and out:
            out[rng.randrange(len(out))] = rng.choice(ALPHABET)
        elif op < 0.7 and out:
            del out[rng.randrange(len(out))]
        else:
            out.insert(rng.randint(0, len(out)), rng.choice(ALPHABET))
    return out


def main():
    rng = random.Random(4242)
    refs = [[rng.choice(ALPHABET) for _ in range(rng.randint(2, 14))] for _ in range(20)]
    hyps = [mutate(rng, r) for r in refs]
    hyps[7] = ["zzz"]  # a pair with no overlap at all
    print(json.dumps({
        "hypotheses": hyps,
        "references": refs,
        "bleu_all": corpus_bleu(hyps, refs),
        "bleu_first10": corpus_bleu(hyps[:10], refs[:10]),
        "bleu_each": [corpus_bleu([h], [r]) for h, r in zip(hyps, refs)],
    }, indent=1))


if __name__ == "__main__":
    main()
