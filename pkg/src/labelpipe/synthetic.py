"""Seeded synthetic corpora with a planted token signal.

Positive samples contain one or two tokens from a dedicated signal
vocabulary; negatives never do.  Labels are therefore an exact function of
known token patterns, which gives desk-scale experiments a ground truth
that any counting oracle can re-derive.
"""

from __future__ import annotations

import random

from .corpus import LabeledSample, TextSample

POSITIVE = "topical"
NEGATIVE = "other"
SCHEMA = [POSITIVE, NEGATIVE]


def make_planted_corpus(n: int, seed: int = 0, positive_rate: float = 0.3,
                        n_signal_tokens: int = 40,
                        background_vocab: int = 2000,
                        doc_len: tuple = (8, 20)) -> list[LabeledSample]:
    """Generate n labeled samples with a planted lexical signal.

    The signal vocabulary is large enough that a small training set sees
    each signal token only once or twice, so student performance grows
    with training-set size.
    """
    rng = random.Random(seed)
    signal = [f"sig{i:04d}" for i in range(n_signal_tokens)]
    background = [f"w{i:05d}" for i in range(background_vocab)]
    samples = []
    for i in range(n):
        is_pos = rng.random() < positive_rate
        length = rng.randint(*doc_len)
        tokens = [rng.choice(background) for _ in range(length)]
        if is_pos:
            k = rng.randint(1, 2)
            for _ in range(k):
                tokens.insert(rng.randrange(len(tokens) + 1),
                              rng.choice(signal))
        samples.append(LabeledSample(
            sample=TextSample(id=f"s{i:05d}", text=" ".join(tokens)),
            gold=POSITIVE if is_pos else NEGATIVE))
    return samples
