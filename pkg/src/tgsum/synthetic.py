"""Toy sequence-transduction corpora for exercising the model end to end."""
from .numkit import Rng
from .textkit import Corpus, DocumentPair


def symbols(n):
    return [f"s{i:02d}" for i in range(n)]


def sequence_task(kind, count, n_symbols=20, min_len=3, max_len=8, seed=0):
    """Random symbol strings paired with themselves (``copy``) or their reversal (``reverse``)."""
    if kind not in ("copy", "reverse"):
        raise ValueError(f"unknown task {kind!r}")
    rng = Rng(seed)
    alphabet = symbols(n_symbols)
    pairs = []
    for _ in range(count):
        length = min_len + rng.randbelow(max_len - min_len + 1)
        src = tuple(alphabet[rng.randbelow(n_symbols)] for _ in range(length))
        pairs.append(DocumentPair(src, src if kind == "copy" else src[::-1]))
    return Corpus(tuple(pairs))
