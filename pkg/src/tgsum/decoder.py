"""Greedy summary generation and corpus-level evaluation."""
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .attn import project_encoder
from .errors import EmptyInputError, SummarizerError
from .seq2seq import decode_step_train, encode_sequence, sequence_loss
from .textkit import EOS, SOS


@dataclass
class DecodeResult:
    ids: list                 # emitted tokens, EOS excluded
    probs: list               # probability of the chosen token at every step, EOS step included
    stop_reason: str          # "eos" or "max_len"
    attention: list = field(default_factory=list, repr=False)


def greedy_decode(params, source_ids, max_len=20):
    """Feed back the most probable word each step until EOS or ``max_len`` steps.

    Ties go to the lowest id. Nothing is masked.
    """
    if len(source_ids) == 0:
        raise EmptyInputError("cannot summarize an empty source")
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    enc, state = encode_sequence(params, source_ids)
    enc_proj = project_encoder(params.attention, enc)
    ids, probs, attention = [], [], []
    prev = SOS
    for _ in range(max_len):
        dist, state, cache = decode_step_train(params, enc, state, prev, enc_proj)
        best = int(np.argmax(dist))
        probs.append(float(dist[best]))
        attention.append(cache.attention.weights)
        if best == EOS:
            return DecodeResult(ids, probs, "eos", attention)
        ids.append(best)
        prev = best
    return DecodeResult(ids, probs, "max_len", attention)


def unigram_f1(generated, reference):
    """F1 between token multisets; two empty sequences score 1."""
    if not generated and not reference:
        return 1.0
    overlap = sum((Counter(generated) & Counter(reference)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(generated)
    recall = overlap / len(reference)
    return 2 * precision * recall / (precision + recall)


@dataclass
class EvalReport:
    nll_per_token: float
    perplexity: float
    exact_match: float
    unigram_f1: float
    examples: int
    tokens: int

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def evaluate(params, examples, max_len=20):
    """Teacher-forced NLL/perplexity plus greedy exact match and unigram F1.

    ``examples`` are encoded (source ids, target ids ending in EOS) pairs.
    """
    if not examples:
        raise EmptyInputError("evaluation needs at least one example")
    nll, tokens, exact, f1 = 0.0, 0, 0, 0.0
    for index, (src, tgt) in enumerate(examples):
        try:
            loss, _ = sequence_loss(params, src, tgt)
            out = greedy_decode(params, src, max_len)
        except SummarizerError as exc:
            raise SummarizerError(f"example {index}: {exc}") from exc
        nll += loss
        tokens += len(tgt)
        gold = list(tgt[:-1])
        exact += out.ids == gold
        f1 += unigram_f1(out.ids, gold)
    mean = nll / tokens
    n = len(examples)
    return EvalReport(mean, math.exp(mean), exact / n, f1 / n, n, tokens)
