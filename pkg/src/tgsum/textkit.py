"""Tokenization, vocabulary and corpus handling for article/headline pairs."""
import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyInputError, EncodingError, FormatError, RangeError, SchemaError
from .numkit import Rng

PAD, SOS, EOS, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<sos>", "<eos>", "<unk>")


def _is_punct(ch):
    return unicodedata.category(ch).startswith("P")


def tokenize(text):
    """Split text into words, peeling leading and trailing punctuation off as single-character tokens.

    Input is NFC-normalized first. Case is left alone.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError(f"invalid UTF-8: {exc}") from None
    text = unicodedata.normalize("NFC", text)
    tokens = []
    for chunk in text.split():
        start, end = 0, len(chunk)
        while start < end and _is_punct(chunk[start]):
            start += 1
        while end > start and _is_punct(chunk[end - 1]):
            end -= 1
        tokens.extend(chunk[:start])
        if start < end:
            tokens.append(chunk[start:end])
        tokens.extend(chunk[end:])
    return tokens


class Vocab:
    """Bidirectional token/id map. Ids 0-3 are the reserved tokens."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tuple(tokens[:4]) != RESERVED_TOKENS:
            raise FormatError(f"vocabulary must start with {RESERVED_TOKENS}")
        self.id_to_token = tokens
        self.token_to_id = {}
        for i, tok in enumerate(tokens):
            if tok in self.token_to_id:
                raise FormatError(f"duplicate token {tok!r}", line=i + 1)
            self.token_to_id[tok] = i

    def __len__(self):
        return len(self.id_to_token)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.id_to_token == other.id_to_token

    def __repr__(self):
        return f"Vocab(size={len(self)})"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self.id_to_token:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        for i, tok in enumerate(tokens):
            if not tok or any(ch.isspace() for ch in tok):
                raise FormatError(f"bad vocabulary entry {tok!r}", line=i + 1)
        return cls(tokens)


@dataclass(frozen=True)
class DocumentPair:
    source_tokens: tuple
    summary_tokens: tuple

    def __post_init__(self):
        if not self.source_tokens or not self.summary_tokens:
            raise EmptyInputError("document pair needs non-empty source and summary")


@dataclass(frozen=True)
class Corpus:
    pairs: tuple

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]


def make_corpus(pairs):
    """Build a Corpus from (source text or tokens, summary text or tokens) tuples."""
    out = []
    for src, summ in pairs:
        src = tokenize(src) if isinstance(src, str) else src
        summ = tokenize(summ) if isinstance(summ, str) else summ
        out.append(DocumentPair(tuple(src), tuple(summ)))
    return Corpus(tuple(out))


def build_vocab(corpus, min_freq=1):
    if min_freq < 1:
        raise ValueError("min_freq must be at least 1")
    if len(corpus) == 0:
        raise EmptyInputError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for pair in corpus:
        counts.update(pair.source_tokens)
        counts.update(pair.summary_tokens)
    for tok in RESERVED_TOKENS:
        counts.pop(tok, None)
    kept = sorted((t for t, n in counts.items() if n >= min_freq), key=lambda t: (-counts[t], t))
    return Vocab(RESERVED_TOKENS + tuple(kept))


def encode_ids(tokens, vocab, append_eos=False):
    lookup = vocab.token_to_id
    ids = [UNK if tok in RESERVED_TOKENS else lookup.get(tok, UNK) for tok in tokens]
    if append_eos:
        ids.append(EOS)
    return ids


def decode_ids(ids, vocab):
    size = len(vocab)
    words = []
    for i in ids:
        i = int(i)
        if not 0 <= i < size:
            raise RangeError(f"id {i} outside vocabulary of size {size}")
        if i in (PAD, SOS, EOS):
            continue
        words.append(vocab.id_to_token[i])
    return " ".join(words)


def load_corpus(path):
    """Read a JSON-Lines file of ``{"text": ..., "summary": ...}`` objects."""
    pairs = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise FormatError(f"invalid UTF-8 ({exc.reason})", line=lineno) from None
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"malformed JSON: {exc.msg}", line=lineno) from None
            if not isinstance(obj, dict):
                raise SchemaError("expected a JSON object", line=lineno)
            for key in ("text", "summary"):
                if key not in obj:
                    raise SchemaError(f"missing field {key!r}", line=lineno)
                if not isinstance(obj[key], str):
                    raise SchemaError(f"field {key!r} must be a string", line=lineno)
            src, summ = tokenize(obj["text"]), tokenize(obj["summary"])
            if not src or not summ:
                raise SchemaError("text and summary must contain at least one token", line=lineno)
            pairs.append(DocumentPair(tuple(src), tuple(summ)))
    return Corpus(tuple(pairs))


def write_corpus(pairs, path):
    """Write (text, summary) string pairs as JSON-Lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for text, summary in pairs:
            fh.write(json.dumps({"text": text, "summary": summary}, ensure_ascii=False) + "\n")


def default_train_count(n):
    # 1700 of 2000 in the reference setup, the same 85% share otherwise
    return 1700 if n == 2000 else math.ceil(0.85 * n)


def split_corpus(corpus, train_count, seed):
    n = len(corpus)
    if not 0 < train_count < n:
        raise ValueError(f"train_count must lie in (0, {n}), got {train_count}")
    order = Rng(seed).permutation(n)
    train = Corpus(tuple(corpus.pairs[i] for i in order[:train_count]))
    test = Corpus(tuple(corpus.pairs[i] for i in order[train_count:]))
    return train, test
