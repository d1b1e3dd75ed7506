"""Pretrained word vectors in the FastText ``.vec`` text format."""
import os
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .numkit import seeded_uniform_init

DEFAULT_DIM = 300


@dataclass
class EmbeddingTable:
    matrix: np.ndarray
    trainable: bool = False
    coverage: float = 0.0

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")


def _lines(source):
    if not isinstance(source, (str, bytes, os.PathLike)):
        yield from source
        return
    with open(source, encoding="utf-8", newline="\n") as fh:
        yield from fh


def parse_vec_file(source, wanted):
    """Stream ``source`` (a path or an iterable of text lines) and keep rows whose token is in ``wanted``.

    Returns ``(vectors, dim)``. Every row is fully validated, field count and
    numbers alike, so a corrupt file fails even where the damage sits in a row
    nobody asked for. Memory stays proportional to ``wanted``, not to the file.
    The first row for a repeated token wins.
    """
    it = iter(_lines(source))
    header = next(it, None)
    if header is None:
        raise FormatError("empty file, expected '<count> <dim>' header", line=1)
    parts = header.split()
    try:
        if len(parts) != 2:
            raise ValueError
        _count, dim = int(parts[0]), int(parts[1])
        if _count < 0 or dim < 1:
            raise ValueError
    except ValueError:
        raise FormatError(f"bad header {header.strip()!r}, expected '<count> <dim>'", line=1) from None

    vectors = {}
    for lineno, line in enumerate(it, start=2):
        fields = line.rstrip("\r\n ").split(" ")
        if len(fields) == 1 and not fields[0]:
            continue
        if len(fields) != dim + 1:
            raise FormatError(f"expected {dim} values, found {len(fields) - 1}", line=lineno)
        try:
            row = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise FormatError(f"unparseable number ({exc})", line=lineno) from None
        token = fields[0]
        if token in wanted and token not in vectors:
            vectors[token] = np.array(row, dtype=np.float64)
    return vectors, dim


def build_embedding_matrix(vocab, vectors, dim, rng, half_range=0.05, trainable=False):
    """Vocab-aligned table: file rows where available, seeded uniform noise elsewhere."""
    if vectors:
        found_dim = len(next(iter(vectors.values())))
        if found_dim != dim:
            raise ValueError(f"vectors have dimension {found_dim}, requested {dim}")
    matrix = seeded_uniform_init(rng, len(vocab), dim, half_range)
    found = 0
    for i, tok in enumerate(vocab.id_to_token):
        if i < 4:
            continue
        vec = vectors.get(tok)
        if vec is not None:
            matrix[i] = vec
            found += 1
    return EmbeddingTable(matrix, trainable=trainable, coverage=found / len(vocab))
