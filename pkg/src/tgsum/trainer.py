"""Training loop, checkpoint format and the gradient-check harness."""
import dataclasses
import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import reference
from .attn import AttentionParams
from .cells import AffineParams, LstmParams
from .embed import DEFAULT_DIM, EmbeddingTable, build_embedding_matrix, parse_vec_file
from .errors import FormatError, ShapeError, SummarizerError, TrainingError
from .numkit import Rng, clip_global_norm, global_norm
from .seq2seq import ModelGrads, ModelParams, init_model, model_backward, sequence_loss
from .textkit import EOS, RESERVED_TOKENS, Vocab, build_vocab, encode_ids

log = logging.getLogger(__name__)

MAGIC = b"TGSM"
VERSION = 1


@dataclass
class TrainConfig:
    hidden: int = 128
    emb_dim: int = DEFAULT_DIM
    attn_dim: int = 128
    head_dim: int = 128
    epochs: int = 40
    learning_rate: float = 0.05
    batch_size: int = 16
    clip_norm: float = 5.0
    seed: int = 1
    min_freq: int = 1
    max_decode_len: int = 20
    embeddings_trainable: bool = False
    train_count: int = 0          # 0 = choose from corpus size, see textkit.default_train_count
    init_range: float = 0.05
    emb_init_range: float = 0.05
    workers: int = 1

    def __post_init__(self):
        for name in ("hidden", "emb_dim", "attn_dim", "head_dim", "batch_size", "min_freq",
                     "max_decode_len", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.epochs < 0 or self.train_count < 0:
            raise ValueError("epochs and train_count must be non-negative")
        if not (self.learning_rate > 0 and self.clip_norm > 0 and self.init_range > 0
                and self.emb_init_range > 0):
            raise ValueError("learning_rate, clip_norm and init ranges must be positive")

    def to_lines(self):
        return [f"{f.name}={getattr(self, f.name)!r}" for f in dataclasses.fields(self)]

    @classmethod
    def from_items(cls, items):
        kinds = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {}
        for key, raw in items.items():
            kind = kinds.get(key)
            if kind is None:
                continue
            if kind in (bool, "bool"):
                kw[key] = raw == "True"
            elif kind in (int, "int"):
                kw[key] = int(raw)
            else:
                kw[key] = float(raw)
        return cls(**kw)


@dataclass
class EpochReport:
    epoch: int
    loss_per_token: float
    wall_time: float
    examples: int
    tokens: int
    updates: int

    def to_dict(self):
        return dataclasses.asdict(self)


def encode_corpus(corpus, vocab):
    """(source ids, target ids ending in EOS) for every pair."""
    return [(encode_ids(p.source_tokens, vocab), encode_ids(p.summary_tokens, vocab, append_eos=True))
            for p in corpus]


def sgd_update(params, grads, lr):
    """In place: theta -= lr * grad for every trainable tensor."""
    if grads.embeddings is not None and not params.embeddings.trainable:
        raise ShapeError("gradient carries embeddings but the table is frozen")
    if grads.embeddings is None and params.embeddings.trainable:
        raise ShapeError("trainable embeddings need an embedding gradient")
    p_arrays = _param_arrays(params)
    g_arrays = grads.arrays()
    for p, g in zip(p_arrays, g_arrays):
        if p.shape != g.shape:
            raise ShapeError(f"parameter {p.shape} vs gradient {g.shape}")
        p -= lr * g


def _param_arrays(params):
    out = [params.embeddings.matrix] if params.embeddings.trainable else []
    for lstm in (params.encoder, params.decoder):
        out += [lstm.W, lstm.b]
    a = params.attention
    return out + [a.W_1, a.W_2, a.b_attn, a.v, params.head1.W, params.head1.b,
                  params.head2.W, params.head2.b]


def _example_grads(params, example, index):
    src, tgt = example
    try:
        loss, trace = sequence_loss(params, src, tgt)
        grads = model_backward(params, trace, src, tgt)
    except SummarizerError as exc:
        raise TrainingError(f"example {index}: {exc}") from exc
    return loss, grads


def train_epoch(params, examples, config, rng, epoch=0, on_update=None, pool=None):
    """One pass over ``examples`` (encoded pairs) in a seeded random order.

    Each batch sums per-sequence gradients, divides by the batch's target token
    count, clips to ``config.clip_norm`` and takes one SGD step. ``on_update``
    is called after clipping with ``(update_index, grads)``.
    """
    if not examples:
        raise TrainingError("cannot train on an empty corpus")
    start = time.perf_counter()
    order = rng.permutation(len(examples))
    total_loss, total_tokens, updates = 0.0, 0, 0
    for b0 in range(0, len(order), config.batch_size):
        batch = order[b0:b0 + config.batch_size]
        tokens = sum(len(examples[i][1]) for i in batch)
        if pool is None:
            grads = ModelGrads.zeros_like(params)
            for i in batch:
                src, tgt = examples[i]
                try:
                    loss, trace = sequence_loss(params, src, tgt)
                    model_backward(params, trace, src, tgt, grads)
                except SummarizerError as exc:
                    raise TrainingError(f"example {i}: {exc}") from exc
                total_loss += loss
        else:
            results = list(pool.map(lambda i: _example_grads(params, examples[i], i), batch))
            grads = results[0][1]
            total_loss += results[0][0]
            for loss, g in results[1:]:
                total_loss += loss
                for acc, part in zip(grads.arrays(), g.arrays()):
                    acc += part
        grads.scale(1.0 / tokens)
        clip_global_norm(grads.arrays(), config.clip_norm)
        if on_update is not None:
            on_update(updates, grads)
        sgd_update(params, grads, config.learning_rate)
        total_tokens += tokens
        updates += 1
    return EpochReport(epoch, total_loss / total_tokens, time.perf_counter() - start,
                       len(examples), total_tokens, updates)


def build_model(vocab, config, vec_path=None, rng=None):
    """Embedding table plus freshly initialized weights; consumes ``rng`` in a fixed order."""
    rng = Rng(config.seed) if rng is None else rng
    vectors = {}
    if vec_path is not None:
        wanted = set(vocab.id_to_token[len(RESERVED_TOKENS):])
        vectors, dim = parse_vec_file(vec_path, wanted)
        if dim != config.emb_dim:
            raise ShapeError(f"vector file has dimension {dim}, config expects {config.emb_dim}")
    table = build_embedding_matrix(vocab, vectors, config.emb_dim, rng.spawn(), config.emb_init_range,
                                   trainable=config.embeddings_trainable)
    return init_model(vocab, table, config, rng.spawn())


def train(corpus, config, vec_path=None, vocab=None, on_epoch=None, on_update=None):
    """Build vocabulary, embeddings and model, then run ``config.epochs`` epochs over ``corpus``.

    Returns ``(params, reports)``. Failures are re-raised naming the stage.
    """
    stage = "vocab"
    try:
        if vocab is None:
            vocab = build_vocab(corpus, config.min_freq)
        stage = "embeddings"
        rng = Rng(config.seed)
        params = build_model(vocab, config, vec_path, rng)
        stage = "encode"
        examples = encode_corpus(corpus, vocab)
        stage = "train"
        reports = []
        pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
        try:
            for epoch in range(1, config.epochs + 1):
                report = train_epoch(params, examples, config, rng, epoch, on_update, pool)
                log.info("epoch %d loss/token %.4f", epoch, report.loss_per_token)
                reports.append(report)
                if on_epoch is not None:
                    on_epoch(report)
        finally:
            if pool is not None:
                pool.shutdown()
    except (SummarizerError, OSError, ValueError) as exc:
        raise TrainingError(f"{stage}: {exc}") from exc
    return params, reports


# --- checkpoints -----------------------------------------------------------

def _tensor_names(params):
    return [name for name, _ in params.named_tensors()]


def checkpoint_bytes(params, config, epoch=None, final_loss=None):
    V, E, H, A, Hh = params.dims
    echo = config.to_lines() + [f"coverage={params.embeddings.coverage!r}"]
    if epoch is not None:
        echo.append(f"epoch={epoch}")
    if final_loss is not None:
        echo.append(f"final_train_loss={final_loss!r}")
    echo_bytes = "\n".join(echo).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<5Q", V, E, H, A, Hh),
             struct.pack("<I", len(echo_bytes)), echo_bytes]
    for name, arr in params.named_tensors():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def checkpoint_save(params, config, path, epoch=None, final_loss=None):
    data = checkpoint_bytes(params, config, epoch, final_loss)
    with open(path, "wb") as fh:
        fh.write(data)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated while reading {what}", offset=self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_checkpoint(data):
    """Parse checkpoint bytes into ``(dims, echo dict, {name: array})`` without building a model."""
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic, not a checkpoint", offset=0)
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    dims = r.unpack("<5Q", "dimensions")
    (n_echo,) = r.unpack("<I", "config length")
    at = r.pos
    try:
        echo_text = r.take(n_echo, "config").decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError("config block is not UTF-8", offset=at) from None
    echo = {}
    for line in echo_text.split("\n") if echo_text else []:
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"bad config line {line!r}", offset=at)
        echo[key] = value
    tensors = {}
    while r.pos < len(data):
        at = r.pos
        (n_name,) = r.unpack("<I", "tensor name length")
        try:
            name = r.take(n_name, "tensor name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("tensor name is not UTF-8", offset=at) from None
        if name in tensors:
            raise FormatError(f"duplicate tensor {name!r}", offset=at)
        (ndim,) = r.unpack("<I", "tensor rank")
        if ndim > 4:
            raise FormatError(f"tensor {name!r} has implausible rank {ndim}", offset=at)
        shape = r.unpack(f"<{ndim}Q", "tensor shape")
        count = int(np.prod(shape)) if ndim else 1
        payload = r.take(8 * count, f"tensor {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
    return dims, echo, tensors


def _expected_shapes(dims):
    V, E, H, A, Hh = dims
    shapes = {"embeddings": (V, E)}
    for prefix in ("encoder", "decoder"):
        for g in "fico":
            shapes[f"{prefix}.W_{g}"] = (H, H + E)
            shapes[f"{prefix}.b_{g}"] = (H,)
    shapes.update({"attention.W_1": (A, H), "attention.W_2": (A, H), "attention.b_attn": (A,),
                   "attention.v": (A,), "head1.W": (Hh, 2 * H), "head1.b": (Hh,),
                   "head2.W": (V, Hh), "head2.b": (V,)})
    return shapes


def checkpoint_load(path):
    """Returns ``(params, config, meta)``; meta holds ``epoch`` and ``final_train_loss`` when saved."""
    with open(path, "rb") as fh:
        data = fh.read()
    dims, echo, tensors = read_checkpoint(data)
    expected = _expected_shapes(dims)
    if set(tensors) != set(expected):
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        raise FormatError(f"tensor set mismatch, missing {missing}, unexpected {extra}", offset=len(data))
    for name, shape in expected.items():
        if tensors[name].shape != shape:
            raise FormatError(f"tensor {name!r} has shape {tensors[name].shape}, header implies {shape}",
                              offset=len(data))
    try:
        config = TrainConfig.from_items(echo)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad config echo: {exc}", offset=28) from None

    def lstm(prefix):
        W = np.concatenate([tensors[f"{prefix}.W_{g}"] for g in "fico"])
        b = np.concatenate([tensors[f"{prefix}.b_{g}"] for g in "fico"])
        return LstmParams(W, b)

    params = ModelParams(
        embeddings=EmbeddingTable(np.ascontiguousarray(tensors["embeddings"]),
                                  trainable=config.embeddings_trainable,
                                  coverage=float(echo.get("coverage", 0.0))),
        encoder=lstm("encoder"),
        decoder=lstm("decoder"),
        attention=AttentionParams(tensors["attention.W_1"], tensors["attention.W_2"],
                                  tensors["attention.b_attn"], tensors["attention.v"]),
        head1=AffineParams(tensors["head1.W"], tensors["head1.b"]),
        head2=AffineParams(tensors["head2.W"], tensors["head2.b"]),
    )
    meta = {}
    if "epoch" in echo:
        meta["epoch"] = int(echo["epoch"])
    if "final_train_loss" in echo:
        meta["final_train_loss"] = float(echo["final_train_loss"])
    return params, config, meta


# --- gradient check ------------------------------------------------------

@dataclass
class GradCheckReport:
    errors: dict = field(default_factory=dict)
    threshold: float = 1e-6

    @property
    def passed(self):
        return all(err < self.threshold for err in self.errors.values())

    def failures(self):
        return [name for name, err in self.errors.items() if not err < self.threshold]


def tiny_config(**overrides):
    kw = dict(hidden=3, emb_dim=4, attn_dim=3, head_dim=3, embeddings_trainable=True, init_range=1.0,
              emb_init_range=1.0)
    kw.update(overrides)
    return TrainConfig(**kw)


def gradient_check(config=None, rng=None, vocab_size=7, source_len=3, target_len=3,
                   eps=1e-5, threshold=1e-6, backward=model_backward):
    """Compare ``backward`` with central differences on every entry of a random tiny model.

    All tensors, biases included, are drawn uniform in [-init_range, init_range]
    so no gradient entry is structurally trivial. The numerical side
    differentiates the extended-precision reference loss. Relative error per
    entry is |a - n| / max(|a| + |n|, 1e-8); the report keeps the maximum per
    tensor.
    """
    config = tiny_config() if config is None else config
    rng = Rng(config.seed) if rng is None else rng
    extra = tuple(f"w{i}" for i in range(vocab_size - len(RESERVED_TOKENS)))
    vocab = Vocab(RESERVED_TOKENS + extra)
    params = build_model(vocab, config, rng=rng)
    for _, arr in params.named_tensors():
        arr[...] = config.init_range * (2.0 * rng.random(arr.size).reshape(arr.shape) - 1.0)
    source = [4 + rng.randbelow(vocab_size - 4) for _ in range(source_len)]
    target = [4 + rng.randbelow(vocab_size - 4) for _ in range(target_len - 1)] + [EOS]

    _, trace = sequence_loss(params, source, target)
    grads = backward(params, trace, source, target)
    ref = reference.tensors(params)
    step = reference.DTYPE(eps)
    report = GradCheckReport(threshold=threshold)
    for name, analytic in grads.named_tensors():
        arr = ref[name]
        numeric = np.empty(arr.shape)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + step
            up = reference.model_loss(ref, source, target)
            arr[idx] = orig - step
            down = reference.model_loss(ref, source, target)
            arr[idx] = orig
            numeric[idx] = float((up - down) / (2 * step))
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
        report.errors[name] = float(rel.max())
    return report


def post_clip_norm(grads):
    return global_norm(grads.arrays())
