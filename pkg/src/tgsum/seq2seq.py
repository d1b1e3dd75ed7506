"""The full encoder-decoder: embeddings, two LSTMs, attention and a two-layer vocabulary head."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .attn import AttentionOutput, AttentionParams, attention_forward, project_encoder
from .cells import AffineParams, LstmParams, LstmState, LstmStepCache
from .embed import EmbeddingTable
from .errors import ContractError, EmptyInputError, RangeError, ShapeError
from .textkit import EOS, SOS


@dataclass
class ModelParams:
    embeddings: EmbeddingTable
    encoder: LstmParams
    decoder: LstmParams
    attention: AttentionParams
    head1: AffineParams
    head2: AffineParams

    def __post_init__(self):
        V, E = self.embeddings.matrix.shape
        H = self.encoder.hidden
        if self.encoder.input_size != E or self.decoder.input_size != E:
            raise ShapeError("LSTM input size must equal the embedding dimension")
        if self.decoder.hidden != H:
            raise ShapeError("encoder and decoder hidden sizes differ")
        if self.attention.W_1.shape[1] != H or self.attention.W_2.shape[1] != H:
            raise ShapeError("attention projections do not match the hidden size")
        if self.head1.W.shape[1] != 2 * H:
            raise ShapeError("first head layer must read [h; context]")
        if self.head2.W.shape != (V, self.head1.W.shape[0]):
            raise ShapeError("second head layer must map the head width onto the vocabulary")

    @property
    def dims(self):
        """(V, E, H, A, H_head)"""
        V, E = self.embeddings.matrix.shape
        return V, E, self.encoder.hidden, self.attention.size, self.head1.W.shape[0]

    @property
    def vocab_size(self):
        return self.embeddings.matrix.shape[0]

    def named_tensors(self, trainable_only=False):
        if not trainable_only or self.embeddings.trainable:
            yield "embeddings", self.embeddings.matrix
        for prefix in ("encoder", "decoder", "attention", "head1", "head2"):
            for name, arr in getattr(self, prefix).named_tensors():
                yield f"{prefix}.{name}", arr


@dataclass
class ModelGrads:
    """Gradient accumulator shaped like the trainable part of ModelParams."""

    embeddings: object  # ndarray, or None when embeddings are frozen
    encoder: LstmParams
    decoder: LstmParams
    attention: AttentionParams
    head1: AffineParams
    head2: AffineParams

    @classmethod
    def zeros_like(cls, params):
        V, E, H, A, Hh = params.dims
        return cls(
            np.zeros((V, E)) if params.embeddings.trainable else None,
            LstmParams.zeros(H, E),
            LstmParams.zeros(H, E),
            AttentionParams.zeros(A, H, H),
            AffineParams.zeros(Hh, 2 * H),
            AffineParams.zeros(V, Hh),
        )

    def named_tensors(self):
        if self.embeddings is not None:
            yield "embeddings", self.embeddings
        for prefix in ("encoder", "decoder", "attention", "head1", "head2"):
            for name, arr in getattr(self, prefix).named_tensors():
                yield f"{prefix}.{name}", arr

    def arrays(self):
        """The underlying storage, each buffer once (LSTM gate views share one matrix)."""
        out = [] if self.embeddings is None else [self.embeddings]
        for lstm in (self.encoder, self.decoder):
            out += [lstm.W, lstm.b]
        a = self.attention
        out += [a.W_1, a.W_2, a.b_attn, a.v, self.head1.W, self.head1.b, self.head2.W, self.head2.b]
        return out

    def scale(self, factor):
        for g in self.arrays():
            g *= factor


@dataclass
class ForwardTrace:
    """Everything the backward pass needs from one teacher-forced forward pass.

    Encoder and decoder state arrays carry the initial state in row 0.
    """

    source: np.ndarray
    inputs: np.ndarray
    targets: np.ndarray
    enc_z: np.ndarray
    enc_gates: np.ndarray
    enc_c: np.ndarray
    enc_h: np.ndarray
    enc_proj: np.ndarray
    dec_z: np.ndarray
    dec_gates: np.ndarray
    dec_c: np.ndarray
    dec_h: np.ndarray
    attn_tanh: np.ndarray
    attn_scores: np.ndarray
    attn_weights: np.ndarray
    context: np.ndarray
    head_in: np.ndarray
    head_hidden: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    losses: np.ndarray

    @property
    def enc_outputs(self):
        return self.enc_h[1:]

    @property
    def total_loss(self):
        return float(np.sum(self.losses))


def init_model(vocab, embeddings, config, rng):
    """Fresh parameters around an existing embedding table.

    Weights are uniform in [-config.init_range, config.init_range], biases zero.
    Draw order is fixed: encoder, decoder, attention, head1, head2.
    """
    V, E = embeddings.matrix.shape
    if V != len(vocab):
        raise ShapeError(f"embedding table has {V} rows, vocabulary has {len(vocab)} tokens")
    H, A, Hh = config.hidden, config.attn_dim, config.head_dim
    if min(H, A, Hh, E) < 1:
        raise ShapeError("model dimensions must be positive")
    r = config.init_range
    return ModelParams(
        embeddings=embeddings,
        encoder=LstmParams.init(rng, H, E, r),
        decoder=LstmParams.init(rng, H, E, r),
        attention=AttentionParams.init(rng, A, H, H, r),
        head1=AffineParams.init(rng, Hh, 2 * H, r),
        head2=AffineParams.init(rng, V, Hh, r),
    )


def _ids(ids, V, what):
    arr = np.asarray(ids, dtype=np.int64)
    if arr.ndim != 1:
        raise ShapeError(f"{what} must be a flat id sequence")
    if arr.size and (arr.min() < 0 or arr.max() >= V):
        raise RangeError(f"{what} contains ids outside [0, {V})")
    return np.ascontiguousarray(arr)


def _encode(params, src):
    H, E = params.encoder.hidden, params.encoder.input_size
    T = src.shape[0]
    z, g = np.empty((T, H + E)), np.empty((T, 4, H))
    c, h = np.empty((T + 1, H)), np.empty((T + 1, H))
    kernels.encoder_forward(params.embeddings.matrix, params.encoder.W, params.encoder.b, src, z, g, c, h)
    return z, g, c, h


def encode_sequence(params, source_ids):
    """Run the encoder left to right from a zero state.

    Returns the (T, H) matrix of hidden states and the final LstmState.
    """
    src = _ids(source_ids, params.vocab_size, "source")
    if src.size == 0:
        raise EmptyInputError("source sequence is empty")
    _, _, c, h = _encode(params, src)
    return h[1:], LstmState(h[-1].copy(), c[-1].copy())


@dataclass
class DecodeStepCache:
    lstm: LstmStepCache
    attention: AttentionOutput
    head_in: np.ndarray
    head_hidden: np.ndarray
    logits: np.ndarray


def decode_step_train(params, enc_outputs, prev_state, prev_id, enc_proj=None):
    """One decoder step: embed the previous word, advance the LSTM, attend, and score the vocabulary.

    Returns ``(distribution, new_state, cache)``.
    """
    V = params.vocab_size
    if not 0 <= int(prev_id) < V:
        raise RangeError(f"previous id {prev_id} outside [0, {V})")
    H, E = params.decoder.hidden, params.decoder.input_size
    h_prev = np.ascontiguousarray(prev_state.h, dtype=np.float64)
    c_prev = np.ascontiguousarray(prev_state.c, dtype=np.float64)
    if h_prev.shape != (H,) or c_prev.shape != (H,):
        raise ShapeError(f"decoder state must have length {H}")
    z, gates, c, h = np.empty(H + E), np.empty((4, H)), np.empty(H), np.empty(H)
    kernels.lstm_step(params.decoder.W, params.decoder.b, params.embeddings.matrix[int(prev_id)],
                      h_prev, c_prev, z, gates, c, h)
    att = attention_forward(params.attention, enc_outputs, h, enc_proj)
    head_in, head_hidden = np.empty(2 * H), np.empty(params.head1.W.shape[0])
    logits, probs = np.empty(V), np.empty(V)
    kernels.head_forward(params.head1.W, params.head1.b, params.head2.W, params.head2.b,
                         h, att.context, head_in, head_hidden, logits, probs)
    cache = DecodeStepCache(LstmStepCache(z, gates, c_prev.copy(), c), att, head_in, head_hidden, logits)
    return probs, LstmState(h, c), cache


def sequence_loss(params, source_ids, target_ids):
    """Summed teacher-forced negative log likelihood of ``target_ids`` given ``source_ids``.

    The target must end in EOS. The decoder starts from the encoder's final state
    and reads SOS first, then the gold words. Returns ``(total, trace)``.
    """
    V, E, H, A, Hh = params.dims
    src = _ids(source_ids, V, "source")
    tgt = _ids(target_ids, V, "target")
    if src.size == 0:
        raise EmptyInputError("source sequence is empty")
    if tgt.size == 0 or tgt[-1] != EOS:
        raise ContractError("target sequence must end with EOS")
    T, U = src.size, tgt.size
    inputs = np.empty(U, dtype=np.int64)
    inputs[0] = SOS
    inputs[1:] = tgt[:-1]

    enc_z, enc_g, enc_c, enc_h = _encode(params, src)
    enc = enc_h[1:]
    enc_proj = project_encoder(params.attention, enc)
    tr = ForwardTrace(
        source=src, inputs=inputs, targets=tgt,
        enc_z=enc_z, enc_gates=enc_g, enc_c=enc_c, enc_h=enc_h, enc_proj=enc_proj,
        dec_z=np.empty((U, H + E)), dec_gates=np.empty((U, 4, H)),
        dec_c=np.empty((U + 1, H)), dec_h=np.empty((U + 1, H)),
        attn_tanh=np.empty((U, T, A)), attn_scores=np.empty((U, T)), attn_weights=np.empty((U, T)),
        context=np.empty((U, H)), head_in=np.empty((U, 2 * H)), head_hidden=np.empty((U, Hh)),
        logits=np.empty((U, V)), probs=np.empty((U, V)), losses=np.empty(U),
    )
    a, h1, h2 = params.attention, params.head1, params.head2
    kernels.decoder_forward(
        params.embeddings.matrix, params.decoder.W, params.decoder.b,
        a.W_2, a.b_attn, a.v, h1.W, h1.b, h2.W, h2.b, enc, enc_proj,
        enc_h[-1], enc_c[-1], inputs, tgt,
        tr.dec_z, tr.dec_gates, tr.dec_c, tr.dec_h, tr.attn_tanh, tr.attn_scores, tr.attn_weights,
        tr.context, tr.head_in, tr.head_hidden, tr.logits, tr.probs, tr.losses)
    return tr.total_loss, tr


def model_backward(params, trace, source_ids, target_ids, grads=None):
    """Exact gradient of the summed loss of ``trace`` w.r.t. every trainable tensor.

    Accumulates into ``grads`` when given, so batches can be summed in place.
    """
    src = np.asarray(source_ids, dtype=np.int64)
    tgt = np.asarray(target_ids, dtype=np.int64)
    if not (np.array_equal(src, trace.source) and np.array_equal(tgt, trace.targets)):
        raise ContractError("trace was produced for a different (source, target) pair")
    if grads is None:
        grads = ModelGrads.zeros_like(params)
    V, E, H, _, _ = params.dims
    train_emb = grads.embeddings is not None
    demb = grads.embeddings if train_emb else np.zeros((1, E))
    enc = trace.enc_outputs
    denc = np.zeros_like(enc)
    dh0, dc0 = np.empty(H), np.empty(H)
    a, ga = params.attention, grads.attention
    kernels.decoder_backward(
        params.decoder.W, a.W_1, a.W_2, a.v, params.head1.W, params.head2.W, enc,
        trace.inputs, trace.targets,
        trace.dec_z, trace.dec_gates, trace.dec_c, trace.dec_h, trace.attn_tanh, trace.attn_weights,
        trace.head_in, trace.head_hidden, trace.probs,
        grads.decoder.W, grads.decoder.b, ga.W_1, ga.W_2, ga.b_attn, ga.v,
        grads.head1.W, grads.head1.b, grads.head2.W, grads.head2.b,
        demb, train_emb, denc, dh0, dc0)
    kernels.encoder_backward(params.encoder.W, trace.source, trace.enc_z, trace.enc_gates, trace.enc_c,
                             denc, dh0, dc0, grads.encoder.W, grads.encoder.b, demb, train_emb)
    return grads


def loss_and_grads(params, source_ids, target_ids, grads=None):
    loss, trace = sequence_loss(params, source_ids, target_ids)
    return loss, model_backward(params, trace, source_ids, target_ids, grads)
