"""Additive attention over encoder outputs.

score_i = v . tanh(W_1 e_i + W_2 h + b), weights = softmax(scores),
context = sum_i weights_i e_i.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyInputError, ShapeError
from .numkit import seeded_uniform_init


@dataclass
class AttentionParams:
    W_1: np.ndarray   # (A, H_enc)
    W_2: np.ndarray   # (A, H_dec)
    b_attn: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        A = self.W_1.shape[0]
        if self.W_2.shape[0] != A or self.b_attn.shape != (A,) or self.v.shape != (A,):
            raise ShapeError(
                f"inconsistent attention shapes W_1{self.W_1.shape} W_2{self.W_2.shape} "
                f"b{self.b_attn.shape} v{self.v.shape}")

    @classmethod
    def zeros(cls, attn, enc_hidden, dec_hidden):
        return cls(np.zeros((attn, enc_hidden)), np.zeros((attn, dec_hidden)),
                   np.zeros(attn), np.zeros(attn))

    @classmethod
    def init(cls, rng, attn, enc_hidden, dec_hidden, half_range=0.05):
        W_1 = seeded_uniform_init(rng, attn, enc_hidden, half_range)
        W_2 = seeded_uniform_init(rng, attn, dec_hidden, half_range)
        v = seeded_uniform_init(rng, 1, attn, half_range)[0]
        return cls(W_1, W_2, np.zeros(attn), v)

    @property
    def size(self):
        return self.W_1.shape[0]

    def named_tensors(self):
        yield "W_1", self.W_1
        yield "W_2", self.W_2
        yield "b_attn", self.b_attn
        yield "v", self.v


@dataclass
class AttentionOutput:
    scores: np.ndarray
    weights: np.ndarray
    context: np.ndarray
    tanhs: np.ndarray    # (T, A) hidden activations, kept for backward


def _check(params, enc_outputs, dec_hidden):
    enc_outputs = np.ascontiguousarray(enc_outputs, dtype=np.float64)
    dec_hidden = np.ascontiguousarray(dec_hidden, dtype=np.float64)
    if enc_outputs.ndim != 2 or enc_outputs.shape[0] == 0:
        raise EmptyInputError(f"attention needs at least one encoder row, got shape {enc_outputs.shape}")
    if enc_outputs.shape[1] != params.W_1.shape[1] or dec_hidden.shape != (params.W_2.shape[1],):
        raise ShapeError(
            f"encoder outputs {enc_outputs.shape} / decoder state {dec_hidden.shape} do not fit "
            f"W_1{params.W_1.shape}, W_2{params.W_2.shape}")
    return enc_outputs, dec_hidden


def project_encoder(params, enc_outputs):
    """W_1 e_i for every row; depends only on the source so decoders compute it once."""
    return np.ascontiguousarray(enc_outputs @ params.W_1.T)


def attention_forward(params, enc_outputs, dec_hidden, enc_proj=None):
    enc_outputs, dec_hidden = _check(params, enc_outputs, dec_hidden)
    if enc_proj is None:
        enc_proj = project_encoder(params, enc_outputs)
    T, A = enc_outputs.shape[0], params.size
    tanhs = np.empty((T, A))
    weights = np.empty(T)
    context = np.empty(enc_outputs.shape[1])
    scores = kernels.attention_forward(params.W_2, params.b_attn, params.v, enc_outputs, enc_proj,
                                       dec_hidden, tanhs, weights, context)
    return AttentionOutput(np.asarray(scores), weights, context, tanhs)


def attention_backward(params, enc_outputs, dec_hidden, out, d_context, d_weights_extra=None, grads=None):
    """Gradients of one attention call.

    Returns ``(grads, d_enc_outputs, d_dec_hidden)``; ``grads`` accumulates when supplied.
    ``d_weights_extra`` is an optional upstream gradient on the weights themselves.
    """
    enc_outputs, dec_hidden = _check(params, enc_outputs, dec_hidden)
    T, H_enc = enc_outputs.shape
    d_context = np.ascontiguousarray(d_context, dtype=np.float64)
    if d_context.shape != (H_enc,):
        raise ShapeError(f"d_context shape {d_context.shape} != ({H_enc},)")
    if d_weights_extra is None:
        d_weights_extra = np.zeros(T)
    d_weights_extra = np.ascontiguousarray(d_weights_extra, dtype=np.float64)
    if grads is None:
        grads = AttentionParams.zeros(params.size, H_enc, dec_hidden.shape[0])
    d_enc = np.zeros((T, H_enc))
    d_h = np.zeros(dec_hidden.shape[0])
    kernels.attention_backward(params.W_1, params.W_2, params.v, enc_outputs, dec_hidden,
                               out.tanhs, out.weights, d_context, d_weights_extra,
                               grads.W_1, grads.W_2, grads.b_attn, grads.v, d_enc, d_h)
    return grads, d_enc, d_h
