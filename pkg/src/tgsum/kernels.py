"""Hot loops of the model: LSTM steps, additive attention, the output head, and
whole-sequence forward/backward passes built from them.

Every function here is written in the numpy subset numba compiles; ``jit``
compiles it or leaves it as plain numpy depending on TGSUM_DISABLE_NUMBA.
Outputs go into caller-provided arrays and gradients are accumulated with
``+=`` so that callers control allocation and summation order.

LSTM weights are stacked as one (4H, H+E) matrix acting on [h_prev; x], with
row blocks in gate order forget, input, candidate, output.
"""
import numpy as np

from ._accel import jit


@jit
def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@jit
def softmax_into(x, out):
    e = np.exp(x - np.max(x))
    out[:] = e / np.sum(e)


@jit
def log_softmax_at(x, k):
    m = np.max(x)
    return x[k] - m - np.log(np.sum(np.exp(x - m)))


@jit
def lstm_step(W, b, x, h_prev, c_prev, z, gates, c, h):
    """Forward one step. Writes z=[h_prev; x], gates (4, H), new cell c and hidden h."""
    H = h_prev.shape[0]
    z[:H] = h_prev
    z[H:] = x
    a = np.dot(W, z) + b
    gates[0] = sigmoid(a[:H])
    gates[1] = sigmoid(a[H:2 * H])
    gates[2] = np.tanh(a[2 * H:3 * H])
    gates[3] = sigmoid(a[3 * H:])
    c[:] = gates[0] * c_prev + gates[1] * gates[2]
    h[:] = gates[3] * np.tanh(c)


@jit
def lstm_step_backward(W, z, gates, c_prev, c, dh, dc, dW, db, dz, dc_prev):
    """Backward one step given upstream dh (w.r.t. h) and dc (w.r.t. c).

    Accumulates into dW, db; overwrites dz (gradient w.r.t. [h_prev; x]) and dc_prev.
    """
    H = c.shape[0]
    f = gates[0]
    i = gates[1]
    g = gates[2]
    o = gates[3]
    tc = np.tanh(c)
    dct = dc + dh * o * (1.0 - tc * tc)
    da = np.empty(4 * H)
    da[:H] = dct * c_prev * f * (1.0 - f)
    da[H:2 * H] = dct * g * i * (1.0 - i)
    da[2 * H:3 * H] = dct * i * (1.0 - g * g)
    da[3 * H:] = dh * tc * o * (1.0 - o)
    dW += np.outer(da, z)
    db += da
    dz[:] = np.dot(da, W)
    dc_prev[:] = dct * f


@jit
def attention_forward(W2, b, v, enc, enc_proj, h, tanhs, weights, context):
    """Additive attention for one decoder state.

    enc_proj holds enc @ W1.T, precomputed once per source. Writes the tanh
    activations (T, A), the softmax weights (T,) and the context (H_enc,);
    returns the raw scores.
    """
    q = np.dot(W2, h) + b
    tanhs[:, :] = np.tanh(enc_proj + q)
    scores = np.dot(tanhs, v)
    softmax_into(scores, weights)
    context[:] = np.dot(weights, enc)
    return scores


@jit
def attention_backward(W1, W2, v, enc, h, tanhs, weights, dcontext, dweights_extra,
                       dW1, dW2, db, dv, denc, dh):
    """Accumulate gradients of one attention call into dW1, dW2, db, dv, denc and dh."""
    dw = np.dot(enc, dcontext) + dweights_extra
    denc += np.outer(weights, dcontext)
    ds = weights * (dw - np.dot(weights, dw))
    dv += np.dot(ds, tanhs)
    dpre = np.outer(ds, v) * (1.0 - tanhs * tanhs)
    dW1 += np.dot(np.ascontiguousarray(dpre.T), enc)
    s = np.sum(dpre, axis=0)
    dW2 += np.outer(s, h)
    db += s
    denc += np.dot(dpre, W1)
    dh += np.dot(s, W2)


@jit
def head_forward(W1, b1, W2, b2, h, context, hcat, q, logits, probs):
    H = h.shape[0]
    hcat[:H] = h
    hcat[H:] = context
    q[:] = np.tanh(np.dot(W1, hcat) + b1)
    logits[:] = np.dot(W2, q) + b2
    softmax_into(logits, probs)


@jit
def head_backward(W1, W2, hcat, q, dlogits, dW1, db1, dW2, db2, dhcat):
    dW2 += np.outer(dlogits, q)
    db2 += dlogits
    dqa = np.dot(dlogits, W2) * (1.0 - q * q)
    dW1 += np.outer(dqa, hcat)
    db1 += dqa
    dhcat[:] = np.dot(dqa, W1)


@jit
def encoder_forward(emb, W, b, src, Z, G, C, Hs):
    """Run the encoder over ``src`` from a zero state.

    C and Hs have T+1 rows: row 0 is the initial state, row t+1 the state after token t.
    """
    C[0] = 0.0
    Hs[0] = 0.0
    for t in range(src.shape[0]):
        lstm_step(W, b, emb[src[t]], Hs[t], C[t], Z[t], G[t], C[t + 1], Hs[t + 1])


@jit
def encoder_backward(W, src, Z, G, C, denc, dh_final, dc_final, dW, db, demb, train_emb):
    H = C.shape[1]
    dh = dh_final.copy()
    dc = dc_final.copy()
    dz = np.empty(Z.shape[1])
    dc_prev = np.empty(H)
    for t in range(src.shape[0] - 1, -1, -1):
        dh += denc[t]
        lstm_step_backward(W, Z[t], G[t], C[t], C[t + 1], dh, dc, dW, db, dz, dc_prev)
        if train_emb:
            demb[src[t]] += dz[H:]
        dh[:] = dz[:H]
        dc[:] = dc_prev


@jit
def decoder_forward(emb, W, b, aW2, ab, av, h1W, h1b, h2W, h2b, enc, enc_proj,
                    h0, c0, inputs, targets,
                    Z, G, C, Hs, TANH, SCORES, ATT, CTX, HCAT, Q, LOGITS, P, losses):
    """Teacher-forced decoder pass. C and Hs carry the initial state in row 0."""
    C[0] = c0
    Hs[0] = h0
    for u in range(inputs.shape[0]):
        lstm_step(W, b, emb[inputs[u]], Hs[u], C[u], Z[u], G[u], C[u + 1], Hs[u + 1])
        SCORES[u] = attention_forward(aW2, ab, av, enc, enc_proj, Hs[u + 1], TANH[u], ATT[u], CTX[u])
        head_forward(h1W, h1b, h2W, h2b, Hs[u + 1], CTX[u], HCAT[u], Q[u], LOGITS[u], P[u])
        losses[u] = -log_softmax_at(LOGITS[u], targets[u])


@jit
def decoder_backward(W, aW1, aW2, av, h1W, h2W, enc, inputs, targets,
                     Z, G, C, Hs, TANH, ATT, HCAT, Q, P,
                     dW, db, daW1, daW2, dab, dav, dh1W, dh1b, dh2W, dh2b,
                     demb, train_emb, denc, dh0, dc0):
    """Reverse pass over the decoder; leaves the gradient w.r.t. the initial state in dh0, dc0."""
    H = C.shape[1]
    dh_next = np.zeros(H)
    dc = np.zeros(H)
    dhcat = np.empty(HCAT.shape[1])
    dz = np.empty(Z.shape[1])
    dc_prev = np.empty(H)
    zero_w = np.zeros(enc.shape[0])
    for u in range(inputs.shape[0] - 1, -1, -1):
        dlogits = P[u].copy()
        dlogits[targets[u]] -= 1.0
        head_backward(h1W, h2W, HCAT[u], Q[u], dlogits, dh1W, dh1b, dh2W, dh2b, dhcat)
        dh = dh_next + dhcat[:H]
        attention_backward(aW1, aW2, av, enc, Hs[u + 1], TANH[u], ATT[u], dhcat[H:], zero_w,
                           daW1, daW2, dab, dav, denc, dh)
        lstm_step_backward(W, Z[u], G[u], C[u], C[u + 1], dh, dc, dW, db, dz, dc_prev)
        if train_emb:
            demb[inputs[u]] += dz[H:]
        dh_next[:] = dz[:H]
        dc[:] = dc_prev
    dh0[:] = dh_next
    dc0[:] = dc
