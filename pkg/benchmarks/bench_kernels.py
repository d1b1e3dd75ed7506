"""Compare the numba-compiled kernels with the plain numpy fallback.

    python benchmarks/bench_kernels.py [--epochs 2] [--pairs 500] [--hidden 32]

Each backend runs in its own interpreter because the choice is fixed at import
time by ``TGSUM_DISABLE_NUMBA``. JIT compilation happens in an untimed warm-up.
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from tgsum import backend_name
from tgsum.seq2seq import loss_and_grads
from tgsum.synthetic import sequence_task, symbols
from tgsum.textkit import RESERVED_TOKENS, Vocab
from tgsum.trainer import TrainConfig, build_model, encode_corpus, train_epoch
from tgsum.numkit import Rng

epochs, pairs, hidden = map(int, sys.argv[1:4])
vocab = Vocab(RESERVED_TOKENS + tuple(symbols(20)))
config = TrainConfig(hidden=hidden, emb_dim=16, attn_dim=hidden, head_dim=hidden, learning_rate=0.5,
                     embeddings_trainable=True)
examples = encode_corpus(sequence_task("copy", pairs, seed=1), vocab)
params = build_model(vocab, config)
loss_and_grads(params, *examples[0])          # compile
rng = Rng(config.seed)
tokens, start = 0, time.perf_counter()
for epoch in range(epochs):
    tokens += train_epoch(params, examples, config, rng, epoch).tokens
elapsed = time.perf_counter() - start
print(json.dumps({"backend": backend_name(), "seconds": elapsed, "tokens_per_s": tokens / elapsed}))
"""


def run(disable, args):
    env = dict(os.environ)
    env.pop("TGSUM_DISABLE_NUMBA", None)
    if disable:
        env["TGSUM_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(args.epochs), str(args.pairs), str(args.hidden)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--epochs", type=int, default=2)
    parser.add_argument("--pairs", type=int, default=500)
    parser.add_argument("--hidden", type=int, default=32)
    args = parser.parse_args()
    results = [run(False, args), run(True, args)]
    for r in results:
        print(f"{r['backend']:<6} {r['seconds']:8.2f}s  {r['tokens_per_s']:10.0f} target tokens/s")
    if results[0]["backend"] == "numba":
        print(f"speed-up {results[0]['tokens_per_s'] / results[1]['tokens_per_s']:.1f}x")


if __name__ == "__main__":
    main()
