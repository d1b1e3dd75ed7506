"""Command-line entry point: ``tgsum {build-vocab,train,summarize,eval,gradcheck}``.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 failed gradient check.
"""
import argparse
import json
import logging
import sys

from . import __version__
from .decoder import evaluate, greedy_decode
from .errors import SummarizerError
from .textkit import (Vocab, build_vocab, decode_ids, default_train_count, encode_ids, load_corpus,
                      split_corpus, tokenize)
from .trainer import (TrainConfig, checkpoint_load, checkpoint_save, encode_corpus, gradient_check,
                      tiny_config, train)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser():
    parser = _Parser(prog="tgsum", description="Attention LSTM headline summarizer")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("build-vocab", help="build a vocabulary file from a JSON-Lines corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-freq", type=_positive, default=1)

    d = TrainConfig()
    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", help="FastText .vec file")
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--hidden", type=_positive, default=d.hidden)
    p.add_argument("--emb-dim", type=_positive, default=d.emb_dim)
    p.add_argument("--attn-dim", type=_positive, help="attention width (default: --hidden)")
    p.add_argument("--head-dim", type=_positive, help="first head layer width (default: --hidden)")
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--batch", type=_positive, default=d.batch_size)
    p.add_argument("--clip", type=float, default=d.clip_norm)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--train-count", type=int, default=0,
                   help="pairs used for training; the rest are held out (default 1700 of 2000, else 85%%)")
    p.add_argument("--trainable-embeddings", action="store_true")
    p.add_argument("--workers", type=_positive, default=1,
                   help="data-parallel threads; results are no longer bit-reproducible above 1")
    p.add_argument("--test-out", help="write the held-out pairs here as JSON-Lines")

    p = sub.add_parser("summarize", help="summarize text from a file or standard input")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--input")
    p.add_argument("--max-len", type=_positive, default=d.max_decode_len)

    p = sub.add_parser("eval", help="score a model on a JSON-Lines corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--max-len", type=_positive, default=d.max_decode_len)

    p = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    p.add_argument("--seed", type=int, default=1)
    return parser


def _emit(obj, out):
    out.write(json.dumps(obj, ensure_ascii=False) + "\n")
    out.flush()


def _load_model(args):
    params, config, _ = checkpoint_load(args.model)
    vocab = Vocab.load(args.vocab)
    if len(vocab) != params.vocab_size:
        raise SummarizerError(f"vocabulary has {len(vocab)} tokens, model expects {params.vocab_size}")
    return params, config, vocab


def cmd_build_vocab(args, out):
    vocab = build_vocab(load_corpus(args.corpus), args.min_freq)
    vocab.save(args.out)
    _emit({"vocab_size": len(vocab), "out": args.out}, out)


def cmd_train(args, out):
    if args.epochs < 0:
        raise UsageError("--epochs must be non-negative")
    try:
        config = TrainConfig(
            hidden=args.hidden, emb_dim=args.emb_dim, attn_dim=args.attn_dim or args.hidden,
            head_dim=args.head_dim or args.hidden, epochs=args.epochs, learning_rate=args.lr,
            batch_size=args.batch, clip_norm=args.clip, seed=args.seed, train_count=max(args.train_count, 0),
            embeddings_trainable=args.trainable_embeddings, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    corpus = load_corpus(args.corpus)
    vocab = Vocab.load(args.vocab)
    if len(corpus) == 0:
        raise SummarizerError(f"{args.corpus}: corpus is empty")
    train_count = config.train_count or default_train_count(len(corpus))
    if train_count > len(corpus):
        raise SummarizerError(f"--train-count {train_count} exceeds corpus size {len(corpus)}")
    train_part, test_part = corpus, None
    if train_count < len(corpus):
        train_part, test_part = split_corpus(corpus, train_count, config.seed)
    _emit({"event": "split", "train": len(train_part), "test": len(test_part or ())}, out)
    if args.test_out and test_part is not None:
        with open(args.test_out, "w", encoding="utf-8") as fh:
            for pair in test_part:
                fh.write(json.dumps({"text": " ".join(pair.source_tokens),
                                     "summary": " ".join(pair.summary_tokens)}, ensure_ascii=False) + "\n")
    params, reports = train(train_part, config, vec_path=args.embeddings, vocab=vocab,
                            on_epoch=lambda r: _emit({"event": "epoch", **r.to_dict()}, out))
    final = reports[-1].loss_per_token if reports else None
    checkpoint_save(params, config, args.out, epoch=len(reports), final_loss=final)
    _emit({"event": "saved", "out": args.out, "epochs": len(reports), "final_loss_per_token": final}, out)


def cmd_summarize(args, out):
    params, config, vocab = _load_model(args)
    if args.input:
        with open(args.input, "rb") as fh:
            raw = fh.read()
    else:
        raw = sys.stdin.buffer.read()
    ids = encode_ids(tokenize(raw), vocab)
    if not ids:
        raise SummarizerError("input text contains no tokens")
    result = greedy_decode(params, ids, args.max_len)
    out.write(decode_ids(result.ids, vocab) + "\n")


def cmd_eval(args, out):
    params, config, vocab = _load_model(args)
    examples = encode_corpus(load_corpus(args.corpus), vocab)
    _emit(evaluate(params, examples, args.max_len).to_dict(), out)


def cmd_gradcheck(args, out):
    report = gradient_check(tiny_config(seed=args.seed))
    for name, err in report.errors.items():
        out.write(f"{name:<20} {err:.3e}  {'ok' if err < report.threshold else 'FAIL'}\n")
    out.write(f"{'PASS' if report.passed else 'FAIL'} (threshold {report.threshold:g})\n")
    return EXIT_OK if report.passed else EXIT_CHECK


COMMANDS = {
    "build-vocab": cmd_build_vocab,
    "train": cmd_train,
    "summarize": cmd_summarize,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
}


def run(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return exc.code or EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out) or EXIT_OK
    except UsageError as exc:
        print(f"tgsum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SummarizerError, OSError, UnicodeError) as exc:
        print(f"tgsum {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())
