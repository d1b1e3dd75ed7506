"""LSTM encoder-decoder summarizer with additive attention, trained by hand-written backpropagation."""
__version__ = "0.1.0"

from ._accel import NUMBA_ENABLED, backend_name
from .decoder import DecodeResult, EvalReport, evaluate, greedy_decode, unigram_f1
from .seq2seq import ModelGrads, ModelParams, init_model, model_backward, sequence_loss
from .textkit import Corpus, DocumentPair, Vocab, build_vocab, load_corpus, tokenize
from .trainer import TrainConfig, checkpoint_load, checkpoint_save, gradient_check, train

__all__ = [
    "NUMBA_ENABLED", "backend_name",
    "DecodeResult", "EvalReport", "evaluate", "greedy_decode", "unigram_f1",
    "ModelGrads", "ModelParams", "init_model", "model_backward", "sequence_loss",
    "Corpus", "DocumentPair", "Vocab", "build_vocab", "load_corpus", "tokenize",
    "TrainConfig", "checkpoint_load", "checkpoint_save", "gradient_check", "train",
]
