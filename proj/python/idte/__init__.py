"""Python front end for the idte toolkit.

Records travel as lists of dicts in the corpus JSONL schema; reports come
back as plain dicts.
"""

import json

from . import _idte
from ._idte import (
    ContractError,
    Error,
    IoError,
    NotFoundError,
    ValidationError,
    bce_loss,
    extract_hashtags,
    normalize_obfuscation,
    predict_labels,
    tokenize_words,
)

__all__ = [
    "ContractError", "Error", "IoError", "NotFoundError", "ValidationError",
    "Model", "bce_loss", "crawl", "evaluate", "extract_hashtags", "generate_corpus",
    "hashtag_graph", "load_model", "normalize_obfuscation", "predict_labels",
    "synth_platform", "tokenize_words", "train",
]


def _to_jsonl(records):
    return "".join(json.dumps(r) + "\n" for r in records)


def _from_jsonl(text):
    return [json.loads(line) for line in text.splitlines() if line]


def evaluate(truths, preds):
    """MetricsReport dict for two equally shaped lists of 0/1 vectors."""
    return json.loads(_idte.evaluate_json(truths, preds))


def generate_corpus(**config):
    """Returns (records, stats). Keyword arguments follow CorpusConfig."""
    records, stats = _idte.generate_corpus_json(json.dumps(config))
    return _from_jsonl(records), json.loads(stats)


def synth_platform(**config):
    return json.loads(_idte.synth_platform_json(json.dumps(config)))


def crawl(platform, seeds, tpr=0.95, fpr=0.05, gate_seed=0, **config):
    """Returns (collected records, summary)."""
    records, summary = _idte.crawl_json(json.dumps(platform), list(seeds), tpr, fpr, gate_seed, json.dumps(config))
    return _from_jsonl(records), json.loads(summary)


def hashtag_graph(records, seed=0):
    return json.loads(_idte.hashtag_graph_json(_to_jsonl(records), seed))


class Model:
    def __init__(self, native, history=None, train_index=None, test_index=None):
        self._native = native
        self.history = history
        self.train_index = train_index
        self.test_index = test_index

    @property
    def kind(self):
        return self._native.kind

    @property
    def config(self):
        return json.loads(self._native.config_json)

    @property
    def vocab(self):
        return self._native.vocab

    def predict_probs(self, records):
        return self._native.predict_probs(_to_jsonl(records))

    def evaluate(self, records):
        return json.loads(self._native.evaluate_json(_to_jsonl(records)))

    def save(self, path):
        self._native.save(str(path))


def train(records, kind="mmbt", epochs=50, batch_size=32, lr=2e-5, train_fraction=0.75, seed=0,
          normalize=True, **model_config):
    native, history, train_index, test_index = _idte.train(
        _to_jsonl(records), kind, json.dumps(model_config), epochs, batch_size, lr, train_fraction, seed, normalize)
    return Model(native, json.loads(history), train_index, test_index)


def load_model(path):
    return Model(_idte.load_model(str(path)))
