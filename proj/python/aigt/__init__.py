"""Topic modeling and grounded-theory coding workbench."""
import json

from . import _core
from ._core import Error, default_stopwords, stem, tokenize

__all__ = [
    "Error",
    "Project",
    "build_corpus",
    "coverage",
    "default_stopwords",
    "doc_topic_csv",
    "ingest",
    "run_lda",
    "select_k",
    "stem",
    "tokenize",
    "top_words",
]


def ingest(path):
    return json.loads(_core._ingest(str(path)))


def build_corpus(documents, config=None):
    return json.loads(_core._build_corpus(json.dumps(documents), json.dumps(config)))


def run_lda(corpus, **params):
    return json.loads(_core._run_lda(json.dumps(corpus), json.dumps(params)))


def top_words(model, topic, n=10):
    return _core._top_words(json.dumps(model), topic, n)


def coverage(from_set, to_set, threshold=5):
    return json.loads(_core._coverage(json.dumps(from_set), json.dumps(to_set), threshold))


def select_k(grid):
    return json.loads(_core._select_k(json.dumps(grid)))


def doc_topic_csv(model):
    return _core._doc_topic_csv(json.dumps(model))


class Project:
    """Coding project; mutations go straight to the C++ object."""

    def __init__(self, handle):
        self._p = handle

    @classmethod
    def from_model(cls, model):
        return cls(_core._Project.from_model(json.dumps(model)))

    @classmethod
    def from_topic_set(cls, topic_set):
        return cls(_core._Project.from_topic_set(json.dumps(topic_set)))

    @classmethod
    def load(cls, path):
        return cls(_core._Project.load(str(path)))

    def save(self, path):
        self._p.save(str(path))

    def to_dict(self):
        return json.loads(self._p.to_json())

    def export(self, fmt="json"):
        files = self._p.export(fmt)
        return json.loads(files["tables.json"]) if fmt == "json" else files

    def __eq__(self, other):
        return isinstance(other, Project) and self._p == other._p

    def __getattr__(self, name):
        return getattr(self._p, name)
