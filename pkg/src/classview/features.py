"""Feature functions: term-frequency and tf-idf text features, plus random
cosine features that linearize shift-invariant kernels.

Text features follow a two-phase lifecycle: corpus statistics are collected
once (and can be maintained incrementally, one document at a time), then
individual documents are turned into vectors against a statistics snapshot.
Vocabulary indices are assigned on first sight, so the feature dimension is
the vocabulary high-water mark and models treat unseen higher indices as zero.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .vectors import DenseVector, DimensionMismatch, SparseVector

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs. Fixed so vectors are reproducible."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    """Token index plus document-frequency statistics.

    Treat instances as snapshots: the incremental update returns a new object,
    so concurrent readers can keep using the one they were handed.
    """

    index: dict[str, int] = field(default_factory=dict)
    document_count: int = 0
    doc_frequency: dict[int, int] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return max(1, len(self.index))

    def copy(self) -> "Vocabulary":
        return Vocabulary(dict(self.index), self.document_count, dict(self.doc_frequency))

    def _intern(self, token: str) -> int:
        idx = self.index.get(token)
        if idx is None:
            idx = len(self.index)
            self.index[token] = idx
        return idx


def _as_tokens(doc: Union[str, Sequence[str]]) -> list[str]:
    return tokenize(doc) if isinstance(doc, str) else list(doc)


def tf_features(vocab: Vocabulary, doc: Union[str, Sequence[str]], grow: bool = True) -> SparseVector:
    """Term-frequency vector, l1-normalized (component = count / total tokens).

    With grow=True unseen tokens extend the vocabulary (ingestion path); with
    grow=False they are skipped (read path). An empty document yields the empty
    vector, which is not an error.
    """
    tokens = _as_tokens(doc)
    counts: dict[int, int] = {}
    for tok in tokens:
        if grow:
            idx = vocab._intern(tok)
        else:
            idx = vocab.index.get(tok)
            if idx is None:
                continue
        counts[idx] = counts.get(idx, 0) + 1
    total = len(tokens)
    if total == 0:
        return SparseVector([], vocab.dimension)
    return SparseVector(sorted((i, c / total) for i, c in counts.items()), vocab.dimension)


def tfidf_stats(corpus: Iterable[Union[str, Sequence[str]]]) -> Vocabulary:
    """Collect document count and per-token document frequencies over a corpus."""
    vocab = Vocabulary()
    for doc in corpus:
        vocab = tfidf_stats_inc(vocab, doc, _copy=False)
    return vocab


def tfidf_stats_inc(
    vocab: Vocabulary, doc: Union[str, Sequence[str]], _copy: bool = True
) -> Vocabulary:
    """Fold one document into the statistics; returns an updated snapshot."""
    out = vocab.copy() if _copy else vocab
    out.document_count += 1
    for tok in set(_as_tokens(doc)):
        idx = out._intern(tok)
        out.doc_frequency[idx] = out.doc_frequency.get(idx, 0) + 1
    return out


def tfidf_features(vocab: Vocabulary, doc: Union[str, Sequence[str]]) -> SparseVector:
    """tf * idf vector with the smoothed idf ln((1 + N) / (1 + df)).

    Tokens absent from the vocabulary are omitted. A ubiquitous token (df = N)
    gets idf 0 and drops out of the sparse representation.
    """
    if vocab.document_count < 1:
        raise ValueError("tfidf_features requires statistics over at least one document")
    tf = tf_features(vocab, doc, grow=False)
    n = vocab.document_count
    entries = []
    for idx, tfv in tf.entries:
        idf = math.log((1 + n) / (1 + vocab.doc_frequency.get(idx, 0)))
        if idf != 0.0:
            entries.append((idx, tfv * idf))
    return SparseVector(entries, vocab.dimension)


@dataclass(frozen=True)
class RandomFeatureMap:
    """Random directions for cosine features approximating a shift-invariant kernel.

    Each direction has length d+1; inputs are padded with a constant 1, so the
    final direction component acts as a per-feature phase. Sampling modes:

    * "spectral" (default): directions drawn from the kernel's spectral density,
      N(0, 1/bandwidth^2) for the Gaussian kernel and Cauchy(1/bandwidth) for
      the Laplacian, which is what makes z(x).z(y) approximate K(x, y).
    * "sphere": directions uniform on the unit sphere. Kept as a literal option;
      it carries no kernel-approximation guarantee.
    """

    directions: np.ndarray  # shape (count, data_dim + 1)
    kernel: str
    bandwidth: float

    @property
    def count(self) -> int:
        return self.directions.shape[0]

    @property
    def data_dim(self) -> int:
        return self.directions.shape[1] - 1

    @classmethod
    def sample(
        cls,
        data_dim: int,
        count: int,
        kernel: str = "gaussian",
        bandwidth: float = 0.5,
        seed: int = 0,
        mode: str = "spectral",
    ) -> "RandomFeatureMap":
        if count < 1:
            raise ValueError("need at least one random direction")
        if kernel not in ("gaussian", "laplacian"):
            raise ValueError(f"unsupported kernel {kernel!r}")
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        rng = np.random.default_rng(seed)
        shape = (count, data_dim + 1)
        if mode == "spectral":
            if kernel == "gaussian":
                dirs = rng.normal(0.0, 1.0 / bandwidth, size=shape)
            else:
                dirs = rng.standard_cauchy(size=shape) / bandwidth
        elif mode == "sphere":
            dirs = rng.normal(size=shape)
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        else:
            raise ValueError(f"unknown sampling mode {mode!r}")
        return cls(directions=np.asarray(dirs, dtype=np.float64), kernel=kernel, bandwidth=bandwidth)


def rff_project(fmap: RandomFeatureMap, x: Union[SparseVector, DenseVector]) -> DenseVector:
    """Project x (in the unit l2 ball) to sqrt(2/D) * cos(r_i . [x; 1]).

    The 1/sqrt(D) factor makes dot(z(x), z(y)) itself, not its average, an
    unbiased Monte-Carlo estimate of the kernel value.
    """
    xd = x.to_dense() if isinstance(x, SparseVector) else np.asarray(x, dtype=np.float64)
    if xd.shape[0] > fmap.data_dim:
        raise DimensionMismatch(f"input dim {xd.shape[0]} exceeds map dim {fmap.data_dim}")
    if float(np.sqrt(np.sum(xd * xd))) > 1.0 + 1e-9:
        raise ValueError("input must lie in the unit l2 ball")
    padded = np.zeros(fmap.data_dim + 1, dtype=np.float64)
    padded[: xd.shape[0]] = xd
    padded[-1] = 1.0
    d = fmap.count
    return np.sqrt(2.0 / d) * np.cos(fmap.directions @ padded)


def gaussian_kernel(x: np.ndarray, y: np.ndarray, bandwidth: float) -> float:
    diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return float(np.exp(-float(diff @ diff) / (2.0 * bandwidth * bandwidth)))


def laplacian_kernel(x: np.ndarray, y: np.ndarray, bandwidth: float) -> float:
    diff = np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))
    return float(np.exp(-float(diff.sum()) / bandwidth))
