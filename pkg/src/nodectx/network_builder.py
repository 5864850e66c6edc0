"""Characteristic matrices and labeled-link adjacency tensors.

A characteristic matrix ``C`` counts how often each shared word (column)
appears in each blog (row). Two blogs are linked under word ``k`` when both
use it, and the link weight is the sum of their counts for that word.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from nodectx.errors import IngestionError
from nodectx.sparse_tensor3 import SparseTensor3

__all__ = [
    "CharacteristicMatrix",
    "Stoplist",
    "load_characteristic_matrix",
    "write_characteristic_matrix",
    "load_stoplist",
    "filter_vocabulary",
    "build_adjacency_tensor",
    "planted_partition",
    "generate_synthetic_network",
]


@dataclass(frozen=True, eq=False)
class CharacteristicMatrix:
    """Blogs-by-words count matrix with labels on both axes."""

    counts: np.ndarray
    blog_labels: tuple[str, ...]
    word_labels: tuple[str, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise IngestionError("counts must be a 2-D matrix")
        if counts.size and not np.all(counts == np.round(counts)):
            raise IngestionError("counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise IngestionError("counts must be nonnegative")
        blog_labels = tuple(str(x) for x in self.blog_labels)
        word_labels = tuple(str(x) for x in self.word_labels)
        if len(blog_labels) != counts.shape[0] or len(word_labels) != counts.shape[1]:
            raise IngestionError(
                f"{len(blog_labels)} blog and {len(word_labels)} word labels "
                f"for a {counts.shape[0]}x{counts.shape[1]} matrix"
            )
        for axis, labels in (("blog", blog_labels), ("word", word_labels)):
            dup = _first_duplicate(labels)
            if dup is not None:
                raise IngestionError(f"duplicate {axis} label {dup!r}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "blog_labels", blog_labels)
        object.__setattr__(self, "word_labels", word_labels)

    @classmethod
    def from_counts(cls, counts) -> CharacteristicMatrix:
        """Wrap a bare count matrix with generated labels."""
        counts = np.asarray(counts)
        n, m = counts.shape
        return cls(
            counts,
            tuple(f"blog{i}" for i in range(n)),
            tuple(f"word{k}" for k in range(m)),
        )

    @property
    def n_blogs(self) -> int:
        return self.counts.shape[0]

    @property
    def n_words(self) -> int:
        return self.counts.shape[1]


def _first_duplicate(labels: Iterable[str]):
    seen = set()
    for label in labels:
        if label in seen:
            return label
        seen.add(label)
    return None


@dataclass(frozen=True)
class Stoplist:
    words: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        words = frozenset(w.casefold() for w in self.words)
        if "" in words:
            raise IngestionError("stoplist contains an empty word")
        object.__setattr__(self, "words", words)

    def __contains__(self, word: str) -> bool:
        return word.casefold() in self.words


def load_stoplist(source: str | Path | TextIO) -> Stoplist:
    """One word per line; blank lines and ``#`` comments are ignored."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    words = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.append(line)
    return Stoplist(frozenset(words))


def load_characteristic_matrix(source: str | Path | TextIO) -> CharacteristicMatrix:
    """Parse a CSV whose header holds word labels and first column blog labels.

    The top-left header cell is ignored. Errors name the offending line and
    column.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return _parse_csv(fh, str(source))
    return _parse_csv(source, getattr(source, "name", "<stream>"))


def _parse_csv(fh: TextIO, name: str) -> CharacteristicMatrix:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestionError(f"{name}: empty file") from None
    word_labels = [w.strip() for w in header[1:]]
    if not word_labels:
        raise IngestionError(f"{name}:1: header has no word columns")
    dup = _first_duplicate(word_labels)
    if dup is not None:
        raise IngestionError(f"{name}:1: duplicate word label {dup!r}")

    blog_labels: list[str] = []
    rows: list[list[int]] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise IngestionError(
                f"{name}:{line}: expected {len(header)} fields, got {len(row)}"
            )
        values = []
        for col, cell in enumerate(row[1:]):
            try:
                value = int(cell.strip())
            except ValueError:
                raise IngestionError(
                    f"{name}:{line}: column {word_labels[col]!r}: "
                    f"{cell!r} is not an integer"
                ) from None
            if value < 0:
                raise IngestionError(
                    f"{name}:{line}: column {word_labels[col]!r}: negative count {value}"
                )
            values.append(value)
        label = row[0].strip()
        if label in blog_labels:
            raise IngestionError(f"{name}:{line}: duplicate blog label {label!r}")
        blog_labels.append(label)
        rows.append(values)
    if not rows:
        raise IngestionError(f"{name}: no blogs")
    counts = np.array(rows, dtype=np.int64).reshape(len(rows), len(word_labels))
    return CharacteristicMatrix(counts, tuple(blog_labels), tuple(word_labels))


def write_characteristic_matrix(C: CharacteristicMatrix, dest: str | Path | TextIO) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["blog", *C.word_labels])
    for label, row in zip(C.blog_labels, C.counts.tolist()):
        writer.writerow([label, *row])
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        dest.write(buf.getvalue())


def filter_vocabulary(
    C: CharacteristicMatrix, stop: Stoplist | None = None, min_blogs: int = 2
) -> CharacteristicMatrix:
    """Drop stop words and words used by fewer than ``min_blogs`` blogs.

    A word needs at least two blogs to create any link, hence the default.
    Surviving columns are kept unchanged and in their original order.
    """
    stop = stop or Stoplist()
    used_by = np.count_nonzero(C.counts, axis=0)
    keep = [
        k
        for k, word in enumerate(C.word_labels)
        if word not in stop and used_by[k] >= min_blogs
    ]
    if not keep:
        raise IngestionError("no columns remain after vocabulary filtering")
    return CharacteristicMatrix(
        C.counts[:, keep], C.blog_labels, tuple(C.word_labels[k] for k in keep)
    )


def build_adjacency_tensor(C: CharacteristicMatrix) -> SparseTensor3:
    """Adjacency tensor of the labeled-link network.

    ``X[i, j, k] = C[i, k] + C[j, k]`` whenever ``i != j`` and both blogs use
    word ``k``; every other entry is zero. Each frontal slice is therefore a
    symmetric matrix with an empty diagonal.
    """
    counts = C.counts
    n, m = counts.shape
    subs_parts = []
    vals_parts = []
    for k in range(m):
        users = np.flatnonzero(counts[:, k])
        if users.size < 2:
            continue
        ii, jj = np.meshgrid(users, users, indexing="ij")
        off = ii != jj
        ii, jj = ii[off], jj[off]
        subs_parts.append(np.column_stack([ii, jj, np.full(ii.size, k)]))
        vals_parts.append(counts[ii, k] + counts[jj, k])
    if not subs_parts:
        return SparseTensor3.from_arrays((n, n, m), np.empty((0, 3)), np.empty(0))
    return SparseTensor3.from_arrays(
        (n, n, m), np.concatenate(subs_parts), np.concatenate(vals_parts)
    )


def _block_sizes(total: int, n_clusters: int, skew: float) -> np.ndarray:
    # Zipf-like shares 1/(b+1)^skew, rounded by largest remainder, each >= 1
    shares = 1.0 / np.arange(1, n_clusters + 1) ** skew
    raw = shares / shares.sum() * (total - n_clusters)
    sizes = np.floor(raw).astype(int)
    remainder = total - n_clusters - sizes.sum()
    sizes[np.argsort(-(raw - sizes), kind="stable")[:remainder]] += 1
    return sizes + 1


def planted_partition(
    n_blogs: int,
    n_words: int,
    n_clusters: int,
    seed: int,
    size_skew: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Cluster index of every blog and every word for a synthetic network.

    Cluster 0 is the largest. Block sizes follow ``1/(b+1)**size_skew`` shares
    (``size_skew=0`` gives equal blocks); membership is shuffled with ``seed``.
    """
    _check_synth_params(n_blogs, n_words, n_clusters, 0.0, size_skew)
    rng = np.random.default_rng(seed)
    blog_cluster = np.repeat(np.arange(n_clusters), _block_sizes(n_blogs, n_clusters, size_skew))
    word_cluster = np.repeat(np.arange(n_clusters), _block_sizes(n_words, n_clusters, size_skew))
    return rng.permutation(blog_cluster), rng.permutation(word_cluster)


def _check_synth_params(n_blogs, n_words, n_clusters, noise, size_skew):
    if n_blogs < 1 or n_words < 1 or n_clusters < 1:
        raise ValueError("n_blogs, n_words and n_clusters must be positive")
    if n_clusters > min(n_blogs, n_words):
        raise ValueError(
            f"n_clusters={n_clusters} exceeds min(n_blogs, n_words)={min(n_blogs, n_words)}"
        )
    if not 0.0 <= noise <= 1.0:
        raise ValueError(f"noise must lie in [0, 1], got {noise}")
    if size_skew < 0:
        raise ValueError(f"size_skew must be nonnegative, got {size_skew}")


def generate_synthetic_network(
    n_blogs: int,
    n_words: int,
    n_clusters: int,
    seed: int,
    noise: float = 0.05,
    *,
    size_skew: float = 1.0,
    word_skew: float = 0.5,
    count_range: tuple[int, int] = (1, 10),
    noise_count: int = 1,
) -> CharacteristicMatrix:
    """Planted-partition characteristic matrix.

    Blogs and words are split into ``n_clusters`` blocks (see
    :func:`planted_partition`, which ``size_skew`` is passed to). Every
    in-block cell is a count in ``count_range`` (inclusive): ``low`` plus a
    binomial draw of ``high - low`` trials whose success probability is the
    word's popularity ``rank**-word_skew``, with ranks 1, 2, ... assigned at
    random inside each block. ``word_skew=0`` makes every in-block cell equal
    ``high``. Each off-block cell independently holds ``noise_count`` with
    probability ``noise`` and is zero otherwise.

    Labels carry the planted cluster, e.g. ``blog007-c2``.
    """
    _check_synth_params(n_blogs, n_words, n_clusters, noise, size_skew)
    lo, hi = count_range
    if not 1 <= lo <= hi:
        raise ValueError(f"count_range must satisfy 1 <= low <= high, got {count_range}")
    if word_skew < 0:
        raise ValueError(f"word_skew must be nonnegative, got {word_skew}")
    if noise_count < 1:
        raise ValueError("noise_count must be positive")
    blog_cluster, word_cluster = planted_partition(
        n_blogs, n_words, n_clusters, seed, size_skew
    )
    # separate stream so the partition does not depend on the count draws
    rng = np.random.default_rng([seed, 1])
    popularity = np.empty(n_words)
    for c in range(n_clusters):
        members = np.flatnonzero(word_cluster == c)
        ranks = rng.permutation(members.size) + 1
        popularity[members] = ranks ** -float(word_skew)
    in_block = blog_cluster[:, None] == word_cluster[None, :]
    block_counts = lo + rng.binomial(hi - lo, np.broadcast_to(popularity, (n_blogs, n_words)))
    noisy = rng.random((n_blogs, n_words)) < noise
    counts = np.where(in_block, block_counts, np.where(noisy, noise_count, 0))
    width_b = len(str(n_blogs - 1))
    width_w = len(str(n_words - 1))
    return CharacteristicMatrix(
        counts,
        tuple(f"blog{i:0{width_b}d}-c{c}" for i, c in enumerate(blog_cluster)),
        tuple(f"word{k:0{width_w}d}-c{c}" for k, c in enumerate(word_cluster)),
    )
