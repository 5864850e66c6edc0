"""Query tasks, standard-measure rankings and cosine evaluation.

Four query/result pairings are supported: blogs for a words query (task 1),
words for a blogs query (task 2), blogs for a blogs query (task 3) and words
for a words query (task 4). Each has a "standard" ranking computed from the
characteristic matrix and a "decomposition" ranking computed from the hub
and term factors; the cosine between the two scores how well the
decomposition preserves the ranking.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from nodectx.errors import DimensionError
from nodectx.greedy_parafac import CPModel
from nodectx.network_builder import CharacteristicMatrix

__all__ = [
    "SimilarityMatrices",
    "QueryVector",
    "RankingVector",
    "SimilarityReport",
    "GroupListing",
    "build_similarity_matrices",
    "cosine_similarity",
    "task1_standard",
    "task1_decomp",
    "task2_standard",
    "task2_decomp",
    "task3_standard",
    "task3_decomp",
    "task4_standard",
    "task4_decomp",
    "evaluate_all_tasks",
    "group_listing",
]

Domain = Literal["blogs", "words"]
TASKS = (1, 2, 3, 4)


@dataclass(frozen=True, eq=False)
class SimilarityMatrices:
    blogs: np.ndarray
    words: np.ndarray


@dataclass(frozen=True, eq=False)
class QueryVector:
    domain: Domain
    indicator: np.ndarray

    def __post_init__(self):
        ind = np.asarray(self.indicator, dtype=np.float64).reshape(-1)
        if not np.all((ind == 0) | (ind == 1)):
            raise ValueError("query indicator entries must be 0 or 1")
        if not ind.any():
            raise ValueError("query must select at least one item")
        object.__setattr__(self, "indicator", ind)

    @classmethod
    def ones(cls, domain: Domain, size: int) -> QueryVector:
        return cls(domain, np.ones(size))

    @classmethod
    def of(cls, domain: Domain, size: int, selected: Sequence[int]) -> QueryVector:
        ind = np.zeros(size)
        ind[list(selected)] = 1.0
        return cls(domain, ind)


@dataclass(frozen=True, eq=False)
class RankingVector:
    domain: Domain
    scores: np.ndarray
    provenance: Literal["standard", "decomposition"]

    def __post_init__(self):
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("ranking scores must be finite")

    def top(self, n: int = 1) -> np.ndarray:
        """Indices of the ``n`` best items, ties going to the lower index."""
        return np.argsort(-self.scores, kind="stable")[:n]


def build_similarity_matrices(C: CharacteristicMatrix) -> SimilarityMatrices:
    """Cosine similarity between every pair of blogs (rows) and words (columns).

    An all-zero row or column is similar to nothing, itself included.
    """
    return SimilarityMatrices(_cosine_gram(C.counts), _cosine_gram(C.counts.T))


def _cosine_gram(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    norms = np.linalg.norm(M, axis=1)
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    U = M * scale[:, None]
    G = U @ U.T
    G = 0.5 * (G + G.T)
    nz = norms > 0
    G[nz, nz] = 1.0
    return np.clip(G, -1.0, 1.0)


def cosine_similarity(u, v) -> float:
    """``u.v / (|u| |v|)``; zero when either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError(f"cannot compare vectors of shapes {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u / nu, v / nv), -1.0, 1.0))


def _query(q, domain: Domain, size: int) -> np.ndarray:
    if isinstance(q, QueryVector):
        if q.domain != domain:
            raise DimensionError(f"expected a {domain} query, got a {q.domain} query")
        q = q.indicator
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (size,):
        raise DimensionError(f"{domain} query has shape {q.shape}, expected ({size},)")
    return q


def _factors(model: CPModel, C: CharacteristicMatrix | None = None):
    if model.rank < 1:
        raise ValueError("decomposition rankings need at least one group")
    if C is not None and (model.hubs.shape[0], model.terms.shape[0]) != C.counts.shape:
        raise DimensionError("model and characteristic matrix disagree on sizes")
    return model.hubs, model.terms


def _weigh(model: CPModel, m: np.ndarray, weighted: bool) -> np.ndarray:
    return model.weights * m if weighted else m


def task1_standard(C: CharacteristicMatrix, q_word) -> RankingVector:
    q = _query(q_word, "words", C.n_words)
    return RankingVector("blogs", C.counts @ q, "standard")


def task1_decomp(model: CPModel, q_word, *, weighted: bool = False) -> RankingVector:
    H, T = _factors(model)
    m = _weigh(model, T.T @ _query(q_word, "words", T.shape[0]), weighted)
    return RankingVector("blogs", H @ m, "decomposition")


def task2_standard(C: CharacteristicMatrix, q_blog) -> RankingVector:
    q = _query(q_blog, "blogs", C.n_blogs)
    return RankingVector("words", C.counts.T @ q, "standard")


def task2_decomp(model: CPModel, q_blog, *, weighted: bool = False) -> RankingVector:
    H, T = _factors(model)
    m = _weigh(model, H.T @ _query(q_blog, "blogs", H.shape[0]), weighted)
    return RankingVector("words", T @ m, "decomposition")


def task3_standard(C: CharacteristicMatrix, q_blog, sims: SimilarityMatrices | None = None) -> RankingVector:
    sims = sims or build_similarity_matrices(C)
    q = _query(q_blog, "blogs", C.n_blogs)
    return RankingVector("blogs", sims.blogs @ q, "standard")


def task3_decomp(model: CPModel, q_blog, *, weighted: bool = False) -> RankingVector:
    H, _ = _factors(model)
    m = _weigh(model, H.T @ _query(q_blog, "blogs", H.shape[0]), weighted)
    return RankingVector("blogs", H @ m, "decomposition")


def task4_standard(C: CharacteristicMatrix, q_word, sims: SimilarityMatrices | None = None) -> RankingVector:
    sims = sims or build_similarity_matrices(C)
    q = _query(q_word, "words", C.n_words)
    return RankingVector("words", sims.words @ q, "standard")


def task4_decomp(model: CPModel, q_word, *, weighted: bool = False) -> RankingVector:
    _, T = _factors(model)
    m = _weigh(model, T.T @ _query(q_word, "words", T.shape[0]), weighted)
    return RankingVector("words", T @ m, "decomposition")


@dataclass(frozen=True, eq=False)
class SimilarityReport:
    """Cosine similarity per task (rows) and per model rank (columns)."""

    ranks: tuple[int, ...]
    values: np.ndarray  # shape (4, len(ranks))

    @property
    def task_averages(self) -> np.ndarray:
        return self.values.mean(axis=1)

    @property
    def rank_averages(self) -> np.ndarray:
        return self.values.mean(axis=0)

    @property
    def overall(self) -> float:
        return float(self.values.mean())

    def value(self, task: int, rank: int) -> float:
        return float(self.values[task - 1, self.ranks.index(rank)])

    def table(self) -> list[list]:
        header = ["", *(f"Group {R}" for R in self.ranks), "Av."]
        rows = [header]
        for t in TASKS:
            rows.append([f"Task {t}", *self.values[t - 1].tolist(), float(self.task_averages[t - 1])])
        rows.append(["Av.", *self.rank_averages.tolist(), self.overall])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in self.table():
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "ranks": list(self.ranks),
            "tasks": {
                str(t): {str(R): float(v) for R, v in zip(self.ranks, self.values[t - 1])}
                for t in TASKS
            },
            "task_averages": {str(t): float(v) for t, v in zip(TASKS, self.task_averages)},
            "rank_averages": {str(R): float(v) for R, v in zip(self.ranks, self.rank_averages)},
            "overall": self.overall,
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> SimilarityReport:
        doc = json.loads(text)
        ranks = tuple(int(R) for R in doc["ranks"])
        values = np.array([[doc["tasks"][str(t)][str(R)] for R in ranks] for t in TASKS])
        return cls(ranks, values)

    def format_text(self, digits: int = 4) -> str:
        rows = self.table()
        cells = [[c if isinstance(c, str) else f"{c:.{digits}f}" for c in row] for row in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
        return "\n".join(
            "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
            for r in cells
        ) + "\n"


def evaluate_all_tasks(
    C: CharacteristicMatrix, models: Sequence[CPModel], *, weighted: bool = False
) -> SimilarityReport:
    """Cosine between standard and decomposition rankings for all-ones queries."""
    if not models:
        raise ValueError("at least one model is required")
    sims = build_similarity_matrices(C)
    q_blog = QueryVector.ones("blogs", C.n_blogs)
    q_word = QueryVector.ones("words", C.n_words)
    standard = (
        task1_standard(C, q_word),
        task2_standard(C, q_blog),
        task3_standard(C, q_blog, sims),
        task4_standard(C, q_word, sims),
    )
    values = np.empty((4, len(models)))
    for col, model in enumerate(models):
        _factors(model, C)
        decomp = (
            task1_decomp(model, q_word, weighted=weighted),
            task2_decomp(model, q_blog, weighted=weighted),
            task3_decomp(model, q_blog, weighted=weighted),
            task4_decomp(model, q_word, weighted=weighted),
        )
        for row, (s, d) in enumerate(zip(standard, decomp)):
            values[row, col] = cosine_similarity(s.scores, d.scores)
    return SimilarityReport(tuple(model.rank for model in models), values)


@dataclass(frozen=True)
class GroupListing:
    group: int
    blogs: tuple[tuple[str, float], ...]
    words: tuple[tuple[str, float], ...]

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "blogs": [{"label": l, "score": s} for l, s in self.blogs],
            "words": [{"label": l, "score": s} for l, s in self.words],
        }

    def format_text(self) -> str:
        blog_w = max([len("Blog"), *(len(l) for l, _ in self.blogs)])
        word_w = max([len("Word"), *(len(l) for l, _ in self.words)])
        lines = [f"{'Blog':<{blog_w}}  {'Score':>10}  {'Word':<{word_w}}  {'Score':>10}"]
        for n in range(max(len(self.blogs), len(self.words))):
            b = self.blogs[n] if n < len(self.blogs) else None
            w = self.words[n] if n < len(self.words) else None
            left = f"{b[0]:<{blog_w}}  {b[1]:>10.5g}" if b else " " * (blog_w + 12)
            right = f"{w[0]:<{word_w}}  {w[1]:>10.5g}" if w else ""
            lines.append(f"{left}  {right}".rstrip())
        return "\n".join(lines) + "\n"


def _ranked(labels: Sequence[str], scores: np.ndarray, top_k: int | None):
    order = sorted(range(len(labels)), key=lambda i: (-scores[i], labels[i]))
    if top_k is not None:
        order = order[:top_k]
    return tuple((labels[i], float(scores[i])) for i in order)


def group_listing(
    model: CPModel,
    blog_labels: Sequence[str],
    word_labels: Sequence[str],
    r: int,
    top_k: int | None = 10,
) -> GroupListing:
    """Blogs and words of group ``r`` (1-based) sorted by display score.

    Blogs score ``lam_r * H[i, r]``, words score ``T[k, r]``. Ties are broken
    by label.
    """
    if not 1 <= r <= model.rank:
        raise ValueError(f"group {r} out of range 1..{model.rank}")
    if len(blog_labels) != model.hubs.shape[0] or len(word_labels) != model.terms.shape[0]:
        raise DimensionError("label counts do not match the model")
    blog_scores = model.weights[r - 1] * model.hubs[:, r - 1]
    word_scores = model.terms[:, r - 1]
    return GroupListing(
        r,
        _ranked(list(blog_labels), blog_scores, top_k),
        _ranked(list(word_labels), word_scores, top_k),
    )
