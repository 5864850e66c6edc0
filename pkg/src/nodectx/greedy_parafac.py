"""Greedy rank-1 deflation PARAFAC for sparse third-order tensors.

Groups are extracted one at a time: alternating power iterations find the
dominant rank-1 term ``lam * h o a o t`` of the current residual, the term is
recorded, and the next group is sought in what remains. The residual is never
formed; contractions against it are contractions against ``X`` minus a
low-rank correction built from factor inner products.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from nodectx.errors import DecompositionError, DimensionError, TensorFormatError
from nodectx.sparse_tensor3 import (
    SparseTensor3,
    contract_modes_1_2,
    contract_modes_1_3,
    contract_modes_2_3,
    frobenius_norm,
)

__all__ = [
    "DecomposeOptions",
    "CPModel",
    "Residual",
    "decompose",
    "rank1_power_iteration",
    "residual_contraction",
    "fit_error",
    "save_model",
    "load_model",
]

logger = logging.getLogger(__name__)

# A residual below this relative norm is treated as exhausted: what is left is
# rounding noise from deflating the earlier groups.
EXHAUSTED_RTOL = 1e-7

STATUSES = ("converged", "max_iters", "exhausted", "degenerate")


@dataclass(frozen=True)
class DecomposeOptions:
    """Settings for :func:`decompose`.

    ``tol`` bounds the relative change of the weight estimate between sweeps;
    the factor vectors must also move by less than ``tol`` (Euclidean norm)
    for a group to count as converged.
    """

    rank: int = 2
    tol: float = 1e-9
    max_iters: int = 500
    seed: int = 0
    init: Literal["slice-sum", "random"] = "slice-sum"
    max_restarts: int = 3

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.init not in ("slice-sum", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be nonnegative")


@dataclass(frozen=True, eq=False)
class CPModel:
    """Weights and factor matrices of a rank-R CP approximation.

    Column ``r`` of ``hubs``, ``authorities`` and ``terms`` holds the unit
    vectors ``h_r``, ``a_r`` and ``t_r``; ``weights[r]`` is ``lam_r``. Groups
    are ordered by decreasing weight.
    """

    weights: np.ndarray
    hubs: np.ndarray
    authorities: np.ndarray
    terms: np.ndarray
    status: tuple[str, ...] = ()
    iterations: tuple[int, ...] = ()
    options: DecomposeOptions | None = None

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        R = weights.shape[0]
        mats = []
        for name in ("hubs", "authorities", "terms"):
            mat = np.asarray(getattr(self, name), dtype=np.float64)
            if mat.ndim != 2 or mat.shape[1] != R:
                raise DimensionError(f"{name} has shape {mat.shape}, expected (*, {R})")
            mats.append(mat)
        status = tuple(self.status) or ("converged",) * R
        iterations = tuple(int(n) for n in self.iterations) or (0,) * R
        if len(status) != R or len(iterations) != R:
            raise DimensionError("one status and iteration count per group required")
        unknown = set(status) - set(STATUSES)
        if unknown:
            raise ValueError(f"unknown group status {sorted(unknown)}")
        for arr in (weights, *mats):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "hubs", mats[0])
        object.__setattr__(self, "authorities", mats[1])
        object.__setattr__(self, "terms", mats[2])
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "iterations", iterations)

    @property
    def rank(self) -> int:
        return self.weights.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.hubs.shape[0], self.authorities.shape[0], self.terms.shape[0])

    @property
    def converged(self) -> tuple[bool, ...]:
        return tuple(s == "converged" for s in self.status)

    def to_dense(self) -> np.ndarray:
        return np.einsum("r,ir,jr,kr->ijk", self.weights, self.hubs, self.authorities, self.terms)

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "shape": list(self.shape),
            "lambda": self.weights.tolist(),
            "H": self.hubs.T.tolist(),
            "A": self.authorities.T.tolist(),
            "T": self.terms.T.tolist(),
            "status": list(self.status),
            "converged": list(self.converged),
            "iterations": list(self.iterations),
            "options": asdict(self.options) if self.options else None,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> CPModel:
        try:
            I, J, K = doc["shape"]
            R = int(doc["rank"])

            def columns(key, rows):
                cols = np.asarray(doc[key], dtype=np.float64).reshape(R, rows)
                return cols.T

            opts = doc.get("options")
            return cls(
                weights=np.asarray(doc["lambda"], dtype=np.float64),
                hubs=columns("H", I),
                authorities=columns("A", J),
                terms=columns("T", K),
                status=tuple(doc["status"]),
                iterations=tuple(doc["iterations"]),
                options=DecomposeOptions(**opts) if opts else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TensorFormatError(f"malformed model document: {exc}") from exc


def save_model(model: CPModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> CPModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TensorFormatError(f"{path}: {exc}") from exc
    return CPModel.from_dict(doc)


@dataclass
class _Groups:
    """Previously extracted groups, stored column-wise."""

    weights: list[float] = field(default_factory=list)
    h: list[np.ndarray] = field(default_factory=list)
    a: list[np.ndarray] = field(default_factory=list)
    t: list[np.ndarray] = field(default_factory=list)

    def arrays(self, shape):
        I, J, K = shape
        if not self.weights:
            return np.empty(0), np.empty((I, 0)), np.empty((J, 0)), np.empty((K, 0))
        return (
            np.array(self.weights),
            np.column_stack(self.h),
            np.column_stack(self.a),
            np.column_stack(self.t),
        )


_CONTRACTIONS = (contract_modes_2_3, contract_modes_1_3, contract_modes_1_2)


def residual_contraction(
    X: SparseTensor3,
    weights,
    hubs,
    authorities,
    terms,
    mode: int,
    u,
    v,
) -> np.ndarray:
    """Contract ``X - sum_s lam_s h_s o a_s o t_s`` with two vectors.

    ``mode`` is the surviving axis (0, 1 or 2); ``u`` and ``v`` are the
    vectors for the other two axes in increasing axis order. The previous
    groups are passed as a weight vector and three factor matrices, which may
    have zero columns.
    """
    if mode not in (0, 1, 2):
        raise ValueError(f"mode must be 0, 1 or 2, got {mode}")
    out = _CONTRACTIONS[mode](X, u, v)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        return out
    factors = (np.asarray(hubs), np.asarray(authorities), np.asarray(terms))
    first, second = (f for ax, f in enumerate(factors) if ax != mode)
    return out - factors[mode] @ (weights * (first.T @ u) * (second.T @ v))


class Residual:
    """Implicit view of ``X`` minus a set of rank-1 terms."""

    def __init__(self, X: SparseTensor3, weights=(), hubs=None, authorities=None, terms=None):
        I, J, K = X.shape
        self.X = X
        self.weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        R = self.weights.size
        self.hubs = np.empty((I, 0)) if hubs is None else np.asarray(hubs).reshape(I, R)
        self.authorities = (
            np.empty((J, 0)) if authorities is None else np.asarray(authorities).reshape(J, R)
        )
        self.terms = np.empty((K, 0)) if terms is None else np.asarray(terms).reshape(K, R)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.X.shape

    def contract(self, mode: int, u, v) -> np.ndarray:
        return residual_contraction(
            self.X, self.weights, self.hubs, self.authorities, self.terms, mode, u, v
        )

    def norm_squared(self) -> float:
        """``||X - Xhat||^2`` without forming the residual.

        Split as the exact squared error over the stored entries of ``X`` plus
        the energy ``Xhat`` puts elsewhere, ``||Xhat||^2 - sum_stored xhat^2``.
        The plain expansion ``||X||^2 - 2<X, Xhat> + ||Xhat||^2`` loses all
        digits below ``sqrt(eps) * ||X||``; here only the off-support term
        cancels, and it is accumulated in extended precision.
        """
        X = self.X
        if self.weights.size == 0:
            return float(np.dot(X.vals, X.vals))
        ext = np.longdouble
        i, j, k = X.subs.T
        xhat = np.zeros(X.nnz, dtype=ext)
        for s, w in enumerate(self.weights):
            xhat += (
                ext(w)
                * self.hubs[i, s].astype(ext)
                * self.authorities[j, s].astype(ext)
                * self.terms[k, s].astype(ext)
            )
        on_support = np.sum((X.vals.astype(ext) - xhat) ** 2)
        w = self.weights.astype(ext)
        gram = (
            np.outer(w, w)
            * (self.hubs.T.astype(ext) @ self.hubs.astype(ext))
            * (self.authorities.T.astype(ext) @ self.authorities.astype(ext))
            * (self.terms.T.astype(ext) @ self.terms.astype(ext))
        )
        off_support = max(np.sum(gram) - np.sum(xhat * xhat), ext(0))
        return float(on_support + off_support)

    def slice_norms(self) -> np.ndarray:
        """Frobenius norm of every frontal slice ``residual[:, :, k]``."""
        X = self.X
        sq = np.bincount(X.subs[:, 2], weights=X.vals**2, minlength=X.shape[2])
        if self.weights.size:
            cross = np.column_stack(
                [
                    contract_modes_1_2(X, self.hubs[:, s], self.authorities[:, s])
                    for s in range(self.weights.size)
                ]
            )
            w = self.weights
            T = self.terms
            hh_aa = np.outer(w, w) * (self.hubs.T @ self.hubs) * (self.authorities.T @ self.authorities)
            sq = sq - 2.0 * (T * cross) @ w + np.einsum("kr,rs,ks->k", T, hh_aa, T)
        return np.sqrt(np.maximum(sq, 0.0))


def _normalize(vec: np.ndarray):
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not np.isfinite(norm):
        return None
    return vec / norm


def _sign_of_largest(vec: np.ndarray) -> float:
    # ties resolve to the lowest index (argmax returns the first maximum)
    return -1.0 if vec[int(np.argmax(np.abs(vec)))] < 0 else 1.0


def _initial_vectors(residual: Residual, opts: DecomposeOptions, group: int, restart: int):
    I, J, K = residual.shape
    if opts.init == "slice-sum" and restart == 0:
        h = _normalize(residual.contract(0, np.ones(J), np.ones(K)))
        t = _normalize(residual.slice_norms())
        if h is not None and t is not None and I == J:
            return h, h.copy(), t
        if h is not None and t is not None:
            a = _normalize(residual.contract(1, np.ones(I), np.ones(K)))
            if a is not None:
                return h, a, t
    rng = np.random.default_rng([opts.seed, group, restart])
    h = _normalize(rng.random(I) + 1e-3)
    a = h.copy() if I == J else _normalize(rng.random(J) + 1e-3)
    t = _normalize(rng.random(K) + 1e-3)
    return h, a, t


def rank1_power_iteration(
    residual: Residual, opts: DecomposeOptions, group: int = 0
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, str, int]:
    """Dominant rank-1 term of ``residual`` by alternating power updates.

    Returns ``(lam, h, a, t, status, sweeps)`` with unit factors, ``lam >= 0``
    and the sign convention applied: the largest-magnitude entries of ``t``
    and ``h`` are nonnegative where that is compatible with a nonnegative
    weight (``a`` absorbs the remaining sign).
    """
    x_sq = float(np.dot(residual.X.vals, residual.X.vals))
    exhausted = residual.norm_squared() <= (EXHAUSTED_RTOL**2) * x_sq

    sweeps = 0
    for restart in range(opts.max_restarts + 1):
        h, a, t = _initial_vectors(residual, opts, group, restart)
        lam_prev = None
        status = "max_iters"
        max_sweeps = 1 if exhausted else opts.max_iters
        failed = False
        for sweep in range(1, max_sweeps + 1):
            sweeps += 1
            h_new = _normalize(residual.contract(0, a, t))
            a_new = None if h_new is None else _normalize(residual.contract(1, h_new, t))
            t_new = None if a_new is None else _normalize(residual.contract(2, h_new, a_new))
            if t_new is None:
                failed = True
                break
            step = max(
                np.linalg.norm(h_new - h), np.linalg.norm(a_new - a), np.linalg.norm(t_new - t)
            )
            h, a, t = h_new, a_new, t_new
            lam = float(residual.contract(0, a, t) @ h)
            if lam_prev is not None:
                change = abs(lam - lam_prev) / max(abs(lam), np.finfo(float).tiny)
                if change < opts.tol and step < opts.tol:
                    status = "converged"
                    break
            lam_prev = lam
        if not failed:
            if exhausted:
                status = "exhausted"
            break
        logger.debug("group %d: zero update on restart %d", group, restart)
    else:
        h, a, t = _initial_vectors(residual, opts, group, opts.max_restarts + 1)
        lam = float(residual.contract(0, a, t) @ h)
        status = "exhausted" if exhausted else "degenerate"

    if _sign_of_largest(t) < 0:
        t, a = -t, -a
    if _sign_of_largest(h) < 0:
        h, a = -h, -a
    if lam < 0:
        lam, a = -lam, -a
    if status != "converged":
        logger.info("group %d finished with status %s after %d sweeps", group, status, sweeps)
    return lam, h, a, t, status, sweeps


def decompose(X: SparseTensor3, opts: DecomposeOptions | None = None) -> CPModel:
    """Greedy rank-``opts.rank`` CP decomposition of ``X``.

    Each group is the dominant rank-1 term of the residual left by the groups
    before it. Earlier groups are never revisited, so the first ``r`` groups
    of a rank-``R`` run coincide with a rank-``r`` run. The returned groups
    are sorted by decreasing weight.
    """
    opts = opts or DecomposeOptions()
    if X.nnz == 0:
        raise DecompositionError("cannot decompose an all-zero tensor")
    groups = _Groups()
    status: list[str] = []
    iterations: list[int] = []
    for r in range(opts.rank):
        residual = Residual(X, *groups.arrays(X.shape))
        lam, h, a, t, st, sweeps = rank1_power_iteration(residual, opts, group=r)
        groups.weights.append(lam)
        groups.h.append(h)
        groups.a.append(a)
        groups.t.append(t)
        status.append(st)
        iterations.append(sweeps)
    weights, H, A, T = groups.arrays(X.shape)
    order = np.argsort(-weights, kind="stable")
    return CPModel(
        weights=weights[order],
        hubs=H[:, order],
        authorities=A[:, order],
        terms=T[:, order],
        status=tuple(status[i] for i in order),
        iterations=tuple(iterations[i] for i in order),
        options=opts,
    )


def fit_error(X: SparseTensor3, model: CPModel | None) -> float:
    """Relative approximation error ``||X - Xhat||_F / ||X||_F`` without densifying."""
    norm_x = frobenius_norm(X)
    if norm_x == 0.0:
        raise DecompositionError("fit error is undefined for an all-zero tensor")
    if model is None or model.rank == 0:
        return 1.0
    if model.shape != X.shape:
        raise DimensionError(f"model shape {model.shape} does not match tensor {X.shape}")
    residual = Residual(X, model.weights, model.hubs, model.authorities, model.terms)
    return float(np.sqrt(residual.norm_squared())) / norm_x


def prefix(model: CPModel, r: int) -> CPModel:
    """The first ``r`` groups of ``model``."""
    return CPModel(
        model.weights[:r],
        model.hubs[:, :r],
        model.authorities[:, :r],
        model.terms[:, :r],
        model.status[:r],
        model.iterations[:r],
        model.options,
    )


def models_for_ranks(X: SparseTensor3, ranks: Sequence[int], opts: DecomposeOptions) -> list[CPModel]:
    """Independent decompositions, one per requested rank."""
    return [decompose(X, DecomposeOptions(**{**asdict(opts), "rank": R})) for R in ranks]
