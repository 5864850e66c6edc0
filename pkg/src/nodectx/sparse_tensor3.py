"""Coordinate-format sparse third-order tensors.

Entries are kept sorted lexicographically by ``(k, i, j)`` so that a tensor
built slice by slice has a canonical layout. Contractions run as sparse
matrix-vector products against cached matricizations, falling back to a
weighted ``bincount`` over the entries when a matricization would be too
wide. Both paths reduce in a fixed order and are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
from scipy import sparse

from nodectx.errors import DimensionError, TensorFormatError

__all__ = [
    "SparseTensor3",
    "contract_modes_2_3",
    "contract_modes_1_3",
    "contract_modes_1_2",
    "frobenius_norm",
    "frontal_slices_symmetric",
    "read_tensor",
    "write_tensor",
]


@dataclass(frozen=True, eq=False)
class SparseTensor3:
    """Immutable sparse tensor of shape ``(I, J, K)``.

    Parameters
    ----------
    shape:
        Tensor dimensions ``(I, J, K)``.
    subs:
        ``(nnz, 3)`` integer array of zero-based ``(i, j, k)`` coordinates.
    vals:
        ``(nnz,)`` float array of nonzero values.

    Use :meth:`from_entries` or :meth:`from_arrays` rather than the raw
    constructor; they validate and canonicalize the entry order.
    """

    shape: tuple[int, int, int]
    subs: np.ndarray
    vals: np.ndarray
    _unfoldings: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_arrays(cls, shape, subs, vals) -> SparseTensor3:
        shape = tuple(int(d) for d in shape)
        if len(shape) != 3 or any(d < 0 for d in shape):
            raise DimensionError(f"shape must be three nonnegative sizes, got {shape}")
        subs = np.asarray(subs, dtype=np.int64).reshape(-1, 3)
        vals = np.asarray(vals, dtype=np.float64).reshape(-1)
        if subs.shape[0] != vals.shape[0]:
            raise DimensionError(
                f"{subs.shape[0]} coordinates but {vals.shape[0]} values"
            )
        if subs.size and (np.any(subs < 0) or np.any(subs >= np.array(shape))):
            bad = np.flatnonzero(np.any((subs < 0) | (subs >= np.array(shape)), axis=1))[0]
            raise DimensionError(
                f"entry {tuple(subs[bad])} lies outside shape {shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("tensor values must be finite")
        if np.any(vals == 0):
            raise ValueError("explicit zero values are not stored")

        order = np.lexsort((subs[:, 1], subs[:, 0], subs[:, 2]))
        subs = subs[order]
        vals = vals[order]
        if subs.shape[0] > 1:
            dup = np.all(subs[1:] == subs[:-1], axis=1)
            if np.any(dup):
                where = tuple(int(x) for x in subs[1:][dup][0])
                raise ValueError(f"duplicate coordinate {where}")
        subs.setflags(write=False)
        vals.setflags(write=False)
        return cls(shape, subs, vals)

    @classmethod
    def from_entries(
        cls, shape, entries: Iterable[tuple[int, int, int, float]]
    ) -> SparseTensor3:
        """Build from an iterable of ``(i, j, k, value)`` tuples."""
        entries = list(entries)
        if not entries:
            return cls.from_arrays(shape, np.empty((0, 3)), np.empty(0))
        subs = [e[:3] for e in entries]
        vals = [e[3] for e in entries]
        return cls.from_arrays(shape, subs, vals)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> SparseTensor3:
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 3:
            raise DimensionError("expected a 3-way array")
        subs = np.argwhere(dense != 0)
        return cls.from_arrays(dense.shape, subs, dense[tuple(subs.T)])

    @property
    def nnz(self) -> int:
        return int(self.vals.shape[0])

    def entries(self) -> list[tuple[int, int, int, float]]:
        return [
            (int(i), int(j), int(k), float(v))
            for (i, j, k), v in zip(self.subs, self.vals)
        ]

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        if self.nnz:
            out[tuple(self.subs.T)] = self.vals
        return out

    def scaled(self, alpha: float) -> SparseTensor3:
        return SparseTensor3.from_arrays(self.shape, self.subs, alpha * self.vals)

    def permuted(self, perm_i=None, perm_j=None, perm_k=None) -> SparseTensor3:
        """Relabel indices: entry ``(i, j, k)`` moves to ``(perm_i[i], perm_j[j], perm_k[k])``."""
        subs = self.subs.copy()
        for axis, perm in enumerate((perm_i, perm_j, perm_k)):
            if perm is not None:
                subs[:, axis] = np.asarray(perm)[subs[:, axis]]
        return SparseTensor3.from_arrays(self.shape, subs, self.vals)

    def unfolding(self, mode: int):
        """Mode-``mode`` matricization as CSR, or None when it would be wasteful.

        Columns are ordered so that multiplying by ``np.outer(u, v).ravel()``
        contracts the two remaining modes with ``u`` and ``v`` (in axis
        order). Matricizations are built once and cached.
        """
        if mode not in self._unfoldings:
            rest = [ax for ax in range(3) if ax != mode]
            n_cols = self.shape[rest[0]] * self.shape[rest[1]]
            if n_cols > 16 * max(self.nnz, 4096):
                self._unfoldings[mode] = None
            else:
                cols = self.subs[:, rest[0]] * self.shape[rest[1]] + self.subs[:, rest[1]]
                self._unfoldings[mode] = sparse.csr_matrix(
                    (self.vals, (self.subs[:, mode], cols)),
                    shape=(self.shape[mode], n_cols),
                )
        return self._unfoldings[mode]

    def __repr__(self) -> str:
        return f"SparseTensor3(shape={self.shape}, nnz={self.nnz})"


def _check_len(name: str, vec: np.ndarray, size: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != size:
        raise DimensionError(f"{name} has shape {vec.shape}, expected ({size},)")
    return vec


def _contract(X: SparseTensor3, mode: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    unfolded = X.unfolding(mode)
    if unfolded is not None:
        return unfolded @ np.outer(u, v).ravel()
    rest = [ax for ax in range(3) if ax != mode]
    weights = X.vals * u[X.subs[:, rest[0]]] * v[X.subs[:, rest[1]]]
    return np.bincount(X.subs[:, mode], weights=weights, minlength=X.shape[mode])


def contract_modes_2_3(X: SparseTensor3, a, t) -> np.ndarray:
    """``out[i] = sum_jk X[i, j, k] * a[j] * t[k]``."""
    a = _check_len("a", a, X.shape[1])
    t = _check_len("t", t, X.shape[2])
    return _contract(X, 0, a, t)


def contract_modes_1_3(X: SparseTensor3, h, t) -> np.ndarray:
    """``out[j] = sum_ik X[i, j, k] * h[i] * t[k]``."""
    h = _check_len("h", h, X.shape[0])
    t = _check_len("t", t, X.shape[2])
    return _contract(X, 1, h, t)


def contract_modes_1_2(X: SparseTensor3, h, a) -> np.ndarray:
    """``out[k] = sum_ij X[i, j, k] * h[i] * a[j]``."""
    h = _check_len("h", h, X.shape[0])
    a = _check_len("a", a, X.shape[1])
    return _contract(X, 2, h, a)


def frobenius_norm(X: SparseTensor3) -> float:
    return float(np.sqrt(np.dot(X.vals, X.vals)))


def frontal_slices_symmetric(X: SparseTensor3, tol: float = 0.0) -> bool:
    """True iff ``|X[i, j, k] - X[j, i, k]| <= tol`` everywhere."""
    if X.shape[0] != X.shape[1]:
        raise DimensionError(
            f"frontal slices are {X.shape[0]}x{X.shape[1]}, not square"
        )
    if X.nnz == 0:
        return True
    I, J, _ = X.shape
    i, j, k = X.subs.T
    key = (k * I + i) * J + j
    mirror = (k * I + j) * J + i
    order = np.argsort(key, kind="stable")
    sorted_keys = key[order]
    pos = np.minimum(np.searchsorted(sorted_keys, mirror), X.nnz - 1)
    found = sorted_keys[pos] == mirror
    # a missing mirror entry compares against 0
    mirror_vals = np.where(found, X.vals[order][pos], 0.0)
    return bool(np.all(np.abs(X.vals - mirror_vals) <= tol))


def write_tensor(X: SparseTensor3, dest: str | Path | TextIO) -> None:
    """Write the ``I J K nnz`` header followed by one ``i j k value`` line per entry."""
    lines = [f"{X.shape[0]} {X.shape[1]} {X.shape[2]} {X.nnz}\n"]
    lines.extend(
        f"{i} {j} {k} {v!r}\n" for (i, j, k), v in zip(X.subs.tolist(), X.vals.tolist())
    )
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(lines)
    else:
        dest.writelines(lines)


def read_tensor(source: str | Path | TextIO) -> SparseTensor3:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return _parse_tensor(fh, str(source))
    return _parse_tensor(source, getattr(source, "name", "<stream>"))


def _parse_tensor(fh: TextIO, name: str) -> SparseTensor3:
    header = fh.readline().split()
    if len(header) != 4:
        raise TensorFormatError(f"{name}:1: expected header 'I J K nnz'")
    try:
        I, J, K, nnz = (int(x) for x in header)
    except ValueError as exc:
        raise TensorFormatError(f"{name}:1: non-integer header") from exc
    subs = np.empty((nnz, 3), dtype=np.int64)
    vals = np.empty(nnz)
    n = 0
    for lineno, line in enumerate(fh, start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4 or n >= nnz:
            raise TensorFormatError(f"{name}:{lineno}: unexpected entry line")
        try:
            subs[n] = [int(p) for p in parts[:3]]
            vals[n] = float(parts[3])
        except ValueError as exc:
            raise TensorFormatError(f"{name}:{lineno}: malformed entry") from exc
        n += 1
    if n != nnz:
        raise TensorFormatError(f"{name}: header declares {nnz} entries, found {n}")
    try:
        return SparseTensor3.from_arrays((I, J, K), subs, vals)
    except ValueError as exc:
        raise TensorFormatError(f"{name}: {exc}") from exc
