"""Structured linear algebra for logical dynamic systems.

Dense matrices are plain 2-D ``numpy`` float arrays. Logical matrices (every
column a unit vector) are kept as 1-based index arrays, written
``delta_s[i_1, ..., i_r]``, and only expanded to dense form on request.
"""
from __future__ import annotations

import contextlib
import contextvars
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_MAX_DIM = 2**20
ALGEBRA_ATOL = 1e-12
STOCHASTIC_EPS = 1e-9

_max_dim: contextvars.ContextVar[int] = contextvars.ContextVar("max_dim", default=DEFAULT_MAX_DIM)


class DimensionCapError(ValueError):
    """A result would exceed the configured row/column cap."""


def get_max_dim() -> int:
    return _max_dim.get()


def set_max_dim(limit: int) -> None:
    if limit < 1:
        raise ValueError("dimension cap must be positive")
    _max_dim.set(int(limit))


@contextlib.contextmanager
def dimension_cap(limit: int) -> Iterator[None]:
    """Temporarily change the dimension cap for the current context."""
    if limit < 1:
        raise ValueError("dimension cap must be positive")
    token = _max_dim.set(int(limit))
    try:
        yield
    finally:
        _max_dim.reset(token)


def check_dims(*dims: int, what: str = "result") -> None:
    limit = _max_dim.get()
    for d in dims:
        if d > limit:
            raise DimensionCapError(
                f"{what} dimension {d} exceeds the cap of {limit} (raise it with --max-dim)"
            )


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a vector or matrix, got an array of ndim {a.ndim}")
    return a


# ---------------------------------------------------------------------------
# Logical matrices


@dataclass(frozen=True, eq=False)
class LogicalMatrix:
    """``rows x len(col_indices)`` matrix whose column j is ``delta_rows^{col_indices[j]}``."""

    rows: int
    col_indices: np.ndarray = field(repr=False)

    def __post_init__(self):
        idx = np.array(self.col_indices, dtype=np.int64).reshape(-1)
        if self.rows < 1:
            raise ValueError("a logical matrix needs at least one row")
        if idx.size and (idx.min() < 1 or idx.max() > self.rows):
            bad = int(np.flatnonzero((idx < 1) | (idx > self.rows))[0])
            raise ValueError(
                f"column {bad + 1} index {int(idx[bad])} outside [1, {self.rows}]"
            )
        idx.setflags(write=False)
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "col_indices", idx)

    @classmethod
    def identity(cls, n: int) -> "LogicalMatrix":
        check_dims(n)
        return cls(n, np.arange(1, n + 1))

    @classmethod
    def from_dense(cls, a, atol: float = ALGEBRA_ATOL) -> "LogicalMatrix":
        a = _as_matrix(a)
        rows = np.argmax(a, axis=0)
        expected = np.zeros_like(a)
        expected[rows, np.arange(a.shape[1])] = 1.0
        if not np.allclose(a, expected, rtol=0.0, atol=atol):
            raise ValueError("matrix is not logical (columns are not unit vectors)")
        return cls(a.shape[0], rows + 1)

    @property
    def cols(self) -> int:
        return int(self.col_indices.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def to_dense(self) -> np.ndarray:
        check_dims(self.rows, self.cols)
        out = np.zeros((self.rows, self.cols))
        out[self.col_indices - 1, np.arange(self.cols)] = 1.0
        return out

    def __array__(self, dtype=None, copy=None):
        out = self.to_dense()
        return out if dtype is None else out.astype(dtype)

    def apply(self, index: int) -> int:
        """Image of ``delta^index`` as a 1-based row index."""
        if not 1 <= index <= self.cols:
            raise IndexError(f"state {index} outside [1, {self.cols}]")
        return int(self.col_indices[index - 1])

    def __eq__(self, other):
        if not isinstance(other, LogicalMatrix):
            return NotImplemented
        return self.rows == other.rows and np.array_equal(self.col_indices, other.col_indices)

    def __hash__(self):
        return hash((self.rows, self.col_indices.tobytes()))

    def __str__(self):
        return f"delta {self.rows} [{','.join(str(int(i)) for i in self.col_indices)}]"


def delta(rows: int, indices: Iterable[int]) -> LogicalMatrix:
    """Shorthand for ``delta_rows[indices]``."""
    return LogicalMatrix(rows, np.asarray(list(indices), dtype=np.int64))


# ---------------------------------------------------------------------------
# Stochastic objects


@dataclass(frozen=True)
class StochasticVerdict:
    ok: bool
    column: int | None = None
    column_sum: float | None = None
    message: str = ""

    def __bool__(self):
        return self.ok


def validate_stochastic(m, eps: float = STOCHASTIC_EPS) -> StochasticVerdict:
    """Check column-stochasticity; report the first offending column (1-based)."""
    m = _as_matrix(m)
    if not np.all(np.isfinite(m)):
        col = int(np.flatnonzero(~np.all(np.isfinite(m), axis=0))[0])
        return StochasticVerdict(False, col + 1, None, f"column {col + 1} has non-finite entries")
    neg = np.flatnonzero(np.any(m < -eps, axis=0))
    if neg.size:
        col = int(neg[0])
        return StochasticVerdict(
            False, col + 1, float(m[:, col].sum()),
            f"column {col + 1} has entry {m[:, col].min():g} < 0",
        )
    sums = m.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > eps)
    if bad.size:
        col = int(bad[0])
        return StochasticVerdict(
            False, col + 1, float(sums[col]), f"column {col + 1} sums to {sums[col]:.10g}"
        )
    return StochasticVerdict(True)


def _frozen_copy(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Column-stochastic matrix. Tiny negative entries (within ``eps``) are clamped to 0.

    ``allow_substochastic`` admits matrices whose columns do not sum to one; the flag
    travels with the value so downstream results can be annotated.
    """

    values: np.ndarray = field(repr=False)
    eps: float = STOCHASTIC_EPS
    allow_substochastic: bool = False

    def __post_init__(self):
        m = _as_matrix(self.values).copy()
        verdict = validate_stochastic(m, self.eps)
        if not verdict.ok:
            entries_ok = np.all(np.isfinite(m)) and m.min() >= -self.eps
            if not (entries_ok and self.allow_substochastic):
                raise ValueError(verdict.message)
        m[m < 0] = 0.0
        object.__setattr__(self, "values", _frozen_copy(m))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def is_stochastic(self) -> bool:
        return validate_stochastic(self.values, self.eps).ok

    def __eq__(self, other):
        if not isinstance(other, StochasticMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.values.shape, self.values.tobytes()))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    """Point of the probability simplex."""

    values: np.ndarray = field(repr=False)
    eps: float = STOCHASTIC_EPS

    def __post_init__(self):
        p = np.array(self.values, dtype=float).reshape(-1)
        if p.size == 0:
            raise ValueError("probability vector must be nonempty")
        if not np.all(np.isfinite(p)):
            raise ValueError("probability vector has non-finite entries")
        if p.min() < -self.eps:
            raise ValueError(f"probability vector has negative entry {p.min():g}")
        if abs(p.sum() - 1.0) > self.eps:
            raise ValueError(f"probability vector sums to {p.sum():.10g}, not 1")
        p[p < 0] = 0.0
        object.__setattr__(self, "values", _frozen_copy(p))

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.dim


# ---------------------------------------------------------------------------
# Products


def kron(a, b) -> np.ndarray:
    a, b = _as_matrix(a), _as_matrix(b)
    check_dims(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
    return np.kron(a, b)


def stp(a, b) -> np.ndarray:
    """Left semi-tensor product ``(A kron I_{l/n})(B kron I_{l/p})`` with ``l = lcm(n, p)``.

    1-D inputs are treated as column vectors.
    """
    a, b = _as_matrix(a), _as_matrix(b)
    m, n = a.shape
    p, q = b.shape
    l = math.lcm(n, p)
    check_dims(m * l // n, q * l // p, l)
    if n == p:
        return a @ b
    return np.kron(a, np.eye(l // n)) @ np.kron(b, np.eye(l // p))


def stp_chain(*factors) -> np.ndarray:
    """Left-to-right semi-tensor product of several factors."""
    if not factors:
        raise ValueError("stp_chain needs at least one factor")
    out = _as_matrix(factors[0])
    for f in factors[1:]:
        out = stp(out, f)
    return out


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product of two matrices with equal column counts."""
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"Khatri-Rao product needs equal column counts, got {a.shape[1]} and {b.shape[1]}"
        )
    check_dims(a.shape[0] * b.shape[0], a.shape[1])
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def khatri_rao_logical(a: LogicalMatrix, b: LogicalMatrix) -> LogicalMatrix:
    if a.cols != b.cols:
        raise ValueError(
            f"Khatri-Rao product needs equal column counts, got {a.cols} and {b.cols}"
        )
    check_dims(a.rows * b.rows, a.cols)
    return LogicalMatrix(a.rows * b.rows, (a.col_indices - 1) * b.rows + b.col_indices)


def stp_logical(a: LogicalMatrix, b: LogicalMatrix) -> LogicalMatrix:
    """Semi-tensor product of logical matrices by index arithmetic only."""
    s, r = a.shape
    p, q = b.shape
    l = math.lcm(r, p)
    ea, eb = l // r, l // p
    check_dims(s * ea, q * eb, l)
    # column c of (B kron I_eb) hits row (B[c // eb] - 1) * eb + c % eb (0-based)
    c = np.arange(q * eb)
    mid = (b.col_indices[c // eb] - 1) * eb + c % eb
    # row `mid` of the middle space is column `mid` of (A kron I_ea)
    out = (a.col_indices[mid // ea] - 1) * ea + mid % ea
    return LogicalMatrix(s * ea, out + 1)


# ---------------------------------------------------------------------------
# Structural operators


def swap_matrix(m: int, n: int) -> LogicalMatrix:
    """``W_[m,n]``: maps ``x kron y`` to ``y kron x`` for ``x`` in Delta_m, ``y`` in Delta_n."""
    if m < 1 or n < 1:
        raise ValueError("swap matrix dimensions must be positive")
    check_dims(m * n)
    c = np.arange(m * n)
    i, j = c // n, c % n
    return LogicalMatrix(m * n, i + j * m + 1)


def power_reduce_matrix(k: int) -> LogicalMatrix:
    """``R_k`` with ``x kron x = R_k x`` for every unit vector ``x`` in Delta_k."""
    if k < 1:
        raise ValueError("k must be positive")
    check_dims(k * k)
    i = np.arange(k)
    return LogicalMatrix(k * k, i * k + i + 1)


def _normalize_subset(subset: Iterable[int], n: int) -> tuple[int, ...]:
    nodes = sorted(set(int(u) for u in subset))
    bad = [u for u in nodes if not 1 <= u <= n]
    if bad:
        raise ValueError(f"nodes {bad} are not in 1..{n}")
    return tuple(nodes)


def projection_matrix(alphabets: Sequence[int], subset: Iterable[int]) -> LogicalMatrix:
    """``Phi_U``: Kronecker product of ``I_{k_j}`` for ``j`` in U and ``1^T_{k_j}`` otherwise.

    Maps a joint unit state to its restriction to ``U`` (nodes are 1-based).
    """
    alphabets = tuple(int(a) for a in alphabets)
    if any(a < 1 for a in alphabets):
        raise ValueError("alphabet sizes must be positive")
    nodes = _normalize_subset(subset, len(alphabets))
    k = math.prod(alphabets)
    check_dims(k)
    sub_dims = [alphabets[u - 1] for u in nodes]
    if not nodes:
        return LogicalMatrix(1, np.ones(k, dtype=np.int64))
    digits = np.unravel_index(np.arange(k), alphabets)
    sub = np.ravel_multi_index([digits[u - 1] for u in nodes], sub_dims)
    return LogicalMatrix(math.prod(sub_dims), sub + 1)


def power_reduce_power(k: int, times: int) -> LogicalMatrix:
    """``R_k^times`` under the semi-tensor product, so that ``x^(times+1) = R_k^times x``."""
    out = LogicalMatrix.identity(k)
    r = power_reduce_matrix(k)
    for _ in range(times):
        out = stp_logical(r, out)
    return out
