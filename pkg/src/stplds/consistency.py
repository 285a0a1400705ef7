"""Deciding when the independent and conditional stochastic models coincide.

Both models agree for every initial distribution exactly when

    (Q_1 p) kron ... kron (Q_n p) == (Q_1 * ... * Q_n) p     for all p in the simplex,

the left side being ``H p^n`` and the right side ``H R_k^{n-1} p`` for the operator
``H = stp_i (I_{k^{i-1}} kron Q_i)``. ``H`` has ``k^n`` columns and is never formed;
both sides are evaluated from the lifted factors directly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .algebra import STOCHASTIC_EPS, DimensionCapError, ProbabilityVector, check_dims, khatri_rao
from .evolution import kron_of_images
from .model import GlobalSystem, NetworkModel, assemble

DEFAULT_TOL = 1e-9
STRUCTURAL_TOL = 1e-12
EXACT_CAP = 10**6
MIDPOINT_MAX_K = 32
NON_STOCHASTIC_NOTE = "non-stochastic input"


class ExactCapError(DimensionCapError):
    pass


@dataclass(frozen=True, eq=False)
class HOperator:
    lifted: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        qs = tuple(np.array(q, dtype=float) for q in self.lifted)
        if not qs:
            raise ValueError("need at least one lifted factor")
        k = math.prod(q.shape[0] for q in qs)
        for i, q in enumerate(qs, start=1):
            if q.ndim != 2 or q.shape[1] != k:
                raise ValueError(f"factor {i} has shape {q.shape}, expected ({q.shape[0]}, {k})")
            if q.min() < -STOCHASTIC_EPS:
                raise ValueError(f"factor {i} has negative entries")
            q.setflags(write=False)
        object.__setattr__(self, "lifted", qs)

    @classmethod
    def from_system(cls, source: GlobalSystem | NetworkModel) -> "HOperator":
        if isinstance(source, NetworkModel):
            source = assemble(source)
        if source.kind != "stochastic":
            raise ValueError("consistency checks need a stochastic model")
        return cls(source.lifted)

    @property
    def n(self) -> int:
        return len(self.lifted)

    @property
    def alphabets(self) -> tuple[int, ...]:
        return tuple(q.shape[0] for q in self.lifted)

    @property
    def k(self) -> int:
        return self.lifted[0].shape[1]

    @property
    def stochastic(self) -> bool:
        return all(np.all(np.abs(q.sum(axis=0) - 1.0) <= STOCHASTIC_EPS) for q in self.lifted)

    @cached_property
    def reduced(self) -> np.ndarray:
        """``Q_1 * ... * Q_n``, which equals ``H R_k^{n-1}``."""
        check_dims(self.k)
        out = self.lifted[0]
        for q in self.lifted[1:]:
            out = khatri_rao(out, q)
        out.setflags(write=False)
        return out


def _points(h: HOperator, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[0] != h.k:
        raise ValueError(f"point has dimension {p.shape[0]}, expected k = {h.k}")
    return p


def h_apply_power(h: HOperator, p) -> np.ndarray:
    """``H p^n`` as ``(Q_1 p) kron ... kron (Q_n p)``. Columns of a 2-D ``p`` are separate points."""
    return kron_of_images(h.lifted, _points(h, p))


def h_apply_reduced(h: HOperator, p) -> np.ndarray:
    """``H R_k^{n-1} p`` as ``(Q_1 * ... * Q_n) p``."""
    return h.reduced @ _points(h, p)


def point_consistency(h: HOperator, p, tol: float = DEFAULT_TOL) -> float:
    """Max-norm gap between the two sides at ``p``."""
    p = ProbabilityVector(p).values
    return float(np.max(np.abs(h_apply_power(h, p) - h_apply_reduced(h, p))))


@dataclass(frozen=True, eq=False)
class ConsistencyVerdict:
    status: str  # "consistent" | "inconsistent" | "consistent-at-samples" | "inconclusive"
    method: str  # "sampled" | "exact" | "structural" | "corollary"
    tolerance: float
    residual: float = 0.0
    witness: np.ndarray | None = field(default=None, repr=False)
    samples: int = 0
    structural_nodes: tuple[int, ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def consistent(self) -> bool:
        return self.status in ("consistent", "consistent-at-samples")


def _notes(h: HOperator) -> tuple[str, ...]:
    return () if h.stochastic else (NON_STOCHASTIC_NOTE,)


def _sample_points(k: int, num_random: int, seed: int) -> np.ndarray:
    """Vertices, then edge midpoints (small ``k`` only), then flat-Dirichlet points, as columns."""
    blocks = [np.eye(k)]
    if 2 <= k <= MIDPOINT_MAX_K:
        i, j = np.triu_indices(k, 1)
        mid = np.zeros((k, i.size))
        mid[i, np.arange(i.size)] = 0.5
        mid[j, np.arange(i.size)] = 0.5
        blocks.append(mid)
    if num_random > 0:
        rng = np.random.default_rng(seed)
        blocks.append(rng.dirichlet(np.ones(k), size=num_random).T)
    return np.hstack(blocks)


def check_consistency_sampled(
    h: HOperator,
    num_samples: int = 1000,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    batch: int = 256,
) -> ConsistencyVerdict:
    """Compare both sides on every vertex, edge midpoints and ``num_samples`` random points.

    The worst point is reported; ties go to the earliest point.
    """
    if num_samples < 0:
        raise ValueError("num_samples must be nonnegative")
    pts = _sample_points(h.k, num_samples, seed)
    worst, where = -1.0, 0
    for start in range(0, pts.shape[1], batch):
        chunk = pts[:, start : start + batch]
        gap = np.max(np.abs(h_apply_power(h, chunk) - h_apply_reduced(h, chunk)), axis=0)
        j = int(np.argmax(gap))
        if gap[j] > worst:
            worst, where = float(gap[j]), start + j
    ok = worst <= tol
    return ConsistencyVerdict(
        "consistent-at-samples" if ok else "inconsistent",
        "sampled",
        tol,
        worst,
        None if ok else pts[:, where].copy(),
        pts.shape[1],
        notes=_notes(h),
    )


def _symmetrized_gap(h: HOperator, chunk: np.ndarray) -> np.ndarray:
    """Per-multiset max gap between the symmetrized coefficient vectors of both sides."""
    n = h.n
    perms = list(itertools.permutations(range(n)))
    power = np.zeros((h.k, chunk.shape[0]))
    for perm in perms:
        cols = [q[:, chunk[:, perm[i]]] for i, q in enumerate(h.lifted)]
        term = cols[0]
        for c in cols[1:]:
            term = khatri_rao(term, c)
        power += term
    power /= len(perms)
    # linear side homogenized by (1^T p)^{n-1}
    linear = h.reduced[:, chunk].mean(axis=2) if n > 1 else h.reduced[:, chunk[:, 0]]
    return np.max(np.abs(power - linear), axis=0)


def check_consistency_exact(
    h: HOperator, tol: float = DEFAULT_TOL, cap: int = EXACT_CAP, chunk_size: int = 4096
) -> ConsistencyVerdict:
    """Polynomial-identity test of ``H p^n == H R_k^{n-1} p`` on the simplex.

    Both sides are homogenized to degree ``n`` and their symmetrized coefficients
    compared over every multiset of ``n`` state indices. Equality on the simplex is
    equivalent to equality of these coefficients.
    """
    if h.k ** h.n > cap:
        raise ExactCapError(
            f"exact check needs k^n = {h.k}^{h.n} > {cap} coefficients; use the sampled method"
        )
    worst, worst_multiset = 0.0, None
    combos = itertools.combinations_with_replacement(range(h.k), h.n)
    while True:
        chunk = np.array(list(itertools.islice(combos, chunk_size)), dtype=np.int64)
        if chunk.size == 0:
            break
        chunk = chunk.reshape(-1, h.n)
        gap = _symmetrized_gap(h, chunk)
        j = int(np.argmax(gap))
        if gap[j] > worst:
            worst, worst_multiset = float(gap[j]), chunk[j]
    if worst <= tol:
        return ConsistencyVerdict("consistent", "exact", tol, worst, notes=_notes(h))
    witness, residual = _find_witness(h, worst_multiset)
    return ConsistencyVerdict(
        "inconsistent", "exact", tol, residual, witness, notes=_notes(h)
    )


def _find_witness(h: HOperator, multiset: np.ndarray, extra: int = 256, seed: int = 0):
    """Simplex point with a large gap, searched near the offending multiset."""
    k = h.k
    cands = [np.bincount(multiset, minlength=k) / len(multiset), np.full(k, 1.0 / k)]
    support = np.unique(multiset)
    rng = np.random.default_rng(seed)
    for _ in range(extra):
        p = np.zeros(k)
        p[support] = rng.dirichlet(np.ones(support.size))
        cands.append(p)
    pts = np.hstack([np.column_stack(cands), _sample_points(k, extra, seed)])
    gap = np.max(np.abs(h_apply_power(h, pts) - h_apply_reduced(h, pts)), axis=0)
    j = int(np.argmax(gap))
    return pts[:, j].copy(), float(gap[j])


def corollary_matrix(h: HOperator, p) -> np.ndarray:
    """``H p^{n-1}`` as a ``k x k`` matrix: column ``r`` is ``(Q_1 p) kron ... kron (Q_{n-1} p) kron Col_r(Q_n)``."""
    p = _points(h, np.asarray(p, dtype=float).reshape(-1))
    head = [q @ p for q in h.lifted[:-1]]
    front = head[0]
    for v in head[1:]:
        front = np.kron(front, v)
    return np.kron(front.reshape(-1, 1), h.lifted[-1])


def check_corollary_matrix(
    h: HOperator,
    num_samples: int = 100,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    points: Iterable[Sequence[float]] | None = None,
) -> ConsistencyVerdict:
    """Sufficient matrix condition ``H R_k^{n-1} == H p^{n-1}`` at sampled (or given) points."""
    if h.n < 2:
        raise ValueError("the matrix condition needs at least two nodes")
    check_dims(h.k * h.k)
    if points is None:
        pts = _sample_points(h.k, num_samples, seed).T
    else:
        pts = np.array([ProbabilityVector(p).values for p in points])
    worst, where = -1.0, 0
    for idx, p in enumerate(pts):
        gap = float(np.max(np.abs(corollary_matrix(h, p) - h.reduced)))
        if gap > worst:
            worst, where = gap, idx
    ok = worst <= tol
    return ConsistencyVerdict(
        "consistent-at-samples" if ok else "inconclusive",
        "corollary",
        tol,
        worst,
        pts[where].copy(),
        len(pts),
        notes=_notes(h),
    )


def check_structural_sufficient(h_or_lifted, tol: float = STRUCTURAL_TOL) -> ConsistencyVerdict:
    """Consistent if at least ``n - 1`` lifted factors have all columns equal."""
    h = h_or_lifted if isinstance(h_or_lifted, HOperator) else HOperator(tuple(h_or_lifted))
    constant = tuple(
        i
        for i, q in enumerate(h.lifted, start=1)
        if np.max(np.abs(q - q[:, :1])) <= tol
    )
    holds = len(constant) >= h.n - 1
    return ConsistencyVerdict(
        "consistent" if holds else "inconclusive",
        "structural",
        tol,
        structural_nodes=constant,
        notes=_notes(h),
    )


def check_all(
    h: HOperator,
    num_samples: int = 1000,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    cap: int = EXACT_CAP,
) -> ConsistencyVerdict:
    """Structural, then exact (when within the cap), then sampled; the first decisive answer wins."""
    structural = check_structural_sufficient(h)
    if structural.status == "consistent":
        return structural
    if h.k ** h.n <= cap:
        return check_consistency_exact(h, tol, cap)
    return check_consistency_sampled(h, num_samples, tol, seed)
