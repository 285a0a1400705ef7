"""Deterministic and stochastic evolution of logical networks.

Two stochastic models are provided. The *independent* model keeps one distribution
per node and assumes node states are independent at every time; its joint
distribution is always the Kronecker product of the factors and it evolves as a
non-homogeneous chain. The *conditional* model evolves the joint distribution with
``p(t+1) = Q p(t)``, nodes updating independently given the full current state.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence, Union

import numpy as np

from .algebra import STOCHASTIC_EPS, LogicalMatrix, ProbabilityVector, khatri_rao
from .model import GlobalSystem, assemble_global

DRIFT_WARN = 1e-9
DRIFT_FAIL = 1e-6
DEFAULT_T_MAX = 1000
MC_BLOCK = 4096


class SimplexDriftError(ArithmeticError):
    """A distribution left the simplex by more than floating-point drift allows."""


class SimplexDriftWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------------------
# Deterministic dynamics


def step_deterministic(m: LogicalMatrix, x: int) -> int:
    return m.apply(x)


@dataclass(frozen=True)
class DeterministicTrajectory:
    """States ``x(0), x(1), ...`` up to and including the first repeated state."""

    states: tuple[int, ...]
    transient: int | None
    cycle_length: int | None

    @property
    def cycle(self) -> tuple[int, ...]:
        if self.cycle_length is None:
            return ()
        return self.states[self.transient : self.transient + self.cycle_length]

    def state_at(self, t: int) -> int:
        if t < len(self.states):
            return self.states[t]
        if self.cycle_length is None:
            raise IndexError(f"time {t} beyond the simulated horizon")
        return self.states[self.transient + (t - self.transient) % self.cycle_length]


def simulate_deterministic(
    m: LogicalMatrix, x0: int, t_max: int = DEFAULT_T_MAX
) -> DeterministicTrajectory:
    if m.rows != m.cols:
        raise ValueError(f"global map must be square, got {m.shape}")
    if not 1 <= x0 <= m.cols:
        raise ValueError(f"initial state {x0} outside [1, {m.cols}]")
    seen = {x0: 0}
    states = [x0]
    x = x0
    for t in range(1, t_max + 1):
        x = m.apply(x)
        states.append(x)
        if x in seen:
            return DeterministicTrajectory(tuple(states), seen[x], t - seen[x])
        seen[x] = t
    return DeterministicTrajectory(tuple(states), None, None)


# ---------------------------------------------------------------------------
# Stochastic steppers


@dataclass(frozen=True, eq=False)
class FactorState:
    """Per-node marginals ``p_1, ..., p_n``."""

    factors: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        if not self.factors:
            raise ValueError("need at least one factor")
        object.__setattr__(
            self, "factors", tuple(ProbabilityVector(f).values for f in self.factors)
        )

    @property
    def alphabets(self) -> tuple[int, ...]:
        return tuple(f.size for f in self.factors)

    def joint(self) -> np.ndarray:
        return reduce(np.kron, self.factors)


def _dense(m) -> np.ndarray:
    return m.to_dense() if isinstance(m, LogicalMatrix) else np.asarray(m, dtype=float)


def _dense_lifted(lifted) -> list[np.ndarray]:
    if isinstance(lifted, GlobalSystem):
        lifted = lifted.lifted
    return [_dense(q) for q in lifted]


def _settle(p: np.ndarray, what: str, always: bool = False) -> tuple[np.ndarray, bool]:
    """Apply the drift policy; returns the (possibly renormalized) vector and a flag."""
    s = p.sum(axis=0)
    drift = float(np.max(np.abs(s - 1.0)))
    if drift > DRIFT_FAIL:
        raise SimplexDriftError(f"{what} sums to {np.max(s):.12g}; drift {drift:.3g} exceeds {DRIFT_FAIL:g}")
    flagged = drift > DRIFT_WARN
    if flagged:
        warnings.warn(f"{what} drifted by {drift:.3g}; renormalized", SimplexDriftWarning, stacklevel=3)
    if flagged or always:
        p = p / s
    return p, flagged


def kron_of_images(lifted: Sequence[np.ndarray], p: np.ndarray) -> np.ndarray:
    """``(Q_1 p) kron ... kron (Q_n p)``; a 2-D ``p`` is treated as a batch of columns."""
    images = [q @ p for q in lifted]
    if p.ndim == 1:
        return reduce(np.kron, images)
    return reduce(khatri_rao, images)


def _step_independent(qs: Sequence[np.ndarray], state: FactorState) -> tuple[FactorState, bool]:
    if len(qs) != len(state.factors):
        raise ValueError(f"{len(qs)} lifted factors but {len(state.factors)} node distributions")
    joint = state.joint()
    out, flagged = [], False
    for i, q in enumerate(qs, start=1):
        if q.shape != (state.factors[i - 1].size, joint.size):
            raise ValueError(
                f"node {i}: lifted matrix has shape {q.shape}, expected "
                f"{(state.factors[i - 1].size, joint.size)}"
            )
        # each factor is renormalized every step: the joint sum is the product of the
        # factor sums, so rounding error compounds geometrically otherwise
        p, hit = _settle(q @ joint, f"node {i} distribution", always=True)
        out.append(p)
        flagged |= hit
    return FactorState(tuple(out)), flagged


def step_independent(lifted, state: FactorState | Sequence[np.ndarray]) -> FactorState:
    """One step of the independent model: ``p_i <- Q_i (p_1 kron ... kron p_n)``."""
    if not isinstance(state, FactorState):
        state = FactorState(tuple(state))
    return _step_independent(_dense_lifted(lifted), state)[0]


def _step_conditional(q: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, bool]:
    if q.shape[1] != p.shape[0]:
        raise ValueError(f"matrix has {q.shape[1]} columns but p has dimension {p.shape[0]}")
    return _settle(q @ p, "joint distribution")


def step_conditional(q, p) -> np.ndarray:
    """One step of the conditional model, ``Q p``."""
    return _step_conditional(_dense(q), np.asarray(p, dtype=float))[0]


# ---------------------------------------------------------------------------
# Trajectories


@dataclass(frozen=True, eq=False)
class StochasticTrajectory:
    mode: str
    distributions: np.ndarray = field(repr=False)
    factors: tuple[np.ndarray, ...] | None = field(default=None, repr=False)
    stationary_at: int | None = None
    renormalized: tuple[int, ...] = ()

    @property
    def steps(self) -> int:
        return self.distributions.shape[0] - 1

    def __getitem__(self, t: int) -> np.ndarray:
        return self.distributions[t]


def detect_stationary(traj, tol: float = 1e-9, window: int = 5) -> int | None:
    """First ``t`` with ``max|p(s+1) - p(s)| < tol`` for every ``s`` in ``[t, t + window)``."""
    dists = traj.distributions if isinstance(traj, StochasticTrajectory) else np.asarray(traj)
    if len(dists) == 0:
        raise ValueError("empty trajectory")
    if window < 1:
        raise ValueError("window must be at least 1")
    if len(dists) < window + 1:
        return None
    small = np.max(np.abs(np.diff(dists, axis=0)), axis=1) < tol
    run = 0
    for s, ok in enumerate(small):
        run = run + 1 if ok else 0
        if run == window:
            return s - window + 1
    return None


InitialState = Union[FactorState, ProbabilityVector, np.ndarray, Sequence]


def _split_initial(initial: InitialState, alphabets: Sequence[int]):
    """Return ``(factor_state or None, joint vector)``."""
    if isinstance(initial, FactorState):
        return initial, initial.joint()
    if isinstance(initial, ProbabilityVector):
        return None, np.array(initial.values)
    if isinstance(initial, np.ndarray) and initial.ndim == 1:
        return None, ProbabilityVector(initial).values.copy()
    items = list(initial)
    if items and all(np.ndim(f) == 1 for f in items):
        state = FactorState(tuple(items))
        if state.alphabets != tuple(alphabets):
            raise ValueError(f"factor dimensions {state.alphabets} do not match alphabets {tuple(alphabets)}")
        return state, state.joint()
    return None, ProbabilityVector(np.asarray(items, dtype=float)).values.copy()


_MODES = {"independent": "independent", "conditional": "conditional", "mc": "monte-carlo", "monte-carlo": "monte-carlo"}


def simulate_stochastic(
    source,
    initial: InitialState,
    t_max: int = DEFAULT_T_MAX,
    mode: str = "conditional",
    *,
    stop_when_stationary: bool = False,
    tol: float = 1e-9,
    window: int = 5,
    samples: int = 10_000,
    seed: int = 0,
) -> StochasticTrajectory:
    """Iterate one of the stochastic models from ``initial``.

    ``source`` is a :class:`GlobalSystem` or a sequence of lifted factors. The
    independent model requires per-node initial distributions; the other modes
    accept either a joint vector or factors, which are Kronecker-expanded.
    """
    try:
        mode = _MODES[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}") from None
    qs = _dense_lifted(source)
    alphabets = [q.shape[0] for q in qs]
    k = math.prod(alphabets)
    state, joint = _split_initial(initial, alphabets)
    if joint.size != k:
        raise ValueError(f"initial distribution has dimension {joint.size}, expected {k}")

    if mode == "monte-carlo":
        dists = monte_carlo_oracle(qs, joint, t_max, samples, seed)
        return StochasticTrajectory(mode, dists, stationary_at=detect_stationary(dists, tol, window))

    if mode == "independent":
        if state is None:
            raise ValueError("independent mode needs per-node initial distributions")
        factor_hist = [[f] for f in state.factors]
    else:
        if isinstance(source, GlobalSystem) and source.kind == "stochastic":
            q = np.asarray(source.matrix)
        else:
            q = np.asarray(assemble_global(qs).matrix)

    dists = [joint]
    flagged: list[int] = []
    stationary_at = None
    run = 0
    for t in range(1, t_max + 1):
        if mode == "independent":
            state, hit = _step_independent(qs, state)
            for hist, f in zip(factor_hist, state.factors):
                hist.append(f)
            nxt = state.joint()
        else:
            nxt, hit = _step_conditional(q, dists[-1])
        if hit:
            flagged.append(t)
        run = run + 1 if np.max(np.abs(nxt - dists[-1])) < tol else 0
        dists.append(nxt)
        if run == window and stationary_at is None:
            stationary_at = t - window
            if stop_when_stationary:
                break

    dists_arr = np.vstack(dists)
    factors = None
    if mode == "independent":
        factors = tuple(np.vstack(h) for h in factor_hist)
    return StochasticTrajectory(mode, dists_arr, factors, stationary_at, tuple(flagged))


@dataclass(frozen=True, eq=False)
class DivergenceReport:
    """Per-step L1 distance between the independent and conditional models."""

    distances: np.ndarray = field(repr=False)

    @property
    def max(self) -> float:
        return float(self.distances.max())

    @property
    def argmax(self) -> int:
        return int(self.distances.argmax())

    def first_exceedance(self, threshold: float) -> int | None:
        hits = np.flatnonzero(self.distances > threshold)
        return int(hits[0]) if hits.size else None


def compare_models(lifted, initial: FactorState | Sequence[np.ndarray], steps: int) -> DivergenceReport:
    """Run both models from the same product initial and record ``|p_hat(t) - p(t)|_1``."""
    indep = simulate_stochastic(lifted, initial, steps, "independent")
    cond = simulate_stochastic(lifted, initial, steps, "conditional")
    d = np.abs(indep.distributions - cond.distributions).sum(axis=1)
    return DivergenceReport(d)


# ---------------------------------------------------------------------------
# Monte Carlo


def monte_carlo_oracle(lifted, p0, steps: int, samples: int, seed: int) -> np.ndarray:
    """Sample the per-node random updates given the full current state.

    Returns the ``(steps + 1, k)`` empirical joint distributions. Samples are drawn in
    fixed blocks of :data:`MC_BLOCK`, each with its own generator seeded by
    ``(seed, block)``, so counts do not depend on evaluation order.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    qs = _dense_lifted(lifted)
    k = math.prod(q.shape[0] for q in qs)
    p0 = ProbabilityVector(np.asarray(p0, dtype=float)).values
    if p0.size != k:
        raise ValueError(f"initial distribution has dimension {p0.size}, expected {k}")
    for i, q in enumerate(qs, start=1):
        if q.shape[1] != k or np.any(np.abs(q.sum(axis=0) - 1.0) > STOCHASTIC_EPS) or q.min() < 0:
            raise ValueError(f"node {i}: Monte Carlo needs a column-stochastic k_{i} x {k} matrix")
    cums = [np.cumsum(q, axis=0) for q in qs]
    cum0 = np.cumsum(p0)
    counts = np.zeros((steps + 1, k), dtype=np.int64)
    for block, start in enumerate(range(0, samples, MC_BLOCK)):
        size = min(MC_BLOCK, samples - start)
        rng = np.random.default_rng([seed, block])
        x = np.minimum(np.searchsorted(cum0, rng.random(size), side="right"), k - 1)
        counts[0] += np.bincount(x, minlength=k)
        for t in range(1, steps + 1):
            u = rng.random((len(cums), size))
            nxt = np.zeros(size, dtype=np.int64)
            for i, c in enumerate(cums):
                v = np.minimum((c[:, x] <= u[i]).sum(axis=0), c.shape[0] - 1)
                nxt = nxt * c.shape[0] + v
            x = nxt
            counts[t] += np.bincount(x, minlength=k)
    return counts / samples
