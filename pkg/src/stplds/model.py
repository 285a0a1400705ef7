"""Logical networks, lifting of local rules and assembly of the global transition matrix.

Global states use a mixed-radix encoding with node 1 as the most significant digit,
which is the index order of ``x_1 kron x_2 kron ... kron x_n``. Neighbor sets are
always kept in ascending node order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Mapping, Sequence, Union

import numpy as np

from .algebra import (
    STOCHASTIC_EPS,
    LogicalMatrix,
    StochasticMatrix,
    check_dims,
    khatri_rao,
    khatri_rao_logical,
    projection_matrix,
    validate_stochastic,
)

Lifted = Union[LogicalMatrix, np.ndarray]


class ModelError(ValueError):
    """Invalid network description. ``problems`` lists every violation found."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------------------
# State encoding


def state_encode(values: Sequence[int], alphabets: Sequence[int]) -> int:
    """Index in ``[1, k]`` of the joint state ``values`` (each ``x_i`` in ``[1, k_i]``)."""
    if len(values) != len(alphabets):
        raise ValueError(f"expected {len(alphabets)} components, got {len(values)}")
    index = 0
    for node, (x, k) in enumerate(zip(values, alphabets), start=1):
        if not 1 <= x <= k:
            raise ValueError(f"node {node} value {x} outside [1, {k}]")
        index = index * k + (x - 1)
    return index + 1


def state_decode(index: int, alphabets: Sequence[int]) -> list[int]:
    k = math.prod(alphabets)
    if not 1 <= index <= k:
        raise ValueError(f"state index {index} outside [1, {k}]")
    digits = []
    rest = index - 1
    for a in reversed(alphabets):
        rest, d = divmod(rest, a)
        digits.append(d + 1)
    return digits[::-1]


def decode_all(alphabets: Sequence[int]) -> np.ndarray:
    """``(k, n)`` array of 1-based node values for every global state, in index order."""
    k = math.prod(alphabets)
    return np.stack(np.unravel_index(np.arange(k), tuple(alphabets)), axis=1) + 1


# ---------------------------------------------------------------------------
# Rules and networks


@dataclass(frozen=True)
class DeterministicRule:
    """Structure matrix of a node; column ``j`` is the output for neighbor state ``j``."""

    matrix: LogicalMatrix

    @classmethod
    def from_table(cls, table: Sequence[int], k: int) -> "DeterministicRule":
        return cls(LogicalMatrix(k, np.asarray(table, dtype=np.int64)))

    @property
    def table(self) -> list[int]:
        return [int(i) for i in self.matrix.col_indices]


@dataclass(frozen=True)
class StochasticRule:
    """Transition matrix of a node, either local (neighbor-indexed) or already lifted."""

    matrix: StochasticMatrix
    lifted: bool = False


Rule = Union[DeterministicRule, StochasticRule]


@dataclass(frozen=True)
class Node:
    k: int
    neighbors: tuple[int, ...]
    rule: Rule


@dataclass(frozen=True)
class NetworkModel:
    nodes: tuple[Node, ...]
    allow_substochastic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        problems = _model_problems(self.nodes)
        if problems:
            raise ModelError(problems)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def alphabets(self) -> tuple[int, ...]:
        return tuple(node.k for node in self.nodes)

    @property
    def k(self) -> int:
        return math.prod(self.alphabets)

    @property
    def kind(self) -> str:
        return "deterministic" if isinstance(self.nodes[0].rule, DeterministicRule) else "stochastic"

    @property
    def is_substochastic(self) -> bool:
        return self.kind == "stochastic" and not all(
            node.rule.matrix.is_stochastic for node in self.nodes
        )


def _expected_cols(node: Node, alphabets: Sequence[int]) -> int:
    if isinstance(node.rule, StochasticRule) and node.rule.lifted:
        return math.prod(alphabets)
    return math.prod(alphabets[j - 1] for j in node.neighbors)


def _model_problems(nodes: Sequence[Node]) -> list[str]:
    if not nodes:
        return ["model has no nodes"]
    problems = []
    n = len(nodes)
    alphabets = [node.k for node in nodes]
    kinds = {type(node.rule) for node in nodes}
    if len(kinds) > 1:
        problems.append("model mixes deterministic and stochastic rules")
    for i, node in enumerate(nodes, start=1):
        if node.k < 1:
            problems.append(f"node {i}: alphabet size {node.k} must be at least 1")
            continue
        nb = list(node.neighbors)
        if nb != sorted(set(nb)):
            problems.append(f"node {i}: neighbors must be strictly ascending, got {nb}")
        bad = [j for j in nb if not 1 <= j <= n]
        if bad:
            problems.append(f"node {i}: neighbors {bad} are not nodes of the model")
            continue
        if any(a < 1 for a in alphabets):
            continue
        rows, cols = node.rule.matrix.shape
        if rows != node.k:
            problems.append(f"node {i}: rule has {rows} rows, expected k = {node.k}")
        expected = _expected_cols(node, alphabets)
        if cols != expected:
            problems.append(f"node {i}: rule has {cols} columns, expected {expected}")
    return problems


# ---------------------------------------------------------------------------
# Lifting, assembly and extraction


def lift_local(rule: Rule, neighbors: Sequence[int], alphabets: Sequence[int]) -> Lifted:
    """``M_i Phi_{N_i}`` (logical) or ``Q_i Phi_{N_i}`` (dense ``k_i x k``)."""
    k = math.prod(alphabets)
    check_dims(k)
    if isinstance(rule, StochasticRule) and rule.lifted:
        if rule.matrix.shape[1] != k:
            raise ValueError(f"lifted rule has {rule.matrix.shape[1]} columns, expected {k}")
        return np.array(rule.matrix.values)
    phi = projection_matrix(alphabets, neighbors)
    if isinstance(rule, DeterministicRule):
        if rule.matrix.cols != phi.rows:
            raise ValueError(f"rule has {rule.matrix.cols} columns, expected {phi.rows}")
        return LogicalMatrix(rule.matrix.rows, rule.matrix.col_indices[phi.col_indices - 1])
    q = rule.matrix.values
    if q.shape[1] != phi.rows:
        raise ValueError(f"rule has {q.shape[1]} columns, expected {phi.rows}")
    # right-multiplying by a logical matrix gathers columns
    return q[:, phi.col_indices - 1]


@dataclass(frozen=True, eq=False)
class GlobalSystem:
    """Assembled global map together with the lifted per-node factors."""

    lifted: tuple[Lifted, ...]
    matrix: Lifted = field(repr=False)

    @property
    def alphabets(self) -> tuple[int, ...]:
        return tuple(_rows(m) for m in self.lifted)

    @property
    def n(self) -> int:
        return len(self.lifted)

    @property
    def k(self) -> int:
        return _cols(self.matrix)

    @property
    def kind(self) -> str:
        return "deterministic" if isinstance(self.matrix, LogicalMatrix) else "stochastic"


def _rows(m: Lifted) -> int:
    return m.rows if isinstance(m, LogicalMatrix) else m.shape[0]


def _cols(m: Lifted) -> int:
    return m.cols if isinstance(m, LogicalMatrix) else m.shape[1]


def assemble_global(lifted: Sequence[Lifted]) -> GlobalSystem:
    """Fold the lifted factors with the Khatri-Rao product."""
    lifted = tuple(lifted)
    if not lifted:
        raise ValueError("need at least one lifted factor")
    logical = [isinstance(m, LogicalMatrix) for m in lifted]
    if any(logical) and not all(logical):
        raise ValueError("cannot mix logical and stochastic factors")
    if not all(logical):
        lifted = tuple(np.asarray(m, dtype=float) for m in lifted)
    k = math.prod(_rows(m) for m in lifted)
    check_dims(k)
    for i, m in enumerate(lifted, start=1):
        if _cols(m) != k:
            raise ValueError(f"factor {i} has {_cols(m)} columns, expected k = {k}")
    if all(logical):
        matrix = reduce(khatri_rao_logical, lifted)
    else:
        for m in lifted:
            m.setflags(write=False)
        matrix = reduce(khatri_rao, lifted)
        matrix.setflags(write=False)
    return GlobalSystem(lifted, matrix)


def assemble(model: NetworkModel) -> GlobalSystem:
    alphabets = model.alphabets
    return assemble_global(
        [lift_local(node.rule, node.neighbors, alphabets) for node in model.nodes]
    )


def extract_subsystem(system: GlobalSystem, i: int) -> Lifted:
    """``Phi_i M`` (or ``Phi_i Q``): the lifted rule of node ``i`` recovered from the global map."""
    alphabets = system.alphabets
    if not 1 <= i <= len(alphabets):
        raise IndexError(f"node {i} outside 1..{len(alphabets)}")
    phi = projection_matrix(alphabets, [i])
    m = system.matrix
    if isinstance(m, LogicalMatrix):
        return LogicalMatrix(phi.rows, phi.col_indices[m.col_indices - 1])
    # Phi_i Q sums the rows of Q that share node i's value
    k = m.shape[1]
    return np.asarray(m).reshape(*alphabets, k).sum(
        axis=tuple(j for j in range(len(alphabets)) if j != i - 1)
    )


# ---------------------------------------------------------------------------
# Construction from plain descriptions


def from_rule_tables(description: Mapping[str, Any]) -> NetworkModel:
    """Build a :class:`NetworkModel` from a decoded model-file mapping.

    Every problem found is collected and raised together as a :class:`ModelError`.
    """
    allow_sub = bool(description.get("allow_substochastic", False))
    raw_nodes = description.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise ModelError(["model has no nodes"])
    problems: list[str] = []
    ids = [raw.get("id") if isinstance(raw, Mapping) else None for raw in raw_nodes]
    if ids != list(range(1, len(raw_nodes) + 1)):
        problems.append(f"node ids must be 1..{len(raw_nodes)} in order, got {ids}")
    nodes = []
    for pos, raw in enumerate(raw_nodes, start=1):
        try:
            nodes.append(_node_from_mapping(raw, pos, allow_sub))
        except ModelError as exc:
            problems.extend(exc.problems)
    if problems:
        raise ModelError(problems)
    return NetworkModel(tuple(nodes), allow_substochastic=allow_sub)


def _node_from_mapping(raw: Any, i: int, allow_sub: bool) -> Node:
    if not isinstance(raw, Mapping):
        raise ModelError([f"node {i}: expected an object"])
    k = raw.get("k")
    neighbors = raw.get("neighbors", [])
    rule = raw.get("rule")
    problems = []
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        problems.append(f"node {i}: k must be a positive integer, got {k!r}")
    if not isinstance(neighbors, list) or not all(
        isinstance(j, int) and not isinstance(j, bool) for j in neighbors
    ):
        problems.append(f"node {i}: neighbors must be a list of node ids")
    if not isinstance(rule, Mapping):
        problems.append(f"node {i}: missing rule")
    if problems:
        raise ModelError(problems)

    kind = rule.get("type")
    if kind == "deterministic":
        table = rule.get("table")
        if not isinstance(table, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in table
        ):
            raise ModelError([f"node {i}: deterministic rule needs an integer table"])
        bad = [(col, v) for col, v in enumerate(table, start=1) if not 1 <= v <= k]
        if bad:
            raise ModelError(
                [f"node {i} column {col}: output {v} outside [1, {k}]" for col, v in bad]
            )
        if not table:
            raise ModelError([f"node {i}: empty table"])
        return Node(k, tuple(neighbors), DeterministicRule.from_table(table, k))
    if kind == "stochastic":
        matrix = rule.get("matrix")
        try:
            values = np.array(matrix, dtype=float)
        except (TypeError, ValueError):
            raise ModelError([f"node {i}: matrix must be a rectangular array of numbers"])
        if values.ndim != 2 or values.size == 0:
            raise ModelError([f"node {i}: matrix must be a nonempty array of rows"])
        col_problems = _column_problems(values, i, allow_sub)
        if col_problems:
            raise ModelError(col_problems)
        sm = StochasticMatrix(values, allow_substochastic=allow_sub)
        return Node(k, tuple(neighbors), StochasticRule(sm, lifted=bool(rule.get("lifted", False))))
    raise ModelError([f"node {i}: unknown rule type {kind!r}"])


def _column_problems(values: np.ndarray, i: int, allow_sub: bool) -> list[str]:
    problems = []
    if not np.all(np.isfinite(values)):
        return [f"node {i}: matrix has non-finite entries"]
    for col in range(values.shape[1]):
        column = values[:, col]
        if column.min() < -STOCHASTIC_EPS:
            problems.append(f"node {i} column {col + 1} has negative entry {column.min():g}")
        elif not allow_sub and not validate_stochastic(column, STOCHASTIC_EPS).ok:
            problems.append(f"node {i} column {col + 1} sums to {column.sum():.10g}")
    return problems


def to_description(model: NetworkModel) -> dict:
    """Inverse of :func:`from_rule_tables`."""
    nodes = []
    for i, node in enumerate(model.nodes, start=1):
        if isinstance(node.rule, DeterministicRule):
            rule = {"type": "deterministic", "table": node.rule.table}
        else:
            rule = {
                "type": "stochastic",
                "matrix": node.rule.matrix.values.tolist(),
                "lifted": node.rule.lifted,
            }
        nodes.append({"id": i, "k": node.k, "neighbors": list(node.neighbors), "rule": rule})
    out: dict[str, Any] = {"version": "1", "nodes": nodes}
    if model.allow_substochastic:
        out["allow_substochastic"] = True
    return out
