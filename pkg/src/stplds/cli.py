"""Command-line front end.

Exit codes: 0 ok / consistent, 1 validation or usage error, 2 inconsistent,
3 consistent at samples only, 4 dimension cap exceeded, 5 inconclusive
(structural method found no sufficient structure).
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence, TextIO

import numpy as np

from .algebra import DimensionCapError, LogicalMatrix, dimension_cap
from .consistency import (
    DEFAULT_TOL,
    EXACT_CAP,
    ConsistencyVerdict,
    HOperator,
    check_all,
    check_consistency_exact,
    check_consistency_sampled,
    check_structural_sufficient,
    h_apply_power,
    h_apply_reduced,
    point_consistency,
)
from .evolution import (
    DEFAULT_T_MAX,
    FactorState,
    SimplexDriftError,
    compare_models,
    simulate_deterministic,
    simulate_stochastic,
)
from .io import ModelFileError, load_model, parse_init, write_csv, write_matrix_csv
from .model import ModelError, NetworkModel, assemble, state_decode

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INCONSISTENT = 2
EXIT_SAMPLES_ONLY = 3
EXIT_CAP = 4
EXIT_INCONCLUSIVE = 5

_STATUS_EXIT = {
    "consistent": EXIT_OK,
    "inconsistent": EXIT_INCONSISTENT,
    "consistent-at-samples": EXIT_SAMPLES_ONLY,
    "inconclusive": EXIT_INCONCLUSIVE,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _vec(v, digits: int = 4) -> str:
    return "[" + ", ".join(f"{x:.{digits}f}" for x in np.asarray(v).reshape(-1)) + "]"


class _Output:
    """``-o PATH`` or stdout."""

    def __init__(self, path: str | None):
        self.path = path
        self.fh: TextIO | None = None

    def __enter__(self) -> TextIO:
        if self.path in (None, "-"):
            return sys.stdout
        self.fh = open(self.path, "w", encoding="utf-8", newline="\n")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()


# ---------------------------------------------------------------------------
# Commands


def cmd_validate(args) -> int:
    model = load_model(args.model, args.allow_substochastic)
    note = " (non-stochastic columns admitted)" if model.is_substochastic else ""
    print(f"ok: {model.n} {model.kind} nodes, alphabets {list(model.alphabets)}, k = {model.k}{note}")
    return EXIT_OK


def cmd_assemble(args) -> int:
    model = load_model(args.model, args.allow_substochastic)
    system = assemble(model)
    if system.kind == "deterministic":
        print(system.matrix)
        for i, m in enumerate(system.lifted, start=1):
            print(f"node {i}: {m}")
        if args.out:
            with _Output(args.out) as out:
                write_matrix_csv(out, system.matrix.to_dense())
    else:
        with _Output(args.out) as out:
            write_matrix_csv(out, system.matrix)
    if args.factors_dir:
        os.makedirs(args.factors_dir, exist_ok=True)
        for i, m in enumerate(system.lifted, start=1):
            dense = m.to_dense() if isinstance(m, LogicalMatrix) else m
            with open(os.path.join(args.factors_dir, f"node{i}.csv"), "w", encoding="utf-8", newline="\n") as fh:
                write_matrix_csv(fh, dense)
    return EXIT_OK


def _stochastic_initial(init, model: NetworkModel, mode: str):
    if isinstance(init, int):
        raise UsageError(f"mode {mode} needs a distribution, not a state index")
    if isinstance(init, list):
        return FactorState(tuple(init))
    if mode == "independent":
        raise UsageError("independent mode needs per-node distributions, e.g. --init '0.4,0.6;0.5,0.5'")
    return init


def cmd_simulate(args) -> int:
    model = load_model(args.model, args.allow_substochastic)
    init = parse_init(args.init)
    system = assemble(model)
    if args.mode == "det":
        if model.kind != "deterministic":
            raise UsageError("det mode needs a deterministic model")
        if not isinstance(init, int):
            raise UsageError("det mode needs an integer state index as --init")
        traj = simulate_deterministic(system.matrix, init, args.steps)
        header = ["t"] + [f"x{i}" for i in range(1, model.n + 1)]
        rows = (
            [str(t)] + [str(v) for v in state_decode(traj.state_at(t), model.alphabets)]
            for t in range(args.steps + 1)
        )
        footer = []
        if traj.cycle_length is not None:
            footer.append(f"transient={traj.transient} cycle_length={traj.cycle_length}")
            if traj.cycle_length == 1:
                footer.append(f"stationary_at={traj.transient}")
        with _Output(args.out) as out:
            write_csv(out, header, rows, footer)
        return EXIT_OK

    initial = _stochastic_initial(init, model, args.mode)
    traj = simulate_stochastic(
        system,
        initial,
        args.steps,
        args.mode,
        tol=args.stationary_tol,
        samples=args.samples,
        seed=args.seed,
    )
    header = ["t"] + [f"s{j}" for j in range(1, system.k + 1)]
    rows = ([str(t)] + list(p) for t, p in enumerate(traj.distributions))
    footer = [] if traj.stationary_at is None else [f"stationary_at={traj.stationary_at}"]
    with _Output(args.out) as out:
        write_csv(out, header, rows, footer)
    return EXIT_OK


def cmd_compare(args) -> int:
    model = load_model(args.model, args.allow_substochastic)
    if model.kind != "stochastic":
        raise UsageError("compare needs a stochastic model")
    init = parse_init(args.init)
    if not isinstance(init, list):
        raise UsageError("compare needs per-node initial distributions, e.g. --init '0.4,0.6;0.5,0.5'")
    system = assemble(model)
    report = compare_models(system, FactorState(tuple(init)), args.steps)
    with _Output(args.out) as out:
        write_csv(out, ["t", "d"], ([str(t), d] for t, d in enumerate(report.distances)))
    print(f"max d(t) = {report.max:.4f} at t = {report.argmax}", file=sys.stderr)
    return EXIT_OK


def _report(v: ConsistencyVerdict) -> None:
    print(f"verdict: {v.status}")
    print(f"method: {v.method}")
    print(f"tolerance: {v.tolerance:g}")
    if v.method in ("sampled", "exact", "corollary"):
        print(f"residual: {v.residual:.4f} ({v.residual:.3e})")
    if v.samples:
        print(f"points evaluated: {v.samples}")
    if v.method == "structural":
        nodes = ", ".join(map(str, v.structural_nodes)) or "none"
        print(f"constant-column nodes: {nodes}")
    if v.witness is not None and v.status == "inconsistent":
        print(f"witness: {_vec(v.witness)}")
    for note in v.notes:
        print(f"note: {note}")


def cmd_check(args) -> int:
    model = load_model(args.model, args.allow_substochastic)
    if model.kind != "stochastic":
        raise UsageError("check needs a stochastic model")
    h = HOperator.from_system(assemble(model))
    if args.method == "structural":
        verdict = check_structural_sufficient(h)
    elif args.method == "exact":
        verdict = check_consistency_exact(h, args.tol, EXACT_CAP)
    elif args.method == "sampled":
        verdict = check_consistency_sampled(h, args.samples, args.tol, args.seed)
    else:
        verdict = check_all(h, args.samples, args.tol, args.seed)
    _report(verdict)
    if args.point is not None:
        p = parse_init(args.point)
        if not isinstance(p, np.ndarray):
            raise UsageError("--point needs a joint distribution, e.g. 0,0.5,0,0.5")
        residual = point_consistency(h, p)
        holds = "holds" if residual <= args.tol else "fails"
        print(f"point {_vec(p)}: vector identity {holds}, residual {residual:.3e}")
        print(f"  H p^n       = {_vec(h_apply_power(h, p))}")
        print(f"  H R^(n-1) p = {_vec(h_apply_reduced(h, p))}")
    return _STATUS_EXIT[verdict.status]


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("model", help="model file (JSON)")
    common.add_argument(
        "--allow-substochastic",
        action="store_true",
        help="admit matrices whose columns do not sum to one",
    )
    common.add_argument(
        "--max-dim", type=int, default=None, help="dimension cap for assembled matrices (default 2^20)"
    )

    parser = _Parser(prog="stplds", description="Logical dynamic systems via the semi-tensor product.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="check a model file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("assemble", parents=[common], help="build the global transition matrix")
    p.add_argument("-o", "--out", help="CSV file for the global matrix")
    p.add_argument("--factors-dir", help="directory for the lifted per-node matrices")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("simulate", parents=[common], help="simulate a trajectory")
    p.add_argument("--mode", choices=["det", "independent", "conditional", "mc"], required=True)
    p.add_argument("--init", required=True, help="state index, joint vector, 'a,b;c,d' factors, or CSV path")
    p.add_argument("--steps", type=int, default=DEFAULT_T_MAX)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--stationary-tol", type=float, default=1e-9)
    p.add_argument("-o", "--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[common], help="L1 divergence between the two stochastic models")
    p.add_argument("--init", required=True, help="per-node distributions, e.g. '0.4,0.6;0.5,0.5'")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("-o", "--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", parents=[common], help="decide whether the two stochastic models agree")
    p.add_argument("--method", choices=["structural", "exact", "sampled", "all"], default="all")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--point", help="also evaluate both sides at this joint distribution")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.max_dim is not None:
            with dimension_cap(args.max_dim):
                return args.func(args)
        return args.func(args)
    except DimensionCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ModelError as exc:
        for problem in exc.problems:
            print(f"invalid: {problem}", file=sys.stderr)
        return EXIT_INVALID
    except (ModelFileError, UsageError, SimplexDriftError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
