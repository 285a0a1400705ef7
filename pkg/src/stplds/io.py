"""Model files (JSON) and CSV output."""
from __future__ import annotations

import json
import os
from typing import Any, Sequence, TextIO

import numpy as np

from .model import ModelError, NetworkModel, from_rule_tables, to_description

FORMAT_VERSION = "1"


class ModelFileError(ValueError):
    """Malformed model file (syntax or schema)."""


def parse_model(text: str, allow_substochastic: bool = False) -> NetworkModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ModelFileError("top level must be a JSON object")
    if str(data.get("version")) != FORMAT_VERSION:
        raise ModelFileError(f"unsupported or missing version {data.get('version')!r}, expected \"1\"")
    if allow_substochastic:
        data = {**data, "allow_substochastic": True}
    return from_rule_tables(data)


def load_model(path: str | os.PathLike, allow_substochastic: bool = False) -> NetworkModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), allow_substochastic)


def dump_model(model: NetworkModel) -> str:
    return json.dumps(to_description(model), indent=2) + "\n"


def fmt(x: float) -> str:
    # shortest text that parses back to the same double
    return repr(float(x))


def write_csv(out: TextIO, header: Sequence[str] | None, rows, footer: Sequence[str] = ()) -> None:
    if header is not None:
        out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    for line in footer:
        out.write(f"# {line}\n")


def write_matrix_csv(out: TextIO, m) -> None:
    write_csv(out, None, np.asarray(m, dtype=float))


def read_csv(source: str | os.PathLike | TextIO) -> tuple[list[str] | None, np.ndarray]:
    """Read a numeric CSV, skipping ``#`` comment lines; a non-numeric first row is the header."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source.read().splitlines()
    lines = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    header = None
    if lines:
        first = lines[0].split(",")
        try:
            [float(v) for v in first]
        except ValueError:
            header, lines = first, lines[1:]
    rows = [[float(v) for v in ln.split(",")] for ln in lines]
    return header, np.array(rows, dtype=float)


def parse_init(value: str) -> Any:
    """Parse ``--init``: an integer state, ``a,b,...`` (joint), ``a,b;c,d`` (factors) or a CSV path.

    Returns an ``int``, a 1-D array, or a list of 1-D arrays.
    """
    if os.path.isfile(value):
        with open(value, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
        text = ";".join(lines)
    else:
        text = value.strip()
    if ";" in text:
        return [np.array([float(v) for v in part.split(",")]) for part in text.split(";")]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ValueError(f"cannot parse initial condition {value!r}") from None


__all__ = [
    "ModelError",
    "ModelFileError",
    "dump_model",
    "fmt",
    "load_model",
    "parse_init",
    "parse_model",
    "read_csv",
    "write_csv",
    "write_matrix_csv",
]
