"""Closed-loop trace and statistics files.

Traces are comma-separated text: a header row, one row per executed
control step (step index, state, input, mission weights, sample-cost mean
and standard deviation, wall seconds), and a final ``#``-prefixed
metadata line carrying the termination reason, final state, and the
config hash.  Numbers are written with 17 significant digits, which
round-trips float64 exactly.  Files are written to a temp file and
renamed into place, so readers never observe partial output.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .sim import ClosedLoopTrace, StepRecord, Termination

_META_FIELDS = ("scenario", "seed", "group", "config_hash")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_columns(n_x: int, n_u: int, n_missions: int) -> list:
    return (
        ["step"]
        + [f"x{i}" for i in range(n_x)]
        + [f"u{i}" for i in range(n_u)]
        + [f"alpha{i}" for i in range(n_missions)]
        + ["cost_mean", "cost_std", "step_seconds"]
    )


def write_trace(trace: ClosedLoopTrace, path: str) -> None:
    """Serialize one closed-loop trace; see the module docstring."""
    n_x = trace.final_state.shape[0]
    if trace.records:
        n_u = trace.records[0].inp.shape[0]
        n_missions = trace.records[0].alpha.shape[0]
    else:
        n_u = int(trace.meta.get("n_u", 2))
        n_missions = int(trace.meta.get("n_missions", 1))
    lines = [",".join(trace_columns(n_x, n_u, n_missions))]
    for rec in trace.records:
        fields = (
            [str(rec.step)]
            + [_fmt(v) for v in rec.state]
            + [_fmt(v) for v in rec.inp]
            + [_fmt(v) for v in rec.alpha]
            + [_fmt(rec.cost_mean), _fmt(rec.cost_std), _fmt(rec.seconds)]
        )
        lines.append(",".join(fields))
    meta_tokens = [
        f"termination={trace.termination.label()}",
        f"steps={trace.termination.steps}",
        "final_state=" + "|".join(_fmt(v) for v in trace.final_state),
    ]
    for key in _META_FIELDS:
        if key in trace.meta:
            meta_tokens.append(f"{key}={trace.meta[key]}")
    lines.append("# " + " ".join(meta_tokens))
    try:
        _atomic_write(path, "\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def read_trace(path: str) -> ClosedLoopTrace:
    """Parse a trace file back into a ClosedLoopTrace.

    Only the serialized payload comes back: step records, termination,
    final state, and the metadata tokens (as strings/ints in ``meta``).
    In-memory diagnostics are not part of the file format.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or "," not in lines[0]:
        raise ValueError(f"{path}: not a trace file (missing header)")
    header = lines[0].split(",")
    n_x = sum(1 for c in header if c.startswith("x") and c[1:].isdigit())
    n_u = sum(1 for c in header if c.startswith("u") and c[1:].isdigit())
    n_missions = sum(1 for c in header if c.startswith("alpha"))

    meta_line = lines[-1]
    if not meta_line.startswith("#"):
        raise ValueError(f"{path}: missing metadata line")
    meta: dict = {}
    for token in meta_line[1:].split():
        key, _, value = token.partition("=")
        meta[key] = value

    records = []
    for line in lines[1:-1]:
        parts = line.split(",")
        expected = 1 + n_x + n_u + n_missions + 3
        if len(parts) != expected:
            raise ValueError(f"{path}: row has {len(parts)} fields, expected {expected}")
        vals = [float(v) for v in parts[1:]]
        records.append(
            StepRecord(
                step=int(parts[0]),
                state=np.array(vals[:n_x]),
                inp=np.array(vals[n_x : n_x + n_u]),
                alpha=np.array(vals[n_x + n_u : n_x + n_u + n_missions]),
                cost_mean=vals[-3],
                cost_std=vals[-2],
                seconds=vals[-1],
            )
        )

    termination = Termination.from_label(meta.pop("termination"), int(meta.pop("steps")))
    final_state = np.array([float(v) for v in meta.pop("final_state").split("|")])
    if "seed" in meta:
        meta["seed"] = int(meta["seed"])
    meta["n_missions"] = n_missions
    return ClosedLoopTrace(records, termination, final_state, meta)


def write_stats(rows: list, path: str) -> None:
    """Write analyze() rows as a comma-separated table (17g floats)."""
    if not rows:
        raise ValueError("no stats rows to write")
    columns = list(rows[0].keys())
    lines = [",".join(columns)]
    for row in rows:
        fields = []
        for col in columns:
            val = row.get(col, "")
            fields.append(_fmt(val) if isinstance(val, float) else str(val))
        lines.append(",".join(fields))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_stats(path: str) -> list:
    """Parse a stats table back into a list of dicts (numbers as floats)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    columns = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        row = {}
        for col, tok in zip(columns, line.split(",")):
            try:
                row[col] = int(tok) if tok.isdigit() or (
                    tok.startswith("-") and tok[1:].isdigit()
                ) else float(tok)
            except ValueError:
                row[col] = tok
        rows.append(row)
    return rows
