"""File exporters and importers: VTK fields, CSV traces, JSON graphs.

All writers are atomic (temp file + rename) and byte-stable: the same
in-memory input always produces the same bytes, so outputs can be diffed
and checkpoint/resume runs can be verified byte-for-byte.  Floats are
printed with %.17g, enough digits to round-trip IEEE doubles exactly.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable, Sequence

import numpy as np

from .classify import label_from_tags
from .errors import IoError
from .grid import Field, GridGeometry
from .landscape import GraphEdge, GraphNode, LandscapeGraph
from .tensor import biaxiality, director

__all__ = [
    "atomic_write_text",
    "export_field_vtk",
    "export_landscape_json",
    "export_traces_csv",
    "import_field_vtk",
    "import_landscape_json",
]

_FMT = "%.17g"
_Q_NAMES = ("q1", "q2", "q3", "q4", "q5")


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file + rename in the same dir."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _fmt(x: float) -> str:
    return _FMT % float(x)


def _scalar_block(name: str, values: np.ndarray) -> list[str]:
    lines = [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    lines.extend(_fmt(v) for v in values)
    return lines


def export_field_vtk(f: Field, path: str) -> None:
    """Write a legacy ASCII VTK structured-points file.

    Point data: the five tensor components as scalars q1..q5, the
    director as a 3-vector (zero where the leading eigenvalue is
    degenerate), and the biaxiality parameter beta2.  Node order is
    x-fastest as the format requires; origin is (-1, -1, -h).
    """
    g = f.geom
    n = g.nx * g.ny * g.nz
    # (nx, ny, nz) C-ordered arrays flatten x-fastest under Fortran order.
    flat_q = np.empty((n, 5))
    for c in range(5):
        flat_q[:, c] = f.q[..., c].ravel(order="F")

    lines = [
        "# vtk DataFile Version 3.0",
        "nlcbox tensor field",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {g.nx} {g.ny} {g.nz}",
        f"ORIGIN {_fmt(-1.0)} {_fmt(-1.0)} {_fmt(-g.h)}",
        f"SPACING {_fmt(g.dx)} {_fmt(g.dx)} {_fmt(g.dx)}",
        f"POINT_DATA {n}",
    ]
    for c, name in enumerate(_Q_NAMES):
        lines.extend(_scalar_block(name, flat_q[:, c]))

    vecs = director(flat_q)
    vecs = np.where(np.isnan(vecs), 0.0, vecs)
    lines.append("VECTORS director double")
    lines.extend(" ".join(_fmt(c) for c in row) for row in vecs)

    lines.extend(_scalar_block("beta2", biaxiality(flat_q)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _tokens(path: str) -> Iterable[str]:
    with open(path) as fh:
        for line in fh:
            yield from line.split()


def import_field_vtk(path: str) -> Field:
    """Read a field written by :func:`export_field_vtk`.

    Only the five q-component scalar blocks are consumed; derived data
    (director, beta2) is skipped.  The round trip is bitwise exact.
    """
    try:
        toks = list(_tokens(path))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    def find(word: str) -> int:
        try:
            return toks.index(word)
        except ValueError:
            raise IoError(f"{path}: missing {word} declaration") from None

    try:
        i = find("DIMENSIONS")
        nx, ny, nz = (int(t) for t in toks[i + 1 : i + 4])
        i = find("ORIGIN")
        origin_z = float(toks[i + 3])
        i = find("SPACING")
        dx = float(toks[i + 1])
    except (ValueError, IndexError) as exc:
        raise IoError(f"{path}: malformed header: {exc}") from exc

    geom = GridGeometry(nx, ny, nz, dx, -origin_z)
    n = nx * ny * nz
    q = np.empty((nx, ny, nz, 5))
    for name, c in zip(_Q_NAMES, range(5)):
        i = find(name)
        vals = toks[i + 5 : i + 5 + n]  # skip "double 1 LOOKUP_TABLE default"
        if len(vals) < n:
            raise IoError(f"{path}: scalar block {name} truncated")
        try:
            flat = np.array([float(v) for v in vals])
        except ValueError as exc:
            raise IoError(f"{path}: bad value in block {name}: {exc}") from exc
        q[..., c] = flat.reshape((nx, ny, nz), order="F")
    return Field(geom, q)


def export_traces_csv(trace: Sequence, path: str, omega: float) -> None:
    """Write per-step solver records as CSV.

    Columns: step, energy, E_LdG, E_bc, grad_norm, dt.  Records store the
    total energy and the unweighted anchoring integral E_bc, so the
    elastic+bulk part is recovered as energy - omega * E_bc.
    """
    rows = ["step,energy,E_LdG,E_bc,grad_norm,dt"]
    for r in trace:
        e_ldg = r.energy - omega * r.e_bc
        rows.append(
            ",".join(
                (
                    str(int(r.step)),
                    _fmt(r.energy),
                    _fmt(e_ldg),
                    _fmt(r.e_bc),
                    _fmt(r.grad_norm),
                    _fmt(r.dt),
                )
            )
        )
    atomic_write_text(path, "\n".join(rows) + "\n")


def export_landscape_json(graph: LandscapeGraph, path: str) -> None:
    """Write the landscape graph as JSON, nodes sorted by energy."""
    payload = graph.as_dict()
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def import_landscape_json(path: str) -> LandscapeGraph:
    """Rebuild a landscape graph from its JSON export.

    Stored fields are not reloaded here; node ``field_ref`` entries keep
    pointing at the exported files.
    """
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoError(f"{path} is not valid JSON: {exc}") from exc

    graph = LandscapeGraph()
    try:
        for n in payload["nodes"]:
            tags = {}
            for key, tag in n["tags"].items():
                ax, side = key.split(",")
                tags[(int(ax), int(side))] = tag
            graph.nodes.append(
                GraphNode(
                    key=int(n["key"]),
                    checksum=n["checksum"],
                    energy=float(n["energy"]),
                    e_bc=float(n["e_bc"]),
                    index=None if n["index"] is None else int(n["index"]),
                    label=label_from_tags(tags),
                    params=n.get("params", {}),
                    field_ref=n.get("field_ref"),
                )
            )
        for e in payload["edges"]:
            graph.edges.append(
                GraphEdge(
                    parent=int(e["parent"]),
                    child=int(e["child"]),
                    direction=int(e["direction"]),
                    sign=int(e["sign"]),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise IoError(f"{path}: malformed landscape graph: {exc}") from exc
    return graph
