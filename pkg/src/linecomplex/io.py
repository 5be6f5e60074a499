"""Serialization: graph and tree JSON, DOT, CSV, all written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from .planar import EmbeddedGraph

FORMAT_VERSION = "linecomplex/1"


def _default(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def dumps(obj, compact: bool = False) -> str:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    if compact:
        return json.dumps(obj, default=_default, sort_keys=True, separators=(",", ":")) + "\n"
    return json.dumps(obj, default=_default, sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


def atomic_write(path, data: str | bytes) -> Path:
    """Write via a temporary file in the target directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj, compact: bool = False) -> Path:
    return atomic_write(path, dumps(obj, compact))


def csv_text(rows: list[dict], columns: list[str] | None = None) -> str:
    if not rows and not columns:
        return ""
    columns = columns or list(rows[0])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _cell(row[k]) for k in columns})
    return buf.getvalue()


def _cell(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return f"{v:.12g}"
    return v


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    return atomic_write(path, csv_text(rows, columns))


# -- graphs ---------------------------------------------------------------------------


def graph_to_json(g: EmbeddedGraph) -> dict:
    return {
        "format": FORMAT_VERSION,
        "n_vertices": g.n_vertices,
        "n_edges": g.n_edges,
        "rot_ptr": g.rot_ptr.tolist(),
        "rot_half": g.rot_half.tolist(),
        "parity": g.parity.tolist(),
        "boundary_marks": sorted(g.boundary_marks),
    }


def graph_from_json(obj: dict) -> EmbeddedGraph:
    if obj.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported graph format {obj.get('format')!r}")
    return EmbeddedGraph.from_csr(
        np.asarray(obj["rot_ptr"]), np.asarray(obj["rot_half"]), np.asarray(obj["parity"]), obj["boundary_marks"]
    )


def read_graph(path) -> EmbeddedGraph:
    return graph_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def graph_to_dot(g: EmbeddedGraph, name: str = "Gamma", labels: dict[int, str] | None = None) -> str:
    """Undirected DOT multigraph; circles and crosses get distinct shapes."""
    lines = [f"graph {name} {{", "  node [width=0.15, height=0.15, label=\"\"];"]
    boundary = g.boundary_vertices
    for v in range(g.n_vertices):
        shape = "circle" if g.parity[v] else "box"
        extra = ", color=red" if v in boundary else ""
        lab = f', xlabel="{labels[v]}"' if labels and v in labels else ""
        lines.append(f"  {v} [shape={shape}{extra}{lab}];")
    tail = g.origin[0::2].tolist()
    head = g.origin[1::2].tolist()
    for e, (u, v) in enumerate(zip(tail, head)):
        lines.append(f"  {u} -- {v} [id=e{e}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_to_dot(tree) -> str:
    lines = ["graph T {"]
    for u in range(tree.n_nodes):
        style = ", style=bold" if tree.is_ray[u] else ""
        lines.append(f'  {u} [label="{tree.name(u)}"{style}];')
    for u in range(tree.n_nodes):
        p = int(tree.parent[u])
        if p >= 0:
            lines.append(f"  {p} -- {u};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def gnuplot_text(columns: list[str], rows: list[list]) -> str:
    """Whitespace-separated data block with a commented header."""
    out = ["# " + " ".join(columns)]
    for row in rows:
        out.append(" ".join(f"{x:.12g}" if isinstance(x, float) else str(x) for x in row))
    return "\n".join(out) + "\n"
