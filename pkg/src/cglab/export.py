"""Text exports: OFF mesh, vertex and field tables."""

from __future__ import annotations

import csv
import io

import numpy as np

__all__ = ["mesh_off", "vertex_csv", "field_csv", "key_value_text"]


def _fmt(x) -> str:
    return f"{x:.12e}"


def mesh_off(mesh) -> str:
    """OFF text with base-sphere positions; each vertex line carries a
    ``# sheet`` comment (-1 on ramification vertices)."""
    x = np.asarray(mesh.positions)
    t = np.asarray(mesh.triangles)
    out = ["OFF", f"# genus-{mesh.genus} cover of degree {mesh.degree}; positions on the base sphere",
           f"{len(x)} {len(t)} 0"]
    sheet = np.asarray(mesh.sheet)
    for p, s in zip(x, sheet):
        out.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])} # sheet {int(s)}")
    for a, b, c in t:
        out.append(f"3 {a} {b} {c}")
    return "\n".join(out) + "\n"


def vertex_csv(mesh) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["index", "chart", "re_z", "im_z", "re_w", "im_w", "sheet", "is_ramification"])
    for i, (c, z, w, s, r) in enumerate(zip(mesh.chart, mesh.z, mesh.w, mesh.sheet, mesh.is_ramification)):
        wr.writerow([i, int(c), _fmt(z.real), _fmt(z.imag), _fmt(w.real), _fmt(w.imag), int(s), int(bool(r))])
    return buf.getvalue()


def field_csv(fields: dict, columns=("alpha", "beta", "gamma", "kappa", "grad_phi_sq", "u", "f")) -> str:
    cols = [c for c in columns if c in fields]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["vertex"] + cols)
    n = len(fields[cols[0]])
    for i in range(n):
        wr.writerow([i] + [_fmt(float(fields[c][i])) for c in cols])
    return buf.getvalue()


def key_value_text(items) -> str:
    """``key = value`` lines in the given order."""
    return "".join(f"{k} = {v}\n" for k, v in items)
