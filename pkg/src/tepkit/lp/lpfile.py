"""Debug dump of a :class:`LinearProgram` in CPLEX LP text format."""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from .model import EQ, GE, LE, LinearProgram

_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _names(given, prefix, count):
    if given is None:
        return [f"{prefix}{i}" for i in range(count)]
    out = []
    for i, name in enumerate(given):
        name = _BAD.sub("_", str(name)) or f"{prefix}{i}"
        if name[0].isdigit() or name[0] in ".eE":
            name = f"{prefix}_{name}"
        out.append(name)
    return out


def _num(v: float) -> str:
    return repr(float(v))


def _expr(coefs, names) -> str:
    terms = []
    for j, a in coefs:
        sign = "-" if a < 0 else "+"
        terms.append(f"{sign} {_num(abs(a))} {names[j]}")
    if not terms:
        return "0 " + names[0] if names else "0"
    text = " ".join(terms)
    return text[2:] if text.startswith("+ ") else text


def format_lp(lp: LinearProgram, title: str = "tepkit") -> str:
    vnames = _names(lp.var_names, "x", lp.n)
    rnames = _names(lp.row_names, "c", lp.m)
    lines = [f"\\ {title}", "Minimize", " obj: " + _expr([(j, a) for j, a in enumerate(lp.c) if a != 0], vnames)]
    lines.append("Subject To")
    A = lp.A.tocsr()
    op = {LE: "<=", GE: ">=", EQ: "="}
    for i in range(lp.m):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        coefs = list(zip(A.indices[lo:hi], A.data[lo:hi]))
        lines.append(f" {rnames[i]}: {_expr(coefs, vnames)} {op[lp.sense[i]]} {_num(lp.b[i])}")
    lines.append("Bounds")
    for j in range(lp.n):
        l, u = lp.lower[j], lp.upper[j]
        if math.isinf(l) and math.isinf(u):
            lines.append(f" {vnames[j]} free")
        elif l == u:
            lines.append(f" {vnames[j]} = {_num(l)}")
        else:
            left = "-inf" if math.isinf(l) else _num(l)
            right = "+inf" if math.isinf(u) else _num(u)
            lines.append(f" {left} <= {vnames[j]} <= {right}")
    binaries = [vnames[j] for j in np.flatnonzero(lp.integer)]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {name}" for name in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(lp: LinearProgram, path, title: str = "tepkit") -> Path:
    path = Path(path)
    path.write_text(format_lp(lp, title))
    return path
