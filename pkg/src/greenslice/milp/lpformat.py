"""CPLEX LP text export of a model and import of external solutions."""
from __future__ import annotations

import io
import math
import re

import numpy as np

from .model import MilpInstance
from .solver import INFEASIBLE, OPTIMAL, MilpSolution, _finish


def _terms(names, coefs) -> str:
    parts = []
    for name, c in zip(names, coefs):
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {abs(c):.12g} {name}")
    if not parts:
        return "0 " + names[0] if names else "0"
    if parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    # LP readers cap line length; continuation lines are allowed anywhere
    return "\n   ".join(" ".join(parts[i:i + 8]) for i in range(0, len(parts), 8))


def write_lp(model: MilpInstance) -> str:
    names = model.variable_names()
    c = model.objective_vector()
    A_eq, b_eq, A_ub, b_ub = model.constraints()
    ub = model.upper_bounds()
    out = io.StringIO()
    out.write(f"\\ weights alpha={model.weights[0]} beta={model.weights[1]} gamma={model.weights[2]}\n")
    out.write("Minimize\n obj: ")
    nz = np.flatnonzero(c)
    out.write(_terms([names[i] for i in nz], c[nz]) if len(nz) else f"0 {names[0]}")
    out.write("\nSubject To\n")
    for tag, A, b, op in (("e", A_eq, b_eq, "="), ("u", A_ub, b_ub, "<=")):
        A = A.tocsr()
        for r in range(A.shape[0]):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            cols, vals = A.indices[lo:hi], A.data[lo:hi]
            if not len(cols):
                continue
            out.write(f" {tag}{r}: {_terms([names[i] for i in cols], vals)} {op} {b[r]:.12g}\n")
    fixed = [names[i] for i in np.flatnonzero(ub == 0)]
    if fixed:
        out.write("Bounds\n")
        for name in fixed:
            out.write(f" {name} = 0\n")
    out.write("Binaries\n")
    for i in range(0, len(names), 8):
        out.write(" " + " ".join(names[i:i + 8]) + "\n")
    out.write("End\n")
    return out.getvalue()


_LINE = re.compile(r"^\s*([xyz]_[0-9_]+)\s+([-+0-9.eE]+)\s*$")


def read_solution(model: MilpInstance, text: str) -> MilpSolution:
    """Load ``name value`` lines produced by an external solver.

    Unlisted variables are zero; a file containing ``infeasible`` marks the
    model infeasible.
    """
    if re.search(r"\binfeasible\b", text, re.IGNORECASE):
        return MilpSolution(INFEASIBLE, math.inf)
    index = {n: i for i, n in enumerate(model.variable_names())}
    values = np.zeros(model.n_vars)
    for line in text.splitlines():
        m = _LINE.match(line)
        if m and m.group(1) in index:
            values[index[m.group(1)]] = round(float(m.group(2)))
    return _finish(model, values, OPTIMAL, 0.0)
