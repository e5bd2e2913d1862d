"""Primal-dual interior-point solver for second-order cone programs.

Programs are taken in the stored form used by :mod:`socploc.conic`::

    maximize    c_obj^T x
    subject to  s = offset - A^T x  in  K = Q_{k_1} x ... x Q_{k_N}

with ``A`` of shape (n_vars, total cone dimension). The paired problem is::

    minimize    offset^T z
    subject to  A z = c_obj,  z in K

Both are iterated together with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step, starting from the least-squares point pushed into
the cone interior. The iteration itself lives in :mod:`socploc._kernel`.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernel


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverSettings:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 100
    step_fraction: float = 0.99

    def __post_init__(self):
        if not (self.gap_tol > 0 and self.feas_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")


@dataclass
class ConicSolution:
    """Result of :func:`solve`.

    ``x`` is the optimizer vector (length n_vars), ``slack`` the cone
    vector ``offset - A^T x`` and ``multiplier`` the paired variable ``z``.
    ``gap`` is ``z^T s / (1 + |c_obj^T x|)``; the residuals are the relative
    norms of the two linear feasibility conditions.
    """

    x: np.ndarray
    status: Status
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    slack: np.ndarray = field(repr=False)
    multiplier: np.ndarray = field(repr=False)
    objective: float = float("nan")
    trace: np.ndarray = field(default_factory=lambda: np.zeros((0, 5)), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def cone_violation(v, cones) -> np.ndarray:
    """max(||v_1..|| - v_0, 0) for each cone block of the stacked vector v."""
    v = np.asarray(v, dtype=float)
    dims = np.asarray(cones, dtype=np.intp)
    starts = np.concatenate(([0], np.cumsum(dims)[:-1]))
    tail = np.ones(v.size, dtype=bool)
    tail[starts] = False
    tail_norm = np.sqrt(np.add.reduceat(np.where(tail, v * v, 0.0), starts))
    return np.maximum(tail_norm - v[starts], 0.0)


def _iterate_trace_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "gap", "primal_residual", "dual_residual", "step"])
    for row in trace:
        writer.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
    return buf.getvalue()


def trace_csv(solution: ConicSolution) -> str:
    """Iterate trace as CSV text (iteration, gap, residuals, step length)."""
    return _iterate_trace_csv(solution.trace)


_STATUS = {
    _kernel.OPTIMAL: Status.OPTIMAL,
    _kernel.MAX_ITER: Status.MAX_ITER,
    _kernel.INFEASIBLE: Status.INFEASIBLE,
    _kernel.NUMERICAL_FAILURE: Status.NUMERICAL_FAILURE,
}


def solve_standard(A, c_obj, offset, cones, settings: SolverSettings | None = None) -> ConicSolution:
    """Solve ``max c_obj^T x  s.t.  offset - A^T x in K``.

    Rows of ``A`` that touch no cone are free variables; they are fixed at
    zero (or the program is reported infeasible if they carry objective
    weight, since the objective is then unbounded).
    """
    settings = settings or SolverSettings()
    A = np.asarray(A, dtype=float)
    c_obj = np.asarray(c_obj, dtype=float)
    offset = np.asarray(offset, dtype=float)
    dims = np.asarray(cones, dtype=np.int64)
    if dims.ndim != 1 or dims.size == 0 or np.any(dims < 1):
        raise ValueError("cone dimensions must be a non-empty list of positive integers")
    m, n = A.shape
    if n != dims.sum() or offset.shape != (n,) or c_obj.shape != (m,):
        raise ValueError(
            f"shape mismatch: A {A.shape}, c_obj {c_obj.shape}, offset {offset.shape}, cone total {dims.sum()}"
        )
    starts = np.concatenate(([0], np.cumsum(dims)[:-1])).astype(np.int64)
    e = np.zeros(n)
    e[starts] = 1.0

    rows, cols = np.nonzero(A)
    active = np.zeros(m, dtype=bool)
    active[rows] = True
    x_full = np.zeros(m)
    if np.any(c_obj[~active] != 0.0):
        return ConicSolution(x_full, Status.INFEASIBLE, np.inf, np.inf, np.inf, 0, slack=offset.copy(), multiplier=e)
    # column-compressed copy of the active rows: column j lists (row, value) pairs
    order = np.argsort(cols, kind="stable")
    rows, cols = rows[order], cols[order]
    remap = np.cumsum(active) - 1
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=n), out=indptr[1:])
    x, s, z, code, iters, trace = _kernel.ipm(
        indptr, remap[rows].astype(np.int64), A[rows, cols], int(active.sum()),
        c_obj[active], offset, starts, dims,
        settings.gap_tol, settings.feas_tol, settings.max_iter, settings.step_fraction,
    )
    x_full[active] = x
    last = trace[-1]
    return ConicSolution(
        x_full, _STATUS[code], float(last[1]), float(last[2]), float(last[3]), int(iters),
        slack=offset - A.T @ x_full, multiplier=z, objective=float(c_obj @ x_full),
        trace=trace,
    )


def solve(program, settings: SolverSettings | None = None) -> ConicSolution:
    """Solve a :class:`~socploc.conic.ConicProgram`."""
    return solve_standard(program.A, program.c_obj, program.offset, program.cones, settings)


def residuals(program, x) -> tuple[float, float, float]:
    """(primal, cone_violation, objective) for a candidate optimizer vector.

    ``primal`` and ``cone_violation`` coincide for this inequality-only
    form: the largest ``||A_k^T x + c_k|| - (b_k^T x + d_k)`` over cone
    blocks, clamped at zero. ``objective`` is the minimized quantity
    ``-c_obj^T x`` (the epigraph variable for localization programs).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (program.A.shape[0],):
        raise ValueError(f"expected vector of length {program.A.shape[0]}, got {x.shape}")
    slack = program.offset - program.A.T @ x
    viol = float(cone_violation(slack, program.cones).max())
    return viol, viol, float(-(program.c_obj @ x))
