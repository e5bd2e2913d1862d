"""Per-node epigraph SOCP in SeDuMi-style standard form.

For an unknown node with ``p`` neighbouring anchors the optimizer vector is
laid out as (2-D case)::

    [x_r, y_r, x_1, y_1, ..., x_p, y_p, q_1..q_p, z_1..z_p, y_1..y_p, V]

of length ``5p + 3``. The anchor-coordinate slots are carried for layout
compatibility only; no constraint touches them. Every constraint is a
Lorentz cone ``||A_k^T x + c_k|| <= b_k^T x + d_k`` and the stacked program
is stored as

* ``A``: shape (n_vars, total cone dim). Column ``j`` holds minus the
  coefficients of ``x`` in slack coordinate ``j``, so that
  ``slack = offset - A.T @ x``.
* ``c_obj``: maximized objective, ``-e_V`` (i.e. V is minimized).
* ``offset``: stacked ``[d_k; c_k]`` blocks.
* ``cones``: ``[2p+1, 2 (x 2p), 3 (x p)]``.

Cone blocks, in order: ``||(q_1, z_1, ..., q_p, z_p)|| <= V``; the LOS
family ``|y_k - d_k| <= (sigma_k / sqrt(g)) q_k``; the NLOS family
``|y_k - d_k| <= (gamma_k / sqrt(1-g)) z_k``; and ``||x_r - a_k|| <= y_k``.
A link only feeds the family matching its kind. The other family's cone
for that link is kept (so dimensions never depend on link kinds) but
reduces to ``q_k >= -1`` (resp. ``z_k``), which never binds since the
epigraph drives q_k to 0; the unit offset keeps the cone strictly interior
at the optimum.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .measurement import Measurement
from .network import LinkKind

#: per-length noise floor applied to estimator weights when a variance is zero
WEIGHT_ETA_FLOOR = 1e-3


class Method(str, enum.Enum):
    MLN_SOCP = "mln-socp"
    D_SOCP = "d-socp"


class UnlocalizableError(ValueError):
    """Node has no neighbouring anchors."""


@dataclass(eq=False)
class ConicProgram:
    A: np.ndarray
    c_obj: np.ndarray
    offset: np.ndarray
    cones: list
    p_i: int
    dim: int
    method: Method
    anchors: np.ndarray
    distances: np.ndarray
    coef_los: np.ndarray  # inf marks an inactive LOS cone
    coef_nlos: np.ndarray  # inf marks an inactive NLOS cone
    n_eq: int = 0
    var_layout: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.A.shape[0]

    def dump(self) -> str:
        """Text dump: dimensions, cone list, objective, offset and A row by row."""
        out = io.StringIO()
        out.write(f"n_vars {self.n_vars}\n")
        out.write(f"cone_dim {self.A.shape[1]}\n")
        out.write(f"n_eq {self.n_eq}\n")
        out.write("cones " + " ".join(str(k) for k in self.cones) + "\n")
        out.write("objective " + " ".join(repr(float(v)) for v in self.c_obj) + "\n")
        out.write("offset " + " ".join(repr(float(v)) for v in self.offset) + "\n")
        for i, row in enumerate(self.A):
            out.write(f"A[{i}] " + " ".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()


def layout(p: int, dim: int = 2) -> dict:
    """Index map of the optimizer vector."""
    q0 = dim + dim * p
    return {
        "position": np.arange(dim),
        "vestigial": np.arange(dim, q0),
        "q": np.arange(q0, q0 + p),
        "z": np.arange(q0 + p, q0 + 2 * p),
        "y": np.arange(q0 + 2 * p, q0 + 3 * p),
        "V": q0 + 3 * p,
        "n_vars": q0 + 3 * p + 1,
    }


def expected_cones(p: int, dim: int = 2) -> list:
    return [2 * p + 1] + [2] * (2 * p) + [dim + 1] * p


def link_coefficients(meas: Measurement, g: float, eta_l: float, eta_n: float, method: Method):
    """(distance, LOS coefficient, NLOS coefficient) entering the cone blocks.

    The coefficient multiplies q_k (z_k) in the cone's scalar part; it is
    the reciprocal of the estimator weight. ``inf`` means the cone is
    inactive for this link.
    """
    if method is Method.D_SOCP:
        return meas.raw, 1.0, math.inf
    d = meas.corrected
    el = max(eta_l, WEIGHT_ETA_FLOOR)
    if meas.kind is LinkKind.LOS:
        coef = el / math.sqrt(g) * d if g > 0 else math.inf
        return d, coef, math.inf
    coef = math.sqrt(el**2 + eta_n**2) / math.sqrt(1.0 - g) * d if g < 1 else math.inf
    return d, math.inf, coef


def build_node_problem(anchors, g: float, method: Method | str = Method.MLN_SOCP, *,
                       eta_l: float, eta_n: float) -> ConicProgram:
    """Assemble the epigraph SOCP for one unknown node.

    ``anchors`` is a sequence of ``(position, measurement)`` pairs.
    """
    method = Method(method)
    anchors = list(anchors)
    p = len(anchors)
    if p == 0:
        raise UnlocalizableError("node has no neighbouring anchors")
    pos = np.array([np.asarray(a, dtype=float) for a, _ in anchors])
    dim = pos.shape[1]
    if not np.all(np.isfinite(pos)):
        raise ValueError("non-finite anchor position")
    dist = np.empty(p)
    c_los = np.empty(p)
    c_nlos = np.empty(p)
    for k, (_, m) in enumerate(anchors):
        dist[k], c_los[k], c_nlos[k] = link_coefficients(m, g, eta_l, eta_n, method)
    if not np.all(np.isfinite(dist)) or np.any(dist <= 0):
        raise ValueError("measurements must be finite and positive")

    lay = layout(p, dim)
    n = lay["n_vars"]
    q, z, y, V = lay["q"], lay["z"], lay["y"], lay["V"]
    cones = expected_cones(p, dim)
    total = sum(cones)
    M = np.zeros((n, total))  # coefficients before the global sign flip
    C = np.zeros(total)
    k = np.arange(p)

    # ||U|| <= V with U = (q_1, z_1, q_2, z_2, ...)
    M[V, 0] = 1.0
    M[q, 1 + 2 * k] = 1.0
    M[z, 2 + 2 * k] = 1.0
    # LOS family then NLOS family, one 2-cone per link each
    for base, coefs, slot in ((2 * p + 1, c_los, q), (4 * p + 1, c_nlos, z)):
        heads = base + 2 * k
        on = np.isfinite(coefs)
        M[slot, heads] = np.where(on, coefs, 1.0)
        M[y[on], heads[on] + 1] = 1.0
        C[heads[on] + 1] = -dist[on]
        C[heads[~on]] = 1.0
    # ||x_r - a_k|| <= y_k
    heads = 6 * p + 1 + (dim + 1) * k
    M[y, heads] = 1.0
    for j in range(dim):
        M[j, heads + 1 + j] = 1.0
        C[heads + 1 + j] = 0.0 - pos[:, j]  # no signed zeros

    c_obj = np.zeros(n)
    c_obj[V] = -1.0
    return ConicProgram(
        A=0.0 - M, c_obj=c_obj, offset=C, cones=cones, p_i=p, dim=dim, method=method,
        anchors=pos, distances=dist, coef_los=c_los, coef_nlos=c_nlos, var_layout=lay,
    )


def extract_position(program: ConicProgram, solution) -> np.ndarray:
    x = np.asarray(solution, dtype=float)
    if x.shape != (program.n_vars,):
        raise ValueError(f"solution length {x.shape} does not match n_vars={program.n_vars}")
    return x[: program.dim].copy()


def link_weights(program: ConicProgram) -> np.ndarray:
    """Effective per-link weight (reciprocal of the active coefficient)."""
    coef = np.minimum(program.coef_los, program.coef_nlos)
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(coef), 1.0 / coef, 0.0)


def weighted_objective(position, anchors, distances, weights) -> float:
    """sum_k w_k^2 (||x - a_k|| - d_k)^2, the approximate-ML cost."""
    r = np.linalg.norm(np.asarray(anchors) - np.asarray(position), axis=1) - np.asarray(distances)
    return float(np.sum((np.asarray(weights) * r) ** 2))


def feasible_point(program: ConicProgram, position) -> np.ndarray:
    """Feasible optimizer vector with ``x_r = position`` and tight auxiliaries.

    ``y_k = ||x_r - a_k||``, q/z at their smallest admissible values and
    ``V = ||U||``; hence V equals the square root of
    :func:`weighted_objective` at ``position``.
    """
    lay = program.var_layout
    x = np.zeros(program.n_vars)
    position = np.asarray(position, dtype=float)
    x[lay["position"]] = position
    yk = np.linalg.norm(program.anchors - position, axis=1)
    x[lay["y"]] = yk
    resid = np.abs(yk - program.distances)
    with np.errstate(invalid="ignore", divide="ignore"):
        x[lay["q"]] = np.where(np.isfinite(program.coef_los), resid / program.coef_los, 0.0)
        x[lay["z"]] = np.where(np.isfinite(program.coef_nlos), resid / program.coef_nlos, 0.0)
    x[lay["V"]] = np.linalg.norm(np.concatenate([x[lay["q"]], x[lay["z"]]]))
    return x


def relaxation_bound(program: ConicProgram, true_position) -> float:
    """sqrt of the approximate-ML cost at ``true_position``; an upper bound on V*."""
    return math.sqrt(weighted_objective(true_position, program.anchors, program.distances, link_weights(program)))


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def add(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def __str__(self):
        return "\n".join(f"[{'ok' if ok else 'FAIL'}] {name}: {detail}" for name, ok, detail in self.checks)


def _one_hot(column, index, value=None) -> bool:
    nz = np.flatnonzero(column)
    if nz.size != 1 or nz[0] != index:
        return False
    return value is None or column[index] == value


def validate_assembly(program: ConicProgram) -> ValidationReport:
    """Check dimensions, cone list and the indicator structure of every block."""
    rep = ValidationReport()
    p, dim = program.p_i, program.dim
    lay = layout(p, dim)
    A = program.A
    cones = list(program.cones)
    want = expected_cones(p, dim)
    rep.add("n_vars", A.shape[0] == lay["n_vars"], f"{A.shape[0]} vs {lay['n_vars']}")
    rep.add("cone count", len(cones) == 3 * p + 1, f"{len(cones)} vs {3 * p + 1}")
    rep.add("cone list", cones == want, f"{cones} vs {want}")
    total = sum(cones)
    rep.add("total cone dim", A.shape[1] == total == program.offset.size,
            f"A cols {A.shape[1]}, offset {program.offset.size}, cones {total}")
    rep.add("equality constraints", program.n_eq == 0, str(program.n_eq))
    obj = np.zeros(lay["n_vars"])
    obj[lay["V"]] = -1.0
    rep.add("objective", program.c_obj.shape == obj.shape and np.array_equal(program.c_obj, obj), "c_obj = -e_V")
    if not rep.passed:
        return rep

    vest = lay["vestigial"]
    rep.add("vestigial rows zero", not np.any(A[vest]), f"{vest.size} anchor-coordinate slots")

    q, z, y, V = lay["q"], lay["z"], lay["y"], lay["V"]
    ok = _one_hot(A[:, 0], V, -1.0) and not np.any(program.offset[: 2 * p + 1])
    for k in range(p):
        ok &= _one_hot(A[:, 1 + 2 * k], q[k], -1.0) and _one_hot(A[:, 2 + 2 * k], z[k], -1.0)
    rep.add("epigraph block", ok, "V over interleaved (q_k, z_k)")

    col = 2 * p + 1
    for name, slot, coefs in (("LOS block", q, program.coef_los), ("NLOS block", z, program.coef_nlos)):
        ok = True
        for k in range(p):
            active = math.isfinite(coefs[k])
            head = A[:, col]
            ok &= _one_hot(head, slot[k]) and head[slot[k]] < 0
            if active:
                ok &= _one_hot(A[:, col + 1], y[k], -1.0) and program.offset[col + 1] == -program.distances[k]
            else:
                ok &= not np.any(A[:, col + 1]) and program.offset[col] == 1.0 and program.offset[col + 1] == 0
            if active:
                ok &= program.offset[col] == 0
            col += 2
        rep.add(name, ok, "one indicator per column")
    ok = True
    for k in range(p):
        ok &= _one_hot(A[:, col], y[k], -1.0) and program.offset[col] == 0
        for j in range(dim):
            ok &= _one_hot(A[:, col + 1 + j], j, -1.0)
        ok &= np.array_equal(program.offset[col + 1 : col + 1 + dim], -program.anchors[k])
        col += dim + 1
    rep.add("range block", ok, "||x_r - a_k|| <= y_k")
    return rep
