"""Empirical check that per-node solve time grows at most quadratically (with slack) in p_i.

Wall time is the median over repetitions at each p_i, fitted against p_i on
log-log axes; the fitted exponent must not exceed ``EXPONENT_BUDGET``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .conic import Method, build_node_problem
from .measurement import measure
from .network import Edge, LinkKind, Topology
from .rng import derive_seed
from .solver import SolverSettings, solve

EXPONENT_BUDGET = 2.6
MIN_SIZES = 4
MIN_SOLVES = 20


@dataclass
class ComplexityReport:
    status: str  # "pass", "fail" or "inconclusive"
    exponent: float
    budget: float
    median_time: dict = field(default_factory=dict)
    median_iterations: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def complexity_budget_check(trace, budget: float = EXPONENT_BUDGET) -> ComplexityReport:
    """``trace`` is an iterable of (p_i, iterations, wall_time) records."""
    by_p: dict = {}
    for p, iters, wall in trace:
        by_p.setdefault(int(p), []).append((int(iters), float(wall)))
    counts = {p: len(v) for p, v in sorted(by_p.items())}
    med_t = {p: float(np.median([w for _, w in v])) for p, v in sorted(by_p.items())}
    med_i = {p: float(np.median([i for i, _ in v])) for p, v in sorted(by_p.items())}
    thin = [p for p, c in counts.items() if c < MIN_SOLVES]
    if len(counts) < MIN_SIZES or thin:
        return ComplexityReport(
            "inconclusive", float("nan"), budget, med_t, med_i, counts,
            f"need >= {MIN_SIZES} distinct p_i with >= {MIN_SOLVES} solves each; "
            f"got {len(counts)} sizes, under-sampled: {thin}",
        )
    if any(t <= 0 for t in med_t.values()):
        return ComplexityReport("inconclusive", float("nan"), budget, med_t, med_i, counts,
                                "non-positive median wall time")
    ps = np.array(list(med_t))
    slope = float(np.polyfit(np.log(ps), np.log(list(med_t.values())), 1)[0])
    status = "pass" if slope <= budget else "fail"
    return ComplexityReport(status, slope, budget, med_t, med_i, counts,
                            f"fitted exponent {slope:.3f} vs budget {budget}")


def synthetic_instance(p: int, seed: int, g: float = 0.7, eta_l: float = 0.1, eta_n: float = 0.06,
                       side: float = 40.0):
    """A node in the middle of the square with ``p`` anchors scattered around it."""
    gen = np.random.default_rng(seed)
    node = gen.uniform(0.25 * side, 0.75 * side, 2)
    anchors = gen.uniform(0.0, side, (p, 2))
    kinds = gen.uniform(size=p) < g
    edges = [Edge(0, k + 1, LinkKind.LOS if los else LinkKind.NLOS, float(np.linalg.norm(a - node)))
             for k, (a, los) in enumerate(zip(anchors, kinds))]
    topo = Topology(np.vstack([node, anchors]), 1, tuple(edges), side, 2.0 * side)
    meas = measure(topo, eta_l, eta_n, seed)
    return build_node_problem([(a, meas[(0, k + 1)]) for k, a in enumerate(anchors)], g,
                              Method.MLN_SOCP, eta_l=eta_l, eta_n=eta_n)


def time_solves(sizes=(5, 10, 20, 40), repeats: int = MIN_SOLVES, seed: int = 0, solver=None,
                settings: SolverSettings | None = None) -> list:
    """(p_i, iterations, wall_time) for ``repeats`` fresh instances per size.

    ``solver`` maps a program to an object with an ``iterations`` attribute;
    it defaults to the interior-point solver and can be swapped for stubs.
    """
    solver = solver or (lambda prog: solve(prog, settings))
    out = []
    for p in sizes:
        for k in range(repeats):
            prog = synthetic_instance(p, derive_seed(seed, p, k))
            t0 = time.perf_counter()
            sol = solver(prog)
            out.append((p, getattr(sol, "iterations", 0), time.perf_counter() - t0))
    return out
