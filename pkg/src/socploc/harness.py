"""Monte Carlo evaluation: deploy, measure, localize every unknown node, score.

Nodes are localized one at a time from their neighbouring anchors only
(unknown-unknown links carry no constraints). Nodes without any anchor in
range are counted as unlocalizable and excluded from error statistics.

Seeds: trial ``k`` of cell ``c`` uses ``derive_seed(base, c, k)``; the
deployment and the measurement draws share that seed through separate
named substreams, so both methods see identical networks and ranges.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .conic import Method, build_node_problem, extract_position
from .crlb import grid_axis
from .measurement import measure
from .network import (AnchorPlacement, NetworkConfig, Topology, anchor_neighbor_map, boundary_anchors,
                      build_edges, deploy_uniform)
from .rng import derive_seed
from .solver import SolverSettings, Status, solve

#: settings for bulk experiments; positions agree with a 1e-9 solve to ~1e-4 m
EXPERIMENT_SETTINGS = SolverSettings(gap_tol=1e-6, feas_tol=1e-6)


@dataclass
class NodeResult:
    node: int
    p_i: int
    truth: np.ndarray
    estimate: np.ndarray
    error: float
    status: Status
    iterations: int
    objective: float


@dataclass
class TrialResult:
    seed: int
    method: Method
    nodes: list = field(default_factory=list)
    unlocalizable: int = 0
    n_unknown: int = 0
    solve_time: float = 0.0

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.nodes])

    @property
    def empty(self) -> bool:
        return not self.nodes

    @property
    def failures(self) -> int:
        return sum(r.status is Status.NUMERICAL_FAILURE for r in self.nodes)


def localize_node(topology: Topology, measurements, r: int, neighbors, g, method, eta_l, eta_n,
                  settings=EXPERIMENT_SETTINGS) -> NodeResult:
    pairs = [(topology.positions[t], measurements[(r, t)]) for t, _ in neighbors]
    program = build_node_problem(pairs, g, method, eta_l=eta_l, eta_n=eta_n)
    sol = solve(program, settings)
    est = extract_position(program, sol.x)
    truth = topology.positions[r]
    return NodeResult(r, len(pairs), truth, est, float(np.linalg.norm(est - truth)),
                      sol.status, sol.iterations, -sol.objective)


def localize_topology(topology: Topology, measurements, g, method, eta_l, eta_n, seed=0,
                      settings=EXPERIMENT_SETTINGS) -> TrialResult:
    method = Method(method)
    result = TrialResult(seed=seed, method=method, n_unknown=topology.n_unknown)
    t0 = time.perf_counter()
    for r, nbrs in anchor_neighbor_map(topology).items():
        if not nbrs:
            result.unlocalizable += 1
            continue
        result.nodes.append(localize_node(topology, measurements, r, nbrs, g, method, eta_l, eta_n, settings))
    result.solve_time = time.perf_counter() - t0
    return result


def run_trial(config: NetworkConfig, seed: int, method, settings=EXPERIMENT_SETTINGS) -> TrialResult:
    topology = deploy_uniform(config, seed)
    meas = measure(topology, config.eta_l, config.eta_n, seed, anchors_only=True)
    return localize_topology(topology, meas, config.los_prob, method, config.eta_l, config.eta_n, seed, settings)


def run_trial_pair(config: NetworkConfig, seed: int, methods=tuple(Method), settings=EXPERIMENT_SETTINGS) -> dict:
    """Same network and ranges, every method."""
    topology = deploy_uniform(config, seed)
    meas = measure(topology, config.eta_l, config.eta_n, seed, anchors_only=True)
    return {
        Method(m): localize_topology(topology, meas, config.los_prob, m, config.eta_l, config.eta_n, seed, settings)
        for m in methods
    }


# ---------------------------------------------------------------------------
# sweeps and reports

MIN_TRIALS = 30
DEFAULT_TRIALS = 100
METHODS = (Method.MLN_SOCP, Method.D_SOCP)


@dataclass
class CellSummary:
    cell: str
    method: str
    params: dict
    trials: int
    mean: float
    std: float
    nodes: int
    unlocalizable: int
    failures: int


@dataclass
class ExperimentReport:
    """Aggregates of one experiment.

    ``raw`` holds one row per localized node: (cell, trial, node, p_i, error,
    method); every ``CellSummary.mean`` is the plain mean of the matching rows.
    """

    name: str
    trials: int
    base_seed: int
    cells: list = field(default_factory=list)
    raw: list = field(default_factory=list, repr=False)
    cdf: dict = field(default_factory=dict, repr=False)
    surface: dict = field(default_factory=dict, repr=False)
    diagnostics: dict = field(default_factory=dict)
    status: str = "ok"

    def summary(self, cell: str, method) -> CellSummary:
        method = Method(method).value
        for c in self.cells:
            if c.cell == cell and c.method == method:
                return c
        raise KeyError((cell, method))

    def mean(self, cell: str, method) -> float:
        return self.summary(cell, method).mean

    def cell_ids(self) -> list:
        return list(dict.fromkeys(c.cell for c in self.cells))

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "status": self.status,
            "cells": [asdict(c) for c in self.cells],
            "diagnostics": self.diagnostics,
        }
        if self.surface:
            out["surface"] = {m: {k: v for k, v in s.items() if k in ("minimum", "argmin", "spacing")}
                              for m, s in self.surface.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def raw_csv(self) -> str:
        return _csv(["cell", "trial", "node", "p_i", "error", "method"], self.raw)

    def cdf_csv(self) -> str:
        rows = []
        for cell, per_method in self.cdf.items():
            for method, (levels, values) in per_method.items():
                rows.extend((cell, method, lv, v) for lv, v in zip(levels, values))
        return _csv(["cell", "method", "error_level", "cdf"], rows)

    def surface_csv(self) -> str:
        rows = []
        for method, s in self.surface.items():
            for i, x in enumerate(s["xs"]):
                for j, y in enumerate(s["ys"]):
                    rows.append((method, x, y, s["values"][i, j]))
        return _csv(["method", "x", "y", "rmse"], rows)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def _summarize(cell, params, method, trial_results, trials) -> CellSummary:
    errs = np.concatenate([t.errors for t in trial_results]) if trial_results else np.zeros(0)
    return CellSummary(
        cell=cell,
        method=Method(method).value,
        params=params,
        trials=trials,
        mean=float(errs.mean()) if errs.size else math.nan,
        std=float(errs.std(ddof=1)) if errs.size > 1 else math.nan,
        nodes=int(errs.size),
        unlocalizable=sum(t.unlocalizable for t in trial_results),
        failures=sum(t.failures for t in trial_results),
    )


def run_sweep(name: str, cells, trials: int, base_seed: int = 0, methods=METHODS,
              settings=EXPERIMENT_SETTINGS, progress=None) -> ExperimentReport:
    """Run every (cell, trial) with every method on shared networks and ranges.

    ``cells`` is a sequence of ``(cell_id, params, NetworkConfig)``. Trial
    ``k`` of cell ``c`` uses seed ``derive_seed(base_seed, c, k)``.
    """
    report = ExperimentReport(name, int(trials), int(base_seed))
    for cell, params, config in cells:
        per_method = {Method(m): [] for m in methods}
        for k in range(trials):
            seed = derive_seed(base_seed, cell, k)
            for method, res in run_trial_pair(config, seed, methods, settings).items():
                per_method[method].append(res)
                report.raw.extend((cell, k, r.node, r.p_i, r.error, method.value) for r in res.nodes)
        for method, results in per_method.items():
            report.cells.append(_summarize(cell, params, method, results, trials))
        if progress:
            progress(cell)
    return report


def _require_trials(trials, minimum=MIN_TRIALS):
    if trials < minimum:
        raise ValueError(f"trials must be >= {minimum}, got {trials}")


TABLE1_CONDITIONS = (
    ("N_d=40,eta=(0.1,0.06)", 40.0, 0.1, 0.06),
    ("N_d=80,eta=(0.1,0.06)", 80.0, 0.1, 0.06),
    ("N_d=40,eta=(0.2,0.15)", 40.0, 0.2, 0.15),
    ("N_d=40,eta=(0.3,0.25)", 40.0, 0.3, 0.25),
)
TABLE1_RANGES = (("R=sqrt2*N_d", math.sqrt(2.0)), ("R=N_d", 1.0))


def table1_cells():
    for cond, side, eta_l, eta_n in TABLE1_CONDITIONS:
        for r_label, factor in TABLE1_RANGES:
            config = NetworkConfig(side=side, nodes=100, anchor_fraction=0.3, radio_range=factor * side,
                                   los_prob=0.7, eta_l=eta_l, eta_n=eta_n)
            params = {"condition": cond, "range": r_label, "side": side, "radio_range": factor * side,
                      "eta_l": eta_l, "eta_n": eta_n}
            yield f"{cond}|{r_label}", params, config


def run_table1(trials: int = DEFAULT_TRIALS, base_seed: int = 0, progress=None) -> ExperimentReport:
    """Mean error for both methods over R x (N_d, noise) at p = 0.3, g = 0.7, 100 nodes."""
    _require_trials(trials)
    report = run_sweep("table1", list(table1_cells()), trials, base_seed, progress=progress)
    grid = {}
    for c in report.cells:
        grid.setdefault(c.method, {}).setdefault(c.params["range"], {})[c.params["condition"]] = c.mean
    report.diagnostics["grid"] = grid
    return report


TABLE2_LOS = (0.95, 0.7, 0.4, 0.1)
TABLE2_SIZES = (50, 100, 150, 200, 250, 300)


def table2_cells(sizes=TABLE2_SIZES, los_probs=TABLE2_LOS):
    for g in los_probs:
        for n in sizes:
            config = NetworkConfig(side=40.0, nodes=n, anchor_fraction=0.3, radio_range=40.0, los_prob=g)
            yield f"g={g}|nodes={n}", {"los_prob": g, "nodes": n}, config


def run_table2(trials: int = DEFAULT_TRIALS, base_seed: int = 0, sizes=TABLE2_SIZES, los_probs=TABLE2_LOS,
               progress=None) -> ExperimentReport:
    """Mean error over LOS probability x node count at p = 0.3, R = N_d = 40."""
    _require_trials(trials)
    report = run_sweep("table2", list(table2_cells(sizes, los_probs)), trials, base_seed, progress=progress)
    grid = {}
    for c in report.cells:
        grid.setdefault(c.method, {}).setdefault(str(c.params["los_prob"]), {})[str(c.params["nodes"])] = c.mean
    report.diagnostics["grid"] = grid
    return report


def empirical_cdf(samples, levels) -> np.ndarray:
    s = np.sort(np.asarray(samples, dtype=float))
    return np.searchsorted(s, levels, side="right") / max(s.size, 1)


CDF_P_VALUES = (0.1, 0.2, 0.3)
CDF_LEVELS = 201


def run_cdf(trials: int = DEFAULT_TRIALS, p_values=CDF_P_VALUES, base_seed: int = 0, progress=None) -> ExperimentReport:
    """Pooled per-node error CDFs for each anchor fraction (g = 0.7, 100 nodes, R = N_d = 40).

    Both methods are evaluated on one shared set of error levels per cell,
    evenly spaced from 0 to the largest pooled error.
    """
    if not all(0 < p <= 1 for p in p_values):
        raise ValueError("anchor fractions must lie in (0, 1]")
    cells = [(f"p={p}", {"anchor_fraction": p}, NetworkConfig(anchor_fraction=p)) for p in p_values]
    report = run_sweep("cdf", cells, trials, base_seed, progress=progress)
    for cell, _, _ in cells:
        pooled = {m: np.array([row[4] for row in report.raw if row[0] == cell and row[5] == m])
                  for m in (x.value for x in METHODS)}
        top = max((v.max() for v in pooled.values() if v.size), default=0.0)
        levels = np.linspace(0.0, top, CDF_LEVELS)
        report.cdf[cell] = {m: (levels, empirical_cdf(v, levels)) for m, v in pooled.items()}
    return report


def figure1_config() -> NetworkConfig:
    """4 perimeter anchors (p = 0.0025 of 1600) in a 40 m square, R = N_d."""
    return NetworkConfig(side=40.0, nodes=1600, anchor_fraction=0.0025, radio_range=40.0, los_prob=0.7,
                         eta_l=0.1, eta_n=0.06, placement=AnchorPlacement.BOUNDARY)


def run_rmse_surface(config: NetworkConfig | None = None, trials: int = DEFAULT_TRIALS, grid_spacing: float = 2.0,
                     base_seed: int = 0, methods=METHODS, settings=EXPERIMENT_SETTINGS,
                     progress=None) -> ExperimentReport:
    """RMSE of a single unknown node placed at each grid point, per method.

    Realization ``k`` at grid point ``j`` uses ``derive_seed(base_seed, "rmse", j, k)``
    for link kinds and ranges. Only points strictly inside the square are
    evaluated (unknowns are deployed inside the anchors' hull); perimeter
    points and points hearing no anchor are NaN.
    """
    config = config or figure1_config()
    if config.placement is not AnchorPlacement.BOUNDARY or config.dimension != 2:
        raise ValueError("the RMSE surface uses the 2-D boundary-anchor setup")
    anchors = boundary_anchors(config.anchor_count, config.side)
    axis = grid_axis(config.side, grid_spacing)
    methods = [Method(m) for m in methods]
    sq = {m: np.full((axis.size, axis.size), np.nan) for m in methods}
    report = ExperimentReport("rmse-surface", int(trials), int(base_seed))
    j = -1
    for ix, x in enumerate(axis):
        for iy, y in enumerate(axis):
            j += 1
            point = np.array([x, y])
            if not np.all((point > 0) & (point < config.side)):
                continue
            positions = np.vstack([point, anchors])
            acc = {m: [] for m in methods}
            for k in range(trials):
                seed = derive_seed(base_seed, "rmse", j, k)
                topo = Topology(positions.copy(), 1, build_edges(positions, config.radio_range, config.los_prob, seed),
                                config.side, config.radio_range)
                meas = measure(topo, config.eta_l, config.eta_n, seed, anchors_only=True)
                nbrs = anchor_neighbor_map(topo)[0]
                if not nbrs:
                    break
                for m in methods:
                    res = localize_node(topo, meas, 0, nbrs, config.los_prob, m, config.eta_l, config.eta_n, settings)
                    acc[m].append(res.error)
                    report.raw.append((f"{x:g},{y:g}", k, 0, res.p_i, res.error, m.value))
            for m in methods:
                if acc[m]:
                    sq[m][ix, iy] = math.sqrt(np.mean(np.square(acc[m])))
        if progress:
            progress(ix)
    for m in methods:
        vals = sq[m]
        i, k = np.unravel_index(np.nanargmin(vals), vals.shape)
        report.surface[m.value] = {"xs": axis, "ys": axis, "values": vals, "spacing": grid_spacing,
                                   "minimum": float(vals[i, k]), "argmin": (float(axis[i]), float(axis[k]))}
    report.diagnostics["anchors"] = anchors.tolist()
    return report


# R sweep: geometric around the Table 1 ranges, N_d * 2^(k/2) for k = -3..1
SCALING_RANGE_FACTORS = tuple(2.0 ** (k / 2.0) for k in range(-3, 2))
SCALING_BAND = (0.2, 1.1)
SCALING_UNKNOWNS = 70
SCALING_ANCHORS = (10, 40)
SCALING_SIDE_FACTORS = (1.0, 2.0)
NOISE_FLOOR = 1e-3


def _fit_exponent(radii, means) -> float:
    return float(np.polyfit(np.log(radii), np.log(means), 1)[0])


def run_scaling_check(trials: int = 50, base_seed: int = 0, config: NetworkConfig | None = None,
                      range_factors=SCALING_RANGE_FACTORS, anchor_counts=SCALING_ANCHORS,
                      gate_method=Method.MLN_SOCP, progress=None) -> ExperimentReport:
    """Error growth with radio range, and the effect of more anchors.

    R sweeps ``side * range_factors`` at fixed side and anchor count; the
    slope of log(mean error) on log(R) for ``gate_method`` must lie in
    ``SCALING_BAND``. Separately the anchor count is raised from
    ``anchor_counts[0]`` to ``anchor_counts[1]`` with the unknown count fixed
    at ``SCALING_UNKNOWNS`` and R = side; the mean error must not increase.
    Finally the side is scaled by ``SCALING_SIDE_FACTORS`` (R = side, node and
    anchor counts fixed); the mean error must not decrease.

    The status is "inconclusive" when the data cannot support a fit: a
    noise-free configuration (the law describes noise-driven error; what
    remains is relaxation slack outside the anchors' hull), fewer than four
    ranges, all means below ``NOISE_FLOOR``, or a decrease in mean error
    along R larger than two standard errors.
    """
    _require_trials(trials, 1)
    base = config or NetworkConfig()
    gate_method = Method(gate_method)
    radii = [base.side * f for f in range_factors]
    r_cells = [(f"R={r:.4g}", {"radio_range": r}, replace(base, radio_range=r)) for r in radii]
    a_cells = []
    for a in anchor_counts:
        n = SCALING_UNKNOWNS + a
        cfg = replace(base, nodes=n, anchor_fraction=a / n, radio_range=base.side)
        a_cells.append((f"anchors={a}", {"anchors": a, "nodes": n}, cfg))
    s_cells = [(f"N_d={base.side * f:.4g}", {"side": base.side * f},
                replace(base, side=base.side * f, radio_range=base.side * f)) for f in SCALING_SIDE_FACTORS]
    report = run_sweep("scaling", r_cells + a_cells + s_cells, trials, base_seed, progress=progress)

    diag = {"radii": radii, "band": list(SCALING_BAND), "gate_method": gate_method.value}
    for m in METHODS:
        rows = [report.summary(c, m) for c, _, _ in r_cells]
        means = np.array([r.mean for r in rows])
        se = np.array([r.std / math.sqrt(max(r.nodes, 1)) for r in rows])
        drop = [(radii[i], radii[i + 1]) for i in range(len(rows) - 1)
                if means[i + 1] < means[i] - 2.0 * math.hypot(se[i], se[i + 1])]
        diag[m.value] = {
            "means": means.tolist(),
            "std_errors": se.tolist(),
            "exponent": _fit_exponent(radii, means) if np.all(means > 0) else math.nan,
            "decreases": drop,
            "anchor_means": [report.mean(c, m) for c, _, _ in a_cells],
            "side_means": [report.mean(c, m) for c, _, _ in s_cells],
        }
    g = diag[gate_method.value]
    anchors_ok = all(diag[m.value]["anchor_means"][-1] <= diag[m.value]["anchor_means"][0] for m in METHODS)
    diag["anchors_non_increasing"] = anchors_ok
    side_ok = all(np.all(np.diff(diag[m.value]["side_means"]) >= 0) for m in METHODS)
    diag["side_non_decreasing"] = side_ok
    if base.eta_l == 0 and base.eta_n == 0:
        status, why = "inconclusive", "noise-free configuration: no noise-driven error to scale"
    elif len(radii) < 4:
        status, why = "inconclusive", "fewer than four ranges"
    elif np.max(g["means"]) < NOISE_FLOOR:
        status, why = "inconclusive", f"all mean errors below {NOISE_FLOOR} m: nothing to scale"
    elif g["decreases"]:
        status, why = "inconclusive", f"mean error drops beyond sampling noise between R pairs {g['decreases']}"
    else:
        lo, hi = SCALING_BAND
        in_band = lo <= g["exponent"] <= hi
        status = "pass" if in_band and anchors_ok and side_ok else "fail"
        why = f"exponent {g['exponent']:.3f} {'in' if in_band else 'outside'} [{lo}, {hi}]; " \
              f"anchor quadrupling {'does not increase' if anchors_ok else 'increases'} error; " \
              f"larger side {'does not decrease' if side_ok else 'decreases'} error"
    diag["reason"] = why
    report.status = status
    report.diagnostics.update(diag)
    return report
