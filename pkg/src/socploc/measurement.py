"""Noisy range measurements on LOS and NLOS links.

Simulation scales noise and bias with the *true* length of the link:
``w ~ N(0, (eta_l d)^2)`` on every link and ``o ~ Exp(mean eta_n d)`` on
NLOS links. The estimator-side variances recorded with each measurement use
the *measured* (bias-corrected) distance, since that is all an estimator
can see.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .network import Edge, LinkKind, Topology

#: corrected distances below this are clamped to it (metres)
RANGE_FLOOR = 1e-3


@dataclass(frozen=True)
class Measurement:
    r: int
    t: int
    kind: LinkKind
    raw: float
    corrected: float
    mu: float
    sigma_sq: float
    gamma_sq: float | None = None
    clamped: bool = False


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    items: dict
    seed: int
    eta_l: float
    eta_n: float
    clamped_count: int = 0

    def __getitem__(self, key) -> Measurement:
        return self.items[key]

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items.values())

    def __eq__(self, other):
        return isinstance(other, MeasurementSet) and self.items == other.items and self.seed == other.seed

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "t", "kind", "raw", "corrected", "mu", "sigma_sq", "gamma_sq"])
        for m in self.items.values():
            w.writerow([m.r, m.t, m.kind.value, repr(m.raw), repr(m.corrected), repr(m.mu),
                        repr(m.sigma_sq), "" if m.gamma_sq is None else repr(m.gamma_sq)])
        return buf.getvalue()


def _finish(edge, kind, raw, mu, eta_l, eta_n) -> Measurement:
    corrected = raw - mu
    clamped = corrected < RANGE_FLOOR
    if clamped:
        corrected = RANGE_FLOOR
        raw = max(raw, RANGE_FLOOR)
    sigma_sq = eta_l**2 * corrected**2
    gamma_sq = (eta_l**2 + eta_n**2) * corrected**2 if kind is LinkKind.NLOS else None
    return Measurement(edge.r, edge.t, kind, float(raw), float(corrected), float(mu),
                       float(sigma_sq), None if gamma_sq is None else float(gamma_sq), clamped)


def sample_los(edge: Edge, eta_l: float, generator: np.random.Generator | None, *, noise: float | None = None) -> Measurement:
    """LOS range ``d + w``. ``noise`` overrides the standard-normal draw."""
    if edge.kind is not LinkKind.LOS:
        raise ValueError("sample_los needs a LOS edge")
    eps = generator.standard_normal() if noise is None else noise
    raw = edge.true_distance + eta_l * edge.true_distance * eps
    return _finish(edge, LinkKind.LOS, raw, 0.0, eta_l, 0.0)


def sample_nlos(edge: Edge, eta_l: float, eta_n: float, generator: np.random.Generator | None, *,
                noise: float | None = None, bias: float | None = None) -> Measurement:
    """NLOS range ``d + o + w`` with the mean bias removed in ``corrected``.

    ``noise`` overrides the standard-normal draw and ``bias`` the
    unit-mean exponential draw.
    """
    if edge.kind is not LinkKind.NLOS:
        raise ValueError("sample_nlos needs an NLOS edge")
    d = edge.true_distance
    mu = eta_n * d
    eps = generator.standard_normal() if noise is None else noise
    e = generator.standard_exponential() if bias is None else bias
    raw = d + mu * e + eta_l * d * eps
    return _finish(edge, LinkKind.NLOS, raw, mu, eta_l, eta_n)


def measure(topology: Topology, eta_l: float, eta_n: float, seed: int, *, anchors_only: bool = False) -> MeasurementSet:
    """One measurement per edge.

    Edge (r, t) reads slot t of node r's "noise" and "bias" substreams.
    ``anchors_only`` skips unknown-unknown edges (they never enter the
    non-cooperative estimator) without changing any other edge's values.
    """
    n = topology.n_nodes
    items = {}
    blocks = {}
    clamped = 0
    for e in topology.edges:
        if anchors_only and not topology.is_anchor(e.t):
            continue
        if e.r not in blocks:
            blocks[e.r] = (
                rng.edge_block(seed, "noise", e.r, n, lambda g, k: g.standard_normal(k)),
                rng.edge_block(seed, "bias", e.r, n, lambda g, k: g.standard_exponential(k)),
            )
        normal, expo = blocks[e.r]
        if e.kind is LinkKind.LOS:
            m = sample_los(e, eta_l, None, noise=normal[e.t])
        else:
            m = sample_nlos(e, eta_l, eta_n, None, noise=normal[e.t], bias=expo[e.t])
        clamped += m.clamped
        items[(e.r, e.t)] = m
    return MeasurementSet(items, int(seed), float(eta_l), float(eta_n), clamped)


def estimator_weights(m: Measurement, g: float, eta_l: float, eta_n: float) -> tuple[float, float]:
    """(sqrt(g / sigma^2), sqrt((1 - g) / gamma^2)) evaluated at the corrected distance.

    Zero variance gives an infinite weight.
    """
    d = m.corrected
    if not d > 0:
        raise ValueError("corrected measurement must be positive")
    var_l = eta_l**2 * d**2
    var_n = (eta_l**2 + eta_n**2) * d**2
    w_los = math.sqrt(g / var_l) if var_l > 0 else (math.inf if g > 0 else 0.0)
    w_nlos = math.sqrt((1 - g) / var_n) if var_n > 0 else (math.inf if g < 1 else 0.0)
    return w_los, w_nlos
