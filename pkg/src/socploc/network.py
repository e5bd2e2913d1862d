"""Sensor network topology: nodes, anchors and LOS/NLOS-labelled edges.

Node indices are 0-based. Unknown nodes occupy ``0 .. m_u-1`` and anchors
``m_u .. n-1``, mirroring the unknowns-first ordering of the node set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import rng


class ConfigError(ValueError):
    """Invalid network configuration."""


class LinkKind(str, Enum):
    LOS = "LOS"
    NLOS = "NLOS"


class AnchorPlacement(str, Enum):
    RANDOM = "random-uniform"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class NetworkConfig:
    side: float = 40.0
    nodes: int = 100
    anchor_fraction: float = 0.3
    radio_range: float = 40.0
    los_prob: float = 0.7
    eta_l: float = 0.1
    eta_n: float = 0.06
    dimension: int = 2
    placement: AnchorPlacement = AnchorPlacement.RANDOM

    def __post_init__(self):
        object.__setattr__(self, "placement", AnchorPlacement(self.placement))
        if self.dimension not in (2, 3):
            raise ConfigError(f"dimension must be 2 or 3, got {self.dimension}")
        checks = [
            ("side", self.side > 0 and math.isfinite(self.side), "must be positive"),
            ("radio_range", self.radio_range > 0, "must be positive"),
            ("nodes", int(self.nodes) == self.nodes and self.nodes >= 1, "must be a positive integer"),
            ("anchor_fraction", 0 <= self.anchor_fraction <= 1, "must lie in [0, 1]"),
            ("los_prob", 0 <= self.los_prob <= 1, "must lie in [0, 1]"),
            ("eta_l", self.eta_l >= 0, "must be non-negative"),
            ("eta_n", self.eta_n >= 0, "must be non-negative"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{name} {msg}")

    @property
    def anchor_count(self) -> int:
        """round(p * n), half away from zero, at least 1."""
        return max(1, int(math.floor(self.anchor_fraction * self.nodes + 0.5)))

    @property
    def unknown_count(self) -> int:
        return self.nodes - self.anchor_count


@dataclass(frozen=True)
class Edge:
    r: int
    t: int
    kind: LinkKind
    true_distance: float


@dataclass(frozen=True, eq=False)
class Topology:
    """Immutable deployment. ``positions`` has shape (n, d); rows ``m_u:`` are anchors."""

    positions: np.ndarray
    n_unknown: int
    edges: tuple
    side: float
    radio_range: float

    def __post_init__(self):
        self.positions.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[0]

    @property
    def unknowns(self) -> np.ndarray:
        return self.positions[: self.n_unknown]

    @property
    def anchors(self) -> np.ndarray:
        return self.positions[self.n_unknown :]

    def is_anchor(self, i: int) -> bool:
        return self.n_unknown <= i < self.n_nodes

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (
            self.n_unknown == other.n_unknown
            and self.side == other.side
            and self.radio_range == other.radio_range
            and np.array_equal(self.positions, other.positions)
            and self.edges == other.edges
        )

    def to_json(self) -> str:
        doc = {
            "dimension": self.dimension,
            "side": self.side,
            "radio_range": self.radio_range,
            "nodes": [
                {"id": i, "role": "anchor" if self.is_anchor(i) else "unknown",
                 "coords": [float(c) for c in p]}
                for i, p in enumerate(self.positions)
            ],
            "edges": [
                {"r": e.r, "t": e.t, "kind": e.kind.value, "true_distance": e.true_distance}
                for e in self.edges
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        doc = json.loads(text)
        nodes = sorted(doc["nodes"], key=lambda n: n["id"])
        positions = np.array([n["coords"] for n in nodes], dtype=float).reshape(len(nodes), doc["dimension"])
        n_unknown = sum(1 for n in nodes if n["role"] == "unknown")
        edges = tuple(Edge(e["r"], e["t"], LinkKind(e["kind"]), float(e["true_distance"])) for e in doc["edges"])
        return cls(positions, n_unknown, edges, float(doc["side"]), float(doc["radio_range"]))


def boundary_anchors(count: int, side: float) -> np.ndarray:
    """Equal arc-length points on the square perimeter, starting at (0, 0), counter-clockwise."""
    perimeter = 4.0 * side
    out = np.empty((count, 2))
    for k in range(count):
        s = k * perimeter / count
        leg, along = divmod(s, side)
        leg = int(leg)
        if leg == 0:
            out[k] = (along, 0.0)
        elif leg == 1:
            out[k] = (side, along)
        elif leg == 2:
            out[k] = (side - along, side)
        else:
            out[k] = (0.0, side - along)
    return out


def build_edges(positions: np.ndarray, radio_range: float, los_prob: float, seed: int) -> tuple:
    """Edges for all pairs within range, each LOS with probability ``los_prob``.

    The LOS draw for edge (r, t) is slot t of node r's "link-kind" substream.
    """
    n = positions.shape[0]
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    edges = []
    for r in range(n - 1):
        targets = np.nonzero(dist[r, r + 1 :] <= radio_range)[0] + r + 1
        if targets.size == 0:
            continue
        u = rng.edge_block(seed, "link-kind", r, n, lambda g, k: g.random(k))
        for t in targets:
            kind = LinkKind.LOS if u[t] < los_prob else LinkKind.NLOS
            edges.append(Edge(int(r), int(t), kind, float(dist[r, t])))
    return tuple(edges)


def deploy_uniform(config: NetworkConfig, seed: int) -> Topology:
    """Random deployment over [0, side]^d.

    Node i draws its coordinates from its own "position" substream. With
    boundary placement the anchors sit on the square's perimeter
    (:func:`boundary_anchors`) and only unknowns are sampled.
    """
    n_a = config.anchor_count
    if config.anchor_fraction == 0 or n_a < 1:
        raise ConfigError("configuration yields zero anchors")
    n = config.nodes
    d = config.dimension
    m_u = n - n_a
    positions = np.empty((n, d))
    sampled = range(n) if config.placement is AnchorPlacement.RANDOM else range(m_u)
    for i in sampled:
        positions[i] = rng.stream(seed, "position", i).uniform(0.0, config.side, d)
    if config.placement is AnchorPlacement.BOUNDARY:
        if d != 2:
            raise ConfigError("boundary anchor placement is defined for d = 2 only")
        positions[m_u:] = boundary_anchors(n_a, config.side)
    edges = build_edges(positions, config.radio_range, config.los_prob, seed)
    return Topology(positions, m_u, edges, float(config.side), float(config.radio_range))


def neighbor_anchors(topology: Topology, r: int) -> list:
    """Anchors sharing an edge with unknown node ``r``, ascending by anchor index."""
    if not 0 <= r < topology.n_unknown:
        raise ValueError(f"node {r} is not an unknown node")
    out = [(e.t, e) for e in topology.edges if e.r == r and topology.is_anchor(e.t)]
    return sorted(out, key=lambda item: item[0])


def anchor_neighbor_map(topology: Topology) -> dict:
    """neighbor_anchors for every unknown node in one pass over the edge list."""
    out = {r: [] for r in range(topology.n_unknown)}
    for e in topology.edges:
        if e.r < topology.n_unknown and topology.is_anchor(e.t):
            out[e.r].append((e.t, e))
    for v in out.values():
        v.sort(key=lambda item: item[0])
    return out
