"""Cramér-Rao bounds for range-based positioning.

Each link t carries the information rate

    lambda_t = g / sigma_t^2 + (1 - g) / gamma_t^2,
    sigma_t^2 = eta_l^2 d_t^2,   gamma_t^2 = (eta_l^2 + eta_n^2) d_t^2,

i.e. the LOS/NLOS mixture of the two Gaussian range models, and contributes
``lambda_t u_t u_t^T`` (``u_t`` the unit vector along the link) to the
Fisher information. The scalar bound reported everywhere is
``sqrt(trace(F^-1))``, in metres, directly comparable with an RMSE.

Two surface modes are offered:

``anchors``
    a single node at each grid point, ranging to the anchors only.
``network``
    a node at *every* grid point simultaneously, ranging to the anchors and
    to every other node within radio range; the bound at a point is its
    2x2 block of the inverse joint information matrix (cooperative bound).
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .network import AnchorPlacement, NetworkConfig, boundary_anchors


class SurfaceMode(str, enum.Enum):
    ANCHORS = "anchors"
    NETWORK = "network"


@dataclass(frozen=True)
class LinkParams:
    eta_l: float
    eta_n: float
    g: float

    def __post_init__(self):
        if self.eta_l < 0 or self.eta_n < 0:
            raise ValueError("noise scales must be non-negative")
        if not 0 <= self.g <= 1:
            raise ValueError("g must lie in [0, 1]")

    def rate(self, d):
        """Information rate of a link of length ``d`` (array-friendly)."""
        d2 = np.asarray(d, dtype=float) ** 2
        var_l = self.eta_l**2
        var_n = self.eta_l**2 + self.eta_n**2
        with np.errstate(divide="ignore", invalid="ignore"):
            los = self.g / (var_l * d2) if self.g > 0 else 0.0 * d2
            nlos = (1 - self.g) / (var_n * d2) if self.g < 1 else 0.0 * d2
        lam = los + nlos
        if not np.all(np.isfinite(lam)):
            raise ValueError("zero-variance link: information is unbounded")
        return lam


def fim(x, anchors, eta_l: float, eta_n: float, g: float) -> np.ndarray:
    """Fisher information of position ``x`` from ranges to ``anchors``."""
    x = np.asarray(x, dtype=float)
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    diff = x - anchors
    d = np.linalg.norm(diff, axis=1)
    if np.any(d == 0):
        raise ValueError("query point coincides with an anchor: bearing undefined")
    u = diff / d[:, None]
    lam = LinkParams(eta_l, eta_n, g).rate(d)
    F = (u * lam[:, None]).T @ u
    return 0.5 * (F + F.T)  # exactly symmetric regardless of summation order


def crlb_at(x, anchors, params: LinkParams) -> float:
    """sqrt(trace(F^-1)); ``inf`` where F is singular or x sits on an anchor."""
    try:
        F = fim(x, anchors, params.eta_l, params.eta_n, params.g)
    except ValueError as exc:
        if "coincides" in str(exc):
            return math.inf
        raise
    # relative test: F scales with 1/d^2, so an absolute threshold would be unit-dependent
    w = np.linalg.eigvalsh(F)
    if w[0] <= 1e-12 * max(w[-1], 1e-300):
        return math.inf
    return math.sqrt(np.trace(np.linalg.inv(F)))


@dataclass
class CrlbGrid:
    """Bound evaluated at ``(xs[i], ys[j]) -> values[i, j]``; ``inf`` marks excluded points."""

    spacing: float
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    anchors: np.ndarray
    params: LinkParams
    mode: SurfaceMode
    radio_range: float = math.inf
    meta: dict = field(default_factory=dict)

    @property
    def minimum(self) -> float:
        return float(np.min(self.values))

    @property
    def argmin(self) -> tuple[float, float]:
        """Location of the minimum; ties go to the first point in row-major order."""
        i, j = np.unravel_index(np.argmin(self.values), self.values.shape)
        return float(self.xs[i]), float(self.ys[j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "crlb"])
        for i, x in enumerate(self.xs):
            for j, y in enumerate(self.ys):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(self.values[i, j]))])
        return buf.getvalue()


def grid_axis(side: float, spacing: float) -> np.ndarray:
    if not spacing > 0:
        raise ValueError("grid spacing must be positive")
    n = round(side / spacing)
    if n < 1 or abs(n * spacing - side) > 1e-9 * side:
        raise ValueError(f"grid spacing {spacing} does not divide side {side}")
    return np.linspace(0.0, side, n + 1)


def surface_anchors(config: NetworkConfig) -> np.ndarray:
    if config.placement is not AnchorPlacement.BOUNDARY:
        raise ValueError("CRLB surfaces need boundary anchor placement")
    if config.dimension != 2:
        raise ValueError("CRLB surfaces are two-dimensional")
    return boundary_anchors(config.anchor_count, config.side)


def _anchor_surface(points, anchors, params, radio_range) -> np.ndarray:
    out = np.empty(len(points))
    for k, x in enumerate(points):
        d = np.linalg.norm(anchors - x, axis=1)
        out[k] = crlb_at(x, anchors[d <= radio_range], params) if np.any(d <= radio_range) else math.inf
    return out


def network_fim(points, anchors, params: LinkParams, radio_range: float) -> np.ndarray:
    """Joint information of all ``points`` (unknown) with known ``anchors``.

    Unknowns are interleaved as ``(x_0, y_0, x_1, y_1, ...)``.
    """
    n = len(points)
    diff = points[:, None, :] - points[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    linked = (d > 0) & (d <= radio_range)
    lam = np.zeros_like(d)
    lam[linked] = params.rate(d[linked])
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(linked[..., None], diff / d[..., None], 0.0)
    kxx = lam * u[..., 0] ** 2
    kxy = lam * u[..., 0] * u[..., 1]
    kyy = lam * u[..., 1] ** 2

    da = points[:, None, :] - anchors[None, :, :]
    dist_a = np.linalg.norm(da, axis=2)
    seen = dist_a <= radio_range
    lam_a = np.zeros_like(dist_a)
    lam_a[seen] = params.rate(dist_a[seen])
    ua = da / dist_a[..., None]
    axx = np.sum(lam_a * ua[..., 0] ** 2, axis=1)
    axy = np.sum(lam_a * ua[..., 0] * ua[..., 1], axis=1)
    ayy = np.sum(lam_a * ua[..., 1] ** 2, axis=1)

    F = np.empty((2 * n, 2 * n))
    for (a, b), k, own in (((0, 0), kxx, axx), ((0, 1), kxy, axy), ((1, 0), kxy, axy), ((1, 1), kyy, ayy)):
        block = -k
        block[np.diag_indices(n)] = k.sum(axis=1) + own
        F[a::2, b::2] = block
    return F


def _network_surface(points, anchors, params, radio_range) -> np.ndarray:
    on_anchor = np.any(np.linalg.norm(points[:, None, :] - anchors[None], axis=2) == 0, axis=1)
    free = points[~on_anchor]
    out = np.full(len(points), math.inf)
    F = network_fim(free, anchors, params, radio_range)
    try:
        L = np.linalg.cholesky(F)
    except np.linalg.LinAlgError:
        return out
    Linv = np.linalg.inv(L)
    # diag(F^-1) = column sums of Linv**2
    var = np.einsum("ij,ij->j", Linv, Linv)
    out[~on_anchor] = np.sqrt(var[0::2] + var[1::2])
    return out


def crlb_surface(config: NetworkConfig, grid_spacing: float = 1.0,
                 mode: SurfaceMode | str = SurfaceMode.NETWORK) -> CrlbGrid:
    """Bound over the grid ``[0, side]^2`` with boundary anchors from ``config``.

    Points on an anchor, or with a singular information matrix, hold ``inf``.
    """
    mode = SurfaceMode(mode)
    anchors = surface_anchors(config)
    params = LinkParams(config.eta_l, config.eta_n, config.los_prob)
    axis = grid_axis(config.side, grid_spacing)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([X.ravel(), Y.ravel()])
    if mode is SurfaceMode.ANCHORS:
        vals = _anchor_surface(points, anchors, params, config.radio_range)
    else:
        vals = _network_surface(points, anchors, params, config.radio_range)
    return CrlbGrid(grid_spacing, axis, axis.copy(), vals.reshape(X.shape), anchors, params, mode,
                    config.radio_range)
