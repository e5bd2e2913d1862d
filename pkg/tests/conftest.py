import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from socploc.measurement import Measurement
from socploc.network import LinkKind

# property suites run at least a thousand generated cases each
settings.register_profile(
    "thorough",
    max_examples=1000,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
    derandomize=True,
)
settings.load_profile("thorough")


def link(distance, kind=LinkKind.LOS, eta_l=0.1, eta_n=0.06, corrected=None, r=0, t=1):
    """A measurement record with a chosen corrected distance (no sampling)."""
    corrected = distance if corrected is None else corrected
    mu = eta_n * distance if kind is LinkKind.NLOS else 0.0
    gamma_sq = (eta_l**2 + eta_n**2) * corrected**2 if kind is LinkKind.NLOS else None
    return Measurement(r, t, kind, corrected + mu, corrected, mu, eta_l**2 * corrected**2, gamma_sq)


def noisy_instance(rng, p, *, eta_l=0.1, eta_n=0.06, g=0.7, side=40.0, inside=True):
    """Anchors, truth and measurement records drawn like the simulator does."""
    anchors = rng.uniform(0.0, side, (p, 2))
    if inside and p >= 3:
        w = rng.dirichlet(np.ones(p))
        truth = w @ anchors
    else:
        truth = rng.uniform(0.0, side, 2)
    pairs = []
    for k, a in enumerate(anchors):
        d = float(np.linalg.norm(a - truth))
        los = rng.uniform() < g
        if los:
            raw = d + eta_l * d * rng.standard_normal()
            mu = 0.0
        else:
            mu = eta_n * d
            raw = d + mu * rng.standard_exponential() + eta_l * d * rng.standard_normal()
        corrected = max(raw - mu, 1e-3)
        kind = LinkKind.LOS if los else LinkKind.NLOS
        gamma_sq = (eta_l**2 + eta_n**2) * corrected**2 if not los else None
        pairs.append((a, Measurement(0, k + 1, kind, max(raw, 1e-3), corrected, mu,
                                     eta_l**2 * corrected**2, gamma_sq)))
    return anchors, truth, pairs


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance verdicts, echoed together at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
