import json
import math

import numpy as np
import pytest
from scipy.spatial import Delaunay

from socploc.conic import Method
from socploc.harness import (empirical_cdf, figure1_config, localize_node, run_cdf, run_rmse_surface,
                             run_scaling_check, run_sweep, run_table1, run_table2, run_trial, run_trial_pair,
                             table1_cells, table2_cells)
from socploc.network import NetworkConfig, Topology, anchor_neighbor_map, build_edges, deploy_uniform

from conftest import link


def test_trial_is_deterministic():
    cfg = NetworkConfig()
    a, b = run_trial(cfg, 42, Method.MLN_SOCP), run_trial(cfg, 42, Method.MLN_SOCP)
    assert np.array_equal(a.errors, b.errors) and a.unlocalizable == b.unlocalizable
    assert not np.array_equal(a.errors, run_trial(cfg, 43, Method.MLN_SOCP).errors)


def test_pair_shares_the_network():
    cfg = NetworkConfig()
    pair = run_trial_pair(cfg, 7)
    assert np.array_equal(pair[Method.MLN_SOCP].errors, run_trial(cfg, 7, Method.MLN_SOCP).errors)
    assert [r.node for r in pair[Method.MLN_SOCP].nodes] == [r.node for r in pair[Method.D_SOCP].nodes]


def test_noiseless_recovery_inside_hull():
    cfg = NetworkConfig(eta_l=0.0, eta_n=0.0, radio_range=60.0)
    checked = 0
    for seed in range(3):
        hull = Delaunay(deploy_uniform(cfg, seed).anchors)
        for r in run_trial(cfg, seed, Method.MLN_SOCP).nodes:
            if hull.find_simplex(r.truth) >= 0:
                assert r.error <= 1e-3
                checked += 1
    assert checked >= 100


def test_methods_agree_under_unit_weighting():
    # g = 1, all links LOS with eta_l * d = 1: both assemblies coincide
    positions = np.array([[20.0, 20.0], [30.0, 20.0], [20.0, 30.0], [10.0, 20.0], [20.0, 10.0]])
    topo = Topology(positions, 1, build_edges(positions, 40.0, 1.0, 0), 40.0, 40.0)
    nbrs = anchor_neighbor_map(topo)[0]
    meas = {(0, t): link(10.0, t=t) for t in range(1, 5)}
    out = [localize_node(topo, meas, 0, nbrs, 1.0, m, 0.1, 0.06) for m in Method]
    assert out[0].error == out[1].error
    assert np.array_equal(out[0].estimate, out[1].estimate)


def test_unlocalizable_nodes_are_counted():
    res = run_trial(NetworkConfig(radio_range=0.01, nodes=20), 1, Method.MLN_SOCP)
    assert res.empty and res.unlocalizable == res.n_unknown == 14


def test_cell_means_recompute_from_raw():
    cells = list(table1_cells())[:2]
    rep = run_sweep("t", cells, trials=3, base_seed=5)
    for c in rep.cells:
        errs = [row[4] for row in rep.raw if row[0] == c.cell and row[5] == c.method]
        assert c.nodes == len(errs)
        assert c.mean == pytest.approx(float(np.mean(errs)), rel=1e-12)
        assert all(e >= 0 for e in errs)
    again = run_sweep("t", cells, trials=3, base_seed=5)
    assert again.to_json() == rep.to_json() and again.raw_csv() == rep.raw_csv()


def test_report_serialization():
    rep = run_sweep("t", list(table2_cells((50,), (0.7,))), trials=2, base_seed=1)
    data = json.loads(rep.to_json())
    assert data["name"] == "t" and len(data["cells"]) == 2
    assert rep.raw_csv().splitlines()[0] == "cell,trial,node,p_i,error,method"
    assert rep.cell_ids() == ["g=0.7|nodes=50"]


def test_sweep_grids_match_the_tables():
    assert len(list(table1_cells())) == 8
    assert len(list(table2_cells())) == 24


@pytest.mark.parametrize("runner", [run_table1, run_table2])
def test_trial_minimum(runner):
    with pytest.raises(ValueError):
        runner(trials=10)


def test_empirical_cdf_axioms():
    s = np.array([0.5, 1.0, 1.0, 3.0])
    levels = np.linspace(0, 3, 13)
    f = empirical_cdf(s, levels)
    assert f[0] == 0.0 and f[-1] == 1.0 and np.all(np.diff(f) >= 0)
    assert empirical_cdf(s, [1.0])[0] == 0.75


def test_cdf_report_and_dkw_stability():
    small = run_cdf(trials=6, p_values=(0.3,), base_seed=2)
    big = run_cdf(trials=12, p_values=(0.3,), base_seed=2)
    for rep in (small, big):
        for levels, values in rep.cdf["p=0.3"].values():
            assert values[0] >= 0 and values[-1] == 1.0 and np.all(np.diff(values) >= 0)
    for m in ("mln-socp", "d-socp"):
        n_small = small.summary("p=0.3", m).nodes
        n_big = big.summary("p=0.3", m).nodes
        band = math.sqrt(math.log(2 / 0.05) / (2 * n_small)) + math.sqrt(math.log(2 / 0.05) / (2 * n_big))
        levels = small.cdf["p=0.3"][m][0]
        diff = np.abs(small.cdf["p=0.3"][m][1] - empirical_cdf(
            [row[4] for row in big.raw if row[5] == m], levels))
        assert diff.max() < 2 * band
    with pytest.raises(ValueError):
        run_cdf(trials=1, p_values=(0.0,))


def test_rmse_surface_small_grid():
    rep = run_rmse_surface(figure1_config(), trials=8, grid_spacing=10.0, base_seed=3)
    for m in ("mln-socp", "d-socp"):
        s = rep.surface[m]
        vals = s["values"]
        assert np.all(np.isnan(vals[0])) and np.all(np.isnan(vals[:, -1]))  # perimeter not evaluated
        inner = vals[1:-1, 1:-1]
        assert np.all(inner >= 0) and np.all(np.isfinite(inner))
        assert 0 < s["argmin"][0] < 40 and 0 < s["argmin"][1] < 40
    assert rep.surface_csv().splitlines()[0] == "method,x,y,rmse"


def test_scaling_check_zero_noise_is_inconclusive():
    rep = run_scaling_check(trials=1, config=NetworkConfig(eta_l=0.0, eta_n=0.0),
                            range_factors=(0.5, 0.75, 1.0, 1.25))
    assert rep.status == "inconclusive"
    assert "noise-free" in rep.diagnostics["reason"]


def test_scaling_check_needs_four_ranges():
    rep = run_scaling_check(trials=1, range_factors=(0.5, 1.0, 1.4))
    assert rep.status == "inconclusive"
    for m in ("mln-socp", "d-socp"):
        assert len(rep.diagnostics[m]["means"]) == 3
