import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentz_fick import KineticParams
from lorentz_fick.medium import ObstacleField, cell_counts, expected_count, obstacles_near


def test_scaling_relations(base_params):
    p = base_params
    assert p.mu_eps == pytest.approx(0.05 ** -1.25)
    assert p.jump_rate == pytest.approx(2.0 * p.mu_eps * p.epsilon)
    assert p.coupling == pytest.approx(0.05 ** 0.1)
    assert p.time_scale * p.delta == pytest.approx(1.0)


def test_regime_flags():
    inside = KineticParams(epsilon=0.05, alpha=0.1, lam=0.02).regime_flags()
    assert inside["assumption_1"] and inside["theorem_1_regime"] and inside["alpha_proven_range"]
    # lam = 0.05 exceeds both (1 - 8 alpha)/8 = 0.025 and (1 - 8 alpha)/7
    flags = KineticParams(epsilon=0.05, alpha=0.1, lam=0.05).regime_flags()
    assert not flags["assumption_1"] and not flags["theorem_1_regime"]
    assert not KineticParams(alpha=0.3).regime_flags()["alpha_proven_range"]


def test_params_validation():
    with pytest.raises(ValueError):
        KineticParams(alpha=0.5)
    with pytest.raises(ValueError):
        KineticParams(epsilon=0.0)
    with pytest.raises(ValueError):
        KineticParams(rho1=-1.0)


def test_expected_count_examples():
    p = KineticParams(epsilon=0.1, alpha=0.1, lam=0.05, mu=1.0)
    assert expected_count(p, 1.0) == pytest.approx(10 ** 1.25, rel=1e-12)
    assert expected_count(p, 1.0) == pytest.approx(17.7828, abs=1e-4)
    assert expected_count(p, 0.0) == 0.0
    assert expected_count(p, 2.0) == 2.0 * expected_count(p, 1.0)


def test_zero_intensity_is_empty(base_params):
    f = ObstacleField(base_params.with_(mu=0.0), 1)
    assert len(f.near((0.5, 3.0), 0.3)) == 0
    assert cell_counts(np.uint64(1), 0, 5, 0, 5, 0.2, 0.0, 1.0).sum() == 0


def test_determinism_and_query_order(base_params):
    a = ObstacleField(base_params, 42)
    b = ObstacleField(base_params, 42)
    q1 = a.near((0.3, 7.0), 0.3)
    b.near((0.9, -50.0), 0.2)  # different query history
    q2 = b.near((0.3, 7.0), 0.3)
    assert np.array_equal(q1, q2)
    assert np.array_equal(obstacles_near(a, (0.3, 7.0), 0.3), q1)
    assert not np.array_equal(ObstacleField(base_params, 43).near((0.3, 7.0), 0.3), q1)


def test_centres_inside_strip(base_params):
    f = ObstacleField(base_params, 7)
    pts = f.window((-0.5, 1.5), (0.0, 2.0))
    assert len(pts) > 0
    assert np.all((pts[:, 0] > 0) & (pts[:, 0] < base_params.L))


def test_thread_safety_of_cache(base_params):
    f = ObstacleField(base_params, 9)
    ref = ObstacleField(base_params, 9).window((0.0, 1.0), (0.0, 1.0))
    results = []

    def work():
        results.append(f.window((0.0, 1.0), (0.0, 1.0)))

    threads = [threading.Thread(target=work) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(np.array_equal(r, ref) for r in results)


def test_window_counts_match_poisson_mean():
    p = KineticParams(epsilon=0.1, alpha=0.1, lam=0.05, mu=1.0, L=1.0)
    f = ObstacleField(p, 2024)
    n = 2000
    counts = np.array([len(f.window((0.0, 1.0), (float(k), float(k) + 1.0))) for k in range(n)])
    lam = p.mu_eps
    assert abs(counts.mean() - lam) <= 3 * math.sqrt(lam / n)
    assert abs(counts.var() / lam - 1.0) < 0.15


def test_snapshot_csv(tmp_path, base_params):
    f = ObstacleField(base_params, 3)
    n = f.snapshot_csv(tmp_path / "snap.csv", (0.0, 1.0), (0.0, 0.5))
    lines = (tmp_path / "snap.csv").read_text().splitlines()
    assert lines[0] == "cx,cy" and len(lines) == n + 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 63), ix=st.integers(-10 ** 6, 10 ** 6), iy=st.integers(-10 ** 9, 10 ** 9))
def test_cell_regeneration_is_pure(seed, ix, iy):
    p = KineticParams()
    a = ObstacleField(p, seed, cell_size=0.25)
    b = ObstacleField(p, seed, cell_size=0.25)
    assert np.array_equal(a.cell(ix, iy), b.cell(ix, iy))
