import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentz_fick import KineticParams
from lorentz_fick.analysis import (
    StationaryProfile,
    convergence_study,
    fick_check,
    green_kubo_D,
    landau_coefficient,
    linear_profile,
    profile_from_estimates,
    profile_from_field,
    sup_distance,
)
from lorentz_fick.estimates import MCEstimate
from lorentz_fick.grid_solver import Grid, solve_landau
from lorentz_fick.scattering import DomainError


def test_linear_profile_examples():
    assert linear_profile(1, 2, 1, 0.5) == 1.5
    assert linear_profile(1, 2, 3, 0.0) == 1.0 and linear_profile(1, 2, 3, 3.0) == 2.0
    assert np.all(linear_profile(1.4, 1.4, 2.0, np.linspace(0, 2, 9)) == 1.4)
    with pytest.raises(DomainError):
        linear_profile(1, 2, 1, 1.01)


def test_green_kubo_values():
    assert green_kubo_D(1.0) == pytest.approx(1.0, abs=1e-14)
    assert green_kubo_D(2.0) == pytest.approx(green_kubo_D(1.0) / 2, abs=1e-14)
    assert green_kubo_D(1.0, "paper_literal") == pytest.approx(4 * math.pi, rel=1e-13)
    # generator coef * Laplacian: D = 1 / (2 coef)
    assert green_kubo_D(1.0, coefficient=2.0) == pytest.approx(0.25, abs=1e-14)
    with pytest.raises(ValueError):
        green_kubo_D(1.0, "other")
    with pytest.raises(ValueError):
        green_kubo_D(0.0)


def _exact_profile(rho1=1.0, rho2=2.0, L=1.0, D=1.0, n=33):
    x = np.linspace(0, L, n)
    J = np.full(n, -D * (rho2 - rho1) / L)
    z = np.zeros(n)
    return StationaryProfile(x, linear_profile(rho1, rho2, L, x), J, z, z, "linear", rho1, rho2, L)


def test_fick_exact_linear_profile():
    # dyadic nodes keep every operation exact
    rep = fick_check(_exact_profile(), 1.0)
    assert rep.passed and rep.residual == 0.0 and rep.flux_error == 0.0
    assert rep.to_dict()["pass"] is True


def test_fick_equilibrium():
    rep = fick_check(_exact_profile(1.5, 1.5), 1.0)
    assert rep.gradient == 0.0 and rep.J_mean == 0.0 and rep.passed
    x = np.linspace(0, 1, 20)
    z = np.zeros(20)
    leaky = StationaryProfile(x, np.full(20, 1.5), np.full(20, 1e-3), z, z, "grid", 1.5, 1.5, 1.0)
    assert not fick_check(leaky, 1.0).passed


def test_fick_detects_wrong_D():
    rep = fick_check(_exact_profile(D=1.0), 2.0)
    assert not rep.flux_pass and not rep.weak_pass


@settings(max_examples=30, deadline=None)
@given(r1=st.floats(0.1, 5), r2=st.floats(0.1, 5), L=st.floats(0.2, 10), D=st.floats(0.01, 10))
def test_fick_linear_family(r1, r2, L, D):
    rep = fick_check(_exact_profile(r1, r2, L, D), D)
    assert rep.residual <= 1e-9 and rep.passed


def test_profile_validation():
    with pytest.raises(ValueError):
        StationaryProfile(np.arange(3.0), np.zeros(2), np.zeros(3), np.zeros(3), np.zeros(3), "grid")
    with pytest.raises(ValueError):
        StationaryProfile(np.arange(3.0), *(np.zeros(3),) * 4, "bogus")


def test_profile_bounds_and_csv(tmp_path):
    p = _exact_profile()
    assert p.within_bounds()
    p.rho[3] = 2.5
    assert not p.within_bounds()
    p.to_csv(tmp_path / "prof.csv")
    assert (tmp_path / "prof.csv").read_text().splitlines()[0] == "x1,rho,J,rho_err,J_err"


def test_green_kubo_matches_grid_bulk_ratio(base_params):
    grid = Grid(800, 128, 1.0, 0.05)
    f = solve_landau(base_params, grid, 0.5)
    inner = (grid.x > 0.25) & (grid.x < 0.75)
    slope = np.polyfit(grid.x[inner], f.rho[inner], 1)[0]
    ratio = -f.flux[inner].mean() / slope
    assert ratio == pytest.approx(green_kubo_D(1.0), rel=0.03)
    prof = profile_from_field(f)
    assert prof.source == "grid" and np.allclose(prof.J, f.flux)


def test_profile_from_estimates(base_params):
    angles = np.arange(4) * math.pi / 2
    xs = np.linspace(0.1, 0.9, 8)
    ests = [[MCEstimate("landau", (x, 0.0), (1, 0), 1.0 + x + 0.1 * math.cos(a), 0.01, 100, 0.0, 0)
             for a in angles] for x in xs]
    prof = profile_from_estimates(xs, angles, ests, base_params, delta=0.5)
    assert np.allclose(prof.rho, 1.0 + xs)
    assert np.allclose(prof.J, 0.1 * 0.5 / 0.5)
    assert np.allclose(prof.rho_err, 0.005)


def test_sup_distance():
    d, e = sup_distance([1.0, 2.0, 3.0], [1.0, 2.5, 3.1], [0.1, 0.3, 0.1], [0.1, 0.4, 0.1])
    assert d == 0.5 and e == pytest.approx(0.5)
    assert sup_distance(np.ones((2, 2)), np.ones((2, 2)))[0] == 0.0


def test_landau_coefficient_sources(base_params):
    assert landau_coefficient(base_params, "mu_half") == 0.5
    assert landau_coefficient(base_params, 0.8) == 0.8
    b = landau_coefficient(base_params, "table", n_points=128)
    lim = landau_coefficient(base_params, "limit", n_points=128)
    assert b > 0 and lim > 0
    with pytest.raises(ValueError):
        landau_coefficient(base_params, "nope")


def _regimes(eps=(0.1, 0.05, 0.025)):
    return [KineticParams(epsilon=e, alpha=0.1, lam=0.05) for e in eps]


def test_study_identical_levels():
    s = convergence_study(_regimes(), "landau-landau")
    assert [r.distance for r in s.rows] == [0.0, 0.0, 0.0] and s.status == "unresolved"


def test_study_boltzmann_landau_trend(tmp_path):
    opts = dict(delta=0.86, grid=(100, 64), table_points=256)
    s = convergence_study(_regimes(), "boltzmann-landau", **opts)
    t = convergence_study(_regimes(), "landau-boltzmann", **opts)
    assert s.strictly_decreasing
    assert [r.distance for r in s.rows] == [r.distance for r in t.rows]
    assert "2(alpha-lambda)" in s.reference_exponents
    s.to_csv(tmp_path / "c.csv")
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 4
    assert s.to_dict()["rows"][0]["epsilon"] == 0.1


def test_study_landau_linear_trend():
    s = convergence_study(_regimes(), "landau-linear", deltas=[0.2, 0.1, 0.05], grid=(200, 64),
                          landau_coefficient="mu_half")
    assert s.sweep_variable == "delta" and s.strictly_decreasing


def test_study_mc_reports_gamma_candidates():
    s = convergence_study(_regimes((0.1, 0.05)), "micro-boltzmann", mode="mc", n_samples=200,
                          points=[(0.5, 0.0)], allow_short=True, table_points=128)
    assert {"gamma_plus", "gamma_minus"} <= set(s.reference_exponents)
    # two noisy points cannot resolve a rate
    assert s.status == "unresolved"


def test_study_rejects_bad_requests():
    with pytest.raises(ValueError):
        convergence_study(_regimes()[:2], "boltzmann-landau")
    with pytest.raises(ValueError):
        convergence_study(_regimes(), "micro-landau", mode="grid")
    with pytest.raises(ValueError):
        convergence_study(_regimes(), "boltzmann-fluid")
