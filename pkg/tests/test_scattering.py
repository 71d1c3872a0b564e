import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentz_fick.scattering import (
    DomainError,
    RadialPotential,
    ScatteringTable,
    build_table,
    deflection_angle,
    hard_disk_deflection,
    landau_coefficient_B,
    reflect,
    verify_angle_bound,
)

# Reference deflections of phi = (1 - r^2)^2, computed offline with scipy
# (adaptive quad of the turning-point integral and a DOP853 orbit
# integration; the two agree to better than 1e-9 rad).
FROZEN = [
    (0.1, 0.3, 0.1583038535101995),
    (0.794, 0.3, 1.57840784437),
    (0.794, 0.05, 2.76524785807),
    (0.3, 0.7, 0.33191677045),
]


def test_potential_profile_properties(quartic):
    quartic.check()
    assert quartic.value(0.0) == 1.0
    assert quartic.value(1.0) == 0.0 and quartic.derivative(1.0) == 0.0
    assert quartic.value(1.5) == 0.0
    r = np.linspace(0.01, 0.99, 99)
    assert np.all(quartic.derivative(r) < 0)


def test_potential_rejects_bad_family():
    with pytest.raises(ValueError):
        RadialPotential("poly", 1.0, 1)
    with pytest.raises(ValueError):
        RadialPotential("gauss", 1.0, 2)
    with pytest.raises(ValueError):
        RadialPotential("poly", -1.0, 2)


def test_derivative_matches_finite_difference():
    for pot in (RadialPotential.quartic(2.0), RadialPotential("cos2", 0.7), RadialPotential("poly", 1.0, 3)):
        r = np.linspace(0.05, 0.95, 19)
        h = 1e-6
        fd = (pot.value(r + h) - pot.value(r - h)) / (2 * h)
        assert np.allclose(fd, pot.derivative(r), atol=1e-7)


def test_trivial_deflections(quartic):
    assert deflection_angle(quartic, 0.0, 0.4) == 0.0
    assert deflection_angle(quartic, 0.1, 1.0) == 0.0
    assert deflection_angle(RadialPotential.zero(), 0.3, 0.2) == 0.0


@pytest.mark.parametrize("coupling,b,expected", FROZEN)
def test_deflection_matches_reference(quartic, coupling, b, expected):
    assert deflection_angle(quartic, coupling, b) == pytest.approx(expected, abs=1e-9)
    assert deflection_angle(quartic, coupling, -b) == pytest.approx(-expected, abs=1e-9)


def test_deflection_domain(quartic):
    with pytest.raises(DomainError):
        deflection_angle(quartic, 0.1, 1.01)
    with pytest.raises(DomainError):
        deflection_angle(quartic, -0.1, 0.5)


def test_reflecting_core_backscatters(quartic):
    # coupling * phi(0) above 1/2: head-on orbits turn around
    assert deflection_angle(quartic, 0.8, 0.0) == math.pi
    assert deflection_angle(quartic, 0.8, 1e-4) > 3.0
    assert deflection_angle(quartic, 0.3, 0.0) == 0.0


def test_hard_disk_examples():
    assert hard_disk_deflection(0.0) == math.pi
    assert hard_disk_deflection(1.0) == 0.0 and hard_disk_deflection(-1.0) == 0.0
    assert abs(hard_disk_deflection(0.5)) == pytest.approx(2 * math.pi / 3, abs=1e-15)
    with pytest.raises(DomainError):
        hard_disk_deflection(1.5)


def _geometric_reflection(b):
    # ray along +x at height b hits the unit disk at (-sqrt(1-b^2), b)
    normal = np.array([-math.sqrt(1 - b * b), b])
    out = reflect(np.array([1.0, 0.0]), normal)
    return math.atan2(out[1], out[0])


def test_hard_disk_closed_form_vs_geometry():
    rng = np.random.default_rng(3)
    bs = rng.uniform(0.001, 0.999, 1000) * rng.choice([-1, 1], 1000)
    err = max(abs(abs(hard_disk_deflection(b)) - abs(_geometric_reflection(b))) for b in bs)
    assert err <= 1e-12


def test_reflect_examples():
    assert np.allclose(reflect((1.0, 0.0), (1.0, 0.0)), (-1.0, 0.0))
    assert np.allclose(reflect((1.0, 0.0), (0.0, 1.0)), (1.0, 0.0))
    s = math.sqrt(2) / 2
    assert np.allclose(reflect((1.0, 0.0), (s, s)), (0.0, -1.0), atol=1e-15)
    with pytest.raises(DomainError):
        reflect((2.0, 0.0), (1.0, 0.0))


def test_table_endpoints_and_oddness(quartic):
    tab = build_table(quartic, 0.1, 0.1, 64)
    assert tab(1.0) == 0.0 and tab(-1.0) == 0.0
    rho = np.linspace(0.01, 0.99, 37)
    assert np.array_equal(tab(-rho), -tab(rho))
    m = (len(tab.angle) - 1) // 2
    # the centre node holds the one-sided limit, every other node is mirrored
    assert np.array_equal(tab.angle[:m], -tab.angle[m + 1:][::-1])


def test_table_interpolation_error(quartic):
    tab = build_table(quartic, 0.1, 0.1, 512)
    mid = 0.5 * (tab.half_grid[1:] + tab.half_grid[:-1])[::7]
    err = max(abs(float(tab(m)) - deflection_angle(quartic, tab.coupling, m)) for m in mid)
    assert err < 1e-4


def test_table_vanishes_as_coupling_vanishes(quartic):
    small = build_table(quartic, 1e-12, 0.5, 64)
    assert np.max(np.abs(small.angle[1:-1])) < 1e-5


def test_landau_coefficient_properties(quartic):
    tab = build_table(quartic, 0.1, 0.1, 256)
    zero = ScatteringTable(0.1, 0.1, tab.impact_grid, np.zeros_like(tab.angle), quartic)
    assert landau_coefficient_B(zero, 1.0) == 0.0
    weak = build_table(RadialPotential.quartic(0.05), 0.1, 0.1, 256)
    scaled = ScatteringTable(0.1, 0.1, weak.impact_grid, 0.5 * weak.angle, weak.potential)
    assert landau_coefficient_B(scaled, 1.0) == pytest.approx(0.25 * landau_coefficient_B(weak, 1.0), rel=1e-12)
    assert landau_coefficient_B(weak, 2.0) == pytest.approx(2.0 * landau_coefficient_B(weak, 1.0), rel=1e-12)


def test_landau_coefficient_cauchy_in_eps(quartic):
    B = [landau_coefficient_B(build_table(quartic, e, 0.1, 512), 1.0) for e in (0.1, 0.05, 0.025)]
    assert abs(B[2] - B[1]) < abs(B[1] - B[0])


def test_landau_coefficient_refinement_invariance(quartic):
    b512 = landau_coefficient_B(build_table(quartic, 0.05, 0.1, 512), 1.0)
    b1024 = landau_coefficient_B(build_table(quartic, 0.05, 0.1, 1024), 1.0)
    assert abs(b1024 - b512) <= 1e-4 * abs(b1024)


def test_angle_bound_zero_potential():
    z = RadialPotential.zero()
    rep = verify_angle_bound(build_table(z, 0.1, 0.1, 32), z)
    assert rep.passed and rep.lhs_max == 0.0


def test_angle_bound_weak_potential_scaling():
    weak = RadialPotential.quartic(0.05)
    rep = verify_angle_bound(build_table(weak, 0.1, 0.1, 128), weak)
    assert rep.passed
    # below the reflection threshold max|theta| scales like eps^alpha
    assert rep.fitted_exponent == pytest.approx(0.1, rel=0.2)


def test_angle_bound_canonical(quartic):
    assert verify_angle_bound(build_table(quartic, 0.1, 0.1, 128), quartic).passed


@settings(max_examples=40, deadline=None)
@given(coupling=st.floats(0.01, 0.45), b=st.floats(0.001, 0.999))
def test_deflection_odd_and_bounded(coupling, b):
    pot = RadialPotential.quartic()
    th = deflection_angle(pot, coupling, b)
    assert deflection_angle(pot, coupling, -b) == -th
    assert 0.0 <= th <= math.pi


@settings(max_examples=25, deadline=None)
@given(coupling=st.floats(0.01, 0.45))
def test_deflection_continuous_to_grazing(coupling):
    pot = RadialPotential.quartic()
    assert abs(deflection_angle(pot, coupling, 1.0 - 1e-9)) < 1e-6
