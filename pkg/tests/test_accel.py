"""The compiled kernels and their plain-Python fallback must agree."""

import json
import os
import subprocess
import sys

import pytest

PROBE = r"""
import json, math
import numpy as np
from lorentz_fick import _rng, medium
from lorentz_fick._accel import backend_name
from lorentz_fick.params import KineticParams
from lorentz_fick.scattering import RadialPotential, build_table
from lorentz_fick.kinetic_sim import GeneratorSpec, stationary_estimate_kinetic
from lorentz_fick.micro_sim import stationary_estimate_micro, scatter_single

p = KineticParams(epsilon=0.1, alpha=0.1, lam=0.05, mu=1.0, L=0.3)
out = {"backend": backend_name()}
key = _rng.derive_key(np.uint64(7), -3, 11)
out["rng"] = [int(key), _rng.uniform(key, 5), _rng.normal(key, 2), int(_rng.poisson(key, 0, 20.5)[0])]
buf = np.empty((64, 2))
n = medium.cell_obstacles(np.uint64(3), 1, -2, 0.4, 200.0, 1.0, buf)
out["cell"] = buf[:n].tolist()
table = build_table(RadialPotential.quartic(), p.coupling, 32)
b = stationary_estimate_kinetic("boltzmann", (0.1, 0.0), 0.7, p, 40, seed=2, table=table)
l = stationary_estimate_kinetic("landau", (0.1, 0.0), 0.7, p, 40, seed=2,
                                gen=GeneratorSpec.landau(p, coefficient=1.0))
m = stationary_estimate_micro((0.1, 0.0), (math.cos(0.7), math.sin(0.7)), p, 2, seed=2)
out["boltzmann"] = [b.mean, b.stderr]
out["landau"] = [l.mean, l.stderr]
out["micro"] = [m.mean, m.n]
out["scatter"] = scatter_single(p, 0.3)
print(json.dumps(out))
"""


def _probe(disable):
    env = dict(os.environ, LORENTZ_FICK_DISABLE_JIT="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, timeout=900)
    assert res.returncode == 0, res.stderr
    return json.loads(res.stdout.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def both():
    return _probe(False), _probe(True)


def test_backends_differ(both):
    jit, py = both
    assert jit["backend"] == "numba" and py["backend"] == "python"


@pytest.mark.parametrize("name", ["rng", "cell", "boltzmann", "landau"])
def test_bit_exact(both, name):
    jit, py = both
    assert jit[name] == py[name]


@pytest.mark.parametrize("name", ["micro", "scatter"])
def test_integrator_parity(both, name):
    jit, py = both
    assert jit[name] == pytest.approx(py[name], rel=1e-12, abs=1e-12)
