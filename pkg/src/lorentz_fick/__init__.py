"""Stationary transport in a weakly coupled random Lorentz gas.

Four levels of description of one slab problem between two particle
reservoirs: Newtonian motion through random soft scatterers
(:mod:`micro_sim`), the linear Boltzmann and linear Landau kinetic
equations (:mod:`kinetic_sim` by Monte Carlo, :mod:`grid_solver`
deterministically), and the diffusive limit with its linear profile and
Fick's law (:mod:`analysis`).
"""

__version__ = "0.1.0"

from .params import KineticParams  # noqa: E402
from .scattering import RadialPotential, ScatteringTable, build_table, deflection_angle  # noqa: E402

__all__ = ["KineticParams", "RadialPotential", "ScatteringTable", "build_table", "deflection_angle", "__version__"]
