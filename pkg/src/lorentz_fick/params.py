"""Regime parameters shared by every level of description."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class KineticParams:
    """Scaling regime ``(eps, alpha, lam, mu)`` and slab data ``(L, rho1, rho2)``.

    Derived quantities follow the weak-coupling scaling: obstacle intensity
    ``mu_eps = eps^-(2 alpha + lam + 1) mu``, potential strength
    ``coupling = eps^alpha``, Boltzmann jump rate ``2 mu eps^(-2 alpha - lam)``
    and the diffusive time factor ``eps^-lam``.
    """

    epsilon: float = 0.05
    alpha: float = 0.1
    lam: float = 0.05
    mu: float = 1.0
    L: float = 1.0
    rho1: float = 1.0
    rho2: float = 2.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if not self.lam >= 0:
            raise ValueError("lam must be >= 0")
        if not self.mu >= 0:
            raise ValueError("mu must be >= 0")
        if not self.L > 0:
            raise ValueError("L must be > 0")
        if self.rho1 < 0 or self.rho2 < 0:
            raise ValueError("reservoir densities must be >= 0")

    @property
    def mu_eps(self):
        return self.epsilon ** (-(2.0 * self.alpha + self.lam + 1.0)) * self.mu

    @property
    def coupling(self):
        return self.epsilon ** self.alpha

    @property
    def jump_rate(self):
        # 2 mu_eps eps = 2 mu eps^(-2 alpha - lam)
        return 2.0 * self.mu * self.epsilon ** (-2.0 * self.alpha - self.lam)

    @property
    def time_scale(self):
        return self.epsilon ** (-self.lam)

    @property
    def delta(self):
        """``eps^lam``: transport relative to collisions in the stationary problems."""
        return self.epsilon ** self.lam

    @property
    def gamma_plus(self):
        return 1.0 - 8.0 * (self.alpha + 0.5 * self.lam)

    @property
    def gamma_minus(self):
        return 1.0 - 8.0 * (self.alpha - 0.5 * self.lam)

    def regime_flags(self):
        a, lam = self.alpha, self.lam
        return {
            "alpha_proven_range": 0 < a < 0.125,
            "assumption_1": lam < (1.0 - 8.0 * a) / 8.0,
            "theorem_1_regime": lam < (1.0 - 8.0 * a) / 7.0,
            "rho_ordered": self.rho2 >= self.rho1 > 0,
        }

    def swapped(self):
        """Mirror image: reservoirs exchanged."""
        return replace(self, rho1=self.rho2, rho2=self.rho1)

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)
