from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..rngdist import CHI_FLOOR, InvalidParameterError


class NumericalDegeneracyError(RuntimeError):
    """A chain state left its support even after clamping."""


@dataclass
class ChainState:
    """One MCMC state.

    ``psi`` are local variances, ``phi`` the Dirichlet weights (uniform and
    unused outside the DL sampler) and ``tau`` the global parameter.  ``nu``
    and ``xi`` hold the half-Cauchy auxiliaries of the local and global
    scales when a sampler uses them.
    """

    theta: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    tau: float
    nu: np.ndarray | None = None
    xi: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.theta.size

    def copy(self) -> "ChainState":
        return replace(
            self,
            theta=self.theta.copy(),
            psi=self.psi.copy(),
            phi=self.phi.copy(),
            nu=None if self.nu is None else self.nu.copy(),
            extra=dict(self.extra),
        )

    def check(self) -> None:
        n = self.theta.size
        if self.psi.shape != (n,) or self.phi.shape != (n,):
            raise InvalidParameterError("theta, psi and phi must have equal length")
        if not np.all(np.isfinite(self.theta)):
            raise NumericalDegeneracyError("non-finite theta")
        if not (np.all(self.psi > 0) and np.all(np.isfinite(self.psi))):
            raise NumericalDegeneracyError("psi must be positive and finite")
        if not (np.all(self.phi > 0) and abs(self.phi.sum() - 1.0) <= 1e-12):
            raise NumericalDegeneracyError("phi must be a strictly positive simplex vector")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise NumericalDegeneracyError("tau must be positive and finite")

    @classmethod
    def initial(cls, y) -> "ChainState":
        """theta = y, phi uniform, psi = 1, tau = 1."""
        y = np.asarray(y, dtype=float)
        n = y.size
        return cls(y.copy(), np.ones(n), np.full(n, 1.0 / n), 1.0, np.ones(n), 1.0)


def clamp_simplex(w: np.ndarray) -> np.ndarray:
    """Normalize nonnegative weights, keeping every component strictly positive."""
    phi = w / w.sum()
    if np.any(phi < CHI_FLOOR):
        phi = np.maximum(phi, CHI_FLOOR)
        phi /= phi.sum()
    return phi


def normal_means_theta(y, prior_var, rng) -> np.ndarray:
    """theta_j ~ N(v y_j, v) with v = s / (1 + s) for prior variance s."""
    s = np.asarray(prior_var, dtype=float)
    v = s / (1.0 + s)
    return v * y + np.sqrt(v) * rng.normal(y.shape)
