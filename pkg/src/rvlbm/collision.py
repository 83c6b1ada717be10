"""Relaxation-rate vectors, viscosity conversions, and the shifted relaxation step.

The collision relaxes each moment of the shifted basis diagonally,
m_k* = m_k + s_k (m_k^eq - m_k), with the first three rates pinned to
zero (density and the two momenta are conserved).  Two two-relaxation-
time layouts cover the non-conserved moments 3..8:

* trt1: (s_e, s_nu, s_nu, s_e, s_e, s_e) - energy and the high-order
  moments share s_e, the stress pair X^2-Y^2, XY gets s_nu.
* trt2: (s_e, s_e, s_e, s_p, s_p, s_e) - the third-order pair gets its
  own rate s_p.

Equal rates collapse both to BGK.  Rates map to viscosities through
sigma = 1/s - 1/2 and viscosity = lam^2 dt sigma / 3.
"""

from dataclasses import dataclass

import numpy as np

from .equilibrium import EquilibriumKind, LatticeConstants, feq
from .lattice import VelocitySet
from .moments import MomentBasis, moment_matrix, shift_matrix, unshifted_pair

CONSERVED = (0, 1, 2)


@dataclass(frozen=True, eq=False)
class RelaxationVector:
    """Nine relaxation rates aligned with the moment indices."""

    s: np.ndarray  # (9,)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).reshape(9)
        if np.any(s[list(CONSERVED)] != 0.0):
            raise ValueError("conserved moments 0..2 must have zero relaxation rate")
        if np.any((s < 0.0) | (s > 2.0)):
            raise ValueError("relaxation rates must lie in [0, 2]")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)


def _rates(pairs):
    s = np.zeros(9)
    for k, val in pairs:
        s[k] = val
    return RelaxationVector(s)


def trt1(s_e: float, s_nu: float) -> RelaxationVector:
    """Two-relaxation-time vector (s_e, s_nu, s_nu, s_e, s_e, s_e) on moments 3..8."""
    return _rates([(3, s_e), (4, s_nu), (5, s_nu), (6, s_e), (7, s_e), (8, s_e)])


def trt2(s_e: float, s_p: float) -> RelaxationVector:
    """Two-relaxation-time vector (s_e, s_e, s_e, s_p, s_p, s_e) on moments 3..8."""
    return _rates([(3, s_e), (4, s_e), (5, s_e), (6, s_p), (7, s_p), (8, s_e)])


def bgk(s: float) -> RelaxationVector:
    """Single-relaxation-time vector: all non-conserved moments share ``s``."""
    return trt1(s, s)


def viscosity_to_rate(viscosity: float, lam: float, dt: float) -> float:
    """Relaxation rate for one viscosity via sigma = 3 nu / (lam^2 dt), s = 1/(sigma + 1/2)."""
    if viscosity < 0:
        raise ValueError("viscosity must be non-negative")
    if dt <= 0:
        raise ValueError("dt must be positive")
    sigma = 3.0 * viscosity / (lam * lam * dt)
    s = 1.0 / (sigma + 0.5)
    if not 0.0 < s <= 2.0:
        raise ValueError(f"viscosity {viscosity} maps to rate {s} outside (0, 2]")
    return s


def viscosity_to_rates(mu: float, nu: float, lam: float, dt: float) -> tuple[float, float]:
    """(s_e, s_nu) for bulk viscosity ``mu`` and shear viscosity ``nu``."""
    return viscosity_to_rate(mu, lam, dt), viscosity_to_rate(nu, lam, dt)


def rate_to_viscosity(s: float, lam: float, dt: float) -> float:
    """Inverse of viscosity_to_rate: viscosity = lam^2 dt (1/s - 1/2) / 3."""
    if not 0.0 < s <= 2.0:
        raise ValueError(f"rate {s} outside (0, 2]")
    return lam * lam * dt * (1.0 / s - 0.5) / 3.0


def rates_to_viscosity(s_e: float, s_nu: float, lam: float, dt: float) -> tuple[float, float]:
    """(mu, nu) recovered from the rate pair; round-trips viscosity_to_rates."""
    return rate_to_viscosity(s_e, lam, dt), rate_to_viscosity(s_nu, lam, dt)


@dataclass(frozen=True)
class UtildePolicy:
    """How the relaxation frame velocity follows the flow.

    kind "zero" relaxes fixed moments (the d'Humieres scheme), "fluid"
    follows the local fluid velocity (cascaded-style), "scaled" uses
    scale*u per cell, and "fixed" a constant vector w.
    """

    kind: str
    scale: float = 1.0
    w: tuple[float, float] = (0.0, 0.0)

    _KINDS = ("zero", "fluid", "scaled", "fixed")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown utilde policy {self.kind!r}; expected one of {self._KINDS}")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def fluid(cls):
        return cls("fluid")

    @classmethod
    def scaled_fluid(cls, c: float):
        return cls("scaled", scale=float(c))

    @classmethod
    def fixed(cls, w):
        return cls("fixed", w=(float(w[0]), float(w[1])))

    def resolve(self, u) -> np.ndarray:
        """Frame velocity for local fluid velocity ``u``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "zero":
            return np.zeros(2)
        if self.kind == "fluid":
            return u.copy()
        if self.kind == "scaled":
            return self.scale * u
        return np.array(self.w)


def relax(
    f,
    basis: MomentBasis,
    utilde,
    s: RelaxationVector,
    kind: EquilibriumKind,
    consts: LatticeConstants,
    vset: VelocitySet,
    method: str = "factorized",
) -> np.ndarray:
    """One collision: relax the shifted moments of ``f`` toward equilibrium.

    Computes m = M(utilde) f, the equilibrium moments M(utilde) feq(rho, u)
    from the pre-collision macroscopics, applies the diagonal relaxation,
    and maps back.  Density and momentum are conserved exactly (up to
    rounding) for any shift velocity and rate vector.

    ``method`` selects the change-of-basis path: "factorized" goes through
    T(utilde) = M(utilde) M(0)^-1 with the cached unshifted inverse (the
    default), "direct" builds and solves with M(utilde) itself.  Both agree
    to 1e-10 and are cross-checked in the test suite.
    """
    f = np.asarray(f, dtype=float).reshape(9)
    rho = f.sum()
    if rho <= 0:
        raise ValueError(f"non-positive density {rho}; state has blown up")
    u = f @ vset.velocities / rho
    g = feq(kind, rho, u, consts, vset) - f
    if method == "factorized":
        m0, m0_inv = unshifted_pair(basis, vset)
        t = shift_matrix(basis, vset, utilde)
        h = s.s * (t @ (m0 @ g))
        return f + m0_inv @ np.linalg.solve(t, h)
    if method == "direct":
        m = moment_matrix(basis, vset, utilde).entries
        h = s.s * (m @ g)
        return f + np.linalg.solve(m, h)
    raise ValueError(f"unknown relax method {method!r}")
