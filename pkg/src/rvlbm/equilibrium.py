"""Distribution-space equilibria and their analytic linearization.

Two equilibria are provided.  With w_j the D2Q9 weights, c0 the lattice
sound speed parameter (c0^2 = lam^2/3) and u the fluid velocity:

* second-order truncated:
  f_j^eq = rho w_j (1 + u.v_j/c0^2 + (u.v_j)^2/(2 c0^4) - |u|^2/(2 c0^2))
* fourth-order product form, which adds
  (u.v_j)^3/(6 c0^6) - |u|^2 (u.v_j)/(2 c0^4) + d_j (ux uy)^2 / c0^4
  with d_0 = -1/4, d_1..4 = 1/2, d_5..8 = -1.

Both satisfy sum_j f_j^eq = rho and sum_j v_j f_j^eq = rho u exactly (up
to rounding) and coincide at rest.  The weights and c0 are the standard
D2Q9 values; they are collected in LatticeConstants so a different
normalization stays a one-line change.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lattice import VelocitySet

WEIGHTS = np.array([4 / 9, 1 / 9, 1 / 9, 1 / 9, 1 / 9, 1 / 36, 1 / 36, 1 / 36, 1 / 36])
WEIGHTS.setflags(write=False)

D_COEF = np.array([-0.25, 0.5, 0.5, 0.5, 0.5, -1.0, -1.0, -1.0, -1.0])
D_COEF.setflags(write=False)


class EquilibriumKind(Enum):
    TRUNCATED2 = "truncated2"
    PRODUCT4 = "product4"


@dataclass(frozen=True, eq=False)
class LatticeConstants:
    weights: np.ndarray  # (9,)
    c0: float
    d: np.ndarray  # (9,), product-equilibrium correction coefficients


def lattice_constants(lam: float) -> LatticeConstants:
    """Standard D2Q9 constants for velocity scale ``lam`` (c0 = lam/sqrt(3))."""
    return LatticeConstants(weights=WEIGHTS, c0=float(lam) / np.sqrt(3.0), d=D_COEF)


def feq(kind: EquilibriumKind, rho, u, consts: LatticeConstants, vset: VelocitySet) -> np.ndarray:
    """Equilibrium distributions for density ``rho`` and velocity ``u``.

    ``rho`` may carry leading batch dimensions matching ``u[..., :2]``;
    the result appends the velocity axis of length 9.  rho = 0 is allowed
    and returns the zero vector; negative rho is rejected.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("negative density passed to feq")
    u = np.asarray(u, dtype=float)
    return rho[..., np.newaxis] * _shape_factor(kind, u, consts, vset)


def _shape_factor(kind, u, consts, vset):
    """g_j(u) with feq_j(rho, u) = rho g_j(u)."""
    c2 = consts.c0**2
    uv = u @ vset.velocities.T  # (..., 9)
    usq = np.sum(u * u, axis=-1)[..., np.newaxis]
    g = 1.0 + uv / c2 + uv**2 / (2 * c2**2) - usq / (2 * c2)
    if kind is EquilibriumKind.PRODUCT4:
        uxuy2 = (u[..., 0] * u[..., 1])[..., np.newaxis] ** 2
        g = g + uv**3 / (6 * c2**3) - usq * uv / (2 * c2**2) + consts.d * uxuy2 / c2**2
    return consts.weights * g


def _shape_gradient(kind, u, consts, vset):
    """Gradient of g_j with respect to u, shape (9, 2)."""
    u = np.asarray(u, dtype=float).reshape(2)
    c2 = consts.c0**2
    v = vset.velocities
    uv = v @ u  # (9,)
    grad = (v + uv[:, np.newaxis] * v / c2 - u) / c2
    if kind is EquilibriumKind.PRODUCT4:
        usq = u @ u
        grad = grad + (
            uv[:, np.newaxis] ** 2 * v / (2 * c2**3)
            - (np.outer(uv, u) + 0.5 * usq * v) / c2**2
        )
        uxuy = u[0] * u[1]
        d_grad = np.outer(consts.d, 2 * uxuy * np.array([u[1], u[0]]))
        grad = grad + d_grad / c2**2
    return consts.weights[:, np.newaxis] * grad


def linearized_equilibrium(
    kind: EquilibriumKind, V, consts: LatticeConstants, vset: VelocitySet
) -> np.ndarray:
    """Matrix E with f^eq = E f for states linearized around velocity V.

    E[j, l] = g_j(V) - grad g_j(V).V + grad g_j(V).v_l, the Jacobian of
    f -> feq(rho(f), q(f)/rho(f)) at any base state with u = V; it does
    not depend on the base density.
    """
    V = np.asarray(V, dtype=float).reshape(2)
    g = _shape_factor(kind, V, consts, vset)  # (9,)
    grad = _shape_gradient(kind, V, consts, vset)  # (9, 2)
    return (g - grad @ V)[:, np.newaxis] + grad @ vset.velocities.T
