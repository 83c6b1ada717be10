"""Polynomial moment families and the velocity-shifted moment matrix.

Two nine-polynomial families, both tuned by a real parameter alpha and
sharing 1, X, Y, X^2+Y^2, X^2-Y^2, XY as their first six entries:

* family A closes with X(alpha X^2 + Y^2), Y(X^2 + alpha Y^2),
  (alpha/2)(X^4 + Y^4) + X^2 Y^2.  alpha = 0 is the central-moment
  (cascaded) set, alpha = 1 the classical D2Q9 set.
* family B closes with XY^2 + alpha(X^2+Y^2), YX^2 + alpha(X^2+Y^2),
  X^2 Y^2, isolating the second-order contamination of the third-order
  moments.  alpha = 0 coincides with family A at alpha = 0.

The moment matrix for a shift velocity utilde has entries
M[k, j] = P_k(v_j - utilde); distributions map to shifted moments by
m = M f and back by the inverse.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateShiftError
from .lattice import VelocitySet

DEFAULT_COND_THRESHOLD = 1e12


class MomentFamily(Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class MomentBasis:
    family: MomentFamily
    alpha: float

    def __post_init__(self):
        if not isinstance(self.family, MomentFamily):
            object.__setattr__(self, "family", MomentFamily(self.family))
        object.__setattr__(self, "alpha", float(self.alpha))


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    entries: np.ndarray  # (9, 9), row k = P_k at the shifted velocities
    utilde: np.ndarray  # (2,)


def eval_basis(basis: MomentBasis, point) -> np.ndarray:
    """Evaluate the nine basis polynomials at ``point``.

    ``point`` may carry leading batch dimensions; the result appends the
    basis axis of length 9.
    """
    point = np.asarray(point, dtype=float)
    x = point[..., 0]
    y = point[..., 1]
    x2 = x * x
    y2 = y * y
    a = basis.alpha
    out = np.empty(point.shape[:-1] + (9,), dtype=float)
    out[..., 0] = 1.0
    out[..., 1] = x
    out[..., 2] = y
    out[..., 3] = x2 + y2
    out[..., 4] = x2 - y2
    out[..., 5] = x * y
    if basis.family is MomentFamily.A:
        out[..., 6] = x * (a * x2 + y2)
        out[..., 7] = y * (x2 + a * y2)
        out[..., 8] = 0.5 * a * (x2 * x2 + y2 * y2) + x2 * y2
    else:
        out[..., 6] = x * y2 + a * (x2 + y2)
        out[..., 7] = y * x2 + a * (x2 + y2)
        out[..., 8] = x2 * y2
    return out


def moment_matrix(
    basis: MomentBasis,
    vset: VelocitySet,
    utilde,
    cond_threshold: float = DEFAULT_COND_THRESHOLD,
) -> MomentMatrix:
    """Matrix of moments M with M[k, j] = P_k(v_j - utilde).

    Raises DegenerateShiftError when the construction is numerically
    singular (condition estimate beyond ``cond_threshold``); the paper's
    invertibility assumption is checked, not assumed.
    """
    utilde = np.asarray(utilde, dtype=float).reshape(2)
    shifted = vset.velocities - utilde
    entries = eval_basis(basis, shifted).T.copy()
    cond = np.linalg.cond(entries)
    if not np.isfinite(cond) or cond > cond_threshold:
        raise DegenerateShiftError(utilde, cond)
    entries.setflags(write=False)
    return MomentMatrix(entries=entries, utilde=utilde)


def invert(m: MomentMatrix, cond_threshold: float = DEFAULT_COND_THRESHOLD) -> np.ndarray:
    """Inverse of the matrix of moments, used to return to distributions."""
    cond = np.linalg.cond(m.entries)
    if not np.isfinite(cond) or cond > cond_threshold:
        raise DegenerateShiftError(m.utilde, cond)
    return np.linalg.inv(m.entries)


_M0_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def unshifted_pair(basis: MomentBasis, vset: VelocitySet) -> tuple[np.ndarray, np.ndarray]:
    """Cached (M(0), M(0)^-1) for the basis/velocity-set pair."""
    key = (basis.family, basis.alpha, vset.lam)
    pair = _M0_CACHE.get(key)
    if pair is None:
        m0 = moment_matrix(basis, vset, (0.0, 0.0)).entries
        inv = invert(MomentMatrix(entries=m0, utilde=np.zeros(2)))
        inv.setflags(write=False)
        pair = (m0, inv)
        _M0_CACHE[key] = pair
    return pair


def unshifted_inverse(basis: MomentBasis, vset: VelocitySet) -> np.ndarray:
    """Cached M(0)^-1 for the basis/velocity-set pair."""
    return unshifted_pair(basis, vset)[1]


def shift_matrix(basis: MomentBasis, vset: VelocitySet, utilde) -> np.ndarray:
    """Change of basis T(utilde) = M(utilde) M(0)^-1 between shifted and raw moments."""
    return moment_matrix(basis, vset, utilde).entries @ unshifted_inverse(basis, vset)
