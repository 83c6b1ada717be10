"""Linear (von Neumann) stability of the relative-velocity scheme.

The scheme linearized around a constant velocity V acts in Fourier space
as the amplification matrix

    L(k) = A(k) (I + M(utilde)^-1 D M(utilde) (E - I)),

with A(k) = diag(exp(i dt k.v_j)) the transport phases, D = diag(s) the
relaxation rates, and E the linearized equilibrium.  The scheme satisfies
the necessary L^2 stability condition at V when the spectral radius of
L(k) stays <= 1 over all wavevectors; the largest such |V| along a fixed
direction is the quantity tabulated by the stability scans.

A(k) is periodic in k with period 2 pi / dx per axis (dx = lam dt), so
the wavevector scan covers [0, 2 pi / dx)^2 on a uniform grid followed by
local 5x5 refinement rounds around the largest well-separated candidates.
"""

from dataclasses import dataclass

import numpy as np

from .collision import RelaxationVector, UtildePolicy
from .equilibrium import EquilibriumKind, lattice_constants, linearized_equilibrium
from .errors import NumericalFailureError
from .lattice import VelocitySet, d2q9
from .moments import MomentBasis, moment_matrix

RADIUS_TOL = 1e-8  # slack above 1 absorbing eigensolver noise on conserved modes


@dataclass(frozen=True, eq=False)
class StabilityProblem:
    """Scheme configuration plus linearization direction for the stability scan.

    ``policy`` resolves the relaxation-frame velocity at the linearization
    point: zero (d'Humieres), fluid (utilde = V), scaled, or fixed.
    """

    basis: MomentBasis
    kind: EquilibriumKind
    s: RelaxationVector
    policy: UtildePolicy
    theta: float = 0.0
    vset: VelocitySet = None
    dt: float = 1.0

    def __post_init__(self):
        if self.vset is None:
            object.__setattr__(self, "vset", d2q9(1.0))
        if not 0.0 <= self.theta < 2 * np.pi:
            object.__setattr__(self, "theta", float(self.theta) % (2 * np.pi))


@dataclass(frozen=True, eq=False)
class AmplificationMatrix:
    matrix: np.ndarray  # (9, 9) complex


def collision_operator(prob: StabilityProblem, V) -> np.ndarray:
    """The k-independent factor I + M^-1 D M (E - I) of the amplification matrix."""
    V = np.asarray(V, dtype=float).reshape(2)
    consts = lattice_constants(prob.vset.lam)
    e = linearized_equilibrium(prob.kind, V, consts, prob.vset)
    utilde = prob.policy.resolve(V)
    m = moment_matrix(prob.basis, prob.vset, utilde).entries
    rhs = (prob.s.s[:, np.newaxis] * m) @ (e - np.eye(9))
    return np.eye(9) + np.linalg.solve(m, rhs)


def amplification(prob: StabilityProblem, V, k) -> AmplificationMatrix:
    """Amplification matrix L = A(k) (I + M^-1 D M (E - I)) at wavevector k."""
    k = np.asarray(k, dtype=float).reshape(2)
    phases = np.exp(1j * prob.dt * (prob.vset.velocities @ k))
    return AmplificationMatrix(phases[:, np.newaxis] * collision_operator(prob, V))


def spectral_radius(L) -> float:
    """Largest eigenvalue modulus of a dense matrix.

    Retries on a balanced copy before surfacing NumericalFailureError.
    """
    m = L.matrix if isinstance(L, AmplificationMatrix) else np.asarray(L)
    try:
        return float(np.max(np.abs(np.linalg.eigvals(m))))
    except np.linalg.LinAlgError:
        pass
    try:
        return float(np.max(np.abs(np.linalg.eigvals(_balance(m)))))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigenvalue computation failed: {exc}") from exc


def _balance(m):
    """One sweep of Osborne balancing with power-of-two scale factors."""
    b = np.array(m, dtype=complex)
    n = b.shape[0]
    for i in range(n):
        r = np.sum(np.abs(b[i, :])) - np.abs(b[i, i])
        c = np.sum(np.abs(b[:, i])) - np.abs(b[i, i])
        if r > 0 and c > 0:
            scale = 2.0 ** round(np.log2(np.sqrt(r / c)))
            b[:, i] *= scale
            b[i, :] /= scale
    return b


def _grid_radii(cop: np.ndarray, vset: VelocitySet, dt: float, kx, ky) -> np.ndarray:
    """Spectral radii of A(k) cop for all combinations of kx and ky."""
    phase_x = np.exp(1j * dt * np.outer(kx, vset.velocities[:, 0]))
    phase_y = np.exp(1j * dt * np.outer(ky, vset.velocities[:, 1]))
    phases = phase_x[:, np.newaxis, :] * phase_y[np.newaxis, :, :]
    mats = phases.reshape(-1, 9)[:, :, np.newaxis] * cop[np.newaxis, :, :]
    try:
        eig = np.linalg.eigvals(mats)
    except np.linalg.LinAlgError:
        return np.array([spectral_radius(m) for m in mats])
    return np.max(np.abs(eig), axis=1)


def max_radius_over_k(
    prob: StabilityProblem,
    V,
    kgrid_n: int = 128,
    refine_rounds: int = 2,
    refine_seeds: int = 4,
) -> float:
    """Maximum spectral radius of L(k) over the wavevector Brillouin zone.

    Scans a uniform kgrid_n x kgrid_n grid of [0, 2 pi/dx)^2, then runs
    5x5 refinement rounds around each of the ``refine_seeds`` largest
    well-separated local maxima (half-width one coarse spacing, then a
    quarter of it per round).  Near the stability threshold the unstable
    pockets can be a fraction of a grid cell wide, which is why the base
    grid is dense and the refinement chases several candidates.
    """
    if kgrid_n < 8:
        raise ValueError("kgrid_n must be at least 8")
    cop = collision_operator(prob, V)
    span = 2 * np.pi / (prob.vset.lam * prob.dt)
    axis = np.arange(kgrid_n) * (span / kgrid_n)
    # the collision factor is real, so L(-k) = conj(L(k)) and the radius
    # field has central symmetry: half the zone in kx covers everything
    n_half = kgrid_n // 2 + 1
    radii = _grid_radii(cop, prob.vset, prob.dt, axis[:n_half], axis).reshape(n_half, kgrid_n)
    best = float(np.max(radii))
    half0 = span / kgrid_n
    scratch = radii.copy()
    for _ in range(max(refine_seeds, 1) if refine_rounds else 0):
        flat_max = int(np.argmax(scratch))
        ix, iy = flat_max // kgrid_n, flat_max % kgrid_n
        if not np.isfinite(scratch[ix, iy]):
            break
        # suppress the chosen cell's neighbourhood so seeds spread out
        sl_x = np.arange(ix - 2, ix + 3)
        sl_x = sl_x[(sl_x >= 0) & (sl_x < n_half)]
        sl_y = np.arange(iy - 2, iy + 3) % kgrid_n
        scratch[np.ix_(sl_x, sl_y)] = -np.inf
        kx0, ky0 = axis[ix], axis[iy]
        half = half0
        for _ in range(refine_rounds):
            off = np.linspace(-half, half, 5)
            local = _grid_radii(cop, prob.vset, prob.dt, kx0 + off, ky0 + off)
            imax = int(np.argmax(local))
            if local[imax] > best:
                best = float(local[imax])
            kx0, ky0 = kx0 + off[imax // 5], ky0 + off[imax % 5]
            half /= 4.0
    return best


def max_stable_speed(
    prob: StabilityProblem,
    tol: float = 0.01,
    v_cap: float | None = None,
    kgrid_n: int = 128,
    refine_rounds: int = 2,
) -> float:
    """Largest |V| along the problem's direction with max_k r(L) <= 1.

    Scans |V| = 0, tol, 2 tol, ... up to ``v_cap`` (default lam) and returns
    the last stable value before the first unstable one; stability regions
    need not be monotone in |V|, so no bisection.  Returns -tol when even
    |V| = 0 is unstable (the scheme is unstable for all V).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if v_cap is None:
        v_cap = prob.vset.lam
    direction = np.array([np.cos(prob.theta), np.sin(prob.theta)])
    n_steps = int(np.floor(v_cap / tol + 1e-9))
    for i in range(n_steps + 1):
        v = i * tol
        if max_radius_over_k(prob, v * direction, kgrid_n, refine_rounds) > 1.0 + RADIUS_TOL:
            return (i - 1) * tol if i > 0 else -tol
    return n_steps * tol
