"""Nonlinear D2Q9 time stepping on a periodic grid.

Each step collides every cell in its configured relaxation frame and
transports the post-collision distributions to the neighbouring nodes
with periodic wrap.  The module also provides the doubly periodic
Kelvin-Helmholtz initial condition (two tanh shear layers plus a sine
transverse perturbation), a centered-difference vorticity, blow-up aware
long runs, and CSV field dumps.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .collision import RelaxationVector, UtildePolicy
from .equilibrium import EquilibriumKind, LatticeConstants, feq, lattice_constants
from .errors import DegenerateShiftError
from .lattice import Grid, VelocitySet
from .moments import MomentBasis, MomentFamily, moment_matrix, unshifted_pair

BLOWUP_REASONS = {
    _kernels.STATUS_NONFINITE: "non-finite value",
    _kernels.STATUS_BAD_DENSITY: "density <= 0",
    _kernels.STATUS_FAST_CELL: "|u| > u_max",
}


@dataclass(frozen=True, eq=False)
class SchemeConfig:
    """Basis, equilibrium, relaxation, relative-velocity policy, and geometry."""

    basis: MomentBasis
    kind: EquilibriumKind
    s: RelaxationVector
    policy: UtildePolicy
    grid: Grid
    vset: VelocitySet

    def __post_init__(self):
        if abs(self.grid.dt * self.vset.lam - self.grid.dx) > 1e-12 * self.grid.dx:
            raise ValueError("grid and velocity set violate the acoustic scaling dt = dx/lam")

    @property
    def consts(self) -> LatticeConstants:
        return lattice_constants(self.vset.lam)


@dataclass(eq=False)
class FieldState:
    """Per-cell distribution array of shape (nx, ny, 9) at time t."""

    f: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class RunOutcome:
    """Stable(iterations) or BlewUp(iteration, reason)."""

    stable: bool
    iteration: int
    reason: str | None = None

    @classmethod
    def stable_after(cls, iterations: int) -> "RunOutcome":
        return cls(stable=True, iteration=iterations)

    @classmethod
    def blew_up(cls, iteration: int, reason: str) -> "RunOutcome":
        return cls(stable=False, iteration=iteration, reason=reason)


class _Plan:
    """Kernel argument bundle for one scheme configuration."""

    def __init__(self, cfg: SchemeConfig):
        vset = cfg.vset
        consts = cfg.consts
        self.vx = np.ascontiguousarray(vset.velocities[:, 0])
        self.vy = np.ascontiguousarray(vset.velocities[:, 1])
        unit = vset.velocities / vset.lam
        self.cxi = np.ascontiguousarray(np.rint(unit[:, 0]).astype(np.int64))
        self.cyi = np.ascontiguousarray(np.rint(unit[:, 1]).astype(np.int64))
        self.weights = consts.weights
        self.dcoef = consts.d
        self.c2 = consts.c0**2
        self.alpha = cfg.basis.alpha
        self.family_id = (
            _kernels.FAMILY_A if cfg.basis.family is MomentFamily.A else _kernels.FAMILY_B
        )
        self.kind_id = (
            _kernels.KIND_TRUNCATED2
            if cfg.kind is EquilibriumKind.TRUNCATED2
            else _kernels.KIND_PRODUCT4
        )
        self.s = cfg.s.s
        policy = cfg.policy
        if policy.kind == "scaled" and policy.scale == 0.0:
            policy = UtildePolicy.zero()
        self.policy_id = {
            "zero": _kernels.POLICY_ZERO,
            "fluid": _kernels.POLICY_FLUID,
            "scaled": _kernels.POLICY_SCALED,
            "fixed": _kernels.POLICY_FIXED,
        }[policy.kind]
        self.scale = policy.scale
        self.wx, self.wy = policy.w
        # constant-shift policies collapse to one combined matrix M^-1 S M
        self.use_cmat = policy.kind in ("zero", "fixed")
        if self.use_cmat:
            if policy.kind == "zero":
                m, m_inv = unshifted_pair(cfg.basis, vset)
            else:
                m = moment_matrix(cfg.basis, vset, policy.w).entries
                m_inv = np.linalg.inv(m)
            self.cmat = np.ascontiguousarray(m_inv @ (cfg.s.s[:, np.newaxis] * m))
        else:
            self.cmat = np.zeros((9, 9))

    def advance(self, f, fstar, fnew, umax2, check):
        return _kernels.step_kernel(
            f,
            fstar,
            fnew,
            self.cxi,
            self.cyi,
            self.vx,
            self.vy,
            self.weights,
            self.dcoef,
            self.c2,
            self.alpha,
            self.family_id,
            self.kind_id,
            self.s,
            self.policy_id,
            self.scale,
            self.wx,
            self.wy,
            self.cmat,
            self.use_cmat,
            umax2,
            check,
        )


def macroscopics(f, vset: VelocitySet):
    """Density and velocity fields (rho, ux, uy) of a distribution array."""
    f = np.asarray(f)
    rho = f.sum(axis=-1)
    qx = f @ vset.velocities[:, 0]
    qy = f @ vset.velocities[:, 1]
    return rho, qx / rho, qy / rho


def total_mass(state: FieldState) -> float:
    return float(state.f.sum())


def total_momentum(state: FieldState, vset: VelocitySet) -> np.ndarray:
    return state.f.reshape(-1, 9).sum(axis=0) @ vset.velocities


def step(state: FieldState, cfg: SchemeConfig) -> FieldState:
    """One collision + transport step; returns the advanced state.

    Blow-up is not detected here (run_until owns that); unhealthy cells
    propagate non-finite values instead of raising mid-grid.
    """
    plan = _Plan(cfg)
    fstar = np.empty_like(state.f)
    fnew = np.empty_like(state.f)
    status, i, j = plan.advance(state.f, fstar, fnew, np.inf, False)
    if status == _kernels.STATUS_SINGULAR:
        raise DegenerateShiftError(_cell_utilde(state.f[i, j], cfg))
    return FieldState(f=fnew, t=state.t + cfg.grid.dt)


def _cell_utilde(fcell, cfg):
    rho = fcell.sum()
    u = fcell @ cfg.vset.velocities / rho
    return cfg.policy.resolve(u)


def run_until(
    state: FieldState,
    cfg: SchemeConfig,
    n_iters: int,
    u_max: float | None = None,
    on_step=None,
) -> RunOutcome:
    """Advance up to ``n_iters`` steps, stopping at blow-up.

    Blow-up means any non-finite value, any cell density <= 0, or any
    cell speed above ``u_max`` (default 10 lam); the outcome encodes it,
    nothing is raised.  ``state`` is advanced in place.  ``on_step``, if
    given, is called as on_step(iteration, state) after every step.
    """
    if n_iters < 1:
        raise ValueError("n_iters must be at least 1")
    if u_max is None:
        u_max = 10.0 * cfg.vset.lam
    umax2 = u_max * u_max
    plan = _Plan(cfg)
    f = state.f
    fstar = np.empty_like(f)
    fnew = np.empty_like(f)
    for it in range(1, n_iters + 1):
        status, i, j = plan.advance(f, fstar, fnew, umax2, True)
        if status == _kernels.STATUS_SINGULAR:
            raise DegenerateShiftError(_cell_utilde(f[i, j], cfg))
        if status != _kernels.STATUS_OK:
            state.f = f
            return RunOutcome.blew_up(it, BLOWUP_REASONS[status])
        f, fnew = fnew, f
        state.f = f
        state.t += cfg.grid.dt
        if on_step is not None:
            on_step(it, state)
    reason = _final_health(f, cfg.vset, umax2)
    if reason is not None:
        return RunOutcome.blew_up(n_iters, reason)
    return RunOutcome.stable_after(n_iters)


def _final_health(f, vset, umax2):
    if not np.all(np.isfinite(f)):
        return BLOWUP_REASONS[_kernels.STATUS_NONFINITE]
    rho = f.sum(axis=-1)
    if np.any(rho <= 0.0):
        return BLOWUP_REASONS[_kernels.STATUS_BAD_DENSITY]
    qx = f @ vset.velocities[:, 0]
    qy = f @ vset.velocities[:, 1]
    u2 = (qx / rho) ** 2 + (qy / rho) ** 2
    if not np.all(np.isfinite(u2)) or np.any(u2 > umax2):
        return BLOWUP_REASONS[_kernels.STATUS_FAST_CELL]
    return None


def init_kelvin_helmholtz(
    grid: Grid,
    U: float,
    k: float,
    delta: float,
    kind: EquilibriumKind,
    consts: LatticeConstants,
    vset: VelocitySet,
) -> FieldState:
    """Doubly periodic shear layers with a transverse sine perturbation.

    ux = U tanh(k(y - 1/4)) for y <= 1/2 and U tanh(k(3/4 - y)) above,
    uy = U delta sin(2 pi (x + 1/4)), rho = 1, sampled at cell centers;
    distributions start at the configured equilibrium.
    """
    if U < 0:
        raise ValueError("shear speed U must be non-negative")
    x = (np.arange(grid.nx) + 0.5) * grid.dx
    y = (np.arange(grid.ny) + 0.5) * grid.dx
    xg, yg = np.meshgrid(x, y, indexing="ij")
    ux = np.where(yg <= 0.5, U * np.tanh(k * (yg - 0.25)), U * np.tanh(k * (0.75 - yg)))
    uy = U * delta * np.sin(2 * np.pi * (xg + 0.25))
    u = np.stack([ux, uy], axis=-1)
    f = feq(kind, np.ones_like(ux), u, consts, vset)
    return FieldState(f=np.ascontiguousarray(f), t=0.0)


def vorticity(state: FieldState, grid: Grid, vset: VelocitySet) -> np.ndarray:
    """Centered periodic finite-difference curl d_x uy - d_y ux."""
    _, ux, uy = macroscopics(state.f, vset)
    return curl(ux, uy, grid.dx)


def curl(ux, uy, dx: float) -> np.ndarray:
    """Curl of a velocity field sampled on a periodic grid (axis 0 = x)."""
    duy_dx = (np.roll(uy, -1, axis=0) - np.roll(uy, 1, axis=0)) / (2 * dx)
    dux_dy = (np.roll(ux, -1, axis=1) - np.roll(ux, 1, axis=1)) / (2 * dx)
    return duy_dx - dux_dy


def dump_fields_csv(state: FieldState, grid: Grid, vset: VelocitySet, path) -> None:
    """Write x, y, rho, ux, uy, omega for every cell with a one-line header."""
    rho, ux, uy = macroscopics(state.f, vset)
    omega = curl(ux, uy, grid.dx)
    x = (np.arange(grid.nx) + 0.5) * grid.dx
    y = (np.arange(grid.ny) + 0.5) * grid.dx
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "rho", "ux", "uy", "omega"])
        for j in range(grid.ny):
            for i in range(grid.nx):
                writer.writerow(
                    [
                        f"{x[i]:.17g}",
                        f"{y[j]:.17g}",
                        f"{rho[i, j]:.17g}",
                        f"{ux[i, j]:.17g}",
                        f"{uy[i, j]:.17g}",
                        f"{omega[i, j]:.17g}",
                    ]
                )
