"""D2Q9 lattice geometry, periodic grid indexing, and acoustic scaling.

Velocity numbering (a frozen contract; weight vectors and the product
equilibrium's d_j coefficients index into it):

    6   2   5
      \\ | /
    3 - 0 - 1
      / | \\
    7   4   8

Index 0 is the rest velocity; 1..4 are the axis velocities (lam, 0),
(0, lam), (-lam, 0), (0, -lam); 5..8 are the diagonals (lam, lam),
(-lam, lam), (-lam, -lam), (lam, -lam), all in grid units per time step
for the velocity scale lam.  Time and space steps are tied by the
acoustic scaling dt = dx / lam.
"""

from dataclasses import dataclass

import numpy as np

UNIT_VELOCITIES = np.array(
    [
        [0, 0],
        [1, 0],
        [0, 1],
        [-1, 0],
        [0, -1],
        [1, 1],
        [-1, 1],
        [-1, -1],
        [1, -1],
    ],
    dtype=float,
)
UNIT_VELOCITIES.setflags(write=False)


@dataclass(frozen=True, eq=False)
class VelocitySet:
    """The 9 lattice velocities and their scale."""

    lam: float
    velocities: np.ndarray  # (9, 2), ordered as in the module docstring


def d2q9(lam: float) -> VelocitySet:
    """Build the D2Q9 velocity set for velocity scale ``lam > 0``."""
    if not lam > 0:
        raise ValueError(f"velocity scale must be positive, got {lam}")
    v = lam * UNIT_VELOCITIES
    v.setflags(write=False)
    return VelocitySet(float(lam), v)


@dataclass(frozen=True)
class Grid:
    """Periodic grid of nx * ny square cells with steps dx and dt = dx/lam."""

    nx: int
    ny: int
    dx: float
    dt: float

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError("dx and dt must be positive")

    @classmethod
    def unit_square(cls, n: int, lam: float, ny: int | None = None) -> "Grid":
        """Grid on [0,1]^2 with dx = 1/n and the acoustic scaling dt = dx/lam."""
        dx = 1.0 / n
        return cls(nx=n, ny=n if ny is None else ny, dx=dx, dt=dx / lam)


def periodic_shift(grid: Grid, cell: tuple[int, int], v) -> tuple[int, int]:
    """Source cell feeding ``cell`` when transported by velocity ``v``.

    Returns (cell - v*dt/dx) wrapped modulo (nx, ny).  ``v`` must be
    lattice compatible: v*dt/dx an integer vector.
    """
    shifts = []
    for comp in (float(v[0]), float(v[1])):
        s = comp * grid.dt / grid.dx
        r = round(s)
        if abs(s - r) > 1e-9:
            raise ValueError(f"velocity {tuple(v)} is not lattice compatible with the grid")
        shifts.append(int(r))
    i, j = cell
    return (i - shifts[0]) % grid.nx, (j - shifts[1]) % grid.ny
