"""Compiled per-cell collision and transport loops for the nonlinear stepper.

One step_kernel call advances the field one time step: collision into the
fstar scratch buffer, then a periodic gather into fnew.  The collision
resolves the shift velocity per cell, builds the shifted moment matrix,
and solves the 9x9 system in place with partially pivoted elimination;
policies with a constant shift use a precomputed combined matrix instead.

With check enabled the kernel aborts at the first unhealthy cell and
reports a status code examined by run_until; the buffers are then only
partially written and must be discarded.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_BAD_DENSITY = 2
STATUS_FAST_CELL = 3
STATUS_SINGULAR = 4

FAMILY_A = 0
FAMILY_B = 1
KIND_TRUNCATED2 = 0
KIND_PRODUCT4 = 1
POLICY_ZERO = 0
POLICY_FLUID = 1
POLICY_SCALED = 2
POLICY_FIXED = 3


@njit(cache=True)
def step_kernel(
    f,
    fstar,
    fnew,
    cxi,
    cyi,
    vx,
    vy,
    weights,
    dcoef,
    c2,
    alpha,
    family_id,
    kind_id,
    s,
    policy_id,
    scale,
    wx,
    wy,
    cmat,
    use_cmat,
    umax2,
    check,
):
    nx = f.shape[0]
    ny = f.shape[1]
    a = np.empty((9, 9))
    d = np.empty(9)
    h = np.empty(9)
    x = np.empty(9)

    for i in range(nx):
        for j in range(ny):
            rho = 0.0
            for q in range(9):
                rho += f[i, j, q]
            if check and not np.isfinite(rho):
                return STATUS_NONFINITE, i, j
            if check and rho <= 0.0:
                return STATUS_BAD_DENSITY, i, j
            qx = 0.0
            qy = 0.0
            for q in range(9):
                qx += vx[q] * f[i, j, q]
                qy += vy[q] * f[i, j, q]
            ux = qx / rho
            uy = qy / rho
            u2 = ux * ux + uy * uy
            if check:
                if not np.isfinite(u2):
                    return STATUS_NONFINITE, i, j
                if u2 > umax2:
                    return STATUS_FAST_CELL, i, j

            # equilibrium gap d = feq - f
            uxuy2 = (ux * uy) * (ux * uy)
            for q in range(9):
                uv = ux * vx[q] + uy * vy[q]
                g = 1.0 + uv / c2 + uv * uv / (2.0 * c2 * c2) - u2 / (2.0 * c2)
                if kind_id == KIND_PRODUCT4:
                    g += (
                        uv * uv * uv / (6.0 * c2 * c2 * c2)
                        - u2 * uv / (2.0 * c2 * c2)
                        + dcoef[q] * uxuy2 / (c2 * c2)
                    )
                d[q] = rho * weights[q] * g - f[i, j, q]

            if use_cmat:
                for r in range(9):
                    acc = 0.0
                    for q in range(9):
                        acc += cmat[r, q] * d[q]
                    fstar[i, j, r] = f[i, j, r] + acc
                continue

            if policy_id == POLICY_FLUID:
                utx = ux
                uty = uy
            elif policy_id == POLICY_SCALED:
                utx = scale * ux
                uty = scale * uy
            elif policy_id == POLICY_FIXED:
                utx = wx
                uty = wy
            else:
                utx = 0.0
                uty = 0.0

            # shifted moment matrix, rows = basis polynomials
            for q in range(9):
                X = vx[q] - utx
                Y = vy[q] - uty
                X2 = X * X
                Y2 = Y * Y
                a[0, q] = 1.0
                a[1, q] = X
                a[2, q] = Y
                a[3, q] = X2 + Y2
                a[4, q] = X2 - Y2
                a[5, q] = X * Y
                if family_id == FAMILY_A:
                    a[6, q] = X * (alpha * X2 + Y2)
                    a[7, q] = Y * (X2 + alpha * Y2)
                    a[8, q] = 0.5 * alpha * (X2 * X2 + Y2 * Y2) + X2 * Y2
                else:
                    a[6, q] = X * Y2 + alpha * (X2 + Y2)
                    a[7, q] = Y * X2 + alpha * (X2 + Y2)
                    a[8, q] = X2 * Y2

            # h = S M d; rows 0..2 have zero rate
            for r in range(9):
                if s[r] == 0.0:
                    h[r] = 0.0
                else:
                    acc = 0.0
                    for q in range(9):
                        acc += a[r, q] * d[q]
                    h[r] = s[r] * acc

            # solve M x = h, partial pivoting
            for col in range(9):
                piv = col
                mx = abs(a[col, col])
                for r in range(col + 1, 9):
                    v = abs(a[r, col])
                    if v > mx:
                        mx = v
                        piv = r
                if mx == 0.0:
                    return STATUS_SINGULAR, i, j
                if piv != col:
                    for q in range(col, 9):
                        tmp = a[col, q]
                        a[col, q] = a[piv, q]
                        a[piv, q] = tmp
                    tmp = h[col]
                    h[col] = h[piv]
                    h[piv] = tmp
                inv = 1.0 / a[col, col]
                for r in range(col + 1, 9):
                    fac = a[r, col] * inv
                    if fac != 0.0:
                        for q in range(col + 1, 9):
                            a[r, q] -= fac * a[col, q]
                        h[r] -= fac * h[col]
            for col in range(8, -1, -1):
                acc = h[col]
                for q in range(col + 1, 9):
                    acc -= a[col, q] * x[q]
                x[col] = acc / a[col, col]

            for q in range(9):
                fstar[i, j, q] = f[i, j, q] + x[q]

    # periodic transport: gather from the upstream cell
    for i in range(nx):
        for j in range(ny):
            for q in range(9):
                si = (i - cxi[q] + nx) % nx
                sj = (j - cyi[q] + ny) % ny
                fnew[i, j, q] = fstar[si, sj, q]
    return STATUS_OK, -1, -1
