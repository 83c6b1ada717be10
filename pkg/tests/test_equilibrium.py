import numpy as np
import pytest

from rvlbm import EquilibriumKind, d2q9, feq, lattice_constants, linearized_equilibrium

T2 = EquilibriumKind.TRUNCATED2
P4 = EquilibriumKind.PRODUCT4

REST_WEIGHTS = np.array([4 / 9, 1 / 9, 1 / 9, 1 / 9, 1 / 9, 1 / 36, 1 / 36, 1 / 36, 1 / 36])


def test_truncated_rest_state(vset, consts):
    assert np.allclose(feq(T2, 1.0, (0.0, 0.0), consts, vset), REST_WEIGHTS, atol=1e-16, rtol=0)


def test_product_rest_equals_truncated(vset, consts):
    at_rest_t = feq(T2, 1.0, (0.0, 0.0), consts, vset)
    at_rest_p = feq(P4, 1.0, (0.0, 0.0), consts, vset)
    assert np.array_equal(at_rest_t, at_rest_p)


def test_first_moment_identity(vset, consts):
    out = feq(T2, 1.0, (0.1, 0.2), consts, vset)
    q = out @ vset.velocities
    assert np.max(np.abs(q - [0.1, 0.2])) < 1e-15


def test_zero_density_gives_zero_vector(vset, consts):
    assert np.array_equal(feq(T2, 0.0, (0.3, 0.1), consts, vset), np.zeros(9))


def test_negative_density_rejected(vset, consts):
    with pytest.raises(ValueError):
        feq(T2, -1.0, (0.0, 0.0), consts, vset)


@pytest.mark.parametrize("kind", [T2, P4])
def test_conservation_100_random_velocities(kind, vset, consts, rng):
    # the cubic and d_j corrections cancel in the first two moment sums
    eps = np.finfo(float).eps
    for _ in range(100):
        rho = rng.uniform(0.2, 3.0)
        angle = rng.uniform(0, 2 * np.pi)
        speed = rng.uniform(0, 0.7 * vset.lam)
        u = speed * np.array([np.cos(angle), np.sin(angle)])
        out = feq(kind, rho, u, consts, vset)
        assert abs(out.sum() - rho) <= 10 * eps * rho
        assert np.max(np.abs(out @ vset.velocities - rho * u)) <= 10 * eps * rho


def test_feq_batched(vset, consts, rng):
    u = rng.uniform(-0.3, 0.3, size=(5, 4, 2))
    rho = rng.uniform(0.5, 2.0, size=(5, 4))
    out = feq(P4, rho, u, consts, vset)
    assert out.shape == (5, 4, 9)
    assert np.array_equal(out[2, 3], feq(P4, rho[2, 3], u[2, 3], consts, vset))


@pytest.mark.parametrize("kind", [T2, P4])
def test_linearized_columns_conserve_density(kind, vset, consts):
    e = linearized_equilibrium(kind, (0.0, 0.0), consts, vset)
    assert np.max(np.abs(e.sum(axis=0) - 1.0)) < 1e-14


@pytest.mark.parametrize("kind", [T2, P4])
def test_linearized_columns_conserve_momentum(kind, vset, consts):
    e = linearized_equilibrium(kind, (0.2, 0.0), consts, vset)
    first = vset.velocities.T @ e  # (2, 9), column l should equal v_l
    assert np.max(np.abs(first - vset.velocities.T)) < 1e-14


def _fd_jacobian(kind, V, consts, vset, rho_base=1.0, step=1e-6):
    """Central-difference oracle for the Jacobian of f -> feq(rho(f), q(f)/rho(f))."""

    def nonlinear(f):
        rho = f.sum()
        u = f @ vset.velocities / rho
        return feq(kind, rho, u, consts, vset)

    base = feq(kind, rho_base, V, consts, vset)
    jac = np.empty((9, 9))
    for l in range(9):
        e = np.zeros(9)
        e[l] = step
        jac[:, l] = (nonlinear(base + e) - nonlinear(base - e)) / (2 * step)
    return jac


@pytest.mark.parametrize("kind", [T2, P4])
def test_linearized_matches_fd_jacobian(kind, vset, consts):
    V = np.array([0.1, 0.05])
    e = linearized_equilibrium(kind, V, consts, vset)
    assert np.max(np.abs(e - _fd_jacobian(kind, V, consts, vset))) < 1e-6


def test_linearized_independent_of_base_density(vset, consts):
    # the closed form has no rho; the FD oracle at rho = 2 must agree too
    V = np.array([0.15, -0.1])
    e = linearized_equilibrium(P4, V, consts, vset)
    assert np.max(np.abs(e - _fd_jacobian(P4, V, consts, vset, rho_base=2.0))) < 1e-6


@pytest.mark.parametrize("kind", [T2, P4])
def test_linearized_identities_on_speed_disc(kind, vset, consts, rng):
    for _ in range(25):
        angle = rng.uniform(0, 2 * np.pi)
        speed = rng.uniform(0, 0.6 * vset.lam)
        V = speed * np.array([np.cos(angle), np.sin(angle)])
        e = linearized_equilibrium(kind, V, consts, vset)
        assert np.max(np.abs(e.sum(axis=0) - 1.0)) < 1e-13
        assert np.max(np.abs(vset.velocities.T @ e - vset.velocities.T)) < 1e-13


def test_constants_scale_with_lambda():
    c = lattice_constants(2.0)
    assert c.c0**2 == pytest.approx(4.0 / 3.0)
    assert c.weights.sum() == pytest.approx(1.0)
    assert np.array_equal(c.d, [-0.25, 0.5, 0.5, 0.5, 0.5, -1, -1, -1, -1])
    # weight identities: sum w v = 0 and sum w v v = c0^2 I
    vs = d2q9(2.0)
    assert np.max(np.abs(c.weights @ vs.velocities)) == 0
    second = np.einsum("j,ji,jk->ik", c.weights, vs.velocities, vs.velocities)
    assert np.allclose(second, c.c0**2 * np.eye(2), atol=1e-15)
    # product-correction identities: sum w d = 0 and sum w d v = 0
    assert abs(c.weights @ c.d) < 1e-16
    assert np.max(np.abs((c.weights * c.d) @ vs.velocities)) == 0
