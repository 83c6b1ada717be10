import numpy as np
import pytest

from rvlbm import DegenerateShiftError, MomentBasis, MomentFamily, d2q9, eval_basis, invert, moment_matrix
from rvlbm.moments import shift_matrix, unshifted_pair

A0 = MomentBasis(MomentFamily.A, 0.0)
A1 = MomentBasis(MomentFamily.A, 1.0)


def test_eval_basis_family_a_alpha1():
    got = eval_basis(A1, (1.0, 0.0))
    assert np.allclose(got, [1, 1, 0, 1, 1, 0, 1, 0, 0.5], atol=0)


def test_eval_basis_family_a_alpha0():
    got = eval_basis(A0, (1.0, 1.0))
    assert np.allclose(got, [1, 1, 1, 2, 0, 1, 1, 1, 1], atol=0)


def test_eval_basis_family_b():
    got = eval_basis(MomentBasis(MomentFamily.B, 0.5), (1.0, 0.0))
    assert np.allclose(got, [1, 1, 0, 1, 1, 0, 0.5, 0.5, 0], atol=0)


def test_eval_basis_batched():
    pts = np.array([[1.0, 0.0], [1.0, 1.0]])
    out = eval_basis(A0, pts)
    assert out.shape == (2, 9)
    assert np.array_equal(out[1], eval_basis(A0, (1.0, 1.0)))


def test_moment_matrix_row0_all_ones(vset):
    for basis in (A0, A1, MomentBasis(MomentFamily.B, 0.3)):
        m = moment_matrix(basis, vset, (0.0, 0.0))
        assert np.array_equal(m.entries[0], np.ones(9))


def test_moment_matrix_energy_row(vset):
    m = moment_matrix(A1, vset, (0.0, 0.0))
    assert np.array_equal(m.entries[3], [0, 1, 1, 1, 1, 2, 2, 2, 2])


def test_moment_matrix_shifted_determinant(vset):
    # LU-based determinant oracle: the shifted matrix stays nonsingular
    m = moment_matrix(A0, vset, (0.1, 0.05))
    assert abs(np.linalg.det(m.entries)) > 0


def test_invert_identity(vset):
    m = moment_matrix(A1, vset, (0.0, 0.0))
    prod = m.entries @ invert(m)
    assert np.max(np.abs(prod - np.eye(9))) < 1e-12


def test_invert_roundtrip(vset, rng):
    m = moment_matrix(A0, vset, (0.2, -0.1))
    f = rng.normal(size=9)
    assert np.max(np.abs(invert(m) @ (m.entries @ f) - f)) < 1e-12


def test_shift_transform_unit_determinant(vset):
    # determinants computed numerically for both factors; the change of basis
    # between two bases of the same 9-point function space is volume preserving
    m_shift = moment_matrix(A0, vset, (0.3, 0.1))
    m_zero = moment_matrix(A0, vset, (0.0, 0.0))
    ratio = np.linalg.det(m_shift.entries) / np.linalg.det(m_zero.entries)
    assert abs(abs(ratio) - 1.0) < 1e-12
    t = shift_matrix(A0, vset, (0.3, 0.1))
    assert abs(abs(np.linalg.det(t)) - 1.0) < 1e-12


def test_inverse_contract_tolerance(vset, rng):
    for _ in range(20):
        ut = rng.uniform(-0.8, 0.8, size=2)
        m = moment_matrix(A0, vset, ut)
        assert np.max(np.abs(m.entries @ invert(m) - np.eye(9))) < 1e-10


def test_condition_threshold_raises(vset):
    with pytest.raises(DegenerateShiftError) as err:
        moment_matrix(A0, vset, (0.5, 0.2), cond_threshold=1.0)
    assert err.value.utilde == (0.5, 0.2)
    m = moment_matrix(A0, vset, (0.5, 0.2))
    with pytest.raises(DegenerateShiftError):
        invert(m, cond_threshold=1.0)


def test_x_cubed_equals_lambda_sq_x_on_velocities(vset):
    # third-order aliasing on the velocity set: X^3 = lam^2 X at all 9 points
    x = vset.velocities[:, 0]
    assert np.array_equal(x**3, vset.lam**2 * x)


def test_family_a_alpha_rows_differ_by_conserved_rows(vset):
    # rows of family A at alpha vs alpha=0 differ only by combinations of
    # rows 1, 2, 3 (X, Y, X^2+Y^2); solve the small system and check exactly
    lam2 = vset.lam**2
    for alpha in (-1.0, 0.5, 1.0):
        ma = moment_matrix(MomentBasis(MomentFamily.A, alpha), vset, (0.0, 0.0)).entries
        m0 = moment_matrix(A0, vset, (0.0, 0.0)).entries
        diff = ma - m0
        assert np.array_equal(diff[6], alpha * lam2 * m0[1])
        assert np.array_equal(diff[7], alpha * lam2 * m0[2])
        assert np.array_equal(diff[8], 0.5 * alpha * lam2 * m0[3])
        basis_rows = m0[[1, 2, 3]].T
        for k in range(9):
            coef, residual, *_ = np.linalg.lstsq(basis_rows, diff[k], rcond=None)
            assert np.max(np.abs(basis_rows @ coef - diff[k])) < 1e-12


def test_moment_matrix_smooth_in_utilde(vset):
    # finite differences of the entries against the analytic polynomial gradient
    def gradient(basis, ut):
        # d/d(utx), d/d(uty) of P_k(v - ut) = -grad P_k evaluated at v - ut
        shifted = vset.velocities - np.asarray(ut)
        x, y = shifted[:, 0], shifted[:, 1]
        a = basis.alpha
        px = np.stack(
            [
                np.zeros(9),
                np.ones(9),
                np.zeros(9),
                2 * x,
                2 * x,
                y,
                3 * a * x**2 + y**2,
                2 * x * y,
                2 * a * x**3 + 2 * x * y**2,
            ]
        )
        py = np.stack(
            [
                np.zeros(9),
                np.zeros(9),
                np.ones(9),
                2 * y,
                -2 * y,
                x,
                2 * x * y,
                x**2 + 3 * a * y**2,
                2 * a * y**3 + 2 * x**2 * y,
            ]
        )
        return -px, -py

    basis = MomentBasis(MomentFamily.A, 0.7)
    ut = np.array([0.15, -0.2])
    h = 1e-4
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        fd = (
            moment_matrix(basis, vset, ut + e).entries
            - moment_matrix(basis, vset, ut - e).entries
        ) / (2 * h)
        analytic = gradient(basis, ut)[axis]
        assert np.max(np.abs(fd - analytic)) < 1e-6


def test_unshifted_pair_cached(vset):
    m0a, inva = unshifted_pair(A0, vset)
    m0b, invb = unshifted_pair(A0, vset)
    assert m0a is m0b and inva is invb
