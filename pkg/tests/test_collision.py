import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rvlbm import (
    EquilibriumKind,
    MomentBasis,
    MomentFamily,
    RelaxationVector,
    UtildePolicy,
    bgk,
    d2q9,
    feq,
    lattice_constants,
    rates_to_viscosity,
    relax,
    trt1,
    trt2,
    viscosity_to_rates,
)

T2 = EquilibriumKind.TRUNCATED2
P4 = EquilibriumKind.PRODUCT4
A0 = MomentBasis(MomentFamily.A, 0.0)
A1 = MomentBasis(MomentFamily.A, 1.0)


def random_state(rng, vset, consts, u_scale=0.2):
    """A positive random distribution with moderate macroscopic velocity."""
    u = rng.uniform(-u_scale, u_scale, size=2)
    f = feq(T2, rng.uniform(0.5, 2.0), u, consts, vset)
    f = f * rng.uniform(0.8, 1.2, size=9)
    return f


def test_trt1_placement():
    s = trt1(1.5, 1.9843750).s
    assert s[4] == s[5] == 1.9843750
    assert s[3] == s[6] == s[7] == s[8] == 1.5
    assert s[0] == s[1] == s[2] == 0.0


def test_trt1_zero_rates_identity():
    assert np.array_equal(trt1(0.0, 0.0).s, np.zeros(9))


def test_trt_bgk_degeneracy():
    assert np.array_equal(trt1(1.3, 1.3).s, bgk(1.3).s)
    assert np.array_equal(trt2(1.3, 1.3).s, bgk(1.3).s)


def test_trt2_placement():
    s = trt2(1.0, 2.0).s
    assert s[6] == s[7] == 2.0
    assert s[3] == s[4] == s[5] == s[8] == 1.0
    assert np.array_equal(trt2(2 - 2.0**0, 2 - 2.0**-3).s, [0, 0, 0, 1, 1, 1, 1.875, 1.875, 1])


def test_relaxation_vector_validation():
    with pytest.raises(ValueError):
        trt1(2.5, 1.0)
    with pytest.raises(ValueError):
        trt1(-0.1, 1.0)
    with pytest.raises(ValueError):
        RelaxationVector(np.array([0.5, 0, 0, 1, 1, 1, 1, 1, 1]))


def test_viscosity_to_rates_table_headers():
    # s_e at dx=1/16 prints 0.44, s_nu at dx=1/128 prints 1.86
    s_e, _ = viscosity_to_rates(0.0366, 1e-4, 1.0, 1.0 / 16)
    assert s_e == pytest.approx(0.443, abs=5e-4)
    assert round(s_e, 2) == 0.44
    _, s_nu = viscosity_to_rates(0.0366, 1e-4, 1.0, 1.0 / 128)
    assert s_nu == pytest.approx(1.857, abs=5e-4)
    assert round(s_nu, 2) == 1.86


def test_zero_viscosity_is_rate_two():
    s_e, s_nu = viscosity_to_rates(0.0, 0.0, 1.0, 0.01)
    assert s_e == 2.0 and s_nu == 2.0


def test_viscosity_roundtrip():
    mu, nu = 0.0366, 1e-4
    s_e, s_nu = viscosity_to_rates(mu, nu, 1.0, 1.0 / 64)
    back = rates_to_viscosity(s_e, s_nu, 1.0, 1.0 / 64)
    assert abs(back[0] - mu) < 1e-12 and abs(back[1] - nu) < 1e-12


def test_negative_viscosity_rejected():
    with pytest.raises(ValueError):
        viscosity_to_rates(-1e-3, 1e-4, 1.0, 0.01)


def test_policy_resolution():
    u = np.array([0.3, -0.1])
    assert np.array_equal(UtildePolicy.zero().resolve(u), [0, 0])
    assert np.array_equal(UtildePolicy.fluid().resolve(u), u)
    assert np.allclose(UtildePolicy.scaled_fluid(0.5).resolve(u), [0.15, -0.05], atol=0)
    assert np.array_equal(UtildePolicy.fixed((0.1, 0.2)).resolve(u), [0.1, 0.2])
    with pytest.raises(ValueError):
        UtildePolicy("bogus")


def test_relax_zero_rates_is_identity(vset, consts, rng):
    f = random_state(rng, vset, consts)
    out = relax(f, A0, (0.1, 0.0), trt1(0.0, 0.0), T2, consts, vset)
    assert np.max(np.abs(out - f)) < 1e-14


def test_relax_unit_rates_reach_equilibrium(vset, consts, rng):
    # s = 1 on all non-conserved moments lands exactly on feq, any frame, any basis
    f = random_state(rng, vset, consts)
    rho = f.sum()
    u = f @ vset.velocities / rho
    expected = feq(T2, rho, u, consts, vset)
    for basis in (A0, A1, MomentBasis(MomentFamily.B, 0.4)):
        for ut in ((0.0, 0.0), (0.17, -0.06), tuple(u)):
            out = relax(f, basis, ut, bgk(1.0), T2, consts, vset)
            assert np.max(np.abs(out - expected)) < 1e-13


def test_relax_conserves_density_and_momentum(vset, consts, rng):
    f = feq(T2, 1.0, (0.1, 0.0), consts, vset) * rng.uniform(0.9, 1.1, size=9)
    out = relax(f, A0, (0.1, 0.0), trt1(1.2, 1.8), T2, consts, vset)
    assert abs(out.sum() - f.sum()) < 1e-12
    assert np.max(np.abs((out - f) @ vset.velocities)) < 1e-12


@settings(deadline=None, max_examples=40)
@given(
    seed=st.integers(min_value=0, max_value=2**31),
    family=st.sampled_from([MomentFamily.A, MomentFamily.B]),
    alpha=st.floats(min_value=-1, max_value=1),
    kind=st.sampled_from([T2, P4]),
)
def test_relax_conservation_property(seed, family, alpha, kind):
    vset = d2q9(1.0)
    consts = lattice_constants(1.0)
    rng = np.random.default_rng(seed)
    f = random_state(rng, vset, consts)
    s = trt1(rng.uniform(0, 2), rng.uniform(0, 2))
    ut = rng.uniform(-0.5, 0.5, size=2)
    out = relax(f, MomentBasis(family, alpha), ut, s, kind, consts, vset)
    scale = max(1.0, f.sum())
    assert abs(out.sum() - f.sum()) < 1e-10 * scale
    assert np.max(np.abs((out - f) @ vset.velocities)) < 1e-10 * scale


def test_bgk_frame_independence(vset, consts, rng):
    # with one shared rate the frame velocity plays no role
    for _ in range(10):
        f = random_state(rng, vset, consts)
        s = bgk(rng.uniform(0.1, 2.0))
        base = relax(f, A0, (0.0, 0.0), s, T2, consts, vset)
        for ut in ((0.3, 0.0), (-0.2, 0.4), (0.05, 0.05)):
            assert np.max(np.abs(relax(f, A0, ut, s, T2, consts, vset) - base)) < 1e-10
        # and the basis plays no role either
        assert np.max(np.abs(relax(f, A1, (0.1, 0.2), s, T2, consts, vset) - base)) < 1e-10


def test_fixed_frame_alpha_equivalence_family_a(vset, consts, rng):
    # relaxing family A moments at utilde = 0 is the same scheme for any alpha
    for trt in (trt1, trt2):
        s = trt(0.7, 1.9)
        for _ in range(5):
            f = random_state(rng, vset, consts)
            out0 = relax(f, A0, (0.0, 0.0), s, T2, consts, vset)
            out1 = relax(f, A1, (0.0, 0.0), s, T2, consts, vset)
            assert np.max(np.abs(out1 - out0)) < 1e-10


def test_family_b_trt1_alpha_independence_operator_level(vset):
    # at utilde = 0 the whole collision matrix is alpha-free for trt1
    from rvlbm.moments import moment_matrix

    s = trt1(0.6, 1.7).s

    def cmat(alpha):
        m = moment_matrix(MomentBasis(MomentFamily.B, alpha), vset, (0.0, 0.0)).entries
        return np.linalg.inv(m) @ (s[:, None] * m)

    assert np.max(np.abs(cmat(0.0) - cmat(0.8))) < 1e-10


def test_family_b_trt1_alpha_independence_shifted(vset, consts, rng):
    # at utilde != 0 the third-order moments and X^2+Y^2 share s_e, so the
    # shifted-basis change is absorbed
    s = trt1(0.6, 1.7)
    for _ in range(5):
        f = random_state(rng, vset, consts)
        ut = rng.uniform(-0.4, 0.4, size=2)
        out0 = relax(f, MomentBasis(MomentFamily.B, 0.0), ut, s, T2, consts, vset)
        out7 = relax(f, MomentBasis(MomentFamily.B, 0.7), ut, s, T2, consts, vset)
        assert np.max(np.abs(out7 - out0)) < 1e-10


def test_relax_methods_agree(vset, consts, rng):
    for _ in range(10):
        f = random_state(rng, vset, consts)
        ut = rng.uniform(-0.5, 0.5, size=2)
        s = trt2(rng.uniform(0, 2), rng.uniform(0, 2))
        fac = relax(f, A1, ut, s, P4, consts, vset, method="factorized")
        direct = relax(f, A1, ut, s, P4, consts, vset, method="direct")
        assert np.max(np.abs(fac - direct)) < 1e-10


def test_relax_rejects_nonpositive_density(vset, consts):
    with pytest.raises(ValueError):
        relax(-np.ones(9), A0, (0.0, 0.0), bgk(1.0), T2, consts, vset)
