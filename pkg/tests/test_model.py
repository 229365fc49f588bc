import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupledcav.errors import (
    CableResonanceError,
    ChainSizeError,
    InconsistentParamsError,
    VariantMismatchError,
    ZeroCouplingError,
)
from coupledcav.model import (
    CableCoupling,
    CavityParams,
    ChainSpec,
    DirectCoupling,
    build_cable_model,
    build_chain_model,
    build_direct_model,
    effective_coupling,
    eliminate_cable,
    wrap_phase,
)


def induced_matrix(c1, c2, coupling, frame):
    """Generator read off by eliminating the cable fields numerically.

    Feeds unit mode amplitudes through ``eliminate_cable`` and evaluates the
    right-hand sides of the unreduced equations, column by column.
    """
    r = cmath.exp(1j * coupling.theta - coupling.gamma0L0 / 2)
    cols = []
    for a1, a2 in ((1.0, 0.0), (0.0, 1.0)):
        b = eliminate_cable(a1, a2, coupling, c1.gamma, c2.gamma)
        d1 = (-1j * (c1.omega - frame) - c1.kappa / 2) * a1 - math.sqrt(c1.gamma) * b.b2 * r
        d2 = (-1j * (c2.omega - frame) - c2.kappa / 2) * a2 - math.sqrt(c2.gamma) * b.b1 * r
        cols.append([d1, d2])
    return np.array(cols).T


class TestCavityParams:
    def test_total_rate(self):
        c = CavityParams(10.0, 0.5, 0.25, 0.125)
        assert c.kappa == 0.5 + 0.25 + 0.125

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(omega=0.0, kappa_i=1.0),
            dict(omega=1.0, kappa_i=-1.0),
            dict(omega=1.0, kappa_i=1.0, kappa_e=-0.1),
            dict(omega=1.0, kappa_i=1.0, gamma=-0.1),
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InconsistentParamsError):
            CavityParams(**kwargs)

    def test_from_loaded_q(self):
        w = 2 * math.pi * 1.3e9
        c = CavityParams.from_loaded_q(w, 2.56e9, kappa_e_fraction=0.1, gamma_fraction=0.5)
        assert c.kappa == pytest.approx(w / 2.56e9, rel=1e-14)
        assert c.gamma == pytest.approx(0.5 * w / 2.56e9, rel=1e-14)


class TestDirectModel:
    def test_uncoupled_identity(self):
        c = CavityParams(5.0, 1.0)
        m = build_direct_model(c, c, DirectCoupling(0.0), frame=5.0)
        np.testing.assert_array_equal(m.matrix, np.diag([-0.5, -0.5]))

    def test_symmetric_pair(self):
        kappa, g = 0.7, 0.3
        c = CavityParams(5.0, kappa)
        m = build_direct_model(c, c, DirectCoupling(g), frame=5.0)
        sx = np.array([[0, 1], [1, 0]])
        np.testing.assert_allclose(m.matrix, -kappa / 2 * np.eye(2) - 1j * g * sx, atol=1e-15)

    def test_detuned_entries(self):
        frame = 10.0
        c1 = CavityParams(frame + 1.0, 2.0)
        c2 = CavityParams(frame - 1.0, 4.0)
        m = build_direct_model(c1, c2, DirectCoupling(0.5), frame=frame)
        # each entry evaluated by hand from -i(omega - frame) - kappa/2 and -i g
        expected = np.array([[-1j * 1.0 - 1.0, -0.5j], [-0.5j, 1j * 1.0 - 2.0]])
        np.testing.assert_allclose(m.matrix, expected, atol=1e-15)

    def test_input_couplings(self):
        m = build_direct_model(
            CavityParams(1.0, 0.1, 0.04), CavityParams(1.0, 0.1, 0.09), DirectCoupling(0.1)
        )
        np.testing.assert_allclose(m.input_couplings, [0.2, 0.3])

    def test_cable_variant_rejected(self):
        c = CavityParams(1.0, 1.0)
        with pytest.raises(VariantMismatchError):
            build_direct_model(c, c, CableCoupling(0.3))

    def test_gamma_rejected(self):
        with pytest.raises(InconsistentParamsError):
            build_direct_model(
                CavityParams(1.0, 1.0, gamma=0.1), CavityParams(1.0, 1.0), DirectCoupling(0.1)
            )

    def test_model_is_immutable(self):
        c = CavityParams(1.0, 1.0)
        m = build_direct_model(c, c, DirectCoupling(0.1))
        with pytest.raises(ValueError):
            m.matrix[0, 0] = 1.0


class TestEliminateCable:
    def test_hand_solved(self):
        b = eliminate_cable(1.0, 0.0, CableCoupling(math.pi / 2, 0.0), 1.0, 1.0)
        assert b.b1 == pytest.approx(0.5, abs=1e-15)
        assert b.b2 == pytest.approx(0.5j, abs=1e-15)

    def test_zero_input(self):
        b = eliminate_cable(0.0, 0.0, CableCoupling(1.0, 0.1), 0.5, 0.5)
        assert b.b1 == 0 and b.b2 == 0

    @pytest.mark.parametrize("theta", [0.0, math.pi, -2 * math.pi])
    def test_resonant_cable(self, theta):
        with pytest.raises(CableResonanceError):
            eliminate_cable(1.0, 0.0, CableCoupling(theta, 0.0), 1.0, 1.0)

    def test_residual(self, rng):
        coupling = CableCoupling(0.7, 0.3)
        a1, a2 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        b = eliminate_cable(a1, a2, coupling, 0.4, 0.9)
        r = coupling.one_way
        res1 = b.b1 - (b.b2 * r + math.sqrt(0.4) * a1)
        res2 = b.b2 - (b.b1 * r + math.sqrt(0.9) * a2)
        assert abs(res1) < 1e-12 * abs(b.b1) and abs(res2) < 1e-12 * abs(b.b2)


class TestEffectiveCoupling:
    def test_zeta_anchor(self):
        c = CavityParams(1.0, 0.9, gamma=0.1)
        eff = effective_coupling(c, c, CableCoupling(math.pi / 10, 0.02))
        assert abs(eff.zeta / math.pi - (1.5 - 0.0098)) <= 0.0005

    def test_quarter_wave_cable_against_numerical_elimination(self):
        gamma, kappa = 0.3, 1.0
        c = CavityParams(2.0, kappa - gamma, gamma=gamma)
        coupling = CableCoupling(math.pi / 2, 0.0)
        eff = effective_coupling(c, c, coupling)
        induced = induced_matrix(c, c, coupling, frame=2.0)
        # read the shift and coupling back off the numerically induced generator
        g_num = induced[0, 1] / -1j
        dw_num = (induced[0, 0] + kappa / 2) / -1j
        assert abs(eff.g_eff - g_num) < 1e-12
        assert abs(eff.delta_omega_1 - dw_num) < 1e-12
        assert eff.g_eff == pytest.approx(gamma / 2, abs=1e-15)
        assert eff.delta_omega_1 == pytest.approx(0.5j * gamma, abs=1e-15)
        assert eff.kappa_eff_1 == pytest.approx(kappa - gamma, abs=1e-15)
        assert eff.zeta == pytest.approx(1.5 * math.pi, abs=1e-15)

    def test_opaque_cable_limit(self):
        g1, g2 = 0.4, 0.9
        c1 = CavityParams(1.0, 1.0, gamma=g1)
        c2 = CavityParams(1.0, 1.0, gamma=g2)
        theta = 0.3
        eff = effective_coupling(c1, c2, CableCoupling(theta, 50.0))
        assert abs(eff.g_eff) < 1e-10 * math.sqrt(g1 * g2)
        assert abs(eff.delta_omega_1) < 1e-10
        assert eff.zeta == pytest.approx(math.pi + theta, abs=1e-9)

    def test_zero_coupling(self):
        c = CavityParams(1.0, 1.0)
        with pytest.raises(ZeroCouplingError):
            effective_coupling(c, CavityParams(1.0, 1.0, gamma=0.1), CableCoupling(0.5))

    def test_direct_variant_rejected(self):
        c = CavityParams(1.0, 1.0, gamma=0.1)
        with pytest.raises(VariantMismatchError):
            effective_coupling(c, c, DirectCoupling(0.1))

    def test_theta_reduced_mod_two_pi(self):
        c = CavityParams(1.0, 1.0, gamma=0.2)
        a = effective_coupling(c, c, CableCoupling(0.4, 0.1))
        b = effective_coupling(c, c, CableCoupling(0.4 + 6 * math.pi, 0.1))
        assert a.zeta == pytest.approx(b.zeta, abs=1e-12)
        assert abs(a.g_eff - b.g_eff) < 1e-12


class TestCableModel:
    def test_quarter_wave_diagonal(self):
        gamma, kappa = 0.3, 1.0
        c = CavityParams(2.0, kappa - gamma, gamma=gamma)
        m = build_cable_model(c, c, CableCoupling(math.pi / 2, 0.0), frame=2.0)
        np.testing.assert_allclose(m.matrix.diagonal().real, -(kappa - gamma) / 2, atol=1e-15)

    def test_decoupling_limit(self):
        tiny = 1e-30
        c1 = CavityParams(3.0, 1.0, 0.2, tiny)
        c2 = CavityParams(3.5, 0.5, 0.1, tiny)
        cable = build_cable_model(c1, c2, CableCoupling(0.8, 0.1), frame=3.0)
        direct = build_direct_model(
            CavityParams(3.0, 1.0, 0.2), CavityParams(3.5, 0.5, 0.1), DirectCoupling(0.0), frame=3.0
        )
        np.testing.assert_allclose(cable.matrix, direct.matrix, atol=1e-14, rtol=0)

    def test_kappa_eff_matches_diagonal(self):
        c1 = CavityParams(1.0, 0.5, 0.1, 0.3)
        c2 = CavityParams(1.0, 0.2, 0.1, 0.6)
        coupling = CableCoupling(0.9, 0.4)
        m = build_cable_model(c1, c2, coupling, frame=1.0)
        eff = effective_coupling(c1, c2, coupling)
        np.testing.assert_allclose(-2 * m.matrix.diagonal().real, eff.kappa_eff, rtol=1e-14)


class TestChainModel:
    def test_two_cavity_chain_is_direct_model(self):
        spec = ChainSpec(2, 0.2, 1.0, 0.2, 0.3, 4.0)
        chain = build_chain_model(spec)
        direct = build_direct_model(
            CavityParams(4.0, 1.0, 0.2), CavityParams(4.0, 1.0, 0.3), DirectCoupling(0.2), frame=4.0
        )
        np.testing.assert_array_equal(chain.matrix, direct.matrix)
        np.testing.assert_array_equal(chain.input_couplings, direct.input_couplings)

    def test_four_cavity_diagonal(self):
        m = build_chain_model(ChainSpec(4, 0.2, 1.0, 0.2, 0.2, 1.0))
        np.testing.assert_allclose(m.matrix.diagonal().real, [-0.6, -0.5, -0.5, -0.6])
        off = np.diag(m.matrix, 1)
        np.testing.assert_allclose(off, -0.2j)
        assert np.count_nonzero(np.triu(m.matrix, 2)) == 0

    def test_uncoupled_chain_is_diagonal(self):
        m = build_chain_model(ChainSpec(5, 0.0, 1.0, 0.2, 0.2, 1.0))
        assert np.count_nonzero(m.matrix - np.diag(m.matrix.diagonal())) == 0

    def test_size_error(self):
        with pytest.raises(ChainSizeError):
            ChainSpec(1, 0.2, 1.0, 0.2, 0.2, 1.0)

    def test_interior_cavities_have_no_port(self):
        m = build_chain_model(ChainSpec(5, 0.2, 1.0, 0.04, 0.09, 1.0))
        np.testing.assert_allclose(m.input_couplings, [0.2, 0, 0, 0, 0.3])


# --------------------------------------------------------------------- properties

rates = st.floats(0.01, 1.0)
cable_theta = st.floats(0.05 * math.pi, 0.95 * math.pi)
cable_loss = st.floats(0.0, 1.0)


@st.composite
def cable_systems(draw):
    g1, g2 = draw(rates), draw(rates)
    c1 = CavityParams(draw(st.floats(1.0, 2.0)), draw(rates), draw(st.floats(0, 0.5)), g1)
    c2 = CavityParams(draw(st.floats(1.0, 2.0)), draw(rates), draw(st.floats(0, 0.5)), g2)
    return c1, c2, CableCoupling(draw(cable_theta), draw(cable_loss))


@settings(max_examples=200, deadline=None)
@given(cable_systems(), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_cable_elimination_equivalence(system, x1, y1, x2, y2):
    c1, c2, coupling = system
    frame = 1.5
    a = np.array([complex(x1, y1), complex(x2, y2)])
    m = build_cable_model(c1, c2, coupling, frame)
    r = coupling.one_way
    b = eliminate_cable(a[0], a[1], coupling, c1.gamma, c2.gamma)
    rhs = np.array(
        [
            (-1j * (c1.omega - frame) - c1.kappa / 2) * a[0] - math.sqrt(c1.gamma) * b.b2 * r,
            (-1j * (c2.omega - frame) - c2.kappa / 2) * a[1] - math.sqrt(c2.gamma) * b.b1 * r,
        ]
    )
    np.testing.assert_allclose(m.matrix @ a, rhs, rtol=1e-10, atol=1e-13)


@settings(max_examples=200, deadline=None)
@given(cable_systems())
def test_zeta_is_consistent_with_g_eff(system):
    c1, c2, coupling = system
    eff = effective_coupling(c1, c2, coupling)
    assert eff.zeta == wrap_phase(1.5 * math.pi + cmath.phase(eff.g_eff))
    assert 0.0 <= eff.zeta < 2 * math.pi


@settings(max_examples=200, deadline=None)
@given(cable_systems())
def test_cable_model_is_passive_and_symmetric(system):
    c1, c2, coupling = system
    m = build_cable_model(c1, c2, coupling)
    assert np.all(np.linalg.eigvals(m.matrix).real <= 1e-12)
    assert m.matrix[0, 1] == m.matrix[1, 0]
    eff = effective_coupling(c1, c2, coupling)
    assert eff.kappa_eff_1 > 0 and eff.kappa_eff_2 > 0


@settings(max_examples=200, deadline=None)
@given(rates, rates, rates, st.floats(0, 0.5), st.floats(-1, 1), st.floats(-1, 1))
def test_direct_model_reciprocity_and_passivity(k1, k2, g, ke, d1, d2):
    c1 = CavityParams(5.0 + d1, k1, ke)
    c2 = CavityParams(5.0 + d2, k2)
    m12 = build_direct_model(c1, c2, DirectCoupling(g), frame=5.0)
    m21 = build_direct_model(c2, c1, DirectCoupling(g), frame=5.0)
    swap = np.array([[0, 1], [1, 0]])
    np.testing.assert_array_equal(swap @ m12.matrix @ swap, m21.matrix)
    assert np.all(np.linalg.eigvals(m12.matrix).real <= 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 9), rates, rates, st.floats(0, 0.5), st.floats(0, 0.5))
def test_chain_is_passive(n, g, ki, ke1, ke2):
    m = build_chain_model(ChainSpec(n, g, ki, ke1, ke2, 1.0))
    assert np.all(np.linalg.eigvals(m.matrix).real < 0)
