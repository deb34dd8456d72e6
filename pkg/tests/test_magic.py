import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from strategies import states
from vqrd import qcore
from vqrd import magic
from vqrd.magic import MagicInstance


class TestClosedForm:
    @pytest.mark.parametrize("p,expected", [(0.9, 1 / 0.9), (0.5, np.sqrt(2)), (0.0, np.sqrt(2)), (1.0, 1.0)])
    def test_values(self, p, expected):
        assert magic.dephased_t_overhead(p) == pytest.approx(expected)

    def test_threshold(self):
        assert magic.P_TH == pytest.approx(1 / np.sqrt(2))
        assert magic.dephased_t_overhead(magic.P_TH) == pytest.approx(np.sqrt(2))

    def test_eps_saturates(self):
        assert magic.dephased_t_overhead(0.9, 0.2) == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            magic.dephased_t_overhead(1.5)
        with pytest.raises(ValueError):
            magic.dephased_t_overhead(0.5, 0.7)


class TestExact:
    @settings(max_examples=6)
    @given(st.floats(0.0, 1.0), st.sampled_from([0.0, 0.05]))
    def test_dephased_matches_closed_form(self, p, eps):
        rho = qcore.dephased_t_state(p)
        val = magic.stabilizer_overhead_exact(rho, "T", eps).value
        assert val == pytest.approx(magic.dephased_t_overhead(p, eps), abs=1e-6)

    @pytest.mark.slow
    @settings(max_examples=5)
    @given(states(d=2), st.sampled_from([0.0, 0.1]))
    def test_random_inputs_match_reference(self, rho, eps):
        ours = magic.stabilizer_overhead_exact(rho, "T", eps).value
        assert ours == pytest.approx(oracles.magic_rng_overhead(rho, eps), rel=1e-5)

    def test_axis_intervals(self):
        lo, hi = magic.axis_interval("T")
        assert lo == pytest.approx((1 - 1 / np.sqrt(2)) / 2, abs=1e-7)
        assert hi == pytest.approx((1 + 1 / np.sqrt(2)) / 2, abs=1e-7)
        lo, hi = magic.axis_interval("S")
        assert lo == pytest.approx(0, abs=1e-7) and hi == pytest.approx(0.5, abs=1e-7)

    def test_strange_exact_matches_fraction_bound(self):
        rho = qcore.random_state(3, np.random.default_rng(17))
        exact = magic.stabilizer_overhead_exact(rho, "S").value
        assert exact == pytest.approx(magic.strange_overhead(rho), abs=1e-6)


class TestBracket:
    def test_bracket_does_not_collapse_for_t(self):
        rep = magic.stabilizer_overhead_lp(MagicInstance(qcore.dephased_t_state(0.5)))
        assert rep.lower == pytest.approx(1.3431457, abs=1e-6)
        assert rep.upper == pytest.approx(np.sqrt(2), abs=1e-6)
        assert not rep.exact

    def test_bracket_contains_exact(self):
        rho = qcore.random_state(2, np.random.default_rng(9))
        rep = magic.stabilizer_overhead_lp(MagicInstance(rho, eps=0.05))
        exact = magic.stabilizer_overhead_exact(rho, "T", 0.05).value
        assert rep.lower - 1e-6 <= exact <= rep.upper + 1e-6

    def test_bracket_collapses_for_strange(self):
        rho = qcore.random_state(3, np.random.default_rng(1))
        rep = magic.stabilizer_overhead_lp(MagicInstance(rho, target="S"))
        assert rep.exact

    def test_two_qubit_bracket(self):
        rho = qcore.tensor_power(qcore.dephased_t_state(0.95), 2)
        rep = magic.stabilizer_overhead_lp(MagicInstance(rho, m=2, eps=0.05))
        assert 1 - 1e-7 <= rep.lower <= rep.upper + 1e-7

    def test_unsupported_sizes(self):
        with pytest.raises(ValueError):
            magic.stabilizer_overhead_lp(MagicInstance(np.eye(9) / 9, target="S", m=2))


class TestTwirl:
    def test_t_fixed(self):
        assert np.allclose(magic.t_twirl(qcore.t_state()), qcore.t_state())

    @given(states(d=2))
    def test_projects_onto_axis(self, rho):
        tw = magic.t_twirl(rho)
        # invariant under the twirl and diagonal in the T / T-bar basis
        assert np.allclose(magic.t_twirl(tw), tw)
        assert np.trace(tw @ qcore.t_state()).real == pytest.approx(np.trace(rho @ qcore.t_state()).real)
        v = np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)
        w = np.array([1, -np.exp(1j * np.pi / 4)]) / np.sqrt(2)
        assert abs(np.vdot(v, tw @ w)) < 1e-12

    def test_qubit_only(self):
        with pytest.raises(ValueError):
            magic.t_twirl(np.eye(3) / 3)


class TestStrange:
    def test_target_itself(self):
        assert magic.strange_fraction(qcore.strange_state()) == pytest.approx(1, abs=1e-7)
        assert magic.strange_overhead(qcore.strange_state()) == pytest.approx(1, abs=1e-7)

    def test_stabilizer_input(self):
        sigma = qcore.proj(qcore.ket(0, 3))
        assert magic.strange_overhead(sigma) == pytest.approx(3, abs=1e-6)

    def test_validation(self):
        with pytest.raises(ValueError):
            magic.strange_overhead(qcore.strange_state(), m=2)
        with pytest.raises(ValueError):
            magic.strange_fraction(np.eye(2) / 2)


def test_instance_validation():
    with pytest.raises(ValueError):
        MagicInstance(np.eye(2) / 2, target="X")
    with pytest.raises(ValueError):
        MagicInstance(np.eye(2) / 2, m=2)
    assert MagicInstance(np.eye(3) / 3, target="S").qudit_dim == 3
