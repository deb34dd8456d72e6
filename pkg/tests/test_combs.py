import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vqrd import qcore
from vqrd import combs as cb
from vqrd import sampler as sp
from vqrd.combs import DephasedCombInstance


def test_z_propagation_identity():
    assert cb.z_propagation_residual() < 1e-15


def test_step_unitary_is_unitary():
    U = cb.step_unitary()
    assert np.allclose(U @ U.conj().T, np.eye(4))


class TestConstruction:
    @pytest.mark.parametrize("L", [1, 2, 3])
    @pytest.mark.parametrize("p", [0.0, 0.1, 0.3])
    def test_link_matches_simulation(self, L, p):
        assert np.allclose(cb.build_dephasing_comb(L, p).mat, cb.simulate_comb_choi(L, p), atol=1e-12)

    @pytest.mark.parametrize("L", [1, 2, 3])
    def test_valid_comb(self, L):
        comb = cb.build_dephasing_comb(L, 0.2)
        assert comb.is_causal(1e-9)
        assert np.linalg.eigvalsh(comb.mat).min() >= -1e-12

    def test_custom_environment(self):
        plus = np.ones(2) / np.sqrt(2)
        a = cb.build_dephasing_comb(2, 0.1, plus).mat
        assert np.allclose(a, cb.simulate_comb_choi(2, 0.1, plus), atol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            cb.build_dephasing_comb(0, 0.1)
        with pytest.raises(ValueError):
            cb.build_dephasing_comb(1, 1.5)
        with pytest.raises(ValueError):
            DephasedCombInstance(2, 0.5)
        with pytest.raises(ValueError):
            cb.apply_system_z(cb.build_dephasing_comb(2, 0.1), (1,))


class TestDecomposition:
    @settings(max_examples=12)
    @given(st.integers(1, 3), st.floats(0.0, 0.45))
    def test_exact_reconstruction(self, L, p):
        inst = DephasedCombInstance(L, p)
        dec = cb.virtual_comb_decomposition(L, p)
        chk = cb.verify_decomposition(inst, dec)
        assert chk.max_residual < 1e-10
        assert chk.sum_abs == pytest.approx((1 - 2 * p) ** -L)

    @pytest.mark.parametrize("L,p,expected", [(1, 0.1, 1.25), (2, 0.1, 1.5625), (3, 0.2, (1 / 0.6) ** 3)])
    def test_overhead_values(self, L, p, expected):
        assert cb.virtual_comb_decomposition(L, p).sum_abs == pytest.approx(expected)

    def test_coefficients_sum_to_one(self):
        dec = cb.virtual_comb_decomposition(3, 0.2)
        assert dec.coefficients.sum() == pytest.approx(1)

    def test_corrections_are_system_only(self):
        # each correction conjugates only the system wires by Z
        comb = cb.build_dephasing_comb(2, 0.1)
        for flags in itertools.product((0, 1), repeat=2):
            twice = cb.apply_system_z(cb.apply_system_z(comb, flags), flags)
            assert np.allclose(twice.mat, comb.mat)

    def test_noiseless_is_trivial(self):
        dec = cb.virtual_comb_decomposition(2, 0.0)
        assert len(dec.flags) == 1 and dec.sum_abs == 1.0


class TestSampling:
    def test_quasi_decomposition_reproduces_target(self):
        L, p = 2, 0.1
        q = cb.comb_quasi_decomposition(L, p)
        assert q.gamma == pytest.approx(1.5625)
        rho = qcore.proj(qcore.ket(1, 4))
        target = qcore.apply_channel(cb.comb_as_channel(cb.target_comb(L)), rho)
        assert np.allclose(q.output(rho), target, atol=1e-10)

    def test_sampled_estimate(self):
        L, p = 2, 0.1
        q = cb.comb_quasi_decomposition(L, p)
        rho = qcore.plus(L)
        M = np.kron(np.eye(2**L), qcore.PAULI["X"] / 2)
        exact = sp.exact_expectation(q, rho, M)
        rep = sp.estimate_expectation(q, rho, M, 40_000, seed=3)
        assert abs(rep.estimate - exact) < 5 * rep.empirical_std / np.sqrt(rep.n_samples)
