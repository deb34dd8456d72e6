import numpy as np
import pytest
from hypothesis import given

from strategies import channels, states, unitaries
from vqrd import qcore


def kraus_apply(kraus, rho):
    return sum(k @ rho @ k.conj().T for k in kraus)


class TestTypes:
    def test_density_matrix_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            qcore.DensityMatrix(np.eye(2))

    def test_density_matrix_rejects_negative(self):
        with pytest.raises(ValueError):
            qcore.DensityMatrix(np.diag([1.5, -0.5]))

    def test_hermitian_rejects_nonhermitian(self):
        with pytest.raises(ValueError):
            qcore.HermitianOperator(np.array([[0, 1], [0, 0]]))

    def test_choi_dim_check(self):
        with pytest.raises(ValueError):
            qcore.ChoiOperator(2, 3, np.eye(4))

    def test_schmidt_requires_sorted_unit(self):
        with pytest.raises(ValueError):
            qcore.SchmidtVector(np.array([0.6, 0.8]))
        with pytest.raises(ValueError):
            qcore.SchmidtVector(np.array([0.5, 0.5]))


class TestPartialOps:
    def test_partial_trace_of_product(self, rng):
        a, b = qcore.random_state(2, rng), qcore.random_state(3, rng)
        ab = np.kron(a, b)
        assert np.allclose(qcore.partial_trace(ab, [2, 3], [0]), a)
        assert np.allclose(qcore.partial_trace(ab, [2, 3], [1]), b)

    def test_partial_transpose_bell_negativity(self):
        pt = qcore.partial_transpose(qcore.bell(1), [2, 2], 1)
        assert np.isclose(np.linalg.eigvalsh(pt).min(), -0.5)

    def test_partial_transpose_involution(self, rng):
        x = qcore.random_state(6, rng)
        y = qcore.partial_transpose(qcore.partial_transpose(x, [2, 3], 0), [2, 3], 0)
        assert np.allclose(x, y)

    def test_tensor_power_grouping(self):
        # two Bell pairs with A factors grouped first equal the 4x4 maximally entangled state
        assert np.allclose(qcore.tensor_power(qcore.bell(1), 2, (2, 2)), qcore.bell(2))


class TestChoi:
    @given(channels())
    def test_random_channel_is_cptp(self, J):
        assert qcore.is_cp(J) and qcore.is_tp(J, 2, 2)

    @given(unitaries(), states())
    def test_apply_matches_kraus(self, U, rho):
        J = qcore.choi_from_unitary(U)
        assert np.allclose(qcore.apply_channel(J, rho), U @ rho @ U.conj().T)

    @given(channels(), channels(), states())
    def test_compose_matches_sequential_application(self, J1, J2, rho):
        J = qcore.compose_choi(J1, J2, 2, 2, 2)
        direct = qcore.apply_channel(J2, qcore.apply_channel(J1, rho))
        assert np.allclose(qcore.apply_channel(J, rho), direct)

    def test_compose_rectangular(self, rng):
        J1 = qcore.random_channel(2, 3, rng)
        J2 = qcore.random_channel(3, 4, rng)
        rho = qcore.random_state(2, rng)
        J = qcore.compose_choi(J1, J2, 2, 3, 4)
        assert J.shape == (8, 8)
        assert np.allclose(qcore.apply_channel(J, rho), qcore.apply_channel(J2, qcore.apply_channel(J1, rho)))

    def test_link_product_typed(self, rng):
        a = qcore.ChoiOperator(2, 2, qcore.random_channel(2, 2, rng))
        b = qcore.ChoiOperator(2, 2, qcore.random_channel(2, 2, rng))
        rho = qcore.random_state(2, rng)
        c = qcore.link_product(a, b)
        assert np.allclose(c(rho), b(a(rho)))

    def test_choi_from_map_identity(self):
        assert np.allclose(qcore.choi_from_map(lambda x: x, 2), qcore.identity_choi(2))

    @pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
    def test_reference_channels_cptp(self, p):
        for J in (qcore.depolarizing(p), qcore.dephasing(p), qcore.amplitude_damping(p),
                  qcore.replacement(p, np.diag([1, 0]))):
            assert qcore.is_cp(J) and qcore.is_tp(J, 2, 2)

    def test_depolarizing_action(self, rng):
        rho = qcore.random_state(2, rng)
        out = qcore.apply_channel(qcore.depolarizing(0.3), rho)
        assert np.allclose(out, 0.7 * rho + 0.3 * np.eye(2) / 2)

    def test_amplitude_damping_kraus(self, rng):
        g = 0.37
        rho = qcore.random_state(2, rng)
        k0 = np.diag([1, np.sqrt(1 - g)])
        k1 = np.array([[0, np.sqrt(g)], [0, 0]])
        assert np.allclose(qcore.apply_channel(qcore.amplitude_damping(g), rho), kraus_apply([k0, k1], rho))


class TestStates:
    def test_t_states_orthogonal(self):
        assert np.isclose(np.trace(qcore.t_state() @ qcore.t_bar_state()).real, 0)

    def test_strange_state(self):
        S = qcore.strange_state()
        assert np.isclose(np.trace(S).real, 1) and np.allclose(S @ S, S)

    def test_isotropic_fidelity(self):
        assert np.isclose(np.trace(qcore.isotropic_state(0.3) @ qcore.bell(1)).real, 0.7)

    def test_dephased_t_endpoints(self):
        assert np.allclose(qcore.dephased_t_state(1.0), qcore.t_state())
        assert np.allclose(qcore.dephased_t_state(0.0), np.eye(2) / 2)

    @given(states(d=4, rank=1))
    def test_schmidt_norm(self, rho):
        s = qcore.schmidt(rho)
        assert np.isclose(np.sum(s.coeffs**2), 1)

    def test_fidelity_pure(self, rng):
        psi = qcore.random_pure(3, rng)
        sigma = qcore.random_state(3, rng)
        assert np.isclose(qcore.fidelity(qcore.proj(psi), sigma), np.vdot(psi, sigma @ psi).real)


class TestCombs:
    def test_causality_of_sequential_channels(self, rng):
        # a two-step comb built from a memory channel is causal
        J = qcore.random_channel(4, 4, rng)
        mat, dims, labels = qcore.link(np.diag([1, 0]), [2], ["m0"], J, [2, 2, 2, 2], ["i1", "m0", "o1", "m1"])
        mat, dims, labels = qcore.link(mat, dims, labels, J, [2, 2, 2, 2], ["i2", "m1", "o2", "m2"])
        comb = qcore.CombChoi(((2, 2), (2, 4)), mat)
        assert comb.is_causal(1e-9)

    def test_noncausal_detected(self):
        # output 1 copies input 2: signalling backwards in time
        phi = qcore.identity_choi(2)  # factors (i2, o1)
        mat = np.kron(np.kron(phi, np.eye(2)), np.eye(2) / 2)  # (i2, o1, i1, o2)
        mat = mat.reshape([2] * 8).transpose(2, 1, 0, 3, 6, 5, 4, 7).reshape(16, 16)
        comb = qcore.CombChoi(((2, 2), (2, 2)), mat)
        assert not comb.is_causal(1e-6)


def test_operator_roundtrip(tmp_path, rng):
    J = qcore.ChoiOperator(2, 2, qcore.random_channel(2, 2, rng))
    path = tmp_path / "op.json"
    import json

    path.write_text(json.dumps(qcore.dump_operator(J)))
    back = qcore.load_operator(str(path))
    assert isinstance(back, qcore.ChoiOperator) and np.allclose(back.mat, J.mat)
