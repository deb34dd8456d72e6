import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from strategies import channels as channel_st
from vqrd import qcore
from vqrd import channels as ch
from vqrd.channels import MemoryInstance


def random_hermitian_preserving(rng, d=2):
    G = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
    return (G + G.conj().T) / 2


class TestDiamond:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_reference(self, seed):
        J = random_hermitian_preserving(np.random.default_rng(seed))
        assert ch.diamond_norm(J) == pytest.approx(oracles.diamond_norm(J, 2, 2), rel=1e-6)

    def test_rectangular(self):
        J = qcore.random_channel(2, 3, np.random.default_rng(4)) - qcore.random_channel(2, 3, np.random.default_rng(5))
        assert ch.diamond_norm(J, 2, 3) == pytest.approx(oracles.diamond_norm(J, 2, 3), rel=1e-6)

    @settings(max_examples=6)
    @given(channel_st())
    def test_channel_has_unit_norm(self, J):
        assert ch.diamond_norm(J) == pytest.approx(1, abs=1e-7)

    @settings(max_examples=6)
    @given(channel_st(), channel_st(), channel_st())
    def test_metric(self, A, B, C):
        dab, dbc, dac = ch.diamond_distance(A, B), ch.diamond_distance(B, C), ch.diamond_distance(A, C)
        assert 0 <= dab <= 1 + 1e-7
        assert dac <= dab + dbc + 1e-6
        assert ch.diamond_distance(B, A) == pytest.approx(dab, abs=1e-6)

    def test_orthogonal_unitaries(self):
        assert ch.diamond_distance(qcore.identity_choi(2), qcore.choi_from_unitary(qcore.PAULI["X"])) == \
            pytest.approx(1, abs=1e-7)

    def test_zero(self):
        assert ch.diamond_norm(np.zeros((4, 4))) == 0.0

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            ch.diamond_distance(np.eye(4), np.eye(9))
        with pytest.raises(ValueError):
            ch.diamond_norm(np.eye(8))


class TestMemory:
    @pytest.mark.parametrize("p", [0.1, 0.2, 0.5])
    def test_depolarizing_zero_error_is_inverse_norm(self, p):
        J = qcore.depolarizing(p)
        r = ch.memory_overhead_sdp(MemoryInstance(J))
        assert r.value == pytest.approx(ch.depolarizing_inverse_overhead(p), abs=1e-6)

    def test_anchor(self):
        assert ch.memory_overhead_sdp(MemoryInstance(qcore.depolarizing(0.2))).value == pytest.approx(1.375, abs=1e-6)

    def test_amplitude_damping_zero_error(self):
        g = 0.3
        r = ch.memory_overhead_sdp(MemoryInstance(qcore.amplitude_damping(g)))
        assert r.value == pytest.approx(ch.amplitude_damping_inverse_overhead(g), abs=1e-6)

    def test_branches_and_correction(self):
        J = qcore.depolarizing(0.3)
        r = ch.memory_overhead_sdp(MemoryInstance(J, eps=0.02))
        assert r.lambda_plus - r.lambda_minus == pytest.approx(1, abs=1e-7)
        for Jb, lam in ((r.J_plus, r.lambda_plus), (r.J_minus, r.lambda_minus)):
            assert np.linalg.eigvalsh(Jb).min() >= -1e-7
            assert np.allclose(qcore.partial_trace(Jb, [2, 2], [0]), lam * np.eye(2), atol=1e-7)
        total = qcore.compose_choi(J, r.J_plus - r.J_minus, 2, 2, 2)
        assert ch.diamond_distance(total, qcore.identity_choi(2)) <= 0.02 + 1e-6

    def test_eps_monotone(self):
        J = qcore.depolarizing(0.3)
        vals = [ch.memory_overhead_sdp(MemoryInstance(J, eps=e)).value for e in (0.0, 0.01, 0.05)]
        assert vals[0] >= vals[1] - 1e-7 >= vals[2] - 2e-7

    def test_two_copies(self):
        p = 0.1
        r = ch.memory_overhead_sdp(MemoryInstance(qcore.depolarizing(p), m=2))
        assert r.value == pytest.approx(ch.depolarizing_inverse_overhead(p) ** 2, rel=1e-5)

    def test_noninvertible_is_infeasible(self):
        r = ch.memory_overhead_sdp(MemoryInstance(qcore.depolarizing(1.0)))
        assert r.value == np.inf and r.status == "infeasible"

    def test_validation(self):
        with pytest.raises(ValueError):
            MemoryInstance(np.eye(4))  # not trace preserving
        with pytest.raises(ValueError):
            MemoryInstance(qcore.depolarizing(0.1), eps=2)

    def test_dimension_limit(self):
        with pytest.raises(ValueError):
            ch.memory_overhead_sdp(MemoryInstance(qcore.depolarizing(0.1), m=3))


class TestInverse:
    @given(st.floats(0.0, 0.9))
    def test_depolarizing_inverse(self, p):
        J = qcore.depolarizing(p)
        Jinv = ch.inverse_choi(J)
        assert np.allclose(qcore.compose_choi(J, Jinv, 2, 2, 2), qcore.identity_choi(2), atol=1e-8)

    @pytest.mark.parametrize("p", [0.1, 0.4])
    def test_depolarizing_overhead(self, p):
        assert ch.inverse_overhead(qcore.depolarizing(p)) == pytest.approx(ch.depolarizing_inverse_overhead(p), abs=1e-6)

    @pytest.mark.parametrize("g", [0.1, 0.5, 0.8])
    def test_amplitude_damping_overhead(self, g):
        assert ch.inverse_overhead(qcore.amplitude_damping(g)) == pytest.approx(
            ch.amplitude_damping_inverse_overhead(g), abs=1e-6)

    def test_not_invertible(self):
        with pytest.raises(ValueError):
            ch.inverse_choi(qcore.depolarizing(1.0))
        assert ch.depolarizing_inverse_overhead(1.0) == np.inf
        assert ch.amplitude_damping_inverse_overhead(1.0) == np.inf

    def test_tensor_power(self):
        J = qcore.random_channel(2, 2, np.random.default_rng(3))
        J2 = ch.channel_tensor_power(J, 2, 2, 2)
        a = qcore.random_state(2, np.random.default_rng(1))
        b = qcore.random_state(2, np.random.default_rng(2))
        rho = np.kron(a, b)
        assert np.allclose(qcore.apply_channel(J2, rho), np.kron(qcore.apply_channel(J, a), qcore.apply_channel(J, b)))


class TestCapacity:
    def test_binary_entropy(self):
        assert ch.binary_entropy(0.5) == pytest.approx(1)
        assert ch.binary_entropy(0.0) == 0.0 and ch.binary_entropy(1.0) == 0.0

    @pytest.mark.parametrize("g", [0.0, 0.1, 0.25, 0.4])
    def test_amplitude_damping_capacity_bruteforce(self, g):
        t = np.linspace(0, 1, 200_001)
        ref = np.max(ch.binary_entropy((1 - g) * t) - ch.binary_entropy(g * t))
        assert ch.amplitude_damping_capacity(g) == pytest.approx(ref, abs=1e-8)

    def test_capacity_vanishes(self):
        assert ch.amplitude_damping_capacity(0.5) == 0.0
        assert ch.amplitude_damping_capacity(0.9) == 0.0

    def test_rate_vs_capacity(self):
        r = ch.depolarizing_rate_vs_capacity(0.3)
        assert r.q_upper == 0.0 and r.v_lower > 0
        assert ch.depolarizing_rate_vs_capacity(0.0) == ch.RateCapacity(1.0, 1.0)


class TestFigureData:
    def test_noise_family_channels(self):
        assert np.allclose(ch.noise_family_channel("depolarizing", 1.0), qcore.identity_choi(2))
        assert np.allclose(ch.noise_family_channel("replacement", 1.0), qcore.identity_choi(2))
        with pytest.raises(ValueError):
            ch.noise_family_channel("erasure", 0.5)

    def test_memory_curve_small_grid(self):
        rows = ch.memory_curve_data(0.01, n=3, families=("depolarizing",))
        assert [r[1] for r in rows] == [0.0, 0.5, 1.0]
        assert rows[0][2] == np.inf
        assert rows[2][2] == pytest.approx(1, abs=1e-6)

    def test_damping_rate_rows(self):
        rows = ch.damping_rate_data(n=5)
        assert len(rows) == 5
        g, v, q = rows[2]
        assert g == 0.5 and v == pytest.approx(1 / 9) and q == 0.0
        assert rows[-1][1:] == (0.0, 0.0)

    def test_damping_rate_sdp_agrees(self):
        closed = ch.damping_rate_data(n=3)
        sdp = ch.damping_rate_data(n=3, method="sdp")
        for a, b in zip(closed, sdp):
            assert a[1] == pytest.approx(b[1], abs=1e-6)
