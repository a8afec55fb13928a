import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sptmbqc.qcore import (
    PAULI,
    ChainSpec,
    LocalOperator,
    OperatorString,
    OperatorSum,
    StateVector,
    apply_local,
    expectation,
    expm_hermitian,
    flat_index,
    occupations_of,
    pair_projectors,
    spin_operators,
)

SQ2 = np.sqrt(2)


def random_state(dims, seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=int(np.prod(dims))) + 1j * r.normal(size=int(np.prod(dims)))
    return StateVector(dims, v / np.linalg.norm(v))


def random_hermitian(d, seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(d, d)) + 1j * r.normal(size=(d, d))
    return (a + a.conj().T) / 2


class TestChainSpec:
    def test_layout(self):
        spec = ChainSpec(3)
        assert spec.site_dims == (2, 3, 3, 3, 2)
        assert spec.dim == 108

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            ChainSpec.from_dims((3, 3, 2))
        with pytest.raises(ValueError):
            ChainSpec.from_dims((2, 3, 4, 2))

    def test_rejects_oversized_chain(self):
        with pytest.raises(MemoryError):
            ChainSpec(40)


class TestFlatIndex:
    dims = (2, 3, 2)

    def test_all_zero(self):
        assert flat_index(self.dims, (0, 0, 0)) == 0

    def test_least_significant_increment(self):
        assert flat_index(self.dims, (0, 0, 1)) == 1

    def test_matches_enumeration_order(self):
        # itertools.product enumerates in row-major order with the first factor slowest
        order = list(itertools.product(*(range(d) for d in self.dims)))
        assert order.index((1, 2, 1)) == 11
        assert flat_index(self.dims, (1, 2, 1)) == 11
        for i, occ in enumerate(order):
            assert flat_index(self.dims, occ) == i
            assert occupations_of(self.dims, i) == occ

    def test_label_out_of_range(self):
        with pytest.raises(IndexError):
            flat_index(self.dims, (0, 3, 0))


class TestApplyLocal:
    def test_identity_leaves_state(self):
        s = random_state((2, 3, 2), 1)
        out = apply_local(s, LocalOperator(np.eye(3), 1))
        assert np.allclose(out.amplitudes, s.amplitudes)

    def test_sigma_z_flips_down_amplitude(self):
        amps = np.zeros(12, dtype=complex)
        amps[flat_index((2, 3, 2), (1, 0, 0))] = 1
        out = apply_local(StateVector((2, 3, 2), amps), LocalOperator(PAULI["z"], 0))
        assert out.amplitudes[6] == -1

    def test_sigma_x_involution(self):
        s = random_state((2, 3, 2), 2)
        op = LocalOperator(PAULI["x"], 2)
        assert np.allclose(apply_local(apply_local(s, op), op).amplitudes, s.amplitudes)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            apply_local(random_state((2, 3, 2), 3), LocalOperator(np.eye(2), 1))

    @given(st.integers(0, 2**31 - 1), st.integers(0, 2))
    def test_unitary_preserves_norm(self, seed, site):
        s = random_state((2, 3, 2), seed)
        d = s.dims[site]
        u = expm_hermitian(random_hermitian(d, seed + 1), 0.7)
        out = apply_local(s, LocalOperator(u, site))
        assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-12


class TestExpectation:
    def test_empty_string_is_one(self):
        s = random_state((2, 3, 2), 4)
        assert abs(expectation(s, OperatorString([])) - 1) < 1e-14

    def test_plus_state_sigma_x(self):
        plus = StateVector((2,), np.array([1, 1]) / SQ2)
        assert abs(expectation(plus, OperatorString([(0, PAULI["x"])])) - 1) < 1e-14

    @given(st.integers(0, 2**31 - 1))
    def test_hermitian_strings_are_real(self, seed):
        s = random_state((2, 3, 3, 2), seed)
        op = OperatorString([(1, random_hermitian(3, seed)), (3, PAULI["y"])])
        assert abs(expectation(s, op).imag) < 1e-12

    def test_operator_sum_matches_dense(self):
        s = random_state((2, 3, 2), 5)
        op = OperatorSum([OperatorString([(0, PAULI["x"])], 0.5), OperatorString([(1, spin_operators(3)["z"])])])
        dense = op.to_dense(s.dims)
        assert abs(expectation(s, op) - np.vdot(s.amplitudes, dense @ s.amplitudes)) < 1e-13

    def test_duplicate_site_rejected(self):
        with pytest.raises(ValueError):
            OperatorString([(1, np.eye(3)), (1, np.eye(3))])


class TestSpinOperators:
    def test_spin1_pi_rotation_diagonal(self):
        assert np.allclose(spin_operators(3)["rz"], np.diag([-1, 1, -1]))

    def test_spin_half_two_pi(self):
        r = spin_operators(2)["rz"]
        assert np.allclose(r, 1j * PAULI["z"])
        assert np.allclose(r @ r, -np.eye(2))

    def test_casimir(self):
        s = spin_operators(3)
        assert np.allclose(sum(s[a] @ s[a] for a in "xyz"), 2 * np.eye(3))

    @pytest.mark.parametrize("d", [2, 3])
    def test_algebra_and_unitarity(self, d):
        s = spin_operators(d)
        assert np.linalg.norm(s["x"] @ s["y"] - s["y"] @ s["x"] - 1j * s["z"]) < 1e-14
        for a in "xyz":
            assert np.linalg.norm(s[a] - s[a].conj().T) < 1e-15
            r = s["r" + a]
            assert np.linalg.norm(r @ r.conj().T - np.eye(d)) < 1e-14

    def test_unsupported_dim(self):
        with pytest.raises(ValueError):
            spin_operators(4)

    def test_different_sites_commute(self):
        s = spin_operators(3)
        dims = (2, 3, 3, 2)
        for a, b in itertools.product("xyz", repeat=2):
            x = OperatorString([(1, s[a])]).to_dense(dims)
            y = OperatorString([(2, s[b])]).to_dense(dims)
            assert np.linalg.norm(x @ y - y @ x, 2) < 1e-14


class TestPairProjectors:
    def test_triplet_projector(self):
        p = pair_projectors((2, 2))
        singlet = np.array([0, 1, -1, 0]) / SQ2
        assert np.linalg.norm(p @ singlet) < 1e-15
        assert abs(np.trace(p) - 3) < 1e-13

    def test_spin2_projector(self):
        p = pair_projectors((3, 3))
        top = np.zeros(9)
        top[0] = 1
        assert np.allclose(p @ top, top)
        assert abs(np.trace(p) - 5) < 1e-13

    @pytest.mark.parametrize("dims", [(2, 2), (3, 3)])
    def test_idempotent_hermitian(self, dims):
        p = pair_projectors(dims)
        assert np.linalg.norm(p @ p - p) < 1e-13
        assert np.linalg.norm(p - p.conj().T) < 1e-13

    def test_unsupported(self):
        with pytest.raises(ValueError):
            pair_projectors((2, 3))


class TestStateVector:
    def test_wrong_length(self):
        with pytest.raises(ValueError):
            StateVector((2, 3, 2), np.ones(5) / np.sqrt(5))

    def test_product_state_is_normalized(self):
        s = StateVector.product([np.array([1, 0]), np.array([0, 1, 0]), np.array([1, 1]) / SQ2])
        assert abs(s.norm - 1) < 1e-12
