import math

import numpy as np
import pytest

from sptmbqc.qcore import PAULI, OperatorString, StateVector, expectation, pair_projectors, spin_operators
from sptmbqc.states import (
    EigensolverError,
    HamiltonianParams,
    SparseHamiltonian,
    aklt_prime_mps,
    build_aklt_prime,
    build_hamiltonian,
    ground_state,
    load_state,
    save_state,
    symmetry_operator,
    symmetry_residuals,
    total_spin_squared,
)


def random_vector(dim, seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=dim) + 1j * r.normal(size=dim)
    return v / np.linalg.norm(v)


class TestAkltPrime:
    def test_n1_is_total_singlet(self):
        state = build_aklt_prime(1)
        assert abs(total_spin_squared(state)) < 1e-12

    def test_n1_is_ground_state_of_boundary_couplings(self):
        # sigma_0.S_1 + S_1.sigma_2 on (2, 3, 2), diagonalized independently
        s1, s_half = spin_operators(3), {a: PAULI[a] for a in "xyz"}
        h = sum(
            np.kron(np.kron(s_half[a], s1[a]), np.eye(2)) + np.kron(np.eye(2), np.kron(s1[a], s_half[a])) for a in "xyz"
        )
        w, v = np.linalg.eigh(h)
        assert w[1] - w[0] > 1e-6
        assert abs(np.vdot(v[:, 0], build_aklt_prime(1).amplitudes)) ** 2 > 1 - 1e-12

    def test_normalized(self, aklt6):
        assert abs(aklt6.norm - 1) < 1e-12

    def test_symmetric(self, aklt6):
        for axis, r in symmetry_residuals(aklt6).items():
            assert r["residual"] < 1e-10
            assert r["sign"] == 1

    def test_matches_ed_ground_state(self, aklt6):
        gs = ground_state(build_hamiltonian(HamiltonianParams.aklt_point(6)))
        assert abs(np.vdot(gs.state.amplitudes, aklt6.amplitudes)) ** 2 >= 1 - 1e-8

    def test_mps_matches_dense(self, aklt6):
        dense = aklt_prime_mps(6).to_state()
        assert abs(abs(np.vdot(dense.amplitudes, aklt6.amplitudes)) - 1) < 1e-12

    def test_rejects_empty_bulk(self):
        with pytest.raises(ValueError):
            build_aklt_prime(0)


class TestHamiltonian:
    def test_aklt_bond_is_spin2_projector(self):
        h = build_hamiltonian(HamiltonianParams.aklt_point(2, j_0=0.0, j_end=0.0)).to_dense()
        p2 = OperatorString([]).to_dense((2, 3, 3, 2))
        proj = np.kron(np.kron(np.eye(2), pair_projectors((3, 3))), np.eye(2))
        assert np.linalg.norm(h - proj) < 1e-12
        assert p2.shape == h.shape

    def test_heisenberg_hermitian(self):
        h = build_hamiltonian(HamiltonianParams(3, theta=0.0))
        for seed in range(5):
            x, y = random_vector(h.dim, seed), random_vector(h.dim, seed + 100)
            assert abs(np.vdot(x, h.apply(y)) - np.conj(np.vdot(y, h.apply(x)))) < 1e-12

    def test_aklt_ground_energy(self):
        # the bulk projector terms vanish on AKLT' and each boundary sigma.S term reaches its minimum -2
        two_site = sum(np.kron(PAULI[a], spin_operators(3)[a]) for a in "xyz")
        assert abs(np.linalg.eigvalsh(two_site)[0] + 2) < 1e-12
        gs = ground_state(build_hamiltonian(HamiltonianParams.aklt_point(6)))
        assert abs(gs.energy + 4) < 1e-9

    @pytest.mark.parametrize("axis", ["x", "z"])
    def test_commutes_with_symmetry(self, axis):
        params = HamiltonianParams(4, theta=0.3, d_x=0.2, d_z=-0.4)
        h = build_hamiltonian(params)
        u = symmetry_operator(4, axis)
        for seed in range(10):
            v = random_vector(h.dim, seed)
            comm = h.apply(u.apply(v, h.dims)) - u.apply(h.apply(v), h.dims)
            assert np.linalg.norm(comm) < 1e-10

    def test_variational_bound(self, aklt6):
        h = build_hamiltonian(HamiltonianParams.aklt_point(6))
        gs = ground_state(h)
        assert gs.energy <= h.energy(aklt6) + 1e-9
        assert abs(gs.energy - h.energy(aklt6)) < 1e-9

    def test_warns_on_nonpositive_boundary_coupling(self):
        assert HamiltonianParams(4, j_0=0.0).warnings()

    def test_bad_anisotropy_range(self):
        with pytest.raises(ValueError):
            HamiltonianParams(4, anisotropy_sites="some")


class TestGroundState:
    def test_symmetric_away_from_aklt(self):
        gs = ground_state(build_hamiltonian(HamiltonianParams(6, theta=0.1)))
        for r in symmetry_residuals(gs.state).values():
            assert r["residual"] < 1e-9
        assert gs.residual < 1e-9

    def test_single_qubit_toy(self):
        h = SparseHamiltonian((2,), [(0, PAULI["z"])])
        gs = ground_state(h)
        assert abs(gs.energy + 1) < 1e-12
        assert abs(abs(gs.state.amplitudes[1]) - 1) < 1e-12

    @pytest.mark.parametrize("n", [4, 6, 8])
    @pytest.mark.parametrize("theta", [-0.6, 0.0, 0.6])
    def test_gap_positive_in_haldane_window(self, n, theta):
        gs = ground_state(build_hamiltonian(HamiltonianParams(n, theta=theta)))
        assert gs.gap > 0
        assert not gs.degenerate

    def test_lanczos_agrees_with_dense(self, monkeypatch):
        import sptmbqc.states as states

        h = build_hamiltonian(HamiltonianParams(5, theta=0.2, d_z=0.3))
        dense = ground_state(h)
        monkeypatch.setattr(states, "DENSE_LIMIT", 10)
        lanczos = ground_state(h)
        assert abs(dense.energy - lanczos.energy) < 1e-10
        assert abs(abs(np.vdot(dense.state.amplitudes, lanczos.state.amplitudes)) - 1) < 1e-8

    def test_degenerate_ground_state_flagged(self):
        with pytest.warns(UserWarning, match="degenerate"):
            gs = ground_state(build_hamiltonian(HamiltonianParams(4, j_0=0.0, j_end=0.0)))
        assert gs.degenerate

    def test_nonconvergence_reported(self, monkeypatch):
        import sptmbqc.states as states

        monkeypatch.setattr(states, "DENSE_LIMIT", 10)
        with pytest.raises(EigensolverError):
            ground_state(build_hamiltonian(HamiltonianParams(5, theta=0.2)), maxiter=2)


class TestSymmetryResiduals:
    def test_random_state_not_symmetric(self):
        dims = (2, 3, 3, 2)
        s = StateVector(dims, random_vector(36, 7))
        assert max(r["residual"] for r in symmetry_residuals(s).values()) > 0.1

    def test_zero_product_state_z(self):
        # U_z = -sigma^z exp(i pi S^z) sigma^z: the bulk factor is +1 on m = 0
        up = np.array([1, 0])
        zero = np.array([0, 1, 0])
        s = StateVector.product([up, zero, zero, up])
        assert symmetry_residuals(s)["z"]["residual"] < 1e-12


class TestPersistence:
    def test_roundtrip(self, tmp_path, aklt4):
        path = tmp_path / "s.bin"
        save_state(path, aklt4)
        back = load_state(path)
        assert back.dims == aklt4.dims
        assert np.array_equal(back.amplitudes, aklt4.amplitudes)
        raw = path.read_bytes()
        assert raw[:8] == b"SPTMBQC1"

    def test_bad_magic(self, tmp_path, aklt4):
        path = tmp_path / "s.bin"
        save_state(path, aklt4)
        path.write_bytes(b"XXXXXXXX" + path.read_bytes()[8:])
        with pytest.raises(ValueError):
            load_state(path)

    def test_truncated(self, tmp_path, aklt4):
        path = tmp_path / "s.bin"
        save_state(path, aklt4)
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(ValueError):
            load_state(path)
