import csv
import io
import math
from functools import reduce

import numpy as np
import pytest

from sptmbqc.mbqc import MeasurementPlan, enumerate_paths
from sptmbqc.observables import (
    CSV_COLUMNS,
    anticommutation_residual,
    nu,
    nu_z,
    proposition1_rhs,
    small_angle_report,
    string_order_bulk,
    string_order_bulk_end,
    string_order_rows,
    write_csv,
)
from sptmbqc.qcore import AXES, PAULI, StateVector
from sptmbqc.states import HamiltonianParams, aklt_prime_mps, build_hamiltonian, ground_state

# spin-1 matrices written out independently of the library, basis (+1, 0, -1)
_R = 1 / math.sqrt(2)
SX = np.array([[0, _R, 0], [_R, 0, _R], [0, _R, 0]], dtype=complex)
SY = np.array([[0, -1j * _R, 0], [1j * _R, 0, -1j * _R], [0, 1j * _R, 0]])
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
S1 = {"x": SX, "y": SY, "z": SZ}


def rot(a):
    w, v = np.linalg.eigh(S1[a])
    return (v * np.exp(1j * math.pi * w)) @ v.conj().T


def dense_string(n, factors):
    """Kronecker product over the (2, 3..3, 2) chain with the given site factors."""
    mats = [np.eye(2)] + [np.eye(3)] * n + [np.eye(2)]
    for site, m in factors.items():
        mats[site] = m
    return reduce(np.kron, mats)


def dense_expect(state, op):
    return np.vdot(state.amplitudes, op @ state.amplitudes)


class TestBulkBulk:
    def test_aklt_n8_sign_and_size(self, aklt8):
        value = string_order_bulk(aklt8, 2, 7, "z")
        assert value < 0 and abs(value) > 0.3
        # long strings approach -4/9 in the bulk
        assert abs(value + 4 / 9) < 0.02

    @pytest.mark.parametrize("axis", AXES)
    def test_against_dense_oracle(self, aklt6, axis):
        op = dense_string(6, {2: S1[axis], 3: rot(axis), 4: rot(axis), 5: S1[axis]})
        assert abs(string_order_bulk(aklt6, 2, 5, axis) - dense_expect(aklt6, op).real) < 1e-12

    def test_isotropic_at_aklt(self, aklt8):
        vals = [string_order_bulk(aklt8, 2, 7, a) for a in AXES]
        assert max(vals) - min(vals) < 1e-10

    def test_product_state_zero(self):
        up = np.array([1, 0])
        zero = np.array([0, 1, 0])
        s = StateVector.product([up] + [zero] * 4 + [up])
        assert string_order_bulk(s, 1, 4, "z") == 0

    @pytest.mark.parametrize("i,j", [(0, 3), (3, 3), (4, 2), (2, 7)])
    def test_site_bounds(self, aklt6, i, j):
        with pytest.raises(ValueError):
            string_order_bulk(aklt6, i, j, "z")


class TestBulkEnd:
    def test_n8_i3(self, aklt8):
        value = string_order_bulk_end(aklt8, 3, "z")
        assert abs(value + 2 / 3) < 1e-10
        mps = string_order_bulk_end(aklt_prime_mps(8), 3, "z")
        assert abs(value - mps) < 1e-12

    @pytest.mark.parametrize("axis", AXES)
    def test_against_dense_oracle(self, haldane6, axis):
        op = dense_string(6, {3: S1[axis], 4: rot(axis), 5: rot(axis), 6: rot(axis), 7: PAULI[axis]})
        assert abs(string_order_bulk_end(haldane6, 3, axis) - dense_expect(haldane6, op).real) < 1e-12

    def test_trivial_phase_small(self):
        gs = ground_state(build_hamiltonian(HamiltonianParams(6, theta=0.0, d_z=4.0))).state
        assert abs(string_order_bulk_end(gs, 3, "z")) < 0.05

    def test_product_state_zero(self):
        up = np.array([1, 0])
        zero = np.array([0, 1, 0])
        s = StateVector.product([up] + [zero] * 4 + [up])
        assert string_order_bulk_end(s, 2, "z") == 0

    def test_nu_is_minus_bulk_end(self, haldane6):
        for k in range(1, 7):
            assert abs(nu(haldane6, k, "x") + string_order_bulk_end(haldane6, k, "x")) < 1e-12

    def test_bad_axis(self, aklt4):
        with pytest.raises(ValueError):
            string_order_bulk_end(aklt4, 1, "q")


class TestClosedForm:
    def test_zero_angle(self, aklt6):
        assert np.allclose(proposition1_rhs(aklt6, 3, 0.0), (1, 0, 0), atol=1e-14)

    @pytest.mark.parametrize("k", [1, 3, 6])
    def test_matches_enumeration(self, haldane6, k):
        ex = enumerate_paths(haldane6, MeasurementPlan.single_rotation(6, k, "z", 1.0)).as_tuple()
        assert np.allclose(ex, proposition1_rhs(haldane6, k, 1.0), atol=1e-10)

    def test_small_angle_ratio(self, aklt6):
        a = proposition1_rhs(aklt6, 3, 1e-3)[1] / 1e-3
        b = proposition1_rhs(aklt6, 3, 1e-4)[1] / 1e-4
        assert abs(a - b) < 1e-3

    def test_bounds(self, aklt6):
        with pytest.raises(ValueError):
            proposition1_rhs(aklt6, 7, 0.2)


class TestSmallAngle:
    def test_limit(self, aklt6):
        (row,) = small_angle_report(aklt6, 3, [1e-4])
        assert row.error < 1e-7
        assert abs(row.nu - 2 / 3) < 1e-10

    def test_rejects_zero(self, aklt6):
        with pytest.raises(ValueError):
            small_angle_report(aklt6, 3, [0.1, 0.0])

    def test_monotone_convergence(self, haldane6):
        phis = [0.2 / 2**m for m in range(6)]
        errs = [r.error for r in small_angle_report(haldane6, 3, phis)]
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_undefined_when_nu_vanishes(self):
        up = np.array([1, 0])
        zero = np.array([0, 1, 0])
        s = StateVector.product([up] + [zero] * 3 + [up])
        (row,) = small_angle_report(s, 2, [1e-3])
        assert row.ratio is None and row.error is None

    @pytest.mark.parametrize("phi", [-0.09, -0.01, 0.02, 0.08])
    def test_sign_consistency(self, haldane6, phi):
        y = proposition1_rhs(haldane6, 3, phi)[1]
        assert np.sign(y) == np.sign(nu_z(haldane6, 3) * phi)


class TestAnticommutation:
    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_string_anticommutes_with_x_symmetry(self, n):
        assert anticommutation_residual(n) < 1e-12


class TestCsv:
    def test_columns_and_precision(self, aklt4):
        meta = {"theta": 0.1, "D_x": 0.0, "D_z": 0.0, "N": 4}
        rows = string_order_rows(aklt4, meta, i=2, j=3)
        text = write_csv(rows)
        parsed = list(csv.DictReader(io.StringIO(text)))
        assert tuple(parsed[0].keys()) == CSV_COLUMNS
        assert len(parsed) == 9
        for src, back in zip(rows, parsed):
            assert float(back["value"]) == src["value"]
