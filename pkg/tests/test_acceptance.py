"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line with the measured
figures before asserting, so ``pytest -v -s`` or the captured summary shows
the full table.
"""

import math
import time

import numpy as np
import pytest

from sptmbqc.algebra import (
    BlockLocalProtocol,
    Gate,
    evolved_expectations,
    logical_subspace,
    loglog_slope,
    spaced_sites,
    spin1_bundle,
    spin1_element,
    unitarity_scaling,
    verify_bundle,
)
from sptmbqc.algebra.blocklocal import evolved_tbar_dense, spectral_distribution
from sptmbqc.config import make_rng
from sptmbqc.mbqc import MeasurementPlan, enumerate_paths, sample_rounds, teleport_step
from sptmbqc.observables import proposition1_rhs, small_angle_report, string_order_bulk_end
from sptmbqc.qcore import AXES
from sptmbqc.states import (
    HamiltonianParams,
    aklt_prime_mps,
    build_aklt_prime,
    build_hamiltonian,
    ground_state,
    symmetry_residuals,
)

Z, X, Y = (spin1_element(n) for n in "zxy")


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def test_criterion_01_resource_symmetry(report):
    t0 = time.perf_counter()
    res = symmetry_residuals(build_aklt_prime(6))
    worst = max(r["residual"] for r in res.values())
    elapsed = time.perf_counter() - t0
    report(1, worst < 1e-10 and elapsed < 5, f"max residual {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_construction_matches_ed(report):
    t0 = time.perf_counter()
    aklt = build_aklt_prime(6)
    gs = ground_state(build_hamiltonian(HamiltonianParams.aklt_point(6, j_0=1.0, j_end=1.0)))
    overlap = abs(np.vdot(gs.state.amplitudes, aklt.amplitudes)) ** 2
    elapsed = time.perf_counter() - t0
    ok = overlap >= 1 - 1e-8 and abs(gs.energy + 4) < 1e-9 and elapsed < 60
    report(2, ok, f"overlap 1-{1 - overlap:.1e}, energy {gs.energy:.12f}, {elapsed:.2f} s")


def test_criterion_03_closed_form_identity(report):
    t0 = time.perf_counter()
    states = {
        "aklt": build_aklt_prime(6),
        "theta=0.15": ground_state(build_hamiltonian(HamiltonianParams(6, theta=0.15))).state,
    }
    worst = 0.0
    for state in states.values():
        for phi in (0.3, 0.7, math.pi / 2):
            ex = enumerate_paths(state, MeasurementPlan.single_rotation(6, 3, "z", phi)).as_tuple()
            worst = max(worst, float(np.max(np.abs(np.subtract(ex, proposition1_rhs(state, 3, phi))))))
    elapsed = time.perf_counter() - t0
    report(3, worst < 1e-10 and elapsed < 600, f"max deviation {worst:.2e} over 2 states x 3 angles, {elapsed:.1f} s")


def test_criterion_04_monte_carlo(report):
    t0 = time.perf_counter()
    state = build_aklt_prime(6)
    plan = MeasurementPlan.single_rotation(6, 3, "z", 0.7)
    exact = enumerate_paths(state, plan).values
    rounds = 100_000
    good = 0
    for seed in range(20):
        inside = True
        for i, a in enumerate(AXES):
            mu = sample_rounds(state, plan.with_readout(a), rounds, make_rng(seed, i))
            se = mu.std(ddof=1) / math.sqrt(rounds)
            inside &= abs(mu.mean() - exact[a]) <= 4 * se
        good += inside
    elapsed = time.perf_counter() - t0
    report(4, good >= 19 and elapsed < 300, f"{good}/20 seeds within 4 SE on x, y, z, {elapsed:.1f} s")


def test_criterion_05_small_angle(report):
    (row,) = small_angle_report(build_aklt_prime(6), 3, [1e-4])
    report(5, row.error < 1e-6, f"|y/phi - nu_z| = {row.error:.2e} at phi=1e-4 (nu_z = {row.nu:.12f})")


IDENTITY_CHECKS = (
    "anticommuting_string_vanishes",
    "cos_factor_commutes",
    "r_string_commutes",
    "l_string_commutes",
    "l_string_anticommutes",
    "transfer_matrix_conjugation",
    "transfer_matrix_sequences",
    "projected_entries_scalar",
    "tilde_v_product",
    "evolved_logical_from_tilde_u",
)


def test_criterion_06_identity_suite(report):
    t0 = time.perf_counter()
    rep = verify_bundle(spin1_bundle(4), build_aklt_prime(4))
    elapsed = time.perf_counter() - t0
    worst = max(rep[name].residual for name in IDENTITY_CHECKS)
    ok = all(rep[name].passed and rep[name].residual < 1e-10 for name in IDENTITY_CHECKS) and elapsed < 120
    report(6, ok, f"{len(IDENTITY_CHECKS)} identities, max residual {worst:.2e}, {elapsed:.1f} s")


def test_criterion_07_factorization_decay(report):
    # At the valence-bond point the joint and factorized values agree to rounding
    # at every separation, so no decay is measurable and this check fails.
    # The decay itself shows off that point: see test_factorization_error_decays_off_aklt.
    state = aklt_prime_mps(10)
    bundle = spin1_bundle(10)
    seps = (2, 3, 4, 5)
    gaps = []
    for d in seps:
        gates = [Gate(2, Z, 0.8), Gate(3, X, 0.5), Gate(3 + d, Z, 0.8), Gate(4 + d, X, 0.5)]
        ev = evolved_expectations(bundle, state, gates, factorized=True)
        gaps.append(float(np.max(np.abs(ev.transfer - ev.factorized))))
    monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
    slope = loglog_slope(seps, gaps)
    detail = "gaps " + ", ".join(f"{g:.1e}" for g in gaps) + f", log-slope {slope:.2f}"
    report(7, monotone and slope < 0, detail)


def test_criterion_08_unitarity_scaling(report):
    t0 = time.perf_counter()
    d_min = 4
    ns = (2, 4, 8, 16)
    n_bulk = 2 + d_min * (ns[-1] - 1) + 4
    state = aklt_prime_mps(n_bulk)
    bundle = spin1_bundle(n_bulk)
    space = logical_subspace(bundle, state)
    devs = [unitarity_scaling(bundle, state, space, Z, 1.0, n, spaced_sites(n, d_min), d_min).deviation for n in ns]
    slope = loglog_slope(ns, devs)
    elapsed = time.perf_counter() - t0
    detail = "deviations " + ", ".join(f"{d:.3e}" for d in devs) + f", slope {slope:.3f}, {elapsed:.1f} s"
    report(8, -1.4 <= slope <= -0.6 and elapsed < 300, detail)


def test_criterion_09_block_local_measurement(report):
    bundle = spin1_bundle(4)
    state = build_aklt_prime(4)
    gates = [Gate(2, Z, 0.9)]
    ev = evolved_expectations(bundle, state, gates).transfer
    worst_dist = 0.0
    worst_z = 0.0
    for idx, h in enumerate(bundle.elements):
        proto = BlockLocalProtocol(bundle, h, gates)
        got = proto.distribution(state)
        want = spectral_distribution(evolved_tbar_dense(bundle, gates, h), state)
        worst_dist = max(worst_dist, abs(got[1] - want[1]), abs(got[-1] - want[-1]))
        samples = proto.sample(state, 100_000, make_rng(9, idx))
        se = samples.std(ddof=1) / math.sqrt(len(samples))
        diff = abs(samples.mean() - ev[idx].real)
        worst_z = max(worst_z, diff / se if se > 0 else (0.0 if diff < 1e-12 else math.inf))
    ok = worst_dist < 1e-10 and worst_z <= 4
    report(9, ok, f"distribution error {worst_dist:.2e}, worst sampled deviation {worst_z:.2f} SE")


def test_criterion_10_teleportation(report):
    rng = make_rng(10)
    thetas = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    worst = 0.0
    count = 0
    for _ in range(50):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        for axis in AXES:
            for th in thetas:
                for o in teleport_step(v, axis, th):
                    worst = max(worst, abs(1 - o.fidelity))
                    count += 1
    report(10, worst < 1e-12, f"{count} post-states, max infidelity {worst:.1e}")


def test_criterion_11_trivial_phase_contrast(report):
    trivial = ground_state(build_hamiltonian(HamiltonianParams(6, theta=0.0, d_z=4.0))).state
    t = string_order_bulk_end(trivial, 3, "z")
    a = string_order_bulk_end(build_aklt_prime(6), 3, "z")
    report(11, abs(t) < 0.05 and abs(a) > 0.3, f"trivial {t:+.4f}, AKLT {a:+.4f}")
