"""Named consistency checks for a representation bundle and a resource state.

Every check returns ``{condition, residual, pass}``; informational entries
carry ``"informational": true`` and never affect the overall verdict.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..qcore import OperatorString, StateVector, expectation, spin_operators
from .blocklocal import BlockLocalProtocol, dense_recursion, evolved_tbar_dense, spectral_distribution
from .bundle import BundleError, RepresentationBundle, spin1_bundle, spin1_element
from .channels import channel_sequence, heisenberg_sequence
from .group import GroupElement
from .logical import (
    Gate,
    chi,
    cos_operator,
    evolved_expectations,
    gate_unitary,
    l_operator,
    logical_subspace,
    mk_matrix,
    sin_string,
    tbar,
    tbar_expectations,
)

OP_CHECK = 1e-12
IDENTITY_TOL = 1e-10
DENSE_LIMIT = 4096
CHECK_ANGLES = (0.7, -1.3)


@dataclass
class Check:
    condition: str
    residual: float
    passed: bool
    informational: bool = False
    detail: str = ""

    def as_dict(self) -> dict:
        out = {"condition": self.condition, "residual": self.residual, "pass": self.passed}
        if self.informational:
            out["informational"] = True
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class VerifyReport:
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, residual: float, tol: float, *, informational: bool = False, detail: str = "") -> Check:
        residual = float(residual)
        c = Check(name, residual, bool(residual < tol), informational, detail)
        self.checks.append(c)
        return c

    def run(self, name: str, fn, tol: float, **kw) -> Check:
        """Evaluate ``fn()`` as a residual; any exception is recorded as a failure."""
        try:
            value = fn()
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            c = Check(name, float("inf"), False, kw.get("informational", False), f"{type(exc).__name__}: {exc}")
            self.checks.append(c)
            return c
        return self.add(name, value, tol, **kw)

    def flag(self, name: str, ok: bool, detail: str = "", *, informational: bool = False) -> Check:
        c = Check(name, 0.0 if ok else 1.0, bool(ok), informational, detail)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.condition == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.condition for c in self.checks]

    def as_dict(self) -> dict:
        return {"pass": self.passed, "checks": [c.as_dict() for c in self.checks]}


def _herm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m - m.conj().T, 2))


def _dense(op, dims) -> np.ndarray:
    return op.to_dense(dims)


def operator_norm(m: np.ndarray) -> float:
    """Frobenius norm: an upper bound on the spectral norm that avoids an SVD per check."""
    return float(np.linalg.norm(m))


def _comm(a, b):
    return a @ b - b @ a


def _acomm(a, b):
    return a @ b + b @ a


def default_gates(bundle: RepresentationBundle) -> list[Gate]:
    """A short gate list used by the recursion and end-to-end checks."""
    els = [g for g in bundle.elements if not g.is_identity]
    n = bundle.n_bulk
    gates = [Gate(min(2, n), els[-1 % len(els)], 0.9)]
    if n >= 4:
        gates.append(Gate(n, els[0], -0.6))
    return gates


def verify_bundle(
    bundle: RepresentationBundle,
    state,
    *,
    gates: Sequence[Gate] | None = None,
    seed: int = 0,
) -> VerifyReport:
    """Run the structural checks, the operator identities and, on small dense chains, the block-local checks."""
    rep = VerifyReport()
    els = bundle.elements
    rng = np.random.default_rng(seed)

    # -- structure --------------------------------------------------------
    herm = max(_herm(t[g]) for t in (bundle.u0, bundle.u, bundle.s, bundle.v_r0, bundle.v_l) for g in els)
    rep.add("hermiticity", herm, OP_CHECK)
    lin = max(
        float(np.linalg.norm(t[a] @ t[b] - t[a * b], 2)) for t in (bundle.u0, bundle.u) for a in els for b in els
    )
    rep.add("linear_representation", lin, OP_CHECK)

    try:
        mismatch = sum(bundle.kappa(a, b) != bundle.kappa_r0(a, b) for a in els for b in els)
        rep.add("kappa_consistency", mismatch, 0.5, detail="pairs where left and right boundary commutation differ")
        nontrivial = any(bundle.kappa(a, b) for a in els for b in els)
        rep.flag("kappa_nondegenerate", nontrivial, "" if nontrivial else "all boundary operators commute")
        phases_ok = True
        for a, b in itertools.product(els, els):
            bundle.phase(a, b)
    except BundleError as exc:
        rep.flag("kappa_consistency", False, str(exc))
        return rep
    rep.flag("projective_boundary", phases_ok)

    h = bundle.h_group
    h_res = max(float(np.linalg.norm(bundle.u0[x] - bundle.v_r0[x], 2)) for x in h)
    rep.add("h_spec", h_res, OP_CHECK, detail="computed H = " + " ".join(g.label for g in h))
    if bundle.declared_h is not None:
        d_res = max(float(np.linalg.norm(bundle.u0[x] - bundle.v_r0[x], 2)) for x in bundle.declared_h)
        rep.add(
            "h_spec_declared",
            d_res,
            OP_CHECK,
            informational=True,
            detail="declared H = " + " ".join(g.label for g in bundle.declared_h),
        )

    sg = 0.0
    for k in range(1, bundle.n_bulk + 1):
        for gp in bundle.g_sites[k]:
            for g in els:
                lhs = bundle.u[g] @ bundle.s[gp] @ bundle.u[g].conj().T
                sg = max(sg, float(np.linalg.norm(lhs - (-1) ** bundle.kappa(g, gp) * bundle.s[gp], 2)))
        if k == 1:
            break  # bulk operators are shared by all blocks
    rep.add("condition_Sg", sg, OP_CHECK)

    t_sq = max(
        max(float(np.linalg.norm(bundle.u_site(i, g) @ bundle.u_site(i, g) - np.eye(bundle.u_site(i, g).shape[0]), 2)) for i in (0, 1))
        for g in els
    )
    t_sq = max(t_sq, max(float(np.linalg.norm(bundle.v_l[g] @ bundle.v_l[g] - np.eye(2), 2)) for g in els))
    rep.add("tbar_square", t_sq, OP_CHECK)

    # -- state-dependent ----------------------------------------------------
    signs = chi(bundle, state)
    sym_res = 0.0
    for g in els:
        sym_res = max(sym_res, _symmetry_residual(bundle, state, g, (-1) ** signs[g]))
    rep.add("symmetry", sym_res, IDENTITY_TOL, detail="chi = " + " ".join(f"{g.label}:{signs[g]}" for g in els))

    init = tbar_expectations(bundle, state)
    expect = np.array([(-1) ** signs[g] if g in h else 0.0 for g in els])
    rep.add("init_eval", float(np.max(np.abs(init - expect))), IDENTITY_TOL)

    space = logical_subspace(bundle, state)
    irreducible = _commutant_dim(space) == 1
    rep.flag(
        "logical_dimension",
        space.dim >= 2 and irreducible and not space.ambiguous,
        f"dim Q = {space.dim}, irreducible = {irreducible}, ambiguous = {space.ambiguous}",
    )

    dense = isinstance(state, StateVector) and int(np.prod(bundle.dims)) <= DENSE_LIMIT
    if not dense:
        rep.flag("dense_checks", True, "skipped: state not dense or chain too large", informational=True)
        return rep
    dims = bundle.dims
    t_dense = {g: _dense(tbar(bundle, g).operator, dims) for g in els}

    res = 0.0
    for a, b in itertools.product(els, els):
        target = _acomm if bundle.kappa(a, b) else _comm
        res = max(res, operator_norm(target(t_dense[a], t_dense[b])))
    rep.add("tbar_anticommutation", res, IDENTITY_TOL)

    rep.run("anticommuting_string_vanishes", lambda: _anticommuting_string(bundle, state, t_dense), IDENTITY_TOL)
    for name, value in _commutation_relations(bundle, t_dense).items():
        rep.add(name, value, IDENTITY_TOL)
    rep.run("transfer_matrix_conjugation", lambda: _transfer_conjugation(bundle, t_dense), IDENTITY_TOL)
    rep.run("transfer_matrix_sequences", lambda: _transfer_sequences(bundle, state, rng), IDENTITY_TOL)
    rep.run("projected_entries_scalar", lambda: _projected_scalar(bundle, space, t_dense), IDENTITY_TOL)
    if space.dim >= 2:
        rep.run("channel_heisenberg_form", lambda: _channel_heisenberg(bundle, state, space), IDENTITY_TOL)

    gates = list(gates) if gates is not None else default_gates(bundle)
    rec = dense_recursion(bundle, gates)
    rep.run("tilde_u_commutation", lambda: _tilde_u_commutation(rec), IDENTITY_TOL)
    rep.run("tilde_v_product", lambda: _tilde_v_product(rec), IDENTITY_TOL)
    rep.run("evolved_logical_from_tilde_u", lambda: _evolved_from_tilde_u(bundle, rec, t_dense), IDENTITY_TOL)
    rep.run("block_eigenvector_signs", lambda: _eigen_leaves(bundle, rec, gates), IDENTITY_TOL)
    rep.run("theorem1_end_to_end", lambda: _end_to_end(bundle, state, gates), IDENTITY_TOL)
    return rep


# ---------------------------------------------------------------------------


def _symmetry_residual(bundle: RepresentationBundle, state, g: GroupElement, sign: int) -> float:
    op = bundle.symmetry(g)
    if isinstance(state, StateVector):
        out = op.apply(state.amplitudes, state.dims)
        return float(np.linalg.norm(out - sign * state.amplitudes))
    # ||U psi - s psi||^2 = 2 - 2 s Re<U> for unitary Hermitian U
    return float(np.sqrt(max(0.0, 2 - 2 * sign * expectation(state, op).real)))


def _commutant_dim(space) -> int:
    """Dimension of the matrices commuting with every projected logical operator."""
    d = space.dim
    rows = []
    eye = np.eye(d)
    for g in space.bundle.elements:
        t = space.tbar_matrix(g)
        rows.append(np.kron(t, eye) - np.kron(eye, t.T))
    sv = np.linalg.svd(np.vstack(rows), compute_uv=False)
    return int(np.sum(sv < 1e-8)) + max(0, d * d - len(sv))


def _anticommuting_string(bundle, state, t_dense) -> float:
    """Operators anticommuting with some symmetry have zero expectation."""
    dims = bundle.dims
    worst = 0.0
    u = {h: _dense(bundle.symmetry(h), dims) for h in bundle.elements}
    for g in bundle.elements:
        for h in bundle.elements:
            if operator_norm(_acomm(u[h], t_dense[g])) < OP_CHECK:
                worst = max(worst, abs(expectation(state, tbar(bundle, g).operator)))
                break
    if bundle.name == "spin1":
        s = spin_operators(3)
        n = bundle.n_bulk
        string = OperatorString([(j, s["rz"]) for j in range(1, n + 1)] + [(n + 1, bundle.v_l[spin1_element("z")])])
        sx = _dense(bundle.symmetry(spin1_element("x")), dims)
        worst = max(worst, operator_norm(_acomm(sx, _dense(string, dims))), abs(expectation(state, string)))
    return worst


def _commutation_relations(bundle, t_dense) -> dict[str, float]:
    dims = bundle.dims
    out = {"cos_factor_commutes": 0.0, "r_string_commutes": 0.0, "l_string_commutes": 0.0, "l_string_anticommutes": 0.0}
    for k in range(1, bundle.n_bulk + 1):
        for gp in bundle.g_sites[k]:
            l_op = _dense(l_operator(bundle, k, gp), dims)
            for alpha in CHECK_ANGLES:
                c = _dense(cos_operator(bundle, k, gp, alpha), dims)
                r = _dense(sin_string(bundle, k, gp, alpha), dims)
                for g in bundle.elements:
                    out["cos_factor_commutes"] = max(out["cos_factor_commutes"], operator_norm(_comm(c, t_dense[g])))
                    out["r_string_commutes"] = max(out["r_string_commutes"], operator_norm(_comm(r, t_dense[g])))
            for g in bundle.elements:
                tt_comm = operator_norm(_comm(t_dense[gp], t_dense[g])) < OP_CHECK
                tt_acomm = operator_norm(_acomm(t_dense[gp], t_dense[g])) < OP_CHECK
                l_comm = operator_norm(_comm(l_op, t_dense[g])) < OP_CHECK
                l_acomm = operator_norm(_acomm(l_op, t_dense[g])) < OP_CHECK
                if bundle.s[gp].any():
                    out["l_string_commutes"] = max(out["l_string_commutes"], float(tt_comm != l_comm))
                    out["l_string_anticommutes"] = max(out["l_string_anticommutes"], float(tt_acomm != l_acomm))
    return out


def _transfer_conjugation(bundle, t_dense) -> float:
    """``V_k^dag T(g') V_k`` against the row of the transfer matrix, as full operators."""
    dims = bundle.dims
    worst = 0.0
    for k in range(1, bundle.n_bulk + 1):
        for gk in bundle.g_sites[k]:
            if gk.is_identity:
                continue
            alpha = CHECK_ANGLES[k % 2]
            v = _dense(gate_unitary(bundle, Gate(k, gk, alpha)), dims)
            m = mk_matrix(bundle, k, gk, alpha)
            for i, gp in enumerate(bundle.elements):
                lhs = v.conj().T @ t_dense[gp] @ v
                rhs = np.zeros_like(lhs)
                for j, g in enumerate(bundle.elements):
                    entry = m.entry(i, j)
                    if entry.terms:
                        rhs = rhs + _dense(entry, dims) @ t_dense[g]
                worst = max(worst, operator_norm(lhs - rhs))
    return worst


def random_gates(bundle: RepresentationBundle, rng: np.random.Generator, length: int) -> list[Gate]:
    sites = sorted(rng.choice(np.arange(1, bundle.n_bulk + 1), size=length, replace=False))
    out = []
    for k in sites:
        allowed = [g for g in bundle.g_sites[int(k)] if not g.is_identity]
        out.append(Gate(int(k), allowed[int(rng.integers(len(allowed)))], float(rng.uniform(-np.pi, np.pi))))
    return out


def _transfer_sequences(bundle, state, rng, trials: int = 6) -> float:
    worst = 0.0
    for t in range(trials):
        length = 1 + t % min(3, bundle.n_bulk)
        ee = evolved_expectations(bundle, state, random_gates(bundle, rng, length), check=False)
        worst = max(worst, ee.discrepancy)
    return worst


def _projected_scalar(bundle, space, t_dense) -> float:
    """``P D P = <D> P`` and ``P D T(g) P = <D> T^P(g)`` for transfer-matrix entries and their products."""
    dims = bundle.dims
    vecs = space.vectors()
    psi = space.state.amplitudes
    ds = []
    for k, alpha in ((1, CHECK_ANGLES[0]), (bundle.n_bulk, CHECK_ANGLES[1])):
        for gk in bundle.elements:
            if gk.is_identity:
                continue
            m = mk_matrix(bundle, k, gk, alpha)
            ds.extend(_dense(op, dims) for op in m.entries.values())
    ds.append(ds[0] @ ds[-1])
    worst = 0.0
    for d in ds:
        mean = np.vdot(psi, d @ psi)
        worst = max(worst, float(np.linalg.norm(vecs.conj().T @ d @ vecs - mean * np.eye(space.dim))))
        for g in bundle.elements:
            lhs = vecs.conj().T @ d @ t_dense[g] @ vecs
            worst = max(worst, float(np.linalg.norm(lhs - mean * space.tbar_matrix(g))))
    return worst


def _channel_heisenberg(bundle, state, space) -> float:
    """Heisenberg-picture channel chain against the product of averaged transfer matrices."""
    n = bundle.n_bulk
    nontrivial = [g for g in bundle.elements if not g.is_identity]
    sites = sorted({1, max(1, n)})
    gates = [Gate(k, nontrivial[i % len(nontrivial)], CHECK_ANGLES[i % 2]) for i, k in enumerate(sites)]
    chans = channel_sequence(bundle, space, gates)
    prod = np.eye(len(bundle.elements), dtype=complex)
    for gate in gates:
        prod = mk_matrix(bundle, gate.site, gate.g, gate.alpha).expectation(state) @ prod
    tp = [space.tbar_matrix(g) for g in bundle.elements]
    worst = 0.0
    for i, g in enumerate(bundle.elements):
        lhs = heisenberg_sequence(chans, tp[i])
        rhs = sum(prod[i, j] * tp[j] for j in range(len(tp)))
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


def _tilde_u_commutation(rec) -> float:
    worst = 0.0
    flat = [m for table in rec.u_tilde for m in table.values()]
    for a, b in itertools.combinations(flat, 2):
        worst = max(worst, float(np.linalg.norm(_comm(a, b))))
    return worst


def _chain_products(rec) -> tuple[np.ndarray, np.ndarray]:
    """``V~_1 ... V~_N`` and ``V_N ... V_1``."""
    v_t = np.eye(rec.v_plain[0].shape[0], dtype=complex)
    v_p = v_t.copy()
    for vt, vp in zip(rec.v_tilde, rec.v_plain):
        v_t = v_t @ vt
        v_p = vp @ v_p
    return v_t, v_p


def _tilde_v_product(rec) -> float:
    v_t, v_p = _chain_products(rec)
    return operator_norm(v_t - v_p)


def _evolved_from_tilde_u(bundle, rec, t_dense) -> float:
    """``V^dag T(h) V`` equals the product of the conjugated ``u~_k(h)`` times ``v_L(h)``."""
    _, v_p = _chain_products(rec)
    worst = 0.0
    last = bundle.n_bulk + 1
    for g in bundle.elements:
        prod = np.eye(v_p.shape[0], dtype=complex)
        for k in range(last):
            prod = prod @ rec.u_tilde[k][g]
        prod = prod @ _dense(OperatorString([(last, bundle.v_l[g])]), bundle.dims)
        worst = max(worst, operator_norm(prod - v_p.conj().T @ t_dense[g] @ v_p))
    return worst


def _eigen_leaves(bundle, rec, gates) -> float:
    """Every block-local basis vector is a joint eigenvector of the recursively conjugated ``u``."""
    worst = 0.0
    for h in bundle.elements:
        proto = BlockLocalProtocol(bundle, h, gates)
        for vec, bits in proto.leaves():
            for k in range(bundle.n_bulk + 1):
                for g in bundle.elements:
                    diff = rec.u_tilde[k][g] @ vec - (-1) ** bits[k][g] * vec
                    worst = max(worst, float(np.linalg.norm(diff)))
        break  # the bulk bases do not depend on h
    return worst


def _end_to_end(bundle, state, gates) -> float:
    ee = evolved_expectations(bundle, state, gates, check=False)
    worst = 0.0
    for i, h in enumerate(bundle.elements):
        proto = BlockLocalProtocol(bundle, h, gates)
        dist = proto.distribution(state)
        spec = spectral_distribution(evolved_tbar_dense(bundle, gates, h), state)
        worst = max(worst, abs(dist[1] - spec[1]), abs(dist[-1] - spec[-1]))
        worst = max(worst, abs((dist[1] - dist[-1]) - ee.transfer[i].real))
    return worst


# ---------------------------------------------------------------------------
# Deliberately broken bundles


def counterexample_bundle(kind: str, n_bulk: int) -> RepresentationBundle:
    """``"commuting-vL"``: boundary operators that all commute; ``"non-hermitian-S"``: a non-Hermitian tilt generator."""
    base = spin1_bundle(n_bulk)
    if kind == "commuting-vL":
        z = np.diag([1.0, -1.0]).astype(complex)
        eye = np.eye(2, dtype=complex)
        v = {spin1_element("e"): eye, spin1_element("z"): z, spin1_element("x"): z, spin1_element("y"): eye}
        return RepresentationBundle(2, n_bulk, base.u0, base.u, base.s, dict(v), dict(v), name="commuting-vL")
    if kind == "non-hermitian-S":
        s = dict(base.s)
        zname = spin1_element("z")
        s[zname] = s[zname] + 0.25 * np.diag([1, 1], k=1)
        return RepresentationBundle(2, n_bulk, base.u0, base.u, s, base.v_r0, base.v_l, name="non-hermitian-S")
    raise ValueError(f"unknown counterexample {kind!r}")
