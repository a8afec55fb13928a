"""Logical operators, the logical subspace and operator-valued transfer matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..qcore import OperatorString, OperatorSum, StateVector, expectation, matrix_function
from .bundle import RepresentationBundle
from .group import GroupElement

RANK_KEEP = 1e-6
RANK_DROP = 1e-10


@dataclass(frozen=True)
class LogicalOperator:
    g: GroupElement
    operator: OperatorString


def tbar(bundle: RepresentationBundle, g: GroupElement) -> LogicalOperator:
    """``(u_0(g) (x) u_1(g) ... u_N(g)) v_L(g)``."""
    n = bundle.n_bulk
    factors = [(i, bundle.u_site(i, g)) for i in range(n + 1)] + [(n + 1, bundle.v_l[g])]
    return LogicalOperator(g, OperatorString(factors))


def tbar_expectations(bundle: RepresentationBundle, state) -> np.ndarray:
    """``<Psi|T(g)|Psi>`` in group order."""
    return np.array([expectation(state, tbar(bundle, g).operator) for g in bundle.elements])


def chi(bundle: RepresentationBundle, state) -> dict[GroupElement, int]:
    """Symmetry charges: ``U(g)|Psi> = (-1)^chi(g) |Psi>``."""
    out = {}
    for g in bundle.elements:
        ev = expectation(state, bundle.symmetry(g)).real
        out[g] = 0 if ev > 0 else 1
    return out


# ---------------------------------------------------------------------------
# Logical subspace


@dataclass
class LogicalSubspace:
    """Orthonormal basis of ``span{T(g)|Psi>}`` kept in coefficient form.

    Column ``j`` of ``coeffs`` gives the basis vector ``sum_g coeffs[g, j] T(g)|Psi>``;
    the first basis vector is ``|Psi>`` itself.
    """

    bundle: RepresentationBundle
    state: object
    coeffs: np.ndarray
    tbar_values: np.ndarray
    ambiguous: bool
    singular_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def _index(self, g: GroupElement) -> int:
        return self.bundle.elements.index(g)

    def tbar_matrix(self, g: GroupElement) -> np.ndarray:
        """``P T(g) P`` in the subspace basis."""
        b = self.bundle
        els = b.elements
        inner = np.zeros((len(els), len(els)), dtype=complex)
        for i, a in enumerate(els):
            for j, c in enumerate(els):
                # T(a) T(g) T(c) = phase(a, g) phase(ag, c) T(agc)
                inner[i, j] = b.phase(a, g) * b.phase(a * g, c) * self.tbar_values[self._index(a * g * c)]
        return self.coeffs.conj().T @ inner @ self.coeffs

    def project(self, op: OperatorString | OperatorSum) -> np.ndarray:
        """``P op P`` in the subspace basis, evaluated through expectation values."""
        els = self.bundle.elements
        ts = [tbar(self.bundle, g).operator for g in els]
        inner = np.zeros((len(els), len(els)), dtype=complex)
        op_sum = OperatorSum.of(op)
        for i, a in enumerate(ts):
            for j, c in enumerate(ts):
                inner[i, j] = expectation(self.state, OperatorSum([a]) @ op_sum @ OperatorSum([c]))
        return self.coeffs.conj().T @ inner @ self.coeffs

    def vectors(self) -> np.ndarray:
        """Dense basis vectors as columns (dense states only)."""
        if not isinstance(self.state, StateVector):
            raise TypeError("dense basis vectors need a dense state")
        amps = self.state.amplitudes
        dims = self.state.dims
        images = np.stack([tbar(self.bundle, g).operator.apply(amps, dims) for g in self.bundle.elements], axis=1)
        return images @ self.coeffs

    def projector(self) -> np.ndarray:
        v = self.vectors()
        return v @ v.conj().T


def logical_subspace(bundle: RepresentationBundle, state) -> LogicalSubspace:
    """Gram-Schmidt over ``{T(g)|Psi>}`` with the identity element first.

    Dense states are orthogonalized on the vectors themselves. Other states use
    the Gram matrix ``<T(a)T(b)> = phase(a, b) <T(ab)>``; there a residual norm
    is only resolved down to about sqrt(machine epsilon), so the ambiguity band
    starts at ``1e-7`` instead of ``RANK_DROP``.
    """
    els = bundle.elements
    values = tbar_expectations(bundle, state)
    if isinstance(state, StateVector):
        images = np.stack([tbar(bundle, g).operator.apply(state.amplitudes, state.dims) for g in els], axis=1)

        def inner(a: np.ndarray, c: np.ndarray) -> complex:
            return np.vdot(images @ a, images @ c)

        def norm(c: np.ndarray) -> float:
            return float(np.linalg.norm(images @ c))

        floor = RANK_DROP
    else:
        gram = np.array([[bundle.phase(a, b) * values[els.index(a * b)] for b in els] for a in els])

        def inner(a: np.ndarray, c: np.ndarray) -> complex:
            return a.conj() @ gram @ c

        def norm(c: np.ndarray) -> float:
            return math.sqrt(max(inner(c, c).real, 0.0))

        floor = 1e-7
    basis: list[np.ndarray] = []
    sv = []
    ambiguous = False
    for idx in range(len(els)):
        c = np.zeros(len(els), dtype=complex)
        c[idx] = 1.0
        for _ in range(2):  # re-orthogonalize once for stability
            for q in basis:
                c = c - inner(q, c) * q
        n = norm(c)
        sv.append(n)
        if floor <= n <= RANK_KEEP:
            ambiguous = True
        if n > RANK_KEEP:
            basis.append(c / n)
    coeffs = np.stack(basis, axis=1)
    return LogicalSubspace(bundle, state, coeffs, values, ambiguous, np.array(sv))


# ---------------------------------------------------------------------------
# Gates and transfer matrices


@dataclass(frozen=True)
class Gate:
    site: int
    g: GroupElement
    alpha: float


def _site_fn(mat: np.ndarray, f) -> np.ndarray:
    return matrix_function(mat, f)


def gate_unitary(bundle: RepresentationBundle, gate: Gate) -> OperatorSum:
    """``exp(-i alpha/2 L_k(g))`` with ``L_k(g) = (u_0 ... u_{k-1})(g) S_k(g)``; ``L`` squares to ``S^2``."""
    k, g, a = gate.site, gate.g, gate.alpha
    s = bundle.s[g]
    cos_half = _site_fn(s, lambda w: np.cos(w * a / 2))
    sin_half = _site_fn(s, lambda w: np.sin(w * a / 2))
    string = [(i, bundle.u_site(i, g)) for i in range(k)]
    return OperatorSum([OperatorString([(k, cos_half)]), OperatorString(string + [(k, sin_half)], -1j)])


def l_operator(bundle: RepresentationBundle, k: int, g: GroupElement) -> OperatorString:
    return OperatorString([(i, bundle.u_site(i, g)) for i in range(k)] + [(k, bundle.s[g])])


def cos_operator(bundle: RepresentationBundle, k: int, g: GroupElement, alpha: float) -> OperatorString:
    return OperatorString([(k, _site_fn(bundle.s[g], lambda w: np.cos(w * alpha)))])


def sin_string(bundle: RepresentationBundle, k: int, g: GroupElement, alpha: float) -> OperatorString:
    """``sin(beta) R_k(g, alpha) = sin(S_k(g) alpha) u_k(g) (u_{k+1} ... u_N)(g) v_L(g)``."""
    n = bundle.n_bulk
    first = _site_fn(bundle.s[g], lambda w: np.sin(w * alpha)) @ bundle.u[g]
    return OperatorString([(k, first)] + [(i, bundle.u[g]) for i in range(k + 1, n + 1)] + [(n + 1, bundle.v_l[g])])


def nu_string(bundle: RepresentationBundle, k: int, g: GroupElement) -> OperatorString:
    """Bulk-to-end string ``S_k(g) u_k(g) ... u_N(g) v_L(g)``, the small-angle limit of ``R_k / alpha``."""
    n = bundle.n_bulk
    return OperatorString(
        [(k, bundle.s[g] @ bundle.u[g])] + [(i, bundle.u[g]) for i in range(k + 1, n + 1)] + [(n + 1, bundle.v_l[g])]
    )


@dataclass
class GateData:
    """``L_k``, ``sin(beta) R_k``, ``beta_k`` and ``sigma_k`` for one gate."""

    l_op: OperatorString
    sin_r: OperatorString
    r_op: OperatorString | None
    beta: float
    sigma: float | None
    note: str = ""


def lk_rk_beta(bundle: RepresentationBundle, state, k: int, g: GroupElement, alpha: float) -> GateData:
    if not 1 <= k <= bundle.n_bulk:
        raise ValueError(f"gate site {k} outside bulk 1..{bundle.n_bulk}")
    if g not in bundle.g_sites[k]:
        raise ValueError(f"{g} is not an allowed rotation at site {k}")
    if not -math.pi - 1e-12 <= alpha <= math.pi + 1e-12:
        raise ValueError(f"alpha must lie in [-pi, pi], got {alpha}")
    c = 1.0 if alpha == 0 else expectation(state, cos_operator(bundle, k, g, alpha)).real
    if abs(c) > 1 + 1e-12:
        raise ArithmeticError(f"<cos(S alpha)> = {c} outside [-1, 1]")
    # arccos amplifies rounding near 1 to about 1e-8
    beta = math.acos(min(1.0, max(-1.0, c)))
    sin_r = sin_string(bundle, k, g, alpha)
    if math.sin(beta) < 1e-12:
        note = "" if alpha == 0 else "sin(beta) vanishes: R_k undefined"
        return GateData(l_operator(bundle, k, g), sin_r, None, beta, None, note)
    r_op = sin_r.scaled(1 / math.sin(beta))
    sigma = expectation(state, r_op).real
    return GateData(l_operator(bundle, k, g), sin_r, r_op, beta, sigma)


class MkMatrix:
    """``|G| x |G|`` matrix of operators; rows and columns follow the bundle's group order."""

    def __init__(self, bundle: RepresentationBundle, entries: dict[tuple[int, int], OperatorSum], label: str = ""):
        self.bundle = bundle
        self.entries = entries
        self.label = label

    @property
    def size(self) -> int:
        return len(self.bundle.elements)

    @classmethod
    def identity(cls, bundle: RepresentationBundle) -> MkMatrix:
        return cls(bundle, {(i, i): OperatorSum.identity() for i in range(len(bundle.elements))}, "I")

    def __matmul__(self, other: MkMatrix) -> MkMatrix:
        out: dict[tuple[int, int], OperatorSum] = {}
        for (i, j), a in self.entries.items():
            for (j2, l), b in other.entries.items():
                if j2 != j:
                    continue
                term = a @ b
                out[(i, l)] = out[(i, l)] + term if (i, l) in out else term
        return MkMatrix(self.bundle, out, f"{self.label}{other.label}")

    def expectation(self, state) -> np.ndarray:
        n = self.size
        out = np.zeros((n, n), dtype=complex)
        for (i, j), op in self.entries.items():
            out[i, j] = expectation(state, op)
        return out

    def entry(self, i: int, j: int) -> OperatorSum:
        return self.entries.get((i, j), OperatorSum())

    def is_identity(self) -> bool:
        return all(
            (i == j and len(op.terms) == 1 and not op.terms[0].factors and op.terms[0].coeff == 1)
            for (i, j), op in self.entries.items()
        ) and len(self.entries) == self.size


def mk_matrix(bundle: RepresentationBundle, k: int, g_k: GroupElement, alpha: float) -> MkMatrix:
    """Transfer matrix of one tilted block: ``V_k^dag T(g') V_k = sum_h M[g', h] T(h)``.

    Rows with ``kappa(g_k, g') = 0`` are trivial. Otherwise the diagonal entry is
    ``cos(S_k(g_k) alpha)`` and the entry at column ``g_k g'`` is
    ``i c sin(S_k(g_k) alpha) u_k ... u_N v_L(g_k)`` where ``T(g_k) T(g') = c T(g_k g')``.
    """
    if g_k not in bundle.g_sites[k]:
        raise ValueError(f"{g_k} is not an allowed rotation at site {k}")
    els = bundle.elements
    if alpha == 0:
        return MkMatrix.identity(bundle)
    entries: dict[tuple[int, int], OperatorSum] = {}
    cos_op = OperatorSum([cos_operator(bundle, k, g_k, alpha)])
    sin_op = sin_string(bundle, k, g_k, alpha)
    for i, gp in enumerate(els):
        if bundle.kappa(g_k, gp) == 0:
            entries[(i, i)] = OperatorSum.identity()
            continue
        entries[(i, i)] = cos_op
        j = els.index(g_k * gp)
        entries[(i, j)] = OperatorSum([sin_op.scaled(1j * bundle.phase(g_k, gp))])
    return MkMatrix(bundle, entries, f"M{k}")


def _sorted_gates(gates: Sequence[Gate]) -> list[Gate]:
    sites = [g.site for g in gates]
    if len(set(sites)) != len(sites):
        raise ValueError("at most one gate per site")
    return sorted(gates, key=lambda g: g.site)


def gate_product(bundle: RepresentationBundle, gates: Sequence[Gate]) -> MkMatrix:
    """``M_t ... M_1`` for gates ordered by site, skipping zero angles."""
    out = MkMatrix.identity(bundle)
    for gate in _sorted_gates(gates):
        if gate.alpha != 0:
            out = mk_matrix(bundle, gate.site, gate.g, gate.alpha) @ out
    return out


def evolve_state(bundle: RepresentationBundle, state: StateVector, gates: Sequence[Gate]) -> np.ndarray:
    """``V_t ... V_1 |Psi>`` as a dense vector."""
    vec = state.amplitudes
    for gate in _sorted_gates(gates):
        vec = gate_unitary(bundle, gate).apply(vec, state.dims)
    return vec


@dataclass
class EvolvedExpectations:
    transfer: np.ndarray  # via the transfer-matrix product
    direct: np.ndarray | None  # via explicit conjugation, dense states only
    factorized: np.ndarray | None

    @property
    def discrepancy(self) -> float:
        return float(np.max(np.abs(self.transfer - self.direct))) if self.direct is not None else 0.0


def evolved_expectations(
    bundle: RepresentationBundle, state, gates: Sequence[Gate], *, factorized: bool = False, check: bool = True
) -> EvolvedExpectations:
    """``<Psi|T_t(g)|Psi>`` for every ``g``, by transfer matrices and, for dense states, by direct conjugation."""
    init = tbar_expectations(bundle, state)
    transfer = gate_product(bundle, gates).expectation(state) @ init
    direct = None
    if isinstance(state, StateVector):
        evolved = evolve_state(bundle, state, gates)
        direct = np.array(
            [np.vdot(evolved, tbar(bundle, g).operator.apply(evolved, state.dims)) for g in bundle.elements]
        )
        if check and np.max(np.abs(direct - transfer)) > 1e-10:
            raise ArithmeticError(
                f"transfer-matrix and direct evolution disagree by {np.max(np.abs(direct - transfer)):.3e}"
            )
    fact = None
    if factorized:
        prod = np.eye(len(bundle.elements), dtype=complex)
        for gate in _sorted_gates(gates):
            prod = mk_matrix(bundle, gate.site, gate.g, gate.alpha).expectation(state) @ prod
        fact = prod @ init
    return EvolvedExpectations(transfer, direct, fact)
