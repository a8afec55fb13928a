"""Block-local adaptive measurement of an evolved logical observable.

Each block ``k`` is measured in a joint eigenbasis of the commuting
operators ``O_k(g) = W u_k(g) W^dag`` with ``W = exp(+i (-1)^q alpha_k S_k(g_k) / 2)``,
where ``q`` is the parity of the outcomes ``s_j(g_k)`` of all earlier blocks,
block 0 included. The product of the outcome signs for ``h`` over all blocks
(the last block measured in the eigenbasis of ``v_L(h)``) is one sample of
``T_N(h) = V^dag T(h) V``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from ..qcore import StateVector, expm_hermitian
from .bundle import RepresentationBundle
from .group import GroupElement
from .logical import Gate, _sorted_gates, tbar

NULL_PROB = 1e-14
COMMUTE_TOL = 1e-10


class MeasurabilityError(ValueError):
    """Raised when the per-block operators cannot be measured simultaneously."""


@dataclass(frozen=True)
class BlockBasis:
    """Orthonormal kets (columns) with the outcome bit ``s(g)`` of every ket for every element."""

    kets: np.ndarray
    bits: dict[GroupElement, np.ndarray]


def joint_eigenbasis(ops: dict[GroupElement, np.ndarray], seed: int = 7) -> BlockBasis:
    """Common eigenbasis of commuting Hermitian involutions."""
    mats = list(ops.values())
    for i, a in enumerate(mats):
        for b in mats[i + 1 :]:
            if np.linalg.norm(a @ b - b @ a) > COMMUTE_TOL:
                raise MeasurabilityError("block operators do not commute")
    weights = np.random.default_rng(seed).normal(size=len(mats))
    _, vecs = np.linalg.eigh(sum(w * m for w, m in zip(weights, mats)))
    bits = {}
    for g, m in ops.items():
        ev = np.einsum("ij,ik,kj->j", vecs.conj(), m, vecs)
        if np.max(np.abs(np.abs(ev) - 1)) > 1e-8 or np.max(np.abs(ev.imag)) > 1e-8:
            raise MeasurabilityError(f"basis does not diagonalize the operator for {g} with eigenvalues +-1")
        bits[g] = (ev.real < 0).astype(np.int8)
    return BlockBasis(vecs, bits)


class BlockLocalProtocol:
    """Adaptive block-local measurement of ``T_N(h)`` for a fixed gate list."""

    def __init__(self, bundle: RepresentationBundle, h: GroupElement, gates: Sequence[Gate]):
        self.bundle = bundle
        self.h = h
        self.gates = {g.site: g for g in _sorted_gates(gates) if g.alpha != 0}
        for k, gate in self.gates.items():
            if not 1 <= k <= bundle.n_bulk:
                raise ValueError(f"gate site {k} outside bulk 1..{bundle.n_bulk}")
        self.first = joint_eigenbasis(bundle.u0)
        self.bulk = joint_eigenbasis(bundle.u)
        self.last = joint_eigenbasis({h: bundle.v_l[h]})
        # rotated bases per (site, parity) are reused across rounds
        self._rotated: dict[tuple[int, int], np.ndarray] = {}

    @property
    def n_bulk(self) -> int:
        return self.bundle.n_bulk

    def kets(self, k: int, parities: dict[GroupElement, int]) -> np.ndarray:
        if k == 0:
            return self.first.kets
        if k == self.n_bulk + 1:
            return self.last.kets
        gate = self.gates.get(k)
        if gate is None:
            return self.bulk.kets
        q = parities[gate.g] & 1
        key = (k, q)
        if key not in self._rotated:
            w = expm_hermitian(self.bundle.s[gate.g], (-1) ** q * gate.alpha / 2)
            self._rotated[key] = w @ self.bulk.kets
        return self._rotated[key]

    def bits(self, k: int) -> BlockBasis:
        if k == 0:
            return self.first
        if k == self.n_bulk + 1:
            return self.last
        return self.bulk

    def _advance(self, parities: dict[GroupElement, int], k: int, idx: int) -> dict[GroupElement, int]:
        basis = self.bits(k)
        if k == self.n_bulk + 1:
            return {self.h: parities[self.h] + int(basis.bits[self.h][idx])}
        return {g: parities[g] + int(basis.bits[g][idx]) for g in self.bundle.elements}

    def leaves(self):
        """Every product basis vector the protocol can end in, with its outcome bits per block.

        Yields ``(vector, bits)`` where ``bits[k][g]`` is ``s_k(g)``; block ``N+1``
        only carries the bit for ``h``.
        """
        zero = {g: 0 for g in self.bundle.elements}

        def walk(k, par, kets, bits):
            if k == self.n_bulk + 2:
                vec = kets[0]
                for ket in kets[1:]:
                    vec = np.kron(vec, ket)
                yield vec, bits
                return
            basis = self.kets(k, par)
            table = self.bits(k).bits
            for idx in range(basis.shape[1]):
                here = {g: int(b[idx]) for g, b in table.items()}
                yield from walk(k + 1, self._advance(par, k, idx), kets + [basis[:, idx]], bits + [here])

        yield from walk(0, zero, [], [])

    # -- exact distribution ------------------------------------------------

    def distribution(self, state: StateVector) -> dict[int, float]:
        """Exact probabilities of the sampled eigenvalue ``+1`` and ``-1``."""
        out = {1: 0.0, -1: 0.0}
        zero = {g: 0 for g in self.bundle.elements}

        def walk(vec: np.ndarray, k: int, par: dict[GroupElement, int], weight: float) -> None:
            kets = self.kets(k, par)
            rows = kets.conj().T @ vec.reshape(kets.shape[0], -1)
            probs = np.einsum("ij,ij->i", rows.conj(), rows).real
            for idx, p in enumerate(probs):
                if p < NULL_PROB * weight:
                    continue
                nxt = self._advance(par, k, idx)
                if k == self.n_bulk + 1:
                    out[(-1) ** (nxt[self.h] & 1)] += p
                else:
                    walk(rows[idx], k + 1, nxt, weight)

        walk(state.amplitudes, 0, zero, 1.0)
        return out

    def mean(self, state: StateVector) -> float:
        d = self.distribution(state)
        return d[1] - d[-1]

    # -- sampling ------------------------------------------------------------

    def run_round(self, state: StateVector, rng: np.random.Generator) -> tuple[list[int], int]:
        """One round: per-block outcome bits ``s_k(h)`` and the sampled eigenvalue."""
        return self._round(state.amplitudes, rng.random(self.n_bulk + 2))

    def _round(self, vec: np.ndarray, u: np.ndarray) -> tuple[list[int], int]:
        par = {g: 0 for g in self.bundle.elements}
        s_h = []
        for k in range(self.n_bulk + 2):
            kets = self.kets(k, par)
            rows = kets.conj().T @ vec.reshape(kets.shape[0], -1)
            probs = np.einsum("ij,ij->i", rows.conj(), rows).real
            if probs.max() < NULL_PROB:
                raise ValueError("all outcome probabilities vanish")
            cdf = np.cumsum(probs) / probs.sum()
            idx = min(int(np.searchsorted(cdf, u[k], side="right")), len(probs) - 1)
            s_h.append(int(self.bits(k).bits[self.h][idx]))
            par = self._advance(par, k, idx)
            vec = rows[idx] / math.sqrt(probs[idx])
        return s_h, (-1) ** (sum(s_h) & 1)

    def sample(self, state: StateVector, rounds: int, rng: np.random.Generator) -> np.ndarray:
        """Sampled eigenvalues of many rounds; identical to repeated :meth:`run_round` calls.

        Rounds that share a prefix of outcomes are propagated together.
        """
        u = rng.random((rounds, self.n_bulk + 2))
        out = np.empty(rounds, dtype=np.int8)
        zero = {g: 0 for g in self.bundle.elements}

        def walk(vec: np.ndarray, k: int, par: dict[GroupElement, int], idx_rounds: np.ndarray) -> None:
            kets = self.kets(k, par)
            rows = kets.conj().T @ vec.reshape(kets.shape[0], -1)
            probs = np.einsum("ij,ij->i", rows.conj(), rows).real
            cdf = np.cumsum(probs) / probs.sum()
            picks = np.minimum(np.searchsorted(cdf, u[idx_rounds, k], side="right"), len(probs) - 1)
            for idx in np.unique(picks):
                sel = idx_rounds[picks == idx]
                nxt = self._advance(par, k, int(idx))
                if k == self.n_bulk + 1:
                    out[sel] = (-1) ** (nxt[self.h] & 1)
                else:
                    walk(rows[idx] / math.sqrt(probs[idx]), k + 1, nxt, sel)

        walk(state.amplitudes, 0, zero, np.arange(rounds))
        return out


def block_local_measure(
    bundle: RepresentationBundle, state: StateVector, h: GroupElement, gates: Sequence[Gate], rng: np.random.Generator
) -> tuple[list[int], int]:
    """One round of the protocol: ``(s_0(h), ..., s_{N+1}(h))`` and ``(-1)^{sum s}``."""
    return BlockLocalProtocol(bundle, h, gates).run_round(state, rng)


# ---------------------------------------------------------------------------
# Dense operators for the recursion identities (small chains only)


def _embed(bundle: RepresentationBundle, site: int, mat: np.ndarray) -> np.ndarray:
    dims = bundle.dims
    left = int(np.prod(dims[:site]))
    right = int(np.prod(dims[site + 1 :]))
    return np.kron(np.kron(np.eye(left), mat), np.eye(right))


@dataclass
class DenseRecursion:
    """``u~_k(g)`` for ``k = 0..N`` and ``V~_k`` for ``k = 1..N`` as full-chain matrices."""

    u_tilde: list[dict[GroupElement, np.ndarray]]
    v_tilde: list[np.ndarray]  # index k-1 holds V~_k
    v_plain: list[np.ndarray]  # index k-1 holds V_k


def dense_recursion(bundle: RepresentationBundle, gates: Sequence[Gate]) -> DenseRecursion:
    n = bundle.n_bulk
    dim = int(np.prod(bundle.dims))
    if dim > 4096:
        raise MemoryError(f"dense recursion limited to dimension 4096, got {dim}")
    by_site = {g.site: g for g in _sorted_gates(gates)}
    eye = np.eye(dim, dtype=complex)
    u_tilde = [{g: _embed(bundle, 0, bundle.u0[g]) for g in bundle.elements}]
    v_tilde, v_plain = [], []
    for k in range(1, n + 1):
        gate = by_site.get(k)
        if gate is None or gate.alpha == 0:
            vt = eye
            vp = eye
        else:
            s_k = _embed(bundle, k, bundle.s[gate.g])
            string_t = eye
            string_p = eye
            for j in range(k):
                string_t = string_t @ u_tilde[j][gate.g]
                string_p = string_p @ _embed(bundle, j, bundle.u_site(j, gate.g))
            vt = expm(-0.5j * gate.alpha * string_t @ s_k)
            vp = expm(-0.5j * gate.alpha * string_p @ s_k)
        v_tilde.append(vt)
        v_plain.append(vp)
        u_tilde.append({g: vt.conj().T @ _embed(bundle, k, bundle.u[g]) @ vt for g in bundle.elements})
    return DenseRecursion(u_tilde, v_tilde, v_plain)


def evolved_tbar_dense(bundle: RepresentationBundle, gates: Sequence[Gate], h: GroupElement) -> np.ndarray:
    """``V^dag T(h) V`` with ``V = V_N ... V_1``."""
    rec = dense_recursion(bundle, gates)
    v = np.eye(rec.v_plain[0].shape[0], dtype=complex)
    for vk in rec.v_plain:
        v = vk @ v
    t = tbar(bundle, h).operator.to_dense(bundle.dims)
    return v.conj().T @ t @ v


def spectral_distribution(op: np.ndarray, state: StateVector) -> dict[int, float]:
    """Weights of the ``+1`` and ``-1`` eigenspaces of an involution in ``state``."""
    psi = state.amplitudes
    eye = np.eye(op.shape[0])
    plus = np.vdot(psi, (eye + op) @ psi).real / 2
    minus = np.vdot(psi, (eye - op) @ psi).real / 2
    return {1: float(plus), -1: float(minus)}
