"""Resource states and Hamiltonians for the boundary-decorated spin-1 chain."""

from __future__ import annotations

import logging
import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .qcore import (
    AXES,
    PAULI,
    SINGLET,
    TRIPLET_ISOMETRY,
    ChainSpec,
    OperatorString,
    OperatorSum,
    StateVector,
    apply_block,
    spin_operators,
)

log = logging.getLogger(__name__)

DENSE_LIMIT = 1024  # above this ARPACK is faster than a full dense solve on one core
DEGENERACY_GAP = 1e-6
RESIDUAL_LIMIT = 1e-9
STATE_MAGIC = b"SPTMBQC1"


# ---------------------------------------------------------------------------
# Valence-bond construction


def build_aklt_prime(n_bulk: int) -> StateVector:
    """Dense AKLT state with spin-1/2 boundary qubits attached at both ends.

    Singlets are laid on the 2(N+1) virtual qubits and each bulk pair is mapped
    to spin 1 through the triplet isometry, sweeping left to right. The vector
    is normalized once at the end.
    """
    if n_bulk < 1:
        raise ValueError(f"need at least one bulk site, got N={n_bulk}")
    spec = ChainSpec(n_bulk)  # raises for oversized chains
    bond = SINGLET.reshape(2, 2)
    iso = TRIPLET_ISOMETRY.conj()
    t = bond
    for _ in range(n_bulk):
        t = np.tensordot(t, bond, axes=0)  # (..., left, right, next-left)
        shape = t.shape
        t = t.reshape(shape[:-3] + (4, 2))
        t = np.tensordot(t, iso, axes=([-2], [0]))
        t = np.moveaxis(t, -1, -2)
    amps = t.reshape(-1)
    return StateVector(spec.site_dims, amps / np.linalg.norm(amps))


class MPSState:
    """Open-boundary matrix product state with one tensor ``(Dl, d, Dr)`` per site.

    Used for chains too long for dense storage. Supports the same expectation
    interface as :class:`StateVector` for operator strings and sums.
    """

    def __init__(self, tensors: Sequence[np.ndarray]):
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        self.dims = tuple(t.shape[1] for t in self.tensors)
        norm2 = self._contract({}).real
        self.tensors[0] = self.tensors[0] / math.sqrt(norm2)

    @property
    def n_bulk(self) -> int:
        return len(self.dims) - 2

    def _contract(self, mats: dict[int, np.ndarray]) -> complex:
        env = np.ones((1, 1), dtype=complex)
        for i, a in enumerate(self.tensors):
            op = mats.get(i)
            b = a if op is None else np.einsum("ij,ajb->aib", op, a)
            env = np.einsum("xy,xsa,ysb->ab", env, a.conj(), b, optimize=True)
        return complex(env[0, 0])

    def expectation(self, op: OperatorString | OperatorSum) -> complex:
        if isinstance(op, OperatorSum):
            return sum((self.expectation(t) for t in op.terms), 0j)
        return op.coeff * self._contract(dict(op.factors))

    def to_state(self) -> StateVector:
        t = self.tensors[0]
        for a in self.tensors[1:]:
            t = np.tensordot(t, a, axes=([-1], [0]))
        return StateVector(self.dims, t.reshape(-1))


def aklt_prime_mps(n_bulk: int) -> MPSState:
    """Bond-dimension-2 exact representation of the boundary-decorated AKLT state."""
    if n_bulk < 1:
        raise ValueError(f"need at least one bulk site, got N={n_bulk}")
    s = SINGLET.reshape(2, 2)
    first = s.reshape(1, 2, 2)
    bulk = np.stack([TRIPLET_ISOMETRY.conj()[:, m].reshape(2, 2) @ s for m in range(3)], axis=1)
    last = np.eye(2, dtype=complex).reshape(2, 2, 1)
    return MPSState([first] + [bulk] * n_bulk + [last])


# ---------------------------------------------------------------------------
# Hamiltonians


@dataclass(frozen=True)
class HamiltonianParams:
    """Couplings of the bilinear-biquadratic chain with anisotropy and boundary qubits.

    ``aklt=True`` replaces the bulk bond by the spin-2 projector
    ``S.S/2 + (S.S)^2/6 + 1/3`` with exact rational coefficients and ignores
    ``theta``. Single-ion anisotropy
    acts on bulk sites ``1..N-1`` (``anisotropy_sites="interior"``) or on all
    bulk sites (``"all"``).
    """

    n_bulk: int
    theta: float = 0.0
    d_x: float = 0.0
    d_z: float = 0.0
    j_0: float = 1.0
    j_end: float = 1.0
    aklt: bool = False
    anisotropy_sites: str = "interior"

    def __post_init__(self) -> None:
        if self.n_bulk < 1:
            raise ValueError(f"need at least one bulk site, got N={self.n_bulk}")
        for name in ("theta", "d_x", "d_z", "j_0", "j_end"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.anisotropy_sites not in ("interior", "all"):
            raise ValueError(f"anisotropy_sites must be 'interior' or 'all', got {self.anisotropy_sites!r}")

    @classmethod
    def aklt_point(cls, n_bulk: int, j_0: float = 1.0, j_end: float = 1.0) -> HamiltonianParams:
        return cls(n_bulk, theta=math.atan(1 / 3), j_0=j_0, j_end=j_end, aklt=True)

    def warnings(self) -> list[str]:
        out = []
        if self.j_0 <= 0 or self.j_end <= 0:
            out.append("boundary couplings must be positive for a unique ground state")
        return out


@dataclass
class SparseHamiltonian:
    """Sum of dense blocks acting on consecutive sites."""

    dims: tuple[int, ...]
    terms: list[tuple[int, np.ndarray]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def add(self, first_site: int, block: np.ndarray) -> None:
        self.terms.append((first_site, np.asarray(block, dtype=complex)))

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim, dtype=complex)
        for first, block in self.terms:
            out += apply_block(amplitudes, self.dims, first, block)
        return out

    def matvec(self, state: StateVector) -> StateVector:
        return StateVector(self.dims, self.apply(state.amplitudes))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for first, block in self.terms:
            span = 1
            last = first
            while span < block.shape[0]:
                span *= self.dims[last]
                last += 1
            left = int(np.prod(self.dims[:first], dtype=np.int64))
            right = int(np.prod(self.dims[last:], dtype=np.int64))
            out += np.kron(np.kron(np.eye(left), block), np.eye(right))
        return out

    def energy(self, state) -> float:
        if isinstance(state, StateVector):
            return float(np.vdot(state.amplitudes, self.apply(state.amplitudes)).real)
        raise TypeError("energy requires a dense state")


def _dot(a: dict, b: dict) -> np.ndarray:
    return sum(np.kron(a[x], b[x]) for x in AXES)


def build_hamiltonian(params: HamiltonianParams) -> SparseHamiltonian:
    n = params.n_bulk
    spec = ChainSpec(n)
    h = SparseHamiltonian(spec.site_dims)
    s1 = spin_operators(3)
    pauli = {a: PAULI[a] for a in AXES}
    ss = _dot(s1, s1)
    if params.aklt:
        bond = 0.5 * ss + (ss @ ss) / 6 + np.eye(9) / 3
    else:
        bond = math.cos(params.theta) * ss + math.sin(params.theta) * (ss @ ss)
    for i in range(1, n):
        h.add(i, bond)
    last_aniso = n if params.anisotropy_sites == "all" else n - 1
    onsite = params.d_x * (s1["x"] @ s1["x"]) + params.d_z * (s1["z"] @ s1["z"])
    if params.d_x or params.d_z:
        for i in range(1, last_aniso + 1):
            h.add(i, onsite)
    if params.j_0:
        h.add(0, params.j_0 * _dot(pauli, s1))
    if params.j_end:
        h.add(n, params.j_end * _dot(s1, pauli))
    return h


@dataclass
class GroundState:
    energy: float
    state: StateVector
    gap: float
    residual: float
    degenerate: bool

    def __iter__(self):
        yield self.energy
        yield self.state
        yield self.gap


class EigensolverError(RuntimeError):
    pass


def ground_state(h: SparseHamiltonian, *, seed: int = 0, tol: float = 1e-12, maxiter: int | None = None) -> GroundState:
    """Lowest eigenpair and the gap to the next level.

    Dense diagonalization below ``DENSE_LIMIT`` states, ARPACK Lanczos above.
    """
    dim = h.dim
    if dim <= DENSE_LIMIT:
        mat = h.to_dense()
        if not np.iscomplexobj(mat) or np.max(np.abs(mat.imag)) < 1e-15:
            mat = mat.real
        w, v = sla.eigh(mat, subset_by_index=[0, min(1, dim - 1)])
        energies, vec = w, v[:, 0].astype(complex)
    else:
        rng = np.random.default_rng(seed)
        v0 = np.ones(dim, dtype=complex) / math.sqrt(dim) + 1e-3 * rng.standard_normal(dim)
        op = spla.LinearOperator((dim, dim), matvec=h.apply, dtype=complex)
        try:
            w, v = spla.eigsh(op, k=2, which="SA", v0=v0, tol=tol, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise EigensolverError(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(w)
        energies, vec = w[order], v[:, order[0]]
    vec = vec / np.linalg.norm(vec)
    residual = float(np.linalg.norm(h.apply(vec) - energies[0] * vec))
    if residual > RESIDUAL_LIMIT:
        raise EigensolverError(f"ground-state residual {residual:.3e} exceeds {RESIDUAL_LIMIT:.0e}")
    gap = float(energies[1] - energies[0]) if len(energies) > 1 else math.inf
    degenerate = gap < DEGENERACY_GAP
    if degenerate:
        warnings.warn(f"ground state nearly degenerate (gap {gap:.3e}); not usable as a resource state", stacklevel=2)
    state = StateVector(h.dims, _fix_global_phase(vec))
    return GroundState(float(energies[0]), state, gap, residual, degenerate)


def _fix_global_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return vec * (abs(vec[k]) / vec[k])


# ---------------------------------------------------------------------------
# Symmetry


def symmetry_operator(n_bulk: int, axis: str) -> OperatorString:
    """``-sigma_0^a (prod_j exp(i pi S_j^a)) sigma_{N+1}^a``."""
    rot = spin_operators(3)["r" + axis]
    factors = [(0, PAULI[axis])] + [(j, rot) for j in range(1, n_bulk + 1)] + [(n_bulk + 1, PAULI[axis])]
    return OperatorString(factors, -1.0)


def symmetry_residuals(state: StateVector) -> dict[str, dict[str, float]]:
    """Residual of each ``U_a`` eigen-equation together with the rounded eigenvalue."""
    out = {}
    for a in AXES:
        u = symmetry_operator(state.n_bulk, a)
        image = u.apply(state.amplitudes, state.dims)
        ev = complex(np.vdot(state.amplitudes, image))
        out[a] = {
            "residual": float(np.linalg.norm(image - ev * state.amplitudes)),
            "eigenvalue": ev.real,
            "sign": 1 if ev.real >= 0 else -1,
        }
    return out


def total_spin_squared(state: StateVector) -> float:
    """``<(S_tot)^2>`` with spin-1/2 boundary spins and spin-1 bulk."""
    total = 0.0
    for a in AXES:
        terms = []
        for site, d in enumerate(state.dims):
            terms.append(OperatorString([(site, spin_operators(d)[a])]))
        s_a = OperatorSum(terms)
        vec = s_a.apply(state.amplitudes, state.dims)
        total += float(np.vdot(vec, vec).real)
    return total


# ---------------------------------------------------------------------------
# Persistence


def save_state(path: str | Path, state: StateVector) -> None:
    spec = state.spec
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sqq", STATE_MAGIC, spec.n_bulk, spec.bulk_dim))
        fh.write(state.amplitudes.astype("<c16").tobytes())


def load_state(path: str | Path) -> StateVector:
    data = Path(path).read_bytes()
    header = struct.calcsize("<8sqq")
    if len(data) < header:
        raise ValueError(f"{path}: truncated state file")
    magic, n, d = struct.unpack("<8sqq", data[:header])
    if magic != STATE_MAGIC:
        raise ValueError(f"{path}: not a state file (bad magic {magic!r})")
    spec = ChainSpec(n, d)
    amps = np.frombuffer(data[header:], dtype="<c16")
    if amps.size != spec.dim:
        raise ValueError(f"{path}: expected {spec.dim} amplitudes, found {amps.size}")
    return StateVector(spec.site_dims, amps.astype(complex))
