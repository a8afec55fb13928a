"""Mixed-dimension tensor-product Hilbert spaces and local operator algebra.

A chain is laid out as ``(2, d, ..., d, 2)``: a boundary qubit at site 0,
``N`` bulk qudits of dimension ``d`` and a boundary qubit at site ``N+1``.
Amplitudes are stored densely in row-major order with site 0 the most
significant index. Operators are kept as small per-site matrices and applied
by reshaping the amplitude vector, so full-dimension matrices are only built
on request (``to_dense``) for small chains.

Local bases: qubits use ``|0> = up, |1> = down``; spin-1 uses the ordering
``(m=+1, m=0, m=-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

# Tolerances shared by every module.
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
OP_TOL = 1e-13
PHYS_TOL = 1e-10

MAX_DIM = 2**31 - 1

ComplexArray = NDArray[np.complex128]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}
AXES = ("x", "y", "z")


@dataclass(frozen=True)
class ChainSpec:
    """Layout of a boundary-decorated chain with ``n_bulk`` bulk sites."""

    n_bulk: int
    bulk_dim: int = 3

    def __post_init__(self) -> None:
        if self.n_bulk < 0:
            raise ValueError(f"n_bulk must be >= 0, got {self.n_bulk}")
        if self.bulk_dim < 2:
            raise ValueError(f"bulk_dim must be >= 2, got {self.bulk_dim}")
        if self.dim > MAX_DIM:
            raise MemoryError(f"chain dimension {self.dim} exceeds the addressable range")

    @property
    def site_dims(self) -> tuple[int, ...]:
        return (2,) + (self.bulk_dim,) * self.n_bulk + (2,)

    @property
    def dim(self) -> int:
        return 4 * self.bulk_dim**self.n_bulk

    @classmethod
    def from_dims(cls, dims: Sequence[int]) -> ChainSpec:
        dims = tuple(int(d) for d in dims)
        if len(dims) < 2 or dims[0] != 2 or dims[-1] != 2:
            raise ValueError(f"chain dims must start and end with 2, got {dims}")
        bulk = set(dims[1:-1])
        if len(bulk) > 1:
            raise ValueError(f"bulk dims must be uniform, got {dims}")
        return cls(len(dims) - 2, bulk.pop() if bulk else 3)


def flat_index(dims: Sequence[int], occupations: Sequence[int]) -> int:
    """Row-major index of a product basis state, site 0 most significant."""
    if len(occupations) != len(dims):
        raise IndexError(f"expected {len(dims)} labels, got {len(occupations)}")
    index = 0
    for d, label in zip(dims, occupations):
        if not 0 <= label < d:
            raise IndexError(f"label {label} out of range for local dimension {d}")
        index = index * d + int(label)
    return index


def occupations_of(dims: Sequence[int], index: int) -> tuple[int, ...]:
    """Inverse of :func:`flat_index`."""
    if not 0 <= index < int(np.prod(dims)):
        raise IndexError(f"index {index} out of range")
    labels = []
    for d in reversed(dims):
        index, r = divmod(index, d)
        labels.append(r)
    return tuple(reversed(labels))


@dataclass(frozen=True)
class StateVector:
    """Dense amplitudes over a tensor product of local spaces."""

    dims: tuple[int, ...]
    amplitudes: ComplexArray = field(repr=False)

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(self.dims)):
            raise ValueError(f"{amps.size} amplitudes do not match dims {self.dims}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_bulk(self) -> int:
        return len(self.dims) - 2

    @property
    def spec(self) -> ChainSpec:
        return ChainSpec.from_dims(self.dims)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> StateVector:
        n = self.norm
        if n < 1e-300:
            raise ValueError("cannot normalize a null state")
        return StateVector(self.dims, self.amplitudes / n)

    def overlap(self, other: StateVector) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    @classmethod
    def product(cls, kets: Sequence[ComplexArray]) -> StateVector:
        kets = [np.asarray(k, dtype=complex) for k in kets]
        return cls(tuple(k.size for k in kets), reduce(np.kron, kets))


def apply_matrix(amplitudes: ComplexArray, dims: Sequence[int], site: int, matrix: ComplexArray) -> ComplexArray:
    """Apply ``matrix`` on ``site`` of a flat amplitude vector, returning a new vector."""
    d = dims[site]
    if matrix.shape != (d, d):
        raise ValueError(f"operator shape {matrix.shape} does not match site {site} of dimension {d}")
    left = int(np.prod(dims[:site], dtype=np.int64))
    right = int(np.prod(dims[site + 1 :], dtype=np.int64))
    psi = amplitudes.reshape(left, d, right)
    return np.einsum("ij,ajb->aib", matrix, psi, optimize=True).reshape(-1)


def apply_block(amplitudes: ComplexArray, dims: Sequence[int], first: int, block: ComplexArray) -> ComplexArray:
    """Apply a dense block acting on consecutive sites starting at ``first``."""
    span = 1
    last = first
    while span < block.shape[0]:
        span *= dims[last]
        last += 1
    if block.shape != (span, span):
        raise ValueError(f"block shape {block.shape} does not fit sites starting at {first}")
    left = int(np.prod(dims[:first], dtype=np.int64))
    right = int(np.prod(dims[last:], dtype=np.int64))
    psi = amplitudes.reshape(left, span, right)
    return np.einsum("ij,ajb->aib", block, psi, optimize=True).reshape(-1)


@dataclass(frozen=True)
class LocalOperator:
    matrix: ComplexArray
    site: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))


def apply_local(state: StateVector, op: LocalOperator) -> StateVector:
    """Return ``(I x ... x op x ... x I)|state>``; the result is not renormalized."""
    if not 0 <= op.site < len(state.dims):
        raise IndexError(f"site {op.site} outside chain of {len(state.dims)} sites")
    return StateVector(state.dims, apply_matrix(state.amplitudes, state.dims, op.site, op.matrix))


class OperatorString:
    """Scalar times a product of single-site operators.

    Sites are stored in increasing order, at most one factor per site. Identity
    factors are kept out so strings stay short.
    """

    __slots__ = ("factors", "coeff")

    def __init__(self, factors: Iterable[LocalOperator | tuple[int, ComplexArray]] = (), coeff: complex = 1.0):
        merged: dict[int, ComplexArray] = {}
        for f in factors:
            site, mat = (f.site, f.matrix) if isinstance(f, LocalOperator) else f
            mat = np.asarray(mat, dtype=complex)
            if site in merged:
                raise ValueError(f"duplicate factor on site {site}")
            merged[site] = mat
        self.factors: tuple[tuple[int, ComplexArray], ...] = tuple(
            (s, m) for s, m in sorted(merged.items()) if not _is_identity(m)
        )
        self.coeff = complex(coeff)

    def __repr__(self) -> str:
        return f"OperatorString(sites={[s for s, _ in self.factors]}, coeff={self.coeff:.6g})"

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.factors)

    def scaled(self, c: complex) -> OperatorString:
        out = OperatorString.__new__(OperatorString)
        out.factors = self.factors
        out.coeff = self.coeff * c
        return out

    def dagger(self) -> OperatorString:
        return OperatorString(((s, m.conj().T) for s, m in self.factors), np.conj(self.coeff))

    def __matmul__(self, other: OperatorString) -> OperatorString:
        mats = dict(self.factors)
        for s, m in other.factors:
            mats[s] = mats[s] @ m if s in mats else m
        return OperatorString(mats.items(), self.coeff * other.coeff)

    def apply(self, amplitudes: ComplexArray, dims: Sequence[int]) -> ComplexArray:
        out = amplitudes
        for site, mat in reversed(self.factors):
            out = apply_matrix(out, dims, site, mat)
        return self.coeff * out

    def to_dense(self, dims: Sequence[int]) -> ComplexArray:
        mats = dict(self.factors)
        full = reduce(np.kron, [mats.get(i, np.eye(d)) for i, d in enumerate(dims)])
        return self.coeff * full


def _is_identity(m: ComplexArray) -> bool:
    return m.shape[0] == m.shape[1] and np.array_equal(m, np.eye(m.shape[0]))


class OperatorSum:
    """Linear combination of operator strings."""

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[OperatorString] = ()):
        self.terms: tuple[OperatorString, ...] = tuple(t for t in terms if t.coeff != 0)

    @classmethod
    def identity(cls) -> OperatorSum:
        return cls([OperatorString()])

    @classmethod
    def of(cls, op: OperatorString | OperatorSum) -> OperatorSum:
        return op if isinstance(op, OperatorSum) else cls([op])

    def __repr__(self) -> str:
        return f"OperatorSum({len(self.terms)} terms)"

    def __add__(self, other: OperatorString | OperatorSum) -> OperatorSum:
        return OperatorSum(self.terms + OperatorSum.of(other).terms)

    def __sub__(self, other: OperatorString | OperatorSum) -> OperatorSum:
        return self + OperatorSum.of(other).scaled(-1)

    def scaled(self, c: complex) -> OperatorSum:
        return OperatorSum(t.scaled(c) for t in self.terms)

    def __matmul__(self, other: OperatorString | OperatorSum) -> OperatorSum:
        return OperatorSum(a @ b for a in self.terms for b in OperatorSum.of(other).terms)

    def dagger(self) -> OperatorSum:
        return OperatorSum(t.dagger() for t in self.terms)

    def apply(self, amplitudes: ComplexArray, dims: Sequence[int]) -> ComplexArray:
        out = np.zeros_like(amplitudes)
        for t in self.terms:
            out += t.apply(amplitudes, dims)
        return out

    def to_dense(self, dims: Sequence[int]) -> ComplexArray:
        n = int(np.prod(dims))
        out = np.zeros((n, n), dtype=complex)
        for t in self.terms:
            out += t.to_dense(dims)
        return out


Operator = OperatorString | OperatorSum


def expectation(state, op: Operator) -> complex:
    """``<state| op |state>`` for a normalized dense state or an MPS."""
    if hasattr(state, "expectation"):
        return state.expectation(op)
    if isinstance(op, OperatorString):
        _check_sites(op, state.dims)
        return complex(np.vdot(state.amplitudes, op.apply(state.amplitudes, state.dims)))
    return sum((expectation(state, t) for t in op.terms), 0j)


def _check_sites(op: OperatorString, dims: Sequence[int]) -> None:
    for site, mat in op.factors:
        if not 0 <= site < len(dims) or mat.shape != (dims[site], dims[site]):
            raise ValueError(f"factor on site {site} with shape {mat.shape} incompatible with dims {dims}")


def apply_operator(state: StateVector, op: Operator) -> StateVector:
    return StateVector(state.dims, op.apply(state.amplitudes, state.dims))


def spin_operators(dim: int) -> dict[str, ComplexArray]:
    """Spin matrices ``S^a`` and the pi-rotations ``exp(i pi S^a)`` for spin-1/2 or spin-1.

    Keys are ``"x", "y", "z"`` for the generators and ``"rx", "ry", "rz"`` for
    the rotations.
    """
    if dim == 2:
        s = {a: PAULI[a] / 2 for a in AXES}
        rot = {a: 1j * PAULI[a] for a in AXES}
    elif dim == 3:
        r = 1 / np.sqrt(2)
        s = {
            "x": np.array([[0, r, 0], [r, 0, r], [0, r, 0]], dtype=complex),
            "y": np.array([[0, -1j * r, 0], [1j * r, 0, -1j * r], [0, 1j * r, 0]], dtype=complex),
            "z": np.diag([1.0, 0.0, -1.0]).astype(complex),
        }
        rot = {a: expm_hermitian(s[a], np.pi) for a in AXES}
    else:
        raise ValueError(f"unsupported spin dimension {dim}; expected 2 or 3")
    out = dict(s)
    out.update({"r" + a: rot[a] for a in AXES})
    return out


def expm_hermitian(h: ComplexArray, t: float) -> ComplexArray:
    """``exp(i t h)`` for Hermitian ``h`` via its eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * t * w)) @ v.conj().T


def matrix_function(h: ComplexArray, f) -> ComplexArray:
    """Apply a scalar function to a Hermitian matrix spectrally."""
    w, v = np.linalg.eigh(h)
    return (v * f(w)) @ v.conj().T


def pair_projectors(dims: tuple[int, int]) -> ComplexArray:
    """Projector onto maximal total spin of two equal spins.

    ``(2, 2)`` gives the triplet projector; ``(3, 3)`` the spin-2 projector.
    """
    if dims == (2, 2):
        s = spin_operators(2)
        ss = sum(np.kron(s[a], s[a]) for a in AXES)
        # S1.S2 = 1/4 on the triplet, -3/4 on the singlet.
        return (ss + 0.75 * np.eye(4)).astype(complex)
    if dims == (3, 3):
        s = spin_operators(3)
        ss = sum(np.kron(s[a], s[a]) for a in AXES)
        # S1.S2 = 1 on spin 2, -1 on spin 1, -2 on spin 0.
        return (0.5 * ss + ss @ ss / 6 + np.eye(9) / 3).astype(complex)
    raise ValueError(f"unsupported pair dims {dims}")


TRIPLET_ISOMETRY = np.array(
    [[1, 0, 0], [0, 1 / np.sqrt(2), 0], [0, 1 / np.sqrt(2), 0], [0, 0, 1]], dtype=complex
)
"""Columns are the triplet states ``|00>, (|01>+|10>)/sqrt2, |11>`` labelled by m = +1, 0, -1."""

SINGLET = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def operator_norm(m: ComplexArray) -> float:
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


def commutator(a: ComplexArray, b: ComplexArray) -> ComplexArray:
    return a @ b - b @ a


def anticommutator(a: ComplexArray, b: ComplexArray) -> ComplexArray:
    return a @ b + b @ a
