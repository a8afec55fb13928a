"""Adaptive single-site measurement protocols on the spin-1 chain.

Conventions
-----------
* Bulk outcomes are labelled by the Cartesian states ``|x>, |y>, |z>`` with
  ``S^a|a> = 0``. Their phases are those of the Bell states mapped through the
  triplet isometry: ``|x> = i(|+1> - |-1>)/sqrt2``, ``|y> = (|+1> + |-1>)/sqrt2``,
  ``|z> = |0>``.
* A tilted bulk basis is ``exp(+i S^g theta/2)|a>``.
* Site 0 is measured in the sigma^x basis. ``s0 = 0`` is the outcome that leaves
  the left virtual qubit of site 1 in ``|+>``, i.e. site 0 projected onto ``|->``;
  ``s0 = 1`` is the other one, with byproduct ``sigma^z``.
* Outcome sampling draws one uniform number per measured site from a Philox
  stream and picks the first outcome whose cumulative weight exceeds it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, eval_number, get_int, parse_key_values
from .qcore import AXES, PAULI, StateVector, apply_matrix, expm_hermitian, spin_operators

SQ2 = math.sqrt(2.0)

CARTESIAN = {
    "x": 1j * np.array([1, 0, -1], dtype=complex) / SQ2,
    "y": np.array([1, 0, 1], dtype=complex) / SQ2,
    "z": np.array([0, 1, 0], dtype=complex),
}

# Bell states on a qubit pair with the same phase gauge, plus the singlet.
BELL = {
    "x": 1j * np.array([1, 0, 0, -1], dtype=complex) / SQ2,
    "y": np.array([1, 0, 0, 1], dtype=complex) / SQ2,
    "z": np.array([0, 1, 1, 0], dtype=complex) / SQ2,
    "s": np.array([0, 1, -1, 0], dtype=complex) / SQ2,
}

_PLUS = np.array([1, 1], dtype=complex) / SQ2
_MINUS = np.array([1, -1], dtype=complex) / SQ2
SITE0_BASIS = (_MINUS, _PLUS)  # indexed by s0
NULL_PROB = 1e-14
DEFAULT_PATH_BUDGET = 2 * 3**10


def rotated_spin1_basis(axis: str, theta: float) -> dict[str, np.ndarray]:
    """Tilted Cartesian basis ``{a: exp(i S^axis theta/2)|a>}`` of a spin-1 site."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    rot = expm_hermitian(spin_operators(3)[axis], theta / 2)
    return {a: rot @ CARTESIAN[a] for a in AXES}


def adaptive_angle(phi: float, axis: str, s0: int, prior: Sequence[str]) -> float:
    """Measurement angle after byproduct correction from the outcomes seen so far."""
    sign = -1 if (s0 and axis != "z") else 1
    for s in prior:
        if s != axis:
            sign = -sign
    return sign * phi


@dataclass
class ByproductFrame:
    """Running Pauli-frame parity for each readout axis."""

    s0: int = 0
    outcomes: list[str] = field(default_factory=list)

    def push(self, outcome: str) -> None:
        self.outcomes.append(outcome)

    def sign(self, axis: str) -> int:
        return readout_sign(axis, self.s0, self.outcomes)


def readout_sign(axis: str, s0: int, outcomes: Sequence[str]) -> int:
    sign = -1 if (s0 and axis != "z") else 1
    for s in outcomes:
        if s != axis:
            sign = -sign
    return sign


@dataclass(frozen=True)
class SiteRule:
    axis: str
    phi: float
    adaptive: bool = True

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of x, y, z; got {self.axis!r}")


@dataclass(frozen=True)
class MeasurementPlan:
    """Which bulk sites are tilted, about which axis and by how much.

    Sites not listed, and sites with ``phi == 0``, are measured in the
    untilted Cartesian basis.
    """

    n_bulk: int
    rules: dict[int, SiteRule] = field(default_factory=dict)
    readout: str = "x"
    site0_axis: str = "x"

    def __post_init__(self) -> None:
        if self.site0_axis != "x":
            raise ValueError("site 0 is always measured in the sigma^x basis")
        if self.readout not in AXES:
            raise ValueError(f"readout must be one of x, y, z; got {self.readout!r}")
        for j in self.rules:
            if not 1 <= j <= self.n_bulk:
                raise ValueError(f"rule for site {j} outside bulk 1..{self.n_bulk}")

    @classmethod
    def identity(cls, n_bulk: int, readout: str = "x") -> MeasurementPlan:
        return cls(n_bulk, {}, readout)

    @classmethod
    def single_rotation(cls, n_bulk: int, site: int, axis: str, phi: float, readout: str = "x") -> MeasurementPlan:
        return cls(n_bulk, {site: SiteRule(axis, phi)}, readout)

    def with_readout(self, readout: str) -> MeasurementPlan:
        return MeasurementPlan(self.n_bulk, self.rules, readout, self.site0_axis)

    def basis(self, site: int, s0: int, prior: Sequence[str]) -> dict[str, np.ndarray]:
        rule = self.rules.get(site)
        if rule is None or rule.phi == 0:
            return CARTESIAN
        theta = adaptive_angle(rule.phi, rule.axis, s0, prior) if rule.adaptive else rule.phi
        return rotated_spin1_basis(rule.axis, theta)

    def describe(self) -> dict:
        return {
            "n_bulk": self.n_bulk,
            "readout": self.readout,
            "site0_axis": self.site0_axis,
            "sites": {str(j): {"axis": r.axis, "phi": r.phi, "adaptive": r.adaptive} for j, r in sorted(self.rules.items())},
        }


def load_plan(path: str | Path) -> MeasurementPlan:
    """Plan file: ``n_bulk``, ``readout``, ``site0_axis`` and ``site.<j> = <axis> <phi> [adaptive|fixed]`` lines."""
    cfg = parse_key_values(path)
    return plan_from_config(cfg, str(path))


def plan_from_config(cfg: dict[str, str], source: str = "<plan>") -> MeasurementPlan:
    n = get_int(cfg, "n_bulk")
    rules = {}
    for key, value in cfg.items():
        if not key.startswith("site."):
            continue
        try:
            j = int(key[5:])
            parts = value.split()
            axis, phi = parts[0], eval_number(parts[1])
            mode = parts[2] if len(parts) > 2 else "adaptive"
            if mode not in ("adaptive", "fixed"):
                raise ValueError(f"mode must be adaptive or fixed, got {mode!r}")
            rules[j] = SiteRule(axis, phi, mode == "adaptive")
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"{source}: bad rule {key} = {value!r}: {exc}") from exc
    try:
        return MeasurementPlan(n, rules, cfg.get("readout", "x"), cfg.get("site0_axis", "x"))
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


@dataclass(frozen=True)
class MeasurementPath:
    s0: int
    bulk: tuple[str, ...]
    s_end: int | None
    probability: float
    readout_sign: int


# ---------------------------------------------------------------------------
# Single measurements


def _pick(probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(probs) / probs.sum()
    return min(int(np.searchsorted(cdf, u, side="right")), len(probs) - 1)


def measure_site(state: StateVector, site: int, basis: Sequence[np.ndarray], rng: np.random.Generator):
    """Projective measurement of one site.

    ``basis`` is a list of projectors (``d x d``) or of kets (length ``d``).
    Returns ``(outcome index, collapsed normalized state, probability)``.
    """
    d = state.dims[site]
    projs = [np.outer(b, b.conj()) if np.ndim(b) == 1 else np.asarray(b, dtype=complex) for b in basis]
    if sum(projs).shape != (d, d) or np.linalg.norm(sum(projs) - np.eye(d)) > 1e-10:
        raise ValueError("projectors do not resolve the identity on the measured site")
    branches = [apply_matrix(state.amplitudes, state.dims, site, p) for p in projs]
    probs = np.array([np.vdot(b, b).real for b in branches])
    if probs.max() < NULL_PROB:
        raise ValueError("all outcome probabilities vanish; the state is numerically null")
    k = _pick(probs, rng.random())
    return k, StateVector(state.dims, branches[k] / math.sqrt(probs[k])), float(probs[k] / probs.sum())


def _contract_first(vec: np.ndarray, kets: Sequence[np.ndarray]) -> np.ndarray:
    """Project the leading site on each ket, returning one unnormalized row per ket."""
    d = len(kets[0])
    bras = np.array(kets).conj()
    return bras @ vec.reshape(d, -1)


def _readout_probs(v: np.ndarray, axis: str) -> tuple[float, float]:
    norm2 = np.vdot(v, v).real
    ev = np.vdot(v, PAULI[axis] @ v).real / norm2
    p_plus = min(max((1 + ev) / 2, 0.0), 1.0)
    return p_plus, 1 - p_plus


def run_round(state: StateVector, plan: MeasurementPlan, rng: np.random.Generator) -> tuple[MeasurementPath, int]:
    """One pass of the protocol: measure sites ``0..N`` adaptively, then read out site ``N+1``.

    Returns the path and the byproduct-corrected readout eigenvalue.
    """
    _check_plan(state, plan)
    u = rng.random(plan.n_bulk + 2)
    vec = state.amplitudes
    rows = _contract_first(vec, SITE0_BASIS)
    probs = np.einsum("ij,ij->i", rows.conj(), rows).real
    s0 = _pick(probs, u[0])
    vec, prob = rows[s0], probs[s0]
    frame = ByproductFrame(s0)
    for j in range(1, plan.n_bulk + 1):
        basis = plan.basis(j, s0, frame.outcomes)
        rows = _contract_first(vec, [basis[a] for a in AXES])
        p = np.einsum("ij,ij->i", rows.conj(), rows).real
        k = _pick(p, u[j])
        vec, prob = rows[k], p[k]
        frame.push(AXES[k])
    p_plus, _ = _readout_probs(vec, plan.readout)
    s_end = 0 if u[-1] < p_plus else 1
    raw = 1 - 2 * s_end
    sign = frame.sign(plan.readout)
    final_prob = prob * (p_plus if s_end == 0 else 1 - p_plus)
    path = MeasurementPath(s0, tuple(frame.outcomes), s_end, float(final_prob), sign)
    return path, sign * raw


def sample_rounds(state: StateVector, plan: MeasurementPlan, rounds: int, rng: np.random.Generator) -> np.ndarray:
    """Byproduct-corrected readouts of ``rounds`` independent protocol runs.

    Consumes the generator exactly as ``rounds`` successive :func:`run_round`
    calls would, so both give identical samples for the same seed. Shared
    path prefixes are contracted once.
    """
    _check_plan(state, plan)
    n = plan.n_bulk
    u = rng.random((rounds, n + 2))
    # Each node: (unnormalized vector, s0, outcome labels).
    nodes: list[tuple[np.ndarray, int, tuple[str, ...]]] = [(state.amplitudes, 0, ())]
    where = np.zeros(rounds, dtype=np.int64)
    for level in range(n + 1):
        next_nodes: list[tuple[np.ndarray, int, tuple[str, ...]]] = []
        next_where = np.empty(rounds, dtype=np.int64)
        for node_id in np.unique(where):
            vec, s0, labels = nodes[node_id]
            members = np.nonzero(where == node_id)[0]
            if level == 0:
                kets, tags = SITE0_BASIS, (0, 1)
            else:
                basis = plan.basis(level, s0, labels)
                kets, tags = [basis[a] for a in AXES], AXES
            rows = _contract_first(vec, kets)
            probs = np.einsum("ij,ij->i", rows.conj(), rows).real
            cdf = np.cumsum(probs) / probs.sum()
            choice = np.minimum(np.searchsorted(cdf, u[members, level], side="right"), len(kets) - 1)
            for c in np.unique(choice):
                child = len(next_nodes)
                if level == 0:
                    next_nodes.append((rows[c], int(c), ()))
                else:
                    next_nodes.append((rows[c], s0, labels + (tags[c],)))
                next_where[members[choice == c]] = child
        nodes, where = next_nodes, next_where
    out = np.empty(rounds, dtype=np.int64)
    for node_id in np.unique(where):
        vec, s0, labels = nodes[node_id]
        members = np.nonzero(where == node_id)[0]
        p_plus, _ = _readout_probs(vec, plan.readout)
        raw = np.where(u[members, -1] < p_plus, 1, -1)
        out[members] = readout_sign(plan.readout, s0, labels) * raw
    return out


def _check_plan(state: StateVector, plan: MeasurementPlan) -> None:
    if state.n_bulk != plan.n_bulk:
        raise ValueError(f"plan covers N={plan.n_bulk} but the state has N={state.n_bulk}")
    if any(d != 3 for d in state.dims[1:-1]):
        raise ValueError("measurement protocol needs spin-1 bulk sites")


# ---------------------------------------------------------------------------
# Exact enumeration


@dataclass
class PathSum:
    values: dict[str, float]
    total_probability: float
    paths: int

    def as_tuple(self) -> tuple[float, float, float]:
        return tuple(self.values[a] for a in AXES)


def enumerate_paths(
    state: StateVector, plan: MeasurementPlan, *, budget: int = DEFAULT_PATH_BUDGET, jobs: int = 1, record: bool = False
) -> PathSum | tuple[PathSum, list[MeasurementPath]]:
    """Exact path-weighted readouts ``sum_s P(s) sign_a(s) <sigma^a>_s`` for a = x, y, z.

    The last qubit is evaluated analytically on each leaf vector. Branches are
    explored depth first, so memory stays at one vector per level.
    """
    _check_plan(state, plan)
    n = plan.n_bulk
    count = 2 * 3**n
    if count > budget:
        raise ValueError(f"{count} measurement paths exceed the budget of {budget}")
    recorded: list[MeasurementPath] | None = [] if record else None

    def descend(vec: np.ndarray, s0: int, labels: tuple[str, ...], acc: np.ndarray, rec) -> None:
        level = len(labels) + 1
        if level > n:
            weight = np.vdot(vec, vec).real
            for i, a in enumerate(AXES):
                acc[i] += readout_sign(a, s0, labels) * np.vdot(vec, PAULI[a] @ vec).real
            acc[3] += weight
            if rec is not None:
                rec.append(MeasurementPath(s0, labels, None, float(weight), readout_sign(plan.readout, s0, labels)))
            return
        basis = plan.basis(level, s0, labels)
        rows = _contract_first(vec, [basis[a] for a in AXES])
        for k, a in enumerate(AXES):
            descend(rows[k], s0, labels + (a,), acc, rec)

    rows0 = _contract_first(state.amplitudes, SITE0_BASIS)
    branches = [(rows0[s0], s0) for s0 in (0, 1)]
    if n >= 1:
        split = []
        for vec, s0 in branches:
            basis = plan.basis(1, s0, ())
            r = _contract_first(vec, [basis[a] for a in AXES])
            split.extend((r[k], s0, (a,)) for k, a in enumerate(AXES))
    else:
        split = [(vec, s0, ()) for vec, s0 in branches]

    def run(item):
        acc = np.zeros(4)
        rec = [] if record else None
        descend(item[0], item[1], item[2], acc, rec)
        return acc, rec

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, split))
    else:
        results = [run(item) for item in split]
    total = np.zeros(4)
    for acc, rec in results:
        total += acc
        if recorded is not None:
            recorded.extend(rec)
    out = PathSum({a: float(total[i]) for i, a in enumerate(AXES)}, float(total[3]), count)
    return (out, recorded) if record else out


# ---------------------------------------------------------------------------
# Three-qubit teleportation


@dataclass(frozen=True)
class TeleportOutcome:
    label: str
    post_state: np.ndarray
    probability: float
    predicted: np.ndarray

    @property
    def fidelity(self) -> float:
        return float(abs(np.vdot(self.predicted, self.post_state)) ** 2)


def teleport_predicted(psi: np.ndarray, label: str, axis: str, theta: float) -> np.ndarray:
    """Post-measurement state of qubit c expected for each Bell-type outcome on (a, b)."""
    if label == "s":
        return psi.copy()
    if label == axis:
        return PAULI[axis] @ psi
    return PAULI[label] @ expm_hermitian(PAULI[axis], theta / 2) @ psi


def teleport_step(psi_a: np.ndarray, axis: str, theta: float, bc: np.ndarray | None = None) -> list[TeleportOutcome]:
    """Measure qubits (a, b) in the tilted Bell basis ``exp(-i S_ab^axis theta/2)|label>``.

    Qubit a holds ``psi_a``; (b, c) must hold the singlet. Outcomes are the
    three triplet-type labels and the singlet ``"s"``.
    """
    psi = np.asarray(psi_a, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    pair = BELL["s"] if bc is None else np.asarray(bc, dtype=complex) / np.linalg.norm(bc)
    if abs(np.vdot(BELL["s"], pair)) ** 2 < 1 - 1e-10:
        raise ValueError("qubits b and c are not in the singlet state")
    if axis not in AXES:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    full = np.kron(psi, pair).reshape(4, 2)
    s_ab = (np.kron(PAULI[axis], np.eye(2)) + np.kron(np.eye(2), PAULI[axis])) / 2
    rot = expm_hermitian(s_ab, -theta / 2)
    out = []
    for label in ("x", "y", "z", "s"):
        ket = rot @ BELL[label]
        c = ket.conj() @ full
        p = float(np.vdot(c, c).real)
        post = c / math.sqrt(p) if p > NULL_PROB else c
        out.append(TeleportOutcome(label, post, p, teleport_predicted(psi, label, axis, theta)))
    return out
