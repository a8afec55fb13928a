"""Logical channels of tilted blocks and their approach to unitarity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .bundle import RepresentationBundle
from .group import GroupElement
from .logical import Gate, GateData, LogicalSubspace, lk_rk_beta, nu_string
from ..qcore import expectation

SIGMA_SLACK = 1e-10


@dataclass(frozen=True)
class LogicalChannel:
    """Mixture of the logical rotations ``exp(-+i beta T(g)/2)`` with weights ``(1 +- sigma)/2``."""

    v: np.ndarray
    weight_plus: float

    @classmethod
    def from_gate(cls, space: LogicalSubspace, g: GroupElement, data: GateData) -> LogicalChannel:
        t = space.tbar_matrix(g)
        eye = np.eye(space.dim)
        v = math.cos(data.beta / 2) * eye - 1j * math.sin(data.beta / 2) * t
        if data.sigma is None:
            return cls(v, 1.0)
        if abs(data.sigma) > 1 + SIGMA_SLACK:
            raise ArithmeticError(f"|sigma| = {abs(data.sigma):.3e} exceeds 1: bundle and state are inconsistent")
        return cls(v, (1 + min(1.0, max(-1.0, data.sigma))) / 2)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        v = self.v
        w = self.weight_plus
        return w * v @ rho @ v.conj().T + (1 - w) * v.conj().T @ rho @ v

    def heisenberg(self, a: np.ndarray) -> np.ndarray:
        v = self.v
        w = self.weight_plus
        return w * v.conj().T @ a @ v + (1 - w) * v @ a @ v.conj().T


def cptp_apply(
    bundle: RepresentationBundle, space: LogicalSubspace, rho: np.ndarray, k: int, g_k: GroupElement, alpha: float
) -> np.ndarray:
    """Apply the logical channel of a tilt ``(k, g_k, alpha)`` to a density matrix on the logical space."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (space.dim, space.dim):
        raise ValueError(f"density matrix must be {space.dim}x{space.dim}")
    if alpha == 0:
        return rho.copy()
    data = lk_rk_beta(bundle, space.state, k, g_k, alpha)
    return LogicalChannel.from_gate(space, g_k, data).apply(rho)


def channel_sequence(bundle: RepresentationBundle, space: LogicalSubspace, gates: Sequence[Gate]) -> list[LogicalChannel]:
    out = []
    for gate in sorted(gates, key=lambda g: g.site):
        if gate.alpha == 0:
            continue
        data = lk_rk_beta(bundle, space.state, gate.site, gate.g, gate.alpha)
        out.append(LogicalChannel.from_gate(space, gate.g, data))
    return out


def heisenberg_sequence(channels: Sequence[LogicalChannel], a: np.ndarray) -> np.ndarray:
    """Adjoint of ``V_t ... V_1``: apply the last channel's adjoint first."""
    for ch in reversed(channels):
        a = ch.heisenberg(a)
    return a


def schrodinger_sequence(channels: Sequence[LogicalChannel], rho: np.ndarray) -> np.ndarray:
    for ch in channels:
        rho = ch.apply(rho)
    return rho


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((a - b + (a - b).conj().T) / 2))))


@dataclass
class UnitarityPoint:
    n: int
    sites: list[int]
    deviation: float
    nu: float


def spaced_sites(n: int, d_min: int, first: int = 2) -> list[int]:
    return [first + i * d_min for i in range(n)]


def unitarity_scaling(
    bundle: RepresentationBundle,
    state,
    space: LogicalSubspace,
    g: GroupElement,
    alpha: float,
    n: int,
    sites: Sequence[int],
    d_min: int,
) -> UnitarityPoint:
    """Trace distance between ``n`` channels of angle ``alpha/n`` and the rotation by ``nu alpha``.

    The input is ``|Psi><Psi|`` (the first logical basis vector) and the target is
    ``exp(-i nu alpha T(g)/2)`` with ``nu`` the mean bulk-to-end string order of
    the tilted sites.
    """
    sites = sorted(sites)
    if len(sites) != n:
        raise ValueError(f"expected {n} sites, got {len(sites)}")
    if any(b - a < d_min for a, b in zip(sites, sites[1:])):
        raise ValueError(f"tilted sites closer than d_min={d_min}")
    rho0 = np.zeros((space.dim, space.dim), dtype=complex)
    rho0[0, 0] = 1.0
    nu = float(np.mean([expectation(state, nu_string(bundle, k, g)).real for k in sites]))
    if alpha == 0:
        return UnitarityPoint(n, list(sites), 0.0, nu)
    gates = [Gate(k, g, alpha / n) for k in sites]
    rho = schrodinger_sequence(channel_sequence(bundle, space, gates), rho0)
    target = expm(-0.5j * nu * alpha * space.tbar_matrix(g))
    ideal = target @ rho0 @ target.conj().T
    return UnitarityPoint(n, list(sites), trace_distance(rho, ideal), nu)


def loglog_slope(ns: Sequence[int], values: Sequence[float]) -> float:
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
