"""Representation bundles: the per-block operator assignments of a ``(Z_2)^m`` symmetric chain."""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..config import ConfigError
from ..qcore import OP_TOL, PAULI, OperatorString, spin_operators
from .group import GroupElement, elements, identity, subgroups

Matrix = np.ndarray
OpMap = Mapping[GroupElement, Matrix]

# Spin-1 element names: bit 0 is the x-rotation generator, bit 1 the z-rotation generator.
SPIN1_NAMES = {"e": (0, 0), "z": (0, 1), "x": (1, 0), "y": (1, 1)}


def spin1_element(name: str) -> GroupElement:
    return GroupElement(SPIN1_NAMES[name])


def spin1_name(g: GroupElement) -> str:
    return {v: k for k, v in SPIN1_NAMES.items()}[g.bits]


class BundleError(ValueError):
    pass


@dataclass
class RepresentationBundle:
    """Operators ``u_0, u_i, S_i, v_R0, v_L`` for every group element.

    ``v_L`` is rescaled on construction so that ``v_L(g)^2 = I``; ``v_R0`` gets
    the same treatment. Bulk operators are shared by all bulk blocks.
    ``declared_h`` records a user-stated subgroup ``H``; the one used in
    computations is always derived from the matrices (:attr:`h_group`).
    """

    m: int
    n_bulk: int
    u0: dict[GroupElement, Matrix]
    u: dict[GroupElement, Matrix]
    s: dict[GroupElement, Matrix]
    v_r0: dict[GroupElement, Matrix]
    v_l: dict[GroupElement, Matrix]
    g_sites: dict[int, tuple[GroupElement, ...]] | None = None
    declared_h: tuple[GroupElement, ...] | None = None
    name: str = "custom"
    _kappa: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        self.elements = elements(self.m)
        for label, table in (("u0", self.u0), ("u", self.u), ("S", self.s), ("vR", self.v_r0), ("vL", self.v_l)):
            missing = [g for g in self.elements if g not in table]
            if missing:
                raise BundleError(f"{label} is missing elements {missing}")
            for g in self.elements:
                table[g] = np.asarray(table[g], dtype=complex)
        self.v_l = {g: _square_to_identity(m) for g, m in self.v_l.items()}
        self.v_r0 = {g: _square_to_identity(m) for g, m in self.v_r0.items()}
        self.bulk_dim = self.u[self.elements[0]].shape[0]
        if self.n_bulk < 1:
            raise BundleError(f"need at least one bulk block, got N={self.n_bulk}")
        if self.g_sites is None:
            self.g_sites = {k: tuple(self.elements) for k in range(1, self.n_bulk + 1)}

    # -- structure -------------------------------------------------------

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.u0[self.elements[0]].shape[0],) + (self.bulk_dim,) * self.n_bulk + (self.v_l[self.elements[0]].shape[0],)

    @property
    def e(self) -> GroupElement:
        return identity(self.m)

    def u_site(self, i: int, g: GroupElement) -> Matrix:
        return self.u0[g] if i == 0 else self.u[g]

    def kappa(self, g: GroupElement, h: GroupElement) -> int:
        """0 when ``v_L(g), v_L(h)`` commute, 1 when they anticommute."""
        key = (g, h)
        if key not in self._kappa:
            self._kappa[key] = _commutation_bit(self.v_l[g], self.v_l[h])
        return self._kappa[key]

    def kappa_r0(self, g: GroupElement, h: GroupElement) -> int:
        return _commutation_bit(self.v_r0[g], self.v_r0[h])

    def phase(self, g: GroupElement, h: GroupElement) -> complex:
        """``c`` with ``v_L(g) v_L(h) = c v_L(gh)``."""
        prod = self.v_l[g] @ self.v_l[h]
        target = self.v_l[g * h]
        c = np.trace(target.conj().T @ prod) / target.shape[0]
        if np.linalg.norm(prod - c * target) > 1e-10:
            raise BundleError(f"v_L is not projective: v({g})v({h}) is not proportional to v({g * h})")
        return complex(c)

    @property
    def h_group(self) -> tuple[GroupElement, ...]:
        """Maximal subgroup with commuting ``v_R0`` on which ``u_0 = v_R0``."""
        if not hasattr(self, "_h_cache"):
            best: tuple[GroupElement, ...] = (self.e,)
            for sub in subgroups(self.m):
                if all(self.kappa_r0(a, b) == 0 for a in sub for b in sub) and all(
                    np.linalg.norm(self.u0[h] - self.v_r0[h]) < OP_TOL * 10 for h in sub
                ):
                    if len(sub) > len(best):
                        best = tuple(sorted(sub))
            self._h_cache = best
        return self._h_cache

    def commuting_subgroups(self) -> list[tuple[GroupElement, ...]]:
        """Maximal subgroups on which ``v_R0`` commutes."""
        comm = [s for s in subgroups(self.m) if all(self.kappa_r0(a, b) == 0 for a in s for b in s)]
        return [tuple(sorted(s)) for s in comm if not any(s < t for t in comm)]

    # -- chain operators -------------------------------------------------

    def symmetry(self, g: GroupElement) -> OperatorString:
        """``v_R0(g) (x) u_1(g) ... u_N(g) (x) v_L(g)``."""
        n = self.n_bulk
        return OperatorString([(0, self.v_r0[g])] + [(i, self.u[g]) for i in range(1, n + 1)] + [(n + 1, self.v_l[g])])

    def describe(self) -> dict:
        return {
            "name": self.name,
            "m": self.m,
            "n_bulk": self.n_bulk,
            "group_order": [g.label for g in self.elements],
            "h_group": [g.label for g in self.h_group],
        }


def _square_to_identity(mat: Matrix) -> Matrix:
    sq = mat @ mat
    lam = np.trace(sq) / mat.shape[0]
    if abs(lam) < 1e-14 or np.linalg.norm(sq - lam * np.eye(mat.shape[0])) > 1e-10:
        raise BundleError("boundary operator does not square to a multiple of the identity")
    return mat / cmath.sqrt(lam)


def _commutation_bit(a: Matrix, b: Matrix) -> int:
    if np.linalg.norm(a @ b - b @ a) < 1e-12:
        return 0
    if np.linalg.norm(a @ b + b @ a) < 1e-12:
        return 1
    raise BundleError("boundary operators neither commute nor anticommute")


def spin1_bundle(n_bulk: int) -> RepresentationBundle:
    """Spin-1 chain with ``Z_2 x Z_2`` pi-rotations and Pauli boundary qubits."""
    if n_bulk < 1:
        raise ValueError(f"need at least one bulk site, got N={n_bulk}")
    s1 = spin_operators(3)
    g = {name: spin1_element(name) for name in SPIN1_NAMES}
    eye2 = np.eye(2, dtype=complex)
    u = {g["e"]: np.eye(3, dtype=complex)}
    s = {g["e"]: np.zeros((3, 3), dtype=complex)}
    v = {g["e"]: eye2}
    for a in ("x", "y", "z"):
        u[g[a]] = s1["r" + a]
        s[g[a]] = s1[a]
        v[g[a]] = PAULI[a]
    u0 = {g["e"]: eye2, g["z"]: eye2, g["x"]: PAULI["x"], g["y"]: PAULI["x"]}
    return RepresentationBundle(
        m=2,
        n_bulk=n_bulk,
        u0=u0,
        u=u,
        s=s,
        v_r0=dict(v),
        v_l=dict(v),
        declared_h=(g["e"], g["z"]),
        name="spin1",
    )


# ---------------------------------------------------------------------------
# Bundle description files


def _parse_matrix(text: str, where: str) -> Matrix:
    rows = [r.split() for r in text.strip().strip("[]").split(";") if r.strip()]
    try:
        mat = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{where}: matrix entries must be numbers ({exc})") from exc
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"{where}: matrix must be square with rows separated by ';'")
    return mat


def load_bundle(path: str | Path, n_bulk: int | None = None) -> RepresentationBundle:
    """Read a bundle description.

    Format (``#`` comments)::

        builtin = spin1          # or give every matrix explicitly:
        m = 2
        n_bulk = 4
        u0.10.re = 0 1; 1 0      # .im lines are optional
        u.10.re = ...
        S.10.re = ...
        vR.10.re = ...
        vL.10.re = ...
        H = 00 10                # optional declared subgroup
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    entries: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = (lineno, value)

    def get(key: str) -> tuple[int, str]:
        if key not in entries:
            raise ConfigError(f"{path}: missing key {key!r}")
        return entries[key]

    n = n_bulk
    if "n_bulk" in entries:
        lineno, value = entries["n_bulk"]
        try:
            n = int(value) if n is None else n
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: n_bulk must be an integer") from exc
    if n is None:
        raise ConfigError(f"{path}: n_bulk not given")
    if "builtin" in entries:
        lineno, value = entries["builtin"]
        if value != "spin1":
            raise ConfigError(f"{path}:{lineno}: unknown builtin bundle {value!r}")
        return spin1_bundle(n)
    lineno, value = get("m")
    try:
        m = int(value)
    except ValueError as exc:
        raise ConfigError(f"{path}:{lineno}: m must be an integer") from exc
    if not 1 <= m <= 4:
        raise ConfigError(f"{path}:{lineno}: m must be between 1 and 4")
    tables: dict[str, dict[GroupElement, Matrix]] = {}
    for prefix in ("u0", "u", "S", "vR", "vL"):
        table = {}
        for g in elements(m):
            lineno, re_text = get(f"{prefix}.{g.label}.re")
            mat = _parse_matrix(re_text, f"{path}:{lineno}").astype(complex)
            im_key = f"{prefix}.{g.label}.im"
            if im_key in entries:
                im_line, im_text = entries[im_key]
                im = _parse_matrix(im_text, f"{path}:{im_line}")
                if im.shape != mat.shape:
                    raise ConfigError(f"{path}:{im_line}: imaginary part shape {im.shape} differs from real part")
                mat = mat + 1j * im
            table[g] = mat
        tables[prefix] = table
    declared = None
    if "H" in entries:
        lineno, value = entries["H"]
        try:
            declared = tuple(GroupElement.parse(t) for t in value.split())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    try:
        return RepresentationBundle(
            m, n, tables["u0"], tables["u"], tables["S"], tables["vR"], tables["vL"], declared_h=declared, name=path.stem
        )
    except (BundleError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
