"""String order parameters and the closed-form single-rotation readout."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .qcore import AXES, PAULI, OperatorString, PHYS_TOL, expectation, matrix_function, spin_operators

UNDEFINED_RATIO = 1e-10
CSV_COLUMNS = ("theta", "D_x", "D_z", "N", "i", "j", "axis", "kind", "value")


@dataclass(frozen=True)
class StringOrderResult:
    kind: str  # "bulk-bulk", "bulk-end" or "nu"
    axis: str
    i: int
    j: int
    value: float


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > PHYS_TOL:
        raise ArithmeticError(f"{what} has imaginary part {value.imag:.3e}")
    return value.real


def _n_bulk(state) -> int:
    return len(state.dims) - 2


def _check_axis(axis: str) -> None:
    if axis not in AXES:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")


def bulk_bulk_operator(n_bulk: int, i: int, j: int, axis: str) -> OperatorString:
    if not 1 <= i < j <= n_bulk:
        raise ValueError(f"need 1 <= i < j <= N={n_bulk}, got i={i}, j={j}")
    s = spin_operators(3)
    return OperatorString([(i, s[axis])] + [(m, s["r" + axis]) for m in range(i + 1, j)] + [(j, s[axis])])


def bulk_end_operator(n_bulk: int, i: int, axis: str, *, include_first_rotation: bool = False) -> OperatorString:
    """``S_i^a (prod_{m>i} exp(i pi S_m^a)) sigma^a_{N+1}``; optionally with the rotation on site i too."""
    if not 1 <= i <= n_bulk:
        raise ValueError(f"need 1 <= i <= N={n_bulk}, got i={i}")
    s = spin_operators(3)
    first = s[axis] @ s["r" + axis] if include_first_rotation else s[axis]
    return OperatorString(
        [(i, first)] + [(m, s["r" + axis]) for m in range(i + 1, n_bulk + 1)] + [(n_bulk + 1, PAULI[axis])]
    )


def string_order_bulk(state, i: int, j: int, axis: str) -> float:
    _check_axis(axis)
    return _real(expectation(state, bulk_bulk_operator(_n_bulk(state), i, j, axis)), "string order")


def string_order_bulk_end(state, i: int, axis: str) -> float:
    _check_axis(axis)
    return _real(expectation(state, bulk_end_operator(_n_bulk(state), i, axis)), "bulk-to-end string order")


def nu(state, k: int, axis: str = "z") -> float:
    """Angle renormalization factor: the bulk-to-end string with the rotation starting at site k.

    For spin 1, ``S^a exp(i pi S^a) = -S^a``, so this is minus the bulk-to-end
    string order at ``i = k``.
    """
    _check_axis(axis)
    op = bulk_end_operator(_n_bulk(state), k, axis, include_first_rotation=True)
    return _real(expectation(state, op), "nu")


def nu_z(state, k: int) -> float:
    return nu(state, k, "z")


def proposition1_rhs(state, k: int, phi: float) -> tuple[float, float, float]:
    """Closed-form path-averaged readouts for a single z-tilt by ``phi`` at site ``k``."""
    n = _n_bulk(state)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= N={n}, got k={k}")
    sz = spin_operators(3)["z"]
    cos_op = OperatorString([(k, matrix_function(sz, lambda w: np.cos(w * phi)))])
    sin_site = matrix_function(sz, lambda w: np.sin(w * phi)) @ spin_operators(3)["rz"]
    rz = spin_operators(3)["rz"]
    sin_op = OperatorString([(k, sin_site)] + [(j, rz) for j in range(k + 1, n + 1)] + [(n + 1, PAULI["z"])])
    x = _real(expectation(state, cos_op), "cos term")
    y = _real(expectation(state, sin_op), "sin term")
    return x, y, 0.0


@dataclass(frozen=True)
class SmallAngleRow:
    phi: float
    ratio: float | None  # y/phi, None when nu is numerically zero
    nu: float
    error: float | None


def small_angle_report(state, k: int, phis: Sequence[float]) -> list[SmallAngleRow]:
    """Effective rotation angle per unit tilt against the renormalization factor."""
    if any(p == 0 for p in phis):
        raise ValueError("phi = 0 is excluded: the ratio y/phi is undefined")
    v = nu_z(state, k)
    rows = []
    for phi in phis:
        if abs(v) < UNDEFINED_RATIO:
            rows.append(SmallAngleRow(phi, None, v, None))
            continue
        ratio = proposition1_rhs(state, k, phi)[1] / phi
        rows.append(SmallAngleRow(phi, ratio, v, abs(ratio - v)))
    return rows


def anticommutation_residual(n_bulk: int, axis_string: str = "z", axis_sym: str = "x") -> float:
    """Norm of ``{U_sym, (prod_{j} exp(i pi S_j^a)) sigma^a_{N+1}}`` on the full chain (small N only)."""
    from .states import symmetry_operator

    s = spin_operators(3)
    string = OperatorString([(j, s["r" + axis_string]) for j in range(1, n_bulk + 1)] + [(n_bulk + 1, PAULI[axis_string])])
    u = symmetry_operator(n_bulk, axis_sym)
    dims = (2,) + (3,) * n_bulk + (2,)
    a, b = u.to_dense(dims), string.to_dense(dims)
    return float(np.linalg.norm(a @ b + b @ a, 2))


def string_order_rows(state, meta: dict, *, i: int, j: int, axes: Iterable[str] = AXES) -> list[dict]:
    """CSV rows (one per axis and kind) for a sweep point."""
    rows = []
    for a in axes:
        common = dict(meta, axis=a)
        rows.append(dict(common, i=i, j=j, kind="bulk-bulk", value=string_order_bulk(state, i, j, a)))
        rows.append(dict(common, i=i, j=_n_bulk(state) + 1, kind="bulk-end", value=string_order_bulk_end(state, i, a)))
        rows.append(dict(common, i=i, j=_n_bulk(state) + 1, kind="nu", value=nu(state, i, a)))
    return rows


def write_csv(rows: Iterable[dict], fh: io.TextIOBase | None = None) -> str:
    buf = fh if fh is not None else io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue() if fh is None else ""


def is_finite_row(row: dict) -> bool:
    return isinstance(row.get("value"), float) and math.isfinite(row["value"])
