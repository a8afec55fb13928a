"""Elementary abelian 2-groups ``(Z_2)^m`` as bit vectors."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True, order=True)
class GroupElement:
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"group element bits must be 0/1, got {self.bits}")

    def __mul__(self, other: GroupElement) -> GroupElement:
        if len(other.bits) != len(self.bits):
            raise ValueError("elements of different groups")
        return GroupElement(tuple(a ^ b for a, b in zip(self.bits, other.bits)))

    @property
    def is_identity(self) -> bool:
        return not any(self.bits)

    @property
    def label(self) -> str:
        return "".join(map(str, self.bits))

    @classmethod
    def parse(cls, text: str) -> GroupElement:
        text = text.strip()
        if not text or any(c not in "01" for c in text):
            raise ValueError(f"group element must be a bit string, got {text!r}")
        return cls(tuple(int(c) for c in text))

    def __repr__(self) -> str:
        return f"g{self.label}"


def identity(m: int) -> GroupElement:
    return GroupElement((0,) * m)


def elements(m: int) -> list[GroupElement]:
    """All ``2^m`` elements in lexicographic bit order; the identity comes first."""
    return [GroupElement(bits) for bits in itertools.product((0, 1), repeat=m)]


def span(gens: Iterable[GroupElement], m: int) -> frozenset[GroupElement]:
    out = {identity(m)}
    for g in gens:
        out |= {h * g for h in out}
    return frozenset(out)


def subgroups(m: int) -> list[frozenset[GroupElement]]:
    """Every subgroup, each listed once."""
    found: set[frozenset[GroupElement]] = set()
    elems = elements(m)
    for r in range(m + 1):
        for gens in itertools.combinations(elems[1:], r):
            found.add(span(gens, m))
    return sorted(found, key=lambda s: (len(s), sorted(s)))
