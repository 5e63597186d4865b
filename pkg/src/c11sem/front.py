"""Viewfronts: immutable partial maps from location names to timestamps.

The empty front is the bottom element of the lattice; ``join`` is the
pointwise maximum over the union of the domains.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping


class Front:
    """An immutable partial map ``location -> timestamp``."""

    __slots__ = ("_map", "_hash")

    def __init__(self, mapping: Mapping[str, int] | Iterable[tuple[str, int]] | None = None):
        self._map: dict[str, int] = dict(mapping) if mapping else {}
        self._hash: int | None = None

    # -- mapping protocol -------------------------------------------------
    def get(self, loc: str) -> int | None:
        return self._map.get(loc)

    def __contains__(self, loc: object) -> bool:
        return loc in self._map

    def __len__(self) -> int:
        return len(self._map)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._map))

    def items(self) -> tuple[tuple[str, int], ...]:
        """Entries sorted by location name."""
        return tuple(sorted(self._map.items()))

    def as_dict(self) -> dict[str, int]:
        return dict(self._map)

    # -- lattice ---------------------------------------------------------
    def join(self, other: Front) -> Front:
        if not other._map:
            return self
        if not self._map:
            return other
        merged = dict(self._map)
        changed = False
        for loc, tau in other._map.items():
            cur = merged.get(loc)
            if cur is None or tau > cur:
                merged[loc] = tau
                changed = True
        return Front(merged) if changed else self

    def set(self, loc: str, tau: int) -> Front:
        """Return a copy with ``loc`` mapped to ``tau`` (overwriting)."""
        if self._map.get(loc) == tau:
            return self
        merged = dict(self._map)
        merged[loc] = tau
        return Front(merged)

    def leq(self, other: Front) -> bool:
        """Pointwise order: every entry of self is bounded by other."""
        for loc, tau in self._map.items():
            o = other._map.get(loc)
            if o is None or tau > o:
                return False
        return True

    # -- value semantics ---------------------------------------------------
    def __eq__(self, other: object) -> bool:
        return isinstance(other, Front) and self._map == other._map

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._map.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"Front({dict(self.items())!r})"

    def __str__(self) -> str:
        if not self._map:
            return "{}"
        return "{" + ", ".join(f"{loc}:{tau}" for loc, tau in self.items()) + "}"


BOTTOM = Front()


def join_fronts(a: Front, b: Front) -> Front:
    """Least upper bound of two fronts."""
    return a.join(b)
