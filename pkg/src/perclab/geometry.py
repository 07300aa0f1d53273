"""Deterministic geometry of the product of a d-regular tree and the integer line.

Vertices are addressed relative to a fixed origin and a fixed end of the
tree.  A tree address is canonical: ``up`` steps toward the end, then a
down-word whose first letter avoids the branch leading back to the origin.
All arithmetic here is exact; floating point enters only in the estimator
layer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator


@dataclass(frozen=True)
class TreeAddress:
    """Canonical address of a tree vertex relative to the origin.

    ``up`` counts steps from the origin toward the fixed end; ``down`` is the
    word of child labels taken from the ancestor reached that way.  When
    ``up >= 1`` the first down label lives in {0, ..., d-3} because the child
    returning toward the origin is excluded; every later label (and the first
    one when ``up == 0``) lives in {0, ..., d-2}.
    """

    up: int = 0
    down: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.up < 0:
            raise ValueError("up must be nonnegative")

    @property
    def depth(self) -> int:
        """Tree distance from the origin."""
        return self.up + len(self.down)

    @property
    def level(self) -> int:
        """Level of this vertex relative to the origin (+1 per up-step)."""
        return self.up - len(self.down)


ORIGIN_ADDRESS = TreeAddress()


def is_canonical(addr: TreeAddress, d: int) -> bool:
    if d < 3:
        raise ValueError("degree must be >= 3")
    if addr.up < 0:
        return False
    first_max = d - 3 if addr.up >= 1 else d - 2
    for i, c in enumerate(addr.down):
        hi = first_max if i == 0 else d - 2
        if not 0 <= c <= hi:
            return False
    return True


@dataclass(frozen=True)
class Vertex:
    """A vertex of the product graph: tree address plus line coordinate."""

    tree: TreeAddress = ORIGIN_ADDRESS
    line: int = 0


ORIGIN = Vertex()


@dataclass(frozen=True)
class BallSpec:
    """Finite truncation window: degree, tree radius and line half-width."""

    d: int
    tree_radius: int
    line_halfwidth: int

    def __post_init__(self) -> None:
        if self.d < 3:
            raise ValueError("degree must be >= 3")
        if self.tree_radius < 0 or self.line_halfwidth < 0:
            raise ValueError("radii must be nonnegative")

    @property
    def tree_vertex_count(self) -> int:
        return tree_ball_count(self.d, self.tree_radius)

    @property
    def vertex_count(self) -> int:
        return self.tree_vertex_count * (2 * self.line_halfwidth + 1)

    @property
    def edge_count(self) -> int:
        lines = 2 * self.line_halfwidth + 1
        tree_edges = self.tree_vertex_count - 1
        return tree_edges * lines + self.tree_vertex_count * (lines - 1)


@dataclass(frozen=True, order=True)
class OrbitKey:
    """Automorphism-orbit label of a vertex pair: tree distance and |line offset|."""

    n: int
    m: int


def sphere_count(d: int, n: int) -> int:
    """Number of tree vertices at distance n from the origin."""
    if d < 3:
        raise ValueError("degree must be >= 3")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1
    return d * (d - 1) ** (n - 1)


def tree_ball_count(d: int, radius: int) -> int:
    return sum(sphere_count(d, n) for n in range(radius + 1))


def level_count(d: int, n: int, lvl: int) -> int:
    """Number of tree vertices at distance n from the origin with level lvl."""
    if d < 3:
        raise ValueError("degree must be >= 3")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if abs(lvl) > n or (n - lvl) % 2 != 0:
        raise ValueError(f"level {lvl} unreachable at distance {n}")
    b = d - 1
    u = (n + lvl) // 2
    m = (n - lvl) // 2
    if m == 0:
        return 1
    if u == 0:
        return b**m
    return (b - 1) * b ** (m - 1)


def sphere_addresses(d: int, n: int) -> Iterator[TreeAddress]:
    """All canonical addresses at tree distance n, in deterministic order."""
    if n == 0:
        yield ORIGIN_ADDRESS
        return
    for up in range(n, -1, -1):
        k = n - up
        if k == 0:
            yield TreeAddress(up, ())
            continue
        first = range(d - 2) if up >= 1 else range(d - 1)
        rest = [range(d - 1)] * (k - 1)
        for word in itertools.product(first, *rest):
            yield TreeAddress(up, word)


def tree_ball_addresses(d: int, radius: int) -> list[TreeAddress]:
    out: list[TreeAddress] = []
    for n in range(radius + 1):
        out.extend(sphere_addresses(d, n))
    return out


def parent_address(addr: TreeAddress) -> TreeAddress:
    """The tree neighbor closer to the fixed end."""
    if addr.down:
        return TreeAddress(addr.up, addr.down[:-1])
    return TreeAddress(addr.up + 1, ())


def child_addresses(addr: TreeAddress, d: int) -> list[TreeAddress]:
    """The d-1 tree neighbors farther from the fixed end, canonical form."""
    if addr.down:
        return [TreeAddress(addr.up, addr.down + (c,)) for c in range(d - 1)]
    if addr.up >= 1:
        back = TreeAddress(addr.up - 1, ())
        return [back] + [TreeAddress(addr.up, (c,)) for c in range(d - 2)]
    return [TreeAddress(0, (c,)) for c in range(d - 1)]


def toward_origin(addr: TreeAddress) -> TreeAddress:
    """The unique tree neighbor with smaller distance to the origin."""
    if addr.depth == 0:
        raise ValueError("origin has no inward neighbor")
    if addr.down:
        return TreeAddress(addr.up, addr.down[:-1])
    return TreeAddress(addr.up - 1, ())


def neighbors(v: Vertex, d: int) -> list[Vertex]:
    """All d+2 graph neighbors of v: parent, children, line +-1."""
    tree_nbrs = [parent_address(v.tree)] + child_addresses(v.tree, d)
    out = [Vertex(t, v.line) for t in tree_nbrs]
    out.append(Vertex(v.tree, v.line + 1))
    out.append(Vertex(v.tree, v.line - 1))
    return out


def _lifted_word(addr: TreeAddress, height: int) -> tuple[int, ...]:
    # Down-word from the ancestor at the given height; -1 encodes the
    # ray step back toward the origin, distinct from any child label.
    return (-1,) * (height - addr.up) + addr.down


def tree_distance(x: TreeAddress, y: TreeAddress) -> int:
    """Graph distance between two canonical tree addresses."""
    height = max(x.up, y.up)
    wx = _lifted_word(x, height)
    wy = _lifted_word(y, height)
    common = 0
    for a, c in zip(wx, wy):
        if a != c:
            break
        common += 1
    return len(wx) + len(wy) - 2 * common


def level(x: Vertex, y: Vertex) -> int:
    """Signed level difference along the geodesic from x to y (+1 per step toward the end)."""
    return y.tree.level - x.tree.level


def delta(x: Vertex, y: Vertex, d: int) -> Fraction:
    """Exact tilt (d-1)**level(x, y); satisfies the cocycle and inversion identities."""
    if d < 3:
        raise ValueError("degree must be >= 3")
    return Fraction(d - 1) ** level(x, y)


def enumerate_ball(spec: BallSpec) -> Iterator[Vertex]:
    """Every vertex of the truncated box exactly once, deterministic order."""
    for addr in tree_ball_addresses(spec.d, spec.tree_radius):
        for line in range(-spec.line_halfwidth, spec.line_halfwidth + 1):
            yield Vertex(addr, line)


def orbit_key(x: Vertex, y: Vertex) -> OrbitKey:
    """Orbit label of the pair (x, y); symmetric in its arguments."""
    return OrbitKey(tree_distance(x.tree, y.tree), abs(x.line - y.line))
