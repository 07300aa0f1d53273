"""Array form of a truncated box of the product graph (and of tiny test
graphs): CSR adjacency plus stable 64-bit edge keys for the keyed sampler.

Edge keys depend only on the canonical endpoint vertices, not on the box,
so enlarging the truncation window keeps every shared edge's randomness.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .geometry import (
    BallSpec,
    TreeAddress,
    Vertex,
    toward_origin,
    tree_ball_addresses,
)
from .rng import edge_key, vertex_code


@dataclass
class GraphArrays:
    """CSR adjacency with per-slot edge keys, plus the flat edge list."""

    nv: int
    indptr: np.ndarray  # int64, nv+1
    nbr: np.ndarray  # int32, directed slots
    ekey_dir: np.ndarray  # uint64, key per directed slot
    eu: np.ndarray  # int32, undirected edge endpoints
    ev: np.ndarray  # int32
    ekeys: np.ndarray  # uint64, key per undirected edge
    origin: int


def build_arrays(nv: int, edges: list[tuple[int, int]], keys: list[int], origin: int) -> GraphArrays:
    eu = np.array([e[0] for e in edges], np.int32)
    ev = np.array([e[1] for e in edges], np.int32)
    ekeys = np.array(keys, np.uint64)
    deg = np.zeros(nv, np.int64)
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    indptr = np.zeros(nv + 1, np.int64)
    np.cumsum(deg, out=indptr[1:])
    nbr = np.empty(indptr[-1], np.int32)
    ekey_dir = np.empty(indptr[-1], np.uint64)
    cursor = indptr[:-1].copy()
    for i, (a, b) in enumerate(edges):
        nbr[cursor[a]] = b
        ekey_dir[cursor[a]] = ekeys[i]
        cursor[a] += 1
        nbr[cursor[b]] = a
        ekey_dir[cursor[b]] = ekeys[i]
        cursor[b] += 1
    return GraphArrays(nv, indptr, nbr, ekey_dir, eu, ev, ekeys, origin)


@dataclass
class BoxGraph:
    """A truncated box together with its vertex indexing and orbit targets."""

    spec: BallSpec
    arrays: GraphArrays
    tree_addresses: list[TreeAddress]
    tree_index: dict[TreeAddress, int]
    # representative targets: flat index (n * lines + (m + M)) -> vertex id
    target_ids: np.ndarray

    @property
    def lines(self) -> int:
        return 2 * self.spec.line_halfwidth + 1

    def vertex_id(self, v: Vertex) -> int:
        ti = self.tree_index[v.tree]
        if abs(v.line) > self.spec.line_halfwidth:
            raise KeyError(f"line coordinate {v.line} outside box")
        return ti * self.lines + (v.line + self.spec.line_halfwidth)

    def vertex_at(self, vid: int) -> Vertex:
        ti, off = divmod(vid, self.lines)
        return Vertex(self.tree_addresses[ti], off - self.spec.line_halfwidth)


@functools.lru_cache(maxsize=8)
def box_graph(spec: BallSpec) -> BoxGraph:
    """Build (and cache) the array form of a truncation window."""
    addrs = tree_ball_addresses(spec.d, spec.tree_radius)
    tree_index = {a: i for i, a in enumerate(addrs)}
    m = spec.line_halfwidth
    lines = 2 * m + 1
    nv = len(addrs) * lines

    codes = np.empty(nv, np.uint64)
    for ti, addr in enumerate(addrs):
        for line in range(-m, m + 1):
            codes[ti * lines + line + m] = vertex_code(Vertex(addr, line))

    edges: list[tuple[int, int]] = []
    keys: list[int] = []
    for ti, addr in enumerate(addrs):
        if addr.depth >= 1:
            tj = tree_index[toward_origin(addr)]
            for line in range(lines):
                a, b = ti * lines + line, tj * lines + line
                edges.append((a, b))
                keys.append(edge_key(int(codes[a]), int(codes[b])))
        for line in range(lines - 1):
            a, b = ti * lines + line, ti * lines + line + 1
            edges.append((a, b))
            keys.append(edge_key(int(codes[a]), int(codes[b])))

    assert len(edges) == spec.edge_count
    origin = tree_index[TreeAddress()] * lines + m
    arrays = build_arrays(nv, edges, keys, origin)

    target_ids = np.empty((spec.tree_radius + 1) * lines, np.int64)
    for n in range(spec.tree_radius + 1):
        ti = tree_index[TreeAddress(0, (0,) * n)]
        for line in range(-m, m + 1):
            target_ids[n * lines + line + m] = ti * lines + line + m
    return BoxGraph(spec, arrays, addrs, tree_index, target_ids)
