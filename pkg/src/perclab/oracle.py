"""Exhaustive ground truth on tiny graphs: exact connection probabilities
and triangle diagrams by enumerating every edge configuration.

Exists to validate the Monte-Carlo engine end to end; the edge cap keeps
enumeration instantaneous.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np

from .boxgraph import GraphArrays, build_arrays, box_graph
from .geometry import BallSpec
from .rng import mix64

# 2**18 = 262144 configurations; still instantaneous.  (The 12-vertex
# R=1, M=1 box of the d=3 product graph has 17 edges and must fit.)
MAX_EDGES = 18


class OracleSizeError(ValueError):
    """Graph too large for exhaustive configuration enumeration."""


@dataclass(frozen=True)
class TinyGraph:
    """A small test graph: vertex count, duplicate-free edge list, origin."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    origin: int = 0
    name: str = ""

    def __post_init__(self) -> None:
        if not 0 <= self.origin < self.n_vertices:
            raise ValueError("origin out of range")
        seen = set()
        for a, b in self.edges:
            if a == b or not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices):
                raise ValueError(f"bad edge ({a}, {b})")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate edge ({a}, {b})")
            seen.add(key)

    def check_size(self) -> None:
        if len(self.edges) > MAX_EDGES:
            raise OracleSizeError(
                f"{len(self.edges)} edges exceeds oracle cap {MAX_EDGES}"
            )


def _component_labels(g: TinyGraph, mask: int) -> list[int]:
    parent = list(range(g.n_vertices))

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i, (a, b) in enumerate(g.edges):
        if mask >> i & 1:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    return [find(v) for v in range(g.n_vertices)]


def exact_connectivity_matrix(g: TinyGraph, p: float) -> np.ndarray:
    """tau(x, y) for all vertex pairs, exact up to float rounding."""
    g.check_size()
    e = len(g.edges)
    out = np.zeros((g.n_vertices, g.n_vertices))
    for mask in range(1 << e):
        weight = p ** bin(mask).count("1") * (1.0 - p) ** (e - bin(mask).count("1"))
        labels = np.array(_component_labels(g, mask))
        out += weight * (labels[:, None] == labels[None, :])
    return out


def exact_two_point(g: TinyGraph, p: float, target: int) -> float:
    """Probability that the origin and the target share a cluster."""
    g.check_size()
    e = len(g.edges)
    total = 0.0
    for mask in range(1 << e):
        labels = _component_labels(g, mask)
        if labels[g.origin] == labels[target]:
            k = bin(mask).count("1")
            total += p**k * (1.0 - p) ** (e - k)
    return total


def exact_two_point_all(g: TinyGraph, p: float) -> np.ndarray:
    return exact_connectivity_matrix(g, p)[g.origin]


def exact_triangle(g: TinyGraph, p: float) -> float:
    """Triangle diagram sum_{x,y} tau(o,x) tau(x,y) tau(y,o), exact."""
    tau = exact_connectivity_matrix(g, p)
    to = tau[g.origin]
    return float(to @ tau @ to)


def embed_ball(spec: BallSpec) -> TinyGraph:
    """The truncated box as a TinyGraph (same edges, same origin)."""
    box = box_graph(spec)
    g = box.arrays
    if g.eu.size > MAX_EDGES:
        raise OracleSizeError(
            f"box has {g.eu.size} edges, exceeds oracle cap {MAX_EDGES}"
        )
    edges = tuple((int(a), int(b)) for a, b in zip(g.eu, g.ev))
    name = f"ball_d{spec.d}_R{spec.tree_radius}_M{spec.line_halfwidth}"
    return TinyGraph(g.nv, edges, g.origin, name)


def tiny_graph_arrays(g: TinyGraph) -> GraphArrays:
    """Array form with index-derived edge keys, for running the MC engine."""
    keys = [
        mix64((mix64(a + 0x517CC1B727220A95) ^ mix64(b + 0x2545F4914F6CDD1D)))
        for a, b in (sorted(e) for e in g.edges)
    ]
    return build_arrays(g.n_vertices, list(g.edges), keys, g.origin)


def parse_tiny(text: str, name: str = "") -> TinyGraph:
    """Plain-text format: first line "V E origin", then one "u v" per line."""
    lines = [ln for ln in (s.strip() for s in text.splitlines()) if ln and not ln.startswith("#")]
    nv, ne, origin = (int(x) for x in lines[0].split())
    edges = tuple(tuple(int(x) for x in ln.split()) for ln in lines[1 : ne + 1])
    if len(edges) != ne:
        raise ValueError("edge count mismatch")
    return TinyGraph(nv, edges, origin, name)


def format_tiny(g: TinyGraph) -> str:
    lines = [f"{g.n_vertices} {len(g.edges)} {g.origin}"]
    lines.extend(f"{a} {b}" for a, b in g.edges)
    return "\n".join(lines) + "\n"


def corpus() -> list[TinyGraph]:
    """The shipped test corpus of tiny graphs."""
    out = []
    root = importlib.resources.files("perclab") / "corpus"
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".txt"):
            out.append(parse_tiny(entry.read_text(), entry.name[:-4]))
    return out
