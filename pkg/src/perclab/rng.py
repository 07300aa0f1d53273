"""Counter-based keyed random bits for reproducible lazy edge sampling.

Every edge state is a pure function of (base seed, configuration index,
edge key): no generator state is stored, so huge boxes never materialize
edge arrays and parallel workers cannot race.  The same uniform deviate
drives the edge at every p, which yields the monotone grand coupling.

The Python functions here are the reference; the numba kernels reimplement
the identical bit-level arithmetic (asserted equal in the test suite).
"""

from __future__ import annotations

from .geometry import Vertex

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x00000100000001B3
_LINE_BIAS = 1 << 31


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a full-avalanche 64-bit permutation."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _fold(h: int, value: int) -> int:
    return ((h ^ (value & MASK64)) * _FNV_PRIME) & MASK64


def vertex_code(v: Vertex) -> int:
    """Deterministic 64-bit code of a canonical vertex, stable across runs."""
    h = _FNV_OFFSET
    h = _fold(h, v.tree.up)
    h = _fold(h, len(v.tree.down))
    for c in v.tree.down:
        h = _fold(h, c)
    h = _fold(h, v.line + _LINE_BIAS)
    return mix64(h)


def edge_key(code_a: int, code_b: int) -> int:
    """Key of an unordered pair of vertex codes."""
    a, b = (code_a, code_b) if code_a <= code_b else (code_b, code_a)
    return mix64(((a * GOLDEN) & MASK64) ^ mix64(b))


def config_key(base_seed: int, config_index: int) -> int:
    """Per-configuration key mixed once, then combined with each edge key."""
    return mix64((base_seed ^ mix64((config_index * GOLDEN + 1) & MASK64)) & MASK64)


def edge_uniform(base_seed: int, config_index: int, key: int) -> float:
    """Uniform deviate in [0, 1) attached to one edge of one configuration."""
    x = mix64(config_key(base_seed, config_index) ^ key)
    return (x >> 11) * 2.0**-53


def edge_key_for(u: Vertex, v: Vertex) -> int:
    return edge_key(vertex_code(u), vertex_code(v))
