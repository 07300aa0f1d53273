"""Numba kernels: the hot loops of the Monte-Carlo engine.

The bit-level RNG arithmetic here must match perclab.rng exactly; the test
suite asserts agreement.  All kernels are deterministic functions of
(base seed, configuration index range, graph arrays), so chunked execution
merges to the same result in any order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_C1 = U64(0xBF58476D1CE4E5B9)
_C2 = U64(0x94D049BB133111EB)
_GOLDEN = U64(0x9E3779B97F4A7C15)
_S30 = U64(30)
_S27 = U64(27)
_S31 = U64(31)
_S11 = U64(11)
_ONE = U64(1)


@njit(inline="always")
def _mix64(x):
    x = (x ^ (x >> _S30)) * _C1
    x = (x ^ (x >> _S27)) * _C2
    return x ^ (x >> _S31)


@njit(inline="always")
def _config_key(base, cfg):
    return _mix64(base ^ _mix64(U64(cfg) * _GOLDEN + _ONE))


@njit(cache=True, nogil=True)
def edge_draws(base, cfg, keys):
    """Uniform deviates for an array of edge keys (reference/testing path)."""
    ckey = _config_key(base, cfg)
    out = np.empty(keys.size, np.float64)
    for i in range(keys.size):
        out[i] = np.float64(_mix64(ckey ^ keys[i]) >> _S11) * 2.0**-53
    return out


@njit(inline="always")
def _explore_into(indptr, nbr, ekey, origin, base, thresh, cfg, mark, stack, stamp):
    ckey = _config_key(base, cfg)
    top = 0
    stack[0] = origin
    mark[origin] = stamp
    top = 1
    while top > 0:
        top -= 1
        v = stack[top]
        for i in range(indptr[v], indptr[v + 1]):
            w = nbr[i]
            if mark[w] == stamp:
                continue
            if (_mix64(ckey ^ ekey[i]) >> _S11) < thresh:
                mark[w] = stamp
                stack[top] = w
                top += 1


@njit(cache=True, nogil=True)
def explore_mask(indptr, nbr, ekey, origin, base, thresh, cfg):
    """Open cluster of the start vertex as a boolean mask, one configuration."""
    nv = indptr.size - 1
    mark = np.zeros(nv, np.int64)
    stack = np.empty(nv, np.int32)
    _explore_into(indptr, nbr, ekey, origin, base, thresh, cfg, mark, stack, 1)
    return mark == 1


@njit(cache=True, nogil=True)
def two_point_hits(indptr, nbr, ekey, origin, base, thresh, cfg_start, samples, targets):
    """Per-target hit counts over a contiguous range of configurations."""
    nv = indptr.size - 1
    mark = np.zeros(nv, np.int64)
    stack = np.empty(nv, np.int32)
    hits = np.zeros(targets.size, np.int64)
    for k in range(samples):
        stamp = k + 1
        _explore_into(
            indptr, nbr, ekey, origin, base, thresh, cfg_start + k, mark, stack, stamp
        )
        for t in range(targets.size):
            if mark[targets[t]] == stamp:
                hits[t] += 1
    return hits


@njit(cache=True, nogil=True)
def two_point_hits_uf(eu, ev, ekeys, nv, origin, base, thresh, cfg_start, samples, targets):
    """Same hit counts as two_point_hits via a full union-find sweep.

    Identical edge deviates, hence bit-identical results; cheaper than BFS
    when the origin cluster spans most of the box."""
    parent = np.empty(nv, np.int32)
    hits = np.zeros(targets.size, np.int64)
    for k in range(samples):
        for v in range(nv):
            parent[v] = v
        ckey = _config_key(base, cfg_start + k)
        for e in range(eu.size):
            if (_mix64(ckey ^ ekeys[e]) >> _S11) < thresh:
                ra = _find(parent, eu[e])
                rb = _find(parent, ev[e])
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb
        ro = _find(parent, origin)
        for t in range(targets.size):
            if _find(parent, targets[t]) == ro:
                hits[t] += 1
    return hits


@njit(cache=True, nogil=True)
def two_point_hits_multi_uf(
    eu, ev, ekeys, nv, origin, base, threshs, cfg_start, samples, targets
):
    """Coupled hit counts at several thresholds (ascending) per configuration.

    Each edge deviate is hashed once; the union-find structure is grown
    incrementally as the threshold rises, realizing the monotone grand
    coupling exactly.  Column j matches a standalone run at threshs[j]."""
    parent = np.empty(nv, np.int32)
    draws = np.empty(eu.size, np.uint64)
    hits = np.zeros((targets.size, threshs.size), np.int64)
    for k in range(samples):
        for v in range(nv):
            parent[v] = v
        ckey = _config_key(base, cfg_start + k)
        for e in range(eu.size):
            draws[e] = _mix64(ckey ^ ekeys[e]) >> _S11
        prev = U64(0)
        for j in range(threshs.size):
            cur = threshs[j]
            for e in range(eu.size):
                if prev <= draws[e] < cur:
                    ra = _find(parent, eu[e])
                    rb = _find(parent, ev[e])
                    if ra != rb:
                        if ra < rb:
                            parent[rb] = ra
                        else:
                            parent[ra] = rb
            ro = _find(parent, origin)
            for t in range(targets.size):
                if _find(parent, targets[t]) == ro:
                    hits[t, j] += 1
            prev = cur
    return hits


@njit(inline="always")
def _find(parent, v):
    root = v
    while parent[root] != root:
        root = parent[root]
    while parent[v] != root:
        nxt = parent[v]
        parent[v] = root
        v = nxt
    return root


@njit(cache=True, nogil=True)
def label_components(eu, ev, ekeys, nv, base, thresh, cfg):
    """Union-find labeling of one full configuration; label = component root."""
    parent = np.empty(nv, np.int32)
    for v in range(nv):
        parent[v] = v
    ckey = _config_key(base, cfg)
    for e in range(eu.size):
        if (_mix64(ckey ^ ekeys[e]) >> _S11) < thresh:
            ra = _find(parent, eu[e])
            rb = _find(parent, ev[e])
            if ra != rb:
                if ra < rb:
                    parent[rb] = ra
                else:
                    parent[ra] = rb
    for v in range(nv):
        parent[v] = _find(parent, v)
    return parent


@njit(cache=True, nogil=True)
def triangle_samples(
    indptr, nbr, ekey, eu, ev, ekeys, origin, base, thresh, cfg_start, samples
):
    """Unbiased triangle-diagram samples.

    Sample k uses configurations 3k, 3k+1, 3k+2 (offset by cfg_start*3):
    clusters of the origin in the outer two, a full labeling of the middle
    one, and the value sum_label |C1 n label| * |C3 n label|.
    """
    nv = indptr.size - 1
    out = np.empty(samples, np.float64)
    mark1 = np.zeros(nv, np.int64)
    mark3 = np.zeros(nv, np.int64)
    stack = np.empty(nv, np.int32)
    parent = np.empty(nv, np.int32)
    c1 = np.zeros(nv, np.int64)
    c3 = np.zeros(nv, np.int64)
    for k in range(samples):
        stamp = k + 1
        cfg = 3 * (cfg_start + k)
        _explore_into(indptr, nbr, ekey, origin, base, thresh, cfg, mark1, stack, stamp)
        _explore_into(
            indptr, nbr, ekey, origin, base, thresh, cfg + 2, mark3, stack, stamp
        )
        for v in range(nv):
            parent[v] = v
        ckey = _config_key(base, cfg + 1)
        for e in range(eu.size):
            if (_mix64(ckey ^ ekeys[e]) >> _S11) < thresh:
                ra = _find(parent, eu[e])
                rb = _find(parent, ev[e])
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb
        for v in range(nv):
            r = _find(parent, v)
            if mark1[v] == stamp:
                c1[r] += 1
            if mark3[v] == stamp:
                c3[r] += 1
        acc = 0.0
        for v in range(nv):
            if parent[v] == v and c1[v] > 0 and c3[v] > 0:
                acc += np.float64(c1[v]) * np.float64(c3[v])
        out[k] = acc
        for v in range(nv):
            c1[v] = 0
            c3[v] = 0
    return out


@njit(cache=True, nogil=True)
def tree_triangle_increments_f64(d, p, depth):
    """Float path of the tree triangle increments; see perclab.series."""
    b = np.float64(d - 1)
    inc = np.zeros(depth + 1, np.float64)
    p2 = p * p
    bpow = np.empty(depth + 1, np.float64)
    p2pow = np.empty(2 * depth + 2, np.float64)
    bpow[0] = 1.0
    for i in range(1, depth + 1):
        bpow[i] = bpow[i - 1] * b
    p2pow[0] = 1.0
    for i in range(1, 2 * depth + 2):
        p2pow[i] = p2pow[i - 1] * p2
    for n1 in range(depth + 1):
        spc = 1.0 if n1 == 0 else d * bpow[n1 - 1]
        inc[n1] += spc * (n1 + 1) * p2pow[n1]
        for s in range(1, depth + 1):
            w = spc * bpow[s - 1] * p2pow[n1 + s]
            tmax = min(n1, depth - s)
            for t in range(tmax + 1):
                if t == 0:
                    first = d if n1 == 0 else d - 1
                elif t == n1:
                    first = d - 1
                else:
                    first = d - 2
                inc[max(n1, t + s)] += first * w
    return inc
