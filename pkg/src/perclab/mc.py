"""Monte-Carlo engine: reproducible lazy edge sampling, cluster
exploration, full labeling, and estimation of the two-point table and the
truncated triangle diagram.

All finite-box connection estimates are lower bounds for their
infinite-volume counterparts: truncation can only remove connections.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .boxgraph import BoxGraph, GraphArrays, box_graph
from .geometry import BallSpec, Vertex
from .rng import edge_key_for, edge_uniform
from .stats import EstimateWithCI, binomial_estimate, mean_estimate, wilson_interval


def open_threshold(p: float) -> int:
    """Integer threshold t such that a 53-bit deviate u is open iff u < t.

    Equivalent to comparing u * 2**-53 < p; p * 2**53 is exact in binary64.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return math.ceil(p * 2.0**53)


def default_threads() -> int:
    env = os.environ.get("PERCLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _chunk_ranges(samples: int, threads: int) -> list[tuple[int, int]]:
    # Fixed chunking independent of thread count keeps merges deterministic.
    chunk = max(1, min(samples, 4096))
    return [(start, min(chunk, samples - start)) for start in range(0, samples, chunk)]


def _run_chunks(fn, samples: int, threads: int):
    """Run fn(cfg_start, count) over fixed chunks; results in chunk order."""
    ranges = _chunk_ranges(samples, threads)
    if threads <= 1 or len(ranges) == 1:
        return [fn(start, count) for start, count in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, start, count) for start, count in ranges]
        return [f.result() for f in futures]


@dataclass(frozen=True)
class ConfigSampler:
    """One Bernoulli(p) edge configuration, addressed by (seed, index).

    Each edge state is a pure function of the triple (base seed,
    configuration index, edge); repeated queries always agree, and the
    single deviate per edge couples all p monotonically.
    """

    base_seed: int
    config_index: int
    p: float

    def edge_uniform(self, u: Vertex, v: Vertex) -> float:
        return edge_uniform(self.base_seed, self.config_index, edge_key_for(u, v))

    def edge_open(self, u: Vertex, v: Vertex) -> bool:
        return self.edge_uniform(u, v) < self.p


def explore_cluster(sampler: ConfigSampler, spec: BallSpec, start: Vertex) -> set[Vertex]:
    """Open cluster of the start vertex inside the truncated box."""
    box = box_graph(spec)
    g = box.arrays
    mask = _kernels.explore_mask(
        g.indptr,
        g.nbr,
        g.ekey_dir,
        box.vertex_id(start),
        np.uint64(sampler.base_seed),
        np.uint64(open_threshold(sampler.p)),
        sampler.config_index,
    )
    return {box.vertex_at(int(i)) for i in np.nonzero(mask)[0]}


def full_labeling(sampler: ConfigSampler, spec: BallSpec) -> dict[Vertex, int]:
    """Cluster label per vertex; equal labels iff connected in the configuration."""
    box = box_graph(spec)
    g = box.arrays
    labels = _kernels.label_components(
        g.eu,
        g.ev,
        g.ekeys,
        g.nv,
        np.uint64(sampler.base_seed),
        np.uint64(open_threshold(sampler.p)),
        sampler.config_index,
    )
    return {box.vertex_at(i): int(labels[i]) for i in range(g.nv)}


@dataclass
class TwoPointTable:
    """Estimated two-point function indexed by orbit key (n, |m|).

    hits[n, m + M] counts configurations connecting the origin to the
    (n, m) representative; tau averages the +m and -m targets.
    """

    spec: BallSpec
    p: float
    samples: int
    base_seed: int
    hits: np.ndarray = field(repr=False)  # int64, (R+1, 2M+1)

    def _counts(self, n: int, m: int) -> tuple[int, int]:
        if not 0 <= n <= self.spec.tree_radius:
            raise KeyError(f"tree distance {n} outside table")
        if not 0 <= m <= self.spec.line_halfwidth:
            raise KeyError(f"line offset {m} outside table")
        mm = self.spec.line_halfwidth
        if m == 0:
            return int(self.hits[n, mm]), self.samples
        return int(self.hits[n, mm + m] + self.hits[n, mm - m]), 2 * self.samples

    def tau(self, n: int, m: int) -> float:
        k, trials = self._counts(n, m)
        return k / trials

    def sigma(self, n: int, m: int) -> float:
        k, trials = self._counts(n, m)
        return binomial_estimate(k, trials).stderr

    def ci(self, n: int, m: int) -> tuple[float, float]:
        k, trials = self._counts(n, m)
        return wilson_interval(k, trials)

    def estimate(self, n: int, m: int) -> EstimateWithCI:
        k, trials = self._counts(n, m)
        return binomial_estimate(k, trials)

    def tau_array(self) -> np.ndarray:
        """tau as a dense (R+1, M+1) array indexed by (n, |m|)."""
        r, mm = self.spec.tree_radius, self.spec.line_halfwidth
        out = np.empty((r + 1, mm + 1))
        for n in range(r + 1):
            for m in range(mm + 1):
                out[n, m] = self.tau(n, m)
        return out

    def sigma_array(self) -> np.ndarray:
        r, mm = self.spec.tree_radius, self.spec.line_halfwidth
        out = np.empty((r + 1, mm + 1))
        for n in range(r + 1):
            for m in range(mm + 1):
                out[n, m] = self.sigma(n, m)
        return out


def estimate_two_point(
    p: float,
    spec: BallSpec,
    samples: int,
    base_seed: int,
    threads: int | None = None,
) -> TwoPointTable:
    """Two-point table from one origin exploration per configuration.

    Orbits share configurations, so estimates at different (n, m) are
    positively correlated but individually unbiased for the box-truncated
    connection probability.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    box = box_graph(spec)
    g = box.arrays
    threads = default_threads() if threads is None else threads
    base = np.uint64(base_seed)
    thresh = np.uint64(open_threshold(p))

    # At strongly supercritical p the origin cluster spans most of the box
    # and a full union-find sweep beats lazy BFS; both kernels consume the
    # same per-edge deviates, so the choice cannot change the result.
    sweep = p >= 0.45

    def run(cfg_start: int, count: int):
        if sweep:
            return _kernels.two_point_hits_uf(
                g.eu, g.ev, g.ekeys, g.nv, g.origin, base, thresh, cfg_start, count, box.target_ids
            )
        return _kernels.two_point_hits(
            g.indptr, g.nbr, g.ekey_dir, g.origin, base, thresh, cfg_start, count, box.target_ids
        )

    parts = _run_chunks(run, samples, threads)
    flat = np.zeros(box.target_ids.size, np.int64)
    for part in parts:
        flat += part
    hits = flat.reshape(spec.tree_radius + 1, box.lines)
    return TwoPointTable(spec, p, samples, base_seed, hits)


def estimate_two_point_multi(
    ps: list[float],
    spec: BallSpec,
    samples: int,
    base_seed: int,
    threads: int | None = None,
) -> list[TwoPointTable]:
    """Coupled two-point tables at several p values from one sweep.

    Exploits the grand coupling: each edge deviate is drawn once per
    configuration and the cluster structure is grown incrementally in p.
    Every returned table is bit-identical to a standalone estimate at its
    p, and hit counts are exactly monotone across the list."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if sorted(ps) != list(ps):
        raise ValueError("p values must be ascending")
    box = box_graph(spec)
    g = box.arrays
    threads = default_threads() if threads is None else threads
    base = np.uint64(base_seed)
    threshs = np.array([open_threshold(p) for p in ps], np.uint64)

    def run(cfg_start: int, count: int):
        return _kernels.two_point_hits_multi_uf(
            g.eu, g.ev, g.ekeys, g.nv, g.origin, base, threshs, cfg_start, count, box.target_ids
        )

    parts = _run_chunks(run, samples, threads)
    flat = np.zeros((box.target_ids.size, len(ps)), np.int64)
    for part in parts:
        flat += part
    return [
        TwoPointTable(
            spec,
            p,
            samples,
            base_seed,
            flat[:, j].reshape(spec.tree_radius + 1, box.lines).copy(),
        )
        for j, p in enumerate(ps)
    ]


def estimate_connectivity(
    arrays: GraphArrays,
    p: float,
    samples: int,
    base_seed: int,
    threads: int | None = None,
) -> np.ndarray:
    """Per-vertex counts of configurations connecting the origin to each
    vertex of an arbitrary graph-array instance (used for oracle checks)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    threads = default_threads() if threads is None else threads
    base = np.uint64(base_seed)
    thresh = np.uint64(open_threshold(p))
    targets = np.arange(arrays.nv, dtype=np.int64)

    def run(cfg_start: int, count: int):
        return _kernels.two_point_hits(
            arrays.indptr,
            arrays.nbr,
            arrays.ekey_dir,
            arrays.origin,
            base,
            thresh,
            cfg_start,
            count,
            targets,
        )

    parts = _run_chunks(run, samples, threads)
    out = np.zeros(arrays.nv, np.int64)
    for part in parts:
        out += part
    return out


def triangle_mc(
    p: float,
    spec: BallSpec,
    samples: int,
    base_seed: int,
    threads: int | None = None,
    return_samples: bool = False,
):
    """Unbiased estimate of the box-truncated triangle diagram.

    Per sample, three independent configurations give the three two-point
    factors: clusters of the origin in the outer two and a full labeling of
    the middle one.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    box = box_graph(spec)
    g = box.arrays
    threads = default_threads() if threads is None else threads
    base = np.uint64(base_seed)
    thresh = np.uint64(open_threshold(p))

    def run(cfg_start: int, count: int):
        return _kernels.triangle_samples(
            g.indptr, g.nbr, g.ekey_dir, g.eu, g.ev, g.ekeys, g.origin, base, thresh, cfg_start, count
        )

    values = np.concatenate(_run_chunks(run, samples, threads))
    est = mean_estimate(values)
    if return_samples:
        return est, values
    return est
