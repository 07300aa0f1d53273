import numpy as np
import pytest

from perclab import _kernels
from perclab.boxgraph import box_graph
from perclab.geometry import ORIGIN, BallSpec, TreeAddress, Vertex
from perclab.mc import (
    ConfigSampler,
    estimate_connectivity,
    estimate_two_point,
    estimate_two_point_multi,
    explore_cluster,
    full_labeling,
    open_threshold,
    triangle_mc,
)
from perclab.oracle import TinyGraph, exact_triangle, exact_two_point_all, tiny_graph_arrays
from perclab.rng import edge_key_for, edge_uniform

SPEC_SMALL = BallSpec(3, 3, 4)


class TestRngAgreement:
    def test_kernel_matches_python_reference(self):
        keys = np.array(
            [edge_key_for(ORIGIN, Vertex(ORIGIN.tree, 1)), 7, 2**63 + 11, 123456789],
            np.uint64,
        )
        for cfg in (0, 1, 99, 2**40):
            got = _kernels.edge_draws(np.uint64(9001), cfg, keys)
            want = [edge_uniform(9001, cfg, int(k)) for k in keys]
            assert list(got) == want

    def test_open_threshold_equivalent_to_float_compare(self):
        # deviates produced by the sampler are exactly k * 2**-53
        ks = [0, 1, 2**51, 2**52 - 1, 2**52, 2**53 - 1]
        for p in (0.0, 0.3, 0.5, 1 - 2**-53, 1.0):
            t = open_threshold(p)
            for k in ks:
                assert (k < t) == (k * 2.0**-53 < p)

    def test_threshold_range_checked(self):
        with pytest.raises(ValueError):
            open_threshold(-0.1)
        with pytest.raises(ValueError):
            open_threshold(1.5)


class TestSampler:
    def test_edge_state_is_pure(self):
        s = ConfigSampler(5, 17, 0.4)
        v = Vertex(TreeAddress(1, ()), 0)
        assert s.edge_uniform(ORIGIN, v) == s.edge_uniform(ORIGIN, v)
        assert s.edge_uniform(ORIGIN, v) == s.edge_uniform(v, ORIGIN)

    def test_different_configs_differ(self):
        v = Vertex(TreeAddress(1, ()), 0)
        us = {ConfigSampler(5, c, 0.4).edge_uniform(ORIGIN, v) for c in range(64)}
        assert len(us) == 64

    def test_monotone_grand_coupling(self):
        for cfg in range(25):
            lo = explore_cluster(ConfigSampler(11, cfg, 0.3), SPEC_SMALL, ORIGIN)
            hi = explore_cluster(ConfigSampler(11, cfg, 0.55), SPEC_SMALL, ORIGIN)
            assert lo <= hi

    def test_extreme_p(self):
        assert explore_cluster(ConfigSampler(1, 0, 0.0), SPEC_SMALL, ORIGIN) == {ORIGIN}
        full = explore_cluster(ConfigSampler(1, 0, 1.0), SPEC_SMALL, ORIGIN)
        assert len(full) == SPEC_SMALL.vertex_count


class TestLabeling:
    def test_labels_agree_with_exploration(self):
        for cfg in range(10):
            s = ConfigSampler(23, cfg, 0.45)
            labels = full_labeling(s, SPEC_SMALL)
            cluster = explore_cluster(s, SPEC_SMALL, ORIGIN)
            want = labels[ORIGIN]
            assert {v for v, lab in labels.items() if lab == want} == cluster

    def test_labels_partition(self):
        labels = full_labeling(ConfigSampler(3, 4, 0.5), SPEC_SMALL)
        assert len(labels) == SPEC_SMALL.vertex_count


class TestTwoPointTable:
    def test_p_zero_and_one(self):
        t0 = estimate_two_point(0.0, SPEC_SMALL, 50, 7)
        t1 = estimate_two_point(1.0, SPEC_SMALL, 50, 7)
        assert t0.tau(0, 0) == 1.0 and t1.tau(0, 0) == 1.0
        assert t0.tau(2, 1) == 0.0 and t0.tau(0, 3) == 0.0
        assert t1.tau(3, 4) == 1.0

    def test_determinism_across_thread_counts(self):
        a = estimate_two_point(0.4, SPEC_SMALL, 9000, 99, threads=1)
        b = estimate_two_point(0.4, SPEC_SMALL, 9000, 99, threads=4)
        assert np.array_equal(a.hits, b.hits)

    def test_sweep_kernel_bit_identical_to_bfs(self):
        box = box_graph(SPEC_SMALL)
        g = box.arrays
        thresh = np.uint64(open_threshold(0.5))
        bfs = _kernels.two_point_hits(
            g.indptr, g.nbr, g.ekey_dir, g.origin, np.uint64(77), thresh, 0, 600, box.target_ids
        )
        uf = _kernels.two_point_hits_uf(
            g.eu, g.ev, g.ekeys, g.nv, g.origin, np.uint64(77), thresh, 0, 600, box.target_ids
        )
        assert np.array_equal(bfs, uf)

    def test_multi_bit_identical_to_single(self):
        ps = [0.3, 0.5, 0.62]
        multi = estimate_two_point_multi(ps, SPEC_SMALL, 2500, 31)
        for p, table in zip(ps, multi):
            single = estimate_two_point(p, SPEC_SMALL, 2500, 31)
            assert np.array_equal(table.hits, single.hits)

    def test_multi_requires_ascending(self):
        with pytest.raises(ValueError):
            estimate_two_point_multi([0.5, 0.3], SPEC_SMALL, 10, 1)

    def test_multi_hits_monotone(self):
        multi = estimate_two_point_multi([0.2, 0.4, 0.6], SPEC_SMALL, 1500, 8)
        assert np.all(multi[0].hits <= multi[1].hits)
        assert np.all(multi[1].hits <= multi[2].hits)

    def test_symmetric_counts_and_range_checks(self):
        t = estimate_two_point(0.4, SPEC_SMALL, 300, 5)
        k, trials = t._counts(1, 2)
        assert trials == 600
        with pytest.raises(KeyError):
            t.tau(4, 0)
        with pytest.raises(KeyError):
            t.tau(0, 5)

    def test_tau_array_matches_scalar_access(self):
        t = estimate_two_point(0.35, SPEC_SMALL, 400, 5)
        arr = t.tau_array()
        assert arr[2, 3] == t.tau(2, 3)
        assert arr.shape == (4, 5)


class TestAgainstOracle:
    def test_single_edge_within_3_sigma(self):
        g = TinyGraph(2, ((0, 1),), 0, "single_edge")
        hits = estimate_connectivity(tiny_graph_arrays(g), 0.3, 40000, 13)
        phat = hits[1] / 40000
        sigma = np.sqrt(0.3 * 0.7 / 40000)
        assert abs(phat - 0.3) <= 3 * sigma

    def test_cycle_all_targets_within_3_sigma(self):
        g = TinyGraph(5, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 0)), 0, "cycle5")
        n = 30000
        for p in (0.3, 0.7):
            hits = estimate_connectivity(tiny_graph_arrays(g), p, n, 21)
            exact = exact_two_point_all(g, p)
            for v in range(5):
                sigma = max(np.sqrt(exact[v] * (1 - exact[v]) / n), 1e-9)
                assert abs(hits[v] / n - exact[v]) <= 3.5 * sigma

    def test_triangle_mc_matches_exact_on_tiny_box(self):
        spec = BallSpec(3, 1, 1)
        from perclab.oracle import embed_ball

        exact = exact_triangle(embed_ball(spec), 0.4)
        est = triangle_mc(0.4, spec, 30000, 17)
        assert abs(est.estimate - exact) <= 3.5 * est.stderr

    def test_triangle_mc_p_extremes(self):
        spec = BallSpec(3, 1, 1)
        assert triangle_mc(0.0, spec, 200, 1).estimate == 1.0
        assert triangle_mc(1.0, spec, 200, 1).estimate == spec.vertex_count**2


class TestTriangleSamples:
    def test_deterministic_and_chunk_independent(self):
        spec = BallSpec(3, 2, 3)
        a, va = triangle_mc(0.45, spec, 5000, 3, threads=1, return_samples=True)
        b, vb = triangle_mc(0.45, spec, 5000, 3, threads=3, return_samples=True)
        assert np.array_equal(va, vb)
        assert a == b
