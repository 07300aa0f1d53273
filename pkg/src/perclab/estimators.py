"""Derived quantities from two-point tables: decay rates along the tree and
line directions, line sums I and II, tilted susceptibility, the truncated
triangle diagram, and threshold estimates.

The uniqueness threshold is located by inverting the identity that the
tree-direction decay rate equals 1/sqrt(b) there (b = d-1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import BallSpec, level_count, sphere_count
from .mc import TwoPointTable, estimate_two_point
from .series import j_closed_form, j_enumerate, j_region
from .stats import Z99, EstimateWithCI


class InsufficientSignal(RuntimeError):
    """No usable window of two-point values for a decay-rate fit."""


class BracketError(RuntimeError):
    """A threshold search failed to bracket its target."""


class TruncationWarning(UserWarning):
    """Boundary terms of a truncated sum are not negligible."""


@dataclass(frozen=True)
class DecayEstimate:
    """Exponential decay rate, by the supremum rule and by regression.

    The supremum of tau(n)**(1/n) is the subadditive-limit form and is a
    lower-biased consistent estimator under truncation.
    """

    sup_estimate: float
    regression_estimate: float
    window: tuple[int, int]
    stderr: float
    sup_stderr: float


@dataclass(frozen=True)
class ThresholdEstimate:
    p_hat: float
    bracket: tuple[float, float]
    target: float
    iterations: int
    probes: tuple[tuple[float, float, float], ...] = ()  # (p, statistic, stderr)


def _decay_from_sequence(taus: np.ndarray, sigmas: np.ndarray) -> DecayEstimate:
    """Decay estimate from tau values indexed 1..N (entry i is distance i+1)."""
    n_max = len(taus)
    dists = np.arange(1, n_max + 1)
    if np.all(taus == 0):
        return DecayEstimate(0.0, 0.0, (0, 0), 0.0, 0.0)

    sup_val, sup_n = 0.0, 0
    for n, tau in zip(dists, taus):
        if tau > 0 and tau ** (1.0 / n) >= sup_val:
            sup_val, sup_n = float(tau ** (1.0 / n)), int(n)
    sup_se = float(sup_val * sigmas[sup_n - 1] / (sup_n * taus[sup_n - 1]))

    usable = (taus > 0) & (sigmas < 0.5 * np.maximum(taus, 1e-300))
    if not usable.any():
        raise InsufficientSignal("no distance has tau > 0 with relative CI < 50%")
    tight = (taus > 0) & (sigmas < 0.25 * np.maximum(taus, 1e-300))
    n2 = int(dists[tight][-1]) if tight.any() else int(dists[usable][-1])
    n1 = 3 if n2 > 3 else 1
    sel = tight if tight.any() else usable
    sel = sel & (dists >= n1) & (dists <= n2)
    if sel.sum() < 2:
        sel = usable
        n1, n2 = int(dists[usable][0]), int(dists[usable][-1])
    if sel.sum() < 2:
        raise InsufficientSignal("fewer than two usable distances for regression")

    x = dists[sel].astype(float)
    y = np.log(taus[sel])
    selog = np.maximum(sigmas[sel] / taus[sel], 1e-9)
    w = 1.0 / selog**2
    xbar = np.average(x, weights=w)
    ybar = np.average(y, weights=w)
    sxx = np.sum(w * (x - xbar) ** 2)
    slope = np.sum(w * (x - xbar) * (y - ybar)) / sxx
    slope_se = math.sqrt(1.0 / sxx)
    alpha_reg = math.exp(slope)
    return DecayEstimate(sup_val, alpha_reg, (n1, n2), alpha_reg * slope_se, sup_se)


def alpha_hat(table: TwoPointTable) -> DecayEstimate:
    """Decay rate of the two-point function along the tree direction."""
    r = table.spec.tree_radius
    taus = np.array([table.tau(n, 0) for n in range(1, r + 1)])
    sigmas = np.array([table.sigma(n, 0) for n in range(1, r + 1)])
    return _decay_from_sequence(taus, sigmas)


def beta_hat(table: TwoPointTable) -> DecayEstimate:
    """Decay rate along the line direction."""
    m = table.spec.line_halfwidth
    taus = np.array([table.tau(0, k) for k in range(1, m + 1)])
    sigmas = np.array([table.sigma(0, k) for k in range(1, m + 1)])
    return _decay_from_sequence(taus, sigmas)


def I_hat(table: TwoPointTable, n: int) -> EstimateWithCI:
    """Line sum of tau over all line offsets at tree distance n."""
    mm = table.spec.line_halfwidth
    est = table.tau(n, 0) + 2.0 * sum(table.tau(n, m) for m in range(1, mm + 1))
    var = table.sigma(n, 0) ** 2 + sum(
        (2.0 * table.sigma(n, m)) ** 2 for m in range(1, mm + 1)
    )
    se = math.sqrt(var)
    boundary = 2.0 * table.tau(n, mm)
    if est > 0 and boundary > 0.01 * est:
        warnings.warn(
            f"line-sum boundary terms are {boundary / est:.1%} of I({n})",
            TruncationWarning,
            stacklevel=2,
        )
    return EstimateWithCI(est, se, est - Z99 * se, est + Z99 * se, table.samples)


def II_hat(table: TwoPointTable, n: int) -> EstimateWithCI:
    """Line sum of tau**2 at tree distance n (the BK-submultiplicative sum)."""
    mm = table.spec.line_halfwidth
    est = table.tau(n, 0) ** 2 + 2.0 * sum(
        table.tau(n, m) ** 2 for m in range(1, mm + 1)
    )
    var = (2.0 * table.tau(n, 0) * table.sigma(n, 0)) ** 2 + sum(
        (4.0 * table.tau(n, m) * table.sigma(n, m)) ** 2 for m in range(1, mm + 1)
    )
    se = math.sqrt(var)
    boundary = 2.0 * table.tau(n, mm) ** 2
    if est > 0 and boundary > 0.01 * est:
        warnings.warn(
            f"line-sum boundary terms are {boundary / est:.1%} of II({n})",
            TruncationWarning,
            stacklevel=2,
        )
    return EstimateWithCI(est, se, est - Z99 * se, est + Z99 * se, table.samples)


def level_weight(d: int, n: int, z: float) -> float:
    """Sum of z**level over the tree sphere of radius n."""
    return math.fsum(
        level_count(d, n, lvl) * z**lvl for lvl in range(-n, n + 1, 2)
    )


@dataclass(frozen=True)
class ChiTiltedEstimate(EstimateWithCI):
    """Truncated tilted susceptibility plus a certified truncation tail bound.

    tail_bound is infinite when the measured decay rate cannot certify a
    convergent tail (rate too close to 1/sqrt(b))."""

    tail_bound: float = math.inf
    tail_rate: float = math.nan


def chi_tilted_hat(table: TwoPointTable) -> ChiTiltedEstimate:
    """Two-point function summed against the square-root tilt, truncated at
    the table's tree radius, with a generating-function tail bound."""
    d = table.spec.d
    r = table.spec.tree_radius
    z = math.sqrt(d - 1)
    ests = [I_hat(table, n) for n in range(r + 1)]
    weights = [level_weight(d, n, z) for n in range(r + 1)]
    est = math.fsum(e.estimate * w for e, w in zip(ests, weights))
    se = math.sqrt(math.fsum((e.stderr * w) ** 2 for e, w in zip(ests, weights)))

    alpha = alpha_hat(table)
    rate = alpha.sup_estimate + alpha.stderr
    if rate == 0.0:
        tail = 0.0
    elif j_region(d, rate, z).converges:
        tail = j_closed_form(d, rate, z) - float(j_enumerate(d, rate, z, r)[-1])
    else:
        warnings.warn(
            f"tilted tail unbounded: rate {rate:.4f} >= 1/sqrt({d - 1})",
            TruncationWarning,
            stacklevel=2,
        )
        tail = math.inf
    return ChiTiltedEstimate(
        est, se, est - Z99 * se, est + Z99 * se, table.samples, tail, rate
    )


def _extended_tau(table: TwoPointTable, r: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    if r > table.spec.tree_radius or m > table.spec.line_halfwidth:
        raise ValueError("requested range exceeds table coverage")
    tau = np.empty((r + 1, m + 1))
    sig = np.empty((r + 1, m + 1))
    for n in range(r + 1):
        for k in range(m + 1):
            tau[n, k] = table.tau(n, k)
            sig[n, k] = table.sigma(n, k)
    return tau, sig


def chi_plain(table: TwoPointTable, tree_radius: int, line_halfwidth: int) -> float:
    """Untilted susceptibility truncated to a sub-box of the table."""
    tau, _ = _extended_tau(table, tree_radius, line_halfwidth)
    total = 0.0
    for n in range(tree_radius + 1):
        row = tau[n, 0] + 2.0 * tau[n, 1:].sum()
        total += sphere_count(table.spec.d, n) * row
    return total


def sum_tau_squared(table: TwoPointTable, tree_radius: int, line_halfwidth: int) -> float:
    """Sum of tau**2 over a sub-box (the square-bound left factor)."""
    tau, _ = _extended_tau(table, tree_radius, line_halfwidth)
    total = 0.0
    for n in range(tree_radius + 1):
        row = tau[n, 0] ** 2 + 2.0 * (tau[n, 1:] ** 2).sum()
        total += sphere_count(table.spec.d, n) * row
    return total


def _nabla_sum(tau: np.ndarray, d: int, r: int, m: int) -> float:
    """Triangle diagram over the (r, m) box via orbit-count reduction.

    Pairs (x, y) are grouped by the tripod shape of their tree geodesics:
    x at distance n1, the o->y geodesic following o->x for t steps and
    branching for s more.  Line offsets are contracted with Toeplitz
    kernels built from the table.
    """
    lines = 2 * m + 1
    offs = np.abs(np.arange(lines) - m)
    vecs = np.array([tau[n, offs] for n in range(r + 1)])  # (r+1, lines)
    diff = np.abs(np.arange(lines)[:, None] - np.arange(lines)[None, :])
    # contracted[n2, n3] = sum_{m1,m3} tau[n2,|m1-m3|] tau[n3,|m3|] per m1
    contracted = np.empty((2 * r + 1, r + 1, lines))
    for n2 in range(2 * r + 1):
        kern = tau[n2, diff]
        contracted[n2] = vecs @ kern.T

    b = d - 1
    total = 0.0
    for n1 in range(r + 1):
        spc = sphere_count(d, n1)
        vx = vecs[n1]
        # s = 0: y on the o->x geodesic (t = 0..n1)
        for t in range(n1 + 1):
            total += spc * float(vx @ contracted[n1 - t, t])
        for s in range(1, r + 1):
            for t in range(min(n1, r - s) + 1):
                if t == 0:
                    first = d if n1 == 0 else d - 1
                elif t == n1:
                    first = d - 1
                else:
                    first = d - 2
                cnt = spc * first * b ** (s - 1)
                total += cnt * float(vx @ contracted[n1 - t + s, t + s])
    return total


def nabla_from_table(
    table: TwoPointTable,
    tree_radius: int,
    line_halfwidth: int,
    n_boot: int = 50,
) -> EstimateWithCI:
    """Deterministic triangle-diagram sum over a box, using homogeneity to
    read every two-point factor from the orbit table.

    Needs table coverage out to twice the box radii.  Uncertainty is
    propagated by a parametric bootstrap over the table entries."""
    if 2 * tree_radius > table.spec.tree_radius:
        raise ValueError("table tree radius must cover twice the box radius")
    if 2 * line_halfwidth > table.spec.line_halfwidth:
        raise ValueError("table line half-width must cover twice the box half-width")
    tau, sig = _extended_tau(table, 2 * tree_radius, 2 * line_halfwidth)
    d = table.spec.d
    est = _nabla_sum(tau, d, tree_radius, line_halfwidth)
    rng = np.random.default_rng(table.base_seed ^ 0x5DEECE66D)
    boots = np.empty(n_boot)
    for i in range(n_boot):
        perturbed = np.clip(tau + rng.normal(0.0, 1.0, tau.shape) * sig, 0.0, 1.0)
        perturbed[0, 0] = 1.0
        boots[i] = _nabla_sum(perturbed, d, tree_radius, line_halfwidth)
    se = float(boots.std(ddof=1)) if n_boot > 1 else 0.0
    return EstimateWithCI(est, se, est - Z99 * se, est + Z99 * se, table.samples)


def p_u_by_alpha_inversion(
    d: int,
    tree_radius: int = 9,
    line_halfwidth: int = 24,
    samples: int = 20000,
    base_seed: int = 1,
    tol: float = 0.01,
    bracket: tuple[float, float] = (0.30, 0.95),
    threads: int | None = None,
) -> ThresholdEstimate:
    """Bisection for the p at which the tree-direction decay rate crosses
    1/sqrt(d-1).

    Every probe reuses the same seed, so the coupled decay-rate curve is
    monotone in p by construction and bisection is well-posed despite noise.
    """
    target = 1.0 / math.sqrt(d - 1)
    spec = BallSpec(d, tree_radius, line_halfwidth)
    probes: list[tuple[float, float, float]] = []

    def alpha_at(p: float) -> float:
        table = estimate_two_point(p, spec, samples, base_seed, threads)
        a = alpha_hat(table)
        probes.append((p, a.sup_estimate, a.sup_stderr))
        return a.sup_estimate

    lo, hi = bracket
    if not alpha_at(lo) < target:
        raise BracketError(f"decay rate at p={lo} already exceeds target {target:.5f}")
    if not alpha_at(hi) > target:
        raise BracketError(f"decay rate at p={hi} below target {target:.5f}")
    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if alpha_at(mid) < target:
            lo = mid
        else:
            hi = mid
        iterations += 1
    return ThresholdEstimate(0.5 * (lo + hi), (lo, hi), target, iterations, tuple(probes))


def p_c_proxy(
    d: int,
    grid: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(1, 19)),
    tree_radius: int = 4,
    line_halfwidth: int = 8,
    samples: int = 4000,
    base_seed: int = 1,
    growth_ratio: float = 3.0,
    threads: int | None = None,
) -> ThresholdEstimate:
    """Finite-size proxy for the onset of susceptibility divergence: the
    smallest grid p whose truncated susceptibility grows superlinearly when
    the box radii double.  Explicitly a diagnostic, not a rigorous estimate."""
    small = BallSpec(d, tree_radius, line_halfwidth)
    big = BallSpec(d, 2 * tree_radius, 2 * line_halfwidth)
    probes: list[tuple[float, float, float]] = []
    prev = grid[0]
    for p in grid:
        chi_small = chi_plain(
            estimate_two_point(p, small, samples, base_seed, threads),
            tree_radius,
            line_halfwidth,
        )
        chi_big = chi_plain(
            estimate_two_point(p, big, samples, base_seed, threads),
            2 * tree_radius,
            2 * line_halfwidth,
        )
        ratio = chi_big / chi_small if chi_small > 0 else math.inf
        probes.append((p, ratio, 0.0))
        if ratio > growth_ratio:
            return ThresholdEstimate(
                p, (prev, p), growth_ratio, len(probes), tuple(probes)
            )
        prev = p
    raise BracketError("no grid point showed superlinear susceptibility growth")
