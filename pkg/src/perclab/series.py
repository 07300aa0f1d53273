"""Exact, non-stochastic series: the tilt-weighted tree generating function
J(r, z), tree two-point sums, and the tree triangle diagram used as the
guiding solvable example.

Divergence is decided by certified term-ratio bounds on the underlying
geometric series, never by numeric overflow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

from .geometry import level_count, sphere_count


class DivergenceReason(enum.Enum):
    INSIDE = "inside"
    R_TOO_LARGE = "r_too_large"
    Z_BELOW_BR = "z_below_br"
    Z_ABOVE_INV_R = "z_above_inv_r"


@dataclass(frozen=True)
class RegionVerdict:
    converges: bool
    reason: DivergenceReason


class SeriesDivergence(ArithmeticError):
    """Raised when a series is evaluated outside its convergence region."""

    def __init__(self, message: str, verdict: RegionVerdict | None = None):
        super().__init__(message)
        self.verdict = verdict


def j_region(d: int, r: float, z: float) -> RegionVerdict:
    """Convergence verdict for J(r, z): needs r < 1/sqrt(b) and b*r < z < 1/r."""
    if d < 3:
        raise ValueError("degree must be >= 3")
    if r < 0:
        raise ValueError("r must be nonnegative")
    if z <= 0:
        raise ValueError("z must be positive")
    b = d - 1
    if r == 0:
        return RegionVerdict(True, DivergenceReason.INSIDE)
    if r >= 1.0 / math.sqrt(b):
        return RegionVerdict(False, DivergenceReason.R_TOO_LARGE)
    if z <= b * r:
        return RegionVerdict(False, DivergenceReason.Z_BELOW_BR)
    if z >= 1.0 / r:
        return RegionVerdict(False, DivergenceReason.Z_ABOVE_INV_R)
    return RegionVerdict(True, DivergenceReason.INSIDE)


def j_closed_form(d: int, r: float, z: float) -> float:
    """Sum of r**|x| * z**level(x) over the tree, in closed form.

    Splitting each vertex into its up-run and down-word gives three
    geometric blocks: the pure-up ray, the pure-down subtree, and the mixed
    addresses whose first down label avoids the return branch.
    """
    verdict = j_region(d, r, z)
    if not verdict.converges:
        raise SeriesDivergence(
            f"J({r}, {z}) diverges: {verdict.reason.value}", verdict
        )
    if r == 0:
        return 1.0
    b = d - 1
    up = 1.0 / (1.0 - r * z)
    down = (b * r / z) / (1.0 - b * r / z)
    mixed = (r * z / (1.0 - r * z)) * ((b - 1) * (r / z) / (1.0 - b * r / z))
    return up + down + mixed


def j_enumerate(d: int, r, z, depth: int) -> list:
    """Partial sums of J over tree spheres up to the given radius.

    Accepts floats (compensated summation via math.fsum) or Fractions
    (exact).  Monotone nondecreasing in depth for nonnegative r.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    exact = isinstance(r, Fraction) or isinstance(z, Fraction)
    terms = []
    for n in range(depth + 1):
        if n == 0:
            terms.append([r**0 if exact else 1.0])
            continue
        level_terms = []
        for lvl in range(-n, n + 1, 2):
            level_terms.append(level_count(d, n, lvl) * r**n * z**lvl)
        terms.append(level_terms)
    partials = []
    if exact:
        acc = Fraction(0)
        for block in terms:
            acc += sum(block)
            partials.append(acc)
    else:
        flat: list[float] = []
        for block in terms:
            flat.extend(block)
            partials.append(math.fsum(flat))
    return partials


def tree_two_point(p: float, n: int):
    """Connection probability across distance n on the bare tree: the unique
    geodesic must be fully open."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return p**n


def tree_chi(d: int, p: float) -> float:
    """Expected cluster volume on the bare tree; finite iff p < 1/(d-1)."""
    if d < 3:
        raise ValueError("degree must be >= 3")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    b = d - 1
    if p * b >= 1:
        raise SeriesDivergence(f"tree susceptibility diverges for p >= 1/{b}")
    return 1.0 + (b + 1) * p / (1.0 - b * p)


def _triangle_term_count(d: int, n1: int, t: int, s: int) -> int:
    # Number of tree vertices y whose geodesic from the origin follows the
    # o->x geodesic for t steps and then branches off for s more steps,
    # given |x| = n1.
    if s == 0:
        return 1
    if t == 0:
        first = d if n1 == 0 else d - 1
    elif t == n1:
        first = d - 1
    else:
        first = d - 2
    return first * (d - 1) ** (s - 1)


def tree_triangle_increments(d: int, p, depth: int) -> list:
    """Per-radius increments of the tree triangle diagram.

    Entry k is the total weight of vertex pairs (x, y) in the radius-depth
    ball with max(|x|, |y|) == k; weight p**(|x| + dist(x,y) + |y|).
    Exact when p is a Fraction.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    exact = isinstance(p, Fraction)
    if not exact:
        from ._kernels import tree_triangle_increments_f64

        return list(tree_triangle_increments_f64(d, float(p), depth))
    inc = [Fraction(0)] * (depth + 1)
    p2 = p * p
    for n1 in range(depth + 1):
        spc = sphere_count(d, n1)
        inc[n1] += spc * (n1 + 1) * p2**n1
        for s in range(1, depth + 1):
            w = spc * (d - 1) ** (s - 1) * p2 ** (n1 + s)
            for t in range(0, min(n1, depth - s) + 1):
                cnt = _triangle_term_count(d, n1, t, s) // (d - 1) ** (s - 1)
                inc[max(n1, t + s)] += cnt * w
    return inc


def tree_triangle_partial(d: int, p, depth: int) -> list:
    """Partial sums of the tree triangle diagram over balls of growing radius.

    Stabilizing increments certify finiteness at the truncation scale;
    non-vanishing increments witness divergence (p >= 1/sqrt(d-1))."""
    inc = tree_triangle_increments(d, p, depth)
    partials = []
    acc = inc[0] * 0
    for v in inc:
        acc = acc + v
        partials.append(acc)
    return partials
