"""Pointwise forcing rules f(x, s), their envelopes, primitives, and selections.

A `NonlinearitySpec` bundles a pointwise evaluator with optional jump
metadata (level, one-sided limits) and the growth constants (C, q) bounding
|f(x,s)| <= C*(1 + |s|^(q-1)).  Jump metadata is the primary mechanism for
exact lower/upper envelopes; without it a sampling estimator is used and the
result is flagged approximate.  The estimator works from point values only,
so it cannot distinguish a rule from an almost-everywhere modification of
it; declare the jump structure whenever exactness matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(7)


class QuadratureError(ArithmeticError):
    """Primitive quadrature failed to converge; carries the achieved tolerance."""

    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class Jump:
    """One declared discontinuity of f(x, .) at the level s = level(x).

    `left` and `right` are the one-sided limits of f(x, .) from below and
    above the level.  The level rule must be continuous in x.
    """

    level: Callable[[np.ndarray], float]
    left: Callable[[np.ndarray], float]
    right: Callable[[np.ndarray], float]


@dataclass(frozen=True)
class Bracket:
    """Envelope pair [lo, hi] at a point; `approximate` marks estimator mode."""

    lo: float
    hi: float
    approximate: bool = False

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"bracket lo={self.lo} exceeds hi={self.hi}")

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= value <= self.hi + slack

    def distance(self, value: float, slack: float = 0.0) -> float:
        return max(0.0, self.lo - slack - value, value - self.hi - slack)


@dataclass(frozen=True)
class NonlinearitySpec:
    """A measurable forcing rule with growth constants and jump metadata.

    Fields
    ------
    evaluate : callable (x, s) -> float
        Pointwise value of f; x is a coordinate array, s a real.  Need not
        be meaningful exactly on a declared jump level.
    jumps : tuple of Jump, or None
        Declared discontinuities in s.  An empty tuple declares f
        continuous in s; None marks a black-box rule whose envelopes must
        be estimated by sampling.
    growth_c, growth_q : float
        Constants of the growth bound |f(x,s)| <= C*(1 + |s|^(q-1)).
    name : str
        Display name used by reports.
    """

    evaluate: Callable[[np.ndarray, float], float]
    jumps: Optional[tuple] = ()
    growth_c: float = 1.0
    growth_q: float = 2.0
    name: str = "custom"

    def __post_init__(self):
        if self.growth_c < 0:
            raise ValueError(f"growth_c must be >= 0, got {self.growth_c}")
        if not self.growth_q > 1:
            raise ValueError(f"growth_q must be > 1, got {self.growth_q}")
        if self.jumps is not None:
            object.__setattr__(self, "jumps", tuple(self.jumps))

    def jump_at(self, x, s) -> Optional[Jump]:
        """The declared jump whose level equals s at x exactly, if any."""
        for j in self.jumps or ():
            if s == j.level(x):
                return j
        return None


_DEFAULT_DELTAS = (1e-2, 1e-3, 1e-4)


def bracket(spec: NonlinearitySpec, x, s: float, *,
            deltas: Sequence[float] = _DEFAULT_DELTAS, samples: int = 64) -> Bracket:
    """Envelope pair [f_lower, f_upper] at (x, s).

    With jump metadata (including a declared-continuous empty tuple) the
    result is exact: at a jump level it is the ordered pair of one-sided
    limits, elsewhere both envelopes collapse to the pointwise value.  For
    black-box rules (jumps=None), inf/sup of point samples over a shrinking
    window |t - s| < delta are taken and the last window wins; that
    estimate is flagged approximate.
    """
    x = np.asanyarray(x, dtype=float)
    if spec.jumps is not None:
        j = spec.jump_at(x, s)
        if j is not None:
            a, b = float(j.left(x)), float(j.right(x))
            return Bracket(min(a, b), max(a, b))
        v = float(spec.evaluate(x, s))
        return Bracket(v, v)
    lo = hi = float(spec.evaluate(x, s))
    for delta in deltas:
        t = np.linspace(s - delta, s + delta, samples)
        vals = np.array([spec.evaluate(x, ti) for ti in t], dtype=float)
        lo, hi = float(vals.min()), float(vals.max())
    return Bracket(lo, hi, approximate=True)


def lower_envelope(spec: NonlinearitySpec, x, s: float, **kw) -> float:
    """Essential lower envelope of f(x, .) at s (see `bracket`)."""
    return bracket(spec, x, s, **kw).lo


def upper_envelope(spec: NonlinearitySpec, x, s: float, **kw) -> float:
    """Essential upper envelope of f(x, .) at s (see `bracket`)."""
    return bracket(spec, x, s, **kw).hi


def selection(spec: NonlinearitySpec, x, s: float, rule: str = "mid") -> float:
    """A single value inside the envelope bracket at (x, s).

    Off jump levels this is the pointwise value.  Exactly at a declared
    jump level the `rule` decides: "mid" (default) takes the bracket
    midpoint, "lo"/"hi" take the endpoints.
    """
    if rule not in ("lo", "mid", "hi"):
        raise ValueError(f"unknown selection rule {rule!r}")
    x = np.asanyarray(x, dtype=float)
    j = spec.jump_at(x, s)
    if j is None:
        return float(spec.evaluate(x, s))
    a, b = float(j.left(x)), float(j.right(x))
    lo, hi = min(a, b), max(a, b)
    if rule == "lo":
        return lo
    if rule == "hi":
        return hi
    return 0.5 * (lo + hi)


def _gauss_panel(fn, a: float, b: float) -> float:
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * sum(w * fn(mid + half * xi) for xi, w in zip(_GAUSS_X, _GAUSS_W))


def _adaptive_gauss(fn, a: float, b: float, rel_tol: float, max_depth: int = 40) -> float:
    whole = _gauss_panel(fn, a, b)
    stack = [(a, b, whole, 0)]
    total = 0.0
    while stack:
        a0, b0, coarse, depth = stack.pop()
        m = 0.5 * (a0 + b0)
        left, right = _gauss_panel(fn, a0, m), _gauss_panel(fn, m, b0)
        err = abs(left + right - coarse)
        scale = max(abs(left + right), abs(whole), 1e-300)
        if err <= rel_tol * scale or (b0 - a0) < 1e-15 * max(abs(a), abs(b), 1.0):
            total += left + right
        elif depth >= max_depth:
            raise QuadratureError(
                f"quadrature stalled on [{a0:g},{b0:g}] after {max_depth} subdivisions",
                achieved=err / scale)
        else:
            stack.append((a0, m, left, depth + 1))
            stack.append((m, b0, right, depth + 1))
    return total


def primitive(spec: NonlinearitySpec, x, s: float, rel_tol: float = 1e-10) -> float:
    """The primitive F(x, s), the integral of f(x, .) from 0 to s.

    Splits at declared jump levels strictly inside the integration range,
    then integrates each smooth piece with adaptive 7-point Gauss panels
    subdivided until the relative tolerance is met.  For s < 0 the usual
    orientation convention applies (the result is minus the integral over
    (s, 0)).
    """
    x = np.asanyarray(x, dtype=float)
    s = float(s)
    if s == 0.0:
        return 0.0
    a, b, sign = (0.0, s, 1.0) if s > 0 else (s, 0.0, -1.0)
    cuts = [a, b]
    for j in spec.jumps or ():
        lv = float(j.level(x))
        if a < lv < b:
            cuts.append(lv)
    cuts = sorted(set(cuts))
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        total += _adaptive_gauss(lambda t: float(spec.evaluate(x, t)), lo, hi, rel_tol)
    return sign * total


@dataclass(frozen=True)
class GrowthReport:
    """Result of sampling the growth bound |f| <= C*(1 + |s|^(q-1))."""

    max_ratio: float
    passed: bool
    worst_x: np.ndarray = field(default=None)
    worst_s: float = 0.0
    count: int = 0


def growth_check(spec: NonlinearitySpec, sample_box, count: int, seed: int = 0) -> GrowthReport:
    """Sample (x, s) pairs and report max |f| / (C*(1 + |s|^(q-1))).

    `sample_box` is ((x_lo, x_hi), (s_lo, s_hi)) with x_lo/x_hi arrays (or
    scalars in 1D).  Passing means the ratio never exceeded one.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    (x_lo, x_hi), (s_lo, s_hi) = sample_box
    x_lo = np.atleast_1d(np.asarray(x_lo, dtype=float))
    x_hi = np.atleast_1d(np.asarray(x_hi, dtype=float))
    rng = np.random.default_rng(seed)
    c, q = spec.growth_c, spec.growth_q
    best_ratio, worst_x, worst_s = -np.inf, x_lo, 0.0
    s_fixed = [s_lo, s_hi, 0.0] if s_lo <= 0.0 <= s_hi else [s_lo, s_hi]
    for k in range(count):
        x = rng.uniform(x_lo, x_hi)
        s = s_fixed[k] if k < len(s_fixed) else float(rng.uniform(s_lo, s_hi))
        denom = c * (1.0 + abs(s) ** (q - 1.0))
        f = abs(float(spec.evaluate(x, s)))
        ratio = np.inf if denom == 0.0 and f > 0.0 else (0.0 if f == 0.0 else f / denom)
        if ratio > best_ratio:
            best_ratio, worst_x, worst_s = ratio, x, s
    return GrowthReport(max_ratio=float(best_ratio), passed=best_ratio <= 1.0,
                        worst_x=worst_x, worst_s=worst_s, count=count)


# -- catalog -------------------------------------------------------------------


def constant(a: float) -> NonlinearitySpec:
    """f(x, s) = a.  Continuous; trivial growth constants."""
    return NonlinearitySpec(evaluate=lambda x, s: a, jumps=(),
                            growth_c=abs(a), growth_q=2.0, name=f"constant({a:g})")


def neg_sign() -> NonlinearitySpec:
    """f(s) = -sign(s): the attracting discontinuous forcing with jump at 0."""
    return NonlinearitySpec(
        evaluate=lambda x, s: -float(np.sign(s)),
        jumps=(Jump(level=lambda x: 0.0, left=lambda x: 1.0, right=lambda x: -1.0),),
        growth_c=1.0, growth_q=2.0, name="neg_sign")


def step(a: float, b: float, s0: float) -> NonlinearitySpec:
    """f(s) = a for s < s0 and b for s > s0, with exact jump metadata."""
    def ev(x, s):
        if s < s0:
            return a
        if s > s0:
            return b
        return 0.5 * (a + b)
    jumps = () if a == b else (
        Jump(level=lambda x: s0, left=lambda x: a, right=lambda x: b),)
    return NonlinearitySpec(evaluate=ev, jumps=jumps,
                            growth_c=max(abs(a), abs(b)), growth_q=2.0,
                            name=f"step({a:g},{b:g},{s0:g})")


def heaviside() -> NonlinearitySpec:
    """f(s) = 0 for s < 0 and 1 for s > 0."""
    spec = step(0.0, 1.0, 0.0)
    return NonlinearitySpec(evaluate=spec.evaluate, jumps=spec.jumps,
                            growth_c=1.0, growth_q=2.0, name="heaviside")


def power(c: float, r: float) -> NonlinearitySpec:
    """f(s) = c * |s|^(r-1) * sign(s), continuous for r > 1."""
    if not r > 1:
        raise ValueError(f"power exponent must be > 1, got {r}")
    return NonlinearitySpec(
        evaluate=lambda x, s: c * abs(s) ** (r - 1.0) * float(np.sign(s)),
        jumps=(), growth_c=abs(c), growth_q=r, name=f"power({c:g},{r:g})")


CATALOG = {
    "constant": constant,
    "neg_sign": neg_sign,
    "step": step,
    "heaviside": heaviside,
    "power": power,
}


def from_catalog(name: str, *args, **kwargs) -> NonlinearitySpec:
    """Instantiate a catalog rule by name (used by config files)."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise KeyError(
            f"unknown nonlinearity {name!r}; catalog: {sorted(CATALOG)}") from None
    return factory(*args, **kwargs)
