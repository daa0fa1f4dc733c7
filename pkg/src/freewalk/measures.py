"""Finitely supported probability measures and exact convolution powers.

Measures and everything computed from them are immutable values; caches
only memoize pure results, so instances are safe to share across threads
and results are identical regardless of any worker configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from . import engine
from .engine import BallTable, BudgetExceededError
from .groups import FreeProduct, GroupElement

EXACT = "exact"
FLOAT = "float"


class Measure:
    """A finitely supported probability measure on a free product.

    Weights are exact `Fraction`s (mode "exact") or floats (mode "float").
    Instances are immutable by convention; engine tables and return
    sequences are cached on the instance and shared by later calls.
    """

    def __init__(self, group: FreeProduct, entries: Mapping[GroupElement, Fraction | float],
                 mode: str = EXACT):
        if mode not in (EXACT, FLOAT):
            raise ValueError(f"unknown mode {mode!r}")
        cleaned: dict[GroupElement, Fraction | float] = {}
        for g, w in entries.items():
            w = Fraction(w) if mode == EXACT else float(w)
            if w <= 0:
                raise ValueError(f"non-positive weight {w} at {group.render(g)}")
            key = group.normalize(g.syllables)
            cleaned[key] = cleaned.get(key, Fraction(0) if mode == EXACT else 0.0) + w
        total = sum(cleaned.values())
        if mode == EXACT:
            if total != 1:
                raise ValueError(f"weights sum to {total}, not 1")
        elif abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, not 1 within 1e-12")
        self.group = group
        self.entries: dict[GroupElement, Fraction | float] = dict(
            sorted(cleaned.items(), key=lambda kv: (len(kv[0].syllables), kv[0].syllables))
        )
        self.mode = mode
        self.max_table_elements: int | None = None
        self._tables: dict[int, BallTable] = {}
        self._q_cache: dict = {}

    # -- basic views ---------------------------------------------------------

    @property
    def support(self) -> list[GroupElement]:
        return list(self.entries)

    @property
    def d_mu(self) -> int:
        return max((self.group.word_length(g) for g in self.entries), default=0)

    def weight(self, g: GroupElement):
        zero = Fraction(0) if self.mode == EXACT else 0.0
        return self.entries.get(self.group.normalize(g.syllables), zero)

    def is_symmetric(self) -> bool:
        grp = self.group
        for g, w in self.entries.items():
            if self.entries.get(grp.inverse(g)) != w:
                return False
        return True

    def as_float(self) -> "Measure":
        if self.mode == FLOAT:
            return self
        return Measure(self.group, {g: float(w) for g, w in self.entries.items()}, FLOAT)

    def integerized(self) -> tuple[list[int], int]:
        """Weights scaled to integers by their common denominator D."""
        if self.mode != EXACT:
            raise ValueError("integerized weights need exact mode")
        denom = math.lcm(*(w.denominator for w in self.entries.values()))
        return [int(w * denom) for w in self.entries.values()], denom

    def table(self, cap: int, max_elements: int | None = None) -> BallTable:
        """Interned ball table for this support at the given word-radius cap."""
        tbl = self._tables.get(cap)
        if tbl is None:
            budget = max_elements if max_elements is not None else self.max_table_elements
            tbl = BallTable(self.group, list(self.entries), cap, budget)
            self._tables[cap] = tbl
        return tbl

    def drop_tables(self):
        """Release cached engine tables (they dominate memory)."""
        self._tables.clear()


@dataclass(frozen=True)
class WalkReport:
    symmetric: bool
    aperiodic: bool
    period: int
    checked_to: int
    admissible_to_depth: int
    support_radius: int


@dataclass(frozen=True)
class ReturnSequence:
    """q_n = mu^{*n}(e) for n = 0..n_max, with provenance."""

    values: tuple
    mode: str
    n_max: int
    denominator: int = 0
    pruned_radius: int = 0

    def floats(self) -> list[float]:
        return [float(v) for v in self.values]


# -- constructors -----------------------------------------------------------------


def measure_from_pairs(group: FreeProduct, pairs: Iterable[tuple[str | GroupElement, object]],
                       mode: str = EXACT) -> Measure:
    entries: dict[GroupElement, Fraction | float] = {}
    for key, w in pairs:
        g = group.parse(key) if isinstance(key, str) else key
        w = Fraction(w) if mode == EXACT else float(w)
        entries[g] = entries.get(g, 0) + w
    return Measure(group, entries, mode)


def simple_walk(group: FreeProduct) -> Measure:
    """Uniform on the standard generators and their inverses."""
    gens: list[GroupElement] = []
    for k in range(1, group.num_factors + 1):
        spec = group.factor(k)
        for i in range(spec.dim):
            coords = [0] * spec.dim
            coords[i] = 1
            gens.append(GroupElement((group.syllable(k, coords),)))
            coords[i] = -1
            gens.append(group.normalize([group.syllable(k, coords)]))
    gens = list(dict.fromkeys(gens))
    w = Fraction(1, len(gens))
    return Measure(group, {g: w for g in gens})


def lazy_walk(group: FreeProduct, hold: Fraction = Fraction(1, 2)) -> Measure:
    """(1 - hold) * simple walk + hold * delta_e; aperiodic for hold > 0."""
    base = simple_walk(group)
    entries = {g: (1 - hold) * w for g, w in base.entries.items()}
    entries[group.identity] = Fraction(hold)
    return Measure(group, entries)


# -- validation ---------------------------------------------------------------------


def validate(measure: Measure, depth: int = 6) -> WalkReport:
    """Symmetry, periodicity (gcd of return times up to 2*depth), and the
    verified admissibility radius.

    gcd = 1 is definitive; a gcd d > 1 is reported as period d for the
    checked horizon (the gcd of a growing set never increases).
    """
    grp = measure.group
    symmetric = measure.is_symmetric()

    q = return_sequence(measure, 2 * depth).values
    return_times = [n for n in range(1, 2 * depth + 1) if q[n] > 0]
    if not return_times:
        period, aperiodic = 0, False
    else:
        period = 0
        for n in return_times:
            period = math.gcd(period, n)
        aperiodic = period == 1

    support = list(measure.entries)
    admissible_to = 0
    for ell in range(1, depth + 1):
        target = {g for g in grp.enumerate_ball(ell, ell)
                  if grp.word_length(g) <= ell}
        reached = {grp.identity}
        frontier = {grp.identity}
        radius_cap = ell + 2 * measure.d_mu + 2
        for _ in range(4 * (ell + 1)):
            if target <= reached:
                break
            new = set()
            for x in frontier:
                for s in support:
                    y = grp.multiply(x, s)
                    if grp.word_length(y) <= radius_cap and y not in reached:
                        new.add(y)
            reached |= new
            frontier = new
            if not frontier:
                break
        if target <= reached:
            admissible_to = ell
        else:
            break
    return WalkReport(
        symmetric=symmetric,
        aperiodic=aperiodic,
        period=period,
        checked_to=2 * depth,
        admissible_to_depth=admissible_to,
        support_radius=measure.d_mu,
    )


# -- convolution --------------------------------------------------------------------


def convolve(m: Measure, n: Measure, allow_cast: bool = False) -> Measure:
    """(m * n)(g) = sum_x m(x) n(x^-1 g).  Small-support direct product."""
    if m.group is not n.group and m.group.factors != n.group.factors:
        raise ValueError("measures live on different groups")
    if m.mode != n.mode:
        if not allow_cast:
            raise ValueError("mode mismatch (pass allow_cast=True to mix)")
        m, n = m.as_float(), n.as_float()
    grp = m.group
    out: dict[GroupElement, Fraction | float] = {}
    for x, wx in m.entries.items():
        for y, wy in n.entries.items():
            z = grp.multiply(x, y)
            out[z] = out.get(z, Fraction(0) if m.mode == EXACT else 0.0) + wx * wy
    return Measure(grp, out, m.mode)


def _dict_power_sequence(measure: Measure, n_max: int) -> list[Fraction]:
    """Pruned exact DP over dicts; fallback when integer weights overflow."""
    grp = measure.group
    d_mu = max(1, measure.d_mu)
    cur = {grp.identity: Fraction(1)}
    qs = [Fraction(1)]
    for t in range(1, n_max + 1):
        bound = min(t, n_max - t) * d_mu
        nxt: dict[GroupElement, Fraction] = {}
        for x, wx in cur.items():
            for s, ws in measure.entries.items():
                y = grp.multiply(x, s)
                if grp.word_length(y) <= bound:
                    nxt[y] = nxt.get(y, Fraction(0)) + wx * ws
        cur = nxt
        qs.append(cur.get(grp.identity, Fraction(0)))
    return qs


def return_sequence(measure: Measure, n_max: int,
                    max_elements: int | None = None) -> ReturnSequence:
    """Exact q_n = mu^{*n}(e) for n = 0..n_max.

    States with word length beyond min(t, n_max - t) * d_mu at step t cannot
    contribute to a length-n_max return and are pruned; the values are exact.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    cached = measure._q_cache.get(n_max)
    if cached is not None:
        return cached
    d_mu = max(1, measure.d_mu)
    half_radius = ((n_max + 1) // 2) * d_mu

    if measure.mode == FLOAT:
        table = measure.table(half_radius, max_elements)
        weights = [float(w) for w in measure.entries.values()]
        qs: list[float] = []
        engine.float_levels(
            table, weights, n_max,
            bound_fn=lambda t: None if t <= n_max - t else (n_max - t) * d_mu,
            on_level=lambda t, w: qs.append(float(w[0])),
        )
        result = ReturnSequence(tuple(qs), FLOAT, n_max, pruned_radius=half_radius)
    else:
        ints, denom = measure.integerized()
        if engine.exact_capacity(denom, (n_max + 1) // 2):
            table = measure.table(half_radius, max_elements)
            numerators = engine.pruned_power_sequence(
                table, ints, n_max, d_mu, measure.is_symmetric()
            )
            vals = tuple(Fraction(num, denom**n) for n, num in enumerate(numerators))
        else:
            vals = tuple(_dict_power_sequence(measure, n_max))
        result = ReturnSequence(vals, EXACT, n_max, denominator=denom,
                                pruned_radius=half_radius)
    measure._q_cache[n_max] = result
    return result


def distribution(measure: Measure, n: int, prune_radius: int | None = None,
                 max_elements: int | None = None) -> dict:
    """mu^{*n} restricted to the word ball of prune_radius.

    The restriction is exact: intermediate states are pruned at the sharpest
    sound radius prune_radius + (n - t) * d_mu, which every path ending
    inside the ball respects.  The total is a sub-probability when the
    radius bites and all of mu^{*n} when prune_radius >= n * d_mu.  Returns
    a dict GroupElement -> weight (a Measure proper requires total mass 1).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    grp = measure.group
    d_mu = max(1, measure.d_mu)
    radius = n * d_mu if prune_radius is None else prune_radius

    def bound(t: int) -> int:
        return min(t * d_mu, radius + (n - t) * d_mu)

    if measure.mode == EXACT:
        cur: dict[GroupElement, Fraction] = {grp.identity: Fraction(1)}
        for t in range(1, n + 1):
            nxt: dict[GroupElement, Fraction] = {}
            for x, wx in cur.items():
                for s, ws in measure.entries.items():
                    y = grp.multiply(x, s)
                    if grp.word_length(y) <= bound(t):
                        nxt[y] = nxt.get(y, Fraction(0)) + wx * ws
            cur = nxt
            if max_elements is not None and len(cur) > max_elements:
                raise BudgetExceededError(
                    f"distribution support exceeded {max_elements}", partial=cur
                )
        return cur
    cap = max(bound(t) for t in range(n + 1)) if n else 0
    table = measure.table(cap, max_elements)
    weights = [float(w) for w in measure.entries.values()]
    w = engine.float_levels(table, weights, n, bound_fn=bound)
    out = {}
    for i in np.nonzero(w)[0]:
        out[table.element_of(int(i))] = float(w[i])
    return out
