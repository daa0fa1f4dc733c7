"""Numerical audits of Green-function multiplicativity along geodesics.

Two families of checks:

* `triangle_audit`: for arbitrary triples (x, y, z) the product
  G(x,y|r) G(y,z|r) never exceeds G(e,e|r) G(x,z|r).  This holds for every
  measure; at finite truncation the comparison carries a slack derived from
  the per-element series-tail estimates, and the audit reports the worst
  signed violation beyond that slack.
* `ratio_audit`: for y on the relative geodesic from x to z, the ratio
  G(x,z|r) / (G(x,y|r) G(y,z|r)) is expected to stay within measure-level
  bounds, uniformly in r.  The upper side carries a non-explicit constant,
  so the audit reports distributions and their stability rather than
  asserting a number; the lower bound 1/G(e,e|r) is a restatement of the
  triangle inequality and is checked.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

from .groups import FreeProduct, GroupElement
from .measures import Measure
from .green import _field, field_tails, spectral_radius


@dataclass(frozen=True)
class TriangleAuditReport:
    r_values: tuple[float, ...]
    triples_checked: int
    uninformative: int
    worst_signed_slack: float
    violations: int
    per_r: dict


@dataclass(frozen=True)
class RatioRow:
    x: GroupElement
    y: GroupElement
    z: GroupElement
    r: float
    ratio: float


@dataclass(frozen=True)
class AnconaReport:
    r_values: tuple[float, ...]
    rows: tuple[RatioRow, ...]
    per_r_min: dict
    per_r_max: dict
    overall_min: float
    overall_max: float
    lower_bound_violations: int


def sample_triples(group: FreeProduct, m: int, B: int, count: int,
                   seed: int = 7) -> list[tuple[GroupElement, GroupElement, GroupElement]]:
    """Deterministic pseudo-random triples from the relative (m, B)-ball."""
    ball = list(group.enumerate_ball(m, B))
    rng = random.Random(seed)
    return [
        (rng.choice(ball), rng.choice(ball), rng.choice(ball)) for _ in range(count)
    ]


def geodesic_pairs(group: FreeProduct, m: int, B: int) -> list[tuple[GroupElement, GroupElement]]:
    """All pairs (e, z) plus translated pairs with at least one interior
    relative-geodesic vertex."""
    out = []
    for z in group.enumerate_ball(m, B):
        if group.relative_length(z) >= 2:
            out.append((group.identity, z))
    return out


def _pair_value(measure, fld, gf, tails, cache, x, y, r, rho, order, radius):
    """(value, tail) for G(x, y | r) from the field.

    The tail combines the per-element empirical estimate with systematic
    geometric bounds for what the truncation cannot see: series terms past
    the order, paths that exit the word-radius, and (for elements outside
    the table) the entire series from the word length up; all use the decay
    proxy (r * rho)^n with a 1% safety margin on the spectral-radius point
    estimate.
    """
    grp = measure.group
    w = grp.multiply(grp.inverse(x), y)
    hit = cache.get(w)
    if hit is not None:
        return hit
    q = min(r * rho * 1.01, 0.9999)

    def geo(first_exponent: int) -> float:
        if first_exponent < 0:
            first_exponent = 0
        return q**first_exponent / (1.0 - q)

    i = fld["table"].id_of(w)
    if i is None:
        wl = grp.word_length(w)
        hit = (0.0, geo(wl))
    else:
        wl = int(fld["table"].wl[i])
        tail = float(tails[i]) + geo(order + 1) + geo(2 * (radius + 1) - wl)
        hit = (float(gf[i]), tail)
    cache[w] = hit
    return hit


def triangle_audit(measure: Measure, triples, r_values: Sequence[float],
                   order: int = 48, radius: int | None = None,
                   n_max_spectral: int = 28) -> TriangleAuditReport:
    """Worst signed slack of G(x,y)G(y,z) <= G(e,e)G(x,z) + eps over the
    sampled triples, eps from tail estimates."""
    radius = min(order, 12) * max(1, measure.d_mu) if radius is None else radius
    rho = 1.0 / spectral_radius(measure, n_max_spectral).point
    rs = [float(r) for r in r_values]
    fld = _field(measure, rs, order, radius)
    worst = -math.inf
    violations = 0
    uninformative = 0
    per_r = {}
    e = measure.group.identity
    for r in rs:
        gf = fld["G"][r]
        tails = field_tails(fld, r, ratio_cap=min(0.999, r * rho))
        cache: dict = {}
        r_worst = -math.inf
        r_viol = 0
        for (x, y, z) in triples:
            gxy, _ = _pair_value(measure, fld, gf, tails, cache, x, y, r, rho, order, radius)
            gyz, _ = _pair_value(measure, fld, gf, tails, cache, y, z, r, rho, order, radius)
            gee, tee = _pair_value(measure, fld, gf, tails, cache, e, e, r, rho, order, radius)
            gxz, txz = _pair_value(measure, fld, gf, tails, cache, x, z, r, rho, order, radius)
            eps = gee * txz + tee * gxz + tee * txz
            if math.isinf(eps):
                uninformative += 1
                continue
            slack = gxy * gyz - gee * gxz - eps
            r_worst = max(r_worst, slack)
            if slack > 1e-12:
                r_viol += 1
        per_r[r] = {"worst_slack": r_worst, "violations": r_viol}
        worst = max(worst, r_worst)
        violations += r_viol
    return TriangleAuditReport(
        r_values=tuple(rs),
        triples_checked=len(triples) * len(rs),
        uninformative=uninformative,
        worst_signed_slack=worst,
        violations=violations,
        per_r=per_r,
    )


def ratio_audit(measure: Measure, pairs, r_values: Sequence[float],
                order: int = 48, radius: int | None = None,
                n_max_spectral: int = 28) -> AnconaReport:
    """Ratios G(x,z) / (G(x,y) G(y,z)) for y at every interior vertex of the
    relative geodesic [x, z]; only boundedness diagnostics are asserted.

    The measure is expected to be symmetric, finitely supported and
    admissible for the multiplicativity heuristics to apply.
    """
    grp = measure.group
    radius = min(order, 12) * max(1, measure.d_mu) if radius is None else radius
    rho = 1.0 / spectral_radius(measure, n_max_spectral).point
    rs = [float(r) for r in r_values]
    fld = _field(measure, rs, order, radius)
    rows = []
    lower_viol = 0
    per_r_min: dict = {}
    per_r_max: dict = {}
    e = grp.identity
    for r in rs:
        gf = fld["G"][r]
        tails = field_tails(fld, r, ratio_cap=min(0.999, r * rho))
        cache: dict = {}
        lo, hi = math.inf, -math.inf
        gee, tee = _pair_value(measure, fld, gf, tails, cache, e, e, r, rho, order, radius)
        for (x, z) in pairs:
            path = grp.relative_geodesic(x, z)
            for y in path.vertices[1:-1]:
                gxz, txz = _pair_value(measure, fld, gf, tails, cache, x, z, r, rho, order, radius)
                gxy, _ = _pair_value(measure, fld, gf, tails, cache, x, y, r, rho, order, radius)
                gyz, _ = _pair_value(measure, fld, gf, tails, cache, y, z, r, rho, order, radius)
                if gxy <= 0 or gyz <= 0 or gxz <= 0:
                    continue
                ratio = gxz / (gxy * gyz)
                rows.append(RatioRow(x=x, y=y, z=z, r=r, ratio=ratio))
                lo, hi = min(lo, ratio), max(hi, ratio)
                # lower bound: ratio >= 1/G(e,e) up to truncation slack
                eps = (gee * txz + tee * gxz + tee * txz) / (gxy * gyz)
                if ratio < 1.0 / gee - eps - 1e-12:
                    lower_viol += 1
        per_r_min[r] = lo
        per_r_max[r] = hi
    return AnconaReport(
        r_values=tuple(rs),
        rows=tuple(rows),
        per_r_min=per_r_min,
        per_r_max=per_r_max,
        overall_min=min(per_r_min.values()) if per_r_min else math.inf,
        overall_max=max(per_r_max.values()) if per_r_max else -math.inf,
        lower_bound_violations=lower_viol,
    )
