"""Green functions, their derivatives, spatial sums, and identity checks.

Everything here is a truncated power series in r driven by the convolution
engine: G(x, y | r) = sum_n r^n mu^{*n}(x^-1 y) summed to a stated order
with states pruned beyond a stated word radius.  Series have non-negative
terms, so every value is monotone non-decreasing in the order, the radius
and the truncation parameters, and converges to the true value from below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import engine
from .groups import GroupElement
from .measures import Measure, return_sequence

# default word-radius for pruned series: min(order, this) * d_mu.  Callers
# with tight residual targets (the acceptance budgets) pass radius explicitly.
DEFAULT_RADIUS_FACTOR = 10


@dataclass(frozen=True)
class SeriesValue:
    """A truncated series evaluation with its truncation certificate."""

    value: float
    terms_used: int
    tail_estimate: float
    last_term: float
    term_ratio: float
    reliable: bool
    diverged: bool


@dataclass(frozen=True)
class SpectralRadiusEstimate:
    """Certified Fekete bound plus a ratio-extrapolation point estimate."""

    certified_upper: float
    point: float
    rho_point: float
    diagnostics: tuple[float, ...]
    ratios: tuple[float, ...]
    n_max: int
    symmetric: bool


@dataclass(frozen=True)
class SphereSumTable:
    r: float
    values: tuple[float, ...]
    truncation_B: int
    order: int
    radius: int


@dataclass(frozen=True)
class IdentityReport:
    left: float
    right: float
    residual: float
    r: float
    truncation: tuple[int, int]
    order: int
    radius: int


# -- shared field machinery ------------------------------------------------------


def _default_radius(measure: Measure, order: int) -> int:
    return min(order, DEFAULT_RADIUS_FACTOR) * max(1, measure.d_mu)


def _weights(measure: Measure) -> list[float]:
    return [float(w) for w in measure.entries.values()]


def _field(measure: Measure, r_values: Sequence[float], order: int, radius: int) -> dict:
    """G(e, . | r) arrays over the ball table, one DP pass for all r."""
    key = ("field", tuple(round(float(r), 15) for r in r_values), order, radius)
    cache = measure._q_cache  # reuse the measure-level cache dict
    hit = cache.get(key)
    if hit is not None:
        return hit
    table = measure.table(radius)
    out = engine.green_field(table, _weights(measure), order, [float(r) for r in r_values])
    result = {"table": table, "G": out["final"], "e_series": out["e_series"],
              "last_terms": out["last_terms"]}
    # fields hold several full-table float arrays; keep at most two alive
    stale = [k for k in cache if isinstance(k, tuple) and k and k[0] == "field"]
    for k in stale[:-1]:
        del cache[k]
    cache[key] = result
    return result


def field_tails(field: dict, r: float, ratio_cap: float | None = None) -> np.ndarray:
    """Per-element geometric tail estimates for G(e, . | r).

    The empirical two-step term ratio (robust to period-2 walks) is capped
    at `ratio_cap` and at 0.999; elements whose series has not produced a
    term yet get an infinite (uninformative) tail.
    """
    terms = field["last_terms"][r]
    if len(terms) < 3:
        return np.full_like(field["G"][r], np.inf)
    t0, t1, t2 = terms[-3], terms[-2], terms[-1]
    fallback = 0.999 if ratio_cap is None else min(ratio_cap, 0.999)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(t0 > 0, np.sqrt(t2 / np.where(t0 > 0, t0, 1.0)), fallback)
    if ratio_cap is not None:
        ratio = np.minimum(ratio, ratio_cap)
    ratio = np.minimum(ratio, 0.999)
    last = np.maximum(t2, t1)
    tail = last * ratio / (1.0 - ratio)
    # never-seen elements: no information at this truncation
    seen = field["G"][r] > 0
    tail = np.where(seen, tail, np.inf)
    return tail


def _g_backward(measure: Measure, field: dict, r: float) -> np.ndarray:
    """G(., e | r) over the table: the forward array for symmetric walks,
    otherwise the forward array composed with inversion."""
    gf = field["G"][r]
    if measure.is_symmetric():
        return gf
    inv = field["table"].inverse_perm()
    return np.where(inv >= 0, gf[np.maximum(inv, 0)], 0.0)


def pruned_return_weights(measure: Measure, order: int, radius: int) -> list[float]:
    """Radius-pruned float return weights mu^{*n}(e), n = 0..order.

    Exact while order * d_mu <= radius; beyond that a lower bound missing
    only the paths that exit the radius.
    """
    key = ("qf", order, radius)
    hit = measure._q_cache.get(key)
    if hit is not None:
        return hit
    table = measure.table(radius)
    out: list[float] = []
    engine.float_levels(
        table, _weights(measure), order,
        bound_fn=lambda t: radius, on_level=lambda t, w: out.append(float(w[0])),
    )
    measure._q_cache[key] = out
    return out


def _series_stats(terms: list[float], r: float, ratio_cap: float | None) -> SeriesValue:
    value = math.fsum(terms)
    nz = [t for t in terms if t > 0]
    last = nz[-1] if nz else 0.0
    ratio = 0.0
    if len(nz) >= 3:
        # geometric-ratio estimate from the last few nonzero terms, robust to
        # period-2 support
        ratio = (nz[-1] / nz[-3]) ** 0.5 if nz[-3] > 0 else 0.0
    elif len(nz) == 2:
        ratio = nz[-1] / nz[-2]
    if ratio_cap is not None:
        ratio = min(ratio, ratio_cap)
    diverged = ratio > 1.0
    reliable = 0.0 <= ratio <= 0.999 and not diverged
    tail = last * ratio / (1.0 - ratio) if reliable and ratio < 1.0 else math.inf
    return SeriesValue(
        value=value,
        terms_used=len(terms),
        tail_estimate=tail if reliable else math.inf,
        last_term=last,
        term_ratio=ratio,
        reliable=reliable,
        diverged=diverged,
    )


def _target_series(measure: Measure, targets: Sequence[GroupElement], order: int,
                   radius: int) -> dict[GroupElement, list[float]]:
    """Raw coefficient streams mu^{*n}(w) for several targets in one DP."""
    table = measure.table(radius)
    tids = []
    for w in targets:
        i = table.id_of(w)
        tids.append(-1 if i is None else i)
    rows: dict[int, list[float]] = {i: [] for i in set(tids) if i >= 0}

    def observe(t, wvec):
        for i in rows:
            rows[i].append(float(wvec[i]))

    engine.float_levels(table, _weights(measure), order,
                        bound_fn=lambda t: radius, on_level=observe)
    out = {}
    for w, i in zip(targets, tids):
        out[w] = rows[i] if i >= 0 else [0.0] * (order + 1)
    return out


# -- Green values ------------------------------------------------------------------


def green_value(measure: Measure, x: GroupElement, y: GroupElement, r: float,
                order: int = 48, radius: int | None = None,
                ratio_cap: float | None = None) -> SeriesValue:
    """Partial sum of G(x, y | r) to the stated order.

    States beyond `radius` (word metric) are pruned; the result is a lower
    bound converging to G as both grow.  G(x, y | r) = G(e, x^-1 y | r) by
    left invariance.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    if order < 1:
        raise ValueError("order must be >= 1")
    radius = _default_radius(measure, order) if radius is None else radius
    grp = measure.group
    w = grp.multiply(grp.inverse(x), y)
    coeffs = _target_series(measure, [w], order, radius)[w]
    terms = [c * r**n for n, c in enumerate(coeffs)]
    return _series_stats(terms, r, ratio_cap)


def green_derivative(measure: Measure, x: GroupElement, y: GroupElement, r: float,
                     k: int, order: int = 48, radius: int | None = None) -> SeriesValue:
    """Term-wise k-th derivative: sum_{n>=k} n(n-1)...(n-k+1) mu^{*n} r^{n-k}."""
    if k < 1:
        raise ValueError("k must be >= 1")
    radius = _default_radius(measure, order) if radius is None else radius
    grp = measure.group
    w = grp.multiply(grp.inverse(x), y)
    coeffs = _target_series(measure, [w], order, radius)[w]
    terms = []
    for n in range(k, order + 1):
        fall = 1.0
        for i in range(k):
            fall *= n - i
        terms.append(fall * coeffs[n] * r ** (n - k))
    return _series_stats(terms, r, None)


def f_ratio(measure: Measure, x: GroupElement, y: GroupElement, r: float,
            order: int = 48, radius: int | None = None) -> float:
    """F(x, y | r) = G(x, y | r) / G(e, e | r)."""
    radius = _default_radius(measure, order) if radius is None else radius
    grp = measure.group
    w = grp.multiply(grp.inverse(x), y)
    series = _target_series(measure, [w, grp.identity], order, radius)
    num = math.fsum(c * r**n for n, c in enumerate(series[w]))
    den = math.fsum(c * r**n for n, c in enumerate(series[grp.identity]))
    return num / den


def green_metrics(measure: Measure, x: GroupElement, y: GroupElement, r: float,
                  order: int = 48, radius: int | None = None) -> tuple[float, float]:
    """(d_G, symmetrized d_G): -log F one way, minus log F both ways."""
    fxy = f_ratio(measure, x, y, r, order, radius)
    fyx = f_ratio(measure, y, x, r, order, radius)
    if fxy == 0 or fyx == 0:
        return math.inf, math.inf
    return -math.log(fxy), -math.log(fxy) - math.log(fyx)


# -- spectral radius -----------------------------------------------------------------


def _ratio_extrapolate(logs: list[tuple[int, float]]) -> float:
    """2 log rho from log q_{2n}: eliminate the unknown n^-alpha factor with
    consecutive log-differences, then two n^-2 Richardson sweeps."""
    d = [(n2, y2 - y1) for (n1, y1), (n2, y2) in zip(logs, logs[1:])]
    z = []
    for (m1, d1), (m2, d2) in zip(d, d[1:]):
        g1 = math.log(m1 / (m1 - 1))
        g2 = math.log(m2 / (m2 - 1))
        z.append((m2, (d1 * g2 - d2 * g1) / (g2 - g1)))
    col = z
    for _ in range(2):
        if len(col) < 2:
            break
        col = [
            (n2, (n2**2 * x2 - n1**2 * x1) / (n2**2 - n1**2))
            for (n1, x1), (n2, x2) in zip(col, col[1:])
        ]
    return col[-1][1]


def spectral_radius(measure: Measure, n_max: int = 28) -> SpectralRadiusEstimate:
    """Fekete-certified upper bound on R_mu and a ratio-extrapolation point
    estimate of 1/R_mu (the latter requires a symmetric measure).

    The certified bound is min_n q_{2n}^{-1/2n}: by supermultiplicativity
    q_{2(n+m)} >= q_{2n} q_{2m}, so q_{2n}^{1/2n} increases to 1/R_mu.
    """
    key = ("sre", n_max)
    hit = measure._q_cache.get(key)
    if hit is not None:
        return hit
    q = return_sequence(measure, n_max).values
    evens = [(n, float(q[2 * n])) for n in range(1, n_max // 2 + 1)]
    positive = [(n, v) for n, v in evens if v > 0]
    if not positive:
        raise ValueError("no positive even return probabilities up to n_max")
    diagnostics = tuple(v ** (1.0 / (2 * n)) for n, v in positive)
    certified = min(v ** (-1.0 / (2 * n)) for n, v in positive)
    ratios = tuple(
        float(q[2 * n + 2] / q[2 * n]) for n, _ in positive[:-1] if q[2 * n] > 0
    )
    symmetric = measure.is_symmetric()
    if symmetric and len(positive) >= 4:
        logs = [(n, math.log(v)) for n, v in positive]
        rho = math.exp(_ratio_extrapolate(logs) / 2.0)
    else:
        rho = diagnostics[-1]
    est = SpectralRadiusEstimate(
        certified_upper=certified,
        point=1.0 / rho,
        rho_point=rho,
        diagnostics=diagnostics,
        ratios=ratios,
        n_max=n_max,
        symmetric=symmetric,
    )
    measure._q_cache[key] = est
    return est


def resolve_r(measure: Measure, fraction: float, n_max: int = 28) -> float:
    """r expressed as a fraction of the point estimate R-hat."""
    return fraction * spectral_radius(measure, n_max).point


# -- spatial sums ---------------------------------------------------------------------


def _ball_ids(measure: Measure, m: int, B: int, radius: int):
    """Ids (and elements) of the relative (m, B)-ball inside the table."""
    table = measure.table(radius)
    elems = [g for g in measure.group.enumerate_ball(m, B)]
    ids = np.array(
        [i if (i := table.id_of(g)) is not None else -1 for g in elems], dtype=np.int64
    )
    keep = ids >= 0
    return table, [g for g, k in zip(elems, keep) if k], ids[keep]


def _pair_matrix_ids(measure: Measure, m: int, B: int, radius: int):
    """Table ids of gamma^-1 gamma' over the (m, B)-ball, cached per budgets.

    Products are merged at the raw syllable level and looked up by their
    byte encoding; the transpose entry reuses the merge through the inverse
    encoding (G is evaluated at the inverse there, which costs nothing for
    symmetric measures and one permutation otherwise).
    """
    key = ("pairids", m, B, radius)
    hit = measure._q_cache.get(key)
    if hit is not None:
        return hit
    grp = measure.group
    table, elems, ids = _ball_ids(measure, m, B, radius)
    n = len(elems)
    pair = np.full((n, n), -1, dtype=np.int64)
    factor_add = grp.factor_add
    lookup = table.ids
    from .engine import _syllable_pack

    # the ball is prefix-closed in enumeration order, so each product
    # gamma_i^-1 gamma_j extends the product at gamma_j's parent by one
    # syllable; products are threaded as (enc, last_factor, last_coords,
    # parent_node) chains for O(1) extension and popping
    index_of = {g.syllables: j for j, g in enumerate(elems)}
    parent = [0] * n
    last_syl = [None] * n
    for j, g in enumerate(elems):
        if g.syllables:
            parent[j] = index_of[g.syllables[:-1]]
            last_syl[j] = g.syllables[-1]

    for i in range(n):
        # root node: the chain of prefixes of gamma_i^-1
        node = (b"", 0, (), None)
        for f, c in reversed(elems[i].syllables):
            neg = grp.factor_neg(f, c)
            node = (node[0] + _syllable_pack(f, neg), f, neg, node)
        nodes = [None] * n
        nodes[0] = node
        row = pair[i]
        t = lookup.get(node[0])
        if t is not None:
            row[0] = t
        for j in range(1, n):
            f, c = last_syl[j]
            p = nodes[parent[j]]
            if p[1] != f:
                child = (p[0] + _syllable_pack(f, c), f, c, p)
            else:
                merged = factor_add(f, p[2], c)
                gp = p[3]
                if any(merged):
                    child = (gp[0] + _syllable_pack(f, merged), f, merged, gp)
                else:
                    child = gp
            nodes[j] = child
            t = lookup.get(child[0])
            if t is not None:
                row[j] = t
    result = (table, elems, ids, pair)
    measure._q_cache[key] = result
    return result


def spatial_sum(measure: Measure, k: int, r: float, truncation: tuple[int, int],
                order: int = 48, radius: int | None = None,
                basepoints: tuple[GroupElement, GroupElement] | None = None) -> float:
    """Truncated I^(k)(r): the k-fold chain sum of Green factors over the
    relative (m, B)-ball.

    Computed as v^T M^(k-1) u with v = G(x, .), u = G(., y) and
    M[g, g'] = G(e, g^-1 g'); monotone non-decreasing in every budget.
    Basepoints default to (e, e) and are the values used everywhere
    downstream; other basepoints are accepted but must stay within the
    table radius of the ball.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    m, B = truncation
    radius = _default_radius(measure, order) if radius is None else radius
    fld = _field(measure, [r], order, radius)
    gf = fld["G"][r]
    gb = _g_backward(measure, fld, r)
    grp = measure.group
    if basepoints is not None and basepoints != (grp.identity, grp.identity):
        # v_g = G(x, g) = G(e, x^-1 g) and u_g = G(g, y) = G(e, g^-1 y)
        x, y = basepoints
        table, elems, ids, pair = _pair_matrix_ids(measure, m, B, radius)
        xinv = grp.inverse(x)
        v = np.array([
            gf[i] if (i := table.id_of(grp.multiply(xinv, g))) is not None else 0.0
            for g in elems
        ])
        u = np.array([
            gf[i] if (i := table.id_of(grp.multiply(grp.inverse(g), y))) is not None
            else 0.0
            for g in elems
        ])
    elif k == 1:
        mask = fld["table"].mask_ball(m, B)
        return float((gf[mask] * gb[mask]).sum())
    else:
        table, elems, ids, pair = _pair_matrix_ids(measure, m, B, radius)
        v = gf[ids]
        u = gb[ids]
    if k == 1:
        return float(np.dot(v, u))
    M = np.where(pair >= 0, gf[np.maximum(pair, 0)], 0.0)
    vec = u
    for _ in range(k - 1):
        vec = M @ vec
    return float(np.dot(v, vec))


def sphere_sums(measure: Measure, r: float, M: int, B: int,
                order: int = 48, radius: int | None = None) -> SphereSumTable:
    """u_m = sum over the truncated relative sphere of H(e, g | r)
    = G(e, g | r) G(g, e | r), m = 0..M."""
    radius = _default_radius(measure, order) if radius is None else radius
    fld = _field(measure, [r], order, radius)
    table = fld["table"]
    gf = fld["G"][r]
    gb = _g_backward(measure, fld, r)
    prod = gf * gb
    vals = []
    for m in range(M + 1):
        mask = (table.rel == m) & (table.maxfac <= B)
        vals.append(float(prod[mask].sum()))
    return SphereSumTable(r=r, values=tuple(vals), truncation_B=B,
                          order=order, radius=radius)


# -- identity checks --------------------------------------------------------------------


def derivative_identity_residual(measure: Measure, r: float, truncation: tuple[int, int],
                                 order: int, radius: int | None = None) -> IdentityReport:
    """Residual of d/dr(r G(e,e|r)) = sum_g G(e,g|r) G(g,e|r).

    Left side from the exact return sequence (sum (n+1) q_n r^n to the
    order), right side as the truncated spatial sum; both converge to the
    same value, so the residual shrinks as the budgets grow.
    """
    m, B = truncation
    radius = _default_radius(measure, order) if radius is None else radius
    q = pruned_return_weights(measure, order, radius)
    left = math.fsum((n + 1) * q[n] * r**n for n in range(order + 1))
    fld = _field(measure, [r], order, radius)
    table = fld["table"]
    gf = fld["G"][r]
    gb = _g_backward(measure, fld, r)
    mask = table.mask_ball(m, B)
    right = float((gf[mask] * gb[mask]).sum())
    return IdentityReport(left=left, right=right, residual=abs(left - right),
                          r=r, truncation=truncation, order=order, radius=radius)


def fk_coefficients(k: int) -> list[int]:
    """Coefficients f_{j,k} of the iterated derivative expansion
    F_k = sum_j f_{j,k} r^{k+j-1} G^(j), from the recursion
    f_{j,k+1} = f_{j-1,k} + (k+j+1) f_{j,k} with f_{0,k} = k!."""
    if k < 1:
        raise ValueError("k must be >= 1")
    coeffs = [1, 1]  # k = 1: F_1 = G + r G'
    kk = 1
    while kk < k:
        nxt = [0] * (kk + 2)
        nxt[0] = math.factorial(kk + 1)
        nxt[kk + 1] = 1
        for j in range(1, kk + 1):
            nxt[j] = coeffs[j - 1] + (kk + j + 1) * coeffs[j]
        coeffs = nxt
        kk += 1
    return coeffs


def fk_identity_residual(measure: Measure, k: int, r: float, truncation: tuple[int, int],
                         order: int = 48, radius: int | None = None) -> IdentityReport:
    """Residual of F_k(r) = k! r^(k-1) I^(k)(r) with F_k expanded through
    the f_{j,k} coefficient scheme over derivatives of G(e,e|r)."""
    if k < 2:
        raise ValueError("the identity check starts at k = 2")
    radius = _default_radius(measure, order) if radius is None else radius
    q = pruned_return_weights(measure, order, radius)
    coeffs = fk_coefficients(k)
    left = 0.0
    for j, f_jk in enumerate(coeffs):
        deriv = math.fsum(
            math.prod(range(n - j + 1, n + 1)) * q[n] * r ** (n - j)
            for n in range(j, order + 1)
        )
        left += f_jk * r ** (k + j - 1) * deriv
    right = math.factorial(k) * r ** (k - 1) * spatial_sum(
        measure, k, r, truncation, order, radius
    )
    return IdentityReport(left=left, right=right, residual=abs(left - right),
                          r=r, truncation=truncation, order=order, radius=radius)
