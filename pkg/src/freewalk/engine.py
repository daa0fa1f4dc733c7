"""Interned Cayley-ball tables and vectorized convolution dynamics.

This is the workhorse behind exact convolution powers, Green evaluations
and first-return kernels.  Elements reachable from e inside a word-radius
cap are interned once into a compact byte-keyed table together with the
support adjacency; every random-walk computation is then a sequence of
bincount scatter-adds over flat weight arrays.

Exactness: integer-valued weights are carried in float64, which is exact
while every value stays below 2^53; callers must check `exact_capacity`
first.  Reductions that can exceed 2^53 (pairing dot products) are done in
Python big ints.
"""

from __future__ import annotations

import operator
from array import array
from typing import Callable, Sequence

import numpy as np

from .groups import FactorElement, FreeProduct, GroupElement, FINITE_CYCLIC

_FLOAT_EXACT_LIMIT = 2.0**53


class BudgetExceededError(RuntimeError):
    """Raised when a computation would exceed its element budget.

    Carries whatever part of the result is already complete.
    """

    def __init__(self, message, partial=None, completed=None):
        super().__init__(message)
        self.partial = partial
        self.completed = completed


def _syllable_pack(factor: int, coords) -> bytes:
    # layout per syllable: coords as int16 little-endian, then the factor byte;
    # the trailing factor byte makes right-to-left parsing unambiguous
    buf = bytearray()
    for c in coords:
        buf += int(c).to_bytes(2, "little", signed=True)
    buf.append(factor)
    return bytes(buf)


class BallTable:
    """All elements reachable from e by support steps within a word-radius cap.

    Attributes
    ----------
    ids : dict bytes -> int
    encs : list of bytes (index = element id; id 0 is the identity)
    wl, rel, maxfac, first_f : per-id int arrays (word length, relative
        length, max factor word length over syllables, first syllable factor)
    nbr : (M, K) int32 array; nbr[i, j] = id of element_i * support_j, or -1
        if the product leaves the cap.
    """

    def __init__(self, group: FreeProduct, support: Sequence[GroupElement], cap: int,
                 max_elements: int | None = None):
        self.group = group
        self.support = tuple(support)
        self.cap = cap
        self._dims = {k: group.factor(k).dim for k in range(1, group.num_factors + 1)}
        self._orders = {
            k: (group.factor(k).order if group.factor(k).kind == FINITE_CYCLIC else 0)
            for k in range(1, group.num_factors + 1)
        }
        self._build(max_elements)
        self._inv_perm: np.ndarray | None = None

    # -- construction -------------------------------------------------------

    def _build(self, max_elements):
        group = self.group
        dims, orders = self._dims, self._orders
        sup_syls = [g.syllables for g in self.support]
        rank_one = all(d == 1 for d in dims.values())
        short_support = all(len(s) <= 1 for s in sup_syls)
        if rank_one and short_support:
            self._build_rank_one(max_elements)
        else:
            self._build_general(max_elements)

    def _build_rank_one(self, max_elements):
        """Hot path: every factor has one coordinate and every support step
        is a single syllable (or the identity)."""
        orders = self._orders
        cap = self.cap
        steps = []  # (factor, delta, pack, word_length) or None for identity
        for g in self.support:
            if not g.syllables:
                steps.append(None)
                continue
            f, (c,) = g.syllables[0]
            o = orders[f]
            swl = min(c % o, o - c % o) if o else abs(c)
            steps.append((f, c, _syllable_pack(f, (c,)), swl))

        pack_cache: dict = {}

        def pack_of(f, m):
            key = (f, m)
            p = pack_cache.get(key)
            if p is None:
                p = _syllable_pack(f, (m,))
                pack_cache[key] = p
            return p

        ids: dict[bytes, int] = {b"": 0}
        encs: list[bytes] = [b""]
        wl = [0]
        rel = [0]
        maxfac = [0]
        first_f = [0]
        nbr = array("i")
        nbr_append = nbr.append
        ids_get = ids.get
        encs_append = encs.append
        from_bytes = int.from_bytes
        i = 0
        while i < len(encs):
            if max_elements is not None and len(encs) > max_elements:
                raise BudgetExceededError(
                    f"ball table exceeded {max_elements} elements", completed=i
                )
            x = encs[i]
            xw = wl[i]
            if x:
                xf = x[-1]
                xc = from_bytes(x[-3:-1], "little", signed=True)
            else:
                xf = 0
                xc = 0
            for st in steps:
                if st is None:
                    nbr_append(i)
                    continue
                f, c, pack, swl = st
                if xf != f:
                    nw = xw + swl
                    if nw > cap:
                        nbr_append(-1)
                        continue
                    ne = x + pack
                    j = ids_get(ne)
                    if j is None:
                        j = len(encs)
                        ids[ne] = j
                        encs_append(ne)
                        wl.append(nw)
                        rel.append(rel[i] + 1)
                        mf = maxfac[i]
                        maxfac.append(mf if mf >= swl else swl)
                        first_f.append(first_f[i] if x else f)
                    nbr_append(j)
                else:
                    o = orders[f]
                    if o:
                        m = (xc + c) % o
                        ml = min(m, o - m)
                        xl = min(xc % o, o - xc % o)
                    else:
                        m = xc + c
                        ml = m if m >= 0 else -m
                        xl = xc if xc >= 0 else -xc
                    pe = x[:-3]
                    if m == 0:
                        nbr_append(ids[pe])
                        continue
                    nw = xw - xl + ml
                    if nw > cap:
                        nbr_append(-1)
                        continue
                    ne = pe + pack_of(f, m)
                    j = ids_get(ne)
                    if j is None:
                        pid = ids[pe]
                        j = len(encs)
                        ids[ne] = j
                        encs_append(ne)
                        wl.append(nw)
                        rel.append(rel[pid] + 1)
                        mf = maxfac[pid]
                        maxfac.append(mf if mf >= ml else ml)
                        first_f.append(first_f[pid] if pe else f)
                    nbr_append(j)
            i += 1
        self._finalize(ids, encs, wl, rel, maxfac, first_f, nbr)

    def _finalize(self, ids, encs, wl, rel, maxfac, first_f, nbr):
        self.ids = ids
        self.encs = encs
        self.size = len(encs)
        self.wl = np.asarray(wl, dtype=np.int32)
        self.rel = np.asarray(rel, dtype=np.int32)
        self.maxfac = np.asarray(maxfac, dtype=np.int32)
        self.first_f = np.asarray(first_f, dtype=np.int8)
        self.nbr = (
            np.frombuffer(nbr, dtype=np.int32)
            .reshape(self.size, len(self.support)).copy()
        )
        self._cols = None

    def _build_general(self, max_elements):
        group = self.group
        dims, orders = self._dims, self._orders
        sup_syls = [g.syllables for g in self.support]
        ids: dict[bytes, int] = {b"": 0}
        encs: list[bytes] = [b""]
        wl = array("i", [0])
        rel = array("i", [0])
        maxfac = array("i", [0])
        first_f = array("b", [0])
        nbr = array("i")
        cap = self.cap

        def syl_len(f, coords):
            o = orders[f]
            if o:
                r = coords[0] % o
                return min(r, o - r)
            return sum(abs(c) for c in coords)

        def intern(enc, w, r, mf, ff):
            j = ids.get(enc)
            if j is None:
                j = len(encs)
                ids[enc] = j
                encs.append(enc)
                wl.append(w)
                rel.append(r)
                maxfac.append(mf)
                first_f.append(ff)
            return j

        def tail_of(enc):
            f = enc[-1]
            d = dims[f]
            coords = tuple(
                int.from_bytes(enc[-1 - 2 * d + 2 * i: -1 - 2 * d + 2 * i + 2],
                               "little", signed=True)
                for i in range(d)
            )
            return f, coords, 1 + 2 * d

        i = 0
        while i < len(encs):
            if max_elements is not None and len(encs) > max_elements:
                raise BudgetExceededError(
                    f"ball table exceeded {max_elements} elements", completed=i
                )
            x = encs[i]
            xw = wl[i]
            for syls in sup_syls:
                cur, cw = x, xw
                cur_id = i
                dead = False
                for (f, coords) in syls:
                    if cur:
                        cf, ccoords, tail = tail_of(cur)
                    else:
                        cf, ccoords, tail = 0, (), 0
                    if cf != f:
                        w = cw + syl_len(f, coords)
                        if w > cap:
                            dead = True
                            break
                        pe = cur
                        ne = cur + _syllable_pack(f, coords)
                        pid = cur_id
                        new_rel = rel[pid] + 1
                        new_mf = max(maxfac[pid], syl_len(f, coords))
                        new_ff = first_f[pid] if pe else f
                    else:
                        o = orders[f]
                        if o:
                            merged = ((ccoords[0] + coords[0]) % o,)
                        else:
                            merged = tuple(a + b for a, b in zip(ccoords, coords))
                        pe = cur[:-tail]
                        pid = ids[pe]
                        if not any(merged):
                            cur, cw, cur_id = pe, wl[pid], pid
                            continue
                        w = cw - syl_len(f, ccoords) + syl_len(f, merged)
                        if w > cap:
                            dead = True
                            break
                        ne = pe + _syllable_pack(f, merged)
                        new_rel = rel[pid] + 1
                        new_mf = max(maxfac[pid], syl_len(f, merged))
                        new_ff = first_f[pid] if pe else f
                    nid = ids.get(ne)
                    if nid is None:
                        nid = intern(ne, w, new_rel, new_mf, new_ff)
                    cur, cw, cur_id = ne, w, nid
                nbr.append(-1 if dead else cur_id)
            i += 1
        self._finalize(ids, encs, wl, rel, maxfac, first_f, nbr)

    def columns(self):
        """Per-support compacted adjacency: (source ids, target ids) with the
        out-of-cap edges dropped, contiguous for the DP inner loop."""
        if self._cols is None:
            cols = []
            for j in range(len(self.support)):
                tgt = self.nbr[:, j]
                ok = tgt >= 0
                src = np.nonzero(ok)[0].astype(np.int64)
                cols.append((src, tgt[ok].astype(np.int64)))
            self._cols = cols
        return self._cols

    # -- element <-> id -------------------------------------------------------

    def encode(self, g: GroupElement) -> bytes:
        buf = bytearray()
        for f, coords in g.syllables:
            buf += _syllable_pack(f, coords)
        return bytes(buf)

    def decode(self, enc: bytes) -> GroupElement:
        syls = []
        pos = len(enc)
        while pos > 0:
            f = enc[pos - 1]
            d = self._dims.get(f)
            if d is None or pos - 1 - 2 * d < 0:
                raise ValueError("corrupt element encoding")
            start = pos - 1 - 2 * d
            coords = tuple(
                int.from_bytes(enc[start + 2 * i: start + 2 * i + 2],
                               "little", signed=True)
                for i in range(d)
            )
            syls.append(FactorElement(f, coords))
            pos = start
        syls.reverse()
        return GroupElement(tuple(syls))

    def id_of(self, g: GroupElement) -> int | None:
        return self.ids.get(self.encode(g))

    def element_of(self, i: int) -> GroupElement:
        return self.decode(self.encs[i])

    def inverse_perm(self) -> np.ndarray:
        """Permutation sending each id to the id of its inverse."""
        if self._inv_perm is None:
            group = self.group
            perm = np.empty(self.size, dtype=np.int32)
            for i, enc in enumerate(self.encs):
                inv = group.inverse(self.decode(enc))
                j = self.ids.get(self.encode(inv))
                perm[i] = -1 if j is None else j
            self._inv_perm = perm
        return self._inv_perm

    def mask_ball(self, m: int, B: int) -> np.ndarray:
        """Membership mask of the relative (m, B)-truncated ball."""
        return (self.rel <= m) & (self.maxfac <= B)

    def subgroup_ids(self, k: int) -> np.ndarray:
        """Ids of table elements lying in the factor subgroup H_k."""
        mask = (self.rel == 0) | ((self.rel == 1) & (self.first_f == k))
        return np.nonzero(mask)[0].astype(np.int32)


# -- DP drivers ----------------------------------------------------------------


def exact_capacity(denominator: int, steps: int) -> bool:
    """True when integerized weights stay float64-exact for this many steps."""
    return float(denominator) ** (steps + 1) < _FLOAT_EXACT_LIMIT


def _step(table: BallTable, w: np.ndarray, col_weights, bound: int | None) -> np.ndarray:
    # the table cap already enforces any bound at least as large
    if bound is not None and bound >= table.cap:
        bound = None
    nw = np.zeros(table.size)
    if bound is None:
        for (src, tgt), cj in zip(table.columns(), col_weights):
            if cj == 0:
                continue
            nw += np.bincount(tgt, weights=w[src] * cj, minlength=table.size)
        return nw
    live = np.nonzero(w)[0]
    wl = table.wl
    for j, cj in enumerate(col_weights):
        if cj == 0:
            continue
        tgt = table.nbr[live, j]
        ok = tgt >= 0
        ok &= wl[np.where(ok, tgt, 0)] <= bound
        t = tgt[ok]
        nw += np.bincount(t, weights=w[live[ok]] * cj, minlength=table.size)
    return nw


def pruned_power_sequence(table: BallTable, int_weights: Sequence[int], n_max: int,
                          d_mu: int, symmetric: bool) -> list[int]:
    """Integer numerators of q_n = mu^{*n}(e), n = 0..n_max, for integerized
    weights (q_n = result[n] / D^n).

    Runs the forward half of the min(t, n_max - t) * d_mu pruned DP and pairs
    the two halves through each split point; exact by the path-splitting
    identity.
    """
    half = (n_max + 1) // 2
    if not exact_capacity(sum(int_weights), half):
        raise OverflowError("weights exceed float64-exact range; use dict fallback")
    w = np.zeros(table.size)
    w[0] = 1.0
    inv = None if symmetric else table.inverse_perm()
    cur_list = [1] + [0] * (table.size - 1)
    dots = {0: 1}
    cols = [float(c) for c in int_weights]
    for t in range(1, half + 1):
        # states reachable in t steps satisfy the bound automatically while
        # t <= n_max - t; only the final odd-split step can actually prune
        bound = None if t <= n_max - t else min(t, n_max - t) * d_mu
        w = _step(table, w, cols, bound=bound)
        prev_list = cur_list
        ws = w if inv is None else np.where(inv >= 0, w[np.maximum(inv, 0)], 0.0)
        cur_list = w.astype(np.int64).tolist()
        side = ws.astype(np.int64).tolist() if inv is not None else cur_list
        if 2 * t - 1 <= n_max:
            dots[2 * t - 1] = sum(map(operator.mul, side, prev_list))
        if 2 * t <= n_max:
            dots[2 * t] = sum(map(operator.mul, side, cur_list))
    return [dots.get(n, 0) for n in range(n_max + 1)]


def float_levels(table: BallTable, weights: Sequence[float], n_steps: int,
                 bound_fn: Callable[[int], int | None] | None = None,
                 on_level: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Run n_steps of the float64 level DP; returns the final level.

    `on_level(t, w_t)` observes every level including t = 0.
    """
    w = np.zeros(table.size)
    w[0] = 1.0
    if on_level is not None:
        on_level(0, w)
    cols = [float(c) for c in weights]
    for t in range(1, n_steps + 1):
        bound = bound_fn(t) if bound_fn is not None else None
        w = _step(table, w, cols, bound)
        if on_level is not None:
            on_level(t, w)
    return w


def green_field(table: BallTable, weights: Sequence[float], order: int,
                r_values: Sequence[float], snapshots: Sequence[int] = ()) -> dict:
    """Accumulate G(e, g | r) = sum_n r^n mu^{*n}(g) over the whole table.

    Returns {"final": {r: array}, "snapshots": {order': {r: array}},
    "e_series": list mu^{*n}(e), "last_terms": {r: [three term arrays]}}
    computed in one DP pass; the e_series gives the (radius-truncated)
    return weights and the last term arrays feed per-element tail estimates.
    """
    rs = list(r_values)
    acc = {r: np.zeros(table.size) for r in rs}
    snaps: dict[int, dict[float, np.ndarray]] = {}
    e_series: list[float] = []
    last_terms: dict[float, list] = {r: [] for r in rs}
    want = set(snapshots)

    def observe(t, w):
        e_series.append(float(w[0]))
        for r in rs:
            acc[r] += (r ** t) * w
            if t >= order - 2:
                last_terms[r].append((r ** t) * w)
        if t in want:
            snaps[t] = {r: acc[r].copy() for r in rs}

    float_levels(table, weights, order, on_level=observe)
    return {"final": acc, "snapshots": snaps, "e_series": e_series,
            "last_terms": last_terms}


def absorbed_profile(table: BallTable, weights: Sequence[float], absorb_ids: np.ndarray,
                     horizon: int) -> tuple[np.ndarray, list[float]]:
    """First-entrance profile into the absorbing id set.

    Runs the walk from e, removing mass that lands on `absorb_ids` at each
    step n >= 1 and recording it.  Returns (profile, escaped) where
    profile[n - 1, i] is the mass absorbed at absorb_ids[i] at time n and
    escaped[t] is the live (non-absorbed) mass after t steps.
    """
    absorb_ids = np.asarray(absorb_ids, dtype=np.int64)
    prof = np.zeros((horizon, len(absorb_ids)))
    live_mass = []
    w = np.zeros(table.size)
    w[0] = 1.0
    cols = [float(c) for c in weights]
    for t in range(1, horizon + 1):
        w = _step(table, w, cols, bound=None)
        prof[t - 1] = w[absorb_ids]
        w[absorb_ids] = 0.0
        live_mass.append(float(w.sum()))
    return prof, live_mass
