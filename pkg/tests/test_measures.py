"""Measures, validation, and the exact convolution engine."""

import itertools
from fractions import Fraction

import pytest

from freewalk import (
    BudgetExceededError,
    Measure,
    convolve,
    distribution,
    free_group,
    lazy_walk,
    measure_from_pairs,
    return_sequence,
    simple_walk,
    validate,
)
from freewalk.measures import _dict_power_sequence


@pytest.fixture(scope="module")
def zz():
    return free_group(2)


@pytest.fixture(scope="module")
def walk(zz):
    return simple_walk(zz)


@pytest.fixture(scope="module")
def lazy(zz):
    return lazy_walk(zz)


def brute_force_returns(measure, n_max):
    """Independent oracle: enumerate all support sequences of length n."""
    grp = measure.group
    sup = list(measure.entries.items())
    qs = [Fraction(1)]
    for n in range(1, n_max + 1):
        total = Fraction(0)
        for combo in itertools.product(sup, repeat=n):
            g = grp.identity
            w = Fraction(1)
            for elem, weight in combo:
                g = grp.multiply(g, elem)
                w *= weight
            if g == grp.identity:
                total += w
        qs.append(total)
    return qs


def test_measure_validation(zz):
    with pytest.raises(ValueError):
        Measure(zz, {zz.identity: Fraction(1, 2)})
    with pytest.raises(ValueError):
        Measure(zz, {zz.identity: Fraction(-1), zz.gen("a"): Fraction(2)})
    m = measure_from_pairs(zz, [("1:(1)", "1/2"), ("1:(-1)", "1/2")])
    assert m.d_mu == 1 and m.is_symmetric()


def test_simple_walk_shape(walk, zz):
    assert len(walk.entries) == 4
    assert all(w == Fraction(1, 4) for w in walk.entries.values())
    assert walk.weight(zz.gen("b", -1)) == Fraction(1, 4)


def test_validate_simple_periodic(walk):
    rep = validate(walk, depth=4)
    assert rep.symmetric
    assert not rep.aperiodic and rep.period == 2
    assert rep.support_radius == 1
    assert rep.admissible_to_depth == 4


def test_validate_lazy_aperiodic(lazy):
    rep = validate(lazy, depth=3)
    assert rep.symmetric and rep.aperiodic and rep.period == 1


def test_validate_subgroup_support(zz):
    m = measure_from_pairs(zz, [("1:(1)", "1/2"), ("1:(-1)", "1/2")])
    rep = validate(m, depth=3)
    assert rep.admissible_to_depth == 0


def test_convolve_identity_and_mass(zz, walk):
    delta = Measure(zz, {zz.identity: Fraction(1)})
    conv = convolve(delta, walk)
    assert conv.entries == walk.entries
    twice = convolve(walk, walk)
    assert sum(twice.entries.values()) == 1
    assert twice.weight(zz.identity) == Fraction(1, 4)
    assert twice.weight(zz.element([(1, 2)])) == Fraction(1, 16)


def test_convolve_mode_mismatch(zz, walk):
    f = walk.as_float()
    with pytest.raises(ValueError):
        convolve(walk, f)
    mixed = convolve(walk, f, allow_cast=True)
    assert mixed.mode == "float"


def test_return_sequence_exact_values(walk):
    q = return_sequence(walk, 8).values
    assert q[0] == 1
    assert q[2] == Fraction(1, 4)
    assert q[4] == Fraction(7, 64)
    assert all(q[n] == 0 for n in (1, 3, 5, 7))


def test_return_sequence_matches_brute_force(walk):
    q = return_sequence(walk, 8).values
    oracle = brute_force_returns(walk, 8)
    assert list(q[:9]) == oracle


def test_return_sequence_lazy_matches_brute_force(lazy):
    q = return_sequence(lazy, 5).values
    oracle = brute_force_returns(lazy, 5)
    assert list(q[:6]) == oracle


def test_return_sequence_matches_dict_fallback(lazy):
    q = return_sequence(lazy, 8).values
    fallback = _dict_power_sequence(lazy, 8)
    assert list(q) == fallback


def test_delta_walk_never_returns(zz):
    m = Measure(zz, {zz.gen("a"): Fraction(1)})
    q = return_sequence(m, 6).values
    assert q[0] == 1 and all(v == 0 for v in q[1:])


def test_supermultiplicativity(lazy):
    q = return_sequence(lazy, 10).values
    for n in range(11):
        for m in range(11 - n):
            assert q[n + m] >= q[n] * q[m]


def test_symmetry_propagation(zz, walk):
    two = convolve(walk, walk)
    for g, w in two.entries.items():
        assert two.weight(zz.inverse(g)) == w


def test_distribution(zz, walk):
    d0 = distribution(walk, 0)
    assert d0 == {zz.identity: Fraction(1)}
    d2 = distribution(walk, 2)
    assert d2[zz.identity] == Fraction(1, 4)
    length2 = [g for g in d2 if zz.relative_length(g) >= 1]
    assert len(length2) == 12
    assert all(d2[g] == Fraction(1, 16) for g in length2)
    pruned = distribution(walk, 2, prune_radius=0)
    assert pruned == {zz.identity: Fraction(1, 4)}


def test_distribution_float_close(zz, walk):
    exact = distribution(walk, 4)
    approx = distribution(walk.as_float(), 4)
    assert set(exact) == set(approx)
    for g, w in exact.items():
        assert abs(float(w) - approx[g]) < 1e-14


def test_float_return_sequence_close(lazy):
    qx = return_sequence(lazy, 10).values
    qf = return_sequence(lazy.as_float(), 10).values
    for a, b in zip(qx, qf):
        assert abs(float(a) - b) < 1e-13


def test_budget_error(zz, walk):
    with pytest.raises(BudgetExceededError):
        fresh = simple_walk(zz)
        fresh.table(8, max_elements=50)


def test_return_sequence_determinism(zz):
    a = return_sequence(simple_walk(zz), 12).values
    b = return_sequence(simple_walk(zz), 12).values
    assert a == b


def test_float_mode_determinism(zz):
    a = return_sequence(simple_walk(zz).as_float(), 12).values
    b = return_sequence(simple_walk(zz).as_float(), 12).values
    for x, y in zip(a, b):
        assert abs(x - y) <= 1e-13 * max(abs(x), 1e-300)


def test_asymmetric_return_sequence_matches_brute_force(zz):
    # exercises the inverse-permutation pairing path
    m = measure_from_pairs(zz, [("1:(1)", "1/2"), ("1:(-1)", "1/4"), ("2:(1)", "1/4")])
    assert not m.is_symmetric()
    q = return_sequence(m, 6).values
    oracle = brute_force_returns(m, 6)
    assert list(q[:7]) == oracle
