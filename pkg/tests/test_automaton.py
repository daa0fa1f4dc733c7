"""Cone types, the relative automaton, P-set refinement, verification."""

import pytest

from freewalk import FactorSpec, free_group, free_product
from freewalk.groups import FINITE_CYCLIC, FREE_ABELIAN, FactorElement
from freewalk.automaton import (
    Bundle,
    canonical_automaton,
    cone_types,
    export_dot,
    pset_transition,
    reduced_automaton,
    verify_structure,
)


@pytest.fixture(scope="module")
def zz():
    return free_group(2)


@pytest.fixture(scope="module")
def z2z3():
    return free_product(
        FactorSpec(FREE_ABELIAN, rank=2), FactorSpec(FINITE_CYCLIC, order=3)
    )


@pytest.fixture(scope="module")
def zzz():
    return free_group(3)


def test_cone_type_count(zz, z2z3, zzz):
    assert len(cone_types(zz, 4, 3, 3)) == 3
    assert len(cone_types(z2z3, 3, 2, 3)) == 3
    assert len(cone_types(zzz, 3, 2, 3)) == 4
    assert len(cone_types(zz, 0, 1, 2)) == 1


def test_identity_type_is_singleton(zz):
    # only the empty word extends by every factor
    types = cone_types(zz, 4, 3, 3)
    identity_types = [t for t in types if t.last_factor == 0]
    assert len(identity_types) == 1
    assert identity_types[0].representative == zz.identity
    assert identity_types[0].extension_factors == (1, 2)


def test_fingerprints_refine_types(zz):
    # elements with equal word-ball fingerprints have equal extension sets
    types = cone_types(zz, 3, 2, 2)
    domain = types[0].domain
    from freewalk.automaton import _extension_factors, _fingerprint

    seen = {}
    for g in zz.enumerate_ball(3, 2):
        fp = _fingerprint(zz, g, domain)
        ext = _extension_factors(zz, g, 2)
        if fp in seen:
            assert seen[fp] == ext
        else:
            seen[fp] = ext
    # and the fingerprint partition is strictly finer than the type partition
    assert len(seen) > len(types)


def test_g0_shape_two_factors(zz):
    auto = reduced_automaton(zz)
    assert len(auto.vertices) == 3
    pairs = {(b.source, b.target) for b in auto.bundles}
    assert len(auto.bundles) == 4
    assert not any(b.target == auto.start for b in auto.bundles)
    # start reaches both factor states; factor states alternate
    targets_from_start = {b.target for b in auto.bundles if b.source == auto.start}
    assert len(targets_from_start) == 2


def test_g0_shape_three_factors(zzz):
    auto = reduced_automaton(zzz, m=3, B=2)
    assert len(auto.vertices) == 4
    from_start = [b for b in auto.bundles if b.source == auto.start]
    others = [b for b in auto.bundles if b.source != auto.start]
    assert len(from_start) == 3 and len(others) == 6


def test_accept_basic(zz):
    auto = reduced_automaton(zz)
    assert auto.accept([])
    a = FactorElement(1, (1,))
    b = FactorElement(2, (1,))
    assert auto.accept([a, b, a])
    assert not auto.accept([a, a])  # same factor twice is not geodesic
    assert not auto.accept([a, FactorElement(1, (-1,))])


def test_language_counts_zz(zz):
    auto = reduced_automaton(zz)
    seqs = list(auto.language(2, 1))
    assert len(seqs) == 13  # 1 + 4 + 8 = ball(2,1)
    assert len(set(seqs)) == 13


def test_language_matches_ball(zz):
    auto = reduced_automaton(zz)
    seqs = list(auto.language(3, 2))
    images = [zz.normalize(s) for s in seqs]
    ball = list(zz.enumerate_ball(3, 2))
    assert len(images) == len(ball)
    assert set(images) == set(ball)


def test_prefix_closure(zz):
    auto = reduced_automaton(zz)
    for seq in auto.language(3, 2):
        for i in range(len(seq)):
            assert auto.accept(seq[:i])


def test_verify_structure_zz(zz):
    auto = reduced_automaton(zz)
    report = verify_structure(auto, 4, 3)
    assert report["ok"], report
    assert report["counts"]["accepted"] == report["counts"]["ball"]


def test_verify_structure_mutated(zz):
    auto = reduced_automaton(zz)
    # adding a same-factor loop breaks the geodesic condition
    bad = Bundle(source=1, target=1, factor=auto.cone_types[
        auto.vertices[1].cone_type].last_factor, predicate=("all",))
    auto2 = reduced_automaton(zz)
    auto2.bundles = auto2.bundles + (bad,)
    from freewalk.automaton import _AllCoords

    auto2._trans[(1, bad.factor)] = {"window": _AllCoords(1), "far": 1}
    report = verify_structure(auto2, 3, 2)
    assert not report["checks"]["geodesic"]
    assert "geodesic" in report["witnesses"]


def test_canonical_equals_reduced_language(zz):
    g0 = reduced_automaton(zz)
    g1 = canonical_automaton(zz)
    l0 = list(g0.language(4, 3))
    l1 = list(g1.language(4, 3))
    assert l0 == l1


def test_canonical_psets_nonempty(zz):
    g1 = canonical_automaton(zz)
    assert any(v.pset for v in g1.vertices)
    assert len(g1.vertices) >= 3
    # start vertex carries the empty offset set
    assert g1.vertices[g1.start].pset == ()


def test_canonical_verify_structure(zz, z2z3):
    for grp in (zz, z2z3):
        g1 = canonical_automaton(grp)
        report = verify_structure(g1, 3, 2)
        assert report["ok"], report


class AliasAlphabet:
    """Test double: letters are named tokens over Z, two tokens can spell
    the same integer.  Ball is the integer interval [-C, C]."""

    def __init__(self, letters, C=2):
        # letters: list of (name, image); order = list position
        self.letters = letters
        self.C = C
        self.ball = list(range(-C, C + 1))
        self.identity = 0

    def letter_keys(self, x):
        return [i for i, (_, img) in enumerate(self.letters) if img == x]

    def mul(self, a, b):
        return a + b

    def inv(self, a):
        return -a


def test_pset_alias_alphabet_prunes_larger_spelling():
    # u and w both spell 1; u is smaller, so a sequence starting with w dies
    alpha = AliasAlphabet([("u", 1), ("w", 1), ("x2", 2)])
    killed, _ = pset_transition(alpha, frozenset(), 1, 1)  # letter w has key 1
    assert killed
    killed, pset = pset_transition(alpha, frozenset(), 1, 0)  # letter u, key 0
    assert not killed and not pset


def test_pset_alias_alphabet_nonempty_pset():
    alpha = AliasAlphabet([("u", 1), ("w", 1), ("x2", 2)])
    killed, pset = pset_transition(alpha, frozenset(), 2, 2)  # letter x2
    assert not killed
    assert pset == frozenset({-1})  # u (and w) land one short of x2
    # composing: next letter x2 from offset -1 can reach offset -1 again
    killed, pset2 = pset_transition(alpha, pset, 2, 2)
    assert not killed
    assert -1 in pset2


def test_pset_alias_kill_via_offset():
    # offset -1 plus letter u spells the current prefix exactly: kill
    alpha = AliasAlphabet([("u", 1), ("w", 1), ("x2", 2)])
    killed, _ = pset_transition(alpha, frozenset({-1}), 1, 0)
    assert killed


def test_export_dot(zz):
    auto = reduced_automaton(zz)
    text = export_dot(auto)
    assert text.count("doublecircle") == 1
    assert text.count("->") == 4
    assert export_dot(auto) == text  # byte-identical rerun
    g1 = canonical_automaton(zz)
    text1 = export_dot(g1)
    assert "P=" in text1


def test_dot_stable_across_builds(zz):
    a = export_dot(reduced_automaton(zz))
    b = export_dot(reduced_automaton(free_group(2)))
    assert a == b
