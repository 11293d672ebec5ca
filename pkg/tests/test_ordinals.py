import itertools

import pytest
from hypothesis import given, settings, strategies as st

from ordbench.errors import IllFormed, OrdSyntaxError
from ordbench.ordinals import (
    FULL,
    I,
    K,
    ONE,
    ORDER_LAW_ALPHABET,
    ZERO,
    Alphabet,
    Cmp,
    KernelCfg,
    Phi,
    PsiI,
    PsiR,
    RegSuc,
    Sum,
    W,
    add,
    cmp,
    enum_by_size,
    enum_terms,
    is_canonical,
    nat,
    normalize,
    nsum,
    omega_tower,
    parse,
    size,
    subterms,
    to_text,
    veblen,
    wexp,
)

I_PLUS_1 = Sum((I, ONE))


# ------------------------------------------------------------ oracle
# Ordinals below epsilon_0 as nested tuples: the descending tuple of CNF
# exponents.  Python's tuple order is then exactly the ordinal order.

def cnf(t):
    if t == ZERO:
        return ()
    if isinstance(t, W):
        return (cnf(t.exp),)
    if isinstance(t, Sum):
        out = ()
        for p in t.parts:
            out = cnf_add(out, cnf(p))
        return out
    raise ValueError("outside the epsilon_0 fragment")


def cnf_add(x, y):
    if not y:
        return x
    head = y[0]
    keep = tuple(e for e in x if e >= head)
    return keep + y


def cnf_terms(max_size):
    """Raw Zero/W/Sum trees up to ``max_size`` nodes, unnormalized."""
    by = {1: [ZERO]}
    for s in range(2, max_size + 1):
        out = [W(e) for e in by[s - 1]]
        for left in range(1, s):
            for a in by.get(left, []):
                for b in by.get(s - left, []):
                    out.append(Sum((a, b)))
        by[s] = out
    return [t for v in by.values() for t in v]


ORACLE_TERMS = cnf_terms(5)


# ------------------------------------------------------------ normalize

def test_normalize_epsilon_atom():
    assert normalize(W(K)) == K


def test_normalize_flattens_naturals():
    assert normalize(Sum((ONE, Sum((ONE, ONE))))) == Sum((ONE, ONE, ONE))


def test_normalize_left_absorption():
    assert cmp(ONE, K) is Cmp.LT
    assert normalize(Sum((ONE, K))) == K


@pytest.mark.parametrize("raw", ORACLE_TERMS[:400])
def test_normalize_agrees_with_cnf_oracle(raw):
    t = normalize(raw)
    assert is_canonical(t)
    assert cnf(t) == cnf(raw)


# ------------------------------------------------------------ cmp

def test_cmp_basics():
    assert cmp(K, RegSuc(K)) is Cmp.LT
    assert cmp(PsiR(RegSuc(K), ZERO), RegSuc(K)) is Cmp.LT
    assert cmp(PsiI(ZERO), RegSuc(K)) is Cmp.GT
    for t in (ZERO, K, I, PsiI(ZERO)):
        assert cmp(t, t) is Cmp.EQ


def test_cmp_matches_cnf_oracle_exhaustively():
    terms = sorted({normalize(t) for t in ORACLE_TERMS}, key=cnf)
    for s, t in itertools.product(terms, repeat=2):
        expect = (cnf(s) > cnf(t)) - (cnf(s) < cnf(t))
        assert cmp(s, t).value == expect, (to_text(s), to_text(t))


# ------------------------------------------------------------ arithmetic

def test_add_identities_and_absorption():
    for t in (ZERO, K, I, PsiI(ZERO), nat(3)):
        assert add(t, ZERO) == t
        assert add(ZERO, t) == t
    assert cmp(ONE, I) is Cmp.LT
    assert add(ONE, I) == I


def test_nsum_merge():
    assert nsum(Sum((K, ONE)), ONE) == Sum((K, ONE, ONE))
    assert nsum(K, ZERO) == K


def test_nsum_against_cnf_merge_oracle():
    terms = sorted({normalize(t) for t in ORACLE_TERMS}, key=cnf)[:60]
    for s, t in itertools.product(terms, repeat=2):
        merged = tuple(sorted(cnf(s) + cnf(t), reverse=True))
        assert cnf(nsum(s, t)) == merged
        assert nsum(s, t) == nsum(t, s)


def test_add_against_cnf_oracle():
    terms = sorted({normalize(t) for t in ORACLE_TERMS}, key=cnf)[:60]
    for s, t in itertools.product(terms, repeat=2):
        assert cnf(add(s, t)) == cnf_add(cnf(s), cnf(t))


def test_wexp():
    assert wexp(ZERO) == ONE
    assert wexp(I) == I
    assert wexp(I_PLUS_1) == W(I_PLUS_1)
    assert cmp(wexp(I_PLUS_1), I) is Cmp.GT


def test_veblen():
    assert veblen(ZERO, ZERO) == ONE
    assert veblen(ONE, ZERO) == Phi(ONE, ZERO)
    for b in (ZERO, ONE, nat(2), W(ONE)):
        assert veblen(ZERO, b) == wexp(b)
    # fixed points are absorbed
    e0 = veblen(ONE, ZERO)
    assert veblen(ZERO, e0) == e0
    assert veblen(ONE, veblen(nat(2), ZERO)) == veblen(nat(2), ZERO)
    assert cmp(veblen(ONE, ONE), e0) is Cmp.GT


def test_veblen_fixed_point_laws_on_small_values():
    small = [ZERO, ONE, nat(2), W(ONE)]
    for a, b in itertools.product(small, repeat=2):
        v = veblen(a, b)
        for a2 in small:
            if cmp(a2, a) is Cmp.LT:
                assert veblen(a2, v) == v


def test_omega_tower():
    assert omega_tower(0, I) == I
    assert omega_tower(1, I_PLUS_1) == W(I_PLUS_1)
    two = omega_tower(2, I_PLUS_1)
    assert two == W(W(I_PLUS_1))
    assert cmp(two, omega_tower(1, I_PLUS_1)) is Cmp.GT


# ------------------------------------------------------------ text

def test_parse_and_print():
    assert parse("K^+") == RegSuc(K)
    assert to_text(PsiI(ZERO)) == "Psi(I,0)"
    assert parse("w^(I+1)+K") == Sum((W(I_PLUS_1), K))
    with pytest.raises(IllFormed):
        parse("K+w^(I+1)")
    with pytest.raises(OrdSyntaxError):
        parse("K(")


def test_print_parse_roundtrip_on_enumeration():
    for t in enum_terms(KernelCfg(enum_budget=4)):
        assert parse(to_text(t)) == t


# ------------------------------------------------------------ enumeration

def test_enum_size_one():
    assert enum_terms(KernelCfg(enum_budget=1)) == [ZERO, K, I]


def test_enum_is_strictly_increasing():
    terms = enum_terms(KernelCfg(enum_budget=4))
    assert all(cmp(x, y) is Cmp.LT for x, y in zip(terms, terms[1:]))


def test_enum_cnf_fragment_matches_generate_and_filter():
    alpha = Alphabet(k=False, i=False, regsuc=False, psir=False, psii=False, phi=False)
    got = set(enum_terms(KernelCfg(enum_budget=3), alpha))
    oracle = {t for t in cnf_terms(3) if is_canonical(t) and size(t) <= 3}
    assert got == oracle
    assert all(cnf(t) < ((((),),),) for t in got)  # all below w^w


def test_enum_by_size_prefixes_are_subterm_closed():
    terms = enum_by_size(KernelCfg(enum_budget=4))
    seen = set()
    for t in terms:
        seen.add(t)
        assert all(u in seen for u in subterms(t) if u != t)


def test_order_law_alphabet_is_large_enough():
    assert len(enum_terms(KernelCfg(enum_budget=6), ORDER_LAW_ALPHABET)) >= 300


# ------------------------------------------------------------ properties

ENUM = enum_terms(KernelCfg(enum_budget=4), FULL)
terms = st.sampled_from(ENUM)


@settings(max_examples=300, deadline=None)
@given(terms, terms)
def test_cmp_antisymmetric(s, t):
    assert cmp(s, t).value == -cmp(t, s).value
    assert (cmp(s, t) is Cmp.EQ) == (s == t)


@settings(max_examples=300, deadline=None)
@given(terms, terms, terms)
def test_cmp_transitive(a, b, c):
    if cmp(a, b) is Cmp.LT and cmp(b, c) is Cmp.LT:
        assert cmp(a, c) is Cmp.LT


@settings(max_examples=300, deadline=None)
@given(terms, terms)
def test_add_monotone_and_canonical(s, t):
    r = add(s, t)
    assert is_canonical(r)
    assert cmp(r, s) is not Cmp.LT
    if t != ZERO:
        assert cmp(r, s) is Cmp.GT


@settings(max_examples=300, deadline=None)
@given(terms, terms)
def test_nsum_commutes_and_dominates_add(s, t):
    assert nsum(s, t) == nsum(t, s)
    assert cmp(nsum(s, t), add(s, t)) is not Cmp.LT
