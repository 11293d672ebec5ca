import itertools
import random
from pathlib import Path

import pytest

from ordbench import formulas as F
from ordbench.errors import NotDelta0
from ordbench.ordinals import Cmp
from ordbench.universe import (
    EMPTY,
    UniverseCfg,
    decode,
    encode,
    eval_delta0,
    l_order,
    mini,
    mu_select,
    numeral,
    rk_L,
    universe,
)

GOLDEN = Path(__file__).parent / "golden"
V3 = universe(3)
V4 = universe(4)


def test_rank_examples():
    assert rk_L(EMPTY) == 0
    assert rk_L(mini(EMPTY)) == 1
    assert rk_L(numeral(3)) == 3


def test_membership_raises_rank_exhaustively():
    for a, b in itertools.product(V4, repeat=2):
        if a in b:
            assert rk_L(a) < rk_L(b)


def test_universe_sizes():
    assert [len(universe(k)) for k in range(5)] == [0, 1, 2, 4, 16]


def test_l_order():
    assert l_order(EMPTY, mini(EMPTY)) is Cmp.LT
    for a in V3:
        assert l_order(a, a) is Cmp.EQ


def test_l_order_is_rank_compatible_and_total():
    for a, b in itertools.product(V4, repeat=2):
        c = l_order(a, b)
        assert (c is Cmp.EQ) == (a == b)
        if rk_L(a) < rk_L(b):
            assert c is Cmp.LT


def test_depth2_golden_listing():
    expected = (GOLDEN / "universe_depth2.txt").read_text().split()
    assert [encode(s) for s in universe(2)] == expected


def test_depth3_listing_is_stable():
    assert [encode(s) for s in V3] == ["{}", "{{}}", "{{{}}}", "{{},{{}}}"]


def test_encode_decode_roundtrip():
    for s in V4:
        assert decode(encode(s)) == s
    with pytest.raises(ValueError):
        decode("{{}")


# ------------------------------------------------------------ evaluation

def const(s):
    return F.MiniConst(s)


def test_eval_examples():
    assert eval_delta0(F.ElemLit(const(EMPTY), const(mini(EMPTY))))
    body = F.ElemLit(F.Var("x"), const(EMPTY))
    assert not eval_delta0(F.Ex("x", const(mini(EMPTY)), body))
    with pytest.raises(NotDelta0):
        eval_delta0(F.RegLit(const(EMPTY)))


def random_delta0(rng, depth, bound_vars=()):
    def term():
        if bound_vars and rng.random() < 0.6:
            return F.Var(rng.choice(bound_vars))
        return const(rng.choice(V3))

    r = rng.random()
    if depth == 0 or r < 0.3:
        return F.ElemLit(term(), term(), pos=rng.random() < 0.5)
    if r < 0.6:
        cls = F.Or if rng.random() < 0.5 else F.And
        return cls(random_delta0(rng, depth - 1, bound_vars), random_delta0(rng, depth - 1, bound_vars))
    var = f"v{len(bound_vars)}"
    bound = F.Var(rng.choice(bound_vars)) if bound_vars and rng.random() < 0.3 else const(rng.choice(V3))
    cls = F.Ex if rng.random() < 0.5 else F.All
    return cls(var, bound, random_delta0(rng, depth - 1, bound_vars + (var,)))


def brute_eval(phi, env):
    """Independent evaluator on Python frozensets: enumerate full assignments."""
    def to_fs(s):
        return frozenset(to_fs(e) for e in s.elems)

    if isinstance(phi, F.ElemLit):
        left = env[phi.left.name] if isinstance(phi.left, F.Var) else to_fs(phi.left.value)
        right = env[phi.right.name] if isinstance(phi.right, F.Var) else to_fs(phi.right.value)
        return (left in right) == phi.pos
    if isinstance(phi, F.Or):
        return brute_eval(phi.left, env) or brute_eval(phi.right, env)
    if isinstance(phi, F.And):
        return brute_eval(phi.left, env) and brute_eval(phi.right, env)
    bound = env[phi.bound.name] if isinstance(phi.bound, F.Var) else to_fs(phi.bound.value)
    results = [brute_eval(phi.body, {**env, phi.var: m}) for m in bound]
    return any(results) if isinstance(phi, F.Ex) else all(results)


def test_eval_agrees_with_brute_force_on_random_formulas():
    rng = random.Random(7)
    for _ in range(200):
        phi = random_delta0(rng, 3)
        assert eval_delta0(phi, UniverseCfg(depth=3)) == brute_eval(phi, {})


# ------------------------------------------------------------ least witness

def test_mu_select_examples():
    assert mu_select(V3, lambda d: False) == EMPTY
    b = [EMPTY, mini(EMPTY)]
    assert mu_select(b, lambda d: d == d) == EMPTY


def test_mu_select_matches_linear_scan():
    rng = random.Random(3)
    for _ in range(100):
        members = rng.sample(V4, 6)
        chosen = set(rng.sample(members, rng.randint(0, 3)))
        got = mu_select(members, lambda d: d in chosen)
        ordered = [m for m in V4 if m in members]  # V4 is listed in l_order
        expect = next((m for m in ordered if m in chosen), EMPTY)
        assert got == expect
