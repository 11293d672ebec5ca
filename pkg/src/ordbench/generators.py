"""Seeded generators for formulas and small finite derivations.

Shared by the command-line property suites and the test-suite so that both
exercise the same populations.
"""

from __future__ import annotations

import random

from . import derivations as D
from . import formulas as F
from .ordinals import I, K, ZERO, OrdTerm, RegSuc, nat, omega_times, parts
from .universe import universe

_SMALL_SETS = universe(2)


def _closed_terms(max_rank_is_I: bool) -> list:
    terms = [F.MiniConst(s) for s in _SMALL_SETS]
    terms += [F.ordconst(nat(k)) for k in range(3)]
    terms += [F.ordconst(K), F.lconst(K), F.ordconst(RegSuc(K)), F.lconst(RegSuc(K))]
    if max_rank_is_I:
        terms += [F.L_I, F.ordconst(I)]
    return terms


def random_formula(rng: random.Random, depth: int = 3, predicates: bool = True,
                   allow_I: bool = True, _vars: tuple = ()) -> F.Formula:
    """A random sentence whose quantifier bounds have rank at most I."""
    pool = _closed_terms(allow_I)
    bounds = [t for t in pool if not isinstance(t, F.OrdConst) or t.ord != I]

    def term():
        if _vars and rng.random() < 0.5:
            return F.Var(rng.choice(_vars))
        return rng.choice(pool)

    roll = rng.random()
    if depth <= 0 or roll < 0.25:
        if predicates and rng.random() < 0.2:
            lit = rng.choice([F.RegLit(term()), F.PInLit(term())])
        else:
            lit = F.ElemLit(term(), term())
        return lit if rng.random() < 0.5 else F.neg(lit)
    if roll < 0.6:
        left = random_formula(rng, depth - 1, predicates, allow_I, _vars)
        right = random_formula(rng, depth - 1, predicates, allow_I, _vars)
        return F.Or(left, right) if rng.random() < 0.5 else F.And(left, right)
    var = f"x{len(_vars)}"
    body = random_formula(rng, depth - 1, predicates, allow_I, _vars + (var,))
    cls = F.Ex if rng.random() < 0.5 else F.All
    return cls(var, rng.choice(bounds), body)


def formulas(count: int, seed: int = 0, depth: int = 3) -> list:
    rng = random.Random(seed)
    return [random_formula(rng, depth) for _ in range(count)]


def additive_closure_member(t: OrdTerm, generators) -> bool:
    """Is ``t`` a finite sum of members of ``generators`` (0 always is)?"""
    gens = [g for g in set(generators) if g != ZERO]

    def go(rest: tuple) -> bool:
        if not rest:
            return True
        for g in gens:
            gp = parts(g)
            if rest[:len(gp)] == gp and go(rest[len(gp):]):
                return True
        return False

    return go(parts(t))


def rank_generators(a: F.Formula) -> set:
    return {omega_times(r) for r in F.qk_of(a)} | {ZERO, nat(1)}


# ------------------------------------------------------ finite derivations

_DEPTH3 = universe(3)


def _mini_literal(rng: random.Random) -> F.Formula:
    x, y = rng.choice(_DEPTH3), rng.choice(_DEPTH3)
    lit = F.ElemLit(F.MiniConst(x), F.MiniConst(y))
    return lit if rng.random() < 0.5 else F.neg(lit)


def _mini_formula(rng: random.Random, depth: int) -> F.Formula:
    """Quantifier-free over the depth-3 universe, connective depth at most ``depth``."""
    if depth <= 0 or rng.random() < 0.2:
        return _mini_literal(rng)
    left, right = _mini_formula(rng, depth - 1), _mini_formula(rng, depth - 1)
    return F.Or(left, right) if rng.random() < 0.5 else F.And(left, right)


def _true_sentence(rng: random.Random) -> F.Formula:
    while True:
        s = rng.choice(_DEPTH3[1:])
        body = F.ElemLit(F.Var("y"), F.Var("x"))
        a = F.Ex("x", F.MiniConst(s), F.All("y", F.MiniConst(s), body if rng.random() < 0.5 else F.neg(body)))
        if rng.random() < 0.5:
            a = F.Or(a, _mini_literal(rng))
        if F.truth(a):
            return a


def fabricate_finite(seed: int, nesting: int = 2, max_rank: int = 3) -> D.Deriv:
    """A derivation of a true bounded sentence over the depth-3 universe that uses cuts.

    Cut formulas are quantifier-free with rank at most ``max_rank``; cut
    derivations nest up to ``nesting`` levels on each side.
    """
    rng = random.Random(seed)
    goal = _true_sentence(rng)

    def build(seq: frozenset, level: int, prefer) -> D.Deriv:
        if level == 0:
            return D.delta0_complete(seq, base=ZERO, prefer=prefer)
        c = _mini_formula(rng, max_rank)
        left = build(seq | {F.neg(c)}, level - 1 if rng.random() < 0.7 else 0, (F.neg(c),))
        right = build(seq | {c}, level - 1 if rng.random() < 0.7 else 0, (c,))
        return D.cut(left, right, c)

    return build(frozenset({goal}), nesting, ())


def cut_count(d: D.Deriv) -> int:
    return sum(1 for n in D.iter_tree(d) if n.tag == "Cut")


__all__ = ["random_formula", "formulas", "additive_closure_member", "rank_generators",
           "fabricate_finite", "cut_count"]
