"""Syntactic hull membership, collapse side conditions and Mahlo queries."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field, replace

from .errors import SortError
from .ordinals import (
    I,
    K,
    ONE,
    ZERO,
    AtomI,
    AtomK,
    KernelCfg,
    OrdTerm,
    Phi,
    PsiI,
    PsiR,
    RegSuc,
    Sum,
    W,
    Zero,
    _c,
    add,
    below_hn,
    from_parts,
    is_canonical,
    is_regular,
    nsum,
    parts,
    sort_key,
    veblen,
    wexp,
)


@dataclass(frozen=True)
class HullCtx:
    alpha: OrdTerm
    beta: OrdTerm
    theta: frozenset = field(default_factory=frozenset)

    def with_theta(self, extra) -> "HullCtx":
        return replace(self, theta=self.theta | frozenset(extra))


@dataclass(frozen=True)
class MhQuery:
    xi: OrdTerm
    theta: frozenset
    pi: OrdTerm
    bound: OrdTerm


def _seed(t: OrdTerm, ctx: HullCtx) -> bool:
    return _c(t, ctx.beta) < 0 or t in ctx.theta


def in_hull(t: OrdTerm, ctx: HullCtx) -> bool:
    if _seed(t, ctx) or isinstance(t, (Zero, AtomK, AtomI)):
        return True
    if isinstance(t, Sum):
        return all(in_hull(p, ctx) for p in t.parts)
    if isinstance(t, W):
        return in_hull(t.exp, ctx)
    if isinstance(t, Phi):
        return in_hull(t.a, ctx) and in_hull(t.b, ctx)
    if isinstance(t, RegSuc):
        return in_hull(t.base, ctx)
    if isinstance(t, PsiI):
        return _c(t.index, ctx.alpha) < 0 and in_hull(t.index, ctx)
    if isinstance(t, PsiR):
        return (
            _c(t.index, ctx.alpha) < 0
            and in_hull(t.index, ctx)
            and in_hull(t.kappa, ctx)
            and psi_wf(t.kappa, t.index)
        )
    raise TypeError(f"not an ordinal term: {t!r}")


def psi_wf(kappa: OrdTerm, gamma: OrdTerm) -> bool:
    if not is_regular(kappa):
        raise SortError("collapse cardinal must be of regular sort")
    return in_hull(kappa, HullCtx(alpha=gamma, beta=kappa))


def psi_normal(t: OrdTerm) -> bool:
    if not isinstance(t, (PsiR, PsiI)):
        raise SortError("psi_normal expects a collapse term")
    return in_hull(t.index, HullCtx(alpha=t.index, beta=t))


def hn_member(t: OrdTerm, cfg: KernelCfg) -> bool:
    return below_hn(t, cfg.n)


def pred_regular(kappa: OrdTerm) -> OrdTerm:
    if not isinstance(kappa, RegSuc):
        raise SortError("only successor cardinals have a predecessor")
    return kappa.base


# ---------------------------------------------------------- saturation

def _components(t: OrdTerm) -> tuple:
    if isinstance(t, Sum):
        return t.parts
    if isinstance(t, W):
        return (t.exp,)
    if isinstance(t, Phi):
        return (t.a, t.b)
    if isinstance(t, RegSuc):
        return (t.base,)
    if isinstance(t, PsiI):
        return (t.index,)
    if isinstance(t, PsiR):
        return (t.kappa, t.index)
    return ()


def hull_saturate(ctx: HullCtx, universe) -> frozenset:
    """Least subset of ``universe`` holding the seeds and closed under the clauses.

    Iterates to a fixpoint; only elements of the universe can enter, so a
    universe that is not closed under subterms under-approximates the hull.
    """
    universe = list(universe)
    members = set()
    for t in universe:
        if _seed(t, ctx) or isinstance(t, (Zero, AtomK, AtomI)):
            members.add(t)
    wf_cache: dict = {}

    def kappa_ok(kappa, gamma):
        key = (kappa, gamma)
        if key not in wf_cache:
            sub = hull_saturate(HullCtx(alpha=gamma, beta=kappa), [u for u in universe if _c(u, kappa) <= 0])
            wf_cache[key] = kappa in sub
        return wf_cache[key]

    changed = True
    while changed:
        changed = False
        for t in universe:
            if t in members:
                continue
            comps = _components(t)
            if not comps or not all(c in members for c in comps):
                continue
            if isinstance(t, (PsiI, PsiR)) and _c(t.index, ctx.alpha) >= 0:
                continue
            if isinstance(t, PsiR) and not kappa_ok(t.kappa, t.index):
                continue
            members.add(t)
            changed = True
    return frozenset(members)


# ---------------------------------------------------------- Mahlo side

def mh_side_condition(q: MhQuery) -> bool:
    if not (is_regular(q.pi)):
        raise SortError("pi must be K or a successor-cardinal chain")
    if _c(q.xi, q.bound) >= 0:
        return False
    ctx = HullCtx(alpha=q.xi, beta=q.pi, theta=q.theta | {q.pi})
    return in_hull(q.xi, ctx)


def mh_step_rules(q: MhQuery) -> list:
    """Downward query licensed by the guard of ``q``.

    The returned query says that pi lies in the class at stage ``q.xi``
    with parameters ``theta + {pi}``; its own ``xi`` is a placeholder
    equal to the new bound, to be replaced by the next candidate.
    """
    if not mh_side_condition(q):
        return []
    return [MhQuery(xi=q.xi, theta=q.theta | {q.pi}, pi=q.pi, bound=q.xi)]


def mh_chain(q: MhQuery, candidates) -> list:
    """Apply :func:`mh_step_rules` along successive candidates; stop on failure."""
    chain = [q]
    current = q
    for c in candidates:
        steps = mh_step_rules(current)
        if not steps:
            break
        current = replace(steps[0], xi=c)
        chain.append(current)
    return chain


# ------------------------------------------------------------- descent

class Strategy(enum.Enum):
    GREEDY = "greedy"
    RANDOM = "random"


def _below(t: OrdTerm, depth: int = 2) -> list:
    """A finite menu of canonical terms strictly below ``t``."""
    out: list = []
    ps = parts(t)
    if not ps:
        return out
    out.append(ZERO)
    if len(ps) > 1:
        head = from_parts(ps[:-1])
        out.append(head)
        if depth:
            for q in _below(ps[-1], depth - 1):
                out.append(add(head, q))
        return [u for u in out if is_canonical(u) and _c(u, t) < 0]
    p = ps[0]
    if isinstance(p, W):
        if depth:
            for e in _below(p.exp, depth - 1):
                base = wexp(e)
                out.extend([base, nsum(base, base), nsum(nsum(base, base), base)])
        out.append(p.exp)
    elif isinstance(p, Phi):
        out.extend([p.a, p.b])
        if depth:
            for b in _below(p.b, depth - 1):
                out.append(veblen(p.a, b))
    elif isinstance(p, (PsiI, PsiR)):
        if depth:
            for g in _below(p.index, depth - 1):
                out.append(PsiI(g) if isinstance(p, PsiI) else PsiR(p.kappa, g))
        out.append(p.index)
        if isinstance(p, PsiR):
            out.append(p.kappa.base)
        else:
            out.append(RegSuc(RegSuc(K)))
    elif isinstance(p, RegSuc):
        out.extend([p.base, PsiR(p, ZERO)])
    elif isinstance(p, AtomI):
        out.extend([PsiI(ZERO), PsiI(K), RegSuc(K), K])
    elif isinstance(p, AtomK):
        out.extend([Phi(ONE, ZERO), W(W(ONE)), W(ONE)])
    out.extend(_components(p))
    return [u for u in out if is_canonical(u) and _c(u, t) < 0]


def descend_search(t: OrdTerm, steps: int, strategy: Strategy | str = Strategy.GREEDY,
                   seed: int = 0, pool=()) -> list:
    """Strictly descending chain from ``t`` of length at most ``steps``.

    ``pool`` adds extra known terms; greedy takes the largest candidate,
    random picks uniformly with a seeded generator.
    """
    strategy = Strategy(strategy)
    rng = random.Random(seed)
    chain = [t]
    pool = list(pool)
    while len(chain) < max(steps, 1):
        cur = chain[-1]
        cands = set(_below(cur)) | {u for u in pool if _c(u, cur) < 0}
        if not cands:
            break
        ordered = sorted(cands, key=sort_key)
        nxt = ordered[-1] if strategy is Strategy.GREEDY else rng.choice(ordered)
        chain.append(nxt)
    return chain
