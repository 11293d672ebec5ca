"""Hereditarily finite sets as a desk-scale stand-in for the constructible levels.

For finite levels the constructible and cumulative hierarchies agree, so a
depth-``k`` universe is simply V_k.  Sets are canonical frozen values and the
well ordering is rank first, then the Ackermann code.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .errors import NotDelta0, UnknownConstant
from .ordinals import Cmp


@dataclass(frozen=True)
class MiniSet:
    elems: frozenset = frozenset()
    tag: str | None = field(default=None, compare=False)

    def __iter__(self):
        return iter(sorted(self.elems, key=l_key))

    def __len__(self) -> int:
        return len(self.elems)

    def __contains__(self, other) -> bool:
        return other in self.elems

    def __str__(self) -> str:
        return encode(self)


EMPTY = MiniSet()


def mini(*elems: MiniSet, tag: str | None = None) -> MiniSet:
    return MiniSet(frozenset(elems), tag)


def numeral(k: int) -> MiniSet:
    """The von Neumann ordinal k."""
    out = EMPTY
    for _ in range(k):
        out = MiniSet(out.elems | {out})
    return out


@functools.lru_cache(maxsize=None)
def rk_L(a: MiniSet) -> int:
    return max((rk_L(e) + 1 for e in a.elems), default=0)


@functools.lru_cache(maxsize=None)
def ackermann(a: MiniSet) -> int:
    return sum(1 << ackermann(e) for e in a.elems)


def l_key(a: MiniSet) -> tuple:
    return (rk_L(a), ackermann(a))


def l_order(a: MiniSet, b: MiniSet) -> Cmp:
    ka, kb = l_key(a), l_key(b)
    return Cmp.LT if ka < kb else Cmp.GT if ka > kb else Cmp.EQ


def encode(a: MiniSet) -> str:
    return "{" + ",".join(encode(e) for e in a) + "}"


def decode(text: str) -> MiniSet:
    pos = 0

    def read() -> MiniSet:
        nonlocal pos
        if pos >= len(text) or text[pos] != "{":
            raise ValueError(f"expected '{{' at position {pos} in {text!r}")
        pos += 1
        elems = []
        if pos < len(text) and text[pos] == "}":
            pos += 1
            return EMPTY
        while True:
            elems.append(read())
            if pos < len(text) and text[pos] == ",":
                pos += 1
                continue
            if pos < len(text) and text[pos] == "}":
                pos += 1
                return MiniSet(frozenset(elems))
            raise ValueError(f"expected ',' or '}}' at position {pos} in {text!r}")

    text = "".join(text.split())
    out = read()
    if pos != len(text):
        raise ValueError(f"trailing input at position {pos} in {text!r}")
    return out


@functools.lru_cache(maxsize=None)
def universe(depth: int) -> tuple:
    """All sets of rank below ``depth``, sorted by :func:`l_order`."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth > 4:
        raise ValueError("depth above 4 would enumerate 2**65536 sets")
    level: list = []
    for _ in range(depth):
        level = [MiniSet(frozenset(c)) for r in range(len(level) + 1)
                 for c in itertools.combinations(level, r)]
    return tuple(sorted(level, key=l_key))


@dataclass(frozen=True)
class UniverseCfg:
    depth: int = 3
    surrogate_lists: Mapping = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        for key, items in self.surrogate_lists.items():
            if len(set(items)) != len(items):
                raise ValueError(f"surrogate list for {key!r} has duplicates")

    @property
    def sets(self) -> tuple:
        return universe(self.depth)


# ------------------------------------------------------------- evaluation

def _members(bound, cfg: UniverseCfg) -> list:
    from . import formulas as F

    if isinstance(bound, F.MiniConst):
        return list(bound.value)
    raise UnknownConstant(f"bound {F.term_text(bound)} has no finite member list")


def _value(t, env: Mapping) -> MiniSet:
    from . import formulas as F

    if isinstance(t, F.MiniConst):
        return t.value
    if isinstance(t, F.Var):
        if t.name not in env:
            raise UnknownConstant(f"free variable {t.name}")
        return env[t.name]
    raise UnknownConstant(f"{F.term_text(t)} is not a mini-universe constant")


def eval_delta0(phi, cfg: UniverseCfg | None = None, env: Mapping | None = None) -> bool:
    """Truth of a bounded membership formula whose constants are hereditarily finite."""
    from . import formulas as F

    cfg = cfg or UniverseCfg()
    env = dict(env or {})

    def ev(a) -> bool:
        if isinstance(a, F.ElemLit):
            return (_value(a.left, env) in _value(a.right, env)) == a.pos
        if isinstance(a, F.Or):
            return ev(a.left) or ev(a.right)
        if isinstance(a, F.And):
            return ev(a.left) and ev(a.right)
        if isinstance(a, (F.Ex, F.All)):
            if isinstance(a.bound, F.Var):
                items = list(_value(a.bound, env))
            else:
                items = _members(a.bound, cfg)
            saved = env.get(a.var)
            results = []
            for d in items:
                env[a.var] = d
                r = ev(a.body)
                results.append(r)
                if r == isinstance(a, F.Ex):
                    break
            if saved is None:
                env.pop(a.var, None)
            else:
                env[a.var] = saved
            return any(results) if isinstance(a, F.Ex) else all(results)
        raise NotDelta0(f"not a membership formula: {F.text(a)}")

    return ev(phi)


def mu_select(members: Iterable[MiniSet], test: Callable[[MiniSet], bool]) -> MiniSet:
    """The l_order-least member passing ``test``, or the empty set if none does."""
    for d in sorted(members, key=l_key):
        if test(d):
            return d
    return EMPTY
