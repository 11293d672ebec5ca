"""Canonical ordinal terms up to the epsilon number above I.

Terms are immutable dataclasses.  A canonical term is one that
:func:`normalize` maps to itself.  The order is computed by
:func:`cmp`; the arithmetic helpers always return canonical terms.

Additive principal terms are ``W``, ``Phi`` and the *critical atoms*
``AtomK``, ``AtomI``, ``RegSuc``, ``PsiR`` and ``PsiI``.  Critical atoms
are closed under the binary Veblen function, so ``W(atom)`` and
``Phi(atom, Zero)`` both collapse to the atom.
"""

from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import BudgetExceeded, IllFormed, OrdSyntaxError, PsiNotWellFormed


class Cmp(enum.Enum):
    LT = -1
    EQ = 0
    GT = 1

    def __str__(self) -> str:
        return self.name


class OrdTerm:
    """Marker base class for ordinal terms."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


def _term(cls):
    """Cache the structural hash and use it to reject unequal terms early."""
    field_hash, field_eq = cls.__hash__, cls.__eq__

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = hash((cls.__name__, field_hash(self)))
            object.__setattr__(self, "_hash", h)
            return h

    def __eq__(self, other):
        if self is other:
            return True
        if other.__class__ is not cls or hash(self) != hash(other):
            return False
        return field_eq(self, other)

    cls.__hash__, cls.__eq__ = __hash__, __eq__
    return cls


@_term
@dataclass(frozen=True)
class Zero(OrdTerm):
    pass


@_term
@dataclass(frozen=True)
class AtomK(OrdTerm):
    pass


@_term
@dataclass(frozen=True)
class AtomI(OrdTerm):
    pass


@_term
@dataclass(frozen=True)
class RegSuc(OrdTerm):
    base: OrdTerm


@_term
@dataclass(frozen=True)
class PsiR(OrdTerm):
    kappa: OrdTerm
    index: OrdTerm


@_term
@dataclass(frozen=True)
class PsiI(OrdTerm):
    index: OrdTerm


@_term
@dataclass(frozen=True)
class W(OrdTerm):
    exp: OrdTerm


@_term
@dataclass(frozen=True)
class Phi(OrdTerm):
    a: OrdTerm
    b: OrdTerm


@_term
@dataclass(frozen=True)
class Sum(OrdTerm):
    parts: tuple


ZERO = Zero()
K = AtomK()
I = AtomI()  # noqa: E741
ONE = W(ZERO)


@dataclass(frozen=True)
class KernelCfg:
    n: int = 1
    enum_budget: int = 4

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.enum_budget < 1:
            raise ValueError("enum_budget must be at least 1")


# ---------------------------------------------------------------- sorts

def is_regular(t: OrdTerm) -> bool:
    """Syntactic regular sort: K and its successor-cardinal chains."""
    return isinstance(t, (AtomK, RegSuc))


def is_regular_plus(t: OrdTerm) -> bool:
    return is_regular(t) or isinstance(t, AtomI)


def is_critical(t: OrdTerm) -> bool:
    return isinstance(t, (AtomK, AtomI, RegSuc, PsiR, PsiI))


def is_epsilon(t: OrdTerm) -> bool:
    return is_critical(t) or isinstance(t, Phi)


def is_principal(t: OrdTerm) -> bool:
    return not isinstance(t, (Zero, Sum))


def succ_level(t: OrdTerm) -> int:
    """Number of successor-cardinal steps above K in a regular-sort term."""
    level = 0
    while isinstance(t, RegSuc):
        level += 1
        t = t.base
    if not isinstance(t, AtomK):
        raise IllFormed(f"not of regular sort: {to_text(t)}")
    return level


def regular_at(level: int) -> OrdTerm:
    t: OrdTerm = K
    for _ in range(level):
        t = RegSuc(t)
    return t


def parts(t: OrdTerm) -> tuple:
    if isinstance(t, Zero):
        return ()
    if isinstance(t, Sum):
        return t.parts
    return (t,)


def from_parts(ps: Iterable[OrdTerm]) -> OrdTerm:
    ps = tuple(ps)
    if not ps:
        return ZERO
    if len(ps) == 1:
        return ps[0]
    return Sum(ps)


def nat(k: int) -> OrdTerm:
    if k < 0:
        raise ValueError("negative natural")
    return from_parts((ONE,) * k)


def as_natural(t: OrdTerm) -> int | None:
    ps = parts(t)
    if all(p == ONE for p in ps):
        return len(ps)
    return None


def size(t: OrdTerm) -> int:
    """Node count; a sum costs the total of its parts."""
    if isinstance(t, (Zero, AtomK, AtomI)):
        return 1
    if isinstance(t, (RegSuc,)):
        return 1 + size(t.base)
    if isinstance(t, PsiR):
        return 1 + size(t.kappa) + size(t.index)
    if isinstance(t, PsiI):
        return 1 + size(t.index)
    if isinstance(t, W):
        return 1 + size(t.exp)
    if isinstance(t, Phi):
        return 1 + size(t.a) + size(t.b)
    if isinstance(t, Sum):
        return sum(size(p) for p in t.parts)
    raise TypeError(f"not an ordinal term: {t!r}")


def subterms(t: OrdTerm) -> Iterator[OrdTerm]:
    """All subterms including ``t``; sum parts count as subterms."""
    yield t
    if isinstance(t, RegSuc):
        yield from subterms(t.base)
    elif isinstance(t, PsiR):
        yield from subterms(t.kappa)
        yield from subterms(t.index)
    elif isinstance(t, (PsiI,)):
        yield from subterms(t.index)
    elif isinstance(t, W):
        yield from subterms(t.exp)
    elif isinstance(t, Phi):
        yield from subterms(t.a)
        yield from subterms(t.b)
    elif isinstance(t, Sum):
        for p in t.parts:
            yield from subterms(p)


# ----------------------------------------------------------- comparison

def _crit_key(t: OrdTerm):
    # (level, 0 for a collapse value below the level's top, 1 for the top)
    if isinstance(t, AtomI):
        return (float("inf"), 1)
    if isinstance(t, PsiI):
        return (float("inf"), 0)
    if isinstance(t, PsiR):
        return (succ_level(t.kappa), 0)
    return (succ_level(t), 1)


def _cmp_critical(s: OrdTerm, t: OrdTerm) -> int:
    ks, kt = _crit_key(s), _crit_key(t)
    if ks != kt:
        return -1 if ks < kt else 1
    if ks[1] == 0:
        return _c(s.index, t.index)
    return 0


def _veblen_pair(t: OrdTerm):
    if isinstance(t, W):
        return ZERO, t.exp
    return t.a, t.b


def _cmp_principal(s: OrdTerm, t: OrdTerm) -> int:
    cs, ct = is_critical(s), is_critical(t)
    if cs and ct:
        return _cmp_critical(s, t)
    if cs:
        return -_cmp_atom_vs(t, s)
    if ct:
        return _cmp_atom_vs(s, t)
    a1, b1 = _veblen_pair(s)
    a2, b2 = _veblen_pair(t)
    ca = _c(a1, a2)
    if ca == 0:
        return _c(b1, b2)
    if ca < 0:
        return -1 if _c(b1, t) < 0 else 1
    return -1 if _c(s, b2) < 0 else 1


def _cmp_atom_vs(t: OrdTerm, atom: OrdTerm) -> int:
    """Compare a non-critical principal ``t`` with a critical ``atom``."""
    a, b = _veblen_pair(t)
    if _c(a, atom) >= 0:
        return 1
    return -1 if _c(b, atom) < 0 else 1


@functools.lru_cache(maxsize=1 << 20)
def _c(s: OrdTerm, t: OrdTerm) -> int:
    if s == t:
        return 0
    if is_principal(s) and is_principal(t):
        return _cmp_principal(s, t)
    ps, pt = parts(s), parts(t)
    for x, y in zip(ps, pt):
        r = _c(x, y)
        if r:
            return r
    return (len(ps) > len(pt)) - (len(ps) < len(pt))


def cmp(s: OrdTerm, t: OrdTerm) -> Cmp:
    return Cmp(_c(s, t))


def lt(s: OrdTerm, t: OrdTerm) -> bool:
    return _c(s, t) < 0


def le(s: OrdTerm, t: OrdTerm) -> bool:
    return _c(s, t) <= 0


def omax(*ts: OrdTerm) -> OrdTerm:
    return functools.reduce(lambda x, y: y if _c(x, y) < 0 else x, ts)


sort_key = functools.cmp_to_key(_c)


# ------------------------------------------------------------ arithmetic

def add(s: OrdTerm, t: OrdTerm) -> OrdTerm:
    """Ordinal sum; summands of ``s`` below the leading part of ``t`` vanish."""
    tp = parts(t)
    if not tp:
        return s
    sp = list(parts(s))
    while sp and _c(sp[-1], tp[0]) < 0:
        sp.pop()
    return from_parts(sp + list(tp))


def nsum(s: OrdTerm, t: OrdTerm) -> OrdTerm:
    """Hessenberg natural sum."""
    merged = sorted(parts(s) + parts(t), key=sort_key, reverse=True)
    return from_parts(merged)


def wexp(t: OrdTerm) -> OrdTerm:
    if is_epsilon(t):
        return t
    return W(t)


def veblen(a: OrdTerm, b: OrdTerm) -> OrdTerm:
    if isinstance(a, Zero):
        return wexp(b)
    if is_critical(b) and _c(a, b) < 0:
        return b
    if isinstance(b, Phi) and _c(b.a, a) > 0:
        return b
    if is_critical(a) and isinstance(b, Zero):
        return a
    if _c(a, I) >= 0 or _c(b, I) >= 0:
        raise BudgetExceeded("Veblen value at or above the epsilon number after I")
    return Phi(a, b)


def omega_tower(k: int, t: OrdTerm) -> OrdTerm:
    for _ in range(k):
        t = wexp(t)
    return t


def omega_times(t: OrdTerm) -> OrdTerm:
    """The product omega * t, computed by shifting each Cantor exponent."""
    out = []
    for p in parts(t):
        if isinstance(p, W) and as_natural(p.exp) is not None:
            out.append(W(add(p.exp, ONE)))
        else:
            out.append(p)
    return from_parts(out)


def succ(t: OrdTerm) -> OrdTerm:
    return add(t, ONE)


I_PLUS_1 = Sum((I, ONE))


def hn_bound(n: int) -> OrdTerm:
    return omega_tower(n, I_PLUS_1)


def below_hn(t: OrdTerm, n: int) -> bool:
    bound = hn_bound(n)
    return all(_c(u, bound) < 0 for u in subterms(t))


# ------------------------------------------------------------ normalize

def _check_psi(t: OrdTerm) -> OrdTerm:
    from . import hull  # local import: hull depends on this module

    if isinstance(t, PsiR) and not hull.psi_wf(t.kappa, t.index):
        raise PsiNotWellFormed(f"kappa not in its own hull: {to_text(t)}")
    if not hull.psi_normal(t):
        raise PsiNotWellFormed(f"index not in the hull at its own stage: {to_text(t)}")
    return t


def _norm(raw: OrdTerm) -> OrdTerm:
    if isinstance(raw, (Zero, AtomK, AtomI)):
        return raw
    if isinstance(raw, RegSuc):
        base = _norm(raw.base)
        if not is_regular(base):
            raise IllFormed(f"successor cardinal of a non-regular term: {to_text(base)}")
        return RegSuc(base)
    if isinstance(raw, PsiR):
        kappa = _norm(raw.kappa)
        if not isinstance(kappa, RegSuc):
            raise IllFormed(f"collapse below a non-successor cardinal: {to_text(kappa)}")
        return _check_psi(PsiR(kappa, _norm(raw.index)))
    if isinstance(raw, PsiI):
        return _check_psi(PsiI(_norm(raw.index)))
    if isinstance(raw, W):
        return wexp(_norm(raw.exp))
    if isinstance(raw, Phi):
        return veblen(_norm(raw.a), _norm(raw.b))
    if isinstance(raw, Sum):
        out: OrdTerm = ZERO
        for p in raw.parts:
            out = add(out, _norm(p))
        return out
    raise IllFormed(f"not an ordinal term: {raw!r}")


def normalize(raw: OrdTerm, cfg: KernelCfg | None = None) -> OrdTerm:
    t = _norm(raw)
    if cfg is not None and not below_hn(t, cfg.n):
        raise BudgetExceeded(f"{to_text(t)} is not hereditarily below {to_text(hn_bound(cfg.n))}")
    return t


def is_canonical(t: OrdTerm) -> bool:
    try:
        return _norm(t) == t
    except (IllFormed, BudgetExceeded):
        return False


# --------------------------------------------------------- text format

def to_text(t: OrdTerm) -> str:
    if isinstance(t, Zero):
        return "0"
    if isinstance(t, AtomK):
        return "K"
    if isinstance(t, AtomI):
        return "I"
    if isinstance(t, RegSuc):
        return to_text(t.base) + "^+"
    if isinstance(t, PsiR):
        return f"Psi({to_text(t.kappa)},{to_text(t.index)})"
    if isinstance(t, PsiI):
        return f"Psi(I,{to_text(t.index)})"
    if isinstance(t, W):
        if isinstance(t.exp, Zero):
            return "1"
        return f"w^({to_text(t.exp)})"
    if isinstance(t, Phi):
        return f"phi({to_text(t.a)},{to_text(t.b)})"
    if isinstance(t, Sum):
        big = [p for p in t.parts if p != ONE]
        ones = len(t.parts) - len(big)
        chunks = [to_text(p) for p in big]
        if ones:
            chunks.append(str(ones))
        return "+".join(chunks)
    raise TypeError(f"not an ordinal term: {t!r}")


class _Parser:
    def __init__(self, text: str):
        self.s = text.replace(" ", "")
        self.i = 0

    def error(self, msg: str):
        raise OrdSyntaxError(msg, self.i)

    def peek(self, lit: str) -> bool:
        return self.s.startswith(lit, self.i)

    def eat(self, lit: str):
        if not self.peek(lit):
            self.error(f"expected {lit!r}")
        self.i += len(lit)

    def parse(self) -> list:
        summands = self.expr()
        if self.i != len(self.s):
            self.error("unexpected trailing input")
        return summands

    def expr(self) -> list:
        summands = [self.postfix()]
        while self.peek("+") and not self.peek("^+"):
            self.eat("+")
            summands.append(self.postfix())
        return summands

    def postfix(self) -> OrdTerm:
        t = self.atom()
        while self.peek("^+"):
            self.eat("^+")
            t = RegSuc(t)
        return t

    def sub(self) -> OrdTerm:
        return _build(self.expr(), strict=True)

    def atom(self) -> OrdTerm:
        s, i = self.s, self.i
        if i >= len(s):
            self.error("unexpected end of input")
        if s[i].isdigit():
            j = i
            while j < len(s) and s[j].isdigit():
                j += 1
            self.i = j
            return nat(int(s[i:j]))
        if self.peek("Psi("):
            self.eat("Psi(")
            if self.peek("I,"):
                self.eat("I,")
                idx = self.sub()
                self.eat(")")
                return PsiI(idx)
            kappa = self.sub()
            self.eat(",")
            idx = self.sub()
            self.eat(")")
            return PsiR(kappa, idx)
        if self.peek("phi("):
            self.eat("phi(")
            a = self.sub()
            self.eat(",")
            b = self.sub()
            self.eat(")")
            return Phi(a, b)
        if self.peek("w^("):
            self.eat("w^(")
            e = self.sub()
            self.eat(")")
            return W(e)
        if s[i] == "K":
            self.i += 1
            return K
        if s[i] == "I":
            self.i += 1
            return I
        self.error(f"unexpected character {s[i]!r}")


def _build(summands: list, strict: bool) -> OrdTerm:
    normed = [_norm(x) for x in summands]
    flat = [p for x in normed for p in parts(x)]
    if strict and any(_c(x, y) < 0 for x, y in zip(flat, flat[1:])):
        raise IllFormed("sum parts must be weakly descending")
    return from_parts(flat)


def parse(text: str) -> OrdTerm:
    """Parse the ASCII grammar; raises OrdSyntaxError or IllFormed."""
    return _build(_Parser(text).parse(), strict=True)


# ---------------------------------------------------------- enumeration

@dataclass(frozen=True)
class Alphabet:
    """Constructor selection for :func:`enum_terms`.

    ``max_succ`` caps the length of successor-cardinal chains; ``None``
    leaves them unbounded within the size budget.
    """

    zero: bool = True
    k: bool = True
    i: bool = True
    regsuc: bool = True
    psir: bool = True
    psii: bool = True
    w: bool = True
    phi: bool = True
    sum: bool = True
    max_succ: int | None = None


FULL = Alphabet()
ORDER_LAW_ALPHABET = Alphabet(phi=False, max_succ=1)


def _sums(cost: int, cap: OrdTerm | None, principal: dict[int, list]) -> Iterator[tuple]:
    # descending part lists of the given cost whose parts are <= cap
    for first in range(1, cost + 1):
        for p in principal.get(first, ()):
            if cap is not None and _c(p, cap) > 0:
                continue
            if first == cost:
                yield (p,)
            else:
                for rest in _sums(cost - first, p, principal):
                    yield (p,) + rest


def _enum_by_size(budget: int, alpha: Alphabet, n: int) -> dict[int, list]:
    from . import hull

    by_size: dict[int, list] = {}
    principal: dict[int, list] = {}
    bound = hn_bound(n)

    def keep(t: OrdTerm) -> bool:
        return _c(t, bound) < 0

    for s in range(1, budget + 1):
        found: list = []
        if s == 1:
            if alpha.zero:
                found.append(ZERO)
            if alpha.k:
                found.append(K)
            if alpha.i:
                found.append(I)
        prev = by_size.get(s - 1, [])
        if alpha.regsuc:
            for b in prev:
                if is_regular(b) and (alpha.max_succ is None or succ_level(b) < alpha.max_succ):
                    found.append(RegSuc(b))
        if alpha.psii:
            for g in prev:
                t = PsiI(g)
                if hull.psi_normal(t):
                    found.append(t)
        if alpha.w:
            for e in prev:
                if not is_epsilon(e):
                    found.append(W(e))
        for left in range(1, s - 1):
            right = s - 1 - left
            for x in by_size.get(left, []):
                for y in by_size.get(right, []):
                    if alpha.psir and isinstance(x, RegSuc):
                        t = PsiR(x, y)
                        if hull.psi_wf(x, y) and hull.psi_normal(t):
                            found.append(t)
                    if alpha.phi and not isinstance(x, Zero):
                        try:
                            if veblen(x, y) == Phi(x, y):
                                found.append(Phi(x, y))
                        except BudgetExceeded:
                            pass
        found = [t for t in found if keep(t)]
        principal[s] = [t for t in found if is_principal(t)]
        if alpha.sum:
            for first in range(1, s):
                for p in principal.get(first, ()):
                    rest_cost = s - first
                    if rest_cost >= 1:
                        for rest in _sums(rest_cost, p, principal):
                            t = Sum((p,) + rest)
                            if keep(t):
                                found.append(t)
        by_size[s] = found
    return by_size


def enum_terms(cfg: KernelCfg, alpha: Alphabet = FULL) -> list:
    """All canonical terms of size <= ``cfg.enum_budget``, sorted by cmp."""
    by_size = _enum_by_size(cfg.enum_budget, alpha, cfg.n)
    terms = set(itertools.chain.from_iterable(by_size.values()))
    out = sorted(terms, key=sort_key)
    assert all(_c(x, y) < 0 for x, y in zip(out, out[1:]))
    return out


def enum_by_size(cfg: KernelCfg, alpha: Alphabet = FULL) -> list:
    """Same terms as :func:`enum_terms` ordered by (size, cmp).

    Every prefix of this list is closed under taking subterms.
    """
    by_size = _enum_by_size(cfg.enum_budget, alpha, cfg.n)
    out = []
    for s in sorted(by_size):
        out.extend(sorted(set(by_size[s]), key=sort_key))
    return out
