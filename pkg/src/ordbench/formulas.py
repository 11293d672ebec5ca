"""Formulas over {in, P, P_In, Reg} with named constants, their measures and decompositions.

Formulas are kept in negation normal form: negation lives only in literal
polarity, so ``neg`` is a structural dual and ranks of a formula and its
negation agree by construction.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

from . import hull as H
from .errors import (
    DomainViolation,
    NotSentence,
    OrdSyntaxError,
    OutOfFragment,
    ShapeMismatch,
    SortError,
)
from .ordinals import (
    I,
    K,
    ONE,
    ZERO,
    AtomI,
    AtomK,
    OrdTerm,
    PsiI,
    PsiR,
    RegSuc,
    _c,
    as_natural,
    is_regular,
    nat,
    omax,
    omega_times,
    parse as parse_ord,
    sort_key,
    succ,
    to_text,
)
from .universe import EMPTY, MiniSet, UniverseCfg, decode, encode, eval_delta0, numeral, rk_L, universe

SMALL_LEVEL = 4      # L_k for k up to here is materialized as a finite set
SMALL_NUMERAL = 16   # ordinals up to here are materialized as von Neumann numerals


# ------------------------------------------------------- collapse images

@dataclass(frozen=True)
class CollapseDescriptor:
    """A Mostowski collapse below a regular ``lam`` (kind "reg") or below I (kind "I")."""

    kind: str
    x: OrdTerm
    lam: OrdTerm | None = None

    def __post_init__(self):
        if self.kind == "reg":
            if not (isinstance(self.x, PsiR) and self.x.kappa == self.lam):
                raise SortError("a regular collapse needs x = Psi(lam, .)")
        elif self.kind == "I":
            if not isinstance(self.x, PsiI):
                raise SortError("a collapse below I needs x = Psi(I, .)")
        else:
            raise ValueError(f"unknown collapse kind {self.kind!r}")

    @property
    def upper(self) -> OrdTerm:
        return self.lam if self.kind == "reg" else I

    @property
    def image_of_I(self) -> "RankToken":
        return RankToken(self)

    def text(self) -> str:
        return to_text(self.x) if self.kind == "I" else f"{to_text(self.x)};{to_text(self.lam)}"


@dataclass(frozen=True)
class RankToken:
    """The collapse image of I: an ordinal with no term, strictly between x and the upper bound."""

    desc: CollapseDescriptor

    def cmp_term(self, s: OrdTerm) -> int | None:
        if _c(s, self.desc.x) <= 0:
            return 1
        if _c(s, self.desc.upper) >= 0:
            return -1
        return None


def rank_cmp(a, b) -> int | None:
    """Three-way comparison of ranks that may be tokens; None when the interval rule is silent."""
    if isinstance(a, RankToken) and isinstance(b, RankToken):
        return 0 if a == b else None
    if isinstance(a, RankToken):
        return a.cmp_term(b)
    if isinstance(b, RankToken):
        r = b.cmp_term(a)
        return None if r is None else -r
    return _c(a, b)


def rank_lt(a, b) -> bool | None:
    r = rank_cmp(a, b)
    return None if r is None else r < 0


def rank_text(r) -> str:
    if isinstance(r, RankToken):
        return f"F({r.desc.text()})"
    return to_text(r)


# ------------------------------------------------------------------ terms

class Term:
    __slots__ = ()

    def __str__(self) -> str:
        return term_text(self)


@dataclass(frozen=True)
class MiniConst(Term):
    value: MiniSet


@dataclass(frozen=True)
class LConst(Term):
    """The level L_rank; the rank may be a collapse token."""

    rank: object


@dataclass(frozen=True)
class OrdConst(Term):
    """The ordinal ``ord`` viewed as a set."""

    ord: object


@dataclass(frozen=True)
class UniverseL_I(Term):
    pass


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class SetMarker(Term):
    """An opaque set parameter with a declared rank and a closed-world member list.

    ``restrict`` is the ordinal pi when the marker stands for the intersection
    with L_pi.
    """

    name: str
    rank: OrdTerm
    restrict: OrdTerm | None = None
    members: frozenset = frozenset()

    def restricted(self, pi: OrdTerm) -> "SetMarker":
        if self.restrict is not None and _c(self.restrict, pi) <= 0:
            return self
        return replace(self, restrict=pi)


@dataclass(frozen=True)
class LPlus(Term):
    """The level L at the cardinal successor of ``base``."""

    base: Term


L_I = UniverseL_I()


def lplus(base: Term) -> Term:
    """L at the successor cardinal of ``base``; a closed base resolves to a plain level."""
    if isinstance(base, Var):
        return LPlus(base)
    return lconst(term_rank(LPlus(base)))


def lconst(r) -> Term:
    k = as_natural(r) if isinstance(r, OrdTerm) else None
    if k is not None and k <= SMALL_LEVEL:
        return MiniConst(MiniSet(frozenset(universe(k))))
    if isinstance(r, AtomI):
        return L_I
    return LConst(r)


def ordconst(a) -> Term:
    k = as_natural(a) if isinstance(a, OrdTerm) else None
    if k is not None and k <= SMALL_NUMERAL:
        return MiniConst(numeral(k))
    return OrdConst(a)


def const(s: MiniSet | str) -> MiniConst:
    return MiniConst(decode(s) if isinstance(s, str) else s)


def _numeral_value(s: MiniSet) -> int | None:
    k = len(s)
    return k if s == numeral(k) else None


def is_ordinal_term(t: Term) -> bool:
    return isinstance(t, OrdConst) or (isinstance(t, MiniConst) and _numeral_value(t.value) is not None)


def ordinal_of(t: Term):
    if isinstance(t, OrdConst):
        return t.ord
    if isinstance(t, MiniConst):
        k = _numeral_value(t.value)
        if k is not None:
            return nat(k)
    return None


def term_rank(t: Term):
    """The L-rank of a term; variables count as rank 0."""
    if isinstance(t, MiniConst):
        return nat(rk_L(t.value))
    if isinstance(t, (LConst, OrdConst)):
        return t.rank if isinstance(t, LConst) else t.ord
    if isinstance(t, UniverseL_I):
        return I
    if isinstance(t, Var):
        return ZERO
    if isinstance(t, SetMarker):
        if t.restrict is not None and _c(t.restrict, t.rank) < 0:
            return t.restrict
        return t.rank
    if isinstance(t, LPlus):
        r = term_rank(t.base)
        if isinstance(r, RankToken):
            raise DomainViolation("successor of a collapse image has no term")
        return RegSuc(r) if is_regular(r) else succ(r)
    raise TypeError(f"not a term: {t!r}")


def term_text(t: Term) -> str:
    if isinstance(t, MiniConst):
        return encode(t.value)
    if isinstance(t, LConst):
        return f"L({rank_text(t.rank)})"
    if isinstance(t, OrdConst):
        return rank_text(t.ord)
    if isinstance(t, UniverseL_I):
        return "L(I)"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, SetMarker):
        return t.name if t.restrict is None else f"{t.name}|{to_text(t.restrict)}"
    if isinstance(t, LPlus):
        return f"Lplus({term_text(t.base)})"
    raise TypeError(f"not a term: {t!r}")


# --------------------------------------------------------------- formulas

class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return text(self)


@dataclass(frozen=True)
class ElemLit(Formula):
    left: Term
    right: Term
    pos: bool = True


@dataclass(frozen=True)
class RegLit(Formula):
    arg: Term
    pos: bool = True


@dataclass(frozen=True)
class PLit(Formula):
    lam: Term
    x: Term
    y: Term
    pos: bool = True


@dataclass(frozen=True)
class PInLit(Formula):
    arg: Term
    pos: bool = True


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Ex(Formula):
    var: str
    bound: Term
    body: Formula


@dataclass(frozen=True)
class All(Formula):
    var: str
    bound: Term
    body: Formula


LITERALS = (ElemLit, RegLit, PLit, PInLit)
PREDICATES = (RegLit, PLit, PInLit)
QUANTIFIERS = (Ex, All)


def neg(a: Formula) -> Formula:
    if isinstance(a, LITERALS):
        return replace(a, pos=not a.pos)
    if isinstance(a, Or):
        return And(neg(a.left), neg(a.right))
    if isinstance(a, And):
        return Or(neg(a.left), neg(a.right))
    if isinstance(a, Ex):
        return All(a.var, a.bound, neg(a.body))
    if isinstance(a, All):
        return Ex(a.var, a.bound, neg(a.body))
    raise TypeError(f"not a formula: {a!r}")


def disj(*fs: Formula) -> Formula:
    return functools.reduce(Or, fs)


def conj(*fs: Formula) -> Formula:
    return functools.reduce(And, fs)


def _map_terms(a: Formula, fn: Callable[[Term, frozenset], Term], bound: frozenset = frozenset()) -> Formula:
    """Rebuild ``a`` with every term passed through ``fn`` (given the bound variable names)."""
    if isinstance(a, ElemLit):
        return replace(a, left=fn(a.left, bound), right=fn(a.right, bound))
    if isinstance(a, RegLit):
        return replace(a, arg=fn(a.arg, bound))
    if isinstance(a, PLit):
        return replace(a, lam=fn(a.lam, bound), x=fn(a.x, bound), y=fn(a.y, bound))
    if isinstance(a, PInLit):
        return replace(a, arg=fn(a.arg, bound))
    if isinstance(a, (Or, And)):
        return type(a)(_map_terms(a.left, fn, bound), _map_terms(a.right, fn, bound))
    if isinstance(a, QUANTIFIERS):
        return type(a)(a.var, fn(a.bound, bound), _map_terms(a.body, fn, bound | {a.var}))
    raise TypeError(f"not a formula: {a!r}")


def _term_subst(t: Term, name: str, value: Term) -> Term:
    if isinstance(t, Var) and t.name == name:
        return value
    if isinstance(t, LPlus):
        return lplus(_term_subst(t.base, name, value))
    return t


def subst(a: Formula, name: str, value: Term) -> Formula:
    """Replace free occurrences of the variable ``name``."""
    return _map_terms(a, lambda t, bound: t if name in bound else _term_subst(t, name, value))


def _term_vars(t: Term) -> set:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, LPlus):
        return _term_vars(t.base)
    return set()


def free_vars(a: Formula) -> frozenset:
    out: set = set()
    _map_terms(a, lambda t, bound: out.update(_term_vars(t) - bound) or t)
    return frozenset(out)


def terms_of(a: Formula) -> list:
    out: list = []
    _map_terms(a, lambda t, bound: out.append(t) or t)
    return out


def is_sentence(a: Formula) -> bool:
    return not free_vars(a)


def _require_sentence(a: Formula) -> None:
    if not is_sentence(a):
        raise NotSentence(f"free variables {sorted(free_vars(a))} in {text(a)}")


def has_predicate(a: Formula) -> bool:
    if isinstance(a, PREDICATES):
        return True
    if isinstance(a, ElemLit):
        return False
    if isinstance(a, (Or, And)):
        return has_predicate(a.left) or has_predicate(a.right)
    return has_predicate(a.body)


def size(a: Formula) -> int:
    if isinstance(a, LITERALS):
        return 1
    if isinstance(a, (Or, And)):
        return 1 + size(a.left) + size(a.right)
    return 1 + size(a.body)


# ------------------------------------------------------------ text format

def _operand(a: Formula) -> str:
    s = text(a)
    return f"({s})" if isinstance(a, QUANTIFIERS) else s


def text(a: Formula) -> str:
    if isinstance(a, ElemLit):
        s = f"{term_text(a.left)} in {term_text(a.right)}"
    elif isinstance(a, RegLit):
        s = f"Reg({term_text(a.arg)})"
    elif isinstance(a, PLit):
        s = f"P({term_text(a.lam)},{term_text(a.x)},{term_text(a.y)})"
    elif isinstance(a, PInLit):
        s = f"PIn({term_text(a.arg)})"
    elif isinstance(a, Or):
        return f"({_operand(a.left)} | {_operand(a.right)})"
    elif isinstance(a, And):
        return f"({_operand(a.left)} & {_operand(a.right)})"
    elif isinstance(a, Ex):
        return f"ex {a.var} in {term_text(a.bound)} . {text(a.body)}"
    elif isinstance(a, All):
        return f"all {a.var} in {term_text(a.bound)} . {text(a.body)}"
    else:
        raise TypeError(f"not a formula: {a!r}")
    return s if a.pos else "~" + s


_KEYWORDS = {"ex", "all", "in", "Reg", "P", "PIn", "L", "Lplus"}
_STOP = set(" \t\n,)&|.")


class _FormulaParser:
    def __init__(self, src: str, markers: Mapping[str, SetMarker]):
        self.src = src
        self.pos = 0
        self.markers = dict(markers)
        self.bound: list = []

    def error(self, msg: str):
        raise OrdSyntaxError(msg, self.pos)

    def ws(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.ws()
        return self.src.startswith(s, self.pos)

    def word_ahead(self, w: str) -> bool:
        self.ws()
        end = self.pos + len(w)
        return self.src.startswith(w, self.pos) and (end >= len(self.src) or not (self.src[end].isalnum() or self.src[end] == "_"))

    def eat(self, s: str):
        if not self.peek(s):
            self.error(f"expected {s!r}")
        self.pos += len(s)

    def ident(self) -> str:
        self.ws()
        start = self.pos
        while self.pos < len(self.src) and (self.src[self.pos].isalnum() or self.src[self.pos] == "_"):
            self.pos += 1
        if start == self.pos:
            self.error("expected an identifier")
        return self.src[start:self.pos]

    def formula(self) -> Formula:
        if self.word_ahead("ex") or self.word_ahead("all"):
            return self.quant()
        left = self.conj()
        while self.peek("|"):
            self.pos += 1
            left = Or(left, self.conj_or_quant())
        return left

    def conj_or_quant(self) -> Formula:
        if self.word_ahead("ex") or self.word_ahead("all"):
            return self.quant()
        return self.conj()

    def conj(self) -> Formula:
        left = self.unary()
        while self.peek("&"):
            self.pos += 1
            if self.word_ahead("ex") or self.word_ahead("all"):
                left = And(left, self.quant())
            else:
                left = And(left, self.unary())
        return left

    def quant(self) -> Formula:
        kind = self.ident()
        var = self.ident()
        if var in _KEYWORDS:
            self.error(f"reserved word {var!r} used as a variable")
        if not self.word_ahead("in"):
            self.error("expected 'in'")
        self.pos += 2
        bound = self.term()
        self.eat(".")
        self.bound.append(var)
        body = self.formula()
        self.bound.pop()
        return (Ex if kind == "ex" else All)(var, bound, body)

    def unary(self) -> Formula:
        if self.peek("~"):
            self.pos += 1
            return neg(self.unary())
        if self.peek("("):
            self.pos += 1
            f = self.formula()
            self.eat(")")
            return f
        if self.word_ahead("ex") or self.word_ahead("all"):
            return self.quant()
        for name, cls, arity in (("Reg", RegLit, 1), ("PIn", PInLit, 1), ("P", PLit, 3)):
            if self.word_ahead(name):
                save = self.pos
                self.pos += len(name)
                if not self.peek("("):
                    self.pos = save
                    break
                self.pos += 1
                args = [self.term()]
                for _ in range(arity - 1):
                    self.eat(",")
                    args.append(self.term())
                self.eat(")")
                return cls(*args)
        left = self.term()
        if not self.word_ahead("in"):
            self.error("expected 'in'")
        self.pos += 2
        return ElemLit(left, self.term())

    def balanced(self) -> str:
        self.ws()
        start, depth = self.pos, 0
        while self.pos < len(self.src):
            ch = self.src[self.pos]
            if ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0:
                    break
                depth -= 1
            elif depth == 0 and (ch in _STOP or self.src.startswith(" in", self.pos)):
                break
            self.pos += 1
        if start == self.pos:
            self.error("expected a term")
        return self.src[start:self.pos]

    def ordinal(self, chunk: str, offset: int) -> OrdTerm:
        try:
            return parse_ord(chunk)
        except OrdSyntaxError as e:
            raise OrdSyntaxError(f"bad ordinal {chunk!r}", offset + e.pos) from None

    def term(self) -> Term:
        self.ws()
        if self.peek("{"):
            start, depth = self.pos, 0
            while self.pos < len(self.src):
                ch = self.src[self.pos]
                depth += ch == "{"
                depth -= ch == "}"
                self.pos += 1
                if depth == 0:
                    break
            try:
                return MiniConst(decode(self.src[start:self.pos]))
            except ValueError as e:
                raise OrdSyntaxError(str(e), start) from None
        if self.word_ahead("Lplus") and self.src.startswith("(", self.pos + 5):
            self.pos += 6
            inner = self.term()
            self.eat(")")
            return lplus(inner)
        if self.word_ahead("L") and self.src.startswith("(", self.pos + 1):
            self.pos += 2
            start = self.pos
            depth = 0
            while self.pos < len(self.src) and not (self.src[self.pos] == ")" and depth == 0):
                depth += self.src[self.pos] == "("
                depth -= self.src[self.pos] == ")"
                self.pos += 1
            r = self.ordinal(self.src[start:self.pos], start)
            self.eat(")")
            return lconst(r)
        save = self.pos
        chunk = self.balanced()
        if chunk in self.bound:
            return Var(chunk)
        if chunk in self.markers:
            return self.markers[chunk]
        if chunk.isidentifier() and chunk not in ("K", "I", "w"):
            self.pos = save
            self.error(f"unknown name {chunk!r}")
        return ordconst(self.ordinal(chunk, save))


def parse_formula(src: str, markers: Mapping[str, SetMarker] | None = None) -> Formula:
    p = _FormulaParser(src, markers or {})
    f = p.formula()
    p.ws()
    if p.pos != len(src):
        p.error("trailing input")
    return f


# --------------------------------------------------------------- measures

def _union(*sets) -> frozenset:
    return frozenset().union(*sets)


@functools.lru_cache(maxsize=None)
def k_sets(a: Formula) -> tuple:
    """The rank sets (k, kE, qk): all ranks, unstratified ranks, quantifier-bound ranks."""
    if isinstance(a, ElemLit):
        kl, kr = term_rank(a.left), term_rank(a.right)
        return frozenset({kl, kr, ZERO}), frozenset({kl, ZERO}), frozenset({ZERO})
    if isinstance(a, PREDICATES):
        args = (a.arg,) if isinstance(a, (RegLit, PInLit)) else (a.lam, a.x, a.y)
        ks = frozenset({term_rank(t) for t in args} | {ZERO})
        return ks, ks, frozenset({ZERO})
    if isinstance(a, (Or, And)):
        l, r = k_sets(a.left), k_sets(a.right)
        return tuple(_union(x, y) for x, y in zip(l, r))
    rb = frozenset({term_rank(a.bound)})
    return tuple(_union(rb, s) for s in k_sets(a.body))


def k_of(a: Formula) -> frozenset:
    return k_sets(a)[0]


def kE_of(a: Formula) -> frozenset:
    return k_sets(a)[1]


def qk_of(a: Formula) -> frozenset:
    return k_sets(a)[2]


@functools.lru_cache(maxsize=None)
def rk(a: Formula) -> OrdTerm:
    if isinstance(a, ElemLit):
        return ZERO
    if isinstance(a, PREDICATES):
        return ONE
    if isinstance(a, (Or, And)):
        return succ(omax(rk(a.left), rk(a.right)))
    r = term_rank(a.bound)
    if isinstance(r, RankToken):
        raise DomainViolation("rank of a quantifier bounded by a collapse image has no term")
    inner = succ(succ(rk(subst(a.body, a.var, MiniConst(EMPTY)))))
    return omax(omega_times(r), inner)


# ---------------------------------------------------------- classification

def _unbounded(bound: Term) -> bool:
    return isinstance(bound, UniverseL_I)


@functools.lru_cache(maxsize=None)
def is_bounded(a: Formula) -> bool:
    if isinstance(a, LITERALS):
        return True
    if isinstance(a, (Or, And)):
        return is_bounded(a.left) and is_bounded(a.right)
    return not _unbounded(a.bound) and is_bounded(a.body)


def is_delta0(a: Formula) -> bool:
    return is_bounded(a) and not has_predicate(a)


def _ranks_below(ranks: Iterable, lam) -> bool:
    return all(rank_lt(r, lam) is True for r in ranks)


def is_delta0_at(a: Formula, lam: OrdTerm) -> bool:
    return is_delta0(a) and _ranks_below(k_of(a), lam)


def _is_level_bound(bound: Term, lam: OrdTerm) -> bool:
    if isinstance(lam, AtomI):
        return isinstance(bound, UniverseL_I)
    return isinstance(bound, LConst) and bound.rank == lam


def _prenex_levels(a: Formula, unbounded: Callable[[Term], bool], matrix_ok: Callable[[Formula], bool]):
    """Least (sigma, pi) levels of a prenex formula, or (None, None)."""
    if matrix_ok(a):
        return 0, 0
    if isinstance(a, QUANTIFIERS) and unbounded(a.bound):
        s, p = _prenex_levels(a.body, unbounded, matrix_ok)
        if s is None:
            return None, None
        if isinstance(a, Ex):
            level = max(1, min(s, p + 1))
            return level, level + 1
        level = max(1, min(p, s + 1))
        return level + 1, level
    return None, None


def sigma_pi_levels(a: Formula, lam: OrdTerm | None = None) -> tuple:
    """(sigma, pi) levels for the plain classes (``lam`` None) or the classes relative to L_lam."""
    if lam is None:
        return _prenex_levels(a, _unbounded, is_delta0)
    return _prenex_levels(a, lambda b: _is_level_bound(b, lam), lambda f: is_delta0_at(f, lam))


def in_sigma(a: Formula, m: int, lam: OrdTerm | None = None) -> bool:
    s, _ = sigma_pi_levels(a, lam)
    return s is not None and s <= m


def in_pi(a: Formula, m: int, lam: OrdTerm | None = None) -> bool:
    _, p = sigma_pi_levels(a, lam)
    return p is not None and p <= m


def in_first_order(a: Formula, lam: OrdTerm) -> bool:
    """Membership in the first-order class over L_lam (some finite prenex level)."""
    return sigma_pi_levels(a, lam)[0] is not None


K_PLUS = RegSuc(K)


def in_sigma_sigma(a: Formula, lam, n: int = 1) -> bool:
    if in_sigma(a, n + 1):
        return True
    if isinstance(a, LITERALS):
        return True
    if isinstance(a, (Or, And)):
        return in_sigma_sigma(a.left, lam, n) and in_sigma_sigma(a.right, lam, n)
    body0 = subst(a.body, a.var, MiniConst(EMPTY))
    r = rank_cmp(term_rank(a.bound), lam)
    if r is None:
        return False
    ok = r < 0 if isinstance(a, All) else r <= 0
    return ok and in_sigma_sigma(body0, lam, n)


@dataclass(frozen=True)
class Classification:
    delta0: bool
    delta0_lam: bool
    sigma: int | None
    pi: int | None
    sigma_lam: int | None
    pi_lam: int | None
    first_order_lam: bool
    sigma_sigma: bool

    def flags(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def classify(a: Formula, lam: OrdTerm, n: int = 1) -> Classification:
    s, p = sigma_pi_levels(a)
    sl, pl = sigma_pi_levels(a, lam)
    return Classification(
        delta0=is_delta0(a),
        delta0_lam=is_delta0_at(a, lam),
        sigma=s if s is not None and s <= n + 1 else None,
        pi=p if p is not None and p <= n + 1 else None,
        sigma_lam=sl if sl is not None and sl <= n + 1 else None,
        pi_lam=pl if pl is not None and pl <= n + 1 else None,
        first_order_lam=sl is not None,
        sigma_sigma=in_sigma_sigma(a, lam, n),
    )


def k_E_K(a: Formula) -> frozenset:
    """kE when the formula is first order over L at K^+, else k."""
    return kE_of(a) if in_first_order(a, K_PLUS) else k_of(a)


# ------------------------------------------------------------------ truth

def literal_truth(lit: Formula) -> bool:
    """Truth of an ElemLit sentence; raises OutOfFragment when undecidable."""
    if not isinstance(lit, ElemLit):
        raise TypeError("literal_truth expects a membership literal")
    _require_sentence(lit)
    return _member(lit.left, lit.right) == lit.pos


def _member(t: Term, s: Term) -> bool:
    if isinstance(s, MiniConst):
        return isinstance(t, MiniConst) and t.value in s.value
    if isinstance(s, UniverseL_I):
        return not isinstance(t, UniverseL_I)
    if isinstance(s, (LConst, LPlus)):
        r = rank_lt(term_rank(t), term_rank(s))
        if r is None:
            raise OutOfFragment(f"rank comparison of {term_text(t)} with {term_text(s)} is undecided")
        return r
    if isinstance(s, OrdConst):
        a = ordinal_of(t)
        if a is None:
            return False
        r = rank_lt(a, s.ord)
        if r is None:
            raise OutOfFragment(f"ordinal comparison of {term_text(t)} with {term_text(s)} is undecided")
        return r
    if isinstance(s, SetMarker):
        base = replace(t, restrict=None) if isinstance(t, SetMarker) else t
        if base not in s.members:
            return False
        return s.restrict is None or rank_lt(term_rank(t), s.restrict) is True
    raise NotSentence(f"cannot decide membership in {term_text(s)}")


def evaluable(a: Formula) -> bool:
    """True when every constant is hereditarily finite, so ``eval_delta0`` applies."""
    return is_delta0(a) and all(isinstance(t, (MiniConst, Var)) for t in terms_of(a))


def truth(a: Formula, cfg: UniverseCfg | None = None) -> bool:
    """Truth of a sentence: direct evaluation when hereditarily finite, else literal rules."""
    _require_sentence(a)
    if evaluable(a):
        return eval_delta0(a, cfg)
    if isinstance(a, ElemLit):
        return literal_truth(a)
    if isinstance(a, Or):
        return truth(a.left, cfg) or truth(a.right, cfg)
    if isinstance(a, And):
        return truth(a.left, cfg) and truth(a.right, cfg)
    if isinstance(a, PREDICATES):
        base = replace(a, pos=True)
        fn = reg_truth if isinstance(a, RegLit) else p_truth if isinstance(a, PLit) else pin_truth
        return fn(base) == a.pos
    if isinstance(a, QUANTIFIERS) and isinstance(a.bound, (MiniConst, SetMarker)):
        fam = bound_members(a.bound)
        vals = (truth(subst(a.body, a.var, i), cfg) for i in fam.indices)
        return any(vals) if isinstance(a, Ex) else all(vals)
    raise OutOfFragment(f"truth of {text(a)} is not decidable at desk scale")


# -------------------------------------------------------------- decompose

@dataclass(frozen=True)
class LogicCfg:
    n: int = 1
    universe: UniverseCfg = field(default_factory=UniverseCfg)


def _ordinal_sample(bound: OrdTerm) -> list:
    cands = [nat(k) for k in range(4)] + [K, K_PLUS, PsiI(ZERO)] + H._below(bound, 1)
    seen, out = set(), []
    for c in cands:
        if c not in seen and rank_lt(c, bound) is True:
            seen.add(c)
            out.append(c)
    return sorted(out, key=sort_key)


@dataclass(frozen=True)
class IndexFamily:
    """The index set J of a decomposition: explicit when ``complete``, else a sample of members of ``bound``."""

    indices: tuple
    complete: bool
    bound: Term | None = None

    def contains(self, iota) -> bool:
        if self.complete or self.bound is None:
            return iota in self.indices
        if not isinstance(iota, Term) or free_vars(ElemLit(iota, iota)):
            return False
        try:
            return _member(iota, self.bound)
        except OutOfFragment:
            return False

    def __len__(self) -> int:
        return len(self.indices)


def bound_members(bound: Term, cfg: LogicCfg | None = None) -> IndexFamily:
    """Members of a quantifier bound: exact for finite sets, otherwise a deterministic sample."""
    cfg = cfg or LogicCfg()
    key = term_text(bound)
    if isinstance(bound, MiniConst):
        return IndexFamily(tuple(MiniConst(e) for e in bound.value), True, bound)
    if isinstance(bound, SetMarker):
        ms = [m for m in bound.members if _member(m, bound)]
        return IndexFamily(tuple(sorted(ms, key=term_text)), True, bound)
    if isinstance(bound, Var):
        raise NotSentence(f"quantifier bound {key} is a free variable")
    if key in cfg.universe.surrogate_lists:
        return IndexFamily(tuple(cfg.universe.surrogate_lists[key]), False, bound)
    r = term_rank(bound)
    if isinstance(r, RankToken):
        r = r.desc.x
    if isinstance(bound, OrdConst):
        return IndexFamily(tuple(ordconst(a) for a in _ordinal_sample(r)), False, bound)
    sets = [MiniConst(s) for s in cfg.universe.sets if rank_lt(nat(rk_L(s)), r)]
    extra = []
    for a in _ordinal_sample(r):
        if as_natural(a) is None:
            extra.append(OrdConst(a))
            extra.append(lconst(a))
    return IndexFamily(tuple(dict.fromkeys(sets + extra)), False, bound)


def index_rank(iota) -> OrdTerm:
    if isinstance(iota, int):
        return nat(iota)
    return term_rank(iota)


@dataclass(frozen=True)
class Decomposition:
    kind: str           # "or" or "and"
    family: IndexFamily
    part: Callable = field(compare=False)
    clause: str = ""

    def parts(self) -> list:
        return [self.part(i) for i in self.family.indices]


def _no_parts(i):
    from .errors import BadIndex

    raise BadIndex(f"index {i!r} in an empty family")


def eq_standin(t: Term, pos: bool = True) -> ElemLit:
    """A rank-0 literal standing for t = t (pos) or t != t."""
    return ElemLit(t, t, pos=not pos)


def p_truth(lit: PLit) -> bool:
    lam, x, y = ordinal_of(lit.lam), ordinal_of(lit.x), lit.y
    if lam is None or x is None or not isinstance(lam, RegSuc):
        return False
    if not (isinstance(x, PsiR) and x.kappa == lam):
        return False
    try:
        if not (H.psi_wf(lam, x.index) and H.psi_normal(x)):
            return False
    except SortError:
        return False
    tok = ordinal_of(y) if isinstance(y, OrdConst) else None
    return isinstance(tok, RankToken) and tok.desc == CollapseDescriptor("reg", x, lam)


def pin_truth(lit: PInLit) -> bool:
    x = ordinal_of(lit.arg)
    return isinstance(x, PsiI) and H.psi_normal(x)


def reg_truth(lit: RegLit) -> bool:
    a = ordinal_of(lit.arg)
    return isinstance(a, RegSuc)


def _mu_guard(a: Formula, n: int) -> bool:
    ex = a if isinstance(a, Ex) else neg(a)
    if has_predicate(ex) or any(isinstance(t, SetMarker) for t in terms_of(ex)):
        return False
    return in_sigma(ex, n) and not in_first_order(ex, K_PLUS)


def mu(bound: Term, var: str, body: Formula, cfg: LogicCfg | None = None) -> MiniSet:
    """The least member d of ``bound`` with body[d] true, else the empty set."""
    from .universe import mu_select

    cfg = cfg or LogicCfg()
    fam = bound_members(bound, cfg)
    members = [i.value for i in fam.indices if isinstance(i, MiniConst)]
    return mu_select(members, lambda d: truth(subst(body, var, MiniConst(d)), cfg.universe))


def _surely_member(d: MiniConst, bound: Term) -> bool:
    """Membership of a mini set in a level above its rank; stands in as the true literal d notin d."""
    if isinstance(bound, UniverseL_I):
        return True
    return isinstance(bound, LConst) and rank_lt(nat(rk_L(d.value)), term_rank(bound)) is True


def decompose(a: Formula, cfg: LogicCfg | None = None) -> Decomposition:
    cfg = cfg or LogicCfg()
    _require_sentence(a)
    if isinstance(a, ElemLit):
        kind = "and" if literal_truth(a) else "or"
        return Decomposition(kind, IndexFamily((), True), _no_parts, "literal")
    if isinstance(a, PREDICATES):
        if isinstance(a, RegLit):
            holds = reg_truth(replace(a, pos=True))
        elif isinstance(a, PLit):
            holds = p_truth(replace(a, pos=True))
        else:
            holds = pin_truth(replace(a, pos=True))
        subject = a.lam if isinstance(a, PLit) else a.arg
        fam = IndexFamily((0,) if holds else (), True)
        kind = "or" if a.pos else "and"
        return Decomposition(kind, fam, lambda i: eq_standin(subject, a.pos), "predicate")
    if isinstance(a, (Or, And)):
        kind = "or" if isinstance(a, Or) else "and"
        pair = (a.left, a.right)
        return Decomposition(kind, IndexFamily((0, 1), True), lambda i: pair[i], "connective")
    kind = "or" if isinstance(a, Ex) else "and"
    witness = None
    if _mu_guard(a, cfg.n):
        theta = a.body if isinstance(a, Ex) else neg(a.body)
        try:
            witness = MiniConst(mu(a.bound, a.var, theta, cfg))
        except OutOfFragment:
            pass  # undecidable instances fall back to the member family
    if witness is not None:
        d = witness
        member = ElemLit(d, d, False) if _surely_member(d, a.bound) else ElemLit(d, a.bound)
        inst = And(member, subst(theta, a.var, d))
        part = inst if isinstance(a, Ex) else neg(inst)
        return Decomposition(kind, IndexFamily((d,), True), lambda i: part, "mu")
    fam = bound_members(a.bound, cfg)
    return Decomposition(kind, fam, lambda i: subst(a.body, a.var, i), "members")


# ------------------------------------------------------------ restriction

def restrict_exists(a: Formula, lam: OrdTerm, alpha: OrdTerm) -> Formula:
    if not isinstance(a, Ex):
        raise ShapeMismatch("restriction needs an existential formula")
    if rank_cmp(term_rank(a.bound), lam) != 0:
        raise ShapeMismatch(f"outermost bound has rank {rank_text(term_rank(a.bound))}, not {to_text(lam)}")
    if _c(alpha, lam) >= 0:
        raise ShapeMismatch("restriction must lower the bound")
    return Ex(a.var, lconst(alpha), a.body)


def _restrict_term(t: Term, pi: OrdTerm) -> Term:
    if isinstance(t, UniverseL_I):
        raise OutOfFragment("L_I does not occur in the reflection fragment")
    if isinstance(t, OrdConst) and t.ord == K:
        return ordconst(pi)
    if isinstance(t, LConst) and t.rank == K:
        return lconst(pi)
    if isinstance(t, LConst) and t.rank == K_PLUS:
        return lplus(OrdConst(pi))
    if isinstance(t, SetMarker):
        return t.restricted(pi)
    if isinstance(t, LPlus):
        return lplus(_restrict_term(t.base, pi))
    return t


def restrict_pi(a: Formula, pi: OrdTerm) -> Formula:
    """Relativize K-bounds to pi and set parameters to their traces below pi."""
    if not is_regular(pi):
        raise SortError("pi must be of regular sort")

    def check(f: Formula) -> None:
        if isinstance(f, PREDICATES):
            raise OutOfFragment(f"predicate literal {text(f)} outside the reflection fragment")
        if isinstance(f, (Or, And)):
            check(f.left)
            check(f.right)
        elif isinstance(f, QUANTIFIERS):
            check(f.body)

    check(a)
    return _map_terms(a, lambda t, bound: _restrict_term(t, pi))


def collapse_formula(a: Formula, desc: CollapseDescriptor, n: int = 1) -> Formula:
    """Substitute collapse images: constants below x stay, L_I becomes L at the image of I."""
    level = 1 if desc.kind == "reg" else n
    if not (in_sigma(a, level) or in_pi(a, level)):
        raise DomainViolation(f"{text(a)} is outside the collapse's formula class")
    token = desc.image_of_I

    def image(t: Term, bound) -> Term:
        if isinstance(t, Var):
            return t
        if isinstance(t, UniverseL_I):
            return LConst(token)
        r = term_rank(t)
        if isinstance(r, OrdTerm) and _c(r, desc.x) < 0:
            return t
        if desc.kind == "reg" and isinstance(t, OrdConst) and t.ord == desc.lam:
            return OrdConst(desc.x)
        raise DomainViolation(f"{term_text(t)} lies outside the declared hull of the collapse")

    return _map_terms(a, image)


# -------------------------------------------------------------------- tau

def _x(name: str) -> Var:
    return Var(name)


def is_limit(x: Term) -> Formula:
    y, z = "y_", "z_"
    nonzero = Ex(y, x, ElemLit(_x(y), _x(y), False))
    unbounded = All(y, x, Ex(z, x, ElemLit(_x(y), _x(z))))
    return And(nonzero, unbounded)


def club(c: Term, rho: Term) -> Formula:
    """(c is club)^rho: unbounded in rho and closed at limits below rho."""
    x, y, z = "x_", "y_", "z_"
    unbounded = All(x, rho, Ex(y, rho, And(ElemLit(_x(x), _x(y)), ElemLit(_x(y), c))))
    unb_at = All(y, _x(x), Ex(z, _x(x), And(ElemLit(_x(y), _x(z)), ElemLit(_x(z), c))))
    closed = All(x, rho, disj(neg(is_limit(_x(x))), neg(unb_at), ElemLit(_x(x), c)))
    return And(unbounded, closed)


def subset_of(c: Term, rho: Term) -> Formula:
    return All("x_", c, ElemLit(Var("x_"), rho))


def disjoint(b: Term, c: Term, rho: Term) -> Formula:
    return All("x_", rho, Or(ElemLit(Var("x_"), b, False), ElemLit(Var("x_"), c, False)))


def tau_builder(b: SetMarker, rho: Term) -> Formula:
    """tau(B, rho): some club subset of rho inside L at rho^+ misses B."""
    if not isinstance(b, SetMarker):
        raise SortError("tau expects a set-parameter marker")
    if not isinstance(rho, Var):
        if not is_ordinal_term(rho):
            raise SortError(f"tau at {term_text(rho)}: expected an ordinal or a variable")
        return subst(tau_builder(b, Var("r_")), "r_", rho)
    c = Var("C_")
    return Ex("C_", lplus(rho), conj(subset_of(c, rho), club(c, rho), disjoint(b, c, rho)))


def meets(b: Term, c: Term, rho: Term) -> Formula:
    """B and C share a point below rho (the negation of disjointness)."""
    return neg(disjoint(b, c, rho))


def axiom4(b: SetMarker) -> Formula:
    """The reflection instance: B not below K, or tau(B,K), or tau fails at some rho < K."""
    k = OrdConst(K)
    not_sub = neg(subset_of(b, k))
    return disj(not_sub, tau_builder(b, k), Ex("r_", k, neg(tau_builder(b, Var("r_")))))


def reflection_premise(b: SetMarker) -> Formula:
    return All("r_", OrdConst(K), tau_builder(b, Var("r_")))


def is_stratified(a: Formula, marker_name: str) -> bool:
    """The marker occurs only as the right operand of membership literals."""
    ok = True

    def visit(f: Formula) -> None:
        nonlocal ok
        if isinstance(f, ElemLit):
            if isinstance(f.left, SetMarker) and f.left.name == marker_name:
                ok = False
        elif isinstance(f, PREDICATES):
            for t in terms_of(f):
                if isinstance(t, SetMarker) and t.name == marker_name:
                    ok = False
        elif isinstance(f, (Or, And)):
            visit(f.left)
            visit(f.right)
        else:
            if isinstance(f.bound, SetMarker) and f.bound.name == marker_name:
                ok = False
            visit(f.body)

    visit(a)
    return ok


def all_literals(a: Formula) -> Iterable[Formula]:
    if isinstance(a, LITERALS):
        yield a
    elif isinstance(a, (Or, And)):
        yield from all_literals(a.left)
        yield from all_literals(a.right)
    else:
        yield from all_literals(a.body)


def mentions(a: Formula, pred: Callable[[Term], bool]) -> bool:
    return any(pred(t) for t in terms_of(a))

