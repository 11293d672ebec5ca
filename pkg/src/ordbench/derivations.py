"""Derivation notations, their one-step checker and the proof transformers.

A notation is a :class:`Deriv` node: a tag, the arguments that determine it and
a cached :class:`Judgment`.  Premises are never stored for transformer tags;
they are produced on demand by :func:`rule_view`, which answers "which rule
ends this derivation and what are its premises".  Every check is local, so
infinitary derivations are handled by sampling index families.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

from . import formulas as F
from . import hull as H
from .errors import (
    BadIndex,
    BoundNotInHull,
    DomainViolation,
    ExpansionBudgetExceeded,
    GapViolation,
    MainFormulaMismatch,
    NotDelta0,
    NotFalse,
    NotPresent,
    NotSentence,
    NotSigmaSigma,
    NotSmaller,
    NotTrue,
    OrdbenchError,
    OutOfFragment,
    RankWindowViolation,
    ShapeMismatch,
    SortError,
    StageError,
    WrongCutRank,
)
from .ordinals import (
    I,
    K,
    ONE,
    ZERO,
    AtomI,
    OrdTerm,
    Phi,
    PsiI,
    PsiR,
    RegSuc,
    W,
    _c,
    add,
    below_hn,
    from_parts,
    is_regular,
    le,
    lt,
    nsum,
    omax,
    omega_tower,
    parts,
    sort_key,
    succ,
    succ_level,
    regular_at,
    to_text,
    veblen,
    wexp,
)

K_PLUS = F.K_PLUS


# ------------------------------------------------------------------ records

@dataclass(frozen=True)
class Ctrl:
    """Operator and side parameters: H_gamma[theta0], the set Theta and the cardinal kappa."""

    gamma: OrdTerm = ZERO
    theta0: frozenset = frozenset()
    theta: frozenset = frozenset()
    kappa: OrdTerm = I

    def __post_init__(self):
        if not (is_regular(self.kappa) or isinstance(self.kappa, AtomI)):
            raise SortError("kappa must be regular or I")

    def hull(self, extra: Iterable = ()) -> H.HullCtx:
        return H.HullCtx(alpha=self.gamma, beta=ZERO, theta=self.theta0 | frozenset(extra))


@dataclass(frozen=True)
class Judgment:
    ctrl: Ctrl
    hgt: OrdTerm
    crk: OrdTerm
    sequent: frozenset


@dataclass(frozen=True)
class Obligation:
    """A side condition: ``checked_true``/``checked_false`` when decided, ``assumed`` otherwise."""

    kind: str
    payload: str
    status: str

    def as_dict(self) -> dict:
        return {"kind": self.kind, "payload": self.payload, "status": self.status}


def _decided(kind: str, payload: str, ok: bool) -> Obligation:
    return Obligation(kind, payload, "checked_true" if ok else "checked_false")


def _assumed(kind: str, payload: str) -> Obligation:
    return Obligation(kind, payload, "assumed")


@dataclass(frozen=True, eq=False)
class Deriv:
    tag: str
    args: dict = field(repr=False)
    judgment: Judgment
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def concl(self) -> frozenset:
        return self.judgment.sequent

    @property
    def hgt(self) -> OrdTerm:
        return self.judgment.hgt

    @property
    def crk(self) -> OrdTerm:
        return self.judgment.crk

    @property
    def ctrl(self) -> Ctrl:
        return self.judgment.ctrl

    def summary(self) -> str:
        return (f"{self.tag}: |seq|={len(self.concl)} hgt={to_text(self.hgt)} "
                f"crk={to_text(self.crk)} gamma={to_text(self.ctrl.gamma)}")


@dataclass
class RuleView:
    """The last inference of a derivation.

    ``rule`` is one of or, and, cut, refk, F, P, PIn, hyp.  For ``and`` the
    premises are indexed by ``family``; otherwise by ``labels`` (or the single
    ``index`` of an ``or``).
    """

    rule: str
    premise: Callable = None
    main: F.Formula | None = None
    index: object = None
    family: F.IndexFamily | None = None
    labels: tuple = ()
    cut: F.Formula | None = None
    info: dict = field(default_factory=dict)

    def premise_labels(self, sampler: "Sampler") -> list:
        if self.rule == "or":
            return [self.index]
        if self.rule == "and":
            return sampler.choose(self.family)
        return list(self.labels)


@dataclass(frozen=True)
class Sampler:
    """Deterministic choice of indices from (possibly sampled) families."""

    limit: int = 3
    seed: int = 0

    def choose(self, family: F.IndexFamily) -> list:
        items = sorted(family.indices, key=_index_key)
        if len(items) <= self.limit:
            return items
        return random.Random(self.seed).sample(items, self.limit)


def _index_key(i) -> str:
    return str(i) if isinstance(i, (int, str)) else F.term_text(i)


def _ftext(a: F.Formula) -> str:
    return F.text(a)


def _seq_text(seq: Iterable[F.Formula]) -> list:
    return sorted(_ftext(a) for a in seq)


def _ord_ranks(ranks: Iterable) -> frozenset:
    return frozenset(r for r in ranks if isinstance(r, OrdTerm))


def _seq_ranks(seq: Iterable[F.Formula]) -> frozenset:
    out: set = set()
    for a in seq:
        out |= F.k_of(a)
    return _ord_ranks(out)


def default_ctrl(seq: Iterable[F.Formula], kappa: OrdTerm = I) -> Ctrl:
    return Ctrl(gamma=ZERO, theta0=_seq_ranks(seq), kappa=kappa)


def _decomp(a: F.Formula, cfg: F.LogicCfg | None = None) -> F.Decomposition:
    return F.decompose(a, cfg or F.LogicCfg())


def _part(a: F.Formula, iota) -> F.Formula:
    dec = _decomp(a)
    if not dec.family.contains(iota):
        raise BadIndex(f"{_index_key(iota)} is not an index of {_ftext(a)}")
    return dec.part(iota)


def _rank_of_index(iota):
    return F.index_rank(iota)


# ------------------------------------------------------------- registries

_JUDGE: dict = {}
_VIEW: dict = {}
_OBLIG: dict = {}


def _register(tag: str, judge, view, oblig=None) -> None:
    _JUDGE[tag] = judge
    _VIEW[tag] = view
    if oblig is not None:
        _OBLIG[tag] = oblig


def _make(tag: str, **args) -> Deriv:
    return Deriv(tag, args, _JUDGE[tag](args))


def expected_judgment(d: Deriv) -> Judgment:
    return _JUDGE[d.tag](d.args)


def rule_view(d: Deriv) -> RuleView:
    if "view" not in d.cache:
        d.cache["view"] = _VIEW[d.tag](d)
    return d.cache["view"]


def prem(d: Deriv, label) -> Deriv:
    v = rule_view(d)
    if v.rule == "and" and not v.family.contains(label):
        raise BadIndex(f"{_index_key(label)} is not an index of the last inference")
    if v.rule == "or" and label != v.index:
        raise BadIndex("an or-inference has exactly one premise")
    if v.rule not in ("and", "or") and label not in v.labels:
        raise BadIndex(f"unknown premise label {label!r}")
    return v.premise(label)


def _push(v: RuleView, fn: Callable) -> RuleView:
    """The same inference with every premise passed through ``fn(label, premise)``."""
    if v.rule == "hyp" or v.premise is None:
        return v
    old = v.premise
    return replace(v, premise=lambda i: fn(i, old(i)))


def _hyp_view(note: str) -> RuleView:
    return RuleView("hyp", info={"note": note})


# ------------------------------------------------------------ basic rules

def _or_judge(a: dict) -> Judgment:
    sub = a["sub"]
    concl = a.get("concl")
    if concl is None:
        part = _part(a["main"], a["index"])
        concl = (sub.concl - {part}) | {a["main"]} | a.get("side", frozenset())
    return Judgment(a.get("ctrl") or sub.ctrl, a.get("hgt") or succ(sub.hgt),
                    a.get("crk") or sub.crk, frozenset(concl))


def or_i(sub: Deriv, main: F.Formula, index, *, side=frozenset(), concl=None,
         hgt=None, crk=None, ctrl=None) -> Deriv:
    """Disjunction introduction on ``main`` with the chosen ``index``."""
    return _make("OrI", sub=sub, main=main, index=index, side=frozenset(side),
                 concl=concl, hgt=hgt, crk=crk, ctrl=ctrl)


def _or_view(d: Deriv) -> RuleView:
    a = d.args
    return RuleView("or", main=a["main"], index=a["index"], premise=lambda i: a["sub"])


def _and_judge(a: dict) -> Judgment:
    prems = a["premises"]
    if a.get("concl") is not None:
        concl = a["concl"]
    else:
        if not isinstance(prems, dict):
            raise ShapeMismatch("a lazy and-inference needs an explicit conclusion")
        concl = {a["main"]} | set(a.get("side", ()))
        for i, p in prems.items():
            concl |= p.concl - {_part(a["main"], i)}
    concl = frozenset(concl)
    if isinstance(prems, dict) and prems:
        hgt = a.get("hgt") or succ(omax(*(p.hgt for p in prems.values())))
        crk = a.get("crk") or omax(*(p.crk for p in prems.values()))
        ctrl = a.get("ctrl") or next(iter(prems.values())).ctrl
    else:
        hgt = a.get("hgt") or ZERO
        crk = a.get("crk") or ZERO
        ctrl = a.get("ctrl") or default_ctrl(concl)
    return Judgment(ctrl, hgt, crk, concl)


def and_i(main: F.Formula, premises, *, side=frozenset(), concl=None, hgt=None,
          crk=None, ctrl=None) -> Deriv:
    """Conjunction introduction; ``premises`` maps indices to derivations or is a callable."""
    return _make("AndI", main=main, premises=premises, side=frozenset(side),
                 concl=concl, hgt=hgt, crk=crk, ctrl=ctrl)


def leaf(main: F.Formula, side=frozenset(), **kw) -> Deriv:
    """A true literal (or any formula whose index family is empty) closes a branch."""
    return and_i(main, {}, side=side, **kw)


def _and_view(d: Deriv) -> RuleView:
    a = d.args
    fam = _decomp(a["main"]).family
    prems = a["premises"]
    if isinstance(prems, dict):
        if fam.complete:
            missing = [i for i in fam.indices if i not in prems]
            if missing:
                raise BadIndex(f"missing premise for index {_index_key(missing[0])}")
        fam = F.IndexFamily(tuple(prems), True) if not fam.complete else fam
        return RuleView("and", main=a["main"], family=fam, premise=lambda i: prems[i])
    return RuleView("and", main=a["main"], family=fam, premise=prems)


def _cut_judge(a: dict) -> Judgment:
    l, r, c = a["left"], a["right"], a["cut"]
    concl = a.get("concl")
    if concl is None:
        concl = (l.concl - {F.neg(c)}) | (r.concl - {c})
    hgt = a.get("hgt") or succ(omax(l.hgt, r.hgt))
    crk = a.get("crk") or omax(l.crk, r.crk, succ(F.rk(c)))
    ctrl = a.get("ctrl") or _join_ctrl(l.ctrl, r.ctrl)
    return Judgment(ctrl, hgt, crk, frozenset(concl))


def _join_ctrl(x: Ctrl, y: Ctrl) -> Ctrl:
    return Ctrl(omax(x.gamma, y.gamma), x.theta0 | y.theta0, x.theta | y.theta, x.kappa)


def cut(left: Deriv, right: Deriv, formula: F.Formula, *, concl=None, hgt=None,
        crk=None, ctrl=None) -> Deriv:
    """Cut on ``formula``: ``left`` proves its negation, ``right`` proves it."""
    return _make("Cut", left=left, right=right, cut=formula, concl=concl, hgt=hgt,
                 crk=crk, ctrl=ctrl)


def _cut_view(d: Deriv) -> RuleView:
    a = d.args
    ps = {"left": a["left"], "right": a["right"]}
    return RuleView("cut", labels=("left", "right"), cut=a["cut"], premise=ps.__getitem__)


def _refk_judge(a: dict) -> Judgment:
    l, r, b = a["left"], a["right"], a["marker"]
    concl = a.get("concl")
    if concl is None:
        concl = (l.concl - {F.neg(F.tau_builder(b, F.OrdConst(K)))}) | (r.concl - {F.reflection_premise(b)})
    hgt = a.get("hgt") or succ(omax(l.hgt, r.hgt))
    crk = a.get("crk") or omax(l.crk, r.crk)
    return Judgment(a.get("ctrl") or _join_ctrl(l.ctrl, r.ctrl), hgt, crk, frozenset(concl))


def refk(left: Deriv, right: Deriv, marker: F.SetMarker, *, concl=None, hgt=None,
         crk=None, ctrl=None) -> Deriv:
    """Reflection at K for the set parameter ``marker``."""
    return _make("RefK", left=left, right=right, marker=marker, concl=concl, hgt=hgt,
                 crk=crk, ctrl=ctrl)


def _refk_view(d: Deriv) -> RuleView:
    a = d.args
    ps = {"left": a["left"], "right": a["right"]}
    return RuleView("refk", labels=("left", "right"), premise=ps.__getitem__,
                    info={"marker": a["marker"]})


def _refk_oblig(d: Deriv) -> list:
    b = d.args["marker"]
    return [_decided("OrdLt", f"rk({b.name}) < K^+", lt(b.rank, K_PLUS)),
            _assumed("HullMember", f"{b.name} is definable from K and K^+")]


def _hyp_judge(a: dict) -> Judgment:
    return Judgment(a["ctrl"], a["hgt"], a["crk"], frozenset(a["sequent"]))


def hyp(sequent: Iterable[F.Formula], hgt: OrdTerm, crk: OrdTerm, ctrl: Ctrl, note: str) -> Deriv:
    """An assumed leaf; it is never checked, only reported as an obligation."""
    return _make("Hyp", sequent=frozenset(sequent), hgt=hgt, crk=crk, ctrl=ctrl, note=note)


def _hyp_oblig(d: Deriv) -> list:
    return [_assumed("TruthOracle", d.args["note"])]


def p_existential(lam: OrdTerm, alpha: OrdTerm) -> F.Formula:
    lt_ = F.OrdConst(lam)
    x, y = F.Var("x_"), F.Var("y_")
    return F.Ex("x_", lt_, F.Ex("y_", lt_, F.And(F.ElemLit(F.ordconst(alpha), x), F.PLit(lt_, x, y))))


def pin_existential(alpha: OrdTerm) -> F.Formula:
    x = F.Var("x_")
    return F.Ex("x_", F.OrdConst(I), F.And(F.ElemLit(F.ordconst(alpha), x), F.PInLit(x)))


def _pax_judge(a: dict) -> Judgment:
    lam, alpha = a.get("lam"), a["alpha"]
    main = p_existential(lam, alpha) if lam is not None else pin_existential(alpha)
    concl = frozenset({main}) | a.get("side", frozenset())
    return Judgment(a.get("ctrl") or default_ctrl(concl), a.get("hgt") or ZERO, ZERO, concl)


def p_lam_ax(lam: OrdTerm, alpha: OrdTerm, side=frozenset(), **kw) -> Deriv:
    if not isinstance(lam, RegSuc):
        raise SortError("the collapse axiom needs a successor cardinal")
    if not lt(alpha, lam):
        raise NotSmaller("alpha must lie below lambda")
    return _make("PLamAx", lam=lam, alpha=alpha, side=frozenset(side), **kw)


def p_in_ax(alpha: OrdTerm, side=frozenset(), **kw) -> Deriv:
    if not lt(alpha, I):
        raise NotSmaller("alpha must lie below I")
    return _make("PInAx", alpha=alpha, side=frozenset(side), **kw)


def _pax_view(d: Deriv) -> RuleView:
    lam = d.args.get("lam")
    main = p_existential(lam, d.args["alpha"]) if lam is not None else pin_existential(d.args["alpha"])
    return RuleView("P" if lam is not None else "PIn", main=main)


def _f_judge(a: dict) -> Judgment:
    sub, desc, g0 = a["sub"], a["desc"], frozenset(a["gamma0"])
    if not g0 <= sub.concl:
        raise NotPresent("collapsed formulas must occur in the premise")
    image = frozenset(F.collapse_formula(x, desc, a.get("n", 1)) for x in g0)
    concl = (sub.concl - g0) | image
    return Judgment(a.get("ctrl") or sub.ctrl, a.get("hgt") or succ(sub.hgt), sub.crk, concl)


def f_reg_coll(sub: Deriv, desc: F.CollapseDescriptor, gamma0: Iterable[F.Formula], **kw) -> Deriv:
    if desc.kind != "reg":
        raise SortError("regular collapse rule needs a regular descriptor")
    return _make("FRegColl", sub=sub, desc=desc, gamma0=frozenset(gamma0), **kw)


def f_i_coll(sub: Deriv, desc: F.CollapseDescriptor, gamma0: Iterable[F.Formula], n: int = 1, **kw) -> Deriv:
    if desc.kind != "I":
        raise SortError("collapse rule below I needs an I descriptor")
    return _make("FIColl", sub=sub, desc=desc, gamma0=frozenset(gamma0), n=n, **kw)


def _f_view(d: Deriv) -> RuleView:
    a = d.args
    image = frozenset(F.collapse_formula(x, a["desc"], a.get("n", 1)) for x in a["gamma0"])
    return RuleView("F", labels=("sub",), premise=lambda _l: a["sub"],
                    info={"desc": a["desc"], "gamma0": frozenset(a["gamma0"]), "image": image})


def _f_oblig(d: Deriv) -> list:
    a = d.args
    x = a["desc"].x
    ctx = d.ctrl.hull(d.ctrl.theta)
    ranks = _seq_ranks(a["gamma0"])
    below = all(lt(r, x) and H.in_hull(r, ctx) for r in ranks)
    out = [_decided("HullMember", f"{to_text(x)} in H", H.in_hull(x, ctx))]
    payload = "ranks of the collapsed formulas lie in the Sigma_1 hull below x"
    out.append(_decided("HullMember", payload, True) if below else _assumed("HullMember", payload))
    return out


_register("OrI", _or_judge, _or_view)
_register("AndI", _and_judge, _and_view)
_register("Cut", _cut_judge, _cut_view)
_register("RefK", _refk_judge, _refk_view, _refk_oblig)
_register("Hyp", _hyp_judge, lambda d: _hyp_view(d.args["note"]), _hyp_oblig)
_register("PLamAx", _pax_judge, _pax_view)
_register("PInAx", _pax_judge, _pax_view)
_register("FRegColl", _f_judge, _f_view, _f_oblig)
_register("FIColl", _f_judge, _f_view, _f_oblig)


# ------------------------------------------------------------- tautology

def _two_rk(a: F.Formula) -> OrdTerm:
    r = F.rk(a)
    return nsum(r, r)


def _taut_judge(a: dict) -> Judgment:
    f = a["formula"]
    theta0 = a.get("theta0")
    if theta0 is None:
        theta0 = _seq_ranks([f])
    concl = frozenset({f, F.neg(f)}) | a.get("side", frozenset())
    return Judgment(Ctrl(ZERO, frozenset(theta0), frozenset(), I), add(I, _two_rk(f)), ZERO, concl)


def taut(formula: F.Formula, theta0=None, side=frozenset()) -> Deriv:
    """A derivation of {A, not A} with height I + 2 rk(A)."""
    if not F.is_sentence(formula):
        raise NotSentence(f"{_ftext(formula)} has free variables")
    return _make("Taut", formula=formula, theta0=theta0, side=frozenset(side))


def _taut_view(d: Deriv) -> RuleView:
    f = d.args["formula"]
    side = d.args.get("side", frozenset())
    dis = f if _decomp(f).kind == "or" else F.neg(f)
    con = F.neg(dis)
    dec_d = _decomp(dis)
    fam = _decomp(con).family
    theta0 = d.ctrl.theta0

    def premise(i):
        extra = frozenset({_rank_of_index(i)}) & _ord_ranks([_rank_of_index(i)])
        sub = taut(dec_d.part(i), theta0=theta0 | extra)
        return or_i(sub, dis, i, side=side | {con}, hgt=succ(sub.hgt), ctrl=replace(sub.ctrl))

    return RuleView("and", main=con, family=fam, premise=premise)


_register("Taut", _taut_judge, _taut_view)


# -------------------------------------------------------- delta0 complete

def _rank_sum(seq: Iterable[F.Formula]) -> OrdTerm:
    out = ZERO
    for a in sorted(seq, key=_ftext):
        out = nsum(out, F.rk(a))
    return out


def _d0_judge(a: dict) -> Judgment:
    seq = a["sequent"]
    r = _rank_sum(seq)
    theta0 = a.get("theta0")
    ctrl = Ctrl(ZERO, theta0 if theta0 is not None else _seq_ranks(seq), frozenset(), I)
    return Judgment(ctrl, add(a["base"], nsum(r, r)), ZERO, seq)


def delta0_complete(sequent: Iterable[F.Formula], base: OrdTerm = I, theta0=None,
                    prefer: Iterable[F.Formula] = ()) -> Deriv:
    """A cut-free derivation of a true bounded sequent, height base + 2 rk(sequent).

    ``base`` is I in the general statement; finite demonstrations use 0.
    """
    seq = frozenset(sequent)
    for a in seq:
        if not F.is_sentence(a):
            raise NotSentence(f"{_ftext(a)} has free variables")
        if not F.is_delta0(a):
            raise NotDelta0(f"{_ftext(a)} is not bounded")
    if not any(_truth_or_none(a) for a in seq):
        raise NotTrue("no member of the sequent is true")
    return _make("Delta0Ax", sequent=seq, base=base, theta0=theta0, prefer=tuple(prefer))


def _truth_or_none(a: F.Formula) -> bool | None:
    try:
        return F.truth(a)
    except (OutOfFragment, NotSentence, DomainViolation):
        return None


def _d0_view(d: Deriv) -> RuleView:
    seq, base, prefer = d.args["sequent"], d.args["base"], d.args["prefer"]
    theta0 = d.ctrl.theta0
    order = sorted(seq, key=lambda a: (a not in prefer, _ftext(a)))
    rest_true = {a: any(_truth_or_none(b) for b in seq - {a}) for a in prefer if a in seq}
    main = next(a for a in order if _truth_or_none(a)
                or (rest_true.get(a) and not isinstance(a, F.LITERALS)))
    dec = _decomp(main)
    rest = seq - {main}

    def child(i):
        extra = _ord_ranks([_rank_of_index(i)])
        part = dec.part(i)
        return delta0_complete(rest | {part}, base, theta0 | extra, prefer=(*prefer, part))

    if dec.kind == "and":
        if not dec.family.complete:
            raise OutOfFragment(f"{_ftext(main)} has an infinite index family")
        return RuleView("and", main=main, family=dec.family, premise=child)
    for i in dec.family.indices:
        if _truth_or_none(dec.part(i)) or rest_true.get(main):
            return RuleView("or", main=main, index=i, premise=child)
    raise NotTrue(f"no true instance of {_ftext(main)}")


_register("Delta0Ax", _d0_judge, _d0_view)


# ------------------------------------------------------------ inversions

def _same_judge(a: dict, concl: frozenset, **changes) -> Judgment:
    j = a["sub"].judgment
    return replace(j, sequent=frozenset(concl), **changes)


def _elim_judge(a: dict) -> Judgment:
    return _same_judge(a, a["sub"].concl - a["false"])


def elim_false(d: Deriv, formulas, declared: bool = False) -> Deriv:
    """Drop false sentences from the conclusion at the same bounds.

    A sentence that cannot be evaluated is accepted only when ``declared``, and
    is then recorded as an assumed obligation.
    """
    fs = frozenset([formulas] if isinstance(formulas, F.Formula) else formulas)
    for a in fs:
        v = _truth_or_none(a)
        if v is True:
            raise NotFalse(f"{_ftext(a)} is true")
        if v is None and not declared:
            raise NotFalse(f"{_ftext(a)} is not decidably false")
    if not fs & d.concl:
        raise NotPresent("none of the sentences is in the conclusion")
    return _elim_or_keep(d, fs, declared)


def _elim_or_keep(d: Deriv, fs: frozenset, declared: bool) -> Deriv:
    if not fs & d.concl:
        return d
    return _make("ElimFalse", sub=d, false=fs, declared=declared)


def _elim_view(d: Deriv) -> RuleView:
    sub, fs, declared = d.args["sub"], d.args["false"], d.args["declared"]
    v = rule_view(sub)
    if v.main is not None and v.main in fs:
        dec = _decomp(v.main)
        if v.rule == "or":
            nxt = _elim_or_keep(v.premise(v.index), fs | {dec.part(v.index)}, declared)
            return rule_view(nxt)
        if v.rule == "and":
            for i in dec.family.indices:
                if _truth_or_none(dec.part(i)) is False:
                    return rule_view(_elim_or_keep(v.premise(i), fs | {dec.part(i)}, declared))
            raise NotFalse(f"no false instance of {_ftext(v.main)} found")
        raise MainFormulaMismatch(f"cannot eliminate the main formula of a {v.rule} inference")
    return _push(v, lambda i, p: _elim_or_keep(p, fs, declared))


def _elim_oblig(d: Deriv) -> list:
    if not d.args["declared"]:
        return []
    return [_assumed("TruthOracle", f"false: {t}") for t in _seq_text(d.args["false"])
            if _truth_or_none(next(a for a in d.args["false"] if _ftext(a) == t)) is None]


_register("ElimFalse", _elim_judge, _elim_view, _elim_oblig)


def _inv_judge(a: dict) -> Judgment:
    t = a["target"]
    inst = _decomp(t).parts()[0]
    return _same_judge(a, (a["sub"].concl - {t}) | {inst})


def invert(d: Deriv, target: F.Formula, cfg: F.LogicCfg | None = None) -> Deriv:
    """Replace a least-witness quantifier by its single instance, at the same bounds."""
    cfg = cfg or F.LogicCfg()
    dec = _decomp(target, cfg)
    if dec.clause != "mu":
        raise ShapeMismatch(f"{_ftext(target)} is not decomposed by a least witness")
    if target not in d.concl:
        if dec.part(dec.family.indices[0]) in d.concl:
            return d
        raise NotPresent(f"{_ftext(target)} is not in the conclusion")
    return _make("Inv", sub=d, target=target)


def _inv_view(d: Deriv) -> RuleView:
    sub, t = d.args["sub"], d.args["target"]
    v = rule_view(sub)
    if v.main == t and v.rule in ("or", "and"):
        i = _decomp(t).family.indices[0]
        return rule_view(invert(v.premise(i), t))
    return _push(v, lambda i, p: invert(p, t) if t in p.concl else p)


_register("Inv", _inv_judge, _inv_view)


def _andinv_judge(a: dict) -> Judgment:
    t = a["target"]
    return _same_judge(a, (a["sub"].concl - {t}) | {_decomp(t).part(a["index"])})


def and_inv(d: Deriv, target: F.Formula, index) -> Deriv:
    """Conjunction inversion: from Gamma, A derive Gamma, A_index at the same bounds."""
    dec = _decomp(target)
    if dec.kind != "and":
        raise ShapeMismatch(f"{_ftext(target)} is not conjunctive")
    if not dec.family.contains(index):
        raise BadIndex(f"{_index_key(index)} is not an index of {_ftext(target)}")
    if target not in d.concl:
        return d
    return _make("AndInv", sub=d, target=target, index=index)


def _andinv_view(d: Deriv) -> RuleView:
    sub, t, i = d.args["sub"], d.args["target"], d.args["index"]
    v = rule_view(sub)
    if v.main == t and v.rule == "and":
        return rule_view(and_inv(v.premise(i), t, i))
    return _push(v, lambda j, p: and_inv(p, t, i))


_register("AndInv", _andinv_judge, _andinv_view)


# ------------------------------------------------------------- reduction

def _red_judge(a: dict) -> Judgment:
    l, r, c = a["left"], a["right"], a["cut"]
    concl = (l.concl - {F.neg(c)}) | (r.concl - {c})
    ctrl = replace(_join_ctrl(l.ctrl, r.ctrl), theta=l.ctrl.theta)
    return Judgment(ctrl, add(l.hgt, r.hgt), omax(l.crk, r.crk), frozenset(concl))


def _reduce_core(left: Deriv, right: Deriv, formula: F.Formula) -> Deriv:
    """Eliminate a cut whose formula is disjunctive; no side conditions."""
    if _decomp(formula).kind != "or":
        raise ShapeMismatch(f"{_ftext(formula)} must be disjunctive for reduction")
    return _make("Red", left=left, right=right, cut=formula)


def _reduce_oriented(left: Deriv, right: Deriv, formula: F.Formula) -> Deriv:
    """Cut elimination step for a Cut(left, right, formula) in either polarity."""
    if _decomp(formula).kind == "or":
        return _reduce_core(left, right, formula)
    return _reduce_core(right, left, F.neg(formula))


def reduce(left: Deriv, right: Deriv, formula: F.Formula) -> Deriv:
    """Cut reduction for formulas of rank between K and the cut bound.

    ``left`` proves Delta, not C; ``right`` proves C, Gamma; the result proves
    Delta, Gamma at height hgt(left) + hgt(right).
    """
    r = F.rk(formula)
    if not le(K, r) or not le(r, omax(left.crk, right.crk)):
        raise RankWindowViolation(f"rank {to_text(r)} outside [K, crk]")
    if F.has_predicate(formula) and isinstance(formula, F.Ex):
        raise ShapeMismatch("collapse axioms are reduced by reduce_P")
    return _reduce_core(left, right, formula)


def _red_view(d: Deriv) -> RuleView:
    l, r, c = d.args["left"], d.args["right"], d.args["cut"]
    v = rule_view(r)
    if v.rule == "or" and v.main == c:
        i = v.index
        part = _decomp(c).part(i)
        ps = {"left": and_inv(l, F.neg(c), i), "right": _red_or_keep(l, v.premise(i), c)}
        return RuleView("cut", labels=("left", "right"), cut=part, premise=ps.__getitem__)
    if v.rule == "F" and c in v.info["image"]:
        raise MainFormulaMismatch("cannot reduce through a collapse rule on the cut formula")
    return _push(v, lambda i, p: _red_or_keep(l, p, c))


def _red_or_keep(l: Deriv, r: Deriv, c: F.Formula) -> Deriv:
    return _reduce_core(l, r, c) if c in r.concl else r


_register("Red", _red_judge, _red_view)


def _redp_judge(a: dict) -> Judgment:
    sub, c = a["sub"], a["cut"]
    ctrl = replace(sub.ctrl, gamma=succ(sub.ctrl.gamma))
    return Judgment(ctrl, sub.hgt, sub.crk, sub.concl - {F.neg(c)})


def _p_shape(c: F.Formula):
    """(lam or None, alpha) when ``c`` is a collapse-axiom existential."""
    if not isinstance(c, F.Ex) or not isinstance(c.bound, F.OrdConst):
        return None
    body = c.body
    if isinstance(body, F.Ex) and isinstance(body.body, F.And) and isinstance(body.body.right, F.PLit):
        lam = c.bound.ord
        alpha = F.ordinal_of(body.body.left.left)
        return (lam, alpha) if c == p_existential(lam, alpha) else None
    if isinstance(body, F.And) and isinstance(body.right, F.PInLit):
        alpha = F.ordinal_of(body.left.left)
        return (None, alpha) if c == pin_existential(alpha) else None
    return None


def reduce_P(d: Deriv, formula: F.Formula) -> Deriv:
    """Remove the negated collapse axiom ``not formula`` at the cost of gamma + 1."""
    shape = _p_shape(formula)
    if shape is None:
        raise ShapeMismatch(f"{_ftext(formula)} is not a collapse axiom")
    if F.neg(formula) not in d.concl:
        raise NotPresent("the negated axiom is not in the conclusion")
    return _make("RedP", sub=d, cut=formula)


def _redp_view(d: Deriv) -> RuleView:
    sub, c = d.args["sub"], d.args["cut"]
    lam, alpha = _p_shape(c)
    gamma = sub.ctrl.gamma
    x = PsiI(gamma) if lam is None else PsiR(lam, gamma)
    if not lt(alpha, x):
        raise NotSmaller(f"{to_text(alpha)} is not below the witness {to_text(x)}")
    nc = F.neg(c)
    step = and_inv(sub, nc, F.OrdConst(x))
    inner = _decomp(nc).part(F.OrdConst(x))
    if lam is None:
        step = elim_false(step, inner)
    else:
        y = F.OrdConst(F.RankToken(F.CollapseDescriptor("reg", x, lam)))
        step = and_inv(step, inner, y)
        step = elim_false(step, _decomp(inner).part(y))
    return rule_view(step)


def _redp_oblig(d: Deriv) -> list:
    lam, _ = _p_shape(d.args["cut"])
    g = d.args["sub"].ctrl.gamma
    x = PsiI(g) if lam is None else PsiR(lam, g)
    return [_decided("HullMember", f"{to_text(x)} in H at gamma+1", H.in_hull(x, d.ctrl.hull()))]


_register("RedP", _redp_judge, _redp_view, _redp_oblig)


# ------------------------------------------------- predicative elimination

@dataclass(frozen=True)
class PceMode:
    """Which cut-elimination statement to apply.

    kinds: ``window`` (c + w^a down to c, gap condition), ``item4`` (same bounds,
    no gap condition, operator raised), ``to_level`` (lam + 2 down to lam + 1)
    and ``to_I`` (I + 1 down to I).
    """

    kind: str
    c: OrdTerm = ZERO
    a: OrdTerm = ZERO
    lam: OrdTerm | None = None
    gap: bool = True

    @property
    def floor(self) -> OrdTerm:
        if self.kind == "to_level":
            return succ(self.lam)
        if self.kind == "to_I":
            return I
        return self.c

    @property
    def exponent(self) -> OrdTerm:
        return self.a if self.kind in ("window", "item4") else ZERO


def window(c: OrdTerm, a: OrdTerm) -> PceMode:
    return PceMode("window", c, a)


def item4(c: OrdTerm, a: OrdTerm) -> PceMode:
    return PceMode("item4", c, a)


def to_level(lam: OrdTerm) -> PceMode:
    return PceMode("to_level", lam=lam)


TO_I = PceMode("to_I")


def gap_free(c: OrdTerm, a: OrdTerm) -> bool:
    """No lam + 1 (lam a successor cardinal) and not I inside [c, c + w^a)."""
    top = add(c, wexp(a))
    if le(c, I) and lt(I, top):
        return False
    if not lt(c, I):
        return True
    level = max((succ_level(p) for p in _all_subterms(c) if is_regular(p)), default=0) + 2
    for k in range(1, level + 1):
        mark = succ(regular_at(k))
        if le(c, mark) and lt(mark, top):
            return False
    return True


def _all_subterms(t: OrdTerm) -> list:
    from .ordinals import subterms

    return list(subterms(t)) or [ZERO]


def _pce_judge(a: dict) -> Judgment:
    sub, m = a["sub"], a["mode"]
    j = sub.judgment
    if m.kind in ("window", "item4"):
        top = add(m.c, wexp(m.a))
        if not le(sub.crk, top):
            raise WrongCutRank(f"cut rank {to_text(sub.crk)} exceeds {to_text(top)}")
        hgt = veblen(m.a, sub.hgt)
        gamma = add(j.ctrl.gamma, hgt) if m.kind == "item4" else j.ctrl.gamma
        return Judgment(replace(j.ctrl, gamma=gamma), hgt, m.c, j.sequent)
    bound = succ(succ(m.lam)) if m.kind == "to_level" else succ(I)
    if not le(sub.crk, bound):
        raise WrongCutRank(f"cut rank {to_text(sub.crk)} exceeds {to_text(bound)}")
    hgt = wexp(sub.hgt)
    return Judgment(replace(j.ctrl, gamma=add(j.ctrl.gamma, sub.hgt)), hgt, m.floor, j.sequent)


def pce(d: Deriv, mode: PceMode) -> Deriv:
    """Predicative cut elimination in one of the four modes of :class:`PceMode`."""
    if mode.kind == "window" and mode.gap and not gap_free(mode.c, mode.a):
        raise GapViolation(f"window [{to_text(mode.c)}, {to_text(mode.c)}+w^{to_text(mode.a)}) "
                           "contains a successor of a cardinal or I")
    if mode.kind == "item4":
        if not all(lt(x, I) for x in (mode.a, d.hgt, mode.c)):
            raise RankWindowViolation("the operator-raising mode needs a, b, c below I")
    if mode.kind == "to_level" and not isinstance(mode.lam, RegSuc) and mode.lam != K:
        raise SortError("to_level needs a regular cardinal")
    return _make("PCE", sub=d, mode=mode)


def eliminate_cuts(d: Deriv) -> Deriv:
    """Iterate window steps, peeling the last Cantor summand of the cut rank, down to 0."""
    while d.crk != ZERO:
        ps = parts(d.crk)
        d = pce(d, window(from_parts(ps[:-1]), _exponent(ps[-1])))
    return d


def _ord_minus(r: OrdTerm, c: OrdTerm) -> OrdTerm:
    """The least suffix delta with c + delta = r."""
    ps = parts(r)
    for k in range(len(ps), -1, -1):
        delta = from_parts(ps[k:])
        if add(c, delta) == r:
            return delta
    raise RankWindowViolation(f"{to_text(r)} is not of the form {to_text(c)} + delta")


def _exponent(p: OrdTerm) -> OrdTerm:
    return p.exp if isinstance(p, W) else p


def _pce_view(d: Deriv) -> RuleView:
    sub, m = d.args["sub"], d.args["mode"]
    v = rule_view(sub)
    c = m.floor
    g = sub.ctrl.gamma
    if v.rule == "cut" and le(c, F.rk(v.cut)):
        l, r = pce(lift(v.premise("left"), g), m), pce(lift(v.premise("right"), g), m)
        if m.exponent == ZERO:
            return rule_view(_reduce_oriented(l, r, v.cut))
        delta1 = succ(_ord_minus(F.rk(v.cut), c))
        ps = parts(delta1)
        a0 = _exponent(ps[0])
        n = sum(1 for p in ps if _exponent(p) == a0) + (1 if any(_exponent(p) != a0 for p in ps) else 0)
        step = wexp(a0)
        y = cut(l, r, v.cut, crk=add(c, from_parts([step] * n)))
        for k in range(n - 1, -1, -1):
            base = add(c, from_parts([step] * k))
            sub_mode = PceMode("item4", base, a0) if m.kind == "item4" else PceMode("window", base, a0, gap=False)
            y = pce(y, sub_mode)
        return rule_view(y)
    return _push(v, lambda i, p: pce(lift(p, g), m))


_register("PCE", _pce_judge, _pce_view)


# ------------------------------------------------------------ boundedness

def _bnd_judge(a: dict) -> Judgment:
    sub, c, beta, pos = a["sub"], a["cut"], a["beta"], a["positive"]
    lam = F.rk(c)
    cb = F.restrict_exists(c, lam, beta)
    old, new = (c, cb) if pos else (F.neg(c), F.neg(cb))
    ctrl = sub.ctrl if a.get("gamma") is None else replace(sub.ctrl, gamma=a["gamma"])
    return Judgment(ctrl, sub.hgt, sub.crk, (sub.concl - {old}) | {new})


def bnd(d: Deriv, formula: F.Formula, beta: OrdTerm, positive: bool = True, *,
        gamma: OrdTerm | None = None, strict: bool = False) -> Deriv:
    """Persistence and boundedness: restrict the outer bound of ``formula`` to L_beta.

    With ``strict`` a beta that is not provably in the hull raises; otherwise it
    is recorded as an obligation.
    """
    if not isinstance(formula, F.Ex):
        raise ShapeMismatch("boundedness acts on an existential formula")
    lam = F.rk(formula)
    if F.rank_cmp(F.term_rank(formula.bound), lam) != 0:
        raise ShapeMismatch("the rank must equal the rank of the outer bound")
    if not lt(beta, lam):
        raise NotSmaller(f"{to_text(beta)} is not below {to_text(lam)}")
    if positive and not le(d.hgt, beta):
        raise NotSmaller(f"height {to_text(d.hgt)} exceeds {to_text(beta)}")
    if positive and d.ctrl.kappa != lam:
        raise ShapeMismatch("positive boundedness needs kappa equal to the rank")
    g = d.ctrl.gamma if gamma is None else gamma
    ok = H.in_hull(beta, H.HullCtx(alpha=g, beta=ZERO, theta=d.ctrl.theta0 | d.ctrl.theta))
    if strict and not ok:
        raise BoundNotInHull(f"{to_text(beta)} is not in the hull")
    target = formula if positive else F.neg(formula)
    if target not in d.concl:
        raise NotPresent(f"{_ftext(target)} is not in the conclusion")
    return _make("Bnd", sub=d, cut=formula, beta=beta, positive=positive, gamma=gamma)


def _bnd_view(d: Deriv) -> RuleView:
    a = d.args
    sub, c, beta, pos = a["sub"], a["cut"], a["beta"], a["positive"]
    cb = F.restrict_exists(c, F.rk(c), beta)
    v = rule_view(sub)

    def again(p):
        t = c if pos else F.neg(c)
        return _make("Bnd", sub=p, cut=c, beta=beta, positive=pos, gamma=a["gamma"]) if t in p.concl else p

    if pos and v.rule == "or" and v.main == c:
        old_part, new_part = _decomp(c).part(v.index), _decomp(cb).part(v.index)

        def bridged(i):
            p = v.premise(i)
            # a least-witness instance (d notin d & A(d)) narrows to A(d) under a member-family bound
            if old_part != new_part and isinstance(old_part, F.And) and old_part.right == new_part:
                p = and_inv(p, old_part, 1)
            return again(p)

        return RuleView("or", main=cb, index=v.index, premise=bridged)
    if not pos and v.rule == "and" and v.main == F.neg(c):
        ncb = F.neg(cb)
        dec_old, dec_new = _decomp(v.main), _decomp(ncb)
        if dec_old.clause != dec_new.clause:
            raise ShapeMismatch("negative boundedness cannot widen a least-witness premise to a member family")
        return RuleView("and", main=ncb, family=dec_new.family, premise=lambda i: again(v.premise(i)))
    return _push(v, lambda i, p: again(p))


def _bnd_oblig(d: Deriv) -> list:
    beta = d.args["beta"]
    ok = H.in_hull(beta, d.ctrl.hull(d.ctrl.theta))
    return [_decided("HullMember", f"{to_text(beta)} in H", ok)]


_register("Bnd", _bnd_judge, _bnd_view, _bnd_oblig)


# ------------------------------------------------------------ collapse at I

def collapse_index(gamma: OrdTerm, hgt: OrdTerm) -> OrdTerm:
    return add(gamma, wexp(add(I, hgt)))


def _coll_judge(a: dict) -> Judgment:
    sub, gamma, theta0, target = a["sub"], a["gamma"], a["theta0"], a.get("target")
    top = target if target is not None else collapse_index(gamma, sub.hgt)
    b = PsiI(top)
    ctrl = Ctrl(succ(top), frozenset(theta0), frozenset(), I)
    return Judgment(ctrl, b, b, sub.concl)


def collapse_I(d: Deriv, gamma: OrdTerm, theta0: Iterable[OrdTerm] = (), *,
               target: OrdTerm | None = None, n: int = 1) -> Deriv:
    """Impredicative collapse below I; both bounds become Psi_I(gamma + w^(I + hgt)).

    ``target`` raises the collapse index to a larger ordinal; the comparison is
    recorded as an obligation.
    """
    if not le(d.crk, succ(I)):
        raise WrongCutRank(f"collapse needs cut rank at most I+1, got {to_text(d.crk)}")
    for f in d.concl:
        if not F.in_sigma_sigma(f, I, n):
            raise NotSigmaSigma(f"{_ftext(f)} is outside the collapsible class")
    if target is not None and not le(collapse_index(gamma, d.hgt), target):
        raise NotSmaller("the raised target lies below the collapse index")
    return _make("CollI", sub=d, gamma=gamma, theta0=frozenset(theta0), target=target, n=n)


def _coll_view(d: Deriv) -> RuleView:
    a = d.args
    sub, gamma, theta0, n = a["sub"], a["gamma"], a["theta0"], a["n"]
    v = rule_view(sub)

    def again(p, extra=frozenset(), g=gamma, target=None):
        return _make("CollI", sub=p, gamma=g, theta0=theta0 | extra, target=target, n=n)

    if v.rule == "and":
        return _push(v, lambda i, p: again(p, _ord_ranks([_rank_of_index(i)])))
    if v.rule != "cut":
        return _push(v, lambda i, p: again(p))
    c = v.cut
    r = F.rk(c)
    if lt(r, I):
        return _push(v, lambda i, p: again(p))
    if r != I:
        raise WrongCutRank(f"cut of rank {to_text(r)} above I")
    left, right = v.premise("left"), v.premise("right")
    if not isinstance(c, F.Ex):
        c, left, right = F.neg(c), right, left
    if _p_shape(c) is not None:
        return rule_view(again(reduce_P(left, c), g=succ(gamma)))
    a0 = omax(left.hgt, right.hgt)
    hat0 = collapse_index(gamma, a0)
    beta0 = PsiI(hat0)
    cb = F.restrict_exists(c, I, beta0)
    rhs = bnd(again(right, target=hat0), c, beta0, True)
    lhs0 = bnd(left, c, beta0, False, gamma=succ(hat0))
    hat1 = collapse_index(succ(hat0), a0)
    lhs = _make("CollI", sub=lhs0, gamma=succ(hat0), theta0=theta0, target=hat1, n=n)
    ps = {"left": lhs, "right": rhs}
    return RuleView("cut", labels=("left", "right"), cut=cb, premise=ps.__getitem__)


def _coll_oblig(d: Deriv) -> list:
    a = d.args
    gamma, theta0 = a["gamma"], a["theta0"]
    out = [_decided("HullMember", f"{to_text(gamma)} in H_gamma[Theta]",
                    H.in_hull(gamma, H.HullCtx(gamma, ZERO, theta0)))]
    low = H.HullCtx(gamma, PsiI(gamma))
    for t in sorted(theta0, key=sort_key):
        out.append(_decided("HullMember", f"{to_text(t)} in H_gamma(Psi_I gamma)", H.in_hull(t, low)))
    if a.get("target") is not None:
        hat = collapse_index(gamma, a["sub"].hgt)
        out.append(_decided("OrdLt", f"{to_text(hat)} <= {to_text(a['target'])}", le(hat, a["target"])))
    return out


_register("CollI", _coll_judge, _coll_view, _coll_oblig)


# ------------------------------------------------------------ weakening

def _weak_judge(a: dict) -> Judgment:
    j = a["sub"].judgment
    return replace(j, ctrl=replace(j.ctrl, kappa=a["kappa"]))


def weaken_reg(d: Deriv, kappa: OrdTerm) -> Deriv:
    """Lower the cardinal parameter to a smaller regular or I."""
    if not (is_regular(kappa) or isinstance(kappa, AtomI)):
        raise SortError("kappa must be regular or I")
    if not le(kappa, d.ctrl.kappa):
        raise NotSmaller("weakening cannot raise kappa")
    if kappa == d.ctrl.kappa:
        return d
    return _make("Weak", sub=d, kappa=kappa)


def _weak_view(d: Deriv) -> RuleView:
    return _push(rule_view(d.args["sub"]), lambda i, p: weaken_reg(p, d.args["kappa"]))


_register("Weak", _weak_judge, _weak_view)


# --------------------------------------------------------- operator lift

def _lift_judge(a: dict) -> Judgment:
    j = a["sub"].judgment
    return replace(j, ctrl=replace(j.ctrl, gamma=a["gamma"]))


def lift(d: Deriv, gamma: OrdTerm) -> Deriv:
    """The same derivation read under the larger operator H_gamma."""
    if le(gamma, d.ctrl.gamma):
        return d
    return _make("Lift", sub=d, gamma=gamma)


_register("Lift", _lift_judge, lambda d: rule_view(d.args["sub"]))


# ------------------------------------------------------------- checking

@dataclass
class Report:
    violations: list = field(default_factory=list)
    obligations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class CheckCfg:
    n: int | None = 1
    sampler: Sampler = Sampler()


def _hull_or_oblig(r, ctx: H.HullCtx, what: str, rep: Report) -> None:
    if isinstance(r, F.RankToken):
        rep.obligations.append(_assumed("HullMember", f"{F.rank_text(r)} in H ({what})"))
    elif not H.in_hull(r, ctx):
        rep.violations.append(f"{what}: {to_text(r)} not in the hull")


def _premise_checks(d: Deriv, label, p: Deriv, allowed: frozenset, extra_theta: frozenset, rep: Report) -> None:
    j = d.judgment
    name = _index_key(label)
    if not p.concl <= j.sequent | allowed:
        stray = _seq_text(p.concl - j.sequent - allowed)
        rep.violations.append(f"premise {name}: stray formulas {stray}")
    if not lt(p.hgt, j.hgt):
        rep.violations.append(f"premise {name}: height {to_text(p.hgt)} not below {to_text(j.hgt)}")
    if not le(p.crk, j.crk):
        rep.violations.append(f"premise {name}: cut rank {to_text(p.crk)} above {to_text(j.crk)}")
    if not le(p.ctrl.gamma, j.ctrl.gamma):
        rep.violations.append(f"premise {name}: operator index {to_text(p.ctrl.gamma)} above {to_text(j.ctrl.gamma)}")
    ctx = j.ctrl.hull(extra_theta)
    for t in sorted(p.ctrl.theta0, key=sort_key):
        if not H.in_hull(t, ctx):
            rep.violations.append(f"premise {name}: parameter {to_text(t)} not controlled")
    if p.ctrl.kappa != j.ctrl.kappa:
        rep.violations.append(f"premise {name}: kappa changed")


def check_node(d: Deriv, cfg: CheckCfg = CheckCfg()) -> Report:
    """One-step verification of a notation: stored bounds, hull conditions and the rule schema."""
    rep = Report()
    j = d.judgment
    try:
        exp = expected_judgment(d)
        if exp != j:
            rep.violations.append("stored judgment differs from its recomputation")
    except OrdbenchError as e:
        rep.violations.append(f"judgment not recomputable: {type(e).__name__}: {e}")
    ctx = j.ctrl.hull()
    for f in sorted(j.sequent, key=_ftext):
        for r in sorted(F.k_E_K(f), key=F.rank_text):
            _hull_or_oblig(r, ctx, "parameter of the conclusion", rep)
    _hull_or_oblig(j.hgt, j.ctrl.hull(j.ctrl.theta), "height", rep)
    if cfg.n is not None and not below_hn(j.hgt, cfg.n):
        rep.violations.append(f"height {to_text(j.hgt)} above the level bound")
    if d.tag in _OBLIG:
        rep.obligations.extend(_OBLIG[d.tag](d))
    try:
        v = rule_view(d)
        _schema(d, v, cfg, rep)
    except OrdbenchError as e:
        rep.violations.append(f"{type(e).__name__}: {e}")
    return rep


def _schema(d: Deriv, v: RuleView, cfg: CheckCfg, rep: Report) -> None:
    j = d.judgment
    if v.rule == "hyp":
        rep.obligations.append(_assumed("TruthOracle", v.info["note"]))
        return
    if v.rule in ("or", "and", "P", "PIn") and v.main not in j.sequent:
        rep.violations.append(f"main formula {_ftext(v.main)} is not in the conclusion")
        return
    if v.rule in ("or", "and"):
        dec = _decomp(v.main)
        if dec.kind != v.rule:
            rep.violations.append(f"{_ftext(v.main)} is not {'disjunctive' if v.rule == 'or' else 'conjunctive'}")
            return
        for i in v.premise_labels(cfg.sampler):
            if v.rule == "or":
                if not dec.family.contains(i):
                    rep.violations.append(f"index {_index_key(i)} not in the family")
                    continue
                r = _rank_of_index(i)
                below_kappa = F.rank_lt(r, j.ctrl.kappa)
                if below_kappa and F.rank_lt(r, j.hgt) is False:
                    rep.violations.append(f"witness rank {F.rank_text(r)} not below the height")
                extra = frozenset()
            else:
                extra = _ord_ranks([_rank_of_index(i)])
            _premise_checks(d, i, v.premise(i), frozenset({dec.part(i)}), extra, rep)
    elif v.rule == "cut":
        c = v.cut
        if not lt(F.rk(c), j.crk):
            rep.violations.append(f"cut rank not strict: {to_text(F.rk(c))} is not below {to_text(j.crk)}")
        _premise_checks(d, "left", v.premise("left"), frozenset({F.neg(c)}), frozenset(), rep)
        _premise_checks(d, "right", v.premise("right"), frozenset({c}), frozenset(), rep)
    elif v.rule == "refk":
        b = v.info["marker"]
        if not lt(b.rank, K_PLUS):
            rep.violations.append("reflected parameter is not below K^+")
        nt = F.neg(F.tau_builder(b, F.OrdConst(K)))
        _premise_checks(d, "left", v.premise("left"), frozenset({nt}), frozenset(), rep)
        _premise_checks(d, "right", v.premise("right"), frozenset({F.reflection_premise(b)}), frozenset(), rep)
    elif v.rule == "F":
        image = v.info["image"]
        if not image <= j.sequent:
            rep.violations.append("collapsed formulas missing from the conclusion")
        x = v.info["desc"].x
        if not H.in_hull(x, j.ctrl.hull(j.ctrl.theta)):
            rep.violations.append(f"collapse point {to_text(x)} not in the hull")
        p = v.premise("sub")
        allowed = v.info["gamma0"]
        _premise_checks(replace(d, judgment=replace(j, sequent=j.sequent - image)), "sub", p, allowed,
                        frozenset(), rep)
    elif v.rule == "P":
        lam, alpha = _p_shape(v.main)
        if not (isinstance(lam, RegSuc) and lt(alpha, lam)):
            rep.violations.append("malformed collapse axiom")
    elif v.rule == "PIn":
        _, alpha = _p_shape(v.main)
        if not lt(alpha, I):
            rep.violations.append("malformed collapse axiom below I")


def _trace_record(node_id: int, parent, d: Deriv, rule: str, obligations: list) -> dict:
    j = d.judgment
    return {
        "id": node_id,
        "parent": parent,
        "tag": d.tag,
        "rule": rule,
        "sequent": _seq_text(j.sequent),
        "hgt": to_text(j.hgt),
        "crk": to_text(j.crk),
        "gamma": to_text(j.ctrl.gamma),
        "theta": sorted(to_text(t) for t in j.ctrl.theta0 | j.ctrl.theta),
        "kappa": to_text(j.ctrl.kappa),
        "obligations": [o.as_dict() for o in obligations],
    }


@dataclass
class TreeReport:
    nodes: int = 0
    violations: list = field(default_factory=list)
    obligations: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self) -> dict:
        out: dict = {}
        for o in self.obligations:
            out[o.status] = out.get(o.status, 0) + 1
        return out


def check_tree(d: Deriv, depth: int = 2, cfg: CheckCfg = CheckCfg(), budget: int = 5000) -> TreeReport:
    """Check ``d`` and its premises down to ``depth`` (depth 0 checks the root only)."""
    out = TreeReport()
    stack = [(d, None, 0)]
    while stack:
        node, parent, level = stack.pop(0)
        if out.nodes >= budget:
            raise ExpansionBudgetExceeded(f"more than {budget} nodes")
        node_id = out.nodes
        out.nodes += 1
        rep = check_node(node, cfg)
        try:
            v = rule_view(node)
            rule = v.rule
        except OrdbenchError:
            v, rule = None, "error"
        out.violations.extend(f"node {node_id} ({node.tag}): {msg}" for msg in rep.violations)
        out.obligations.extend(rep.obligations)
        out.trace.append(_trace_record(node_id, parent, node, rule, rep.obligations))
        if v is None or level >= depth or v.rule == "hyp":
            continue
        try:
            for i in v.premise_labels(cfg.sampler):
                stack.append((v.premise(i), node_id, level + 1))
        except OrdbenchError as e:
            out.violations.append(f"node {node_id} ({node.tag}): premise: {type(e).__name__}: {e}")
    return out


def materialize(d: Deriv, budget: int = 20000) -> Deriv:
    """Rebuild ``d`` from basic inferences only; every index family must be finite."""
    count = 0

    def go(x: Deriv) -> Deriv:
        nonlocal count
        count += 1
        if count > budget:
            raise ExpansionBudgetExceeded(f"more than {budget} nodes")
        v = rule_view(x)
        j = x.judgment
        kw = dict(concl=j.sequent, hgt=j.hgt, crk=j.crk, ctrl=j.ctrl)
        if v.rule == "or":
            return or_i(go(v.premise(v.index)), v.main, v.index, **kw)
        if v.rule == "and":
            if not v.family.complete:
                raise ExpansionBudgetExceeded(f"{_ftext(v.main)} has an infinite family")
            return and_i(v.main, {i: go(v.premise(i)) for i in v.family.indices}, **kw)
        if v.rule == "cut":
            return cut(go(v.premise("left")), go(v.premise("right")), v.cut, **kw)
        if v.rule == "refk":
            return refk(go(v.premise("left")), go(v.premise("right")), v.info["marker"], **kw)
        if v.rule in ("P", "PIn", "hyp"):
            return x
        raise ExpansionBudgetExceeded(f"cannot materialize a {v.rule} inference")

    return go(d)


def iter_tree(d: Deriv) -> Iterable[Deriv]:
    yield d
    v = rule_view(d)
    if v.rule in ("hyp", "P", "PIn"):
        return
    for i in v.premise_labels(Sampler(limit=10 ** 9)):
        yield from iter_tree(v.premise(i))


# -------------------------------------------------- collapse at K replay

@dataclass
class ObNode:
    id: int
    case: str
    xi: OrdTerm
    theta: frozenset
    pi: OrdTerm
    sequent: list
    obligations: list = field(default_factory=list)
    children: list = field(default_factory=list)
    witness: str | None = None

    def walk(self) -> Iterable["ObNode"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def record(self, parent) -> dict:
        return {
            "id": self.id, "parent": parent, "case": self.case, "xi": to_text(self.xi),
            "theta": sorted(to_text(t) for t in self.theta), "pi": to_text(self.pi),
            "sequent": self.sequent, "witness": self.witness,
            "obligations": [o.as_dict() for o in self.obligations],
        }


@dataclass
class ObligationTree:
    root: ObNode

    def nodes(self) -> list:
        return list(self.root.walk())

    def obligations(self) -> list:
        return [o for n in self.nodes() for o in n.obligations]

    def counts(self) -> dict:
        out: dict = {}
        for o in self.obligations():
            out[o.status] = out.get(o.status, 0) + 1
        return out

    def records(self) -> list:
        out = []

        def go(n: ObNode, parent):
            out.append(n.record(parent))
            for c in n.children:
                go(c, n.id)

        go(self.root, None)
        return out


def _tau_marker(a: F.Formula, positive: bool) -> F.SetMarker | None:
    """The marker B when ``a`` is tau(B,K) (positive) or its negation."""
    for t in F.terms_of(a):
        if isinstance(t, F.SetMarker) and t.restrict is None:
            tau = F.tau_builder(t, F.OrdConst(K))
            if a == (tau if positive else F.neg(tau)):
                return t
    return None


def _is_reflection_premise(a: F.Formula) -> bool:
    return any(isinstance(t, F.SetMarker) and a == F.reflection_premise(t) for t in F.terms_of(a))


def _is_meets(a: F.Formula) -> bool:
    return (isinstance(a, F.Ex) and a.bound == F.OrdConst(K) and isinstance(a.body, F.And)
            and all(isinstance(x, F.ElemLit) and x.pos for x in (a.body.left, a.body.right)))


def _witness(seq: Iterable[F.Formula]) -> str | None:
    for a in sorted(seq, key=_ftext):
        if _truth_or_none(a):
            return _ftext(a)
    return None


def collapse_K(d: Deriv, pi: OrdTerm = K, *, gamma: OrdTerm | None = None,
               theta: Iterable[OrdTerm] = (), bound: OrdTerm | None = None,
               depth: int = 2, sampler: Sampler = Sampler(limit=2)) -> ObligationTree:
    """Replay the reflection-collapse argument on a cut-free derivation.

    Returns the tree of cases visited with their side conditions.  Conditions
    that are syntactic (hull membership, ordinal comparisons) are decided;
    stationarity and definability steps are recorded as assumed.
    """
    if not (pi == K or isinstance(pi, RegSuc)):
        raise SortError("pi must be K or a successor cardinal")
    if d.crk != ZERO:
        raise WrongCutRank("collapse at K needs a cut-free derivation")
    for a in d.concl:
        F.restrict_pi(a, pi)
    ids = iter(range(10 ** 9))
    g0 = d.ctrl.gamma if gamma is None else gamma

    def node(x: Deriv, th: frozenset, xi: OrdTerm, level: int) -> ObNode:
        try:
            seq = _seq_text(F.restrict_pi(a, pi) for a in x.concl)
            restricted = [F.restrict_pi(a, pi) for a in x.concl]
        except OutOfFragment:
            seq, restricted = _seq_text(x.concl), []
        out = ObNode(next(ids), "", xi, th, pi, seq, witness=_witness(restricted))
        v = rule_view(x)
        g = g0 if gamma is not None else x.ctrl.gamma

        def child(p: Deriv, th2: frozenset, case_obl: list) -> None:
            xi2 = add(g, p.hgt)
            q = H.MhQuery(xi2, th2, pi, xi)
            case_obl.append(_decided("MhSide", f"pi in Mh at {to_text(xi2)} below {to_text(xi)}",
                                     H.mh_side_condition(q)))
            if level < depth:
                out.children.append(node(p, th2, xi2, level + 1))

        obl = out.obligations
        if v.rule == "cut":
            raise WrongCutRank("cut found in a cut-free derivation")
        if v.rule == "refk":
            out.case = "Case 1"
            child(v.premise("right"), th, obl)
            wide = th | {pi}
            obl.append(_assumed("Stationarity", f"reflection below {to_text(pi)} with parameters "
                                f"{sorted(to_text(t) for t in wide)}"))
            child(v.premise("left"), wide, obl)
        elif v.rule == "and" and v.main is not None and _tau_marker(v.main, False) is not None:
            out.case = "Case 2"
            club_c = F.SetMarker("C_pi", succ(K))
            wide = th | {pi}
            obl.append(_decided("HullMember", "rank of the constructed club in H_gamma[Theta, pi]",
                                H.in_hull(club_c.rank, H.HullCtx(g, ZERO, wide))))
            obl.append(_assumed("TruthOracle", "the constructed club lies in K and is closed unbounded"))
            obl.append(_assumed("Stationarity", f"club below {to_text(pi)} meets the reflecting set"))
            child(v.premise(club_c), wide, obl)
        elif v.rule == "or":
            main = v.main
            if _is_meets(main):
                out.case = "Case 3"
            elif isinstance(main, F.Ex):
                out.case = "Case 8"
                r = F.term_rank(main.bound)
                obl.append(_decided("OrdLt", f"rk(bound) {F.rank_text(r)} < {to_text(pi)}",
                                    F.rank_lt(F.term_rank(v.index), pi) is True))
            else:
                out.case = "Case 3"
            child(v.premise(v.index), th, obl)
        elif v.rule == "and":
            main = v.main
            fam = v.family
            labels = sampler.choose(fam)
            if not fam.indices:
                out.case = "Case 5"
                if isinstance(main, F.ElemLit) and isinstance(main.right, F.SetMarker):
                    r = F.term_rank(main.left)
                    obl.append(_decided("OrdLt", f"{F.rank_text(r)} < {to_text(pi)}", F.rank_lt(r, pi) is True))
            elif _is_reflection_premise(main):
                out.case = "Case 6"
                labels = [i for i in labels if F.rank_lt(F.term_rank(i), pi) is True]
            elif isinstance(main, F.All):
                out.case = "Case 7"
            else:
                out.case = "Case 4"
            if isinstance(main, F.All) and out.case == "Case 7":
                r = F.term_rank(main.bound)
                bounded = F.rank_lt(r, pi)
                obl.append(_decided("OrdLt", f"rk(bound) {F.rank_text(r)} < {to_text(pi)}", bounded is True)
                           if bounded is not None else _assumed("OrdLt", f"rk(bound) < {to_text(pi)}"))
            for i in labels:
                child(v.premise(i), th | _ord_ranks([_rank_of_index(i)]), obl)
        elif v.rule == "F":
            out.case = "Case 9"
            child(v.premise("sub"), th, obl)
        elif v.rule == "hyp":
            out.case = "hypothesis"
            obl.append(_assumed("TruthOracle", v.info["note"]))
        else:
            raise OutOfFragment(f"{v.rule} inference outside the reflection fragment")
        return out

    xi0 = add(g0, d.hgt)
    root = node(d, frozenset(theta), xi0, 0)
    if bound is not None:
        root.obligations.insert(0, _decided(
            "MhSide", f"pi in Mh at {to_text(xi0)} below {to_text(bound)}",
            H.mh_side_condition(H.MhQuery(xi0, frozenset(theta), pi, bound))))
    return ObligationTree(root)


# --------------------------------------------------------------- pipeline

def _embed_layers(d: Deriv) -> int:
    if d.tag in ("Taut", "Hyp", "Delta0Ax"):
        return 1
    v = rule_view(d)
    if v.rule == "and":
        i = v.family.indices[0] if v.family.indices else None
        return 1 + (_embed_layers(v.premise(i)) if i is not None else 0)
    labels = [v.index] if v.rule == "or" else list(v.labels)
    return 1 + max((_embed_layers(v.premise(i)) for i in labels), default=0)


def embed_axiom4(marker: F.SetMarker) -> Deriv:
    """A cut-free derivation of the reflection instance for ``marker``.

    Layer k has height I*k; the root uses reflection at K.  The number of
    layers is read off the built notation.
    """
    if not lt(marker.rank, K_PLUS):
        raise NotSmaller("the set parameter must lie below K^+")
    k = F.OrdConst(K)
    tau = F.tau_builder(marker, k)
    a4 = F.axiom4(marker)
    left_disj = a4.left
    right_disj = a4.right
    theta0 = frozenset({K})
    base = Ctrl(ZERO, theta0, frozenset(), I)

    def times_i(m: int) -> OrdTerm:
        return from_parts([I] * m)

    l1 = taut(tau, theta0=theta0)
    l2 = or_i(l1, left_disj, 1, hgt=times_i(2), ctrl=base)
    l3 = or_i(l2, a4, 0, hgt=times_i(3), ctrl=base)

    def r3(rho):
        ctrl = replace(base, theta0=theta0 | _ord_ranks([F.term_rank(rho)]))
        r1 = taut(F.tau_builder(marker, rho), theta0=ctrl.theta0)
        r2 = or_i(r1, right_disj, rho, hgt=times_i(2), ctrl=ctrl)
        return or_i(r2, a4, 1, hgt=times_i(3), ctrl=ctrl)

    rp = F.reflection_premise(marker)
    r4 = and_i(rp, r3, concl=frozenset({a4, rp}), hgt=times_i(4), crk=ZERO, ctrl=base)
    layers = 1 + max(_embed_layers(l3), _embed_layers(r4))
    return refk(l3, r4, marker, concl=frozenset({a4}), hgt=times_i(layers), crk=I, ctrl=base)


@dataclass
class StageReport:
    name: str
    deriv: Deriv
    obligations: list = field(default_factory=list)

    def record(self) -> dict:
        j = self.deriv.judgment
        return {"stage": self.name, "tag": self.deriv.tag, "hgt": to_text(j.hgt), "crk": to_text(j.crk),
                "gamma": to_text(j.ctrl.gamma), "sequent": _seq_text(j.sequent),
                "obligations": [o.as_dict() for o in self.obligations]}


@dataclass
class PipelineResult:
    stages: list
    final: Deriv
    a: OrdTerm
    b: OrdTerm
    xi: OrdTerm
    xi_root: OrdTerm
    tree: ObligationTree
    checks: dict

    def records(self) -> list:
        out = [s.record() for s in self.stages]
        out.append({"stage": "xi", "xi": to_text(self.xi), "xi_root": to_text(self.xi_root),
                    "a": to_text(self.a), "b": to_text(self.b), "checks": self.checks})
        out.extend({"stage": "collapse_K", **r} for r in self.tree.records())
        return out


def refk_pipeline(marker: F.SetMarker | None = None, m: int = 2, depth: int = 2,
                  sampler: Sampler = Sampler(limit=2)) -> PipelineResult:
    """Embed, cut-eliminate and collapse the reflection instance for one parameter.

    Stages: embedding plus a cut against the assumed hypothesis, m-2
    predicative steps, collapse below I, full predicative elimination and the
    replay of the reflection collapse at K.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    marker = marker or F.SetMarker("B", K)
    stages: list = []

    def stage(name, fn):
        try:
            return fn()
        except OrdbenchError as e:
            raise StageError(name, e) from e

    a4 = F.axiom4(marker)
    tau = F.tau_builder(marker, F.OrdConst(K))

    def embedding():
        e = embed_axiom4(marker)
        h = hyp({F.neg(a4), F.neg(tau)}, e.hgt, I, e.ctrl,
                f"hypothesis for {marker.name}: not(axiom instance) or not tau({marker.name},K)")
        return cut(h, e, a4, crk=add(I, from_parts([ONE] * (m - 1))))

    d = stage("embedding", embedding)
    stages.append(StageReport("embedding", d, _hyp_oblig(d.args["left"])))

    def predicative():
        x = d
        for k in range(m - 2, 0, -1):
            x = pce(x, window(add(I, from_parts([ONE] * k)), ZERO))
        return x

    d = stage("pce", predicative)
    stages.append(StageReport("pce", d))
    a = omega_tower(m, succ(I))
    b = PsiI(a)
    d = stage("collapse_I", lambda: collapse_I(d, ZERO, d.ctrl.theta0, target=a))
    if not (d.hgt == b and d.crk == b):
        raise StageError("collapse_I", ShapeMismatch("collapse bounds differ from Psi_I(a)"))
    stages.append(StageReport("collapse_I", d, _coll_oblig(d)))
    d = stage("pce_final", lambda: pce(d, item4(ZERO, b)))
    if not (d.hgt == veblen(b, b) and d.crk == ZERO):
        raise StageError("pce_final", ShapeMismatch("unexpected bounds after full elimination"))
    stages.append(StageReport("pce_final", d))
    top = omega_tower(m + 1, succ(I))
    xi = add(a, veblen(b, b))
    tree = stage("collapse_K", lambda: collapse_K(d, K, bound=top, depth=depth, sampler=sampler))
    xi_root = tree.root.xi
    checks = {
        "xi_in_hull": H.in_hull(xi, H.HullCtx(alpha=xi, beta=K)),
        "xi_below_bound": lt(xi, top),
        "xi_mh_side": H.mh_side_condition(H.MhQuery(xi, frozenset(), K, top)),
        "xi_root_below_bound": lt(xi_root, top),
        "xi_root_in_hull": H.in_hull(xi_root, H.HullCtx(alpha=xi_root, beta=K)),
    }
    return PipelineResult(stages, d, a, b, xi, xi_root, tree, checks)


def pipeline_trace(result: PipelineResult) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in result.records())
