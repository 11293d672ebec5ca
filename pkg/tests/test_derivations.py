import pytest

from ordbench import derivations as D
from ordbench import formulas as F
from ordbench import generators as G
from ordbench.errors import (
    BoundNotInHull,
    GapViolation,
    NotDelta0,
    NotFalse,
    NotPresent,
    NotSentence,
    NotSmaller,
    RankWindowViolation,
    ShapeMismatch,
    SortError,
    WrongCutRank,
)
from ordbench.hull import hn_member
from ordbench.ordinals import (
    I,
    K,
    ONE,
    ZERO,
    KernelCfg,
    PsiI,
    RegSuc,
    add,
    cmp,
    Cmp,
    lt,
    nat,
    normalize,
    nsum,
    omega_tower,
    succ,
    veblen,
    wexp,
)
from ordbench.universe import EMPTY

p = F.parse_formula
EVERYTHING = D.CheckCfg(n=3, sampler=D.Sampler(limit=10 ** 6))
TRUE_LIT = p("{} in {{}}")
FALSE_LIT = p("{{}} in {}")
EX_I = p("ex x in L(I) . x in {{}}")
EX_K = p("ex x in L(K) . x in {}")


def texts(seq):
    return sorted(F.text(a) for a in seq)


def or_on_witness(formula):
    """A cut-free proof of a true existential through its single least witness."""
    dec = F.decompose(formula)
    (i,) = dec.family.indices
    return D.or_i(D.delta0_complete([dec.part(i)], base=ZERO), formula, i)


def cut_at(formula):
    t = D.taut(formula)
    return D.cut(t, t, formula, crk=succ(F.rk(formula)))


# ------------------------------------------------------------ tautology

def test_taut_heights():
    t = D.taut(p("{} in {{}}"))
    assert t.hgt == I and t.crk == ZERO
    assert D.taut(p("Reg(K^+)")).hgt == add(I, nat(2))


def test_taut_height_is_I_plus_twice_rank():
    for a in G.formulas(60, seed=3):
        t = D.taut(a)
        assert t.hgt == add(I, nsum(F.rk(a), F.rk(a)))
        assert {a, F.neg(a)} <= t.concl


def test_taut_expands_to_literal_axioms():
    a = p("({} in {{}} | ~{} in {{}})")
    t = D.taut(a)
    rep = D.check_tree(t, depth=50, cfg=EVERYTHING)
    assert rep.ok and rep.nodes == 5
    leaves = [x for x in D.iter_tree(D.materialize(t)) if x.tag == "AndI" and not x.args["premises"]]
    assert leaves and all(isinstance(x.args["main"], F.ElemLit) for x in leaves)


def test_taut_needs_sentence():
    with pytest.raises(NotSentence):
        D.taut(F.ElemLit(F.Var("x"), F.MiniConst(EMPTY)))


def test_check_tree_depth_zero_is_check_node():
    t = D.taut(EX_I)
    rep = D.check_tree(t, depth=0)
    assert rep.nodes == 1
    assert rep.violations == [f"node 0 (Taut): {m}" for m in D.check_node(t).violations]


# ------------------------------------------------------------ cut checking

def test_cut_rank_must_be_strict():
    t = D.taut(EX_K)
    assert D.check_node(cut_at(EX_K)).ok
    bad = D.cut(t, t, EX_K, crk=F.rk(EX_K))
    msgs = D.check_node(bad).violations
    assert any(m.startswith("cut rank not strict") for m in msgs)


# ------------------------------------------------------------ delta0 completeness

def test_delta0_axiom():
    d = D.delta0_complete([TRUE_LIT])
    assert d.hgt == I and d.crk == ZERO
    v = D.rule_view(d)
    assert v.rule == "and" and v.family.indices == ()


def test_delta0_errors():
    with pytest.raises(D.NotTrue):
        D.delta0_complete([FALSE_LIT, p("~{} in {{}}")])
    with pytest.raises(NotDelta0):
        D.delta0_complete([p("Reg(K^+)")])


def test_delta0_random_true_sequents_check_exhaustively():
    seen = 0
    for a in G.formulas(300, seed=8, depth=2):
        if not F.is_delta0(a) or D._truth_or_none(a) is not True:
            continue
        d = D.delta0_complete([a], base=ZERO)
        try:
            m = D.materialize(d, budget=500)
        except D.ExpansionBudgetExceeded:
            continue
        assert D.check_tree(m, depth=40, cfg=EVERYTHING).ok
        seen += 1
    assert seen >= 10


# ------------------------------------------------------------ false sentences

def test_elim_false_from_axiom():
    d = D.delta0_complete([TRUE_LIT, FALSE_LIT], base=ZERO)
    e = D.elim_false(d, FALSE_LIT)
    assert e.concl == {TRUE_LIT}
    assert (e.hgt, e.crk) == (d.hgt, d.crk)
    assert D.check_tree(e, depth=10, cfg=EVERYTHING).ok


def test_elim_false_errors():
    d = D.delta0_complete([TRUE_LIT, FALSE_LIT], base=ZERO)
    with pytest.raises(NotFalse):
        D.elim_false(d, TRUE_LIT)
    with pytest.raises(NotFalse):
        D.elim_false(d, EX_I)
    with pytest.raises(NotPresent):
        D.elim_false(d, p("{{}} in {{}}"))


def test_elim_false_bounds_unchanged_on_samples():
    for seed in range(5):
        d = D.materialize(D.eliminate_cuts(G.fabricate_finite(seed)))
        for a in d.concl:
            if D._truth_or_none(a) is False:
                e = D.elim_false(d, a)
                assert (e.hgt, e.crk, e.ctrl) == (d.hgt, d.crk, d.ctrl)


def test_elim_false_declared_records_assumption():
    c = p("ex x in L(I) . x in {}")
    d = D.taut(c)
    e = D.elim_false(d, c, declared=True)
    kinds = [(o.kind, o.status) for o in D.check_node(e).obligations]
    assert ("TruthOracle", "assumed") in kinds


# ------------------------------------------------------------ reflection embedding

def test_embed_axiom4():
    e = D.embed_axiom4(F.SetMarker("B", K))
    assert e.tag == "RefK"
    rep = D.check_node(e)
    assert rep.ok
    assert {o.kind for o in rep.obligations} == {"OrdLt", "HullMember"}
    layers = D._embed_layers(e)
    assert layers <= 8
    assert e.hgt == normalize(D.from_parts([I] * layers))
    assert e.crk == I


def test_embed_axiom4_rejects_large_parameter():
    with pytest.raises(NotSmaller):
        D.embed_axiom4(F.SetMarker("B", RegSuc(K)))


# ------------------------------------------------------------ inversion

def test_invert_existential_and_universal():
    t = D.taut(EX_I)
    inv = D.invert(t, EX_I)
    assert texts(inv.concl) == ["(~{} in {} & {} in {{}})", "all x in L(I) . ~x in {{}}"]
    assert (inv.hgt, inv.crk) == (t.hgt, t.crk)
    inv2 = D.invert(t, F.neg(EX_I))
    assert texts(inv2.concl) == ["({} in {} | ~{} in {{}})", "ex x in L(I) . x in {{}}"]


def test_invert_is_idempotent():
    inv = D.invert(D.taut(EX_I), EX_I)
    assert D.invert(inv, EX_I) is inv


def test_invert_checks():
    inv = D.invert(D.taut(EX_I), EX_I)
    assert D.check_tree(inv, depth=4).ok
    with pytest.raises(ShapeMismatch):
        D.invert(D.taut(TRUE_LIT), TRUE_LIT)


# ------------------------------------------------------------ reduction

def test_reduce_adds_heights():
    l = cut_at(EX_K)
    r = D.reduce(l, l, EX_K)
    assert r.hgt == add(l.hgt, l.hgt)
    assert D.check_tree(r, depth=3).ok


def test_reduce_rejects_small_rank():
    a = p("({} in {{}} | ~{} in {{}})")
    l = cut_at(a)
    with pytest.raises(RankWindowViolation):
        D.reduce(l, l, a)


def test_reduce_p_bumps_operator_index():
    alpha = ZERO
    ax = D.pin_existential(alpha)
    d = D.taut(ax)
    out = D.reduce_P(d, ax)
    assert out.ctrl.gamma == succ(d.ctrl.gamma)
    assert (out.hgt, out.crk) == (d.hgt, d.crk)
    assert out.concl == d.concl - {F.neg(ax)}
    with pytest.raises(ShapeMismatch):
        D.reduce_P(d, EX_I)


# ------------------------------------------------------------ predicative elimination

def test_pce_to_I():
    c = D.cut(D.taut(EX_I), D.taut(EX_I), EX_I, crk=succ(I))
    x = D.pce(c, D.TO_I)
    assert x.hgt == wexp(c.hgt)
    assert x.crk == I
    assert x.ctrl.gamma == c.hgt
    assert D.check_tree(x, depth=3, cfg=D.CheckCfg(n=3)).ok


def test_pce_window_with_zero_exponent_is_omega_power():
    base = D.delta0_complete([TRUE_LIT], base=ZERO)
    c = D.cut(D.taut(TRUE_LIT), base, TRUE_LIT, crk=ONE)
    one = D.pce(c, D.window(ZERO, ZERO))
    assert one.hgt == veblen(ZERO, c.hgt) == wexp(c.hgt)
    assert one.crk == ZERO
    assert D.check_tree(one, depth=20, cfg=EVERYTHING).ok
    # two stacked windows compose as iterated exponentials
    c2 = D.cut(D.taut(TRUE_LIT), base, TRUE_LIT, crk=nat(2))
    two = D.pce(D.pce(c2, D.window(ONE, ZERO)), D.window(ZERO, ZERO))
    assert two.hgt == veblen(ZERO, veblen(ZERO, c2.hgt))


def test_pce_gap_violation():
    c = cut_at(EX_K)
    with pytest.raises(GapViolation):
        D.pce(c, D.window(K, succ(RegSuc(K))))
    with pytest.raises(GapViolation):
        D.pce(c, D.window(ZERO, I))
    assert D.gap_free(K, ONE)
    assert not D.gap_free(succ(RegSuc(K)), ONE)


def test_pce_wrong_cut_rank():
    c = D.cut(D.taut(EX_I), D.taut(EX_I), EX_I, crk=succ(succ(I)))
    with pytest.raises(WrongCutRank):
        D.pce(c, D.TO_I)


def test_eliminate_cuts_on_fabricated_derivations():
    for seed in range(6):
        d = D.eliminate_cuts(G.fabricate_finite(seed))
        assert d.crk == ZERO
        m = D.materialize(d)
        assert G.cut_count(m) == 0
        assert any(D._truth_or_none(a) for a in m.concl)


# ------------------------------------------------------------ boundedness

def test_bnd_positive_rewrites_outer_bound():
    d = or_on_witness(EX_I)
    b = D.bnd(d, EX_I, nat(5))
    assert texts(b.concl) == ["ex x in L(5) . x in {{}}"]
    assert (b.hgt, b.crk) == (d.hgt, d.crk)
    assert D.check_tree(b, depth=9).ok


def test_bnd_negative():
    b = D.bnd(D.taut(EX_I), EX_I, PsiI(ZERO), False, gamma=ONE)
    assert "all x in L(Psi(I,0)) . ~x in {{}}" in texts(b.concl)
    assert D.check_tree(b, depth=3).ok


def test_bnd_outside_hull_records_obligation():
    b = D.bnd(D.taut(EX_I), EX_I, PsiI(nat(3)), False)
    obs = D.check_node(b).obligations
    assert [(o.kind, o.status) for o in obs] == [("HullMember", "checked_false")]
    with pytest.raises(BoundNotInHull):
        D.bnd(D.taut(EX_I), EX_I, PsiI(nat(3)), False, strict=True)


def test_bnd_errors():
    with pytest.raises(ShapeMismatch):
        D.bnd(D.taut(EX_I), F.neg(EX_I), nat(2))
    with pytest.raises(NotSmaller):
        D.bnd(or_on_witness(EX_I), EX_I, nat(1))


# ------------------------------------------------------------ collapse below I

def test_collapse_of_height_zero():
    d = D.delta0_complete([TRUE_LIT], base=ZERO)
    c = D.collapse_I(d, ZERO)
    # w^(I+0) = w^I = I, because I is an epsilon number
    assert cmp(wexp(add(I, ZERO)), I) is Cmp.EQ
    assert c.hgt == c.crk == PsiI(I)
    assert c.ctrl.gamma == succ(I)
    assert D.check_tree(c, depth=3).ok


def test_collapse_bound_formula():
    d = or_on_witness(EX_I)
    for gamma in (ZERO, ONE, K):
        c = D.collapse_I(d, gamma)
        assert c.hgt == c.crk == PsiI(add(gamma, wexp(add(I, d.hgt))))


def toy_cut():
    return D.cut(D.taut(EX_I), or_on_witness(EX_I), EX_I, crk=succ(I))


def test_collapse_case_with_cut_of_rank_I():
    col = D.collapse_I(toy_cut(), ZERO)
    v = D.rule_view(col)
    assert v.rule == "cut" and v.labels == ("left", "right")
    left, right = v.premise("left"), v.premise("right")
    assert (left.tag, right.tag) == ("CollI", "Bnd")
    assert F.term_rank(v.cut.bound) == F.rk(v.cut)
    beta1 = left.crk
    assert lt(F.rk(v.cut), beta1) and lt(beta1, col.hgt)
    rep = D.check_tree(col, depth=4, cfg=D.CheckCfg(n=2))
    assert rep.ok and set(rep.counts()) == {"checked_true"}


def test_collapse_is_monotone_on_premises():
    col = D.collapse_I(toy_cut(), ZERO)
    stack = [col]
    seen = 0
    while stack and seen < 40:
        node = stack.pop()
        seen += 1
        v = D.rule_view(node)
        if v.rule == "hyp":
            continue
        for i in v.premise_labels(D.Sampler(limit=3)):
            q = v.premise(i)
            if q.tag == "CollI" and node.tag == "CollI":
                assert lt(q.hgt, node.hgt)
            stack.append(q)
    assert seen > 5


def test_collapse_errors():
    with pytest.raises(WrongCutRank):
        D.collapse_I(D.cut(D.taut(EX_I), D.taut(EX_I), EX_I, crk=succ(succ(I))), ZERO)
    with pytest.raises(D.NotSigmaSigma):
        D.collapse_I(D.taut(p("all x in L(I) . ex y in L(I) . x in y")), ZERO)


# ------------------------------------------------------------ collapse at K

def test_collapse_K_case_1():
    res = D.refk_pipeline(m=2)
    root = res.tree.root
    assert root.case == "Case 1"
    right, left = root.children
    assert lt(right.xi, root.xi) and lt(left.xi, root.xi)
    assert left.theta == root.theta | {K}
    assert right.theta == root.theta
    assert sum(1 for o in root.obligations if o.kind == "MhSide") >= 2


def test_collapse_K_case_5():
    d = F.MiniConst(EMPTY)
    B = F.SetMarker("B", K, members=frozenset({d}))
    tree = D.collapse_K(D.leaf(F.ElemLit(d, B)), K)
    assert tree.root.case == "Case 5"
    assert [(o.kind, o.status) for o in tree.root.obligations] == [("OrdLt", "checked_true")]
    assert tree.root.witness == "{} in B|K"


def test_collapse_K_is_deterministic():
    a = D.refk_pipeline(m=2, sampler=D.Sampler(limit=2, seed=5))
    b = D.refk_pipeline(m=2, sampler=D.Sampler(limit=2, seed=5))
    assert a.tree.records() == b.tree.records()


def test_collapse_K_needs_cut_free_input():
    with pytest.raises(WrongCutRank):
        D.collapse_K(cut_at(EX_K), K)
    with pytest.raises(SortError):
        D.collapse_K(D.leaf(TRUE_LIT), I)


# ------------------------------------------------------------ weakening

def test_weaken_identity_and_check():
    t = D.taut(EX_K)
    assert D.weaken_reg(t, I) is t
    w = D.weaken_reg(t, RegSuc(K))
    assert w.ctrl.kappa == RegSuc(K)
    assert (w.hgt, w.crk, w.concl) == (t.hgt, t.crk, t.concl)
    assert D.check_tree(w, depth=2).ok


def test_weaken_errors():
    t = D.taut(EX_K)
    with pytest.raises(SortError):
        D.weaken_reg(t, nat(3))
    with pytest.raises(NotSmaller):
        D.weaken_reg(D.weaken_reg(t, K), RegSuc(K))


def test_weaken_below_collapse_axiom_level():
    lam = RegSuc(RegSuc(K))
    ax = D.p_lam_ax(lam, K)
    w = D.weaken_reg(ax, K)
    v = D.rule_view(w)
    assert v.rule == "P"
    assert D._p_shape(v.main) == (lam, K)
    assert D.check_node(w).ok


# ------------------------------------------------------------ pipeline

def test_pipeline_stage_bounds():
    res = D.refk_pipeline(m=2)
    stages = {s.name: s.deriv for s in res.stages}
    a = omega_tower(2, succ(I))
    b = PsiI(a)
    assert (res.a, res.b) == (a, b)
    assert stages["collapse_I"].hgt == stages["collapse_I"].crk == b
    assert stages["pce_final"].hgt == veblen(b, b)
    assert stages["pce_final"].crk == ZERO
    assert res.xi == add(a, veblen(b, b))
    assert hn_member(res.xi, KernelCfg(n=3))
    assert all(res.checks.values())
    assert res.tree.counts().get("checked_false", 0) == 0


def test_pipeline_m3():
    res = D.refk_pipeline(m=3)
    assert res.b == PsiI(omega_tower(3, succ(I)))
    assert lt(res.xi, omega_tower(4, succ(I)))
    assert all(res.checks.values())


def test_pipeline_rejects_small_m():
    with pytest.raises(ValueError):
        D.refk_pipeline(m=1)


def test_pipeline_trace_is_deterministic():
    assert D.pipeline_trace(D.refk_pipeline(m=2)) == D.pipeline_trace(D.refk_pipeline(m=2))
