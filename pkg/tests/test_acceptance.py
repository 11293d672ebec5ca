"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import dataclasses
import random
import time
from pathlib import Path

import pytest

from ordbench import cli
from ordbench import derivations as D
from ordbench import formulas as F
from ordbench import generators as G
from ordbench import hull as H
from ordbench.ordinals import (
    I,
    K,
    ONE,
    ORDER_LAW_ALPHABET,
    ZERO,
    Cmp,
    KernelCfg,
    PsiI,
    PsiR,
    RegSuc,
    add,
    cmp,
    enum_terms,
    is_regular,
    lt,
    normalize,
    nsum,
    omega_tower,
    succ,
    to_text,
    veblen,
    wexp,
)
from ordbench.universe import UniverseCfg, eval_delta0

GOLDEN = Path(__file__).parent / "golden"
PIPELINE_OPTS = {"n": 1, "seed": 0, "depth": 2, "budget": 5000, "m": 2}


@pytest.fixture
def verdict(capsys):
    def report(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'}: {title} ({detail})")
        assert ok, detail
    return report


def test_1_order_laws(verdict):
    start = time.perf_counter()
    terms = enum_terms(KernelCfg(enum_budget=6), ORDER_LAW_ALPHABET)
    tri, trans = cli.order_law_failures(terms)
    took = time.perf_counter() - start
    ok = len(terms) >= 300 and not tri and not trans and took < 60
    verdict(1, "order laws", ok,
            f"{len(terms)} terms, {len(tri)} trichotomy and {len(trans)} transitivity violations, {took:.1f}s")


def test_2_hull_oracle(verdict):
    start = time.perf_counter()
    cases = bad = 0
    for ctx, universe in cli.hull_oracle_cases(budget=5, seed=0, universe_size=200, sample=20, pool=3):
        sat = H.hull_saturate(ctx, universe)
        for t in universe:
            cases += 1
            bad += H.in_hull(t, ctx) != (t in sat)
    took = time.perf_counter() - start
    verdict(2, "in_hull agrees with saturation", bad == 0 and took < 120,
            f"{cases} cases, {bad} disagreements, {took:.1f}s")


def test_3_collapse_interval_and_minimality(verdict):
    universe = enum_terms(KernelCfg(enum_budget=5))
    regulars = [u for u in universe if is_regular(u)]
    checked = violations = 0
    for p in universe:
        if isinstance(p, PsiI) and not H.psi_normal(p):
            continue
        if not isinstance(p, (PsiR, PsiI)):
            continue
        checked += 1
        top = p.kappa if isinstance(p, PsiR) else I
        below = [p.kappa.base] if isinstance(p, PsiR) else regulars
        if not (lt(p, top) and all(lt(r, p) for r in below)):
            violations += 1
        ctx = H.HullCtx(p.index, p)
        violations += sum(1 for u in universe if lt(u, top) and H.in_hull(u, ctx) and not lt(u, p))
    verdict(3, "collapse interval and minimality", checked > 0 and violations == 0,
            f"{checked} collapse terms over {len(universe)} terms, {violations} violations")


def test_4_rank_laws(verdict):
    formulas = G.formulas(500, seed=0)
    fails = cli.rank_law_failures(formulas)
    total = sum(len(v) for v in fails.values())
    verdict(4, "rank laws", total == 0,
            f"{len(formulas)} formulas, " + ", ".join(f"{k}: {len(v)}" for k, v in fails.items()))


def test_5_exact_bounds(verdict):
    mismatches = []
    formulas = G.formulas(50, seed=21)
    for a in formulas:
        if D.taut(a).hgt != normalize(add(I, nsum(F.rk(a), F.rk(a)))):
            mismatches.append(("taut", F.text(a)))
    ex_i = F.parse_formula("ex x in L(I) . x in {{}}")
    eliminations = [ex_i] + [f for f in formulas if lt(F.rk(f), succ(I))][:10]
    for a in eliminations:
        t = D.taut(a)
        c = D.cut(t, t, a, crk=succ(I))
        x = D.pce(c, D.TO_I)
        if not (x.hgt == normalize(wexp(c.hgt)) and x.crk == I):
            mismatches.append(("to_I", F.text(a)))
    bases = [D.delta0_complete([F.parse_formula("{} in {{}}")], base=ZERO), D.taut(ex_i),
             D.cut(D.taut(ex_i), D.taut(ex_i), ex_i, crk=succ(I))]
    for d in bases:
        for gamma in (ZERO, ONE, K, I):
            c = D.collapse_I(d, gamma)
            want = normalize(PsiI(add(gamma, wexp(add(I, d.hgt)))))
            if not (c.hgt == want and c.crk == want):
                mismatches.append(("collapse_I", to_text(gamma)))
    verdict(5, "exact bound bookkeeping", not mismatches,
            f"50 tautologies, {len(eliminations)} eliminations, {4 * len(bases)} collapses; "
            f"mismatches: {mismatches or 'none'}")


def test_6_finite_cut_elimination(verdict):
    start = time.perf_counter()
    cfg = UniverseCfg(depth=3)
    everything = D.CheckCfg(n=3, sampler=D.Sampler(limit=10 ** 6))
    problems = []
    for seed in range(20):
        d = G.fabricate_finite(seed)
        ranks = [F.rk(x.args["cut"]) for x in D.iter_tree(d) if x.tag == "Cut"]
        if not ranks or not all(cmp(r, succ(succ(succ(ONE)))) is Cmp.LT for r in ranks):
            problems.append(f"seed {seed}: cut ranks {[to_text(r) for r in ranks]}")
        m = D.materialize(D.eliminate_cuts(d))
        if G.cut_count(m):
            problems.append(f"seed {seed}: {G.cut_count(m)} cuts left")
        if not all(eval_delta0(a, cfg) for a in m.concl):
            problems.append(f"seed {seed}: conclusion not true")
        if not D.check_tree(m, depth=10 ** 6, cfg=everything, budget=10 ** 6).ok:
            problems.append(f"seed {seed}: check failed")
    took = time.perf_counter() - start
    verdict(6, "cut elimination on finite derivations", not problems and took < 120,
            f"20 derivations, {took:.1f}s; problems: {problems or 'none'}")


def test_7_pipeline(verdict):
    res = D.refk_pipeline(m=2)
    a = omega_tower(2, succ(I))
    b = PsiI(a)
    stages = {s.name: s.deriv for s in res.stages}
    problems = []
    if list(stages) != ["embedding", "pce", "collapse_I", "pce_final"]:
        problems.append(f"stages {list(stages)}")
    if not (stages["collapse_I"].hgt == b and stages["collapse_I"].crk == b):
        problems.append("collapse stage bounds")
    if not (stages["pce_final"].hgt == veblen(b, b) and stages["pce_final"].crk == ZERO):
        problems.append("final elimination bounds")
    xi = add(a, veblen(b, b))
    if res.xi != xi or not H.in_hull(xi, H.HullCtx(alpha=xi, beta=K)):
        problems.append("xi not in the hull")
    if cmp(xi, omega_tower(3, succ(I))) is not Cmp.LT:
        problems.append("xi not below the bound")
    statuses = res.tree.counts()
    if statuses.get("checked_false", 0):
        problems.append(f"obligation statuses {statuses}")
    semantic = {o.kind for o in res.tree.obligations() if o.status == "assumed"}
    if not semantic <= {"Stationarity", "TruthOracle"}:
        problems.append(f"undecided syntactic obligations {semantic}")
    first, _, _ = cli.render_trace("pipeline", dict(PIPELINE_OPTS))
    second, _, _ = cli.render_trace("pipeline", dict(PIPELINE_OPTS))
    golden = (GOLDEN / "pipeline_m2.trace").read_text()
    if not (first == second == golden):
        problems.append("trace differs from the golden copy")
    verdict(7, "reflection pipeline at m=2", not problems,
            f"xi={to_text(xi)}, obligations {statuses}; problems: {problems or 'none'}")


# ------------------------------------------------------------ mutation harness

def _children(d):
    """(key, index, child) for the explicit premises of a basic inference."""
    a = d.args
    if d.tag == "OrI":
        return [("sub", None, a["sub"])]
    if d.tag == "AndI" and isinstance(a["premises"], dict):
        return [("premises", i, p) for i, p in a["premises"].items()]
    if d.tag in ("Cut", "RefK"):
        return [("left", None, a["left"]), ("right", None, a["right"])]
    return []


def _paths(d, prefix=()):
    yield prefix
    for key, i, child in _children(d):
        yield from _paths(child, prefix + ((key, i),))


def _replace_at(d, path, new):
    if not path:
        return new
    (key, i), rest = path[0], path[1:]
    a = dict(d.args)
    if i is None:
        a[key] = _replace_at(a[key], rest, new)
    else:
        prem = dict(a[key])
        prem[i] = _replace_at(prem[i], rest, new)
        a[key] = prem
    return dataclasses.replace(d, args=a, cache={})


def _get(d, path):
    for key, i in path:
        d = d.args[key] if i is None else d.args[key][i]
    return d


def _mutate(j, rng):
    other = [ZERO, ONE, K, I, succ(I), PsiI(ZERO), RegSuc(K), wexp(succ(I))]
    field = rng.choice(["hgt", "crk", "gamma", "theta0", "kappa", "sequent"])
    if field in ("hgt", "crk"):
        old = getattr(j, field)
        return field, dataclasses.replace(j, **{field: rng.choice([t for t in other if t != old] + [succ(old)])})
    c = j.ctrl
    if field == "gamma":
        return field, dataclasses.replace(j, ctrl=dataclasses.replace(c, gamma=succ(c.gamma)))
    if field == "theta0":
        extra = rng.choice([t for t in other if t not in c.theta0])
        return field, dataclasses.replace(j, ctrl=dataclasses.replace(c, theta0=c.theta0 | {extra}))
    if field == "kappa":
        kappa = K if c.kappa != K else I
        return field, dataclasses.replace(j, ctrl=dataclasses.replace(c, kappa=kappa))
    extra = F.parse_formula(rng.choice(["{} in {{}}", "{{}} in {}", "Reg(K^+)"]))
    seq = j.sequent - {extra} if extra in j.sequent else j.sequent | {extra}
    return field, dataclasses.replace(j, sequent=seq)


def test_8_mutation_robustness(verdict):
    rng = random.Random(8)
    ex_i = F.parse_formula("ex x in L(I) . x in {{}}")
    corpus = [D.materialize(D.eliminate_cuts(G.fabricate_finite(s))) for s in range(5)]
    corpus += [G.fabricate_finite(s) for s in range(5, 8)]
    corpus += [D.taut(ex_i), D.collapse_I(D.taut(ex_i), ZERO), D.embed_axiom4(F.SetMarker("B", K)),
               D.refk_pipeline(m=2).final]
    everything = D.CheckCfg(n=3, sampler=D.Sampler(limit=10 ** 6))
    # unmutated notations must pass, otherwise a catch would mean nothing
    baseline = [d.tag for d in corpus
                if not D.check_tree(d, depth=max(map(len, _paths(d))) + 1, cfg=everything, budget=10 ** 6).ok]
    assert not baseline, baseline
    missed = []
    for k in range(100):
        d = rng.choice(corpus)
        path = rng.choice(list(_paths(d)))
        node = _get(d, path)
        field, j = _mutate(node.judgment, rng)
        if j == node.judgment:
            field, j = "hgt", dataclasses.replace(node.judgment, hgt=succ(node.hgt))
        bad = _replace_at(d, path, dataclasses.replace(node, judgment=j, cache={}))
        rep = D.check_tree(bad, depth=len(path) + 1, cfg=everything, budget=10 ** 6)
        if rep.ok:
            missed.append(f"#{k} {node.tag}.{field} at depth {len(path)}")
    verdict(8, "mutated bounds are caught", not missed,
            f"100 single-field mutations, {100 - len(missed)} caught; missed: {missed or 'none'}")
