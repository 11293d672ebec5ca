"""Command-line entry point: ``ordbench {ord,hull,derive,test} ...``.

Exit codes: 0 success, 1 ill-formed input, 2 syntax error, 3 derivation
stage failure, 4 property counterexample.
"""

from __future__ import annotations

import argparse
import itertools
import json
import random
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import derivations as D
from . import formulas as F
from . import generators as G
from . import hull as H
from . import ordinals as O
from .errors import IllFormed, OrdbenchError, OrdSyntaxError, StageError
from .universe import UniverseCfg

EXIT_OK, EXIT_ILL, EXIT_SYNTAX, EXIT_STAGE, EXIT_COUNTER = 0, 1, 2, 3, 4


@dataclass
class CliConfig:
    kernel: O.KernelCfg = field(default_factory=O.KernelCfg)
    universe: UniverseCfg = field(default_factory=UniverseCfg)
    sampler_seed: int = 0
    out: Path | None = None
    format: str = "text"


class Counterexample(Exception):
    def __init__(self, suite: str, instance: str):
        super().__init__(f"{suite}: minimal counterexample {instance}")


class Emitter:
    """Collects stdout lines so that nothing is printed half-way on failure."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.lines: list = []

    def line(self, text: str, **record) -> None:
        if self.fmt == "lines":
            self.lines.append(json.dumps({"msg": text, **record}, sort_keys=True))
        else:
            self.lines.append(text)

    def flush(self) -> None:
        for ln in self.lines:
            print(ln)


# ---------------------------------------------------------------- ord

def _term(text: str) -> O.OrdTerm:
    return O.parse(text)


def cmd_ord(args, cfg: CliConfig, out: Emitter) -> int:
    sub = args.sub
    if sub == "cmp":
        out.line(O.cmp(_term(args.left), _term(args.right)).name)
        return EXIT_OK
    if sub == "normalize":
        out.line(O.to_text(O.normalize(_term(args.term), cfg.kernel)))
        return EXIT_OK
    if sub in ("add", "nsum", "veblen"):
        fn = {"add": O.add, "nsum": O.nsum, "veblen": O.veblen}[sub]
        out.line(O.to_text(fn(_term(args.left), _term(args.right))))
        return EXIT_OK
    if sub == "wexp":
        out.line(O.to_text(O.wexp(_term(args.term))))
        return EXIT_OK
    if sub == "tower":
        out.line(O.to_text(O.omega_tower(args.height, _term(args.term))))
        return EXIT_OK
    if sub == "enum":
        alpha = O.ORDER_LAW_ALPHABET if args.alphabet == "order" else O.FULL
        kcfg = O.KernelCfg(n=cfg.kernel.n, enum_budget=args.budget)
        terms = O.enum_terms(kcfg, alpha)
        for t in terms:
            out.line(O.to_text(t))
        out.line(f"{len(terms)} terms")
        return EXIT_OK
    raise AssertionError(sub)


# --------------------------------------------------------------- hull

def _ctx(args) -> H.HullCtx:
    theta = frozenset(_term(t) for t in args.theta or ())
    return H.HullCtx(alpha=_term(args.alpha), beta=_term(args.beta), theta=theta)


def cmd_hull(args, cfg: CliConfig, out: Emitter) -> int:
    if args.sub == "member":
        out.line(str(H.in_hull(_term(args.term), _ctx(args))).lower())
    elif args.sub == "saturate":
        kcfg = O.KernelCfg(n=cfg.kernel.n, enum_budget=args.budget)
        members = H.hull_saturate(_ctx(args), O.enum_terms(kcfg))
        for t in sorted(members, key=O.sort_key):
            out.line(O.to_text(t))
        out.line(f"{len(members)} members")
    else:
        theta = frozenset(_term(t) for t in args.theta or ())
        q = H.MhQuery(xi=_term(args.xi), theta=theta, pi=_term(args.pi), bound=_term(args.bound))
        out.line(str(H.mh_side_condition(q)).lower())
    return EXIT_OK


# ------------------------------------------------------------- derive

def _counts_text(counts: dict) -> str:
    keys = ("checked_true", "checked_false", "assumed")
    return " ".join(f"{k}={counts.get(k, 0)}" for k in keys)


def _tree_summary(rep: D.TreeReport, d: D.Deriv) -> str:
    return (f"nodes={rep.nodes} hgt={O.to_text(d.hgt)} crk={O.to_text(d.crk)} "
            f"violations={len(rep.violations)} obligations: {_counts_text(rep.counts())}")


def _derive_taut(opts: dict):
    d = D.taut(F.parse_formula(opts["formula"]))
    rep = D.check_tree(d, opts["depth"], D.CheckCfg(n=opts["n"], sampler=D.Sampler(seed=opts["seed"])),
                       budget=opts["budget"])
    return rep.trace, [_tree_summary(rep, d)], rep.ok


def _derive_collapse_i(opts: dict):
    base = D.taut(F.parse_formula(opts["formula"]))
    gamma = O.parse(opts["gamma"])
    d = D.collapse_I(base, gamma, n=opts["n"])
    # the tautology already has height >= I, so the collapse index sits at level 2
    level = max(opts["n"], 2)
    rep = D.check_tree(d, opts["depth"], D.CheckCfg(n=level, sampler=D.Sampler(seed=opts["seed"])),
                       budget=opts["budget"])
    lines = [f"collapse index={O.to_text(D.collapse_index(gamma, base.hgt))}", _tree_summary(rep, d)]
    return rep.trace, lines, rep.ok


def _derive_pce(opts: dict):
    d = G.fabricate_finite(opts["seed"], nesting=opts["nesting"])
    before = G.cut_count(d)
    x = D.eliminate_cuts(d)
    m = D.materialize(x, budget=opts["budget"])
    rep = D.check_tree(m, opts["depth"], D.CheckCfg(n=opts["n"]), budget=opts["budget"])
    true = all(F.truth(a) for a in m.concl)
    lines = [f"cuts before={before} after={G.cut_count(m)} crk {O.to_text(d.crk)} -> {O.to_text(m.crk)}",
             f"conclusion true: {str(true).lower()}",
             _tree_summary(rep, m)]
    return rep.trace, lines, rep.ok and true


def _derive_pipeline(opts: dict):
    m = opts["m"]
    res = D.refk_pipeline(m=m, depth=opts["depth"], sampler=D.Sampler(limit=2, seed=opts["seed"]))
    rep = D.check_tree(res.final, opts["depth"], D.CheckCfg(n=max(opts["n"], m + 1)), budget=opts["budget"])
    lines = [f"stage {s.name}: hgt={O.to_text(s.deriv.hgt)} crk={O.to_text(s.deriv.crk)}" for s in res.stages]
    lines.append(f"a={O.to_text(res.a)} b={O.to_text(res.b)} xi={O.to_text(res.xi)}")
    lines.append(f"final check: {_tree_summary(rep, res.final)}")
    lines.append(f"collapse tree obligations: {_counts_text(res.tree.counts())}")
    ok = all(res.checks.values()) and rep.ok
    lines.append(f"xi in Mh-bound check: {str(all(res.checks.values())).lower()}")
    records = res.records() + [{"stage": "final_check", **r} for r in rep.trace]
    return records, lines, ok


BUILDERS = {
    "taut": _derive_taut,
    "collapse-i": _derive_collapse_i,
    "pce": _derive_pce,
    "pipeline": _derive_pipeline,
}


def _derive_opts(args, cfg: CliConfig) -> dict:
    opts = {"n": cfg.kernel.n, "seed": cfg.sampler_seed, "depth": args.depth, "budget": args.budget}
    if args.sub in ("taut", "collapse-i"):
        opts["formula"] = args.formula
    if args.sub == "collapse-i":
        opts["gamma"] = args.gamma
    if args.sub == "pce":
        opts["nesting"] = args.nesting
    if args.sub == "pipeline":
        opts["m"] = args.m
    return opts


def render_trace(sub: str, opts: dict) -> tuple:
    """The trace text for a derive subcommand plus its summary lines and status."""
    try:
        records, lines, ok = BUILDERS[sub](opts)
    except (StageError, OrdSyntaxError, IllFormed):
        raise
    except OrdbenchError as e:
        raise StageError(sub, e) from e
    header = {"header": True, "command": "derive", "sub": sub, "args": opts}
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in [header] + records)
    return text, lines, ok


def _write(path: Path | None, text: str) -> None:
    if path is not None:
        path.write_text(text)


def cmd_derive(args, cfg: CliConfig, out: Emitter) -> int:
    if args.sub == "check":
        path = Path(args.trace)
        stored = path.read_text()
        header = json.loads(stored.splitlines()[0])
        if not header.get("header") or header.get("sub") not in BUILDERS:
            raise StageError("check", IllFormed("trace file has no derive header"))
        opts = dict(header["args"])
        if args.depth is not None:
            opts["depth"] = args.depth
        text, lines, ok = render_trace(header["sub"], opts)
        same = text == stored
        for ln in lines:
            out.line(ln)
        out.line(f"trace reproduced: {str(same).lower()}")
        if not same:
            raise StageError("check", IllFormed("regenerated trace differs from the stored one"))
        return EXIT_OK if ok else EXIT_STAGE
    if args.depth is None:
        args.depth = 2
    opts = _derive_opts(args, cfg)
    text, lines, ok = render_trace(args.sub, opts)
    for ln in lines:
        out.line(ln)
    if not ok:
        return EXIT_STAGE
    _write(cfg.out, text)
    return EXIT_OK


# --------------------------------------------------------------- test

def _minimal(failures: list, key) -> object:
    return min(failures, key=key)


def _term_key(ts) -> tuple:
    return (sum(O.size(t) for t in ts), tuple(O.sort_key(t) for t in ts))


def order_law_failures(terms: list) -> tuple:
    """Trichotomy and transitivity counterexamples over ``terms``."""
    n = len(terms)
    below = [0] * n
    tri: list = []
    for i, j in itertools.combinations_with_replacement(range(n), 2):
        c = O.cmp(terms[i], terms[j])
        back = O.cmp(terms[j], terms[i])
        flipped = {O.Cmp.LT: O.Cmp.GT, O.Cmp.GT: O.Cmp.LT, O.Cmp.EQ: O.Cmp.EQ}[c]
        if back is not flipped or (c is O.Cmp.EQ) != (i == j):
            tri.append((terms[i], terms[j]))
        if c is O.Cmp.LT:
            below[j] |= 1 << i
        elif c is O.Cmp.GT:
            below[i] |= 1 << j
    trans: list = []
    # i < j and j < k must give i < k: below[j] is contained in below[k] whenever j < k
    for k in range(n):
        bits = below[k]
        j = 0
        while bits:
            if bits & 1 and below[j] & ~below[k]:
                missing = below[j] & ~below[k]
                i = (missing & -missing).bit_length() - 1
                trans.append((terms[i], terms[j], terms[k]))
            bits >>= 1
            j += 1
    return tri, trans


def _suite_order_laws(args, cfg: CliConfig, out: Emitter) -> None:
    kcfg = O.KernelCfg(n=cfg.kernel.n, enum_budget=args.budget)
    terms = O.enum_terms(kcfg, O.ORDER_LAW_ALPHABET)
    tri, trans = order_law_failures(terms)
    out.line(f"{len(terms)} terms of size <= {args.budget}")
    if tri:
        raise Counterexample("trichotomy", " vs ".join(map(O.to_text, _minimal(tri, _term_key))))
    if trans:
        raise Counterexample("transitivity", " < ".join(map(O.to_text, _minimal(trans, _term_key))))
    out.line("trichotomy OK, transitivity OK")


def hull_oracle_cases(budget: int, seed: int, n: int = 1, universe_size: int = 200,
                      sample: int = 20, pool: int = 3):
    """Yield (ctx, universe) pairs for the hull oracle comparison."""
    kcfg = O.KernelCfg(n=n, enum_budget=budget)
    universe = O.enum_by_size(kcfg)[:universe_size]
    rng = random.Random(seed)
    picks = sorted(rng.sample(range(len(universe)), min(sample, len(universe))))
    stages = [universe[i] for i in picks]
    theta_pool = [universe[i] for i in sorted(rng.sample(range(len(universe)), min(pool, len(universe))))]
    subsets = [frozenset(c) for r in range(len(theta_pool) + 1) for c in itertools.combinations(theta_pool, r)]
    for alpha in stages:
        for beta in stages:
            for theta in subsets:
                yield H.HullCtx(alpha, beta, theta), universe


def _suite_hull_oracle(args, cfg: CliConfig, out: Emitter) -> None:
    failures, cases = [], 0
    for ctx, universe in hull_oracle_cases(args.budget, cfg.sampler_seed, cfg.kernel.n,
                                           sample=args.samples or 20):
        sat = H.hull_saturate(ctx, universe)
        for t in universe:
            cases += 1
            if H.in_hull(t, ctx) != (t in sat):
                failures.append((t, ctx.alpha, ctx.beta))
    out.line(f"{cases} membership cases")
    if failures:
        t, a, b = _minimal(failures, _term_key)
        raise Counterexample("hull-oracle", f"{O.to_text(t)} at alpha={O.to_text(a)} beta={O.to_text(b)}")
    out.line("in_hull = saturate on 100% of cases")


def rank_law_failures(formulas: list) -> dict:
    """Counterexamples to the rank laws, keyed by law name."""
    bound = O.add(O.I, O.wexp(O.ONE))
    out: dict = {"k-sets": [], "parts": [], "I+w": [], "closure": [], "sigma": []}
    for a in formulas:
        k, kE, qk = F.k_sets(a)
        if not (qk <= kE <= k):
            out["k-sets"].append(a)
        r = F.rk(a)
        if not O.lt(r, bound):
            out["I+w"].append(a)
        if not G.additive_closure_member(r, G.rank_generators(a)):
            out["closure"].append(a)
        for lam in (O.K, O.I):
            if O.lt(r, lam) and not F.in_sigma_sigma(a, lam):
                out["sigma"].append(a)
        dec = F.decompose(a)
        if any(not O.lt(F.rk(dec.part(i)), r) for i in dec.family.indices):
            out["parts"].append(a)
    return out


def _suite_rank_laws(args, cfg: CliConfig, out: Emitter) -> None:
    fs = G.formulas(args.samples or 500, seed=cfg.sampler_seed)
    fails = rank_law_failures(fs)
    out.line(f"{len(fs)} formulas")
    labels = {"k-sets": "qk <= kE <= k", "parts": "rk(A_ι) < rk(A)", "I+w": "rk(A) < I+w",
              "closure": "rk(A) in additive closure", "sigma": "rk(A) < lam implies SigmaSigma(lam)"}
    for key, label in labels.items():
        if fails[key]:
            worst = _minimal(fails[key], lambda a: (F.size(a), F.text(a)))
            raise Counterexample(label, F.text(worst))
    for label in labels.values():
        out.line(f"{label}: OK")


def _suite_descent(args, cfg: CliConfig, out: Emitter) -> None:
    kcfg = O.KernelCfg(n=cfg.kernel.n, enum_budget=args.budget)
    terms = O.enum_terms(kcfg)
    rng = random.Random(cfg.sampler_seed)
    starts = terms if not args.samples else rng.sample(terms, min(args.samples, len(terms)))
    bad = []
    for t in starts:
        for strategy in H.Strategy:
            chain = H.descend_search(t, 12, strategy, seed=cfg.sampler_seed)
            if any(not O.lt(y, x) for x, y in zip(chain, chain[1:])):
                bad.append((t,))
    if bad:
        raise Counterexample("descent", O.to_text(_minimal(bad, _term_key)[0]))
    out.line(f"descent: {2 * len(starts)} chains strictly decreasing")


SUITES = {
    "order-laws": _suite_order_laws,
    "hull-oracle": _suite_hull_oracle,
    "rank-laws": _suite_rank_laws,
    "descent": _suite_descent,
}


def cmd_test(args, cfg: CliConfig, out: Emitter) -> int:
    start = time.perf_counter()
    SUITES[args.sub](args, cfg, out)
    if cfg.format == "text":
        print(f"[{args.sub} finished in {time.perf_counter() - start:.1f}s]", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=argparse.SUPPRESS, help="kernel stage (default 1)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="sampler seed (default 0)")
    common.add_argument("--format", choices=("text", "lines"), default=argparse.SUPPRESS)
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="trace output path")

    p = argparse.ArgumentParser(prog="ordbench", parents=[common],
                                description="Ordinal notations, hulls and derivation notations.")
    top = p.add_subparsers(dest="cmd", required=True)

    po = top.add_parser("ord", parents=[common], help="ordinal arithmetic")
    so = po.add_subparsers(dest="sub", required=True)
    x = so.add_parser("cmp", parents=[common])
    x.add_argument("left")
    x.add_argument("right")
    for name in ("add", "nsum", "veblen"):
        x = so.add_parser(name, parents=[common])
        x.add_argument("left")
        x.add_argument("right")
    for name in ("normalize", "wexp"):
        so.add_parser(name, parents=[common]).add_argument("term")
    x = so.add_parser("tower", parents=[common])
    x.add_argument("height", type=int)
    x.add_argument("term")
    x = so.add_parser("enum", parents=[common])
    x.add_argument("--budget", type=int, default=3)
    x.add_argument("--alphabet", choices=("full", "order"), default="full")

    ph = top.add_parser("hull", parents=[common], help="hull membership and Mahlo side conditions")
    sh = ph.add_subparsers(dest="sub", required=True)
    for name in ("member", "saturate"):
        x = sh.add_parser(name, parents=[common])
        x.add_argument("--alpha", required=True)
        x.add_argument("--beta", required=True)
        x.add_argument("--theta", action="append", help="parameter term (repeatable)")
        if name == "member":
            x.add_argument("term")
        else:
            x.add_argument("--budget", type=int, default=3)
    x = sh.add_parser("mh", parents=[common])
    x.add_argument("--xi", required=True)
    x.add_argument("--pi", required=True)
    x.add_argument("--bound", required=True)
    x.add_argument("--theta", action="append")

    pd = top.add_parser("derive", parents=[common], help="derivation notations")
    sd = pd.add_subparsers(dest="sub", required=True)

    def dflags(x):
        x.add_argument("--depth", type=int, default=None, help="check depth (default 2)")
        x.add_argument("--budget", type=int, default=5000, help="node budget")

    x = sd.add_parser("taut", parents=[common])
    x.add_argument("formula")
    dflags(x)
    x = sd.add_parser("collapse-i", parents=[common])
    x.add_argument("formula")
    x.add_argument("--gamma", default="0")
    dflags(x)
    x = sd.add_parser("pce", parents=[common])
    x.add_argument("--nesting", type=int, default=2)
    dflags(x)
    x = sd.add_parser("pipeline", parents=[common])
    x.add_argument("--m", type=int, default=2)
    dflags(x)
    x = sd.add_parser("check", parents=[common])
    x.add_argument("trace")
    dflags(x)

    pt = top.add_parser("test", parents=[common], help="property suites")
    st = pt.add_subparsers(dest="sub", required=True)
    for name, budget in (("order-laws", 4), ("hull-oracle", 4), ("rank-laws", 0), ("descent", 3)):
        x = st.add_parser(name, parents=[common])
        x.add_argument("--budget", type=int, default=budget)
        x.add_argument("--samples", type=int, default=0)
    return p


def _config(args) -> CliConfig:
    n = getattr(args, "n", 1)
    out = getattr(args, "out", None)
    return CliConfig(kernel=O.KernelCfg(n=n), sampler_seed=getattr(args, "seed", 0),
                     out=Path(out) if out else None, format=getattr(args, "format", "text"))


HANDLERS = {"ord": cmd_ord, "hull": cmd_hull, "derive": cmd_derive, "test": cmd_test}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _config(args)
    out = Emitter(cfg.format)
    try:
        code = HANDLERS[args.cmd](args, cfg, out)
    except OrdSyntaxError as e:
        out.flush()
        print(f"syntax error: {e}", file=sys.stderr)
        return EXIT_SYNTAX
    except Counterexample as e:
        out.flush()
        print(str(e))
        return EXIT_COUNTER
    except StageError as e:
        out.flush()
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE
    except (OrdbenchError, ValueError) as e:
        out.flush()
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ILL
    out.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
