"""The eight acceptance criteria as functions returning a list of failures.

An empty list means the criterion holds. ``test_acceptance`` prints one
line per criterion; the unit tests reuse the smaller pieces.
"""

from __future__ import annotations

import random
import time

import algebra_props as A
import fixtures as F
import oracle as O
from artifact import crosscheck as C
from artifact import engine as E
from artifact import genheap as G
from artifact import heap as Hp
from artifact import lang as L
from artifact import paths as P
from artifact import randgen as R
from artifact import terms as T
from artifact import transpile as X

ALGEBRA_INSTANCES = 1000
ALGEBRA_SECONDS = 60.0


def algebra_suite(instances: int = ALGEBRA_INSTANCES) -> tuple[list[str], float]:
    start = time.perf_counter()
    bad = []
    for name in A.PROPERTIES:
        found = A.run_property(name, instances)
        bad += [f"{name}: {c}" for c in found[:3]]
    return bad, time.perf_counter() - start


# ---------------------------------------------------------------- worked examples


def _expect(bad: list[str], label: str, got: T.Term | Hp.SymbolicHeap, want_text: str) -> None:
    if isinstance(got, Hp.SymbolicHeap):
        want = Hp.parse_heap(want_text, F.SORTS)
        ok = Hp.same_entries(got, want)
        shown = Hp.show_heap(got)
    else:
        want = T.coerce(T.parse_term(want_text, F.SORTS), got.sort)
        ok = got is want
        shown = T.show(got)
    if not ok:
        bad.append(f"{label}: got {shown}, expected the normal form of {want_text}")


def simple_composition() -> Hp.SymbolicHeap:
    return Hp.compose(Hp.parse_heap("{x ↦ 42}"), Hp.parse_heap("{x ↦ LI(x) + 1}"))


def field_heap() -> Hp.SymbolicHeap:
    return Hp.parse_heap("{0x1.A ↦ 42; LI(x).B ↦ union(⟨LI(x).B = 0x1.A, 42⟩, ⟨LI(x).B ≠ 0x1.A, 7⟩)}",
                         {"x": T.PTR, "y": T.PTR})


def list_heaps() -> tuple[Hp.SymbolicHeap, Hp.SymbolicHeap]:
    sigma_f = Hp.parse_heap("{a ↦ 0x1; 0x1.Key ↦ 10}", F.SORTS)
    sigma_g = Hp.parse_heap("{x ↦ LI(LI(a).Key) + 5}", F.SORTS)
    return sigma_f, sigma_g


def abs_merge() -> Hp.SymbolicHeap:
    g = T.parse_term("LI(x) ≥ 0")
    return Hp.merge([(g, Hp.EPS), (T.not_(g), Hp.parse_heap("{x ↦ -LI(x)}"))])


def worked_examples() -> list[str]:
    bad: list[str] = []
    x = T.var("x")
    _expect(bad, "composition", simple_composition(), "{x ↦ 42 + 1}")

    s1 = field_heap()
    _expect(bad, "field read(σ, 0x1.A)", Hp.read(s1, T.parse_term("0x1.A")), "42")
    _expect(bad, "field read(σ, LI(y).B)",
            Hp.read(s1, T.parse_term("LI(y).B", {"y": T.PTR})),
            "union(⟨LI(y).B = 0x1.A, 42⟩, ⟨LI(y).B = LI(x).B ∧ LI(x).B ≠ 0x1.A, 7⟩,"
            " ⟨LI(y).B ≠ 0x1.A ∧ LI(y).B ≠ LI(x).B, LI(LI(y).B)⟩)")

    s2 = Hp.compose(Hp.parse_heap("{x ↦ 42; y ↦ 7}"), Hp.parse_heap("{y ↦ LI(x) - LI(y)}"))
    _expect(bad, "sequenced writes", s2, "{x ↦ 42; y ↦ 42 − 7}")

    sf, sg = list_heaps()
    _expect(bad, "list σ_F • read(σ_G, x)", Hp.refine(sf, Hp.read(sg, x)), "10 + 5")
    _expect(bad, "list read(σ_F ∘ σ_G, x)", Hp.read(Hp.compose(sf, sg), Hp.refine(sf, x)), "10 + 5")
    _expect(bad, "list σ_F ∘ σ_G", Hp.compose(sf, sg), "{a ↦ 0x1; 0x1.Key ↦ 10; x ↦ (10 + 5)}")

    _expect(bad, "abs merged read", Hp.read(abs_merge(), x),
            "union(⟨LI(x) ≥ 0, LI(x)⟩, ⟨¬(LI(x) ≥ 0), −LI(x)⟩)")
    return bad


# ---------------------------------------------------------------- reduction


MAX_INC_STEPS = 30


def inc_reduction() -> tuple[list[str], int]:
    h, bodies = F.inc_reduction()
    red = G.reduce(h, bodies, fuel=MAX_INC_STEPS)
    bad = []
    if not isinstance(red, G.Normal):
        bad.append(f"not irreducible after {MAX_INC_STEPS} steps: {G.show(red.heap)}")
    elif not isinstance(red.heap, G.Definite):
        bad.append(f"normal form is not definite: {G.show(red.heap)}")
    else:
        want = Hp.parse_heap(F.SIGMA2_TEXT, F.SORTS)
        if not Hp.same_entries(red.heap.sigma, want):
            bad.append(f"normal form {G.show(red.heap)} differs from {F.SIGMA2_TEXT}")
    return bad, red.steps


# ---------------------------------------------------------------- path descriptions


EXPECTED_EQUATIONS = {
    "Π(0, 5, ∅)": "(0, 1) ∘ Rec(1, {1}) ∘ (1, 2) ∘ Rec(2, {1, 2}) ∘ (2, 3) ∘ (3, 4) ∘ (4, 5)",
    "Rec(1, {1})": "(1, 2) ∘ Rec(2, {1, 2}) ∘ (2, 3) ∘ (3, 4) ∘ (4, 1) ∘ Rec(1, {1}) ∪ {ε}",
    "Rec(2, {1, 2})": "(2, 3) ∘ (3, 2) ∘ Rec(2, {1, 2}) ∪ {ε}",
}
MAX_PATH_LEN = 10
RANDOM_CFGS = 200


def paths_agree(g: L.Cfg, max_len: int = MAX_PATH_LEN) -> str | None:
    """Bounded descriptor enumeration equals brute force for every bound."""
    exit_ = min(g.exits)
    d, system = P.describe_paths(g, g.start, exit_)
    full = P.enumerate_bounded(d, max_len, system.rec_defs)
    brute = P.brute_force_paths(g, g.start, exit_, max_len)
    for n in range(max_len + 1):
        a = {p for p in full if len(p.edges) <= n}
        b = {p for p in brute if len(p.edges) <= n}
        if a != b:
            return f"bound {n}: {len(a ^ b)} paths differ on edges {g.edges}"
    return None


def printed_equations(g: L.Cfg) -> dict[str, str]:
    eqs = P.equations(g)
    out = {}
    for line in eqs["pi_equations"] + eqs["rec_defs"]:
        lhs, rhs = line.split(" = ", 1)
        out[lhs] = rhs
    return out


def path_descriptions() -> list[str]:
    bad = []
    g = F.nested_loop_cfg()
    got = printed_equations(g)
    for lhs, rhs in EXPECTED_EQUATIONS.items():
        if lhs not in got:
            bad.append(f"missing equation for {lhs}")
        elif P.canonical(P.parse_desc(got[lhs])) != P.canonical(P.parse_desc(rhs)):
            bad.append(f"{lhs} = {got[lhs]}, expected {rhs}")
    problem = paths_agree(g)
    if problem:
        bad.append(f"nested-loop graph: {problem}")
    rng = random.Random(20)
    for _ in range(RANDOM_CFGS):
        problem = paths_agree(R.rand_cfg(rng))
        if problem:
            bad.append(problem)
    return bad


# ---------------------------------------------------------------- exec vs interpreter


RANDOM_LOOP_FREE = 20


def soundness_programs(count: int = RANDOM_LOOP_FREE, seed: int = 17) -> list[tuple[str, L.Program]]:
    out = [(name, F.program(name)) for name in F.CORPUS]
    rng = random.Random(seed)
    for i in range(count):
        out.append((f"random{i}", L.parse_program(R.rand_loop_free_program(rng))))
    return out


def exec_soundness(count: int = RANDOM_LOOP_FREE) -> tuple[list[str], int]:
    bad, checked = [], 0
    for name, p in soundness_programs(count):
        rep = E.verify(p)
        stores = list(C.small_inputs(p))
        checked += len(stores)
        for store, conc, sym in C.disagreements(p, rep, stores):
            bad.append(f"{name}: input {store} runs to {conc}, symbolic result predicts {sym}")
    return bad, checked


# ---------------------------------------------------------------- verdicts


FAIL_PROGRAM = "Error: fail\nhalt\n"
NULLDEREF_PROGRAM = "p := null\np.Key := 1\nhalt\n"


def verdicts() -> list[str]:
    bad = []
    for name in ("inc_list", "inc_three"):
        if not F.report(name).safe:
            bad.append(f"{name} reported unsafe: {F.report(name).to_json()['errors']}")
    rep = E.verify(L.parse_program(FAIL_PROGRAM))
    if [(e.kind, e.pc) for e in rep.errors] != [("Fail", T.TOP)]:
        bad.append(f"fail program: {rep.to_json()['errors']}")
    rep = E.verify(L.parse_program(NULLDEREF_PROGRAM))
    if [e.kind for e in rep.errors] != ["NullDeref"]:
        bad.append(f"null-deref program: {rep.to_json()['errors']}")
    if not F.report("remove_all").safe:
        bad.append(f"remove_all reported unsafe: {F.report('remove_all').to_json()['errors']}")
    p1 = F.program("remove_all")
    for store in C.small_inputs(p1):
        out = C.concrete_outcome(p1, store)
        if out.kind != "Halted":
            bad.append(f"remove_all concrete run on {store} ends with {out}")
            break
    return bad


# ---------------------------------------------------------------- transpilation


INC_THREE_KEY = T.field(T.addr(0x42), "Key")
RUNNING_INVENTORY = {"find_Rec_f", "find_eps", "find_h1_Rec_f", "find_h1"}
AGREEMENT_TRIPLES = 1000


def running_inventory() -> list[str]:
    g, bodies = F.running_example()
    p = X.encode_guard(g, X.EncodingEnv(bodies, sort_split=False))
    bad = []
    if set(p.defs) != RUNNING_INVENTORY:
        bad.append(f"function inventory {sorted(p.defs)}")
    if p.main_kind != "assert" or not X.show_expr(p.main).startswith("(find_Rec_f τ0 a)"):
        bad.append(f"main is {p.main_kind} {X.show_expr(p.main)}")
    text = X.pretty_print(p)
    for line in ("find_eps ctx x = ctx x", "find_h1_Rec_f ctx x = find_Rec_f (find_h1 ctx) x"):
        if line not in text:
            bad.append(f"missing line {line!r}")
    bad += X.order_violations(p) + X.tail_violations(p)
    return bad


def inc_three_value(sort_split: bool = True) -> object:
    rep = F.report("inc_three")
    p = X.encode_find(rep.result, INC_THREE_KEY, X.EncodingEnv(rep.bodies, sort_split=sort_split))
    return X.fir_value(p, {})


def agreement_triple(rng: random.Random) -> str | None:
    """find_σ run on context τ agrees with reading τ ∘ σ at τ • x."""
    sigma, tau = R.rand_heap(rng), R.rand_heap(rng)
    vsort = rng.choice([T.INT, T.PTR])
    x = R.rand_loc(rng, 3, vsort)
    s = O.fresh_state(rng)
    want = O.val(Hp.read(Hp.compose(tau, sigma), Hp.refine(tau, x)), s)
    p = X.encode_find(G.definite(sigma), x, X.EncodingEnv(G.BodyTable(), sort_split=rng.random() < 0.5))
    try:
        got = X.fir_value(p, O.apply(tau, s))
    except X.UndefinedBehaviour:
        got = O.UNDEF
    if not O.same(got, want):
        return f"σ={Hp.show_heap(sigma)} τ={Hp.show_heap(tau)} x={T.show(x)}: {got!r} vs {want!r}"
    return None


def transpilation(triples: int = AGREEMENT_TRIPLES) -> list[str]:
    bad = running_inventory()
    for split in (True, False):
        v = inc_three_value(split)
        if v != 31:
            bad.append(f"inc_three value {v!r} with sort_split={split}")
    rng = random.Random(7)
    for _ in range(triples):
        problem = agreement_triple(rng)
        if problem:
            bad.append(problem)
    return bad


# ---------------------------------------------------------------- engine invariants


RANDOM_LOOPING = 50


def engine_invariants(count: int = RANDOM_LOOPING) -> list[str]:
    bad = []
    rng = random.Random(8)
    progs = [(n, F.source(n)) for n in (*F.CORPUS, "compose", "fail", "nullderef")]
    progs += [(f"loop{i}", R.rand_looping_program(rng)) for i in range(count)]
    for name, src in progs:
        p = L.parse_program(src)
        first = E.verify(p)
        again = E.verify(p)
        built = dict(first.bodies.constructions)
        if built and max(built.values()) > 1:
            bad.append(f"{name}: bodies built more than once {built}")
        if sorted(map(repr, first.bodies.bodies)) != sorted(map(repr, again.bodies.bodies)):
            bad.append(f"{name}: body keys differ between runs")
        system = P.PathSystem(L.build_cfg(p))
        system.pi(system.cfg.start, min(system.cfg.exits))
        if system.constructions and max(system.constructions.values()) > 1:
            bad.append(f"{name}: path Rec built more than once")
    return bad
