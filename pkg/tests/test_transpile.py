from __future__ import annotations

import random

import pytest

import criteria as K
import fixtures as F
from artifact import crosscheck as C
from artifact import engine as E
from artifact import genheap as G
from artifact import heap as Hp
from artifact import lang as L
from artifact import terms as T
from artifact import transpile as X


def test_running_example_inventory():
    assert K.running_inventory() == []


def test_running_example_main():
    g, bodies = F.running_example()
    p = X.encode_guard(g, X.EncodingEnv(bodies, sort_split=False))
    # 3·a < 17 is stored as a < 6 after normalization
    assert "main = assert(not((find_Rec_f τ0 a) < 6))" in X.pretty_print(p)


def test_running_example_outcomes():
    g, bodies = F.running_example()
    for split in (True, False):
        p = X.encode_guard(g, X.EncodingEnv(bodies, sort_split=split))
        assert isinstance(X.fir_interpret(p, {"a": 5}), X.AssertFailed)
        assert isinstance(X.fir_interpret(p, {"a": 6}), X.SafePass)


def test_running_example_agrees_with_ground_evaluation():
    g, bodies = F.running_example()
    p = X.encode_guard(g, X.EncodingEnv(bodies))
    with G.using_bodies(bodies, 64):
        for v in range(-3, 9):
            holds = T.evaluate(g, T.GroundSubstitution({"a": v}))
            assert isinstance(X.fir_interpret(p, {"a": v}), X.AssertFailed) == holds


def test_sort_split_signatures():
    g, bodies = F.running_example()
    p = X.encode_guard(g, X.EncodingEnv(bodies))
    assert p.slots == (T.INT, T.PTR, T.BOOL)
    assert {"find_Rec_f_int", "find_eps_int", "find_h1_int"} <= set(p.defs)
    assert "find_eps_int ctx_int ctx_ptr ctx_bool x = ctx_int x" in X.pretty_print(p)


def test_eps_one_liner():
    p = X.encode_find(G.EPSD, T.var("x"), X.EncodingEnv(G.BodyTable(), sort_split=False))
    assert "find_eps ctx x = ctx x" in X.pretty_print(p)
    for v in (-1, 0, 7):
        assert X.fir_value(p, {"x": v}) == v


def test_top_guard_is_trivially_unsafe():
    p = X.encode_guard(T.TOP, X.EncodingEnv(G.BodyTable()))
    assert "assert(not(true))" in X.pretty_print(p)
    assert isinstance(X.fir_interpret(p, {}), X.AssertFailed)


def test_empty_program_prints_header_only():
    p = X.FuncIR()
    assert p.defs == {}
    text = X.pretty_print(p)
    assert text.startswith("-- generated by artifact transpile")
    assert "find_" not in text


def test_inc_three_value_both_modes():
    assert K.inc_three_value(True) == 31
    assert K.inc_three_value(False) == 31


def test_inc_three_sort_split_families():
    rep = F.report("inc_three")
    p = X.encode_find(rep.result, K.INC_THREE_KEY, X.EncodingEnv(rep.bodies))
    names = set(p.defs)
    assert any(n.endswith("_int") for n in names) and any(n.endswith("_ptr") for n in names)


def test_inline_keeps_meaning():
    rep = F.report("inc_three")
    p = X.encode_find(rep.result, K.INC_THREE_KEY, X.EncodingEnv(rep.bodies))
    q = X.inline_eps(p)
    assert X.fir_value(q, {}) == 31
    assert not any(n.startswith("find_eps") for n in q.defs)
    assert len(q.defs) <= len(p.defs)


def test_agreement_triples():
    rng = random.Random(70)
    bad = [b for b in (K.agreement_triple(rng) for _ in range(300)) if b]
    assert bad == []


def test_order_and_tail_checks_on_corpus():
    for name in F.CORPUS:
        rep = F.report(name)
        for g in [rep.halt_pc, *(e.pc for e in rep.errors)]:
            for split in (True, False):
                p = X.encode_guard(g, X.EncodingEnv(rep.bodies, sort_split=split))
                assert X.order_violations(p) == []
                assert X.tail_violations(p) == []
                assert X.order_violations(X.inline_eps(p)) == []


def test_missing_body_is_an_error():
    g = T.lt(T.cell(G.rec(G.RecId("nope", frozenset({"nope"}))), T.var("a")), T.num(1))
    with pytest.raises(X.EncodingError):
        X.encode_guard(g, X.EncodingEnv(G.BodyTable()))


def test_undefined_input_is_undefined_behaviour():
    p = X.encode_guard(T.parse_term("LI(x) = 1"), X.EncodingEnv(G.BodyTable()))
    with pytest.raises(X.UndefinedBehaviour):
        X.fir_interpret(p, {})


def test_fuel_exhaustion():
    rid = G.RecId("w", frozenset({"w"}))
    bodies = G.BodyTable()
    bodies.define(rid, G.compose(G.definite(Hp.parse_heap("{x ↦ LI(x) + 1}")), G.rec(rid)))
    p = X.encode_guard(T.eq(T.cell(G.rec(rid), T.var("x")), T.num(0)), X.EncodingEnv(bodies))
    assert isinstance(X.fir_interpret(p, {"x": 0}, fuel=500), X.OutOfFuel)


def _guard_holds(g: T.Term, bodies: G.BodyTable, store: dict) -> bool:
    try:
        with G.using_bodies(bodies, 64):
            return bool(T.evaluate(g, T.GroundSubstitution(store)))
    except (T.Demand, T.Undefined, G.DepthExceeded):
        return False


def _fails(p: X.FuncIR, store: dict) -> bool:
    try:
        return isinstance(X.fir_interpret(p, store), X.AssertFailed)
    except X.UndefinedBehaviour:
        return False


@pytest.mark.parametrize("name", [*F.CORPUS, "fail", "nullderef"])
def test_guard_satisfiable_iff_encoding_fails(name):
    """Per input: the guard holds exactly when the encoded assertion fails."""
    p = L.parse_program(F.source(name))
    rep = E.verify(p)
    stores = list(C.small_inputs(p))
    for g in [rep.halt_pc, *(e.pc for e in rep.errors)]:
        fir = X.encode_guard(g, X.EncodingEnv(rep.bodies))
        hits = 0
        for store in stores:
            held = _guard_holds(g, rep.bodies, store)
            assert _fails(fir, store) == held, (T.show(g), store)
            hits += held
        assert (hits > 0) == (g is not T.BOT)
