from __future__ import annotations

import pytest

import fixtures as F
from artifact import lang as L
from artifact import terms as T


def run(src: str, store: dict | None = None, fuel: int = 1000):
    return L.concrete_run(L.parse_program(src), L.ConcreteState(dict(store or {})), fuel)


def test_inc_list_parses_with_labels():
    p = F.program("inc_list")
    # an entry instruction keeps the start free of incoming jumps
    assert len(p.statements) == 6
    assert set(p.labels) == {"Inc", "Exit"}


def test_minimal_program():
    assert len(L.parse_program("Exit: halt").statements) == 1


def test_undefined_label_is_rejected():
    with pytest.raises(L.ParseError, match="undefined label X"):
        L.parse_program("goto {true -> X}\nhalt")


def test_duplicate_label_is_rejected():
    with pytest.raises(L.ParseError, match="duplicate"):
        L.parse_program("A: halt\nA: halt")


def test_program_without_halt_is_rejected():
    with pytest.raises(L.ParseError, match="halt"):
        L.parse_program("x := 1")


def test_syntax_error_has_position():
    with pytest.raises(L.ParseError, match=r"^2:6"):
        L.parse_program("x := 1\nx := := 2\nhalt")


def test_comments_are_skipped():
    assert len(L.parse_program("// nothing\nhalt // done\n").statements) == 1


def test_nested_loop_recursive_vertices():
    assert F.nested_loop_cfg().recursive == frozenset({1, 2})


def test_straight_line_has_no_recursive_vertices():
    assert L.build_cfg(L.parse_program("x := 1\ny := x\nhalt")).recursive == frozenset()


def test_inc_list_recursive_vertex_is_loop_head():
    p = F.program("inc_list")
    cfg = L.build_cfg(p)
    assert cfg.recursive == frozenset({p.labels["Inc"]})


def test_recursive_vertices_follow_finish_times():
    for name in F.CORPUS:
        cfg = L.build_cfg(F.program(name))
        want = {v for a, v in cfg.edges if cfg.finish_time[a] >= cfg.finish_time[v]}
        assert cfg.recursive == frozenset(want)
        assert cfg.start not in {b for _, b in cfg.edges}


def test_goto_falls_through():
    p = L.parse_program("goto {x = 0 -> A}\nx := 5\nA: halt")
    assert (0, 1) in L.build_cfg(p).edges


def test_inc_list_concrete_run():
    res = run(F.source("inc_list"), F.INC_LIST_INPUT)
    assert isinstance(res, L.Halted)
    st = res.state.store
    assert st["p"] is None
    assert st[(T.addr(1), "Key")] == 11 and st[(T.addr(2), "Key")] == 21


def test_halt_leaves_store_unchanged():
    res = run("Exit: halt")
    assert isinstance(res, L.Halted) and res.state.store == {}


def test_inc_three_program_value():
    res = run(F.source("inc_three"))
    assert isinstance(res, L.Halted)
    assert res.state.store["r"] == 31


def test_first_true_arm_is_taken():
    res = run("goto {x > 0 -> A, x > 1 -> B}\nhalt\nA: y := 1\nhalt\nB: y := 2\nhalt", {"x": 5})
    assert res.state.store["y"] == 1


def test_null_dereference_and_fail():
    assert isinstance(run(F.source("nullderef")), L.NullDeref)
    assert isinstance(run(F.source("fail")), L.Failed)


def test_uninitialized_read_is_an_error():
    with pytest.raises(L.UninitializedRead):
        run("y := x + 1\nhalt")


def test_out_of_fuel():
    assert isinstance(run("L: goto {true -> L}\nhalt", fuel=50), L.OutOfFuel)


def test_allocation_uses_fresh_addresses():
    res = run(F.source("new_tree"))
    st = res.state.store
    assert st["x"] == T.addr(0x40)
    assert st[(T.addr(0x40), "L")] == T.addr(0x41) and st[(T.addr(0x40), "R")] == T.addr(0x42)


def test_concrete_run_is_deterministic():
    a = run(F.source("inc_list"), F.INC_LIST_INPUT)
    b = run(F.source("inc_list"), F.INC_LIST_INPUT)
    assert a == b
