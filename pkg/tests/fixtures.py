"""Shared builders for the corpus, the worked examples and the running encoding example."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from artifact import engine as E
from artifact import genheap as G
from artifact import heap as Hp
from artifact import lang as L
from artifact import terms as T

CORPUS = ("remove_all", "abs", "inc_list", "new_tree", "inc_three")
NESTED_LOOP_EDGES = [(0, 1), (1, 2), (2, 3), (3, 2), (3, 4), (4, 1), (4, 5)]


def source(name: str) -> str:
    return resources.files("artifact").joinpath("corpus", f"{name}.dl").read_text(encoding="utf-8")


def corpus_path(name: str) -> str:
    return str(resources.files("artifact").joinpath("corpus", name))


@lru_cache(maxsize=None)
def program(name: str) -> L.Program:
    return L.parse_program(source(name))


@lru_cache(maxsize=None)
def report(name: str) -> E.VerificationReport:
    return E.verify(program(name))


def nested_loop_cfg() -> L.Cfg:
    return L.graph_cfg(list(range(6)), NESTED_LOOP_EDGES, 0, frozenset({5}))


INC_LIST_INPUT = {
    "p": T.addr(1),
    (T.addr(1), "Key"): 10, (T.addr(1), "Next"): T.addr(2),
    (T.addr(2), "Key"): 20, (T.addr(2), "Next"): None,
}

SIGMA0_TEXT = "{p ↦ 0x1; 0x1.Key ↦ 10; 0x1.Next ↦ 0x2; 0x2.Key ↦ 20; 0x2.Next ↦ null}"
SIGMA2_TEXT = "{p ↦ null; 0x1.Key ↦ 11; 0x1.Next ↦ 0x2; 0x2.Key ↦ 21; 0x2.Next ↦ null}"
SORTS = {"p": T.PTR, "Next": T.PTR, "a": T.PTR}


def inc_reduction() -> tuple[G.Heap, G.BodyTable]:
    """σ₀ ∘ Rec(Inc) for the two-node list, with the engine's body table."""
    rep = report("inc_list")
    (rid,) = [r for r, _ in rep.bodies.items()]
    sigma0 = Hp.parse_heap(SIGMA0_TEXT, SORTS)
    return G.compose(G.definite(sigma0), G.rec(rid)), rep.bodies


def running_example() -> tuple[T.Term, G.BodyTable]:
    """``LI(Rec(f), a) * 3 < 17`` with Body(f) = merge(⟨c, ε⟩, ⟨¬c, σ ∘ Rec(f)⟩).

    Here σ = {a ↦ LI(a) + 1} and c = LI(a) ≥ 5, so every input terminates.
    """
    a = T.var("a")
    la = T.cell(None, a)
    rid = G.RecId("f", frozenset({"f"}))
    sigma = G.definite(Hp.heap([(a, T.add(la, T.num(1)))]))
    c = T.ge(la, T.num(5))
    bodies = G.BodyTable()
    bodies.define(rid, G.merge([(c, G.EPSD), (T.not_(c), G.compose(sigma, G.rec(rid)))]))
    g = T.lt(T.mul(T.cell(G.rec(rid), a), T.num(3)), T.num(17))
    return g, bodies
