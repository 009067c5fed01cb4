"""Agreement between concrete runs and the symbolic result.

For a ground input store, the symbolic side predicts the outcome by
evaluating the recorded error conditions and the halting condition, and
the final store by reducing ``σ₀ ∘ H`` to a ground definite heap.
Freshly allocated addresses are compared up to renaming.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Iterator

from . import genheap as G
from . import heap as Hp
from . import lang as L
from . import terms as T
from .engine import VerificationReport


@dataclass(frozen=True, slots=True)
class Outcome:
    kind: str  # Halted, Failed, NullDeref, OutOfFuel
    instruction: int | None = None
    store: tuple = ()


def input_variables(p: L.Program, cfg: L.Cfg | None = None) -> list[str]:
    """Variables that may be read before being assigned (live at entry)."""
    cfg = cfg or L.build_cfg(p)
    n = len(p.statements)
    uses: list[set[str]] = []
    defs: list[set[str]] = []
    for st in p.statements:
        u, d = set(), set()
        ins = st.instr
        if isinstance(ins, L.Assign):
            _expr_vars(ins.expr, u)
            if len(ins.target.path) == 1:
                d.add(ins.target.path[0])
            else:
                u.add(ins.target.path[0])
        elif isinstance(ins, L.Goto):
            for g, _ in ins.arms:
                _expr_vars(g, u)
        uses.append(u)
        defs.append(d)
    live: list[set[str]] = [set() for _ in range(n)]
    changed = True
    while changed:
        changed = False
        for v in reversed(range(n)):
            out = set().union(*(live[w] for w in cfg.succ(v)))
            new = uses[v] | (out - defs[v])
            if new != live[v]:
                live[v] = new
                changed = True
    return sorted(live[cfg.start])


def _expr_vars(e: L.Expr, acc: set[str]) -> None:
    if isinstance(e, L.Loc):
        acc.add(e.path[0])
    elif isinstance(e, L.Bin):
        _expr_vars(e.left, acc)
        _expr_vars(e.right, acc)
    elif isinstance(e, L.Un):
        _expr_vars(e.arg, acc)
    elif isinstance(e, L.New):
        for _, fe in e.fields:
            _expr_vars(fe, acc)


def small_inputs(p: L.Program, max_nodes: int = 3, values: range = range(-2, 3)) -> Iterator[dict]:
    """All input stores built from one acyclic list of at most ``max_nodes`` nodes.

    Integer and boolean inputs range over ``values`` and both truth values.
    The first pointer input points at the list head; further pointer inputs
    point at null or the head. Integer fields range over ``values``, the
    first pointer field links the list and other pointer fields are null.
    """
    ins = input_variables(p)
    ints = [v for v in ins if p.var_sort(v) == T.INT]
    bools = [v for v in ins if p.var_sort(v) == T.BOOL]
    ptrs = [v for v in ins if p.var_sort(v) == T.PTR]
    ifields = [f for f in p.fields if p.field_sort(f) == T.INT]
    pfields = [f for f in p.fields if p.field_sort(f) == T.PTR]
    bfields = [f for f in p.fields if p.field_sort(f) == T.BOOL]
    for n in range(max_nodes + 1 if (ptrs and p.fields) else 1):
        nodes = [T.addr(i + 1) for i in range(n)]
        head = nodes[0] if nodes else None
        choices = (None, head) if nodes else (None,)
        for keys in itertools.product(values, repeat=n * len(ifields)):
            for flags in itertools.product((False, True), repeat=n * len(bfields)):
                for iv in itertools.product(values, repeat=len(ints)):
                    for bv in itertools.product((False, True), repeat=len(bools)):
                        for extra in itertools.product(choices, repeat=max(0, len(ptrs) - 1)):
                            store: dict[Any, Any] = {}
                            for i, a in enumerate(nodes):
                                for j, f in enumerate(ifields):
                                    store[(a, f)] = keys[i * len(ifields) + j]
                                for j, f in enumerate(bfields):
                                    store[(a, f)] = flags[i * len(bfields) + j]
                                for j, f in enumerate(pfields):
                                    nxt = nodes[i + 1] if j == 0 and i + 1 < n else None
                                    store[(a, f)] = nxt
                            store.update(zip(ints, iv))
                            store.update(zip(bools, bv))
                            if ptrs:
                                store[ptrs[0]] = head
                                store.update(zip(ptrs[1:], extra))
                            yield store


def canonical_store(store: dict[Any, Any]) -> tuple:
    """The store with allocated addresses renamed in discovery order.

    Discovery is breadth-first from the variables in name order, following
    fields in name order. Objects allocated by the program that no variable
    reaches are garbage and dropped.
    """

    def fresh(a: Any) -> bool:
        return isinstance(a, T.Addr) and (a.loop or a.n >= L.NEW_BASE)

    fields: dict[Any, list[tuple[str, Any]]] = {}
    for k, v in store.items():
        if isinstance(k, tuple):
            fields.setdefault(k[0], []).append((k[1], v))
    names: dict[Any, str] = {}
    queue = [v for k, v in sorted((k, v) for k, v in store.items() if isinstance(k, str))]
    for a in list(fields):
        if isinstance(a, T.Addr) and not fresh(a):
            queue.append(a)
    seen: set[Any] = set()
    while queue:
        a = queue.pop(0)
        if not isinstance(a, T.Addr) or a in seen:
            continue
        seen.add(a)
        if fresh(a):
            names[a] = f"new{len(names)}"
        for _, v in sorted(fields.get(a, []), key=lambda fv: fv[0]):
            queue.append(v)

    def rn(v: Any) -> Any:
        if fresh(v):
            return names.get(v, "garbage")
        if isinstance(v, T.Addr):
            return f"0x{v.n:x}"
        return v

    out = []
    for k, v in store.items():
        if isinstance(k, tuple):
            if fresh(k[0]) and k[0] not in names:
                continue
            key: Any = (rn(k[0]), k[1])
        else:
            key = k
        out.append((repr(key), repr(rn(v))))
    return tuple(sorted(out))


def concrete_outcome(p: L.Program, store: dict, fuel: int = 10_000) -> Outcome:
    res = L.concrete_run(p, L.ConcreteState(dict(store)), fuel)
    if isinstance(res, L.Halted):
        return Outcome("Halted", None, canonical_store(res.state.store))
    if isinstance(res, L.Failed):
        return Outcome("Failed", res.index)
    if isinstance(res, L.NullDeref):
        return Outcome("NullDeref", res.index)
    return Outcome("OutOfFuel")


def ground_heap(p: L.Program, store: dict) -> Hp.SymbolicHeap:
    """The input store as a definite heap."""
    entries = []
    for k, v in store.items():
        if isinstance(k, tuple):
            loc = T.field(k[0] if k[0] is not None else T.null(), k[1], p.field_sort(k[1]))
        else:
            loc = T.var(k, p.var_sort(k))
        entries.append((loc, value_term(v)))
    return Hp.heap(entries)


def value_term(v: Any) -> T.Term:
    if v is None:
        return T.null()
    if isinstance(v, bool):
        return T.boolean(v)
    if isinstance(v, int):
        return T.num(v)
    return v


def symbolic_outcomes(p: L.Program, report: VerificationReport, store: dict,
                      fuel: int = 5000, max_depth: int = 64) -> list[Outcome]:
    """Every outcome the symbolic result predicts for ``store``.

    A correct result predicts exactly one outcome.
    """
    sub = T.GroundSubstitution(store)
    out = []
    with G.using_bodies(report.bodies, max_depth):
        for e in report.errors:
            if T.evaluate(e.pc, sub):
                out.append(Outcome("Failed" if e.kind == "Fail" else "NullDeref", e.instruction))
        if T.evaluate(report.halt_pc, sub):
            h = G.compose(G.definite(ground_heap(p, store)), report.result)
            red = G.reduce(h, report.bodies, fuel=fuel)
            final = _final_store(red, sub) if isinstance(red, G.Normal) else None
            if final is None:
                out.append(Outcome("Stuck", None, (G.show(red.heap),)))
            else:
                out.append(Outcome("Halted", None, canonical_store(final)))
    return out


def _final_store(red: G.Normal, sub: T.GroundSubstitution) -> dict | None:
    """The ground store denoted by a normal form, or None if it is not ground.

    A merged heap may keep an entry ``k ↦ LI(k)`` for a location written only
    on another branch; when ``k`` is not an input cell that entry is the
    untouched content of ``k`` and is unobservable, so it is skipped.
    """
    if not isinstance(red.heap, G.Definite):
        return None
    final = {}
    for k, v in red.heap.sigma.entries:
        try:
            gk = T.evaluate(k, sub)
        except (T.Demand, T.Undefined):
            return None
        try:
            final[gk] = T.evaluate(v, sub)
        except T.Demand as d:
            c = T.as_cell(v)
            if not (c is not None and c.src is None and d.key == gk):
                return None
        except T.Undefined:
            return None
    return final


def disagreements(p: L.Program, report: VerificationReport, stores: list[dict] | Iterator[dict],
                  fuel: int = 10_000) -> list[tuple[dict, Outcome, list[Outcome]]]:
    bad = []
    for s in stores:
        try:
            c = concrete_outcome(p, s, fuel)
        except L.UninitializedRead:
            continue
        sym = symbolic_outcomes(p, report, s)
        if sym != [c]:
            bad.append((s, c, sym))
    return bad
