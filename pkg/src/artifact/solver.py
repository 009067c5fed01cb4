"""Satisfiability of guards: syntactic fast path, bounded search, SMT-LIB2 text.

The bounded backend searches for a ground witness by demand-driven
enumeration: the guard is evaluated against a partial store, and every
input cell it asks for is branched over a small candidate set. Pointer
cells range over null, the input addresses already in use and one fresh
address, with at most ``scope`` input objects and no cycles, so the
inputs explored are acyclic lists and trees of at most ``scope`` nodes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any

from . import genheap as G
from . import terms as T
from .genheap import BodyTable, Heap
from .lang import NEW_BASE
from .terms import BOT, TOP, Term


@dataclass(frozen=True, slots=True)
class Sat:
    witness: dict


@dataclass(frozen=True, slots=True)
class Unsat:
    pass


@dataclass(frozen=True, slots=True)
class Unknown:
    reason: str


Verdict = Sat | Unsat | Unknown


@dataclass(frozen=True)
class SatQuery:
    guard: Term
    bodies: BodyTable = field(default_factory=BodyTable)
    context: Heap = G.EPSD
    depth: int = 6


def _constants(g: Term, bodies: BodyTable) -> set[int]:
    out = T.int_constants(g)
    for _, body in bodies.items():
        for node in G.walk(body):
            for t in G._terms_of(node):
                out |= T.int_constants(t)
    return out


class _Search:
    def __init__(self, g: Term, bodies: BodyTable, depth: int, scope: int, budget: int):
        self.g = g
        self.bodies = bodies
        self.depth = depth
        self.scope = scope
        self.budget = budget
        self.nodes = 0
        self.incomplete = ""
        base = set(range(-2, 3))
        for c in _constants(g, bodies):
            base |= {c - 1, c, c + 1}
        self.ints = sorted(base)

    def _input_addr(self, a: Any) -> bool:
        return isinstance(a, T.Addr) and not a.loop and a.n < NEW_BASE

    def _reaches(self, store: dict, src: Any, dst: Any) -> bool:
        stack, seen = [src], set()
        while stack:
            a = stack.pop()
            if a is dst:
                return True
            if a in seen:
                continue
            seen.add(a)
            stack.extend(v for k, v in store.items() if isinstance(k, tuple) and k[0] is a and isinstance(v, T.Addr))
        return False

    def candidates(self, store: dict, key: Any, vsort: str) -> list[Any]:
        if isinstance(key, tuple) and not self._input_addr(key[0]):
            # fields of null or of allocated objects are never inputs
            return [T._zero(vsort)]
        if vsort == T.INT:
            return self.ints
        if vsort == T.BOOL:
            return [False, True]
        used = sorted({a.n for k, v in store.items() for a in (v, k[0] if isinstance(k, tuple) else None)
                       if self._input_addr(a)})
        out: list[Any] = [None]
        for n in used:
            a = T.addr(n)
            if isinstance(key, tuple) and self._reaches(store, a, key[0]):
                continue
            out.append(a)
        if len(used) < self.scope:
            out.append(T.addr(next(n for n in range(1, NEW_BASE) if n not in used)))
        return out

    def run(self, store: dict) -> dict | None:
        self.nodes += 1
        if self.nodes > self.budget:
            self.incomplete = f"search budget {self.budget} exhausted"
            return None
        sub = T.GroundSubstitution(store)
        try:
            with G.using_bodies(self.bodies, self.depth):
                ok = T.evaluate(self.g, sub)
        except T.Demand as d:
            for v in self.candidates(store, d.key, d.vsort):
                found = self.run({**store, d.key: v})
                if found is not None:
                    return found
            return None
        except G.DepthExceeded as e:
            self.incomplete = f"recursion depth {self.depth} exceeded at Rec({e})"
            return None
        except T.Undefined:
            return None
        return dict(sub.store) if ok else None


def check(g: Term, bodies: BodyTable | None = None, depth: int = 6, scope: int = 3,
          budget: int = 200_000) -> Verdict:
    """Decide ``g`` over inputs of at most ``scope`` objects."""
    bodies = bodies if bodies is not None else BodyTable()
    if g is TOP:
        return Sat({})
    if g is BOT:
        return Unsat()
    s = _Search(g, bodies, depth, scope, budget)
    w = s.run({})
    if w is not None:
        return Sat(w)
    if s.incomplete:
        return Unknown(s.incomplete)
    return Unsat()


def sat(q: SatQuery) -> Verdict:
    return check(G.refine(q.context, q.guard), q.bodies, q.depth)


def validate(g: Term, witness: dict, bodies: BodyTable | None = None, depth: int = 64) -> bool:
    """Re-evaluate ``g`` under a witness store."""
    try:
        with G.using_bodies(bodies, depth):
            return bool(T.evaluate(g, T.GroundSubstitution(witness)))
    except (T.Demand, T.Undefined, G.DepthExceeded):
        return False


class BoundedOracle:
    """The engine's oracle: ``oracle(guard, bodies) -> Verdict``."""

    def __init__(self, depth: int = 6, scope: int = 3):
        self.depth = depth
        self.scope = scope
        self.queries = 0

    def __call__(self, g: Term, bodies: BodyTable) -> Verdict:
        self.queries += 1
        return check(g, bodies, self.depth, self.scope)


class SmtlibDumpOracle(BoundedOracle):
    """Write every query as an SMT-LIB2 script, deciding it with the bounded search."""

    def __init__(self, directory: str, depth: int = 6, scope: int = 3):
        super().__init__(depth, scope)
        self.directory = directory
        os.makedirs(directory, exist_ok=True)

    def __call__(self, g: Term, bodies: BodyTable) -> Verdict:
        path = os.path.join(self.directory, f"query_{self.queries:04d}.smt2")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(emit_smtlib(SatQuery(g, bodies, depth=self.depth)))
        return super().__call__(g, bodies)


def parse_oracle(text: str) -> BoundedOracle:
    kind, _, arg = text.partition(":")
    if kind == "bounded":
        return BoundedOracle(int(arg) if arg else 6)
    if kind == "smtlib-dump" and arg:
        return SmtlibDumpOracle(arg)
    raise ValueError(f"unknown oracle {text!r}; expected bounded:<depth> or smtlib-dump:<dir>")


# ---------------------------------------------------------------- SMT-LIB2


class _Smt:
    def __init__(self) -> None:
        self.consts: dict[str, str] = {}
        self.funs: dict[str, tuple[str, str]] = {}
        self.addrs: dict[str, None] = {}
        self.opaque: dict[Term, str] = {}

    @staticmethod
    def sort(vsort: str) -> str:
        return {T.INT: "Int", T.BOOL: "Bool", T.PTR: "Loc"}[vsort]

    def num(self, k: int) -> str:
        return str(k) if k >= 0 else f"(- {-k})"

    def addr(self, a: Term) -> str:
        if isinstance(a, T.Null):
            name = "nil"
        else:
            name = f"a_{a.n:x}" + (f"_{a.epoch}" if a.loop else "")
        self.addrs.setdefault(name, None)
        return name

    def cell(self, c: T.Cell) -> str:
        if c.src is not None:
            if c not in self.opaque:
                name = f"k_{len(self.opaque)}"
                self.opaque[c] = name
                self.consts[name] = self.sort(c.sort)
            return self.opaque[c]
        loc = c.loc
        if isinstance(loc, T.Var):
            name = f"v_{loc.name}"
            self.consts[name] = self.sort(loc.vsort)
            return name
        name = f"f_{loc.name}"
        self.funs[name] = ("Loc", self.sort(loc.vsort))
        return f"({name} {self.term(loc.base)})"

    def term(self, t: Term) -> str:
        if isinstance(t, T.Lin):
            parts = []
            for a, k in t.items:
                s = self.term(a)
                parts.append(s if k == 1 else f"(* {self.num(k)} {s})")
            if t.const or not parts:
                parts.insert(0, self.num(t.const))
            return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"
        if isinstance(t, T.Mul):
            return f"(* {self.term(t.left)} {self.term(t.right)})"
        if isinstance(t, T.Cell):
            return self.cell(t)
        if isinstance(t, (T.Null, T.Addr)):
            return self.addr(t)
        if isinstance(t, T.Const):
            return "true" if t.value else "false"
        if isinstance(t, T.EqZ):
            return f"(= {self.term(t.lin)} 0)"
        if isinstance(t, T.LtZ):
            return f"(< {self.term(t.lin)} 0)"
        if isinstance(t, T.EqLoc):
            return f"(= {self.term(t.left)} {self.term(t.right)})"
        if isinstance(t, T.Not):
            return f"(not {self.term(t.arg)})"
        if isinstance(t, (T.And, T.Or)):
            op = "and" if isinstance(t, T.And) else "or"
            return f"({op} {' '.join(self.term(a) for a in t.args)})"
        if isinstance(t, T.Union):
            out = self.term(t.arms[-1][1])
            for g, v in reversed(t.arms[:-1]):
                out = f"(ite {self.term(g)} {self.term(v)} {out})"
            return out
        raise TypeError(f"cannot encode {T.show(t)}")


def emit_smtlib(q: SatQuery, depth: int | None = None) -> str:
    """A QF_UFLIA script that is satisfiable iff the unfolded guard is."""
    depth = q.depth if depth is None else depth
    g = G.refine(q.context, q.guard)
    for _ in range(depth):
        if not G.deferred_cells(g):
            break
        g = G.unfold_cells(g, q.bodies)
    enc = _Smt()
    body = enc.term(g)
    lines = []
    if G.deferred_cells(g):
        lines.append(f"; under-approximation: recursion left folded after {depth} unfoldings")
    lines += ["(set-logic QF_UFLIA)", "(declare-sort Loc 0)"]
    for name in sorted(enc.addrs):
        lines.append(f"(declare-fun {name} () Loc)")
    if len(enc.addrs) > 1:
        lines.append(f"(assert (distinct {' '.join(sorted(enc.addrs))}))")
    for name in sorted(enc.consts):
        lines.append(f"(declare-fun {name} () {enc.consts[name]})")
    for name in sorted(enc.funs):
        a, r = enc.funs[name]
        lines.append(f"(declare-fun {name} ({a}) {r})")
    lines.append(f"(assert {body})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"
