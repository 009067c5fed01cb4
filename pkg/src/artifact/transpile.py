"""Translation of generalized heaps and guards into second-order functions.

Every heap ``H`` reached by the encoding gets a function ``find_H`` taking
the current context and a location. A context is a tuple of first-order
functions, one per value sort when sort splitting is on (the default) and a
single untyped function otherwise. Composition ``A ∘ B`` becomes
``find_B`` applied to the partial application ``find_A ctx``, so contexts
never rise above first order.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Any, Callable

from . import genheap as G
from . import terms as T
from .genheap import BodyTable, Heap
from .heap import EPS
from .terms import Term

# ---------------------------------------------------------------- IR


@dataclass(frozen=True, slots=True)
class Lit:
    value: Any


@dataclass(frozen=True, slots=True)
class VarLoc:
    name: str


@dataclass(frozen=True, slots=True)
class FieldLoc:
    base: Any
    name: str


@dataclass(frozen=True, slots=True)
class Prim:
    op: str
    args: tuple


@dataclass(frozen=True, slots=True)
class Ite:
    cond: Any
    then: Any
    other: Any


@dataclass(frozen=True, slots=True)
class Ub:
    """Undefined behaviour: no union arm holds."""


@dataclass(frozen=True, slots=True)
class Param:
    name: str


@dataclass(frozen=True, slots=True)
class CtxApp:
    ctx: Any
    loc: Any


@dataclass(frozen=True, slots=True)
class Call:
    fn: str
    ctxs: tuple
    loc: Any


@dataclass(frozen=True, slots=True)
class Partial:
    fn: str
    ctxs: tuple


@dataclass(frozen=True, slots=True)
class FuncDef:
    name: str
    ctx_params: tuple[str, ...]
    loc_param: str
    body: Any


@dataclass
class FuncIR:
    defs: dict[str, FuncDef] = field(default_factory=dict)
    main: Any = None
    main_kind: str = "assert"  # "assert": assert(not main); "value": evaluate main
    slots: tuple[str, ...] = ("any",)

    def to_json(self) -> dict:
        return {
            "slots": list(self.slots),
            "main_kind": self.main_kind,
            "main": show_expr(self.main),
            "defs": [
                {"name": d.name, "ctx_params": list(d.ctx_params), "loc_param": d.loc_param,
                 "body": show_expr(d.body)}
                for d in self.defs.values()
            ],
        }


class EncodingError(ValueError):
    pass


# ---------------------------------------------------------------- encoding


class EncodingEnv:
    """Memoized specializations of ``find`` per heap and value sort."""

    def __init__(self, bodies: BodyTable | None = None, sort_split: bool = True,
                 labels: dict[Any, str] | None = None):
        self.bodies = bodies if bodies is not None else BodyTable()
        self.sort_split = sort_split
        self.slots: tuple[str, ...] = (T.INT, T.PTR, T.BOOL) if sort_split else ("any",)
        self.labels = labels or {}
        self.names: dict[Heap, str] = {}
        self.counter = 0
        self.ir = FuncIR(slots=self.slots)
        self.pending: list[tuple[Heap, str]] = []

    def slot(self, vsort: str) -> int:
        return self.slots.index(vsort) if self.sort_split else 0

    def ctx_params(self) -> tuple[str, ...]:
        return tuple(f"ctx_{s}" for s in self.slots) if self.sort_split else ("ctx",)

    # names

    def heap_name(self, h: Heap) -> str:
        got = self.names.get(h)
        if got is not None:
            return got
        if h is G.EPSD:
            got = "eps"
        elif isinstance(h, G.Rec):
            got = "Rec_" + self._rec_label(h.rid)
        elif isinstance(h, G.Compose):
            got = f"{self.heap_name(h.left)}_{self.heap_name(h.right)}"
        else:
            self.counter += 1
            got = {G.Definite: "h", G.Merge: "m", G.Write: "w"}[type(h)] + str(self.counter)
        self.names[h] = got
        return got

    def _rec_label(self, rid: G.RecId) -> str:
        base = self.labels.get(rid.vertex, str(rid.vertex))
        if not rid.visited or rid.visited == frozenset({rid.vertex}):
            return base
        return base + "_" + "_".join(self.labels.get(v, str(v)) for v in sorted(rid.visited))

    def fn_name(self, h: Heap, vsort: str) -> str:
        name = "find_" + self.heap_name(h)
        if self.sort_split:
            name += "_" + vsort
        if name not in self.ir.defs and all(n != name for _, n in self.pending):
            self.pending.append((h, vsort))
            self.ir.defs[name] = FuncDef(name, self.ctx_params(), "x", None)
        return name

    def contexts_for(self, h: Heap, ctxs: tuple) -> tuple:
        """The context after running ``h``: partial applications of its finds."""
        if h is G.EPSD:
            return ctxs
        return tuple(Partial(self.fn_name(h, s), ctxs) for s in self.slots)

    def call(self, h: Heap, vsort: str, ctxs: tuple, loc: Any) -> Any:
        return Call(self.fn_name(h, vsort), ctxs, loc)

    # terms

    def term(self, t: Term, ctxs: tuple) -> Any:
        """``⟦t⟧`` under the contexts ``ctxs``."""
        if isinstance(t, T.Lin):
            return _lin(t, [(self.term(a, ctxs), k) for a, k in t.items])
        if isinstance(t, T.Mul):
            return Prim("*", (self.term(t.left, ctxs), self.term(t.right, ctxs)))
        if isinstance(t, T.Null):
            return Lit(None)
        if isinstance(t, T.Addr):
            return Lit(t)
        if isinstance(t, T.Const):
            return Lit(t.value)
        if isinstance(t, T.Var):
            return VarLoc(t.name)
        if isinstance(t, T.Field):
            return FieldLoc(self.term(t.base, ctxs), t.name)
        if isinstance(t, T.Cell):
            loc = self.term(t.loc, ctxs)
            if t.src is None:
                return CtxApp(ctxs[self.slot(t.sort)], loc)
            return self.call(G.lift(t.src), t.sort, ctxs, loc)
        if isinstance(t, T.EqZ):
            return _rel("=", t.lin, [(self.term(a, ctxs), k) for a, k in t.lin.items])
        if isinstance(t, T.LtZ):
            return _rel("<", t.lin, [(self.term(a, ctxs), k) for a, k in t.lin.items])
        if isinstance(t, T.EqLoc):
            return Prim("=", (self.term(t.left, ctxs), self.term(t.right, ctxs)))
        if isinstance(t, T.Not):
            return Prim("not", (self.term(t.arg, ctxs),))
        if isinstance(t, (T.And, T.Or)):
            return Prim("and" if isinstance(t, T.And) else "or", tuple(self.term(a, ctxs) for a in t.args))
        if isinstance(t, T.Union):
            out: Any = Ub()
            for g, v in reversed(t.arms):
                out = Ite(self.term(g, ctxs), self.term(v, ctxs), out)
            return out
        raise EncodingError(f"cannot encode {T.show(t)}")

    # find bodies

    def find_body(self, h: Heap, vsort: str, ctxs: tuple, x: Any) -> Any:
        if isinstance(h, G.Rec):
            if h.rid not in self.bodies:
                raise EncodingError(f"no body for Rec({h.rid})")
            return self.find_body(self.bodies[h.rid], vsort, ctxs, x)
        if isinstance(h, G.Definite):
            out = CtxApp(ctxs[self.slot(vsort)], x)
            for k, v in reversed(h.sigma.entries):
                if self.sort_split and T.value_sort(k) != vsort:
                    continue
                out = Ite(Prim("=", (x, self.term(k, ctxs))), self.term(v, ctxs), out)
            return out
        if isinstance(h, G.Compose):
            return self.call(h.right, vsort, self.contexts_for(h.left, ctxs), x)
        if isinstance(h, G.Merge):
            out = Ub()
            for g, hh in reversed(h.arms):
                out = Ite(self.term(g, ctxs), self.call(hh, vsort, ctxs, x), out)
            return out
        if isinstance(h, G.Write):
            if self.sort_split and T.value_sort(h.loc) != vsort:
                return self.call(h.inner, vsort, ctxs, x)
            return Ite(Prim("=", (x, self.term(h.loc, ctxs))), self.term(h.value, ctxs),
                       self.call(h.inner, vsort, ctxs, x))
        raise EncodingError(f"cannot encode heap {G.show(h)}")

    def finish(self) -> FuncIR:
        while self.pending:
            h, vsort = self.pending.pop(0)
            name = "find_" + self.heap_name(h) + (f"_{vsort}" if self.sort_split else "")
            params = self.ctx_params()
            ctxs = tuple(Param(p) for p in params)
            body = self.find_body(h, vsort, ctxs, Param("x"))
            self.ir.defs[name] = FuncDef(name, params, "x", body)
        return self.ir

    def top_contexts(self) -> tuple:
        return tuple(Param("τ0" if not self.sort_split else f"τ0_{s}") for s in self.slots)


def _lin(t: T.Lin, items: list[tuple[Any, int]]) -> Any:
    out: Any = None
    for a, k in items:
        term = a if k == 1 else Prim("*", (a, Lit(k))) if k > 0 else Prim("neg", (a,)) if k == -1 \
            else Prim("*", (a, Lit(k)))
        out = term if out is None else Prim("+", (out, term))
    if out is None:
        return Lit(t.const)
    if t.const:
        out = Prim("+", (out, Lit(t.const))) if t.const > 0 else Prim("-", (out, Lit(-t.const)))
    return out


def _rel(op: str, lin: T.Lin, items: list[tuple[Any, int]]) -> Any:
    """``lin op 0`` as ``positive side op negative side``."""
    pos = [(a, k) for a, k in items if k > 0]
    neg = [(a, -k) for a, k in items if k < 0]
    c = lin.const
    left = _lin(T.Lin(0, 0, ()), pos) if pos else None
    right = _lin(T.Lin(0, 0, ()), neg) if neg else None
    if c > 0:
        left = Prim("+", (left, Lit(c))) if left is not None else Lit(c)
    elif c < 0:
        right = Prim("+", (right, Lit(-c))) if right is not None else Lit(-c)
    return Prim(op, (left if left is not None else Lit(0), right if right is not None else Lit(0)))


def encode_guard(g: Term, env: EncodingEnv) -> FuncIR:
    """``assert(not ⟦g⟧τ0)``: the program fails exactly when ``g`` is satisfiable."""
    env.ir.main = env.term(g, env.top_contexts())
    env.ir.main_kind = "assert"
    return env.finish()


def encode_find(h: Heap, x: Term, env: EncodingEnv) -> FuncIR:
    """A program whose main computes the value at ``x`` after ``h``."""
    ctxs = env.top_contexts()
    env.ir.main = env.call(G.lift(h), T.value_sort(x), ctxs, env.term(x, ctxs))
    env.ir.main_kind = "value"
    return env.finish()


# ---------------------------------------------------------------- static checks


def order_violations(p: FuncIR) -> list[str]:
    """Places where a context position receives something not first-order."""
    out: list[str] = []

    def ctx_ok(c: Any, where: str) -> None:
        if isinstance(c, Param):
            return
        if isinstance(c, Partial):
            if c.fn not in p.defs:
                out.append(f"{where}: partial application of undefined {c.fn}")
            for a in c.ctxs:
                ctx_ok(a, where)
            return
        out.append(f"{where}: non-function {show_expr(c)} in context position")

    def val(e: Any, where: str, ctx_names: set[str]) -> None:
        if isinstance(e, (Partial,)):
            out.append(f"{where}: function value {show_expr(e)} where a location or value is expected")
        elif isinstance(e, Param) and e.name in ctx_names:
            out.append(f"{where}: context {e.name} where a location or value is expected")
        elif isinstance(e, Call):
            if e.fn not in p.defs:
                out.append(f"{where}: call of undefined {e.fn}")
            for c in e.ctxs:
                ctx_ok(c, where)
            val(e.loc, where, ctx_names)
        elif isinstance(e, CtxApp):
            ctx_ok(e.ctx, where)
            val(e.loc, where, ctx_names)
        elif isinstance(e, Prim):
            for a in e.args:
                val(a, where, ctx_names)
        elif isinstance(e, Ite):
            for a in (e.cond, e.then, e.other):
                val(a, where, ctx_names)
        elif isinstance(e, FieldLoc):
            val(e.base, where, ctx_names)

    val(p.main, "main", set())
    for d in p.defs.values():
        val(d.body, d.name, set(d.ctx_params))
    return out


def call_graph(p: FuncIR) -> dict[str, set[str]]:
    graph: dict[str, set[str]] = {}
    for d in p.defs.values():
        acc: set[str] = set()
        _callees(d.body, acc)
        graph[d.name] = acc
    return graph


def _callees(e: Any, acc: set[str]) -> None:
    if isinstance(e, (Call, Partial)):
        acc.add(e.fn)
    for c in _children(e):
        _callees(c, acc)


def _children(e: Any) -> tuple:
    if isinstance(e, Call):
        return (*e.ctxs, e.loc)
    if isinstance(e, Partial):
        return e.ctxs
    if isinstance(e, CtxApp):
        return (e.ctx, e.loc)
    if isinstance(e, Prim):
        return e.args
    if isinstance(e, Ite):
        return (e.cond, e.then, e.other)
    if isinstance(e, FieldLoc):
        return (e.base,)
    return ()


def tail_violations(p: FuncIR) -> list[str]:
    """Recursive calls (within one strongly connected component) not in tail position."""
    graph = call_graph(p)

    def reach(a: str) -> set[str]:
        seen, stack = set(), [a]
        while stack:
            x = stack.pop()
            for y in graph.get(x, ()):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return seen

    closure = {n: reach(n) for n in graph}
    out: list[str] = []
    for d in p.defs.values():
        scc = {n for n in closure[d.name] if d.name in closure.get(n, set())}

        def walk(e: Any, tail: bool) -> None:
            if isinstance(e, Call):
                if e.fn in scc and not tail:
                    out.append(f"{d.name}: non-tail call of {e.fn}")
                for c in (*e.ctxs, e.loc):
                    walk(c, False)
            elif isinstance(e, Partial):
                for c in e.ctxs:
                    walk(c, False)
            elif isinstance(e, Ite):
                walk(e.cond, False)
                walk(e.then, tail)
                walk(e.other, tail)
            else:
                for c in _children(e):
                    walk(c, False)

        walk(d.body, True)
    return out


# ---------------------------------------------------------------- interpreter


@dataclass(frozen=True, slots=True)
class SafePass:
    value: Any = None


@dataclass(frozen=True, slots=True)
class AssertFailed:
    pass


@dataclass(frozen=True, slots=True)
class OutOfFuel:
    calls: int


class UndefinedBehaviour(RuntimeError):
    pass


class _Fuel(Exception):
    pass


def fir_interpret(p: FuncIR, inputs: dict | Callable[[Any], Any] | T.GroundSubstitution,
                  fuel: int = 100_000) -> SafePass | AssertFailed | OutOfFuel:
    """Call-by-value evaluation; ``inputs`` answers the top-level context.

    A query the inputs cannot answer, or a union with no true arm, is
    undefined behaviour and raises :class:`UndefinedBehaviour`.
    """
    def tau0_for(slot: str) -> Callable[[Any], Any]:
        vsort = slot if slot in (T.INT, T.PTR, T.BOOL) else None
        if isinstance(inputs, T.GroundSubstitution):
            sub = inputs

            def tau0(loc: Any) -> Any:
                if vsort is None and loc in sub.store:
                    return sub.store[loc]
                try:
                    return sub.base(loc, vsort or T.INT)
                except T.Demand:
                    raise UndefinedBehaviour(f"input {loc!r} is not defined") from None
            return tau0
        if isinstance(inputs, dict):
            table = inputs

            def tau0(loc: Any) -> Any:
                if loc not in table:
                    raise UndefinedBehaviour(f"input {loc!r} is not defined")
                return table[loc]
            return tau0
        return inputs

    top = {f"τ0_{s}" if p.slots != ("any",) else "τ0": tau0_for(s) for s in p.slots}

    budget = [fuel]

    def apply(fn: str, ctxs: tuple, loc: Any) -> Any:
        while True:
            budget[0] -= 1
            if budget[0] < 0:
                raise _Fuel()
            d = p.defs.get(fn)
            if d is None or d.body is None:
                raise UndefinedBehaviour(f"call of undefined function {fn}")
            env = dict(zip(d.ctx_params, ctxs))
            env[d.loc_param] = loc
            # tail calls loop here instead of growing the Python stack
            e = d.body
            while isinstance(e, Ite):
                e = e.then if ev(e.cond, env) else e.other
            if isinstance(e, Call):
                fn, ctxs, loc = e.fn, tuple(ev(c, env) for c in e.ctxs), ev(e.loc, env)
                continue
            return ev(e, env)

    def ev(e: Any, env: dict) -> Any:
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, Param):
            if e.name not in env:
                if e.name in top:
                    return top[e.name]
                raise UndefinedBehaviour(f"unbound {e.name}")
            return env[e.name]
        if isinstance(e, VarLoc):
            return e.name
        if isinstance(e, FieldLoc):
            return (ev(e.base, env), e.name)
        if isinstance(e, CtxApp):
            f = ev(e.ctx, env)
            if not callable(f):
                raise UndefinedBehaviour("application of a non-function")
            return f(ev(e.loc, env))
        if isinstance(e, Call):
            return apply(e.fn, tuple(ev(c, env) for c in e.ctxs), ev(e.loc, env))
        if isinstance(e, Partial):
            ctxs = tuple(ev(c, env) for c in e.ctxs)
            fn = e.fn
            return lambda loc: apply(fn, ctxs, loc)
        if isinstance(e, Ite):
            return ev(e.then, env) if ev(e.cond, env) else ev(e.other, env)
        if isinstance(e, Ub):
            raise UndefinedBehaviour("no arm of a union holds")
        if isinstance(e, Prim):
            op = e.op
            if op == "and":
                return all(ev(a, env) for a in e.args)
            if op == "or":
                return any(ev(a, env) for a in e.args)
            vals = [ev(a, env) for a in e.args]
            if op == "not":
                return not vals[0]
            if op == "neg":
                return -vals[0]
            if op == "=":
                a, b = vals
                return a is b if (a is None or isinstance(a, T.Addr) or b is None) else a == b
            return {"+": lambda: vals[0] + vals[1], "-": lambda: vals[0] - vals[1],
                    "*": lambda: vals[0] * vals[1], "<": lambda: vals[0] < vals[1]}[op]()
        raise TypeError(e)

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 50_000))
    try:
        v = ev(p.main, {})
    except (_Fuel, RecursionError):
        return OutOfFuel(fuel)
    finally:
        sys.setrecursionlimit(limit)
    if p.main_kind == "value":
        return SafePass(v)
    return AssertFailed() if v else SafePass()


def fir_value(p: FuncIR, inputs: Any, fuel: int = 100_000) -> Any:
    res = fir_interpret(p, inputs, fuel)
    if not isinstance(res, SafePass):
        raise UndefinedBehaviour(f"evaluation ended with {res}")
    return res.value


# ---------------------------------------------------------------- printing


def show_expr(e: Any, top: bool = True) -> str:
    s = _show(e)
    return s


def _atom(e: Any) -> str:
    s = _show(e)
    if isinstance(e, (Lit, Param, VarLoc, FieldLoc)) or (isinstance(e, Prim) and e.op in ("not",)):
        return s
    return f"({s})"


def _show_lit(v: Any) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, T.Addr):
        return T.show_addr(v)
    return str(v)


def _show(e: Any) -> str:
    if e is None:
        return "()"
    if isinstance(e, Lit):
        return _show_lit(e.value)
    if isinstance(e, Param):
        return e.name
    if isinstance(e, VarLoc):
        return e.name
    if isinstance(e, FieldLoc):
        return f"({_show(e.base)}, {e.name})"
    if isinstance(e, CtxApp):
        return f"{_atom(e.ctx)} {_atom(e.loc)}"
    if isinstance(e, Call):
        return " ".join([e.fn, *(_atom(c) for c in e.ctxs), _atom(e.loc)])
    if isinstance(e, Partial):
        return " ".join([e.fn, *(_atom(c) for c in e.ctxs)])
    if isinstance(e, Ite):
        return f"if {_show(e.cond)} then {_show(e.then)} else {_show(e.other)}"
    if isinstance(e, Ub):
        return "ub"
    if isinstance(e, Prim):
        if e.op == "not":
            return f"not({_show(e.args[0])})"
        if e.op == "neg":
            return f"-{_atom(e.args[0])}"
        if e.op in ("and", "or"):
            return f" {'&&' if e.op == 'and' else '||'} ".join(_atom(a) for a in e.args)
        sym = {"=": "==", "<": "<", "+": "+", "-": "-", "*": "*"}[e.op]
        return f"{_atom(e.args[0])} {sym} {_atom(e.args[1])}"
    raise TypeError(e)


def _show_body(e: Any, indent: str) -> list[str]:
    if isinstance(e, Ite):
        out = [f"{indent}if {_show(e.cond)}", f"{indent}then {_show(e.then) if not isinstance(e.then, Ite) else ''}".rstrip()]
        if isinstance(e.then, Ite):
            out += _show_body(e.then, indent + "  ")
        if isinstance(e.other, Ite):
            out.append(f"{indent}else")
            out += _show_body(e.other, indent + "  ")
        else:
            out.append(f"{indent}else {_show(e.other)}")
        return out
    return [indent + _show(e)]


def pretty_print(p: FuncIR) -> str:
    """Readable functional source: main first, then definitions in creation order."""
    lines = ["-- generated by artifact transpile", "-- contexts: " + ", ".join(p.slots)]
    if p.main is not None:
        if p.main_kind == "assert":
            lines.append(f"main = assert(not({_show(p.main)}))")
        else:
            lines.append(f"main = {_show(p.main)}")
    for d in p.defs.values():
        head = " ".join([d.name, *d.ctx_params, d.loc_param]) + " ="
        body = d.body
        if not isinstance(body, Ite):
            lines.append(f"{head} {_show(body)}")
        else:
            lines.append(head)
            lines += _show_body(body, "  ")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- partial evaluation


def inline_eps(p: FuncIR) -> FuncIR:
    """Inline every function whose body only forwards ``x`` to one context.

    ``find_eps`` and the finds of heaps with no entries of a sort are such
    functions; a call becomes a direct context application and a partial
    application becomes the forwarded context itself.
    """
    forward: dict[str, int] = {}
    for d in p.defs.values():
        b = d.body
        if (isinstance(b, CtxApp) and isinstance(b.ctx, Param) and b.ctx.name in d.ctx_params
                and isinstance(b.loc, Param) and b.loc.name == d.loc_param):
            forward[d.name] = d.ctx_params.index(b.ctx.name)

    def go(e: Any) -> Any:
        if isinstance(e, Call):
            ctxs = tuple(go(c) for c in e.ctxs)
            if e.fn in forward:
                return CtxApp(ctxs[forward[e.fn]], go(e.loc))
            return Call(e.fn, ctxs, go(e.loc))
        if isinstance(e, Partial):
            ctxs = tuple(go(c) for c in e.ctxs)
            if e.fn in forward:
                return ctxs[forward[e.fn]]
            return Partial(e.fn, ctxs)
        if isinstance(e, CtxApp):
            return CtxApp(go(e.ctx), go(e.loc))
        if isinstance(e, Prim):
            return Prim(e.op, tuple(go(a) for a in e.args))
        if isinstance(e, Ite):
            return Ite(go(e.cond), go(e.then), go(e.other))
        if isinstance(e, FieldLoc):
            return FieldLoc(go(e.base), e.name)
        return e

    out = FuncIR(slots=p.slots, main=go(p.main), main_kind=p.main_kind)
    bodies = {n: FuncDef(n, d.ctx_params, d.loc_param, go(d.body)) for n, d in p.defs.items() if n not in forward}
    # keep only what main still reaches
    live: set[str] = set()
    stack: list[str] = []
    acc: set[str] = set()
    _callees(out.main, acc)
    stack.extend(acc)
    while stack:
        n = stack.pop()
        if n in live or n not in bodies:
            continue
        live.add(n)
        acc = set()
        _callees(bodies[n].body, acc)
        stack.extend(acc)
    out.defs = {n: d for n, d in bodies.items() if n in live}
    return out
