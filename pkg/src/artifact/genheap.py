"""Generalized heaps: composition, merge, write and recursion symbols.

Nodes are interned like terms. ``compose``/``merge``/``write`` are smart
constructors that fold definite parts eagerly; the ``mk_*`` functions build
nodes verbatim and are what the reduction engine uses, so that every step
it reports corresponds to exactly one rewrite rule.
"""

from __future__ import annotations

import itertools
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

from . import heap as Hp
from . import terms as T
from .heap import EPS, SymbolicHeap
from .terms import BOT, TOP, Term

_nodes: dict[tuple, Any] = {}
_uids = itertools.count()


def _intern(cls: type, *fields: Any) -> Any:
    key = (cls, fields)
    got = _nodes.get(key)
    if got is None:
        got = cls(next(_uids), *fields)
        _nodes[key] = got
    return got


@dataclass(frozen=True, slots=True)
class RecId:
    """Identifier of a recursion symbol: a vertex plus the visited set."""

    vertex: Any
    visited: frozenset = frozenset()

    def __str__(self) -> str:
        if not self.visited:
            return str(self.vertex)
        return f"{self.vertex}, {{{', '.join(map(str, sorted(self.visited)))}}}"


class Heap:
    __slots__ = ()
    uid: int

    def __repr__(self) -> str:
        return show(self)


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Definite(Heap):
    uid: int
    sigma: SymbolicHeap


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Compose(Heap):
    uid: int
    left: Heap
    right: Heap


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Merge(Heap):
    uid: int
    arms: tuple[tuple[Term, Heap], ...]


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Write(Heap):
    uid: int
    inner: Heap
    loc: Term
    value: Term


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Rec(Heap):
    uid: int
    rid: RecId


def definite(sigma: SymbolicHeap) -> Definite:
    return _intern(Definite, sigma)


EPSD: Definite = definite(EPS)


def mk_compose(a: Heap, b: Heap) -> Compose:
    return _intern(Compose, a, b)


def mk_merge(arms: list[tuple[Term, Heap]] | tuple) -> Merge:
    return _intern(Merge, tuple(arms))


def mk_write(h: Heap, loc: Term, value: Term) -> Write:
    return _intern(Write, h, loc, value)


def rec(rid: RecId | Any) -> Rec:
    if not isinstance(rid, RecId):
        rid = RecId(rid)
    return _intern(Rec, rid)


def lift(h: Heap | SymbolicHeap) -> Heap:
    return definite(h) if isinstance(h, SymbolicHeap) else h


def compose(a: Heap, b: Heap) -> Heap:
    a, b = lift(a), lift(b)
    if a is EPSD:
        return b
    if b is EPSD:
        return a
    if isinstance(b, Compose):
        return compose(compose(a, b.left), b.right)
    if isinstance(b, Definite):
        if isinstance(a, Definite):
            return definite(Hp.compose(a.sigma, b.sigma))
        if isinstance(a, Compose) and isinstance(a.right, Definite):
            return compose(a.left, definite(Hp.compose(a.right.sigma, b.sigma)))
    return mk_compose(a, b)


def merge(arms: list[tuple[Term, Heap]]) -> Heap:
    flat: list[tuple[Term, Heap]] = []
    for g, h in arms:
        h = lift(h)
        if isinstance(h, Merge):
            for g2, h2 in h.arms:
                flat.append((T.and_(g, g2), h2))
        else:
            flat.append((g, h))
    flat = [(g, h) for g, h in flat if g is not BOT]
    if not flat:
        return EPSD
    for g, h in flat:
        if g is TOP:
            return h
    if all(isinstance(h, Definite) for _, h in flat):
        return definite(Hp.merge([(g, h.sigma) for g, h in flat]))
    return mk_merge(flat)


def write(h: Heap, loc: Term, value: Term) -> Heap:
    h = lift(h)
    if isinstance(h, Definite):
        return definite(Hp.write(h.sigma, loc, value))
    return mk_write(h, loc, value)


# ---------------------------------------------------------------- bodies


@dataclass
class BodyTable:
    """Bodies of recursion symbols plus construction counters."""

    bodies: dict[RecId, Heap] = field(default_factory=dict)
    constructions: Counter = field(default_factory=Counter)

    def define(self, rid: RecId, body: Heap) -> None:
        self.constructions[rid] += 1
        self.bodies[rid] = lift(body)

    def __contains__(self, rid: RecId) -> bool:
        return rid in self.bodies

    def __getitem__(self, rid: RecId) -> Heap:
        try:
            return self.bodies[rid]
        except KeyError:
            raise KeyError(f"no body for Rec({rid})") from None

    def items(self) -> list[tuple[RecId, Heap]]:
        return list(self.bodies.items())


# ---------------------------------------------------------------- find and refinement


def max_epochs(h: Heap) -> dict[int, int]:
    out: dict[int, int] = {}
    for node in walk(h):
        if isinstance(node, Definite):
            for n, e in Hp.max_epochs(node.sigma).items():
                out[n] = max(out.get(n, -1), e)
    return out


def walk(h: Heap) -> Iterator[Heap]:
    stack = [h]
    seen: set[Heap] = set()
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        yield x
        if isinstance(x, Compose):
            stack.extend((x.right, x.left))
        elif isinstance(x, Merge):
            stack.extend(hh for _, hh in reversed(x.arms))
        elif isinstance(x, Write):
            stack.append(x.inner)


_find_cache: dict[tuple, Term] = {}


def find(h: Heap, x: Term, tau: Heap = EPSD) -> Term:
    """Value of location ``x`` after running ``tau`` then ``h``.

    ``x`` is expressed over the input of ``tau``. A recursion symbol that
    cannot be looked through yields a deferred cell ``LI(tau ∘ Rec, x)``.
    """
    h, tau = lift(h), lift(tau)
    if isinstance(x, T.Union):
        return T.union([(g, find(h, l, tau)) for g, l in x.arms], T.value_sort(x))
    key = (h, x, tau)
    got = _find_cache.get(key)
    if got is not None:
        return got
    if isinstance(h, Definite):
        if tau is EPSD:
            got = Hp.read(h.sigma, x)
        elif isinstance(tau, Definite):
            got = Hp.find(h.sigma, x, tau.sigma, Hp.read(tau.sigma, x))
        else:
            d = find(tau, x, EPSD)
            got = Hp.find_with(h.sigma, x, lambda e: refine(tau, e), d)
    elif isinstance(h, Compose):
        got = find(h.right, x, compose(tau, h.left))
    elif isinstance(h, Merge):
        got = T.union([(refine(tau, g), find(hh, x, tau)) for g, hh in h.arms], T.value_sort(x))
    elif isinstance(h, Write):
        got = T.ite(T.eq(x, refine(tau, h.loc)), refine(tau, h.value), find(h.inner, x, tau))
    elif isinstance(h, Rec):
        got = T.cell(compose(tau, h), x)
    else:
        raise TypeError(h)
    _find_cache[key] = got
    return got


def read(h: Heap, x: Term) -> Term:
    return find(h, x, EPSD)


_refine_cache: dict[tuple[Heap, Term], Term] = {}


def refine(tau: Heap, e: Term) -> Term:
    """``tau • e`` for a generalized context ``tau``."""
    tau = lift(tau)
    if isinstance(tau, Definite):
        return Hp.refine(tau.sigma, e)
    key = (tau, e)
    got = _refine_cache.get(key)
    if got is not None:
        return got
    epochs = max_epochs(tau)
    on_addr = (lambda a: Hp.shift_addr(epochs, a)) if epochs else None
    got = T.transform(e, lambda src, loc: find(src if src is not None else EPSD, loc, tau), on_addr)
    _refine_cache[key] = got
    return got


def _deferred(sigma: SymbolicHeap, src: Any, loc: Term) -> Term:
    return find(src, loc, definite(sigma))


Hp.register_deferred_refiner(_deferred)


def deferred_cells(t: Term) -> list[T.Cell]:
    return [c for c in T.cells_of(t) if c.src is not None]


def unfold_cells(t: Term, bodies: BodyTable) -> Term:
    """Replace each deferred ``LI(C ∘ Rec(id), x)`` by ``find(Body(id), x, C)``."""

    def on_cell(src: Any, loc: Term) -> Term:
        if src is None:
            return T.cell(None, loc)
        ctx, r = _split_rec(src)
        return find(bodies[r.rid], loc, ctx)

    return T.transform(t, on_cell)


def _split_rec(src: Heap) -> tuple[Heap, Rec]:
    if isinstance(src, Rec):
        return EPSD, src
    if isinstance(src, Compose) and isinstance(src.right, Rec):
        return src.left, src.right
    raise ValueError(f"deferred source of unexpected shape: {show(src)}")


# ---------------------------------------------------------------- reduction


Oracle = Callable[[Term], "bool | None"]


def syntactic_oracle(g: Term) -> bool | None:
    """True when surely satisfiable, False when surely not, else None."""
    if g is BOT:
        return False
    if g is TOP:
        return True
    return None


@dataclass(frozen=True, slots=True)
class Reduced:
    heap: Heap
    rule: str


@dataclass(frozen=True, slots=True)
class Normal:
    heap: Heap
    steps: int
    trace: tuple[dict, ...] = ()


@dataclass(frozen=True, slots=True)
class Fuel:
    heap: Heap
    steps: int
    trace: tuple[dict, ...] = ()


def _terms_of(h: Heap) -> list[Term]:
    if isinstance(h, Definite):
        return [t for kv in h.sigma.entries for t in kv]
    if isinstance(h, Merge):
        return [g for g, _ in h.arms]
    if isinstance(h, Write):
        return [h.loc, h.value]
    return []


def _map_terms(h: Heap, fn: Callable[[Term], Term]) -> Heap:
    if isinstance(h, Definite):
        return definite(Hp.heap([(fn(k), fn(v)) for k, v in h.sigma.entries]))
    if isinstance(h, Merge):
        return mk_merge([(fn(g), hh) for g, hh in h.arms])
    if isinstance(h, Write):
        return mk_write(h.inner, fn(h.loc), fn(h.value))
    return h


def _local(h: Heap, bodies: BodyTable, sat: Oracle, phase: int) -> Iterator[Reduced]:
    """Rules whose redex is the root of ``h``."""
    if phase == 0:
        if isinstance(h, Compose):
            a, b = h.left, h.right
            if a is EPSD:
                yield Reduced(b, "eps-left")
            if b is EPSD:
                yield Reduced(a, "eps-right")
            if isinstance(b, Compose):
                yield Reduced(mk_compose(mk_compose(a, b.left), b.right), "assoc")
            if isinstance(b, Merge):
                yield Reduced(mk_merge([(refine(a, g), mk_compose(a, hh)) for g, hh in b.arms]), "compose-merge")
            if isinstance(a, Merge):
                yield Reduced(mk_merge([(g, mk_compose(hh, b)) for g, hh in a.arms]), "merge-compose")
            if isinstance(b, Write):
                yield Reduced(mk_write(mk_compose(a, b.inner), refine(a, b.loc), refine(a, b.value)), "compose-write")
            if isinstance(a, Definite) and isinstance(b, Definite):
                yield Reduced(definite(Hp.compose(a.sigma, b.sigma)), "definite-compose")
        elif isinstance(h, Write):
            if isinstance(h.inner, Merge):
                yield Reduced(mk_merge([(g, mk_write(hh, h.loc, h.value)) for g, hh in h.inner.arms]), "write-merge")
            if isinstance(h.inner, Definite):
                yield Reduced(definite(Hp.write(h.inner.sigma, h.loc, h.value)), "definite-write")
        elif isinstance(h, Merge):
            if all(isinstance(hh, Definite) for _, hh in h.arms) and h.arms:
                yield Reduced(definite(Hp.merge([(g, hh.sigma) for g, hh in h.arms])), "definite-merge")
    elif phase == 1:
        if any(deferred_cells(t) for t in _terms_of(h)):
            yield Reduced(_map_terms(h, lambda t: unfold_cells(t, bodies)), "unfold-cell")
    elif phase == 2:
        if isinstance(h, Rec):
            yield Reduced(bodies[h.rid], "unfold")


def _prune(h: Merge, sat: Oracle) -> Iterator[Reduced]:
    for i, (g, hh) in enumerate(h.arms):
        if sat(g) is False:
            yield Reduced(mk_merge(h.arms[:i] + h.arms[i + 1 :]), "drop-arm")
    if len(h.arms) == 1 and sat(T.not_(h.arms[0][0])) is False:
        yield Reduced(h.arms[0][1], "collapse")
    if not h.arms:
        yield Reduced(EPSD, "empty-merge")


def _children(h: Heap) -> list[tuple[Heap, Callable[[Heap], Heap]]]:
    if isinstance(h, Compose):
        return [(h.left, lambda c: mk_compose(c, h.right)), (h.right, lambda c: mk_compose(h.left, c))]
    if isinstance(h, Merge):
        out = []
        for i, (g, hh) in enumerate(h.arms):
            out.append((hh, lambda c, i=i, g=g: mk_merge(h.arms[:i] + ((g, c),) + h.arms[i + 1 :])))
        return out
    if isinstance(h, Write):
        return [(h.inner, lambda c: mk_write(c, h.loc, h.value))]
    return []


def redexes(h: Heap, bodies: BodyTable, sat: Oracle, phase: int) -> Iterator[Reduced]:
    """All one-step reducts in leftmost-innermost order, merges pruned first."""
    if isinstance(h, Merge) and phase == 0:
        yield from _prune(h, sat)
    for child, rebuild in _children(h):
        for r in redexes(child, bodies, sat, phase):
            yield Reduced(rebuild(r.heap), r.rule)
    yield from _local(h, bodies, sat, phase)


def reduce_step(h: Heap, bodies: BodyTable, sat: Oracle = syntactic_oracle,
                rng: random.Random | None = None) -> Reduced | None:
    """One rule application; structural rules first, then cells, then Rec.

    With ``rng`` the redex is chosen at random among those of the lowest
    applicable phase, which is how alternative strategies are explored.
    """
    h = lift(h)
    for phase in (0, 1, 2):
        if rng is None:
            for r in redexes(h, bodies, sat, phase):
                return r
        else:
            found = list(redexes(h, bodies, sat, phase))
            if found:
                return rng.choice(found)
    return None


def reduce(h: Heap, bodies: BodyTable, sat: Oracle = syntactic_oracle, fuel: int = 1000,
           rng: random.Random | None = None, trace: bool = False) -> Normal | Fuel:
    h = lift(h)
    log: list[dict] = []
    for steps in range(fuel + 1):
        r = reduce_step(h, bodies, sat, rng)
        if r is None:
            return Normal(h, steps, tuple(log))
        if steps == fuel:
            break
        if trace:
            log.append({"rule": r.rule, "before": h.uid, "after": r.heap.uid})
        h = r.heap
    return Fuel(h, fuel, tuple(log))


def is_ground_term(t: Term) -> bool:
    return not T.cells_of(t)


def is_ground(h: Heap) -> bool:
    return isinstance(h, Definite) and all(is_ground_term(t) for kv in h.sigma.entries for t in kv)


# ---------------------------------------------------------------- ground runner


class DepthExceeded(Exception):
    pass


class GroundState:
    """A ground store reached by running heaps from a base substitution."""

    def __init__(self, base: T.GroundSubstitution, bodies: BodyTable | None, max_depth: int,
                 overlay: dict | None = None, epochs: dict[int, int] | None = None, depth: int = 0):
        self.base = base
        self.bodies = bodies
        self.max_depth = max_depth
        self.overlay = overlay or {}
        self.epochs = epochs or {}
        self.depth = depth

    def lookup(self, key: Any, vsort: str) -> Any:
        if key in self.overlay:
            v = self.overlay[key]
            if v is T.Undefined:
                raise T.Undefined(str(key))
            return v
        return self.base.base(key, vsort)

    def read(self, src: Any, key: Any, vsort: str) -> Any:
        if src is None:
            return self.lookup(key, vsort)
        return run(src, self).lookup(key, vsort)

    def addr(self, a: T.Addr) -> T.Addr:
        if not a.loop:
            return a
        return T.addr(a.n, a.epoch + self.epochs.get(a.n, 0), True)

    def child(self, overlay: dict, epochs: dict[int, int], depth: int | None = None) -> GroundState:
        return GroundState(self.base, self.bodies, self.max_depth, overlay, epochs,
                           self.depth if depth is None else depth)


def run(h: Heap, s: GroundState) -> GroundState:
    """Run a generalized heap on a ground state."""
    h = lift(h)
    if isinstance(h, Definite):
        new = dict(s.overlay)
        for k, v in h.sigma.entries:
            try:
                gk = T.evaluate(k, s)
            except T.Undefined:
                continue
            new[gk] = T.evaluate_or_undefined(v, s)
        epochs = dict(s.epochs)
        for n, e in Hp.max_epochs(h.sigma).items():
            epochs[n] = s.epochs.get(n, 0) + e + 1
        return s.child(new, epochs)
    if isinstance(h, Compose):
        return run(h.right, run(h.left, s))
    if isinstance(h, Merge):
        for g, hh in h.arms:
            if T.evaluate(g, s):
                return run(hh, s)
        raise T.Undefined("no merge arm holds")
    if isinstance(h, Write):
        k = T.evaluate(h.loc, s)
        v = T.evaluate_or_undefined(h.value, s)
        out = run(h.inner, s)
        new = dict(out.overlay)
        new[k] = v
        return out.child(new, out.epochs)
    if isinstance(h, Rec):
        if s.bodies is None:
            raise KeyError(f"no body table to run Rec({h.rid})")
        if s.depth >= s.max_depth:
            raise DepthExceeded(str(h.rid))
        inner = s.child(s.overlay, s.epochs, s.depth + 1)
        out = run(s.bodies[h.rid], inner)
        return out.child(out.overlay, out.epochs, s.depth)
    raise TypeError(h)


_active_bodies: list[BodyTable | None] = [None]
_active_depth: list[int] = [64]


class using_bodies:
    """Context manager selecting the body table used by ground evaluation."""

    def __init__(self, bodies: BodyTable | None, max_depth: int = 64):
        self.bodies = bodies
        self.max_depth = max_depth

    def __enter__(self) -> using_bodies:
        self.saved = (_active_bodies[0], _active_depth[0])
        _active_bodies[0] = self.bodies
        _active_depth[0] = self.max_depth
        return self

    def __exit__(self, *exc: Any) -> None:
        _active_bodies[0], _active_depth[0] = self.saved


def _source_runner(sub: T.GroundSubstitution, src: Any, key: Any, vsort: str) -> Any:
    s0 = GroundState(sub, _active_bodies[0], _active_depth[0])
    return run(src, s0).lookup(key, vsort)


T.register_source_runner(_source_runner)


def final_store(h: Heap, sub: T.GroundSubstitution, bodies: BodyTable | None, max_depth: int = 64) -> dict:
    """Overlay written by running ``h`` on ``sub`` (only touched locations)."""
    return run(h, GroundState(sub, bodies, max_depth)).overlay


def read_equivalent(a: Heap, b: Heap, bodies: BodyTable | None = None, samples: int = 32,
                    rng: random.Random | None = None, probes: list[Term] | tuple = ()) -> dict | None:
    """Search for a substitution under which running ``a`` and ``b`` differ."""
    rng = rng or random.Random(0)
    terms: list[Term] = list(probes)
    for h in (a, b):
        for node in walk(lift(h)):
            terms.extend(_terms_of(node))
    for sub in T.substitutions(terms, samples, rng):
        try:
            sa = run(lift(a), GroundState(sub, bodies, 32))
            sb = run(lift(b), GroundState(sub, bodies, 32))
        except (T.Undefined, DepthExceeded):
            continue
        keys = set(sa.overlay) | set(sb.overlay)
        for p in probes:
            try:
                keys.add(T.evaluate(p, sub))
            except T.Undefined:
                pass
        for k in keys:
            va, vb = _value(sa, sb, k), _value(sb, sa, k)
            if va != vb or type(va) is not type(vb):
                return dict(sub.store)
    return None


def _value(s: GroundState, other: GroundState, k: Any) -> Any:
    if k in s.overlay:
        return s.overlay[k]
    return s.base.base(k, _guess_sort(other, k))


def _guess_sort(s: GroundState, k: Any) -> str:
    v = s.overlay.get(k)
    if isinstance(v, bool):
        return T.BOOL
    if v is None or isinstance(v, T.Addr):
        return T.PTR
    return T.INT


# ---------------------------------------------------------------- printing/parsing


def show(h: Heap | SymbolicHeap) -> str:
    if isinstance(h, SymbolicHeap):
        return Hp.show_heap(h)
    if isinstance(h, Definite):
        return Hp.show_heap(h.sigma)
    if isinstance(h, Compose):
        right = show(h.right)
        if isinstance(h.right, Compose):
            right = f"({right})"
        return f"{show(h.left)} ∘ {right}"
    if isinstance(h, Merge):
        return "merge(" + ", ".join(f"⟨{T.show(g)}, {show(hh)}⟩" for g, hh in h.arms) + ")"
    if isinstance(h, Write):
        return f"write({show(h.inner)}, {T.show(h.loc)}, {T.show(h.value)})"
    if isinstance(h, Rec):
        return f"Rec({h.rid})"
    return object.__repr__(h)


T.register_heap_printer(show)


def parse_heap_term(p: T.TermParser) -> Heap:
    h = _parse_primary(p)
    while p.at("∘"):
        p.take()
        h = mk_compose(h, _parse_primary(p))
    return h


def _parse_primary(p: T.TermParser) -> Heap:
    if p.at("("):
        p.take()
        h = parse_heap_term(p)
        p.take(")")
        return h
    if p.at("{") or p.at("ε"):
        return definite(Hp.parse_heap_at(p))
    if p.at("Rec"):
        p.take()
        p.take("(")
        kind, v, _ = p.take()
        visited: frozenset = frozenset()
        if p.at(","):
            p.take()
            p.take("{")
            items = []
            while not p.at("}"):
                items.append(p.take()[1])
                if p.at(","):
                    p.take()
            p.take("}")
            visited = frozenset(items)
        p.take(")")
        return rec(RecId(v, visited))
    if p.at("merge"):
        p.take()
        p.take("(")
        arms = []
        while not p.at(")"):
            p.take("⟨")
            g = p.term()
            p.take(",")
            arms.append((g, parse_heap_term(p)))
            p.take("⟩")
            if p.at(","):
                p.take()
        p.take(")")
        return mk_merge(arms)
    if p.at("write"):
        p.take()
        p.take("(")
        h = parse_heap_term(p)
        p.take(",")
        loc = p.postfix()
        p.take(",")
        v = p.term()
        p.take(")")
        return mk_write(h, loc, T.coerce(v, loc.vsort) if v.sort != loc.vsort else v)
    raise T.ParseError(f"expected a heap at {p.peek()[2]}")


T.register_heap_parser(parse_heap_term)


def parse_gen(text: str, sorts: dict[str, str] | None = None) -> Heap:
    p = T.TermParser(text, sorts)
    h = parse_heap_term(p)
    p.done()
    return h
