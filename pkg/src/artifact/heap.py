"""Definite symbolic heaps: read, refinement, composition, merge and write."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from . import terms as T
from .terms import BOT, TOP, Addr, Term

_heaps: dict[tuple, SymbolicHeap] = {}
_uids = itertools.count()


@dataclass(frozen=True, slots=True, eq=False)
class SymbolicHeap:
    """An ordered finite map from locations to terms (interned)."""

    uid: int
    entries: tuple[tuple[Term, Term], ...]

    def __repr__(self) -> str:
        return show_heap(self)

    @property
    def keys(self) -> tuple[Term, ...]:
        return tuple(k for k, _ in self.entries)

    def get(self, key: Term) -> Term | None:
        for k, v in self.entries:
            if k is key:
                return v
        return None

    def __len__(self) -> int:
        return len(self.entries)


def heap(entries: Iterable[tuple[Term, Term]]) -> SymbolicHeap:
    """Build a heap; a repeated key keeps its last value in its first slot."""
    order: dict[Term, Term] = {}
    for k, v in entries:
        if k.sort != T.LOC:
            raise T.SortError(f"heap key must be a location, got {k.sort}")
        if v.sort != T.value_sort(k):
            raise T.SortError(f"value of sort {v.sort} stored at {T.show(k)}")
        order[k] = v
    key = tuple(order.items())
    got = _heaps.get(key)
    if got is None:
        got = SymbolicHeap(next(_uids), key)
        _heaps[key] = got
    return got


EPS = heap(())


def same_entries(a: SymbolicHeap, b: SymbolicHeap) -> bool:
    """Syntactic equality as maps (insertion order ignored)."""
    return dict(a.entries) == dict(b.entries) and len(a) == len(b)


# ---------------------------------------------------------------- epochs


_epochs: dict[SymbolicHeap, dict[int, int]] = {}


def max_epochs(sigma: SymbolicHeap) -> dict[int, int]:
    got = _epochs.get(sigma)
    if got is None:
        got = {}
        for k, v in sigma.entries:
            for t in (k, v):
                for a in T.addresses(t):
                    if a.loop:
                        got[a.n] = max(got.get(a.n, -1), a.epoch)
        _epochs[sigma] = got
    return got


def shift_addr(epochs: dict[int, int], a: Addr) -> Addr:
    """Rename a loop-allocated address so it is fresh w.r.t. the context."""
    if not a.loop:
        return a
    return T.addr(a.n, a.epoch + 1 + epochs.get(a.n, -1), True)


# ---------------------------------------------------------------- find/read/refine


_deferred: list[Callable[[SymbolicHeap, Any, Term], Term]] = []


def register_deferred_refiner(fn: Callable[[SymbolicHeap, Any, Term], Term]) -> None:
    """Install ``τ • LI(src, loc)`` for cells whose source is not the empty heap."""
    _deferred[:] = [fn]


def find_with(sigma: SymbolicHeap, x: Term, ref: Callable[[Term], Term], d: Term) -> Term:
    """The find union over ``sigma`` with refinement ``ref`` and default ``d``."""
    arms = []
    miss = []
    for l, v in sigma.entries:
        rl = ref(l)
        g = T.eq(x, rl)
        if g is TOP:
            return ref(v)
        if g is not BOT:
            arms.append((g, ref(v)))
            miss.append(T.not_(g))
    arms.append((T.and_(*miss), d))
    return T.union(arms, T.value_sort(x))


def find(sigma: SymbolicHeap, x: Term, tau: SymbolicHeap, d: Term) -> Term:
    return find_with(sigma, x, lambda e: refine(tau, e), d)


_read_cache: dict[tuple[SymbolicHeap, Term], Term] = {}


def read(sigma: SymbolicHeap, x: Term) -> Term:
    key = (sigma, x)
    got = _read_cache.get(key)
    if got is None:
        got = find_with(sigma, x, lambda e: e, T.cell(None, x))
        _read_cache[key] = got
    return got


_refine_cache: dict[tuple[SymbolicHeap, Term], Term] = {}


def refine(sigma: SymbolicHeap, e: Term) -> Term:
    """``sigma • e``: substitute the heap's contents into the cells of ``e``."""
    if sigma is EPS:
        return e
    key = (sigma, e)
    got = _refine_cache.get(key)
    if got is not None:
        return got

    def on_cell(src: Any, loc: Term) -> Term:
        if src is None:
            return read(sigma, loc)
        (fn,) = _deferred
        return fn(sigma, src, loc)

    epochs = max_epochs(sigma)
    on_addr = (lambda a: shift_addr(epochs, a)) if epochs else None
    got = T.transform(e, on_cell, on_addr)
    _refine_cache[key] = got
    return got


_compose_cache: dict[tuple[SymbolicHeap, SymbolicHeap], SymbolicHeap] = {}


def compose(sigma: SymbolicHeap, sigma2: SymbolicHeap) -> SymbolicHeap:
    """``sigma ∘ sigma2``: the effect of ``sigma`` followed by ``sigma2``."""
    if sigma is EPS:
        return sigma2
    if sigma2 is EPS:
        return sigma
    key = (sigma, sigma2)
    got = _compose_cache.get(key)
    if got is not None:
        return got
    keys: dict[Term, None] = dict.fromkeys(sigma.keys)
    for l in sigma2.keys:
        keys.setdefault(refine(sigma, l), None)
    entries = [(x, find(sigma2, x, sigma, read(sigma, x))) for x in keys]
    got = heap(entries)
    _compose_cache[key] = got
    return got


def merge(arms: Iterable[tuple[Term, SymbolicHeap]]) -> SymbolicHeap:
    arms = [(g, s) for g, s in arms if g is not BOT]
    if not arms:
        return EPS
    if len(arms) == 1 and arms[0][0] is TOP:
        return arms[0][1]
    keys: dict[Term, None] = {}
    for _, s in arms:
        keys.update(dict.fromkeys(s.keys))
    entries = []
    for x in keys:
        entries.append((x, T.union([(g, read(s, x)) for g, s in arms], T.value_sort(x))))
    return heap(entries)


def write(sigma: SymbolicHeap, y: Term, v: Term) -> SymbolicHeap:
    entries = [(l, T.ite(T.eq(l, y), v, val)) for l, val in sigma.entries]
    entries.append((y, v))
    return heap(entries)


# ---------------------------------------------------------------- ground semantics


def ground_keys(sigma: SymbolicHeap, sub: T.GroundSubstitution) -> list[Any]:
    out = []
    for k in sigma.keys:
        try:
            out.append(T.evaluate(k, sub))
        except T.Undefined:
            pass
    return out


def read_equivalent(
    a: SymbolicHeap,
    b: SymbolicHeap,
    samples: int = 32,
    rng: random.Random | None = None,
    probes: Iterable[Term] = (),
) -> dict | None:
    """Compare reads of both heaps at every key (and probe) under sampling.

    Returns a distinguishing substitution, or None if none was found.
    """
    rng = rng or random.Random(0)
    locs = list(dict.fromkeys([*a.keys, *b.keys, *probes]))
    reads = [(x, read(a, x), read(b, x)) for x in locs]
    for s in T.substitutions([t for _, ra, rb in reads for t in (ra, rb)], samples, rng):
        for _, ra, rb in reads:
            va = T.evaluate_or_undefined(ra, s)
            vb = T.evaluate_or_undefined(rb, s)
            if va is T.Undefined or vb is T.Undefined:
                if va is not vb:
                    return dict(s.store)
            elif va != vb or (ra.sort == T.PTR and va is not vb):
                return dict(s.store)
    return None


def invariant_violation(sigma: SymbolicHeap, samples: int = 16, rng: random.Random | None = None) -> dict | None:
    """Search for keys that alias under a sample yet store different values."""
    rng = rng or random.Random(0)
    ts = [t for kv in sigma.entries for t in kv]
    for s in T.substitutions(ts, samples, rng):
        seen: dict[Any, Any] = {}
        for k, v in sigma.entries:
            try:
                gk = T.evaluate(k, s)
            except T.Undefined:
                continue
            gv = T.evaluate_or_undefined(v, s)
            if gk in seen and seen[gk] != gv:
                return dict(s.store)
            seen.setdefault(gk, gv)
    return None


# ---------------------------------------------------------------- printing/parsing


def show_heap(sigma: SymbolicHeap) -> str:
    if not sigma.entries:
        return "ε"
    return "{" + "; ".join(f"{T.show(k)} ↦ {T.show(v)}" for k, v in sigma.entries) + "}"


def heap_json(sigma: SymbolicHeap) -> list[dict[str, str]]:
    return [{"key": T.show(k), "value": T.show(v)} for k, v in sigma.entries]


def parse_heap_at(p: T.TermParser) -> SymbolicHeap:
    if p.at("ε"):
        p.take()
        return EPS
    p.take("{")
    entries = []
    while not p.at("}"):
        k = p.postfix()
        if k.sort != T.LOC:
            raise T.ParseError(f"heap key {T.show(k)} is not a location")
        p.take("↦")
        v = p.term()
        if v.sort != k.vsort:
            if v.sort in (T.PTR, T.BOOL) and not (v.sort == T.BOOL and k.vsort == T.PTR):
                k = T._retype_loc(k, v.sort)
            else:
                v = T.coerce(v, k.vsort)
        entries.append((k, v))
        if p.at(";") or p.at(","):
            p.take()
    p.take("}")
    return heap(entries)


def parse_heap(text: str, sorts: dict[str, str] | None = None) -> SymbolicHeap:
    p = T.TermParser(text, sorts)
    h = parse_heap_at(p)
    p.done()
    return h
