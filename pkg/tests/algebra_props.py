"""Randomized obligations for the term and heap algebra.

Each property draws one instance from ``rng`` and returns a description of
a counterexample, or None. Symbolic results are compared with the ground
oracle in several sampled stores.
"""

from __future__ import annotations

import random
from typing import Callable

import oracle as O
from artifact import heap as Hp
from artifact import randgen as R
from artifact import terms as T
from artifact.heap import EPS, SymbolicHeap

STATES = 3
TERM_DEPTH = 5


def _states(rng: random.Random) -> list[T.GroundSubstitution]:
    return [O.fresh_state(rng) for _ in range(STATES)]


def _probes(rng: random.Random, *heaps: SymbolicHeap) -> list[T.Term]:
    out = [k for h in heaps for k in h.keys]
    out += [R.rand_loc(rng, 3, T.INT), R.rand_loc(rng, 3, T.PTR)]
    return out


def _heap_agrees(h: SymbolicHeap, expected: T.GroundSubstitution, s: T.GroundSubstitution,
                 probes: list[T.Term]) -> str | None:
    """Reads of ``h`` at every probe equal the expected ground store."""
    for x in probes:
        xv = O.val(x, s)
        if xv is O.UNDEF:
            continue
        want = O.at(expected, xv, T.value_sort(x))
        got = O.val(Hp.read(h, x), s)
        if not O.same(got, want):
            return f"read at {T.show(x)} gives {got!r}, expected {want!r} in {Hp.show_heap(h)}"
    return None


def _union_naive(arms: list, s: T.GroundSubstitution):
    for g, v in arms:
        if O.val(g, s) is True:
            return _union_naive(v, s) if isinstance(v, list) else O.val(v, s)
    return O.UNDEF


# ---------------------------------------------------------------- guarded terms


def top_singleton(rng: random.Random) -> str | None:
    v = R.rand_term(rng, TERM_DEPTH)
    got = T.union([(T.TOP, v)])
    return None if got is v else f"union⟨⊤, {T.show(v)}⟩ = {T.show(got)}"


def bottom_and_nesting(rng: random.Random) -> str | None:
    vsort = rng.choice([T.INT, T.PTR])
    vals = [R.rand_value(rng, 3, vsort) for _ in range(4)]
    g, g1 = R.rand_guard(rng, 3), R.rand_guard(rng, 3)
    inner = [(g1, vals[0]), (T.not_(g1), vals[1])]
    raw = [(T.BOT, vals[3]), (g, inner), (T.not_(g), vals[2])]
    built = T.union([(T.BOT, vals[3]), (g, T.union(inner)), (T.not_(g), vals[2])])
    if any(a is T.BOT for a, _ in T.arms_of(built)):
        return f"⊥ arm kept in {T.show(built)}"
    for s in _states(rng):
        want, got = _union_naive(raw, s), O.val(built, s)
        if not O.same(want, got):
            return f"{T.show(built)} gives {got!r}, expected {want!r}"
    return None


def equal_values_merge(rng: random.Random) -> str | None:
    vsort = rng.choice([T.INT, T.PTR])
    v, w = R.rand_value(rng, 3, vsort), R.rand_value(rng, 3, vsort)
    gs = R.rand_disjoint_guards(rng)
    raw = [(g, v if i < len(gs) - 1 else w) for i, g in enumerate(gs)]
    built = T.union(raw)
    if sum(1 for _, x in T.arms_of(built) if x is v) > 1:
        return f"equal arms not merged in {T.show(built)}"
    for s in _states(rng):
        want, got = _union_naive(raw, s), O.val(built, s)
        if not O.same(want, got):
            return f"{T.show(built)} gives {got!r}, expected {want!r}"
    return None


def operator_lifting(rng: random.Random) -> str | None:
    g, h = R.rand_guard(rng, 3), R.rand_guard(rng, 3)
    a = [(g, R.rand_int(rng, 3)), (T.not_(g), R.rand_int(rng, 3))]
    b = [(h, R.rand_int(rng, 3)), (T.not_(h), R.rand_int(rng, 3))]
    ua, ub = T.union(a), T.union(b)
    ops = [(T.add, lambda x, y: x + y), (T.sub, lambda x, y: x - y),
           (T.lt, lambda x, y: x < y), (T.eq, lambda x, y: x == y)]
    sym, fn = rng.choice(ops)
    built = sym(ua, ub)
    for s in _states(rng):
        x, y = _union_naive(a, s), _union_naive(b, s)
        want = fn(x, y)
        got = O.val(built, s)
        if not O.same(got, want):
            return f"lifted op gives {got!r}, expected {want!r} for {T.show(built)}"
    return None


def cell_distribution(rng: random.Random) -> str | None:
    vsort = rng.choice([T.INT, T.PTR])
    gs = R.rand_disjoint_guards(rng)
    xs = [R.rand_loc(rng, 3, vsort) for _ in gs]
    loc = T.union(list(zip(gs, xs)))
    left = T.cell(None, loc)
    right = T.union([(g, T.cell(None, x)) for g, x in zip(gs, xs)])
    for s in _states(rng):
        i = O.holds(gs, s)
        want = O.at(s, O.val(xs[i], s), vsort)
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"LI over union: {T.show(side)} != {want!r}"
    return None


# ---------------------------------------------------------------- definite heaps


def compose_is_heap(rng: random.Random) -> str | None:
    c = Hp.compose(R.rand_heap(rng), R.rand_heap(rng))
    for s in _states(rng):
        try:
            O.writes_of(c, s)
        except O.InvariantBroken as e:
            return f"{e} in {Hp.show_heap(c)}"
    return None


def empty_heap_laws(rng: random.Random) -> str | None:
    x = R.rand_loc(rng, 4, rng.choice([T.INT, T.PTR]))
    e = R.rand_term(rng, TERM_DEPTH)
    sigma = R.rand_heap(rng)
    if Hp.read(EPS, x) is not T.cell(None, x):
        return f"read(ε, {T.show(x)}) = {T.show(Hp.read(EPS, x))}"
    if Hp.refine(EPS, e) is not e:
        return f"ε • {T.show(e)} changed"
    probes = _probes(rng, sigma)
    for s in _states(rng):
        expected = O.apply(sigma, s)
        for h in (Hp.compose(EPS, sigma), Hp.compose(sigma, EPS)):
            bad = _heap_agrees(h, expected, s, probes)
            if bad:
                return bad
    return None


def read_of_composition(rng: random.Random) -> str | None:
    sigma, sigma2 = R.rand_heap(rng), R.rand_heap(rng)
    x = R.rand_loc(rng, 4, rng.choice([T.INT, T.PTR]))
    left = Hp.refine(sigma, Hp.read(sigma2, x))
    right = Hp.read(Hp.compose(sigma, sigma2), Hp.refine(sigma, x))
    for s in _states(rng):
        s1 = O.apply(sigma, s)
        want = O.at(O.apply(sigma2, s1), O.val(x, s1), T.value_sort(x))
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"T3 side {T.show(side)} != {want!r}"
    return None


def refine_of_composition(rng: random.Random) -> str | None:
    sigma, sigma2 = R.rand_heap(rng), R.rand_heap(rng)
    e = R.rand_term(rng, TERM_DEPTH)
    left = Hp.refine(Hp.compose(sigma, sigma2), e)
    right = Hp.refine(sigma, Hp.refine(sigma2, e))
    for s in _states(rng):
        want = O.val(e, O.apply(sigma2, O.apply(sigma, s)))
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"T4 side {T.show(side)} != {want!r}"
    return None


def associativity(rng: random.Random) -> str | None:
    a, b, c = R.rand_heap(rng), R.rand_heap(rng), R.rand_heap(rng)
    left = Hp.compose(Hp.compose(a, b), c)
    right = Hp.compose(a, Hp.compose(b, c))
    probes = _probes(rng, a, b, c)
    for s in _states(rng):
        expected = O.overlay(s, _chain_writes([a, b, c], s))
        for h in (left, right):
            bad = _heap_agrees(h, expected, s, probes)
            if bad:
                return bad
    return None


def _chain_writes(heaps: list[SymbolicHeap], s: T.GroundSubstitution) -> dict:
    """Accumulated writes of running ``heaps`` one after another from ``s``."""
    acc: dict = {}
    cur = s
    for h in heaps:
        w = {k: v for k, v in O.writes_of(h, cur).items() if v is not O.UNDEF}
        acc.update(w)
        cur = O.overlay(s, acc)
    return acc


def monoid(rng: random.Random) -> str | None:
    a, b, c = R.rand_heap(rng), R.rand_heap(rng), R.rand_heap(rng)
    probes = _probes(rng, a, b, c)
    candidates = [
        (Hp.compose(Hp.compose(a, b), c), [a, b, c]),
        (Hp.compose(a, Hp.compose(b, c)), [a, b, c]),
        (Hp.compose(EPS, Hp.compose(a, EPS)), [a]),
    ]
    for s in _states(rng):
        for h, chain in candidates:
            bad = _heap_agrees(h, O.overlay(s, _chain_writes(chain, s)), s, probes)
            if bad:
                return bad
    return None


def alias_read(rng: random.Random) -> str | None:
    sigma = R.rand_heap(rng)
    vsort = rng.choice([T.INT, T.PTR])
    keys = [k for k in sigma.keys if T.value_sort(k) == vsort]
    x = rng.choice(keys) if keys and rng.random() < 0.7 else R.rand_loc(rng, 3, vsort)
    y = R.rand_loc(rng, 3, vsort)
    g = T.eq(x, y)
    if g is T.BOT:
        # syntactically distinct constants; both sides are the empty union
        return None
    left = T.union([(g, Hp.read(sigma, x))])
    right = T.union([(g, Hp.read(sigma, y))])
    for s in _states(rng):
        a, b = O.val(left, s), O.val(right, s)
        if not O.same(a, b):
            return f"aliasing reads differ: {a!r} vs {b!r}"
        if O.val(g, s) is True:
            want = O.at(O.apply(sigma, s), O.val(x, s), vsort)
            if not O.same(a, want):
                return f"read under alias gives {a!r}, expected {want!r}"
    return None


def _merge_instance(rng: random.Random) -> tuple[list[T.Term], list[SymbolicHeap], SymbolicHeap]:
    gs = R.rand_disjoint_guards(rng)
    hs = [R.rand_heap(rng) for _ in gs]
    return gs, hs, Hp.merge(list(zip(gs, hs)))


def merge_is_heap(rng: random.Random) -> str | None:
    _, _, m = _merge_instance(rng)
    for s in _states(rng):
        try:
            O.writes_of(m, s)
        except O.InvariantBroken as e:
            return f"{e} in {Hp.show_heap(m)}"
    return None


def read_of_merge(rng: random.Random) -> str | None:
    gs, hs, m = _merge_instance(rng)
    x = R.rand_loc(rng, 4, rng.choice([T.INT, T.PTR]))
    left = Hp.read(m, x)
    right = T.union([(g, Hp.read(h, x)) for g, h in zip(gs, hs)])
    for s in _states(rng):
        i = O.holds(gs, s)
        want = O.at(O.apply(hs[i], s), O.val(x, s), T.value_sort(x))
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"T9 side {T.show(side)} != {want!r}"
    return None


def compose_before_merge(rng: random.Random) -> str | None:
    sigma = R.rand_heap(rng)
    gs, hs, m = _merge_instance(rng)
    left = Hp.compose(sigma, m)
    right = Hp.merge([(Hp.refine(sigma, g), Hp.compose(sigma, h)) for g, h in zip(gs, hs)])
    probes = _probes(rng, sigma, *hs)
    for s in _states(rng):
        s1 = O.apply(sigma, s)
        i = O.holds(gs, s1)
        expected = O.overlay(s, _chain_writes([sigma, hs[i]], s))
        for h in (left, right):
            bad = _heap_agrees(h, expected, s, probes)
            if bad:
                return bad
    return None


def read_at_union(rng: random.Random) -> str | None:
    sigma = R.rand_heap(rng)
    vsort = rng.choice([T.INT, T.PTR])
    gs = R.rand_disjoint_guards(rng)
    xs = [R.rand_loc(rng, 3, vsort) for _ in gs]
    left = Hp.read(sigma, T.union(list(zip(gs, xs))))
    right = T.union([(g, Hp.read(sigma, x)) for g, x in zip(gs, xs)])
    for s in _states(rng):
        i = O.holds(gs, s)
        want = O.at(O.apply(sigma, s), O.val(xs[i], s), vsort)
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"T11 side {T.show(side)} != {want!r}"
    return None


def refine_in_merge(rng: random.Random) -> str | None:
    gs, hs, m = _merge_instance(rng)
    e = R.rand_term(rng, TERM_DEPTH)
    left = T.union([(T.or_(*gs), Hp.refine(m, e))])
    right = T.union([(g, Hp.refine(h, e)) for g, h in zip(gs, hs)])
    for s in _states(rng):
        i = O.holds(gs, s)
        want = O.val(e, O.apply(hs[i], s))
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"T12 side {T.show(side)} != {want!r}"
    return None


def merge_then_compose(rng: random.Random) -> str | None:
    gs, hs, m = _merge_instance(rng)
    sigma = R.rand_heap(rng)
    x = R.rand_loc(rng, 4, rng.choice([T.INT, T.PTR]))
    left = T.union([(T.or_(*gs), Hp.read(Hp.compose(m, sigma), x))])
    right = Hp.read(Hp.merge([(g, Hp.compose(h, sigma)) for g, h in zip(gs, hs)]), x)
    for s in _states(rng):
        i = O.holds(gs, s)
        expected = O.overlay(s, _chain_writes([hs[i], sigma], s))
        want = O.at(expected, O.val(x, s), T.value_sort(x))
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"T13 side {T.show(side)} != {want!r}"
    return None


def _write_instance(rng: random.Random) -> tuple[T.Term, T.Term]:
    vsort = rng.choice([T.INT, T.PTR])
    return R.rand_loc(rng, 3, vsort), R.rand_value(rng, 3, vsort)


def read_after_write(rng: random.Random) -> str | None:
    sigma = R.rand_heap(rng)
    y, v = _write_instance(rng)
    x = y if rng.random() < 0.3 else R.rand_loc(rng, 3, T.value_sort(y))
    left = Hp.read(Hp.write(sigma, y, v), x)
    right = T.ite(T.eq(x, y), v, Hp.read(sigma, x))
    for s in _states(rng):
        s1 = O.write_after(O.apply(sigma, s), O.val(y, s), O.val(v, s))
        want = O.at(s1, O.val(x, s), T.value_sort(x))
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"T14 side {T.show(side)} != {want!r}"
    return None


def compose_with_write(rng: random.Random) -> str | None:
    sigma, sigma2 = R.rand_heap(rng), R.rand_heap(rng)
    y, v = _write_instance(rng)
    left = Hp.compose(sigma, Hp.write(sigma2, y, v))
    right = Hp.write(Hp.compose(sigma, sigma2), Hp.refine(sigma, y), Hp.refine(sigma, v))
    probes = _probes(rng, sigma, sigma2) + [y]
    for s in _states(rng):
        s1 = O.apply(sigma, s)
        acc = _chain_writes([sigma, sigma2], s)
        acc[O.val(y, s1)] = O.val(v, s1)
        expected = O.overlay(s, acc)
        for h in (left, right):
            bad = _heap_agrees(h, expected, s, probes)
            if bad:
                return bad
    return None


def write_into_merge(rng: random.Random) -> str | None:
    gs, hs, m = _merge_instance(rng)
    y, v = _write_instance(rng)
    left = Hp.write(m, y, v)
    right = Hp.merge([(g, Hp.write(h, y, v)) for g, h in zip(gs, hs)])
    probes = _probes(rng, *hs) + [y]
    for s in _states(rng):
        i = O.holds(gs, s)
        expected = O.write_after(O.apply(hs[i], s), O.val(y, s), O.val(v, s))
        for h in (left, right):
            bad = _heap_agrees(h, expected, s, probes)
            if bad:
                return bad
    return None


# ---------------------------------------------------------------- find


def find_of_composition(rng: random.Random) -> str | None:
    sigma, sigma2, tau = R.rand_heap(rng), R.rand_heap(rng), R.rand_heap(rng)
    vsort = rng.choice([T.INT, T.PTR])
    x, d = R.rand_loc(rng, 3, vsort), R.rand_value(rng, 3, vsort)
    left = Hp.find(Hp.compose(sigma, sigma2), x, tau, d)
    right = Hp.find(sigma2, x, Hp.compose(tau, sigma), Hp.find(sigma, x, tau, d))
    for s in _states(rng):
        st = O.apply(tau, s)
        s1 = O.apply(sigma, st)
        written = set(O.writes_of(sigma, st)) | set(O.writes_of(sigma2, s1))
        xv = O.val(x, s)
        want = O.at(O.apply(sigma2, s1), xv, vsort) if xv in written else O.val(d, s)
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"side {T.show(side)} != {want!r}"
    return None


def refine_find(rng: random.Random) -> str | None:
    sigma, sigma2, tau = R.rand_heap(rng), R.rand_heap(rng), R.rand_heap(rng)
    vsort = rng.choice([T.INT, T.PTR])
    x, d = R.rand_loc(rng, 3, vsort), R.rand_value(rng, 3, vsort)
    left = Hp.refine(tau, Hp.find(sigma2, x, sigma, d))
    right = Hp.find(sigma2, Hp.refine(tau, x), Hp.compose(tau, sigma), Hp.refine(tau, d))
    for s in _states(rng):
        want = O.find(sigma2, x, sigma, d, O.apply(tau, s))
        for side in (left, right):
            if not O.same(O.val(side, s), want):
                return f"refined find side {T.show(side)} != {want!r}"
    return None


PROPERTIES: dict[str, Callable[[random.Random], str | None]] = {
    "top_singleton": top_singleton,
    "bottom_and_nesting": bottom_and_nesting,
    "equal_values_merge": equal_values_merge,
    "operator_lifting": operator_lifting,
    "cell_distribution": cell_distribution,
    "compose_is_heap": compose_is_heap,
    "empty_heap_laws": empty_heap_laws,
    "read_of_composition": read_of_composition,
    "refine_of_composition": refine_of_composition,
    "associativity": associativity,
    "monoid": monoid,
    "alias_read": alias_read,
    "merge_is_heap": merge_is_heap,
    "read_of_merge": read_of_merge,
    "compose_before_merge": compose_before_merge,
    "read_at_union": read_at_union,
    "refine_in_merge": refine_in_merge,
    "merge_then_compose": merge_then_compose,
    "read_after_write": read_after_write,
    "compose_with_write": compose_with_write,
    "write_into_merge": write_into_merge,
    "find_of_composition": find_of_composition,
    "refine_find": refine_find,
}


def run_property(name: str, instances: int, seed: int = 0) -> list[str]:
    """Counterexamples found over ``instances`` draws."""
    rng = random.Random(f"{name}:{seed}")
    bad = []
    for _ in range(instances):
        got = PROPERTIES[name](rng)
        if got is not None:
            bad.append(got)
    return bad
