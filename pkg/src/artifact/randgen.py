"""Random terms, heaps, control-flow graphs and programs for property tests."""

from __future__ import annotations

import random

from . import heap as Hp
from . import lang as L
from . import terms as T
from .heap import SymbolicHeap
from .terms import Term

INT_VARS = ("a", "b", "c")
PTR_VARS = ("p", "q")
ADDRS = (1, 2, 3)


def _li(loc: Term) -> Term:
    return T.cell(None, loc)


def rand_ptr(rng: random.Random, depth: int) -> Term:
    r = rng.random()
    if depth <= 1 or r < 0.25:
        return rng.choice([T.null(), *(T.addr(n) for n in ADDRS)])
    if r < 0.8:
        return _li(rand_loc(rng, depth - 1, T.PTR))
    g = rand_guard(rng, depth - 1)
    return T.ite(g, rand_ptr(rng, depth - 1), rand_ptr(rng, depth - 1))


def rand_loc(rng: random.Random, depth: int, vsort: str) -> Term:
    """A location holding a value of ``vsort``."""
    if depth <= 1 or rng.random() < 0.5:
        return T.var(rng.choice(INT_VARS if vsort == T.INT else PTR_VARS), vsort)
    name = "Key" if vsort == T.INT else "Next"
    return T.field(rand_ptr(rng, depth - 1), name, vsort)


def rand_int(rng: random.Random, depth: int) -> Term:
    r = rng.random()
    if depth <= 1 or r < 0.2:
        return T.num(rng.randint(-3, 3))
    if r < 0.55:
        return _li(rand_loc(rng, depth - 1, T.INT))
    if r < 0.75:
        return T.add(rand_int(rng, depth - 1), rand_int(rng, depth - 1))
    if r < 0.82:
        return T.sub(rand_int(rng, depth - 1), rand_int(rng, depth - 1))
    if r < 0.88:
        return T.scale(rand_int(rng, depth - 1), rng.choice([-2, 2, 3]))
    return T.ite(rand_guard(rng, depth - 1), rand_int(rng, depth - 1), rand_int(rng, depth - 1))


def rand_guard(rng: random.Random, depth: int) -> Term:
    r = rng.random()
    if depth <= 1 or r < 0.05:
        return rng.choice([T.TOP, T.BOT])
    if r < 0.35:
        return T.eq(rand_int(rng, depth - 1), rand_int(rng, depth - 1))
    if r < 0.6:
        return T.lt(rand_int(rng, depth - 1), rand_int(rng, depth - 1))
    if r < 0.75:
        return T.eq(rand_ptr(rng, depth - 1), rand_ptr(rng, depth - 1))
    if r < 0.85:
        return T.not_(rand_guard(rng, depth - 1))
    if r < 0.93:
        return T.and_(rand_guard(rng, depth - 1), rand_guard(rng, depth - 1))
    return T.or_(rand_guard(rng, depth - 1), rand_guard(rng, depth - 1))


def rand_value(rng: random.Random, depth: int, vsort: str) -> Term:
    return rand_int(rng, depth) if vsort == T.INT else rand_ptr(rng, depth)


def rand_term(rng: random.Random, depth: int = 5) -> Term:
    kind = rng.choice([T.INT, T.PTR, T.BOOL])
    if kind == T.BOOL:
        return rand_guard(rng, depth)
    return rand_value(rng, depth, kind)


def rand_heap(rng: random.Random, max_entries: int = 6, depth: int = 3) -> SymbolicHeap:
    """A heap built by successive writes, so the heap invariant holds."""
    sigma = Hp.EPS
    for _ in range(rng.randint(0, max_entries)):
        vsort = rng.choice([T.INT, T.INT, T.PTR])
        loc = rand_loc(rng, depth, vsort)
        sigma2 = Hp.write(sigma, loc, rand_value(rng, depth, vsort))
        if len(sigma2.entries) > max_entries:
            break
        sigma = sigma2
    return sigma


def rand_disjoint_guards(rng: random.Random, depth: int = 3) -> list[Term]:
    """Two or three pairwise disjoint guards covering every state."""
    g = rand_guard(rng, depth)
    if rng.random() < 0.5:
        return [g, T.not_(g)]
    h = rand_guard(rng, depth)
    return [T.and_(g, h), T.and_(g, T.not_(h)), T.not_(g)]


# ---------------------------------------------------------------- graphs


def rand_cfg(rng: random.Random, max_vertices: int = 8) -> L.Cfg:
    """Start 0 has no incoming edge, the exit has no outgoing edge, every
    vertex is reachable from the start and reaches the exit."""
    n = rng.randint(2, max_vertices)
    exit_ = n - 1
    edges: set[tuple[int, int]] = set()
    # a spanning path keeps everything reachable and co-reachable
    order = [0, *rng.sample(range(1, n - 1), n - 2), exit_]
    for a, b in zip(order, order[1:]):
        edges.add((a, b))
    for _ in range(rng.randint(0, 2 * n)):
        a = rng.randrange(0, n - 1)
        b = rng.randrange(1, n)
        edges.add((a, b))
    return L.graph_cfg(list(range(n)), sorted(edges), 0, frozenset({exit_}))


# ---------------------------------------------------------------- programs


def _rexpr_int(rng: random.Random, depth: int, heap_ok: bool) -> str:
    r = rng.random()
    if depth <= 1 or r < 0.3:
        return rng.choice(["x", "y", str(rng.randint(-2, 2))])
    if heap_ok and r < 0.4:
        return "p.Key"
    op = rng.choice(["+", "-", "+", "*"])
    right = str(rng.randint(-2, 2)) if op == "*" else _rexpr_int(rng, depth - 1, heap_ok)
    return f"({_rexpr_int(rng, depth - 1, heap_ok)} {op} {right})"


def _rguard(rng: random.Random, heap_ok: bool) -> str:
    r = rng.random()
    if heap_ok and r < 0.25:
        return rng.choice(["p = null", "p != null", "p.Next = null"])
    op = rng.choice(["<", "<=", "=", "!=", ">"])
    return f"{_rexpr_int(rng, 2, heap_ok)} {op} {_rexpr_int(rng, 2, heap_ok)}"


def _rassign(rng: random.Random, heap_ok: bool) -> str:
    r = rng.random()
    if heap_ok and r < 0.15:
        return "p := p.Next"
    if heap_ok and r < 0.3:
        return f"p.Key := {_rexpr_int(rng, 2, heap_ok)}"
    if heap_ok and r < 0.35:
        return f"p := new {{Key = {_rexpr_int(rng, 2, heap_ok)}, Next = p}}"
    return f"{rng.choice(['x', 'y'])} := {_rexpr_int(rng, 3, heap_ok)}"


def rand_loop_free_program(rng: random.Random, length: int = 7, heap_ok: bool = True) -> str:
    """Straight-line code with forward jumps, an occasional ``fail`` and a final ``halt``.

    ``y`` is assigned first so it is never an input.
    """
    body: list[str] = [f"y := {rng.randint(-2, 2)}"]
    for i in range(1, length):
        r = rng.random()
        if r < 0.3 and i < length - 1:
            target = rng.randint(i + 1, length)
            body.append(f"goto {{{_rguard(rng, heap_ok)} -> L{target}}}")
        elif r < 0.37:
            body.append("fail")
        else:
            body.append(_rassign(rng, heap_ok))
    body.append("halt")
    return "\n".join(f"L{i}: {s}" if i else s for i, s in enumerate(body)) + "\n"


def rand_looping_program(rng: random.Random, length: int = 8) -> str:
    """Arbitrary jumps (backward ones included) over a small statement pool."""
    body: list[str] = []
    for i in range(length):
        r = rng.random()
        if r < 0.35:
            arms = [f"{_rguard(rng, True)} -> L{rng.randint(1, length)}" for _ in range(rng.randint(1, 2))]
            body.append("goto {" + ", ".join(arms) + "}")
        elif r < 0.4:
            body.append("fail")
        else:
            body.append(_rassign(rng, True))
    body.append("halt")
    return "\n".join(f"L{i}: {s}" if i else s for i, s in enumerate(body)) + "\n"
