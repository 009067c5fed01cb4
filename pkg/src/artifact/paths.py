"""Path descriptors: regular expressions over CFG edges with recursion symbols.

``describe_paths`` builds Π(u, v, D) by the four construction rules, sharing
every Rec(t, D) definition across call sites. ``enumerate_bounded`` unfolds a
descriptor to the paths of bounded length it denotes, and
``brute_force_paths`` is the independent oracle.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .lang import Cfg


@dataclass(frozen=True, slots=True)
class Eps:
    pass


@dataclass(frozen=True, slots=True)
class Empty:
    pass


@dataclass(frozen=True, slots=True)
class Edge:
    u: int
    v: int


@dataclass(frozen=True, slots=True)
class Cat:
    parts: tuple


@dataclass(frozen=True, slots=True)
class Alt:
    arms: tuple


@dataclass(frozen=True, slots=True)
class RecRef:
    u: int
    visited: frozenset


Desc = Eps | Empty | Edge | Cat | Alt | RecRef
EPS_D, EMPTY = Eps(), Empty()


def cat(*parts: Desc) -> Desc:
    flat: list[Desc] = []
    for p in parts:
        if isinstance(p, Empty):
            return EMPTY
        if isinstance(p, Cat):
            flat.extend(p.parts)
        elif not isinstance(p, Eps):
            flat.append(p)
    if not flat:
        return EPS_D
    return flat[0] if len(flat) == 1 else Cat(tuple(flat))


def alt(*arms: Desc) -> Desc:
    flat: list[Desc] = []
    for a in arms:
        if isinstance(a, Alt):
            flat.extend(a.arms)
        elif not isinstance(a, Empty) and a not in flat:
            flat.append(a)
    if not flat:
        return EMPTY
    return flat[0] if len(flat) == 1 else Alt(tuple(flat))


@dataclass
class PathSystem:
    """Descriptors for one CFG with their shared Rec definitions."""

    cfg: Cfg
    rec_defs: dict[RecRef, Desc] = field(default_factory=dict)
    pi_memo: dict[tuple[int, int, frozenset], Desc] = field(default_factory=dict)
    constructions: dict[RecRef, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.succ: dict[int, list[int]] = {v: [] for v in self.cfg.vertices}
        for a, b in self.cfg.edges:
            self.succ[a].append(b)
        self.rv = self.cfg.recursive

    def pi(self, u: int, v: int, d: frozenset = frozenset()) -> Desc:
        key = (u, v, d)
        if key in self.pi_memo:
            return self.pi_memo[key]
        arms: list[Desc] = []
        for t in self.succ[u]:
            if t == v:
                arms.append(Edge(u, v))  # I
            elif t not in self.rv:
                arms.append(cat(Edge(u, t), self.pi(t, v, d)))  # II
            elif t not in d:
                d2 = d | {t}
                arms.append(cat(Edge(u, t), self.rec(t, d2), self.pi(t, v, d2)))  # III
        got = alt(*arms)
        self.pi_memo[key] = got
        return got

    def rec(self, u: int, d: frozenset) -> RecRef:
        r = RecRef(u, d)
        if r not in self.rec_defs:
            self.rec_defs[r] = EMPTY  # placeholder while the body is built
            self.constructions[r] = self.constructions.get(r, 0) + 1
            self.rec_defs[r] = alt(cat(self.pi(u, u, d), r), EPS_D)  # IV
        return r


def describe_paths(g: Cfg, u: int, v: int, system: PathSystem | None = None) -> tuple[Desc, PathSystem]:
    system = system or PathSystem(g)
    return system.pi(u, v, frozenset()), system


# ---------------------------------------------------------------- paths


@dataclass(frozen=True, slots=True)
class Path:
    edges: tuple[tuple[int, int], ...]

    @property
    def beg(self) -> int | None:
        return self.edges[0][0] if self.edges else None

    @property
    def end(self) -> int | None:
        return self.edges[-1][1] if self.edges else None

    def chains(self) -> bool:
        return all(a[1] == b[0] for a, b in zip(self.edges, self.edges[1:]))

    def __str__(self) -> str:
        if not self.edges:
            return "ε"
        return "→".join(str(x) for x in [self.edges[0][0], *(e[1] for e in self.edges)])


def _lang(d: Desc, env: dict[RecRef, frozenset], n: int) -> frozenset:
    if isinstance(d, Eps):
        return frozenset({()})
    if isinstance(d, Empty):
        return frozenset()
    if isinstance(d, Edge):
        return frozenset({((d.u, d.v),)}) if n >= 1 else frozenset()
    if isinstance(d, RecRef):
        return env.get(d, frozenset())
    if isinstance(d, Alt):
        out: set = set()
        for a in d.arms:
            out |= _lang(a, env, n)
        return frozenset(out)
    acc = {()}
    for p in d.parts:
        right = _lang(p, env, n)
        acc = {x + y for x in acc for y in right if len(x) + len(y) <= n}
        if not acc:
            break
    return frozenset(acc)


def enumerate_bounded(d: Desc, max_len: int, rec_defs: dict[RecRef, Desc] | None = None) -> set[Path]:
    """Paths of at most ``max_len`` edges denoted by ``d``.

    Recursion symbols are unfolded by fixpoint iteration on the bounded
    languages, which is finite because every path is length-capped.
    """
    rec_defs = rec_defs or {}
    env: dict[RecRef, frozenset] = {r: frozenset() for r in rec_defs}
    while True:
        new = {r: _lang(body, env, max_len) for r, body in rec_defs.items()}
        if new == env:
            break
        env = new
    return {Path(p) for p in _lang(d, env, max_len)}


def brute_force_paths(g: Cfg, u: int, v: int, max_len: int) -> set[Path]:
    """All non-empty walks from ``u`` to ``v`` with at most ``max_len`` edges."""
    succ: dict[int, list[int]] = {x: [] for x in g.vertices}
    for a, b in g.edges:
        succ[a].append(b)
    out: set[Path] = set()
    stack: list[tuple[int, tuple]] = [(u, ())]
    while stack:
        x, es = stack.pop()
        if es and x == v:
            out.add(Path(es))
        if len(es) < max_len:
            for y in succ[x]:
                stack.append((y, es + ((x, y),)))
    return out


# ---------------------------------------------------------------- printing


def _set(d: frozenset) -> str:
    return "{" + ", ".join(map(str, sorted(d))) + "}" if d else "∅"


def show(d: Desc) -> str:
    if isinstance(d, Eps):
        return "{ε}"
    if isinstance(d, Empty):
        return "∅"
    if isinstance(d, Edge):
        return f"({d.u}, {d.v})"
    if isinstance(d, RecRef):
        return f"Rec({d.u}, {_set(d.visited)})"
    if isinstance(d, Cat):
        return " ∘ ".join(f"({show(p)})" if isinstance(p, Alt) else show(p) for p in d.parts)
    return " ∪ ".join(show(a) for a in d.arms)


def equations(g: Cfg, targets: Iterable[int] | None = None) -> dict[str, list[str]]:
    """Printed Π equations from the start vertex plus every Rec definition."""
    system = PathSystem(g)
    targets = sorted(g.exits) if targets is None else list(targets)
    pis = []
    for t in targets:
        d = system.pi(g.start, t, frozenset())
        pis.append(f"Π({g.start}, {t}, ∅) = {show(d)}")
    recs = [f"{show(r)} = {show(body)}" for r, body in
            sorted(system.rec_defs.items(), key=lambda kv: (len(kv[0].visited), kv[0].u))]
    return {"pi_equations": pis, "rec_defs": recs}


_TOK = re.compile(r"\s*(Rec|Π|\{ε\}|ε|∅|\d+|[(){},∘∪])")


def parse_desc(text: str) -> Desc:
    """Parse the printed notation (the right-hand side of an equation)."""
    toks: list[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOK.match(text, pos)
        if not m:
            raise ValueError(f"bad descriptor text at {text[pos:]!r}")
        toks.append(m.group(1))
        pos = m.end()
    i = 0

    def take(t: str | None = None) -> str:
        nonlocal i
        tok = toks[i]
        if t is not None and tok != t:
            raise ValueError(f"expected {t!r}, got {tok!r}")
        i += 1
        return tok

    def at(t: str) -> bool:
        return i < len(toks) and toks[i] == t

    def vset() -> frozenset:
        if at("∅"):
            take()
            return frozenset()
        take("{")
        out = set()
        while not at("}"):
            out.add(int(take()))
            if at(","):
                take()
        take("}")
        return frozenset(out)

    def primary() -> Desc:
        if at("{ε}") or at("ε"):
            take()
            return EPS_D
        if at("∅"):
            take()
            return EMPTY
        if at("Rec"):
            take()
            take("(")
            u = int(take())
            take(",")
            d = vset()
            take(")")
            return RecRef(u, d)
        take("(")
        if toks[i].isdigit() and toks[i + 1] == ",":
            u = int(take())
            take(",")
            v = int(take())
            take(")")
            return Edge(u, v)
        d = union()
        take(")")
        return d

    def concat() -> Desc:
        parts = [primary()]
        while at("∘"):
            take()
            parts.append(primary())
        return cat(*parts)

    def union() -> Desc:
        arms = [concat()]
        while at("∪"):
            take()
            arms.append(concat())
        return alt(*arms)

    d = union()
    if i != len(toks):
        raise ValueError(f"trailing input in descriptor: {toks[i:]}")
    return d


def canonical(d: Desc) -> Desc:
    """Normal form modulo the order of union arms."""
    if isinstance(d, Cat):
        return cat(*(canonical(p) for p in d.parts))
    if isinstance(d, Alt):
        arms = sorted({canonical(a) for a in d.arms}, key=repr)
        return alt(*arms)
    return d
