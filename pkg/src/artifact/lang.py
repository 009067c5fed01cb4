"""Demo-language frontend: lexer, parser, CFG and a concrete interpreter."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Union as TUnion

from . import terms as T

KEYWORDS = {"goto", "fail", "halt", "new", "null", "true", "false", "and", "or", "not"}
NEW_BASE = 0x40


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


# ---------------------------------------------------------------- AST


@dataclass(frozen=True, slots=True)
class Lit:
    value: Any  # int, bool or None for null


@dataclass(frozen=True, slots=True)
class Loc:
    path: tuple[str, ...]  # variable followed by field names


@dataclass(frozen=True, slots=True)
class Bin:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Un:
    op: str
    arg: Expr


@dataclass(frozen=True, slots=True)
class New:
    fields: tuple[tuple[str, Expr], ...]
    site: int


Expr = TUnion[Lit, Loc, Bin, Un, New]


@dataclass(frozen=True, slots=True)
class Assign:
    target: Loc
    expr: Expr


@dataclass(frozen=True, slots=True)
class Goto:
    arms: tuple[tuple[Expr, str], ...]


@dataclass(frozen=True, slots=True)
class Fail:
    pass


@dataclass(frozen=True, slots=True)
class Halt:
    pass


@dataclass(frozen=True, slots=True)
class Skip:
    """Synthetic entry inserted when the first statement is a jump target."""


Instr = TUnion[Assign, Goto, Fail, Halt, Skip]


@dataclass(frozen=True, slots=True)
class Statement:
    instr: Instr
    label: str | None
    line: int


@dataclass(frozen=True)
class Program:
    statements: tuple[Statement, ...]
    labels: dict[str, int]
    sorts: dict[str, str]
    sites: int
    source: str = ""

    def target(self, label: str) -> int:
        return self.labels[label]

    def var_sort(self, name: str) -> str:
        return self.sorts.get("v:" + name, T.INT)

    def field_sort(self, name: str) -> str:
        return self.sorts.get("f:" + name, T.INT)

    @property
    def variables(self) -> list[str]:
        return sorted(k[2:] for k in self.sorts if k.startswith("v:"))

    @property
    def fields(self) -> list[str]:
        return sorted(k[2:] for k in self.sorts if k.startswith("f:"))


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)|(?P<num>\d+)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>:=|->|→|!=|<=|>=|==|[{}(),;:.=<>+\-*])"
)


@dataclass(frozen=True, slots=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def lex(source: str) -> list[Tok]:
    toks = []
    line, start = 1, 0
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind == "id" and text in KEYWORDS:
            toks.append(Tok("kw", text, line, pos - start + 1))
        elif kind == "sym":
            text = {"→": "->", "==": "="}.get(text, text)
            toks.append(Tok("sym", text, line, pos - start + 1))
        elif kind in ("num", "id"):
            toks.append(Tok(kind, text, line, pos - start + 1))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - start + 1))
    return toks


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, source: str):
        self.toks = lex(source)
        self.i = 0
        self.sites = 0

    def peek(self, k: int = 0) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("sym", "kw") and t.text == text

    def take(self, text: str | None = None) -> Tok:
        t = self.peek()
        if text is not None and not (t.kind in ("sym", "kw") and t.text == text):
            found = t.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", t.line, t.col)
        self.i += 1
        return t

    def ident(self) -> Tok:
        t = self.peek()
        if t.kind != "id":
            raise ParseError(f"expected identifier, found {t.text!r}", t.line, t.col)
        self.i += 1
        return t

    def program(self) -> list[Statement]:
        out = []
        while self.peek().kind != "eof":
            if self.at(";"):
                self.take()
                continue
            out.append(self.statement())
        return out

    def statement(self) -> Statement:
        t = self.peek()
        label = None
        if t.kind == "id" and self.peek(1).text == ":" and self.peek(1).kind == "sym":
            label = t.text
            self.i += 2
        t = self.peek()
        if self.at("goto"):
            self.take()
            self.take("{")
            arms = []
            while True:
                g = self.expr()
                self.take("->")
                arms.append((g, self.ident().text))
                if self.at(","):
                    self.take()
                    continue
                break
            self.take("}")
            return Statement(Goto(tuple(arms)), label, t.line)
        if self.at("fail"):
            self.take()
            return Statement(Fail(), label, t.line)
        if self.at("halt"):
            self.take()
            return Statement(Halt(), label, t.line)
        if t.kind == "id":
            if self.peek(1).text == ":" and self.peek(1).kind == "sym":
                raise ParseError("a statement may carry only one label", t.line, t.col)
            target = self.location()
            self.take(":=")
            return Statement(Assign(target, self.rhs()), label, t.line)
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.line, t.col)

    def location(self) -> Loc:
        path = [self.ident().text]
        while self.at("."):
            self.take()
            path.append(self.ident().text)
        return Loc(tuple(path))

    def rhs(self) -> Expr:
        if self.at("new"):
            return self.new()
        return self.expr()

    def new(self) -> New:
        self.take("new")
        site = self.sites
        self.sites += 1
        self.take("{")
        fields = []
        seen = set()
        while True:
            t = self.ident()
            if t.text in seen:
                raise ParseError(f"field {t.text} initialised twice", t.line, t.col)
            seen.add(t.text)
            self.take("=")
            fields.append((t.text, self.rhs()))
            if self.at(",") or self.at(";"):
                self.take()
                if self.at("}"):
                    break
                continue
            break
        self.take("}")
        return New(tuple(fields), site)

    def expr(self) -> Expr:
        e = self.conj()
        while self.at("or"):
            self.take()
            e = Bin("or", e, self.conj())
        return e

    def conj(self) -> Expr:
        e = self.neg()
        while self.at("and"):
            self.take()
            e = Bin("and", e, self.neg())
        return e

    def neg(self) -> Expr:
        if self.at("not"):
            self.take()
            return Un("not", self.neg())
        return self.cmp()

    def cmp(self) -> Expr:
        e = self.sum()
        t = self.peek()
        if t.kind == "sym" and t.text in ("=", "!=", "<", "<=", ">", ">="):
            self.take()
            return Bin(t.text, e, self.sum())
        return e

    def sum(self) -> Expr:
        e = self.prod()
        while self.at("+") or self.at("-"):
            op = self.take().text
            e = Bin(op, e, self.prod())
        return e

    def prod(self) -> Expr:
        e = self.unary()
        while self.at("*"):
            self.take()
            e = Bin("*", e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("-"):
            self.take()
            return Un("-", self.unary())
        return self.atom()

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.take()
            return Lit(int(t.text))
        if self.at("true") or self.at("false"):
            self.take()
            return Lit(t.text == "true")
        if self.at("null"):
            self.take()
            return Lit(None)
        if self.at("("):
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if self.at("new"):
            raise ParseError("'new' is only allowed as a whole right-hand side", t.line, t.col)
        if t.kind == "id":
            return self.location()
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.line, t.col)


# ---------------------------------------------------------------- sorts


class _Sorts:
    """Union-find over sort variables; unresolved variables default to int."""

    def __init__(self) -> None:
        self.parent: dict[Any, Any] = {}
        self.fixed: dict[Any, str] = {}
        self.fresh = 0

    def find(self, x: Any) -> Any:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def new(self) -> Any:
        self.fresh += 1
        return ("tmp", self.fresh)

    def fix(self, x: Any, sort: str, where: str) -> None:
        r = self.find(x)
        have = self.fixed.get(r)
        if have is not None and have != sort:
            raise ParseError(f"sort clash in {where}: {have} vs {sort}")
        self.fixed[r] = sort

    def unify(self, a: Any, b: Any, where: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        sa, sb = self.fixed.get(ra), self.fixed.get(rb)
        if sa and sb and sa != sb:
            raise ParseError(f"sort clash in {where}: {sa} vs {sb}")
        self.parent[ra] = rb
        if sa and not sb:
            self.fixed[rb] = sa

    def sort(self, x: Any) -> str:
        return self.fixed.get(self.find(x), T.INT)


def _infer(stmts: list[Statement]) -> dict[str, str]:
    u = _Sorts()
    names: set[str] = set()

    def loc(l: Loc, where: str) -> Any:
        names.add("v:" + l.path[0])
        cur = "v:" + l.path[0]
        for f in l.path[1:]:
            u.fix(cur, T.PTR, where)
            names.add("f:" + f)
            cur = "f:" + f
        return cur

    def expr(e: Expr, where: str) -> Any:
        v = u.new()
        if isinstance(e, Lit):
            u.fix(v, T.PTR if e.value is None else T.BOOL if isinstance(e.value, bool) else T.INT, where)
        elif isinstance(e, Loc):
            u.unify(v, loc(e, where), where)
        elif isinstance(e, New):
            u.fix(v, T.PTR, where)
            for f, fe in e.fields:
                names.add("f:" + f)
                u.unify("f:" + f, expr(fe, where), where)
        elif isinstance(e, Un):
            a = expr(e.arg, where)
            s = T.BOOL if e.op == "not" else T.INT
            u.fix(a, s, where)
            u.fix(v, s, where)
        elif isinstance(e, Bin):
            a, b = expr(e.left, where), expr(e.right, where)
            if e.op in ("+", "-", "*"):
                u.fix(a, T.INT, where)
                u.fix(b, T.INT, where)
                u.fix(v, T.INT, where)
            elif e.op in ("<", "<=", ">", ">="):
                u.fix(a, T.INT, where)
                u.fix(b, T.INT, where)
                u.fix(v, T.BOOL, where)
            elif e.op in ("and", "or"):
                u.fix(a, T.BOOL, where)
                u.fix(b, T.BOOL, where)
                u.fix(v, T.BOOL, where)
            else:
                u.unify(a, b, where)
                u.fix(v, T.BOOL, where)
        return v

    for st in stmts:
        where = f"line {st.line}"
        ins = st.instr
        if isinstance(ins, Assign):
            u.unify(loc(ins.target, where), expr(ins.expr, where), where)
        elif isinstance(ins, Goto):
            for g, _ in ins.arms:
                u.fix(expr(g, where), T.BOOL, where)
    return {n: u.sort(n) for n in sorted(names)}


# ---------------------------------------------------------------- program


def _jump_targets(stmts: list[Statement]) -> set[str]:
    return {lab for st in stmts if isinstance(st.instr, Goto) for _, lab in st.instr.arms}


def parse_program(source: str) -> Program:
    p = _Parser(source)
    stmts = p.program()
    if not stmts:
        raise ParseError("empty program")
    labels: dict[str, int] = {}
    if stmts[0].label is not None and stmts[0].label in _jump_targets(stmts):
        stmts.insert(0, Statement(Skip(), None, 0))
    for i, st in enumerate(stmts):
        if st.label is not None:
            if st.label in labels:
                raise ParseError(f"duplicate label {st.label}", st.line)
            labels[st.label] = i
    for st in stmts:
        if isinstance(st.instr, Goto):
            for _, lab in st.instr.arms:
                if lab not in labels:
                    raise ParseError(f"undefined label {lab}", st.line)
    if not any(isinstance(st.instr, Halt) for st in stmts):
        raise ParseError("program has no halt statement")
    last = stmts[-1]
    if not isinstance(last.instr, (Halt, Fail)) and not (isinstance(last.instr, Goto) and _always_jumps(last.instr)):
        raise ParseError("control falls off the end of the program", last.line)
    sorts = _infer(stmts)
    overlap = {k[2:] for k in sorts} & set(labels)
    if overlap:
        raise ParseError(f"names used both as label and identifier: {sorted(overlap)}")
    return Program(tuple(stmts), labels, sorts, p.sites, source)


def _always_jumps(g: Goto) -> bool:
    return any(isinstance(e, Lit) and e.value is True for e, _ in g.arms)


# ---------------------------------------------------------------- CFG


@dataclass(frozen=True)
class Cfg:
    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    start: int
    exits: frozenset[int]
    finish_time: dict[int, int]
    exit_time: dict[int, int]
    recursive: frozenset[int]
    warnings: tuple[str, ...] = ()

    def succ(self, v: int) -> list[int]:
        return [b for a, b in self.edges if a == v]

    def pred(self, v: int) -> list[int]:
        return [a for a, b in self.edges if b == v]

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.edges],
            "start": self.start,
            "rv": sorted(self.recursive),
            "finish_times": {str(v): self.finish_time[v] for v in self.vertices if v in self.finish_time},
        }


def program_edges(p: Program) -> list[tuple[int, int]]:
    edges: list[tuple[int, int]] = []

    def add(e: tuple[int, int]) -> None:
        if e not in edges:
            edges.append(e)

    for i, st in enumerate(p.statements):
        ins = st.instr
        if isinstance(ins, (Halt, Fail)):
            continue
        if isinstance(ins, Goto):
            always = False
            for g, lab in ins.arms:
                add((i, p.labels[lab]))
                if isinstance(g, Lit) and g.value is True:
                    always = True
                    break
            if not always:
                add((i, i + 1))
        else:
            add((i, i + 1))
    return edges


def graph_cfg(vertices: list[int], edges: list[tuple[int, int]], start: int,
              exits: frozenset[int] = frozenset()) -> Cfg:
    """Build a CFG record, numbering vertices by one DFS from ``start``.

    ``finish_time`` holds reverse-postorder numbers so that an edge u→v is a
    back edge exactly when ``finish_time[u] >= finish_time[v]``.
    """
    succ: dict[int, list[int]] = {v: [] for v in vertices}
    for a, b in edges:
        succ[a].append(b)
    posts: list[list[int]] = []
    seen: set[int] = set()
    for root in [start, *vertices]:
        # unreachable parts get their own traversals so every cycle has an RV vertex
        if root in seen:
            continue
        post: list[int] = []
        seen.add(root)
        stack = [(root, iter(succ[root]))]
        while stack:
            v, it = stack[-1]
            for w in it:
                if w not in seen:
                    seen.add(w)
                    stack.append((w, iter(succ[w])))
                    break
            else:
                stack.pop()
                post.append(v)
        posts.append(post)
    reachable = set(posts[0])
    exit_time = {v: i for i, v in enumerate(v for post in posts for v in post)}
    order = [v for post in posts for v in reversed(post)]
    rpo = {v: i for i, v in enumerate(order)}
    rv = frozenset(b for a, b in edges if rpo[a] >= rpo[b] and (a in reachable or b not in reachable))
    warnings = tuple(f"vertex {v} is unreachable" for v in vertices if v not in reachable)
    return Cfg(tuple(vertices), tuple(edges), start, exits, rpo, exit_time, rv, warnings)


def build_cfg(p: Program) -> Cfg:
    n = len(p.statements)
    edges = program_edges(p)
    exits = frozenset(i for i, st in enumerate(p.statements) if isinstance(st.instr, (Halt, Fail)))
    starts = [v for v in range(n) if not any(b == v for _, b in edges)]
    if 0 not in starts:
        raise ParseError("the first statement must not be a jump target")
    return graph_cfg(list(range(n)), edges, 0, exits)


def cyclic_vertices(cfg: Cfg) -> frozenset[int]:
    """Vertices lying on some cycle of the CFG."""
    succ: dict[int, list[int]] = {v: [] for v in cfg.vertices}
    for a, b in cfg.edges:
        succ[a].append(b)
    out = set()
    for v in cfg.vertices:
        stack, seen = list(succ[v]), set()
        while stack:
            w = stack.pop()
            if w == v:
                out.add(v)
                break
            if w not in seen:
                seen.add(w)
                stack.extend(succ[w])
    return frozenset(out)


# ---------------------------------------------------------------- concrete interpreter


class UninitializedRead(RuntimeError):
    pass


class DynamicTypeError(RuntimeError):
    pass


@dataclass
class ConcreteState:
    store: dict[Any, Any]
    pc_index: int = 0
    next_address: int = NEW_BASE

    def copy(self) -> ConcreteState:
        return ConcreteState(dict(self.store), self.pc_index, self.next_address)


@dataclass(frozen=True)
class Halted:
    state: ConcreteState


@dataclass(frozen=True)
class Failed:
    index: int


@dataclass(frozen=True)
class NullDeref:
    index: int


@dataclass(frozen=True)
class OutOfFuel:
    steps: int


class _Deref(Exception):
    pass


def _read(store: dict[Any, Any], key: Any) -> Any:
    try:
        return store[key]
    except KeyError:
        raise UninitializedRead(f"read of uninitialised location {key!r}") from None


def _eval(e: Expr, s: ConcreteState) -> Any:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Loc):
        v = _read(s.store, e.path[0])
        for f in e.path[1:]:
            if v is None:
                raise _Deref()
            v = _read(s.store, (v, f))
        return v
    if isinstance(e, New):
        a = T.addr(s.next_address)
        s.next_address += 1
        for f, fe in e.fields:
            s.store[(a, f)] = _eval(fe, s)
        return a
    if isinstance(e, Un):
        v = _eval(e.arg, s)
        return (not v) if e.op == "not" else -v
    op = e.op
    if op == "and":
        return bool(_eval(e.left, s)) and bool(_eval(e.right, s))
    if op == "or":
        return bool(_eval(e.left, s)) or bool(_eval(e.right, s))
    a, b = _eval(e.left, s), _eval(e.right, s)
    if op == "=":
        return a is b if (a is None or isinstance(a, T.Addr)) else a == b
    if op == "!=":
        return a is not b if (a is None or isinstance(a, T.Addr)) else a != b
    try:
        return {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b, "<": lambda: a < b,
                "<=": lambda: a <= b, ">": lambda: a > b, ">=": lambda: a >= b}[op]()
    except TypeError as exc:
        raise DynamicTypeError(str(exc)) from None


def _target(l: Loc, s: ConcreteState) -> Any:
    if len(l.path) == 1:
        return l.path[0]
    base = _eval(Loc(l.path[:-1]), s)
    if base is None:
        raise _Deref()
    return (base, l.path[-1])


def concrete_step(p: Program, s: ConcreteState) -> Any:
    """Execute one instruction in place; returns a terminal outcome or None."""
    i = s.pc_index
    ins = p.statements[i].instr
    try:
        if isinstance(ins, Halt):
            return Halted(s)
        if isinstance(ins, Fail):
            return Failed(i)
        if isinstance(ins, Skip):
            s.pc_index = i + 1
        elif isinstance(ins, Assign):
            v = _eval(ins.expr, s)
            s.store[_target(ins.target, s)] = v
            s.pc_index = i + 1
        elif isinstance(ins, Goto):
            for g, lab in ins.arms:
                if _eval(g, s):
                    s.pc_index = p.labels[lab]
                    break
            else:
                s.pc_index = i + 1
    except _Deref:
        return NullDeref(i)
    return None


def concrete_run(p: Program, s0: ConcreteState, fuel: int = 10_000) -> Halted | Failed | NullDeref | OutOfFuel:
    s = s0.copy()
    for _ in range(fuel):
        out = concrete_step(p, s)
        if out is not None:
            return out
    return OutOfFuel(fuel)
