"""Symbolic terms, guards and guarded unions.

Every term is hash-consed: constructing a structurally equal term twice
returns the same object, so identity doubles as syntactic equality of
normal forms. Smart constructors normalise eagerly: linear arithmetic is
kept as a constant plus a coefficient map, guards are kept in negation
normal form, and unions are flattened, pruned and grouped by value.

Sorts are ``int``, ``bool``, ``ptr`` (null and addresses) and ``loc``
(program variables and fields). A lazy cell ``LI(src, x)`` has the sort of
the value stored at ``x``; a boolean cell is a guard atom.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator

INT, BOOL, PTR, LOC = "int", "bool", "ptr", "loc"
VALUE_SORTS = (INT, BOOL, PTR)


class SortError(TypeError):
    pass


class Undefined(Exception):
    """Raised when a union evaluates with no arm whose guard holds."""


class Demand(Exception):
    """Raised by a demand-driven substitution on a missing input cell."""

    def __init__(self, key: Any, vsort: str):
        super().__init__(key)
        self.key = key
        self.vsort = vsort


_table: dict[tuple, Term] = {}
_uids = itertools.count()


def _intern(cls: type, *fields: Any) -> Any:
    key = (cls, fields)
    got = _table.get(key)
    if got is None:
        got = cls(next(_uids), *fields)
        _table[key] = got
    return got


class Term:
    __slots__ = ()
    uid: int
    sort: str

    def __repr__(self) -> str:
        return show(self)

    def __lt__(self, other: Term) -> bool:
        return self.uid < other.uid


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Lin(Term):
    uid: int
    const: int
    items: tuple[tuple[Term, int], ...]

    @property
    def sort(self) -> str:
        return INT


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Mul(Term):
    uid: int
    left: Lin
    right: Lin

    @property
    def sort(self) -> str:
        return INT


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Null(Term):
    uid: int

    @property
    def sort(self) -> str:
        return PTR


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Addr(Term):
    uid: int
    n: int
    epoch: int
    loop: bool

    @property
    def sort(self) -> str:
        return PTR


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Var(Term):
    uid: int
    name: str
    vsort: str

    @property
    def sort(self) -> str:
        return LOC


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Field(Term):
    uid: int
    base: Term
    name: str
    vsort: str

    @property
    def sort(self) -> str:
        return LOC


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Cell(Term):
    """Lazy instantiation of ``loc`` in the context described by ``src``.

    ``src`` is None for the empty heap; otherwise it is a generalized heap.
    """

    uid: int
    src: Any
    loc: Term

    @property
    def sort(self) -> str:
        return self.loc.vsort


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Union(Term):
    uid: int
    arms: tuple[tuple[Term, Term], ...]
    usort: str

    @property
    def sort(self) -> str:
        return self.usort


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Const(Term):
    uid: int
    value: bool

    @property
    def sort(self) -> str:
        return BOOL


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class EqZ(Term):
    """``lin = 0``."""

    uid: int
    lin: Lin

    @property
    def sort(self) -> str:
        return BOOL


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class LtZ(Term):
    """``lin < 0``."""

    uid: int
    lin: Lin

    @property
    def sort(self) -> str:
        return BOOL


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class EqLoc(Term):
    """Equality of two pointer terms, operands ordered by uid."""

    uid: int
    left: Term
    right: Term

    @property
    def sort(self) -> str:
        return BOOL


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Not(Term):
    uid: int
    arg: Term

    @property
    def sort(self) -> str:
        return BOOL


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class And(Term):
    uid: int
    args: tuple[Term, ...]

    @property
    def sort(self) -> str:
        return BOOL


@dataclass(frozen=True, slots=True, eq=False, repr=False)
class Or(Term):
    uid: int
    args: tuple[Term, ...]

    @property
    def sort(self) -> str:
        return BOOL


TOP: Const = _intern(Const, True)
BOT: Const = _intern(Const, False)
NULL: Null = _intern(Null)


def sort_of(t: Term) -> str:
    return t.sort


def value_sort(t: Term) -> str:
    """Sort of the values a term denotes (a location's stored sort for locs)."""
    if t.sort == LOC:
        if isinstance(t, Union):
            return value_sort(t.arms[0][1]) if t.arms else INT
        return t.vsort
    return t.sort


# ---------------------------------------------------------------- atoms


def num(k: int) -> Lin:
    return _intern(Lin, int(k), ())


def null() -> Null:
    return NULL


def addr(n: int, epoch: int = 0, loop: bool = False) -> Addr:
    return _intern(Addr, n, epoch, loop)


def var(name: str, vsort: str = INT) -> Var:
    return _intern(Var, name, vsort)


def boolean(b: bool) -> Const:
    return TOP if b else BOT


def is_const_ptr(t: Term) -> bool:
    return isinstance(t, (Null, Addr))


def _lin_atom(a: Term) -> Lin:
    return _intern(Lin, 0, ((a, 1),))


def field(base: Term, name: str, vsort: str = INT) -> Term:
    if isinstance(base, Union):
        return union([(g, field(b, name, vsort)) for g, b in base.arms], LOC)
    if base.sort != PTR:
        raise SortError(f"field base must be a pointer, got {base.sort}")
    return _intern(Field, base, name, vsort)


def cell(src: Any, loc: Term) -> Term:
    """LI(src, loc), distributed over a union of locations."""
    if isinstance(loc, Union):
        return union([(g, cell(src, l)) for g, l in loc.arms], value_sort(loc))
    if loc.sort != LOC:
        raise SortError(f"cell over non-location {loc.sort}")
    c = _intern(Cell, src, loc)
    if loc.vsort == INT:
        return _lin_atom(c)
    return c


def as_cell(t: Term) -> Cell | None:
    """The cell an int/ptr/bool term consists of, if it is a bare cell."""
    if isinstance(t, Cell):
        return t
    if isinstance(t, Lin) and t.const == 0 and len(t.items) == 1 and t.items[0][1] == 1:
        a = t.items[0][0]
        if isinstance(a, Cell):
            return a
    return None


# ---------------------------------------------------------------- unions


def union(arms: Iterable[tuple[Term, Term]], sort: str | None = None) -> Term:
    flat: list[tuple[Term, Term]] = []
    for g, v in arms:
        if g is BOT:
            continue
        if isinstance(v, Union):
            for g2, v2 in v.arms:
                g3 = and_(g, g2)
                if g3 is not BOT:
                    flat.append((g3, v2))
        else:
            flat.append((g, v))
    if sort is None:
        if not flat:
            raise SortError("cannot infer the sort of an empty union")
        sort = flat[0][1].sort
    for _, v in flat:
        if v.sort != sort:
            raise SortError(f"union arms of mixed sorts {sort} and {v.sort}")
    if sort == BOOL:
        return or_(*[and_(g, v) for g, v in flat])
    groups: dict[Term, list[Term]] = {}
    for g, v in flat:
        groups.setdefault(v, []).append(g)
    out = []
    for v, gs in groups.items():
        g = or_(*gs)
        if g is TOP:
            return v
        if g is not BOT:
            out.append((g, v))
    out.sort(key=lambda a: a[1].uid)
    return _intern(Union, tuple(out), sort)


def arms_of(t: Term) -> tuple[tuple[Term, Term], ...]:
    if isinstance(t, Union):
        return t.arms
    return ((TOP, t),)


def ite(c: Term, a: Term, b: Term) -> Term:
    if c is TOP:
        return a
    if c is BOT:
        return b
    return union([(c, a), (not_(c), b)], a.sort)


def _lift(fn: Callable[..., Term], args: tuple[Term, ...], sort: str) -> Term:
    if not any(isinstance(a, Union) for a in args):
        return fn(*args)
    arms = []
    for combo in itertools.product(*(arms_of(a) for a in args)):
        g = and_(*[c[0] for c in combo])
        if g is BOT:
            continue
        arms.append((g, fn(*[c[1] for c in combo])))
    return union(arms, sort)


# ---------------------------------------------------------------- arithmetic


def _mk_lin(const: int, coefs: dict[Term, int]) -> Lin:
    items = tuple(sorted(((a, k) for a, k in coefs.items() if k), key=lambda i: i[0].uid))
    return _intern(Lin, const, items)


def _check_int(*ts: Term) -> None:
    for t in ts:
        if t.sort != INT:
            raise SortError(f"arithmetic over {t.sort}")


def _add(a: Lin, b: Lin) -> Lin:
    if not b.items:
        if not b.const:
            return a
        return _intern(Lin, a.const + b.const, a.items)
    if not a.items:
        return _intern(Lin, a.const + b.const, b.items) if a.const else b
    coefs = dict(a.items)
    for x, k in b.items:
        coefs[x] = coefs.get(x, 0) + k
    return _mk_lin(a.const + b.const, coefs)


def _scale(a: Lin, k: int) -> Lin:
    if k == 1:
        return a
    if k == 0:
        return num(0)
    return _intern(Lin, a.const * k, tuple((x, c * k) for x, c in a.items))


def add(*ts: Term) -> Term:
    _check_int(*ts)
    out: Term = num(0)
    for t in ts:
        out = _lift(_add, (out, t), INT)
    return out


def scale(t: Term, k: int) -> Term:
    _check_int(t)
    return _lift(lambda a: _scale(a, k), (t,), INT)


def neg(t: Term) -> Term:
    return scale(t, -1)


def sub(a: Term, b: Term) -> Term:
    return add(a, neg(b))


def _mul(a: Lin, b: Lin) -> Lin:
    if not a.items:
        return _scale(b, a.const)
    if not b.items:
        return _scale(a, b.const)
    left, right = (a, b) if a.uid <= b.uid else (b, a)
    return _lin_atom(_intern(Mul, left, right))


def mul(a: Term, b: Term) -> Term:
    _check_int(a, b)
    return _lift(_mul, (a, b), INT)


# ---------------------------------------------------------------- guards


def _eqz(lin: Lin) -> Term:
    if not lin.items:
        return boolean(lin.const == 0)
    g = 0
    for _, k in lin.items:
        g = math.gcd(g, k)
    if lin.const % g:
        return BOT
    sign = -1 if lin.items[0][1] < 0 else 1
    if g != 1 or sign != 1:
        lin = _intern(Lin, sign * lin.const // g, tuple((x, sign * k // g) for x, k in lin.items))
    return _intern(EqZ, lin)


def _ltz(lin: Lin) -> Term:
    if not lin.items:
        return boolean(lin.const < 0)
    g = 0
    for _, k in lin.items:
        g = math.gcd(g, k)
    if g != 1:
        lin = _intern(Lin, lin.const // g, tuple((x, k // g) for x, k in lin.items))
    return _intern(LtZ, lin)


def _eq_ptr(a: Term, b: Term) -> Term:
    if a is b:
        return TOP
    if is_const_ptr(a) and is_const_ptr(b):
        return BOT
    if a.uid > b.uid:
        a, b = b, a
    return _intern(EqLoc, a, b)


def _eq_loc(a: Term, b: Term) -> Term:
    if a is b:
        return TOP
    if isinstance(a, Var) or isinstance(b, Var):
        return BOT
    if a.name != b.name:
        return BOT
    return eq(a.base, b.base)


def eq(a: Term, b: Term) -> Term:
    sa, sb = a.sort, b.sort
    if sa != sb:
        raise SortError(f"equality between {sa} and {sb}")
    if sa == INT:
        return _lift(lambda x, y: _eqz(_add(x, _scale(y, -1))), (a, b), BOOL)
    if sa == PTR:
        return _lift(_eq_ptr, (a, b), BOOL)
    if sa == LOC:
        return _lift(_eq_loc, (a, b), BOOL)
    return or_(and_(a, b), and_(not_(a), not_(b)))


def ne(a: Term, b: Term) -> Term:
    return not_(eq(a, b))


def lt(a: Term, b: Term) -> Term:
    _check_int(a, b)
    return _lift(lambda x, y: _ltz(_add(x, _scale(y, -1))), (a, b), BOOL)


def le(a: Term, b: Term) -> Term:
    return not_(lt(b, a))


def gt(a: Term, b: Term) -> Term:
    return lt(b, a)


def ge(a: Term, b: Term) -> Term:
    return not_(lt(a, b))


_not_cache: dict[Term, Term] = {}


def not_(g: Term) -> Term:
    got = _not_cache.get(g)
    if got is not None:
        return got
    if g.sort != BOOL:
        raise SortError(f"negation of {g.sort}")
    if isinstance(g, Const):
        r = boolean(not g.value)
    elif isinstance(g, LtZ):
        r = _ltz(_add(_scale(g.lin, -1), num(-1)))
    elif isinstance(g, Not):
        r = g.arg
    elif isinstance(g, And):
        r = or_(*[not_(a) for a in g.args])
    elif isinstance(g, Or):
        r = and_(*[not_(a) for a in g.args])
    else:
        r = _intern(Not, g)
    _not_cache[g] = r
    _not_cache[r] = g
    return r


def _parts(g: Term, cls: type) -> frozenset[Term]:
    return frozenset(g.args) if isinstance(g, cls) else frozenset((g,))


def _nary(cls: type, unit: Const, zero: Const, args: tuple[Term, ...]) -> Term:
    flat: set[Term] = set()
    for a in args:
        if a is zero:
            return zero
        if a is unit:
            continue
        if a.sort != BOOL:
            raise SortError(f"connective over {a.sort}")
        if isinstance(a, cls):
            flat.update(a.args)
        else:
            flat.add(a)
    for a in flat:
        if not isinstance(a, (And, Or)) and not_(a) in flat:
            return zero
    dual = Or if cls is And else And
    items = {a: _parts(a, dual) for a in flat}
    changed = True
    while changed and len(items) > 1:
        changed = False
        keys = sorted(items, key=lambda t: t.uid)
        for i, a in enumerate(keys):
            pa = items[a]
            for b in keys[i + 1 :]:
                pb = items[b]
                if pa <= pb:
                    del items[b]
                    changed = True
                    break
                if pb <= pa:
                    del items[a]
                    changed = True
                    break
                if len(pa) == len(pb):
                    da, db = pa - pb, pb - pa
                    if len(da) == 1 and len(db) == 1:
                        (x,) = da
                        (y,) = db
                        if not isinstance(x, (And, Or)) and not_(x) is y:
                            del items[a], items[b]
                            rest = pa & pb
                            merged = _join(dual, rest, unit if dual is Or else zero)
                            if merged is zero:
                                return zero
                            if merged is not unit:
                                items[merged] = _parts(merged, dual)
                            changed = True
                            break
            if changed:
                break
    if not items:
        return unit
    if len(items) == 1:
        return next(iter(items))
    return _intern(cls, tuple(sorted(items, key=lambda t: t.uid)))


def _join(cls: type, parts: frozenset[Term], empty: Const) -> Term:
    if not parts:
        return empty
    if len(parts) == 1:
        return next(iter(parts))
    return and_(*parts) if cls is And else or_(*parts)


_and_cache: dict[tuple, Term] = {}
_or_cache: dict[tuple, Term] = {}


def and_(*args: Term) -> Term:
    if len(args) == 2:
        a, b = args
        if a is TOP:
            return b
        if b is TOP or a is b:
            return a
    key = args
    got = _and_cache.get(key)
    if got is None:
        got = _nary(And, TOP, BOT, args)
        _and_cache[key] = got
    return got


def or_(*args: Term) -> Term:
    if len(args) == 2:
        a, b = args
        if a is BOT:
            return b
        if b is BOT or a is b:
            return a
    key = args
    got = _or_cache.get(key)
    if got is None:
        got = _nary(Or, BOT, TOP, args)
        _or_cache[key] = got
    return got


def implies(a: Term, b: Term) -> Term:
    return or_(not_(a), b)


# ---------------------------------------------------------------- traversal


def children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, Lin):
        return tuple(a for a, _ in t.items)
    if isinstance(t, (Mul, EqLoc)):
        return (t.left, t.right)
    if isinstance(t, Cell):
        return (t.loc,)
    if isinstance(t, Field):
        return (t.base,)
    if isinstance(t, Union):
        return tuple(x for arm in t.arms for x in arm)
    if isinstance(t, (EqZ, LtZ)):
        return (t.lin,)
    if isinstance(t, Not):
        return (t.arg,)
    if isinstance(t, (And, Or)):
        return t.args
    return ()


def subterms(t: Term) -> Iterator[Term]:
    seen: set[Term] = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        yield x
        stack.extend(children(x))


def cells_of(t: Term) -> list[Cell]:
    return [x for x in subterms(t) if isinstance(x, Cell)]


def int_constants(t: Term) -> set[int]:
    out: set[int] = set()
    for x in subterms(t):
        if isinstance(x, Lin):
            out.add(x.const)
            out.add(-x.const)
    return out


def addresses(t: Term) -> set[Addr]:
    return {x for x in subterms(t) if isinstance(x, Addr)}


def depth(t: Term) -> int:
    ch = children(t)
    return 1 + max((depth(c) for c in ch), default=0)


def transform(
    t: Term,
    on_cell: Callable[[Any, Term], Term],
    on_addr: Callable[[Addr], Term] | None = None,
    memo: dict[Term, Term] | None = None,
) -> Term:
    """Rebuild ``t`` bottom-up, replacing cells and (optionally) addresses.

    ``on_cell(src, loc)`` receives the already-transformed location, which
    is never a union, and must return a term of the cell's sort.
    """
    if memo is None:
        memo = {}

    def go(x: Term) -> Term:
        got = memo.get(x)
        if got is not None:
            return got
        if isinstance(x, Lin):
            r: Term = num(x.const)
            for a, k in x.items:
                r = add(r, scale(go(a), k))
        elif isinstance(x, Cell):
            loc = go(x.loc)
            if isinstance(loc, Union):
                r = union([(g, on_cell(x.src, l)) for g, l in loc.arms], x.sort)
            else:
                r = on_cell(x.src, loc)
        elif isinstance(x, Mul):
            r = mul(go(x.left), go(x.right))
        elif isinstance(x, Field):
            r = field(go(x.base), x.name, x.vsort)
        elif isinstance(x, Addr):
            r = on_addr(x) if on_addr is not None else x
        elif isinstance(x, Union):
            r = union([(go(g), go(v)) for g, v in x.arms], x.sort)
        elif isinstance(x, EqZ):
            r = eq(go(x.lin), num(0))
        elif isinstance(x, LtZ):
            r = lt(go(x.lin), num(0))
        elif isinstance(x, EqLoc):
            r = eq(go(x.left), go(x.right))
        elif isinstance(x, Not):
            r = not_(go(x.arg))
        elif isinstance(x, And):
            r = and_(*[go(a) for a in x.args])
        elif isinstance(x, Or):
            r = or_(*[go(a) for a in x.args])
        else:
            r = x
        memo[x] = r
        return r

    return go(t)


# ---------------------------------------------------------------- ground evaluation


_source_runner: list[Callable[..., Any]] = []


def register_source_runner(fn: Callable[..., Any]) -> None:
    """Install the evaluator for cells whose source is a non-empty heap."""
    _source_runner[:] = [fn]


def _zero(vsort: str) -> Any:
    return {INT: 0, BOOL: False, PTR: None}[vsort]


class GroundSubstitution:
    """A ground input store with a policy for cells it does not define.

    Keys are ground locations: a variable name, or ``(address, field)``
    where address is an :class:`Addr` or None for null. ``fill`` is called
    on a miss and its answer is memoised; the default raises
    :class:`Demand`.
    """

    def __init__(
        self,
        store: dict[Any, Any] | None = None,
        fill: Callable[[Any, str], Any] | None = None,
    ):
        self.store: dict[Any, Any] = dict(store or {})
        self.fill = fill
        self.cache: dict[Any, Any] = {}

    def base(self, key: Any, vsort: str) -> Any:
        if key in self.store:
            return self.store[key]
        if self.fill is None:
            raise Demand(key, vsort)
        v = self.fill(key, vsort)
        self.store[key] = v
        return v

    def read(self, src: Any, key: Any, vsort: str) -> Any:
        if src is None:
            return self.base(key, vsort)
        (runner,) = _source_runner
        return runner(self, src, key, vsort)

    def addr(self, a: Addr) -> Addr:
        return a


def random_fill(rng: random.Random, ints: Iterable[int] = range(-3, 4),
                ptrs: Iterable[Any] = (None,)) -> Callable[[Any, str], Any]:
    ints = sorted(set(ints))
    ptrs = list(ptrs)

    def fill(key: Any, vsort: str) -> Any:
        if vsort == INT:
            return rng.choice(ints)
        if vsort == BOOL:
            return rng.random() < 0.5
        return rng.choice(ptrs)

    return fill


def constant_fill(i: int, b: bool, p: Any) -> Callable[[Any, str], Any]:
    def fill(key: Any, vsort: str) -> Any:
        return {INT: i, BOOL: b, PTR: p}[vsort]

    return fill


def evaluate(t: Term, sub: GroundSubstitution) -> Any:
    """Ground value of ``t``: int, bool, None (null), Addr or a location key."""
    if isinstance(t, Lin):
        v = t.const
        for a, k in t.items:
            v += k * evaluate(a, sub)
        return v
    if isinstance(t, Cell):
        return sub.read(t.src, evaluate(t.loc, sub), t.sort)
    if isinstance(t, Const):
        return t.value
    if isinstance(t, EqZ):
        return evaluate(t.lin, sub) == 0
    if isinstance(t, LtZ):
        return evaluate(t.lin, sub) < 0
    if isinstance(t, EqLoc):
        return evaluate(t.left, sub) is evaluate(t.right, sub)
    if isinstance(t, Not):
        return not evaluate(t.arg, sub)
    if isinstance(t, And):
        return all(evaluate(a, sub) for a in t.args)
    if isinstance(t, Or):
        return any(evaluate(a, sub) for a in t.args)
    if isinstance(t, Union):
        for g, v in t.arms:
            if evaluate(g, sub):
                return evaluate(v, sub)
        raise Undefined(show(t))
    if isinstance(t, Null):
        return None
    if isinstance(t, Addr):
        return sub.addr(t)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Field):
        return (evaluate(t.base, sub), t.name)
    if isinstance(t, Mul):
        return evaluate(t.left, sub) * evaluate(t.right, sub)
    raise TypeError(f"cannot evaluate {t!r}")


def evaluate_or_undefined(t: Term, sub: GroundSubstitution) -> Any:
    try:
        return evaluate(t, sub)
    except Undefined:
        return Undefined


# ---------------------------------------------------------------- semantic equality


@dataclass(frozen=True, slots=True)
class Equal:
    pass


@dataclass(frozen=True, slots=True)
class NotEqual:
    witness: dict


@dataclass(frozen=True, slots=True)
class Unknown:
    reason: str = "no distinguishing sample"


def sample_pools(*ts: Term) -> tuple[list[int], list[Any]]:
    ints = set(range(-3, 4))
    ptrs: list[Any] = [None]
    seen: set[Addr] = set()
    for t in ts:
        ints |= int_constants(t)
        seen |= addresses(t)
    ptrs.extend(sorted(seen, key=lambda a: (a.n, a.epoch, a.loop)))
    ptrs.extend(addr(n) for n in (1, 2, 3) if addr(n) not in seen)
    return sorted(ints), ptrs


def substitutions(ts: Iterable[Term], budget: int, rng: random.Random) -> Iterator[GroundSubstitution]:
    """Boundary substitutions first (all zero, all one), then random ones."""
    ts = list(ts)
    ints, ptrs = sample_pools(*ts)
    yield GroundSubstitution(fill=constant_fill(0, False, None))
    yield GroundSubstitution(fill=constant_fill(1, True, ptrs[1] if len(ptrs) > 1 else None))
    for _ in range(max(0, budget - 2)):
        yield GroundSubstitution(fill=random_fill(rng, ints, ptrs))


def sem_equal(a: Term, b: Term, budget: int = 64, rng: random.Random | None = None) -> Equal | NotEqual | Unknown:
    if a is b:
        return Equal()
    rng = rng or random.Random(0)
    for s in substitutions((a, b), budget, rng):
        va = evaluate_or_undefined(a, s)
        vb = evaluate_or_undefined(b, s)
        if va is Undefined or vb is Undefined:
            if va is not vb:
                return NotEqual(dict(s.store))
            continue
        if va != vb or (a.sort == PTR and va is not vb):
            return NotEqual(dict(s.store))
    return Unknown()


# ---------------------------------------------------------------- printing

_heap_printer: list[Callable[[Any], str]] = [lambda h: repr(h)]


def register_heap_printer(fn: Callable[[Any], str]) -> None:
    _heap_printer[:] = [fn]


def show_addr(a: Addr) -> str:
    s = f"0x{a.n:x}"
    return f"{s}#{a.epoch}" if a.loop else s


def _show_lin_parts(items: Iterable[tuple[Term, int]]) -> list[tuple[int, str]]:
    out = []
    for a, k in items:
        s = show(a)
        if isinstance(a, Mul):
            s = f"({s})"
        out.append((k, s))
    return out


def _join_signed(parts: list[tuple[int, str]], const: int) -> str:
    text = ""
    for k, s in parts:
        mag = abs(k)
        body = s if mag == 1 else f"{mag}*{s}"
        if not text:
            text = body if k > 0 else f"-{body}"
        else:
            text += f" + {body}" if k > 0 else f" - {body}"
    if not text:
        return str(const)
    if const > 0:
        text += f" + {const}"
    elif const < 0:
        text += f" - {-const}"
    return text


def show_lin(lin: Lin) -> str:
    return _join_signed(_show_lin_parts(lin.items), lin.const)


def _show_rel(lin: Lin, op: str, strict_shift: bool) -> str:
    pos = [(k, a) for a, k in lin.items if k > 0]
    negs = [(-k, a) for a, k in lin.items if k < 0]
    k = lin.const
    if pos:
        left = _join_signed(_show_lin_parts((a, c) for c, a in pos), 0)
        right = _join_signed(_show_lin_parts((a, c) for c, a in negs), -k)
        return f"{left} {op} {right}"
    # only negative coefficients: -N + k < 0  <=>  N >= k + 1
    left = _join_signed(_show_lin_parts((a, c) for c, a in negs), 0)
    if op == "<":
        return f"{left} ≥ {k + 1}"
    return f"{left} {op} {k}"


def show(t: Term) -> str:
    if isinstance(t, Lin):
        return show_lin(t)
    if isinstance(t, Cell):
        if t.src is None:
            return f"LI({show(t.loc)})"
        return f"LI({_heap_printer[0](t.src)}, {show(t.loc)})"
    if isinstance(t, Mul):
        return f"{_paren_arith(t.left)} * {_paren_arith(t.right)}"
    if isinstance(t, Null):
        return "null"
    if isinstance(t, Addr):
        return show_addr(t)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Field):
        return f"{show(t.base)}.{t.name}"
    if isinstance(t, Union):
        return "union(" + ", ".join(f"⟨{show(g)}, {show(v)}⟩" for g, v in t.arms) + ")"
    if isinstance(t, Const):
        return "⊤" if t.value else "⊥"
    if isinstance(t, EqZ):
        return _show_rel(t.lin, "=", False)
    if isinstance(t, LtZ):
        return _show_rel(t.lin, "<", True)
    if isinstance(t, EqLoc):
        a, b = _loc_sides(t)
        return f"{a} = {b}"
    if isinstance(t, Not):
        a = t.arg
        if isinstance(a, EqZ):
            return _show_rel(a.lin, "≠", False)
        if isinstance(a, EqLoc):
            x, y = _loc_sides(a)
            return f"{x} ≠ {y}"
        return f"¬{show(a)}"
    if isinstance(t, And):
        return " ∧ ".join(f"({show(a)})" if isinstance(a, Or) else show(a) for a in t.args)
    if isinstance(t, Or):
        return " ∨ ".join(show(a) for a in t.args)
    return object.__repr__(t)


def _loc_sides(t: EqLoc) -> tuple[str, str]:
    a, b = t.left, t.right
    if is_const_ptr(a) and not is_const_ptr(b):
        a, b = b, a
    return show(a), show(b)


def _paren_arith(t: Term) -> str:
    s = show(t)
    if isinstance(t, Lin) and (len(t.items) > 1 or (t.items and t.const)):
        return f"({s})"
    return s


# ---------------------------------------------------------------- parsing


class ParseError(ValueError):
    pass


_SYMBOLS = [
    "|->", "->", "<=", ">=", "!=", "&&", "||", "↦", "≠", "≤", "≥", "∧", "∨", "¬", "⊤", "⊥",
    "⟨", "⟩", "(", ")", "{", "}", ",", ";", ".", "+", "-", "−", "*", "=", "<", ">", "!", "ε", "∘",
]
_ALIASES = {"−": "-", "|->": "↦", "->": "↦", "<=": "≤", ">=": "≥", "!=": "≠", "&&": "∧",
            "||": "∨", "!": "¬", "and": "∧", "or": "∨", "not": "¬", "true": "⊤", "false": "⊥"}


def tokenize(text: str) -> list[tuple[str, Any, int]]:
    toks: list[tuple[str, Any, int]] = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "0" and text[i + 1 : i + 2] in ("x", "X"):
            j = i + 2
            while j < len(text) and text[j] in "0123456789abcdefABCDEF":
                j += 1
            n = int(text[i + 2 : j], 16)
            epoch = None
            if text[j : j + 1] == "#":
                k = j + 1
                while k < len(text) and text[k].isdigit():
                    k += 1
                epoch = int(text[j + 1 : k])
                j = k
            toks.append(("addr", (n, epoch), i))
            i = j
            continue
        if c.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            toks.append(("num", int(text[i:j]), i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in _ALIASES:
                toks.append(("sym", _ALIASES[word], i))
            else:
                toks.append(("id", word, i))
            i = j
            continue
        for s in _SYMBOLS:
            if text.startswith(s, i):
                toks.append(("sym", _ALIASES.get(s, s), i))
                i += len(s)
                break
        else:
            raise ParseError(f"unexpected character {c!r} at {i}")
    toks.append(("eof", None, len(text)))
    return toks


_heap_parser: list[Callable[[TermParser], Any]] = []


def register_heap_parser(fn: Callable[[TermParser], Any]) -> None:
    """Install a parser for non-empty cell sources ``LI(<heap>, x)``."""
    _heap_parser[:] = [fn]


class TermParser:
    """Recursive-descent parser for printed terms and guards.

    ``sorts`` maps variable and field names to their stored sort; names
    that are absent default to ``int`` unless the context forces a pointer.
    """

    def __init__(self, text: str, sorts: dict[str, str] | None = None):
        self.toks = tokenize(text)
        self.i = 0
        self.sorts = sorts or {}

    def peek(self, k: int = 0) -> tuple[str, Any, int]:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, value: str) -> bool:
        kind, v, _ = self.peek()
        return kind in ("sym", "id") and v == value

    def take(self, value: str | None = None) -> tuple[str, Any, int]:
        tok = self.peek()
        if value is not None and not (tok[0] in ("sym", "id") and tok[1] == value):
            raise ParseError(f"expected {value!r} at {tok[2]}, found {tok[1]!r}")
        self.i += 1
        return tok

    def done(self) -> None:
        if self.peek()[0] != "eof":
            raise ParseError(f"trailing input at {self.peek()[2]}")

    def term(self) -> Term:
        return self.disj()

    def disj(self) -> Term:
        t = self.conj()
        while self.at("∨"):
            self.take()
            t = or_(t, self.conj())
        return t

    def conj(self) -> Term:
        t = self.neg()
        while self.at("∧"):
            self.take()
            t = and_(t, self.neg())
        return t

    def neg(self) -> Term:
        if self.at("¬"):
            self.take()
            return not_(self.neg())
        return self.cmp()

    def cmp(self) -> Term:
        a = self.sum()
        kind, op, _ = self.peek()
        if kind == "sym" and op in ("=", "≠", "<", "≤", ">", "≥"):
            self.take()
            b = self.sum()
            a, b = _unify(a, b)
            if op == "=":
                return eq(a, b)
            if op == "≠":
                return ne(a, b)
            return {"<": lt, "≤": le, ">": gt, "≥": ge}[op](a, b)
        return a

    def sum(self) -> Term:
        t = self.prod()
        while self.at("+") or self.at("-"):
            op = self.take()[1]
            r = self.prod()
            t = add(t, r) if op == "+" else sub(t, r)
        return t

    def prod(self) -> Term:
        t = self.unary()
        while self.at("*"):
            self.take()
            t = mul(t, self.unary())
        return t

    def unary(self) -> Term:
        if self.at("-"):
            self.take()
            return neg(self.unary())
        return self.postfix()

    def postfix(self) -> Term:
        t = self.primary()
        while self.at("."):
            self.take()
            name = self.take()[1]
            t = field(_as_ptr(t), name, self.sorts.get(name, INT))
        return t

    def primary(self) -> Term:
        kind, v, pos = self.peek()
        if kind == "num":
            self.take()
            return num(v)
        if kind == "addr":
            self.take()
            n, epoch = v
            return addr(n, epoch or 0, epoch is not None)
        if kind == "sym":
            if v == "⊤":
                self.take()
                return TOP
            if v == "⊥":
                self.take()
                return BOT
            if v == "(":
                self.take()
                t = self.term()
                self.take(")")
                return t
        if kind == "id":
            if v == "null":
                self.take()
                return NULL
            if v == "LI" and self.peek(1)[1] == "(":
                self.take()
                self.take("(")
                src = None
                if self.at("ε") and self.peek(1)[1] == ",":
                    self.take()
                    self.take(",")
                elif _heap_parser and self._src_ahead():
                    src = _heap_parser[0](self)
                    self.take(",")
                loc = self.term()
                self.take(")")
                if loc.sort != LOC:
                    raise ParseError(f"LI over non-location at {pos}")
                return cell(src, loc)
            if v == "union" and self.peek(1)[1] == "(":
                self.take()
                self.take("(")
                arms = []
                while not self.at(")"):
                    self.take("⟨")
                    g = self.term()
                    self.take(",")
                    val = self.term()
                    self.take("⟩")
                    arms.append((g, val))
                    if self.at(","):
                        self.take()
                arms = _unify_arms(arms)
                self.take(")")
                return union(arms, arms[0][1].sort if arms else INT)
            self.take()
            return var(v, self.sorts.get(v, INT))
        raise ParseError(f"unexpected token {v!r} at {pos}")

    def _src_ahead(self) -> bool:
        kind, v, _ = self.peek()
        return kind == "id" and v in ("Rec", "merge", "write") or (kind == "sym" and v in ("{", "ε"))


def _retype_loc(loc: Term, vsort: str) -> Term:
    if isinstance(loc, Var):
        return var(loc.name, vsort)
    if isinstance(loc, Field):
        return field(loc.base, loc.name, vsort)
    if isinstance(loc, Union):
        return union([(g, _retype_loc(l, vsort)) for g, l in loc.arms], LOC)
    raise SortError("not a location")


def _as_ptr(t: Term) -> Term:
    """Coerce an int-sorted bare cell to the pointer cell of the same location."""
    if t.sort == PTR:
        return t
    c = as_cell(t)
    if c is not None:
        return cell(c.src, _retype_loc(c.loc, PTR))
    if isinstance(t, Union):
        return union([(g, _as_ptr(v)) for g, v in t.arms], PTR)
    raise SortError(f"expected a pointer, got {show(t)}")


def _as_bool(t: Term) -> Term:
    c = as_cell(t)
    if c is not None:
        return cell(c.src, _retype_loc(c.loc, BOOL))
    raise SortError(f"expected a boolean, got {show(t)}")


def coerce(t: Term, sort: str) -> Term:
    if t.sort == sort:
        return t
    if sort == PTR:
        return _as_ptr(t)
    if sort == BOOL:
        return _as_bool(t)
    if sort == LOC:
        raise SortError("cannot coerce to a location")
    raise SortError(f"cannot coerce {t.sort} to {sort}")


def _unify(a: Term, b: Term) -> tuple[Term, Term]:
    if a.sort == b.sort:
        return a, b
    if PTR in (a.sort, b.sort):
        return _as_ptr(a), _as_ptr(b)
    if BOOL in (a.sort, b.sort):
        return coerce(a, BOOL), coerce(b, BOOL)
    raise SortError(f"cannot compare {a.sort} with {b.sort}")


def _unify_arms(arms: list[tuple[Term, Term]]) -> list[tuple[Term, Term]]:
    sorts = {v.sort for _, v in arms}
    if len(sorts) <= 1:
        return arms
    target = PTR if PTR in sorts else BOOL if BOOL in sorts else LOC
    return [(g, coerce(v, target)) for g, v in arms]


def parse_term(text: str, sorts: dict[str, str] | None = None) -> Term:
    p = TermParser(text, sorts)
    t = p.term()
    p.done()
    return t
