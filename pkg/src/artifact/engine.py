"""Compositional symbolic execution over generalized heaps.

``exec_region`` runs the worklist algorithm from a start vertex or from a
recursive vertex. A state keeps its heap as ``prefix ∘ delta``: ``prefix``
is a generalized heap ending in a recursion symbol or a merge, and
``delta`` is the definite effect since then. Expressions are evaluated
against ``delta``; guards are lifted to the region input by refining with
``prefix`` before they join the path condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from . import genheap as G
from . import heap as Hp
from . import lang as L
from . import solver as S
from . import terms as T
from .genheap import EPSD, BodyTable, Heap, RecId
from .heap import EPS, SymbolicHeap
from .terms import BOT, TOP, Term

Oracle = Callable[[Term, BodyTable], S.Verdict]
ALLOC_BASE = L.NEW_BASE


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class ExecutionState:
    l: int
    pc: Term
    prefix: Heap
    delta: SymbolicHeap
    visited: frozenset

    @property
    def sigma(self) -> Heap:
        return G.compose(self.prefix, G.definite(self.delta))


@dataclass(frozen=True, slots=True)
class ErrorReport:
    kind: str  # "Fail" or "NullDeref"
    instruction: int
    line: int
    pc: Term
    unknown: bool = False


@dataclass
class VerificationReport:
    errors: list[ErrorReport] = field(default_factory=list)
    result: Heap = EPSD
    halt_pc: Term = BOT
    bodies: BodyTable = field(default_factory=BodyTable)
    warnings: list[str] = field(default_factory=list)

    @property
    def safe(self) -> bool:
        return not self.errors

    def add_error(self, e: ErrorReport) -> None:
        if all((x.kind, x.instruction, x.pc) != (e.kind, e.instruction, e.pc) for x in self.errors):
            self.errors.append(e)

    def to_json(self) -> dict:
        return {
            "safe": self.safe,
            "errors": [
                {"kind": e.kind, "instruction": e.instruction, "line": e.line, "pc_text": T.show(e.pc),
                 "oracle": "unknown" if e.unknown else "sat"}
                for e in self.errors
            ],
            "bodies": [
                {"vertex": rid.vertex, "D": sorted(rid.visited), "heap_text": G.show(h)}
                for rid, h in sorted(self.bodies.items(), key=lambda kv: (kv[0].vertex, sorted(kv[0].visited)))
            ],
        }


def _addr_for(site: int, loop: bool) -> T.Addr:
    return T.addr(ALLOC_BASE + site, 0, loop)


class _Eval:
    """Expression evaluation for one instruction of one state."""

    def __init__(self, eng: Engine, st: ExecutionState, index: int):
        self.eng = eng
        self.prog = eng.program
        self.pc = st.pc
        self.prefix = st.prefix
        self.delta = st.delta
        self.index = index

    def lift(self, g: Term) -> Term:
        return G.refine(self.prefix, g)

    def null_check(self, base: Term, ok: Term) -> Term:
        bad = T.and_(ok, T.eq(base, T.null()))
        if bad is not BOT:
            self.eng.error("NullDeref", self.index, T.and_(self.pc, self.lift(bad)))
        return T.and_(ok, T.ne(base, T.null()))

    def location(self, path: tuple[str, ...], ok: Term) -> tuple[Term, Term]:
        loc = T.var(path[0], self.prog.var_sort(path[0]))
        for f in path[1:]:
            base = Hp.read(self.delta, loc)
            ok = self.null_check(base, ok)
            loc = T.field(base, f, self.prog.field_sort(f))
        return loc, ok

    def expr(self, e: L.Expr, ok: Term) -> tuple[Term, Term]:
        """Value of ``e`` (over the input of ``delta``) and the no-error condition."""
        if isinstance(e, L.Lit):
            if e.value is None:
                return T.null(), ok
            if isinstance(e.value, bool):
                return T.boolean(e.value), ok
            return T.num(e.value), ok
        if isinstance(e, L.Loc):
            loc, ok = self.location(e.path, ok)
            return Hp.read(self.delta, loc), ok
        if isinstance(e, L.New):
            a = _addr_for(e.site, self.eng.loop_sites.get(e.site, False))
            for f, fe in e.fields:
                v, ok = self.expr(fe, ok)
                self.delta = Hp.write(self.delta, T.field(a, f, self.prog.field_sort(f)), v)
            return a, ok
        if isinstance(e, L.Un):
            v, ok = self.expr(e.arg, ok)
            return (T.not_(v) if e.op == "not" else T.neg(v)), ok
        if e.op in ("and", "or"):
            a, ok_a = self.expr(e.left, ok)
            go_on = T.and_(ok_a, a if e.op == "and" else T.not_(a))
            b, ok_b = self.expr(e.right, go_on)
            stop = T.and_(ok_a, T.not_(a) if e.op == "and" else a)
            return (T.and_(a, b) if e.op == "and" else T.or_(a, b)), T.or_(stop, ok_b)
        a, ok = self.expr(e.left, ok)
        b, ok = self.expr(e.right, ok)
        op = {"+": T.add, "-": T.sub, "*": T.mul, "=": T.eq, "!=": T.ne, "<": T.lt, "<=": T.le,
              ">": T.gt, ">=": T.ge}[e.op]
        return op(a, b), ok


class Engine:
    def __init__(self, program: L.Program, cfg: L.Cfg | None = None, oracle: Oracle | None = None,
                 bodies: BodyTable | None = None, epoch_addresses: bool = True):
        self.program = program
        self.cfg = cfg or L.build_cfg(program)
        self.oracle = oracle or S.BoundedOracle()
        self.report = VerificationReport(bodies=bodies if bodies is not None else BodyTable())
        self.recording = False
        cyclic = L.cyclic_vertices(self.cfg)
        self.loop_sites: dict[int, bool] = {}
        for i, st in enumerate(program.statements):
            for site in _sites(st.instr):
                self.loop_sites[site] = i in cyclic
        if not epoch_addresses and any(self.loop_sites.values()):
            raise EngineError("allocation inside a loop requires epoch addresses")
        self.execs = 0

    @property
    def bodies(self) -> BodyTable:
        return self.report.bodies

    def verdict(self, g: Term) -> S.Verdict:
        if g is TOP:
            return S.Sat({})
        if g is BOT:
            return S.Unsat()
        return self.oracle(g, self.bodies)

    def feasible(self, g: Term) -> bool:
        v = self.verdict(g)
        if isinstance(v, S.Unknown):
            self.report.warnings.append(f"oracle unknown ({v.reason}); branch kept")
        return not isinstance(v, S.Unsat)

    def error(self, kind: str, index: int, pc: Term) -> None:
        if not self.recording:
            return
        v = self.verdict(pc)
        if isinstance(v, S.Unsat):
            return
        line = self.program.statements[index].line
        self.report.add_error(ErrorReport(kind, index, line, pc, isinstance(v, S.Unknown)))

    # ------------------------------------------------------------ one instruction

    def step(self, st: ExecutionState) -> list[ExecutionState] | str:
        """Successor states of ``st``; "halt" or "fail" at exits."""
        ins = self.program.statements[st.l].instr
        if isinstance(ins, L.Halt):
            return "halt"
        if isinstance(ins, L.Fail):
            self.error("Fail", st.l, st.pc)
            return "fail"
        ev = _Eval(self, st, st.l)
        if isinstance(ins, L.Skip):
            return [ExecutionState(st.l + 1, st.pc, st.prefix, st.delta, st.visited)]
        if isinstance(ins, L.Assign):
            v, ok = ev.expr(ins.expr, TOP)
            loc, ok = ev.location(ins.target.path, ok)
            delta = Hp.write(ev.delta, loc, v)
            pc = T.and_(st.pc, ev.lift(ok))
            if pc is not st.pc and not self.feasible(pc):
                return []
            return [ExecutionState(st.l + 1, pc, st.prefix, delta, st.visited)]
        assert isinstance(ins, L.Goto)
        out = []
        rest = TOP
        for g, lab in ins.arms:
            reach = T.and_(st.pc, rest)
            if reach is BOT:
                break
            ev.pc = reach
            v, ok = ev.expr(g, TOP)
            taken = ev.lift(T.and_(ok, v))
            cond = T.and_(reach, taken)
            if cond is not BOT and self.feasible(cond):
                out.append(ExecutionState(self.program.target(lab), cond, st.prefix, ev.delta, st.visited))
            rest = T.and_(rest, ev.lift(T.and_(ok, T.not_(v))))
            if isinstance(g, L.Lit) and g.value is True:
                return out
        cond = T.and_(st.pc, rest)
        if cond is not BOT and self.feasible(cond):
            out.append(ExecutionState(st.l + 1, cond, st.prefix, ev.delta, st.visited))
        return out

    # ------------------------------------------------------------ worklist

    def exec_region(self, l0: int, d0: frozenset) -> Heap:
        """The effect of the region entered at ``l0`` with visited set ``d0``."""
        self.execs += 1
        recursive = l0 in self.cfg.recursive and l0 in d0
        own = RecId(l0, d0)
        work: dict[tuple[int, frozenset], ExecutionState] = {
            (l0, d0): ExecutionState(l0, TOP, EPSD, EPS, d0)
        }
        arms: list[tuple[Term, Heap]] = []
        rank = self.cfg.finish_time

        def push(st: ExecutionState) -> None:
            key = (st.l, st.visited)
            old = work.get(key)
            if old is None:
                work[key] = st
            elif old.prefix is EPSD and st.prefix is EPSD:
                delta = Hp.merge([(old.pc, old.delta), (st.pc, st.delta)])
                work[key] = ExecutionState(st.l, T.or_(old.pc, st.pc), EPSD, delta, st.visited)
            else:
                prefix = G.merge([(old.pc, old.sigma), (st.pc, st.sigma)])
                work[key] = ExecutionState(st.l, T.or_(old.pc, st.pc), prefix, EPS, st.visited)

        while work:
            key = min(work, key=lambda k: (rank[k[0]], sorted(k[1])))
            st = work.pop(key)
            res = self.step(st)
            if res == "halt":
                if not recursive:
                    arms.append((st.pc, st.sigma))
                continue
            if res == "fail":
                continue
            for nxt in res:
                lp = nxt.l
                if lp == l0 and recursive:
                    arms.append((nxt.pc, G.compose(nxt.sigma, G.rec(own))))
                elif lp in nxt.visited:
                    continue
                elif lp in self.cfg.recursive:
                    d2 = nxt.visited | {lp}
                    rid = RecId(lp, d2)
                    if rid not in self.bodies:
                        # errors inside a body reappear in the enclosing run
                        saved, self.recording = self.recording, False
                        self.bodies.define(rid, self.exec_region(lp, d2))
                        self.recording = saved
                    push(ExecutionState(lp, nxt.pc, G.compose(nxt.sigma, G.rec(rid)), EPS, d2))
                else:
                    push(nxt)
        if recursive:
            pc_r = T.or_(*[g for g, _ in arms])
            return G.merge(arms + [(T.not_(pc_r), EPSD)])
        self.report.halt_pc = T.or_(*[g for g, _ in arms])
        return G.merge(arms)

    def run(self) -> VerificationReport:
        self.recording = True
        self.report.result = self.exec_region(self.cfg.start, frozenset())
        self.recording = False
        return self.report


def _sites(ins: L.Instr) -> list[int]:
    out: list[int] = []

    def go(e: Any) -> None:
        if isinstance(e, L.New):
            out.append(e.site)
            for _, fe in e.fields:
                go(fe)
        elif isinstance(e, L.Bin):
            go(e.left)
            go(e.right)
        elif isinstance(e, L.Un):
            go(e.arg)

    if isinstance(ins, L.Assign):
        go(ins.expr)
    elif isinstance(ins, L.Goto):
        for g, _ in ins.arms:
            go(g)
    return out


def exec_program(program: L.Program, cfg: L.Cfg, l0: int, d0: frozenset, oracle: Oracle,
                 bodies: BodyTable) -> tuple[Heap, VerificationReport]:
    eng = Engine(program, cfg, oracle, bodies)
    if l0 == cfg.start and not d0:
        rep = eng.run()
        return rep.result, rep
    h = eng.exec_region(l0, frozenset(d0))
    eng.report.result = h
    return h, eng.report


def verify(program: L.Program, oracle: Oracle | None = None, epoch_addresses: bool = True) -> VerificationReport:
    return Engine(program, oracle=oracle, epoch_addresses=epoch_addresses).run()


def eval_sym(program: L.Program, sigma: Heap, e: L.Expr, pc: Term = TOP,
             report: VerificationReport | None = None, oracle: Oracle | None = None) -> tuple[Heap, Term]:
    """Evaluate ``e`` after ``sigma``; null-dereference conditions go to ``report``."""
    eng = Engine(program, oracle=oracle)
    if report is not None:
        eng.report = report
    eng.recording = True
    sigma = G.lift(sigma)
    prefix, delta = (EPSD, sigma.sigma) if isinstance(sigma, G.Definite) else (sigma, EPS)
    ev = _Eval(eng, ExecutionState(0, pc, prefix, delta, frozenset()), 0)
    v, _ = ev.expr(e, TOP)
    return G.compose(prefix, G.definite(ev.delta)), ev.lift(v)
