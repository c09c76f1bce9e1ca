"""Core language objects shared by every interpreter backend.

Programs are expression trees, runtime data are immutable value trees, and
observable behaviour is a trace of published messages.  Both interpreters
(the single-machine reference one and the per-party distributed one) run the
same small-step machine shape: a focused expression or value, a stack of
suspended frames, an environment, a mode, and a trace.

The per-party projection of joint data is done by ``slice_value`` and
friends; ``combine_values`` merges per-party views back together.  These two
families are the workhorses of the simulation and confluence checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union


# ---------------------------------------------------------------------------
# errors

class WysError(Exception):
    """Base for every interpreter-level error."""


class UnboundVariable(WysError):
    pass


class CombineConflict(WysError):
    """Two per-party views disagree on data they should share."""


class DomainMismatch(WysError):
    """Environments being combined bind different variable sets."""


class ModeError(WysError):
    pass


class UnknownFfi(WysError):
    pass


class ArityError(WysError):
    pass


class FfiTypeError(WysError):
    pass


class OpaqueArg(WysError):
    """A host call received a placeholder for another party's data.

    Reaching this means the source program asks a party to compute on data
    it cannot see, a realizability bug in the program rather than a bug in
    the interpreter.
    """


# ---------------------------------------------------------------------------
# principals

Principal = str  # short name token, compared case-sensitively


@dataclass(frozen=True, slots=True)
class PrinSet:
    """Non-empty-by-convention set of principals in canonical sorted order."""

    names: tuple[Principal, ...]

    @staticmethod
    def of(*names: Principal) -> "PrinSet":
        return PrinSet(tuple(sorted(set(names))))

    def __contains__(self, p: Principal) -> bool:
        return p in self.names

    def __iter__(self):
        return iter(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def subset_of(self, other: "PrinSet") -> bool:
        return all(p in other.names for p in self.names)

    def intersects(self, other: "PrinSet") -> bool:
        return any(p in other.names for p in self.names)

    def union(self, other: "PrinSet") -> "PrinSet":
        return PrinSet.of(*self.names, *other.names)

    def is_singleton(self) -> bool:
        return len(self.names) == 1

    def __str__(self) -> str:
        return "{" + ",".join(self.names) + "}"


# ---------------------------------------------------------------------------
# values

class Value:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class PrinVal(Value):
    name: Principal


@dataclass(frozen=True, slots=True)
class PrinsVal(Value):
    ps: PrinSet


@dataclass(frozen=True, slots=True)
class Unit(Value):
    pass


@dataclass(frozen=True, slots=True)
class Bool(Value):
    b: bool


@dataclass(frozen=True, slots=True)
class FfiInt(Value):
    n: int


@dataclass(frozen=True, slots=True)
class FfiStr(Value):
    s: str


@dataclass(frozen=True, slots=True)
class FfiPair(Value):
    fst: Value
    snd: Value


@dataclass(frozen=True, slots=True)
class FfiList(Value):
    items: tuple[Value, ...]


@dataclass(frozen=True, slots=True)
class Sealed(Value):
    """A value addressed to the parties in ``ps``; others see a placeholder."""

    ps: PrinSet
    v: Value


@dataclass(frozen=True, slots=True)
class VMap(Value):
    """Per-principal map, entries kept sorted by principal name."""

    entries: tuple[tuple[Principal, Value], ...]

    @staticmethod
    def of(d: dict[Principal, Value]) -> "VMap":
        return VMap(tuple(sorted(d.items())))

    def get(self, p: Principal) -> Optional[Value]:
        for q, v in self.entries:
            if q == p:
                return v
        return None

    def keys(self) -> tuple[Principal, ...]:
        return tuple(q for q, _ in self.entries)


@dataclass(frozen=True, slots=True)
class Opaque(Value):
    """Placeholder for data a party does not hold."""


@dataclass(frozen=True, slots=True)
class ShareVal(Value):
    """Secret-shared machine word.

    ``words`` maps each holder to its additive (xor) share of the value,
    ``width`` is the bit width of the shared word.  A party's view of a
    handle keeps only its own word; the joint view keeps all of them, and
    xor-ing a complete word set yields the shared value.
    """

    ps: PrinSet
    words: tuple[tuple[Principal, int], ...]  # sorted by principal
    width: int

    @staticmethod
    def of(ps: PrinSet, words: dict[Principal, int], width: int) -> "ShareVal":
        return ShareVal(ps, tuple(sorted(words.items())), width)

    def word_of(self, p: Principal) -> Optional[int]:
        for q, w in self.words:
            if q == p:
                return w
        return None


UNIT = Unit()
TRUE = Bool(True)
FALSE = Bool(False)
OPAQUE = Opaque()


# ---------------------------------------------------------------------------
# expressions

class Expr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Const(Expr):
    v: Value  # literal forms only: principal, set, unit, bool, int, string


@dataclass(frozen=True, slots=True)
class Var(Expr):
    x: str


@dataclass(frozen=True, slots=True)
class Let(Expr):
    x: str
    bound: Expr
    body: Expr


@dataclass(frozen=True, slots=True)
class Lam(Expr):
    x: str
    body: Expr


@dataclass(frozen=True, slots=True)
class Fix(Expr):
    f: str
    x: str
    body: Expr


@dataclass(frozen=True, slots=True)
class App(Expr):
    fn: Expr
    arg: Expr


@dataclass(frozen=True, slots=True)
class If(Expr):
    cond: Expr
    then: Expr
    els: Expr


@dataclass(frozen=True, slots=True)
class AsPar(Expr):
    ps: Expr
    fn: Expr


@dataclass(frozen=True, slots=True)
class AsSec(Expr):
    ps: Expr
    fn: Expr


@dataclass(frozen=True, slots=True)
class Seal(Expr):
    ps: Expr
    body: Expr


@dataclass(frozen=True, slots=True)
class Reveal(Expr):
    e: Expr


@dataclass(frozen=True, slots=True)
class MkMap(Expr):
    ps: Expr
    v: Expr


@dataclass(frozen=True, slots=True)
class Project(Expr):
    prin: Expr
    m: Expr


@dataclass(frozen=True, slots=True)
class Concat(Expr):
    m1: Expr
    m2: Expr


@dataclass(frozen=True, slots=True)
class Ffi(Expr):
    name: str
    args: tuple[Expr, ...]


@lru_cache(maxsize=None)
def free_vars(e: Expr) -> frozenset[str]:
    t = type(e)
    if t is Var:
        return frozenset((e.x,))
    if t is Const:
        return frozenset()
    if t is Lam:
        return free_vars(e.body) - {e.x}
    if t is Fix:
        return free_vars(e.body) - {e.f, e.x}
    if t is Let:
        return free_vars(e.bound) | (free_vars(e.body) - {e.x})
    if t is App:
        return free_vars(e.fn) | free_vars(e.arg)
    if t is If:
        return free_vars(e.cond) | free_vars(e.then) | free_vars(e.els)
    if t is AsPar or t is AsSec:
        return free_vars(e.ps) | free_vars(e.fn)
    if t is Seal:
        return free_vars(e.ps) | free_vars(e.body)
    if t is Reveal:
        return free_vars(e.e)
    if t is MkMap:
        return free_vars(e.ps) | free_vars(e.v)
    if t is Project:
        return free_vars(e.prin) | free_vars(e.m)
    if t is Concat:
        return free_vars(e.m1) | free_vars(e.m2)
    if t is Ffi:
        out = frozenset()
        for a in e.args:
            out |= free_vars(a)
        return out
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# environments

class Env:
    """Immutable variable environment. Extension copies, lookup errors out."""

    __slots__ = ("_b",)

    def __init__(self, bindings: Optional[dict[str, Value]] = None):
        self._b = dict(bindings) if bindings else {}

    def get(self, x: str) -> Value:
        try:
            return self._b[x]
        except KeyError:
            raise UnboundVariable(x) from None

    def has(self, x: str) -> bool:
        return x in self._b

    def extend(self, x: str, v: Value) -> "Env":
        b = dict(self._b)
        b[x] = v
        return Env(b)

    def restrict(self, names) -> "Env":
        return Env({x: v for x, v in self._b.items() if x in names})

    def names(self) -> frozenset[str]:
        return frozenset(self._b)

    def items(self):
        return sorted(self._b.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, Env) and self._b == other._b

    def __repr__(self) -> str:
        inner = ", ".join(f"{x}={v!r}" for x, v in sorted(self._b.items()))
        return f"Env({inner})"


# closures capture their environment trimmed to the lambda's free variables;
# this keeps per-party closure views small and combinable

@dataclass(frozen=True, slots=True)
class Clos(Value):
    env: Env
    x: str
    body: Expr


@dataclass(frozen=True, slots=True)
class FixClos(Value):
    env: Env
    f: str
    x: str
    body: Expr


# ---------------------------------------------------------------------------
# traces

class TraceElt:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class TMsg(TraceElt):
    v: Value


@dataclass(frozen=True, slots=True)
class TScope(TraceElt):
    ps: PrinSet
    t: tuple  # Trace


Trace = tuple[TraceElt, ...]


def flatten_trace(t: Trace) -> tuple[Value, ...]:
    """Message payloads in order, scopes dissolved. Harness helper."""
    out: list[Value] = []
    for elt in t:
        if type(elt) is TMsg:
            out.append(elt.v)
        else:
            out.extend(flatten_trace(elt.t))
    return tuple(out)


# ---------------------------------------------------------------------------
# modes / machine state

PAR = "par"
SEC = "sec"


@dataclass(frozen=True, slots=True)
class Mode:
    tag: str  # PAR or SEC
    ps: PrinSet

    def is_par(self) -> bool:
        return self.tag == PAR

    def is_sec(self) -> bool:
        return self.tag == SEC


# Evaluation contexts, one constructor per single-hole position.  The two
# Body constructors mark suspension points of as_par / as_sec blocks; they
# carry distinct pop rules (scoping, sealing, message publication) and are
# deliberately kept apart from the plain seal argument position.

class EvalCtx:
    __slots__ = ()


@dataclass(slots=True)
class AsParPs(EvalCtx):
    fn: Expr


@dataclass(slots=True)
class AsParFn(EvalCtx):
    ps: PrinSet


@dataclass(slots=True)
class AsParBody(EvalCtx):
    ps: PrinSet


@dataclass(slots=True)
class AsSecPs(EvalCtx):
    fn: Expr


@dataclass(slots=True)
class AsSecFn(EvalCtx):
    ps: PrinSet


@dataclass(slots=True)
class AsSecBody(EvalCtx):
    ps: PrinSet


@dataclass(slots=True)
class SealPs(EvalCtx):
    body: Expr


@dataclass(slots=True)
class SealBody(EvalCtx):
    ps: PrinSet


@dataclass(slots=True)
class RevealHole(EvalCtx):
    pass


@dataclass(slots=True)
class MkMapPs(EvalCtx):
    v: Expr


@dataclass(slots=True)
class MkMapVal(EvalCtx):
    ps: PrinSet


@dataclass(slots=True)
class ProjectPrin(EvalCtx):
    m: Expr


@dataclass(slots=True)
class ProjectMap(EvalCtx):
    prin: Principal


@dataclass(slots=True)
class ConcatLeft(EvalCtx):
    m2: Expr


@dataclass(slots=True)
class ConcatRight(EvalCtx):
    m1: Value


@dataclass(slots=True)
class FfiCtx(EvalCtx):
    name: str
    done: tuple[Value, ...]
    pending: tuple[Expr, ...]


@dataclass(slots=True)
class LetCtx(EvalCtx):
    x: str
    body: Expr


@dataclass(slots=True)
class AppFn(EvalCtx):
    arg: Expr


@dataclass(slots=True)
class AppArg(EvalCtx):
    fn: Value


@dataclass(slots=True)
class IfCtx(EvalCtx):
    then: Expr
    els: Expr


@dataclass(slots=True)
class Frame:
    """Suspension of the enclosing computation: mode, env, one-hole context
    and the trace accumulated before descending into the hole."""

    mode: Mode
    env: Env
    ctx: EvalCtx
    trace: Trace


Code = Union[Expr, Value]


@dataclass(slots=True)
class Config:
    mode: Mode
    stack: tuple[Frame, ...]
    env: Env
    trace: Trace
    code: Code

    def is_terminal(self) -> bool:
        return self.mode.is_par() and not self.stack and isinstance(self.code, Value)


@dataclass
class Protocol:
    """Distributed state: one local config per party plus the joint
    computations in flight, keyed by their party set."""

    par: dict[Principal, Config]
    sec: dict[PrinSet, object]


# ---------------------------------------------------------------------------
# slicing: a party's view of joint data

def slice_value(p: Principal, v: Value) -> Value:
    t = type(v)
    if t is Sealed:
        if p in v.ps:
            return Sealed(v.ps, slice_value(p, v.v))
        return Sealed(v.ps, OPAQUE)
    if t is VMap:
        mine = v.get(p)
        if mine is None:
            return VMap(())
        return VMap(((p, slice_value(p, mine)),))
    if t is FfiPair:
        return FfiPair(slice_value(p, v.fst), slice_value(p, v.snd))
    if t is FfiList:
        return FfiList(tuple(slice_value(p, i) for i in v.items))
    if t is ShareVal:
        w = v.word_of(p)
        return ShareVal(v.ps, ((p, w),) if w is not None else (), v.width)
    if t is Clos:
        return Clos(slice_env(p, v.env), v.x, v.body)
    if t is FixClos:
        return FixClos(slice_env(p, v.env), v.f, v.x, v.body)
    return v  # leaves: principals, sets, unit, bools, ints, strings, opaque


def slice_env(p: Principal, env: Env) -> Env:
    return Env({x: slice_value(p, v) for x, v in env.items()})


def slice_trace(p: Principal, t: Trace) -> Trace:
    out: list[TraceElt] = []
    for elt in t:
        if type(elt) is TMsg:
            out.append(TMsg(slice_value(p, elt.v)))
        else:
            if p in elt.ps:
                out.extend(slice_trace(p, elt.t))
            # scopes the party did not run contribute nothing
    return tuple(out)


def _slice_ctx(p: Principal, ctx: EvalCtx) -> EvalCtx:
    t = type(ctx)
    if t is AppArg:
        return AppArg(slice_value(p, ctx.fn))
    if t is ConcatRight:
        return ConcatRight(slice_value(p, ctx.m1))
    if t is FfiCtx:
        return FfiCtx(ctx.name, tuple(slice_value(p, v) for v in ctx.done), ctx.pending)
    return ctx  # remaining constructors hold expressions or plain tokens only


def _slice_frame(p: Principal, f: Frame) -> Frame:
    return Frame(Mode(PAR, PrinSet.of(p)), slice_env(p, f.env),
                 _slice_ctx(p, f.ctx), slice_trace(p, f.trace))


def slice_config(s: PrinSet, c: Config) -> Protocol:
    """Project a joint par-mode config to one local config per member."""
    if not (c.mode.is_par() and c.mode.ps == s):
        raise ModeError(f"can only slice a par-mode config over its own set, "
                        f"got mode {c.mode.tag} {c.mode.ps} sliced by {s}")
    par = {}
    for p in s:
        code = slice_value(p, c.code) if isinstance(c.code, Value) else c.code
        par[p] = Config(Mode(PAR, PrinSet.of(p)),
                        tuple(_slice_frame(p, f) for f in c.stack),
                        slice_env(p, c.env),
                        slice_trace(p, c.trace),
                        code)
    return Protocol(par, {})


# ---------------------------------------------------------------------------
# combining: merging per-party views back into joint data

def combine_values(v1: Value, v2: Value) -> Value:
    t1, t2 = type(v1), type(v2)
    if t1 is Opaque:
        return v2
    if t2 is Opaque:
        return v1
    if t1 is not t2:
        raise CombineConflict(f"{v1!r} vs {v2!r}")
    if t1 is Sealed:
        if v1.ps != v2.ps:
            raise CombineConflict(f"sealed sets differ: {v1.ps} vs {v2.ps}")
        return Sealed(v1.ps, combine_values(v1.v, v2.v))
    if t1 is VMap:
        d1, d2 = dict(v1.entries), dict(v2.entries)
        merged = {}
        for k in set(d1) | set(d2):
            if k in d1 and k in d2:
                merged[k] = combine_values(d1[k], d2[k])
            else:
                merged[k] = d1.get(k, d2.get(k))
        return VMap.of(merged)
    if t1 is FfiPair:
        return FfiPair(combine_values(v1.fst, v2.fst), combine_values(v1.snd, v2.snd))
    if t1 is FfiList:
        if len(v1.items) != len(v2.items):
            raise CombineConflict("list lengths differ")
        return FfiList(tuple(combine_values(a, b) for a, b in zip(v1.items, v2.items)))
    if t1 is ShareVal:
        if v1.ps != v2.ps or v1.width != v2.width:
            raise CombineConflict("share handles differ in party set or width")
        w1, w2 = dict(v1.words), dict(v2.words)
        for p in set(w1) & set(w2):
            if w1[p] != w2[p]:
                raise CombineConflict(f"share words for {p} disagree")
        w1.update(w2)
        return ShareVal.of(v1.ps, w1, v1.width)
    if t1 is Clos:
        if v1.x != v2.x or v1.body != v2.body:
            raise CombineConflict("closures over different code")
        return Clos(combine_envs([v1.env, v2.env]), v1.x, v1.body)
    if t1 is FixClos:
        if (v1.f, v1.x, v1.body) != (v2.f, v2.x, v2.body):
            raise CombineConflict("recursive closures over different code")
        return FixClos(combine_envs([v1.env, v2.env]), v1.f, v1.x, v1.body)
    if v1 == v2:
        return v1
    raise CombineConflict(f"{v1!r} vs {v2!r}")


def combine_many(vs: list[Value]) -> Value:
    if not vs:
        raise CombineConflict("nothing to combine")
    out = vs[0]
    for v in vs[1:]:
        out = combine_values(out, v)
    return out


def combine_envs(envs: list[Env]) -> Env:
    if not envs:
        raise DomainMismatch("no environments")
    names = envs[0].names()
    for e in envs[1:]:
        if e.names() != names:
            raise DomainMismatch(f"{sorted(names)} vs {sorted(e.names())}")
    b = {}
    for x in names:
        b[x] = combine_many([e.get(x) for e in envs])
    return Env(b)


# ---------------------------------------------------------------------------
# sealing legality

def can_seal(ps: PrinSet, v: Value) -> bool:
    """Dynamic check applied when a par block wraps up its result.

    Share handles may only be sealed for exactly their holders, and a sealed
    closure must not smuggle concrete data addressed to parties outside the
    seal.  Everything else is sealable.
    """
    t = type(v)
    if t is ShareVal:
        return v.ps == ps
    if t in (Clos, FixClos):
        for _, w in v.env.items():
            if not _closure_cap_ok(ps, w):
                return False
        return True
    if t is Sealed:
        return can_seal(ps, v.v)
    if t is VMap:
        return all(can_seal(ps, w) for _, w in v.entries)
    if t is FfiPair:
        return can_seal(ps, v.fst) and can_seal(ps, v.snd)
    if t is FfiList:
        return all(can_seal(ps, i) for i in v.items)
    return True


def _closure_cap_ok(ps: PrinSet, v: Value) -> bool:
    t = type(v)
    if t is Sealed:
        if type(v.v) is not Opaque and not ps.subset_of(v.ps):
            return False
        return True
    if t is ShareVal:
        return v.ps == ps
    if t in (Clos, FixClos):
        return all(_closure_cap_ok(ps, w) for _, w in v.env.items())
    if t is VMap:
        return all(_closure_cap_ok(ps, w) for _, w in v.entries)
    if t is FfiPair:
        return _closure_cap_ok(ps, v.fst) and _closure_cap_ok(ps, v.snd)
    if t is FfiList:
        return all(_closure_cap_ok(ps, i) for i in v.items)
    return True


# ---------------------------------------------------------------------------
# misc helpers

def contains_bare_opaque(v: Value) -> bool:
    """True if v holds a placeholder not protected by a seal or a share."""
    t = type(v)
    if t is Opaque:
        return True
    if t in (Sealed, ShareVal):
        return False
    if t is VMap:
        return any(contains_bare_opaque(w) for _, w in v.entries)
    if t is FfiPair:
        return contains_bare_opaque(v.fst) or contains_bare_opaque(v.snd)
    if t is FfiList:
        return any(contains_bare_opaque(i) for i in v.items)
    if t in (Clos, FixClos):
        return any(contains_bare_opaque(w) for _, w in v.env.items())
    return False


def is_value(code: Code) -> bool:
    return isinstance(code, Value)
