"""Distributed interpreter: one local machine per party plus joint blocks.

Each party runs the shared small-step machine over its own view of the
data. Local steps interleave under a pluggable scheduler. When every member
of a set is parked at the same joint block, the protocol combines their
views and runs the block jointly, either on an ideal machine (the reference
stepper in joint mode) or by compiling to gates and executing the xor-share
protocol. On exit every party receives its slice of the result and a
message trace entry.

Two checkers live here: one replays a program on the reference machine and
on the distributed machines and demands the sliced final states coincide,
the other replays the distributed run under many schedules and demands the
final states agree with each other.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Optional, Union

from .circuit import (
    CircuitError, Circuit, bind_inputs, compile_sec_thunk, decode_output,
)
from .gmw import gmw_eval
from .lang import (
    AsSecFn, Clos, Config, DomainMismatch, Env, Expr, FixClos, Frame, Mode,
    PAR, PrinSet, Protocol, SEC, TMsg, Trace, UNIT, Value, WysError,
    combine_envs, is_value, slice_config, slice_env, slice_value,
)
from .st import (
    DEFAULT_FUEL, NeedsSec, Next, RunResult, Runtime, Stuck, initial_config,
    machine_step, run as st_run, step as st_step,
)


# ---------------------------------------------------------------------------
# joint block instances

@dataclass
class IdealSec:
    ps: PrinSet
    machine: Config
    done: bool = False

    def result(self) -> Value:
        return self.machine.code


@dataclass
class GmwSec:
    ps: PrinSet
    circuit: Circuit
    bits: dict[str, dict[int, int]]
    dealer_seed: int
    done: bool = False
    results: Optional[dict[str, Value]] = None


SecInst = Union[IdealSec, GmwSec]


# ---------------------------------------------------------------------------
# schedulers

_KIND_ORDER = {"exit": 0, "sec-step": 1, "enter": 2, "local": 3}


def _move_key(m):
    return (_KIND_ORDER[m[0]], str(m[1]))


class RoundRobin:
    """Deterministic baseline: joint work first, then parties in rotation."""

    def __init__(self):
        self._i = 0

    def pick(self, moves):
        moves = sorted(moves, key=_move_key)
        for kind in ("exit", "sec-step", "enter"):
            hits = [m for m in moves if m[0] == kind]
            if hits:
                return hits[0]
        locals_ = [m for m in moves if m[0] == "local"]
        pick = locals_[self._i % len(locals_)]
        self._i += 1
        return pick


class SeededRandom:
    """Uniform choice among all enabled moves, reproducible from the seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(f"sched|{seed}")

    def pick(self, moves):
        return self._rng.choice(sorted(moves, key=_move_key))


def parse_sched(text: str):
    if text == "rr":
        return RoundRobin()
    if text.startswith("rand:"):
        return SeededRandom(int(text.split(":", 1)[1]))
    raise ValueError(f"unknown scheduler {text!r} (use rr or rand:SEED)")


# ---------------------------------------------------------------------------
# the distributed run

@dataclass
class DsResult:
    status: str  # done | stuck | fuel
    parties: dict[str, tuple[Optional[Value], Trace]]
    protocol: Protocol
    ticks: int
    reason: Optional[str] = None
    sec_entries: int = 0
    circuits: tuple[tuple[str, "Circuit"], ...] = ()


def _thunk_joint(closures: list[Value]) -> tuple[Env, Env, Expr, str]:
    """Merge the waiting parties' thunks. Returns (combined closure env,
    machine env, body, shape error or '')."""
    shapes = set()
    for c in closures:
        if type(c) is Clos:
            shapes.add(("lam", c.x, c.body))
        elif type(c) is FixClos:
            shapes.add(("fix", c.f, c.x, c.body))
        else:
            return None, None, None, f"waiting on a non-function {c!r}"
    if len(shapes) > 1:
        return None, None, None, "parties disagree on the block's code"
    env = combine_envs([c.env for c in closures])
    c0 = closures[0]
    if type(c0) is Clos:
        machine_env = env.extend(c0.x, UNIT)
    else:
        joint = FixClos(env, c0.f, c0.x, c0.body)
        machine_env = env.extend(c0.f, joint).extend(c0.x, UNIT)
    return env, machine_env, c0.body, ""


def _party_thunk_env(clos: Value) -> Env:
    if type(clos) is Clos:
        return clos.env.extend(clos.x, UNIT)
    return clos.env.extend(clos.f, clos).extend(clos.x, UNIT)


def _gmw_seed(base_seed: int, s: PrinSet, counter: int) -> int:
    material = f"{base_seed}|gmw|{','.join(s.names)}|{counter}".encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def ds_run(e: Expr, env: Env, ps: PrinSet, rt: Optional[Runtime] = None,
           sched=None, backend: str = "ideal",
           fuel: int = DEFAULT_FUEL) -> DsResult:
    if rt is None:
        rt = Runtime()
    if sched is None:
        sched = RoundRobin()
    if backend not in ("ideal", "gmw"):
        raise ValueError(f"unknown backend {backend!r}")

    par: dict[str, Config] = {
        p: Config(Mode(PAR, PrinSet.of(p)), (), slice_env(p, env), (), e)
        for p in ps
    }
    sec: dict[PrinSet, SecInst] = {}
    gmw_counters: dict[PrinSet, int] = {}
    sec_entries = 0
    circuits: list[tuple[str, Circuit]] = []

    def finish(status: str, ticks: int, reason: Optional[str] = None) -> DsResult:
        parties = {p: (c.code if c.is_terminal() else None, c.trace)
                   for p, c in par.items()}
        return DsResult(status, parties, Protocol(dict(par), dict(sec)),
                        ticks, reason, sec_entries, tuple(circuits))

    for tick in range(fuel):
        moves = []
        outcomes = {}
        waiting: dict[PrinSet, dict[str, NeedsSec]] = {}
        for s, inst in sec.items():
            moves.append(("exit", s) if inst.done else ("sec-step", s))
        for p in ps:
            c = par[p]
            if c.is_terminal():
                continue
            out = machine_step(c, rt, p)
            outcomes[p] = out
            if type(out) is Next:
                moves.append(("local", p))
            elif type(out) is NeedsSec:
                if out.ps not in sec:
                    waiting.setdefault(out.ps, {})[p] = out
            else:  # Stuck
                return finish("stuck", tick,
                              f"party {p} stuck at {out.rule}: {out.reason}")
        for s, group in waiting.items():
            if set(group) == set(s.names):
                moves.append(("enter", s))

        if not moves:
            if all(c.is_terminal() for c in par.values()) and not sec:
                return finish("done", tick)
            return finish("stuck", tick, "no enabled move: parties are "
                          "waiting for partners that never arrive")

        kind, target = sched.pick(moves)

        if kind == "local":
            par[target] = outcomes[target].config
            continue

        if kind == "enter":
            s = target
            group = waiting[s]
            closures = [group[p].clos for p in s.names]
            _, machine_env, body, err = _thunk_joint(closures)
            if err:
                return finish("stuck", tick, f"joint block {s}: {err}")
            sec_entries += 1
            if backend == "ideal":
                sec[s] = IdealSec(s, Config(Mode(SEC, s), (), machine_env,
                                            (), body))
            else:
                idx = gmw_counters.get(s, 0)
                gmw_counters[s] = idx + 1
                try:
                    circ = compile_sec_thunk(machine_env, body, s,
                                             rt.width, rt.mint)
                    party_envs = {p: _party_thunk_env(group[p].clos)
                                  for p in s.names}
                    bits = bind_inputs(circ, party_envs)
                except CircuitError as ex:
                    return finish("stuck", tick, f"joint block {s}: {ex}")
                sec[s] = GmwSec(s, circ, bits,
                                _gmw_seed(rt.seed, s, idx))
                circuits.append((f"{s}#{idx}", circ))
            continue

        if kind == "sec-step":
            inst = sec[target]
            if type(inst) is IdealSec:
                m = inst.machine
                if not m.stack and is_value(m.code):
                    inst.done = True
                    continue
                out = st_step(m, rt)
                if type(out) is Stuck:
                    return finish("stuck", tick,
                                  f"joint block {target} stuck at "
                                  f"{out.rule}: {out.reason}")
                inst.machine = out.config
                m = inst.machine
                if not m.stack and is_value(m.code):
                    if m.trace:
                        return finish("stuck", tick,
                                      f"joint block {target} produced "
                                      f"scoped output")
                    inst.done = True
            else:
                res = gmw_eval(inst.circuit, inst.bits, inst.dealer_seed)
                inst.results = {
                    p: decode_output(inst.circuit.decode, p, res.outputs[p])
                    for p in target.names
                }
                inst.done = True
            continue

        if kind == "exit":
            s = target
            inst = sec.pop(s)
            for p in s.names:
                c = par[p]
                frame = c.stack[-1]
                if type(frame.ctx) is not AsSecFn or frame.ctx.ps != s:
                    return finish("stuck", 0,
                                  f"party {p} is not waiting on {s}")
                if type(inst) is IdealSec:
                    vp = slice_value(p, inst.result())
                else:
                    vp = inst.results[p]
                trace = frame.trace + c.trace + (TMsg(vp),)
                par[p] = Config(frame.mode, c.stack[:-1], frame.env,
                                trace, vp)
            continue

    return finish("fuel", fuel)


# ---------------------------------------------------------------------------
# metatheory checkers

@dataclass
class CheckReport:
    status: str  # pass | fail | vacuous | inconclusive
    detail: str = ""


def _config_diff(tag: str, a: Config, b: Config) -> str:
    if a.mode != b.mode:
        return f"{tag}: modes differ: {a.mode} vs {b.mode}"
    if a.code != b.code:
        return f"{tag}: results differ: {a.code!r} vs {b.code!r}"
    if a.trace != b.trace:
        return f"{tag}: traces differ: {a.trace!r} vs {b.trace!r}"
    if a.env != b.env:
        return f"{tag}: environments differ: {a.env!r} vs {b.env!r}"
    if a.stack != b.stack:
        return f"{tag}: stacks differ"
    return f"{tag}: configs differ"


def default_schedules(n: int = 10):
    scheds = [lambda: RoundRobin()]
    for i in range(n):
        scheds.append(lambda i=i: SeededRandom(i))
    return scheds


def check_simulation(e: Expr, env: Env, ps: PrinSet, seed: int = 0,
                     width: int = 32, schedules=None, backend: str = "ideal",
                     fuel: int = DEFAULT_FUEL) -> CheckReport:
    """The reference run, sliced per party, must equal every scheduled
    distributed run, state for state."""
    if schedules is None:
        schedules = default_schedules()
    sres = st_run(e, env, ps, Runtime(seed, width), fuel)
    if sres.status == "stuck":
        return CheckReport("vacuous",
                           f"reference run stuck at {sres.stuck_rule}: "
                           f"{sres.stuck_reason}")
    if sres.status == "fuel":
        return CheckReport("inconclusive", "reference run ran out of fuel")
    sliced = slice_config(ps, sres.config)
    for mk in schedules:
        sched = mk()
        dres = ds_run(e, env, ps, Runtime(seed, width), sched, backend, fuel)
        name = type(sched).__name__
        if dres.status != "done":
            return CheckReport("fail",
                               f"[{name}] distributed run {dres.status}: "
                               f"{dres.reason}")
        for p in ps:
            if sliced.par[p] != dres.protocol.par[p]:
                return CheckReport("fail", "[" + name + "] " +
                                   _config_diff(p, sliced.par[p],
                                                dres.protocol.par[p]))
    return CheckReport("pass")


def check_confluence(e: Expr, env: Env, ps: PrinSet, seed: int = 0,
                     width: int = 32, n_schedules: int = 100,
                     backend: str = "ideal",
                     fuel: int = DEFAULT_FUEL) -> CheckReport:
    """Every schedule must drive the distributed machines to the same
    terminal state."""
    base = ds_run(e, env, ps, Runtime(seed, width), RoundRobin(),
                  backend, fuel)
    if base.status == "fuel":
        return CheckReport("inconclusive", "baseline ran out of fuel")
    for i in range(n_schedules):
        other = ds_run(e, env, ps, Runtime(seed, width), SeededRandom(i),
                       backend, fuel)
        if other.status != base.status:
            return CheckReport("fail",
                               f"[rand:{i}] status {other.status} vs "
                               f"baseline {base.status} ({other.reason})")
        if base.status == "done":
            for p in ps:
                if base.protocol.par[p] != other.protocol.par[p]:
                    return CheckReport("fail", "[rand:" + str(i) + "] " +
                                       _config_diff(p, base.protocol.par[p],
                                                    other.protocol.par[p]))
    return CheckReport("pass")
