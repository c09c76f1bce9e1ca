"""Execution of compiled circuits under xor sharing.

Classic semi-honest protocol: every wire is split into one-bit xor shares,
one per party. XOR and NOT gates are local; each AND gate consumes one
precomputed multiplication triple and costs every ordered pair of parties
exactly two opened bits (the two blinded operands). Triples come from a
seeded dealer, standing in for an offline phase.

The run is simulated in rounds over FIFO channels: one round to share
inputs, one round per layer of AND gates, one round to reveal outputs to
their recipients. Wire identities never travel; both ends derive message
layout from the public circuit, so channel payloads are pure bits and the
per-kind counters pin the protocol's exact communication pattern.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .circuit import AND, CONST, Circuit, NOT, XOR
from .lang import WysError


class ProtocolError(WysError):
    pass


class Channel:
    """One-directional FIFO link with per-kind bit counters."""

    def __init__(self, src: str, dst: str):
        self.src = src
        self.dst = dst
        self.queue: deque = deque()
        self.sent: dict[str, int] = {"input": 0, "open": 0, "output": 0}

    def send(self, kind: str, bits: tuple[int, ...]):
        self.sent[kind] += len(bits)
        self.queue.append((kind, bits))

    def recv(self, kind: str) -> tuple[int, ...]:
        if not self.queue:
            raise ProtocolError(f"{self.dst} expected {kind} from {self.src}, "
                                f"channel empty")
        got_kind, bits = self.queue.popleft()
        if got_kind != kind:
            raise ProtocolError(f"{self.dst} expected {kind} from {self.src}, "
                                f"got {got_kind}")
        return bits


@dataclass
class GmwResult:
    outputs: dict[str, dict[int, int]]  # party -> wire -> bit
    rounds: int
    and_rounds: int
    triples_used: int
    channels: dict[tuple[str, str], Channel]


def make_triples(n: int, parties: tuple[str, ...], rng: random.Random):
    """Dealer-style multiplication triples: shares of (a, b, a AND b)."""
    triples = []
    for _ in range(n):
        a, b = rng.getrandbits(1), rng.getrandbits(1)
        c = a & b
        shares = {}
        ra = rb = rc = 0
        for p in parties[:-1]:
            sa, sb, sc = (rng.getrandbits(1), rng.getrandbits(1),
                          rng.getrandbits(1))
            shares[p] = (sa, sb, sc)
            ra ^= sa
            rb ^= sb
            rc ^= sc
        shares[parties[-1]] = (a ^ ra, b ^ rb, c ^ rc)
        triples.append(shares)
    return triples


def gmw_eval(circ: Circuit, party_inputs: dict[str, dict[int, int]],
             dealer_seed: int) -> GmwResult:
    parties = circ.parties.names
    first = parties[0]
    dealer_rng = random.Random(f"dealer|{dealer_seed}")
    share_rngs = {p: random.Random(f"wrap|{dealer_seed}|{p}") for p in parties}

    channels = {(p, q): Channel(p, q)
                for p in parties for q in parties if p != q}
    shares: dict[str, dict[int, int]] = {p: {} for p in parties}

    # message layouts everyone derives from the public circuit
    in_wires = {p: [] for p in parties}
    for decl in circ.inputs:
        in_wires[decl.party].extend(decl.wires)
    out_for: dict[str, list[int]] = {p: [] for p in parties}
    seen: dict[str, set] = {p: set() for p in parties}
    for w, recips in circ.outputs:
        for r in recips:
            if r in out_for and w not in seen[r]:
                seen[r].add(w)
                out_for[r].append(w)

    # round 1: owners split their input bits and deal the pieces out
    for p in parties:
        mine = party_inputs.get(p, {})
        missing = [w for w in in_wires[p] if w not in mine]
        if missing:
            raise ProtocolError(f"{p} has no bits for wires {missing}")
        srng = share_rngs[p]
        own: dict[int, int] = {}
        piece = {q: [] for q in parties if q != p}
        for w in in_wires[p]:
            acc = mine[w] & 1
            for q in parties:
                if q == p:
                    continue
                r = srng.getrandbits(1)
                acc ^= r
                piece[q].append(r)
            own[w] = acc
        shares[p].update(own)
        for q in parties:
            if q != p:
                channels[(p, q)].send("input", tuple(piece[q]))
    for p in parties:
        for q in parties:
            if q == p:
                continue
            bits = channels[(q, p)].recv("input")
            if len(bits) != len(in_wires[q]):
                raise ProtocolError("malformed input share message")
            for w, r in zip(in_wires[q], bits):
                shares[p][w] = r

    and_gates = [g for g in circ.gates if g.op == AND]
    triples = make_triples(len(and_gates), parties, dealer_rng)
    triple_of = {g.out: t for g, t in zip(and_gates, triples)}

    def propagate():
        # everything except AND is share-local
        done = shares[first]
        for g in circ.gates:
            if g.out in done:
                continue
            if g.op == CONST:
                for p in parties:
                    shares[p][g.out] = g.bit if p == first else 0
            elif g.op == XOR:
                if g.a in done and g.b in done:
                    for p in parties:
                        shares[p][g.out] = shares[p][g.a] ^ shares[p][g.b]
            elif g.op == NOT:
                if g.a in done:
                    for p in parties:
                        flip = 1 if p == first else 0
                        shares[p][g.out] = shares[p][g.a] ^ flip

    rounds = 1
    and_rounds = 0
    pending = and_gates
    propagate()
    while pending:
        ready = shares[first]
        layer = [g for g in pending if g.a in ready and g.b in ready]
        if not layer:
            raise ProtocolError("AND gate inputs never became available")
        # each party blinds its operand shares with triple shares and opens
        blinded = {}
        for p in parties:
            flat = []
            for g in layer:
                ta, tb, _ = triple_of[g.out][p]
                flat.append(shares[p][g.a] ^ ta)
                flat.append(shares[p][g.b] ^ tb)
            blinded[p] = flat
            for q in parties:
                if q != p:
                    channels[(p, q)].send("open", tuple(flat))
        for p in parties:
            opened = list(blinded[p])
            for q in parties:
                if q == p:
                    continue
                bits = channels[(q, p)].recv("open")
                if len(bits) != len(opened):
                    raise ProtocolError("malformed opening message")
                for i, bit in enumerate(bits):
                    opened[i] ^= bit
            for i, g in enumerate(layer):
                d, e = opened[2 * i], opened[2 * i + 1]
                ta, tb, tc = triple_of[g.out][p]
                z = tc ^ (d & tb) ^ (e & ta)
                if p == first:
                    z ^= d & e
                shares[p][g.out] = z
        layer_outs = {g.out for g in layer}
        pending = [g for g in pending if g.out not in layer_outs]
        rounds += 1
        and_rounds += 1
        propagate()

    # final round: reveal each output wire to its recipients only
    outputs: dict[str, dict[int, int]] = {p: {} for p in parties}
    for p in parties:
        for r in parties:
            if r == p or not out_for[r]:
                continue
            channels[(p, r)].send("output",
                                  tuple(shares[p][w] for w in out_for[r]))
    for r in parties:
        if not out_for[r]:
            continue
        acc = {w: shares[r][w] for w in out_for[r]}
        for q in parties:
            if q == r:
                continue
            bits = channels[(q, r)].recv("output")
            for w, s in zip(out_for[r], bits):
                acc[w] ^= s
        outputs[r] = acc
    rounds += 1

    return GmwResult(outputs, rounds, and_rounds, len(and_gates), channels)
