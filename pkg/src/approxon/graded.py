"""Graded consensus: a 3-round 1-graded protocol, a 3-round proposal protocol,
and the grade-doubling composition giving 2^k-graded consensus in 3k+3 rounds.

Inputs are l-bit strings held as ints; a graded output is a (value, grade)
tuple where value None stands for bottom and grade 0 iff value is None.
"""

from __future__ import annotations

from .automaton import (Automaton, Composite, Multicast, OutputLatch, ProtoContext,
                        SenderTally)
from .encoding import (KIND_GC1, KIND_PROP, bit_at, decode_graded, decode_value,
                       encode_graded, encode_value, value_width)
from .errors import MalformedPropOutput
from .quorums import threshold

BOT = None

M_ECHO = 1
M_ECHO_BOT = 2
M_PROP = 3


class Gc1(Automaton):
    """1-graded consensus on l-bit strings.

    Distinct-sender tallies only; duplicate (sender, kind, value) pairs and
    malformed payloads are ignored (the latter counted).  An echo on bottom
    counts toward every per-bit tally and toward the "other than my input"
    tally, and later echoes from a sender never retract earlier ones.
    """

    def __init__(self, ctx: ProtoContext, bits: int):
        assert bits >= 1
        self.ctx = ctx
        self.bits = bits
        self.input: int | None = None
        self.echo_values: dict[int, dict] = {}        # sender -> {value-or-BOT: None}
        self.bit_senders = [({}, {}) for _ in range(bits)]  # [k][b] -> {sender: None}
        self.v_sets = [set() for _ in range(bits)]
        self.w_sets = [set() for _ in range(bits)]
        self.echoed_bot = False
        self.proposed = False
        self.prop_tally = SenderTally()
        self.prop_ready: list[int] = []               # values in quorum-reach order
        self.latch = OutputLatch()
        self.malformed = 0

    def on_input(self, value: int):
        assert 0 <= value < (1 << self.bits), "input must be an l-bit string"
        self.input = value
        effects = [Multicast(M_ECHO, encode_value(value, self.bits))]
        return effects + self._fire()

    def on_message(self, sender, tag, kind, payload):
        if tag:
            self.malformed += 1
            return []
        if kind == M_ECHO:
            value = decode_value(payload, self.bits)
            if value is None:
                self.malformed += 1
                return []
            return self._add_echo(sender, value)
        if kind == M_ECHO_BOT:
            if payload:
                self.malformed += 1
                return []
            return self._add_echo(sender, BOT)
        if kind == M_PROP:
            value = decode_value(payload, self.bits)
            if value is None:
                self.malformed += 1
                return []
            count = self.prop_tally.add(value, sender)
            if count == self.ctx.prop_quorum:
                self.prop_ready.append(value)
            return self._fire()
        self.malformed += 1
        return []

    def _add_echo(self, sender, value):
        seen = self.echo_values.setdefault(sender, {})
        if value in seen:
            return []
        seen[value] = None
        if value is BOT:
            for k in range(self.bits):
                self.bit_senders[k][0][sender] = None
                self.bit_senders[k][1][sender] = None
        else:
            for k in range(self.bits):
                self.bit_senders[k][bit_at(value, k + 1, self.bits)][sender] = None
        return self._fire()

    def _fire(self):
        effects = []
        t = self.ctx.t
        if self.input is not None and not self.echoed_bot:
            other = sum(1 for values in self.echo_values.values()
                        if any(v is BOT or v != self.input for v in values))
            if other >= threshold("gc1_echo_bot", t):
                self.echoed_bot = True
                effects.append(Multicast(M_ECHO_BOT, b""))
                effects += self.latch.emit((BOT, 0))
        for k in range(self.bits):
            for b in (0, 1):
                count = len(self.bit_senders[k][b])
                if count >= threshold("gc1_v_add", t) and b not in self.v_sets[k]:
                    self.v_sets[k].add(b)
                    if len(self.v_sets[k]) == 2:
                        effects += self.latch.emit((BOT, 0))
                if count >= threshold("gc1_w_add", t) and b not in self.w_sets[k]:
                    self.w_sets[k].add(b)
                    if not self.proposed and all(len(w) == 1 for w in self.w_sets):
                        self.proposed = True
                        string = 0
                        for i in range(self.bits):
                            string = (string << 1) | next(iter(self.w_sets[i]))
                        effects.append(Multicast(M_PROP, encode_value(string, self.bits)))
        if self.input is not None and not self.latch.fired and self.prop_ready:
            value = self.prop_ready[0]
            pair = (value, 1) if value == self.input else (BOT, 0)
            effects += self.latch.emit(pair)
        return effects


class Prop(Automaton):
    """Proposal on opaque byte values: outputs a set of one or two values.

    Caller's obligation: the honest inputs lie in some two-element set.
    """

    def __init__(self, ctx: ProtoContext):
        self.ctx = ctx
        self.input: bytes | None = None
        self.echoed: dict[bytes, None] = {}
        self.v_set: dict[bytes, None] = {}
        self.proposed = False
        self.echo_tally = SenderTally()
        self.prop_tally = SenderTally()
        self.prop_ready: list[bytes] = []
        self.latch = OutputLatch()
        self.malformed = 0

    def on_input(self, value: bytes):
        self.input = value
        return self._echo(value)

    def _echo(self, value: bytes):
        if value in self.echoed:
            return []
        self.echoed[value] = None
        return [Multicast(M_ECHO, value)]

    def on_message(self, sender, tag, kind, payload):
        if tag:
            self.malformed += 1
            return []
        if kind == M_ECHO:
            effects = []
            count = self.echo_tally.add(payload, sender)
            if count == self.ctx.small_quorum:
                effects += self._echo(payload)
                self.v_set[payload] = None
                if len(self.v_set) == 2:
                    effects += self.latch.emit(frozenset(self.v_set))
            if count == self.ctx.big_quorum and not self.proposed:
                self.proposed = True
                effects.append(Multicast(M_PROP, payload))
            return effects
        if kind == M_PROP:
            count = self.prop_tally.add(payload, sender)
            if count == self.ctx.prop_quorum:
                return self.latch.emit(frozenset((payload,)))
            return []
        self.malformed += 1
        return []


def double_grade(pairs) -> tuple:
    """Map a proposal output over graded pairs to the doubled-grade pair."""
    ordered = sorted(pairs, key=lambda p: p[1])
    if not all(_well_formed(p) for p in ordered):
        raise MalformedPropOutput(f"ill-formed graded pairs {ordered}")
    if len(ordered) == 1:
        value, grade = ordered[0]
        return (value, 2 * grade)
    if len(ordered) == 2 and ordered[0][1] + 1 == ordered[1][1]:
        low_grade = ordered[0][1]
        return (ordered[1][0], 2 * low_grade + 1)
    raise MalformedPropOutput(f"proposal output fits no doubling shape: {ordered}")


def _well_formed(pair) -> bool:
    value, grade = pair
    return grade >= 0 and ((value is None) == (grade == 0))


class GradedConsensus(Composite):
    """2^k-graded consensus: a 1-graded stage followed by k proposal stages."""

    def __init__(self, ctx: ProtoContext, k: int, bits: int):
        assert k >= 0
        super().__init__()
        self.ctx = ctx
        self.k = k
        self.bits = bits
        self.latch = OutputLatch()
        self.join((KIND_GC1, 0), Gc1(ctx, bits))
        for stage in range(1, k + 1):
            self.join((KIND_PROP, stage), Prop(ctx))

    def on_input(self, value: int):
        return self.feed((KIND_GC1, 0), value)

    def on_child_output(self, component, value):
        kind, index = component
        if kind == KIND_GC1:
            return self._advance(0, value)
        pairs = []
        for blob in value:
            pair = decode_graded(blob, self.bits)
            if pair is None:
                raise MalformedPropOutput(f"undecodable proposal element {blob!r}")
            pairs.append(pair)
        return self._advance(index, double_grade(pairs))

    def _advance(self, stage: int, pair):
        if stage == self.k:
            return self.latch.emit(pair)
        return self.feed((KIND_PROP, stage + 1),
                         encode_graded(pair[0], pair[1], self.bits))


def build_gc1(ctx: ProtoContext, bits: int) -> Gc1:
    return Gc1(ctx, bits)


def build_prop(ctx: ProtoContext) -> Prop:
    return Prop(ctx)


def build_gc2k(ctx: ProtoContext, k: int, bits: int) -> GradedConsensus:
    return GradedConsensus(ctx, k, bits)
