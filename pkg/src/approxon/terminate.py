"""Termination: a 3-round halt procedure over opaque values, the generic
live-protocol + termination composition, and the pipelined terminating tree
agreement (every graded iteration termination-wrapped, one global halt rule).
"""

from __future__ import annotations

from typing import Callable

from .automaton import (Automaton, Composite, Halt, Multicast, OutputLatch,
                        ProtoContext, Signal, SenderTally)
from .encoding import (KIND_GC2K, KIND_GC2T, KIND_PI, KIND_TC, KIND_TC_STAR,
                       KIND_TERM, decode_graded, encode_graded)
from .errors import MalformedPropOutput
from .graded import GradedConsensus
from .quorums import threshold
from .tree_agree import TreeAgreement

M_ECHO = 1
M_READY = 2

TERM_DONE = "term_done"


class Term(Automaton):
    """Echo/ready halting on opaque byte values.

    A party may never acquire an input; it can still adopt a value from t+1
    echoes and terminate through the ready cascade.  Caller's obligation:
    honest inputs (when acquired) lie in some two-element set.
    """

    def __init__(self, ctx: ProtoContext):
        self.ctx = ctx
        self.adopted: bytes | None = None
        self.echoed: dict[bytes, None] = {}
        self.ready_sent = False
        self.terminated = False
        self.echo_tally = SenderTally()
        self.ready_senders: dict[int, None] = {}
        self.latch = OutputLatch()
        self.malformed = 0

    def on_input(self, value: bytes):
        return self._acquire(value)

    def _acquire(self, value: bytes):
        effects = []
        if self.adopted is None:
            self.adopted = value
        if value not in self.echoed:
            self.echoed[value] = None
            effects.append(Multicast(M_ECHO, value))
        return effects + self._fire()

    def on_message(self, sender, tag, kind, payload):
        if tag:
            self.malformed += 1
            return []
        if kind == M_ECHO:
            count = self.echo_tally.add(payload, sender)
            if count >= threshold("term_adopt", self.ctx.t) and payload not in self.echoed:
                return self._acquire(payload)
            return self._fire()
        if kind == M_READY:
            if payload:
                self.malformed += 1
                return []
            self.ready_senders[sender] = None
            return self._fire()
        self.malformed += 1
        return []

    def _fire(self):
        if self.terminated:
            return []
        effects = []
        t = self.ctx.t
        if not self.ready_sent:
            ready_backed = len(self.ready_senders) >= threshold("term_ready_amplify", t)
            echo_backed = any(len(s) >= threshold("term_ready_echo", t)
                              for s in self.echo_tally.seen.values())
            if ready_backed or echo_backed:
                self.ready_sent = True
                effects.append(Multicast(M_READY, b""))
        if (self.ready_sent and self.adopted is not None
                and len(self.ready_senders) >= threshold("term_ready_count", t)):
            self.terminated = True
            effects += self.latch.emit(self.adopted)
            effects.append(Halt())
        return effects


class PiTerm(Composite):
    """A live edge-agreement protocol upgraded with termination.

    The protocol's output and the termination output share one latch; on
    termination the party halts, dropping everything nested.
    """

    def __init__(self, ctx: ProtoContext, pi: Automaton,
                 encode: Callable, decode: Callable):
        super().__init__()
        self.ctx = ctx
        self.encode = encode
        self.decode = decode
        self.latch = OutputLatch()
        self.join((KIND_PI, 0), pi)
        self.join((KIND_TERM, 1), Term(ctx))

    def on_input(self, value):
        return self.feed((KIND_PI, 0), value)

    def on_child_output(self, component, value):
        kind, _ = component
        if kind == KIND_PI:
            return self.latch.emit(value) + self.feed((KIND_TERM, 1), self.encode(value))
        return self.latch.emit(self.decode(value))


class Gc2WithTerm(Composite):
    """2-graded consensus whose output is termination-wrapped.

    Signature-compatible with GradedConsensus so the terminating tree protocol
    can swap it in per iteration.  Termination does not stop the underlying
    instance; it surfaces as a signal for the global halt rule.
    """

    def __init__(self, ctx: ProtoContext, k: int, bits: int):
        super().__init__()
        self.ctx = ctx
        self.bits = bits
        self.latch = OutputLatch()
        self.join((KIND_GC2K, 0), GradedConsensus(ctx, k, bits))
        self.join((KIND_TERM, 1), Term(ctx))

    def on_input(self, value: int):
        return self.feed((KIND_GC2K, 0), value)

    def on_child_output(self, component, value):
        kind, _ = component
        if kind == KIND_GC2K:
            blob = encode_graded(value[0], value[1], self.bits)
            return self.latch.emit(value) + self.feed((KIND_TERM, 1), blob)
        pair = decode_graded(value, self.bits)
        if pair is None:
            raise MalformedPropOutput(f"undecodable terminated pair {value!r}")
        return self.latch.emit(pair)

    def on_child_halt(self, component):
        return [Signal(TERM_DONE)]


class _TcStarLevel(TreeAgreement):
    """One tree-agreement level with its graded iteration termination-wrapped."""

    def _graded_component(self):
        return (KIND_GC2T, 0)

    def _make_graded(self):
        return Gc2WithTerm(self.ctx, 1, self.bits)


class TreeAgreementTerminating(Composite):
    """Terminating tree agreement: halt once all j wrapped iterations halted."""

    def __init__(self, ctx: ProtoContext, j: int, delta_max: int):
        assert j >= 1, "the terminating variant needs at least one wrapped iteration"
        super().__init__()
        self.ctx = ctx
        self.needed = j
        self.done = 0
        self.latch = OutputLatch()
        self.join((KIND_TC_STAR, j), _TcStarLevel(ctx, j, delta_max))

    def on_input(self, value):
        return self.feed((KIND_TC_STAR, self.needed), value)

    def on_child_output(self, component, value):
        return self.latch.emit(value)

    def on_child_signal(self, component, signal):
        assert signal.name == TERM_DONE
        self.done += 1
        if self.done == self.needed:
            return [Halt()]
        return []


def build_term(ctx: ProtoContext) -> Term:
    return Term(ctx)


def compose_with_term(ctx: ProtoContext, pi: Automaton, encode: Callable,
                      decode: Callable) -> PiTerm:
    return PiTerm(ctx, pi, encode, decode)


def build_tc_star(ctx: ProtoContext, j: int, delta_max: int) -> TreeAgreementTerminating:
    return TreeAgreementTerminating(ctx, j, delta_max)
