"""Deterministic discrete-event simulator of an asynchronous authenticated network.

Virtual time is exact rational arithmetic; the adversary assigns every envelope
a positive delay at send time, may corrupt up to t parties adaptively (including
mid-multicast, in which case the message reaches only a chosen receiver subset),
and may inject arbitrary messages from corrupted senders.  Simultaneous events
are ordered lexicographically by (time, event class, receiver, sender, per-sender
sequence number), so identical configurations replay bit-identically.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional

from .automaton import Automaton, Halt, Multicast, Output, Signal
from .encoding import Tag, body_bits
from .errors import EventBudgetExceeded, InvalidConfig, NotQuiescent

DEFAULT_EVENT_BUDGET = 10_000_000


@dataclass(slots=True)
class Envelope:
    """One in-flight message; the simulator's unit of scheduling."""

    seq: int
    sender: int
    receiver: int
    tag: Tag
    kind: int
    payload: bytes
    send_time: Fraction
    deliver_time: Fraction
    honest_sent: bool


def count_bits(envelope: Envelope) -> int:
    """Bits charged for one envelope under the canonical wire encoding."""
    return body_bits(envelope.tag, envelope.kind, envelope.payload)


class Adversary:
    """Base strategy: synchronous delay-1 delivery, no corruption."""

    name = "null"

    def begin(self, ctx: "KernelContext") -> None:
        pass

    def delay(self, ctx: "KernelContext", sender: int, receiver: int, tag: Tag,
              kind: int, payload: bytes) -> Fraction | int:
        return 1

    def on_multicast(self, ctx: "KernelContext", sender: int, tag: Tag, kind: int,
                     payload: bytes) -> Optional[list[int]]:
        """Return a receiver subset to corrupt the sender mid-multicast, else None."""
        return None

    def after_event(self, ctx: "KernelContext", event: tuple) -> None:
        pass


@dataclass
class SimConfig:
    n: int
    t: int
    seed: int = 0
    input_times: Optional[list[Fraction | int]] = None
    adversary: Adversary = field(default_factory=Adversary)
    event_budget: int = DEFAULT_EVENT_BUDGET

    def validate(self) -> None:
        if self.n < 1:
            raise InvalidConfig(f"need at least one party, got n={self.n}")
        if self.t < 0 or self.n < 3 * self.t + 1:
            raise InvalidConfig(f"corruption budget requires n >= 3t+1, got n={self.n}, t={self.t}")
        if self.input_times is not None and len(self.input_times) != self.n:
            raise InvalidConfig("input_times length must equal n")
        if self.event_budget < 1:
            raise InvalidConfig("event budget must be positive")


@dataclass
class TraceMetrics:
    delta_observed: Fraction
    t_inputs_done: Optional[Fraction]
    t_outputs_done: Optional[Fraction]
    rounds: Optional[Fraction]
    messages_total: int
    bits_total: int
    per_party_messages: list[int]
    per_party_multicasts: list[int]


@dataclass
class SimResult:
    outputs: list[Any]
    metrics: TraceMetrics
    trace: list[tuple]
    output_times: list[Optional[Fraction]]
    term_times: list[Optional[Fraction]]
    input_done_times: list[Optional[Fraction]]
    corrupted: set[int]
    events_processed: int
    honest_sent: int
    honest_delivered: int
    mcast_counts: dict[tuple[int, Tag], int]

    def honest(self) -> list[int]:
        return [p for p in range(len(self.outputs)) if p not in self.corrupted]

    def honest_outputs(self) -> list[Any]:
        return [self.outputs[p] for p in self.honest()]


class KernelContext:
    """The adversary's window into (and handle on) a running simulation."""

    def __init__(self, sim: "_Simulation"):
        self._sim = sim
        self.rng: random.Random = sim.rng
        self.n: int = sim.config.n
        self.t: int = sim.config.t

    @property
    def now(self) -> Fraction:
        return self._sim.now

    @property
    def corrupted(self) -> frozenset[int]:
        return frozenset(self._sim.corrupted)

    def is_honest(self, party: int) -> bool:
        return party not in self._sim.corrupted

    def input_of(self, party: int):
        if party not in self._sim.corrupted:
            raise InvalidConfig("adversary may only read inputs of corrupted parties")
        return self._sim.inputs[party]

    def pending(self) -> list[Envelope]:
        return [entry[-1] for entry in self._sim.queue if entry[1] == 1]

    def corrupt(self, party: int) -> None:
        self._sim.corrupt(party)

    def inject(self, sender: int, receiver: int, tag: Tag, kind: int,
               payload: bytes, delay: Fraction | int) -> None:
        self._sim.inject(sender, receiver, tag, kind, payload, delay)


class _Simulation:
    def __init__(self, config: SimConfig, factory: Callable[[int], Automaton],
                 inputs: list, collect_trace: bool):
        config.validate()
        if len(inputs) != config.n:
            raise InvalidConfig("inputs length must equal n")
        self.config = config
        self.inputs = inputs
        self.collect_trace = collect_trace
        self.rng = random.Random(config.seed)
        self.now: Fraction = Fraction(0)
        self.queue: list = []
        self.seq = 0
        self.per_sender_seq = [0] * config.n
        self.autos = [factory(p) for p in range(config.n)]
        self.corrupted: set[int] = set()
        self.halted = [False] * config.n
        self.outputs: list = [None] * config.n
        self.output_times: list = [None] * config.n
        self.term_times: list = [None] * config.n
        self.input_done: list = [None] * config.n
        self.trace: list[tuple] = []
        self.delta = Fraction(0)
        self.messages_total = 0
        self.bits_total = 0
        self.per_party_messages = [0] * config.n
        self.per_party_multicasts = [0] * config.n
        self.mcast_counts: dict[tuple[int, Tag], int] = {}
        self.honest_sent = 0
        self.honest_delivered = 0
        self.events = 0
        self.ctx = KernelContext(self)
        self.adversary = config.adversary

    # -- adversary-facing actions -------------------------------------------------

    def corrupt(self, party: int) -> None:
        if party in self.corrupted:
            return
        if len(self.corrupted) >= self.config.t:
            raise InvalidConfig(f"corruption budget t={self.config.t} exhausted")
        self.corrupted.add(party)
        if self.collect_trace:
            self.trace.append(("corrupt", self.now, party))

    def inject(self, sender: int, receiver: int, tag: Tag, kind: int,
               payload: bytes, delay) -> None:
        if sender not in self.corrupted:
            raise InvalidConfig("cannot forge an honest sender")
        if not 0 <= receiver < self.config.n:
            raise InvalidConfig(f"bad receiver {receiver}")
        self._send(sender, receiver, tag, kind, payload, Fraction(delay), honest=False,
                   mcast_id=None)

    # -- envelope plumbing --------------------------------------------------------

    def _send(self, sender: int, receiver: int, tag: Tag, kind: int, payload: bytes,
              delay: Fraction, honest: bool, mcast_id) -> None:
        if delay <= 0:
            raise InvalidConfig(f"delays must be positive, got {delay}")
        self.seq += 1
        self.per_sender_seq[sender] += 1
        env = Envelope(self.seq, sender, receiver, tag, kind, payload,
                       self.now, self.now + delay, honest)
        self.messages_total += 1
        self.per_party_messages[sender] += 1
        self.bits_total += count_bits(env)
        if honest:
            self.honest_sent += 1
        if self.collect_trace:
            self.trace.append(("send", self.now, env.seq, sender, receiver, tag, kind,
                               payload, mcast_id))
        heapq.heappush(self.queue,
                       (env.deliver_time, 1, receiver, sender, self.per_sender_seq[sender], env))

    def _do_multicast(self, party: int, effect: Multicast) -> None:
        receivers = range(self.config.n)
        verdict = self.adversary.on_multicast(self.ctx, party, effect.tag, effect.kind,
                                              effect.payload)
        if verdict is not None:
            self.corrupt(party)
            receivers = verdict
        honest = party not in self.corrupted
        self.per_party_multicasts[party] += 1
        key = (party, effect.tag)
        self.mcast_counts[key] = self.mcast_counts.get(key, 0) + 1
        mcast_id = (party, self.per_party_multicasts[party])
        for receiver in receivers:
            delay = Fraction(self.adversary.delay(self.ctx, party, receiver, effect.tag,
                                                  effect.kind, effect.payload))
            self._send(party, receiver, effect.tag, effect.kind, effect.payload,
                       delay, honest, mcast_id)

    def _apply_effects(self, party: int, effects) -> None:
        for effect in effects:
            if party in self.corrupted:
                return
            if isinstance(effect, Multicast):
                self._do_multicast(party, effect)
            elif isinstance(effect, Output):
                if self.output_times[party] is None:
                    self.outputs[party] = effect.value
                    self.output_times[party] = self.now
                if self.collect_trace:
                    self.trace.append(("output", self.now, party, effect.value))
            elif isinstance(effect, Halt):
                self.halted[party] = True
                self.term_times[party] = self.now
                if self.collect_trace:
                    self.trace.append(("terminate", self.now, party))
                return
            elif isinstance(effect, Signal):
                raise AssertionError(f"unconsumed signal {effect} escaped to the kernel")
            else:
                raise AssertionError(f"unknown effect {effect!r}")

    # -- main loop ----------------------------------------------------------------

    def run(self) -> SimResult:
        self.adversary.begin(self.ctx)
        if len(self.corrupted) > self.config.t:
            raise InvalidConfig("adversary corrupted more than t parties")
        input_times = self.config.input_times or [0] * self.config.n
        for party in range(self.config.n):
            if self.inputs[party] is not None:
                heapq.heappush(self.queue,
                               (Fraction(input_times[party]), 0, party, -1, 0, None))
        self.adversary.after_event(self.ctx, ("begin",))
        budget = self.config.event_budget
        while self.queue:
            if self.events >= budget:
                raise EventBudgetExceeded(f"exceeded {budget} events; livelock or undersized budget")
            self.events += 1
            time, prio, receiver, sender, _, env = heapq.heappop(self.queue)
            self.now = time
            if prio == 0:
                self.input_done[receiver] = time
                if self.collect_trace:
                    self.trace.append(("input", time, receiver))
                if receiver not in self.corrupted and not self.halted[receiver]:
                    self._apply_effects(receiver, self.autos[receiver].on_input(self.inputs[receiver]))
                self.adversary.after_event(self.ctx, ("input", receiver))
            else:
                if env.honest_sent:
                    self.honest_delivered += 1
                    delay = env.deliver_time - env.send_time
                    if delay > self.delta:
                        self.delta = delay
                if self.collect_trace:
                    self.trace.append(("deliver", time, env.seq))
                if receiver not in self.corrupted and not self.halted[receiver]:
                    self._apply_effects(
                        receiver,
                        self.autos[receiver].on_message(env.sender, env.tag, env.kind, env.payload))
                self.adversary.after_event(self.ctx, ("deliver", env))
        return self._result()

    def _result(self) -> SimResult:
        honest = [p for p in range(self.config.n) if p not in self.corrupted]
        in_times = [self.input_done[p] for p in honest if self.inputs[p] is not None]
        t_in = max(in_times) if in_times else None
        done: list[Optional[Fraction]] = []
        for p in honest:
            done.append(self.term_times[p] if self.term_times[p] is not None
                        else self.output_times[p])
        t_out = None if (not done or any(d is None for d in done)) else max(done)
        rounds = None
        if t_out is not None and t_in is not None:
            if t_out == t_in:
                rounds = Fraction(0)
            elif self.delta > 0:
                rounds = (t_out - t_in) / self.delta
        metrics = TraceMetrics(self.delta, t_in, t_out, rounds, self.messages_total,
                               self.bits_total, self.per_party_messages,
                               self.per_party_multicasts)
        return SimResult(self.outputs, metrics, self.trace, self.output_times,
                         self.term_times, self.input_done, set(self.corrupted),
                         self.events, self.honest_sent, self.honest_delivered,
                         self.mcast_counts)


def run_simulation(config: SimConfig, factory: Callable[[int], Automaton],
                   inputs: list, collect_trace: bool = True) -> SimResult:
    """Run one simulation to quiescence (or raise EventBudgetExceeded)."""
    return _Simulation(config, factory, inputs, collect_trace).run()


def measure_rounds(result: SimResult) -> Fraction:
    """Output latency of the last honest party divided by the observed max delay."""
    metrics = result.metrics
    if metrics.t_outputs_done is None:
        raise NotQuiescent("some honest party never produced an output")
    if metrics.t_inputs_done is None:
        raise NotQuiescent("no honest party ever acquired an input")
    if metrics.t_outputs_done == metrics.t_inputs_done:
        return Fraction(0)
    if metrics.delta_observed == 0:
        raise NotQuiescent("outputs happened but no honest message was ever delivered")
    return (metrics.t_outputs_done - metrics.t_inputs_done) / metrics.delta_observed


def _frac_str(value: Fraction) -> str:
    return str(value)


def trace_to_jsonl(trace: list[tuple]) -> str:
    """Event trace as JSON lines, one object per event with virtual timestamps."""
    lines = []
    for event in trace:
        kind = event[0]
        if kind == "send":
            _, t, seq, sender, receiver, tag, mkind, payload, mcast = event
            obj = {"type": "send", "t": _frac_str(t), "seq": seq, "from": sender,
                   "to": receiver, "tag": [list(c) for c in tag], "kind": mkind,
                   "payload": payload.hex(), "mcast": list(mcast) if mcast else None}
        elif kind == "deliver":
            obj = {"type": "deliver", "t": _frac_str(event[1]), "seq": event[2]}
        elif kind == "input":
            obj = {"type": "input", "t": _frac_str(event[1]), "party": event[2]}
        elif kind == "output":
            obj = {"type": "output", "t": _frac_str(event[1]), "party": event[2],
                   "value": repr(event[3])}
        elif kind in ("corrupt", "terminate"):
            obj = {"type": kind, "t": _frac_str(event[1]), "party": event[2]}
        else:
            obj = {"type": kind}
        lines.append(json.dumps(obj, sort_keys=True))
    return "\n".join(lines) + "\n"
