"""Party automatons: pure state machines consuming inputs/deliveries, emitting effects.

An automaton never touches a clock, a socket or shared state; the simulation
kernel owns scheduling.  Handlers return effect lists:

* ``Multicast``   -- send (kind, payload) to every party, tagged with the
  emitting instance's position in the protocol tree.
* ``Output``      -- produce the protocol output (parents may intercept).
* ``Halt``        -- terminate the whole party (termination wrappers only).
* ``Signal``      -- internal parent notification; must never reach the kernel.

``Composite`` implements nested-instance routing by instance tag: messages for
a child joined later are buffered and replayed on join, which is how "join a
common instance" behaves under asynchrony.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .encoding import Tag


@dataclass(frozen=True)
class ProtoContext:
    """Static protocol parameters shared by every instance inside one party."""

    n: int
    t: int

    @property
    def small_quorum(self) -> int:
        return self.t + 1

    @property
    def big_quorum(self) -> int:
        return 2 * self.t + 1

    @property
    def prop_quorum(self) -> int:
        return self.n - self.t


@dataclass(slots=True)
class Multicast:
    kind: int
    payload: bytes
    tag: Tag = ()


@dataclass(slots=True)
class Output:
    value: Any


@dataclass(slots=True)
class Halt:
    pass


@dataclass(slots=True)
class Signal:
    name: str
    value: Any = None


Effect = Multicast | Output | Halt | Signal


class Automaton:
    """Base class; subclasses override the two handlers."""

    def on_input(self, value) -> list[Effect]:
        return []

    def on_message(self, sender: int, tag: Tag, kind: int, payload: bytes) -> list[Effect]:
        return []


class Composite(Automaton):
    """An automaton owning child instances addressed by (protocol-kind, index).

    Subclasses call ``join`` when the protocol text says to join a common
    instance, ``feed`` to give a child its input, and override
    ``on_child_output`` / ``on_child_signal`` to consume child results.
    """

    def __init__(self):
        self._children: dict[tuple[int, int], Automaton] = {}
        self._backlog: dict[tuple[int, int], list] = {}

    def join(self, component: tuple[int, int], child: Automaton) -> list[Effect]:
        assert component not in self._children, f"duplicate child {component}"
        self._children[component] = child
        effects = []
        for sender, tag, kind, payload in self._backlog.pop(component, ()):
            effects += self._wrap(component, child.on_message(sender, tag, kind, payload))
        return effects

    def feed(self, component: tuple[int, int], value) -> list[Effect]:
        return self._wrap(component, self._children[component].on_input(value))

    def has_child(self, component: tuple[int, int]) -> bool:
        return component in self._children

    def on_message(self, sender: int, tag: Tag, kind: int, payload: bytes) -> list[Effect]:
        if not tag:
            return self.on_local_message(sender, kind, payload)
        component = tag[0]
        child = self._children.get(component)
        if child is None:
            self._backlog.setdefault(component, []).append((sender, tag[1:], kind, payload))
            return []
        return self._wrap(component, child.on_message(sender, tag[1:], kind, payload))

    def on_local_message(self, sender: int, kind: int, payload: bytes) -> list[Effect]:
        return []

    def on_child_output(self, component: tuple[int, int], value) -> list[Effect]:
        return []

    def on_child_signal(self, component: tuple[int, int], signal: Signal) -> list[Effect]:
        return [signal]

    def on_child_halt(self, component: tuple[int, int]) -> list[Effect]:
        return [Halt()]

    def _wrap(self, component: tuple[int, int], effects: list[Effect]) -> list[Effect]:
        wrapped: list[Effect] = []
        for effect in effects:
            if isinstance(effect, Multicast):
                wrapped.append(Multicast(effect.kind, effect.payload, (component,) + effect.tag))
            elif isinstance(effect, Output):
                wrapped += self.on_child_output(component, effect.value)
            elif isinstance(effect, Signal):
                wrapped += self.on_child_signal(component, effect)
            elif isinstance(effect, Halt):
                wrapped += self.on_child_halt(component)
            else:
                wrapped.append(effect)
        return wrapped


class OutputLatch:
    """Once-latch shared by every output site of one protocol instance."""

    __slots__ = ("fired",)

    def __init__(self):
        self.fired = False

    def emit(self, value) -> list[Effect]:
        if self.fired:
            return []
        self.fired = True
        return [Output(value)]


@dataclass(slots=True)
class SenderTally:
    """Distinct-sender counter keyed by value; duplicate (sender, value) ignored."""

    seen: dict = field(default_factory=dict)

    def add(self, value, sender: int) -> int:
        senders = self.seen.get(value)
        if senders is None:
            senders = self.seen[value] = {}
        senders[sender] = None
        return len(senders)

    def count(self, value) -> int:
        senders = self.seen.get(value)
        return 0 if senders is None else len(senders)

    def values_with_at_least(self, threshold: int):
        return [v for v, s in self.seen.items() if len(s) >= threshold]
