"""Edge agreement on infinite paths.

``ExponentialSearch`` level j settles whether the parties live below 2^(j+1)
(finish in that power-of-two path) or above (recurse one level up); ``TwoStep``
first agrees on the magnitude class, nearly halving the rounds for large
inputs; ``AgrZ`` splits on sign and mirrors negative runs.  Integers are
arbitrary precision throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .automaton import Automaton, Composite, Multicast, OutputLatch, ProtoContext
from .encoding import KIND_AGR_N, KIND_EXP, KIND_GC2K, KIND_TC
from .graded import GradedConsensus
from .tree_agree import TreeAgreement, path_input

M_LEFT = 1
M_RIGHT = 2
M_CENTER = 3

_LEFT_BIT = 0
_RIGHT_BIT = 1


def floor_log2_plus1(v: int) -> int:
    """floor(log2(v + 1)) computed exactly on integers."""
    assert v >= 0
    return (v + 1).bit_length() - 1


@dataclass(frozen=True)
class TwoStepDecode:
    z: int
    k: int
    r: int


def decode_two_step(z: int) -> TwoStepDecode:
    assert z >= 0
    return TwoStepDecode(z, z // 5, z % 5)


class ExponentialSearch(Composite):
    """Edge agreement in the infinite path (2^j - 1, ...)."""

    def __init__(self, ctx: ProtoContext, j: int):
        assert j >= 0
        super().__init__()
        self.ctx = ctx
        self.j = j
        self.boundary = (1 << (j + 1)) - 1      # 2^(j+1) - 1, the shared pivot
        self.input: int | None = None
        self.grade: int | None = None
        self.side: int | None = None
        self.side_ready: list[int] = []         # LEFT/RIGHT bits in quorum order
        self.left_senders: dict[int, None] = {}
        self.right_senders: dict[int, None] = {}
        self.center_senders: dict[int, None] = {}
        self.stashed_pair = None                # graded output seen before our input
        self.latch = OutputLatch()
        self.malformed = 0
        self.join((KIND_GC2K, 0), GradedConsensus(ctx, 1, 1))

    def on_input(self, value: int):
        assert value >= (1 << self.j) - 1
        self.input = value
        bit = _LEFT_BIT if value < (1 << (self.j + 1)) else _RIGHT_BIT
        effects = self.feed((KIND_GC2K, 0), bit)
        if self.stashed_pair is not None:
            effects += self._on_graded(self.stashed_pair)
        return effects

    def on_local_message(self, sender, kind, payload):
        if payload or kind not in (M_LEFT, M_RIGHT, M_CENTER):
            self.malformed += 1
            return []
        effects = []
        if kind == M_CENTER:
            self.center_senders[sender] = None
            if len(self.center_senders) >= self.ctx.small_quorum:
                effects += self.latch.emit(self.boundary)
            return effects
        tally = self.left_senders if kind == M_LEFT else self.right_senders
        bit = _LEFT_BIT if kind == M_LEFT else _RIGHT_BIT
        tally[sender] = None
        if len(tally) == self.ctx.small_quorum:
            self.side_ready.append(bit)
            if self.grade == 0:
                effects += self._settle_side(bit)
        return effects

    def on_child_output(self, component, value):
        kind, _ = component
        if kind == KIND_GC2K:
            return self._on_graded(value)
        if self.grade is not None and self.grade >= 1:
            return self.latch.emit(value)
        return []

    def _on_graded(self, pair):
        if self.input is None:
            self.stashed_pair = pair
            return []
        side_value, grade = pair
        self.grade = grade
        effects = []
        if grade == 0:
            effects += self.latch.emit(self.boundary)
            effects.append(Multicast(M_CENTER, b""))
            if self.side_ready:
                effects += self._settle_side(self.side_ready[0])
            return effects
        if grade == 1:
            effects.append(Multicast(M_LEFT if side_value == _LEFT_BIT else M_RIGHT, b""))
            next_value = self.boundary
        elif side_value == _LEFT_BIT:
            next_value = min(self.input, self.boundary)
        else:
            next_value = max(self.input, self.boundary)
        return effects + self._settle_side(side_value, next_value)

    def _settle_side(self, side_bit: int, next_value: int | None = None):
        if self.side is not None:
            return []
        self.side = side_bit
        if next_value is None:
            next_value = self.boundary
        if side_bit == _LEFT_BIT:
            component = (KIND_TC, self.j)
            effects = self.join(component, TreeAgreement(self.ctx, self.j, 2))
            lo = (1 << self.j) - 1
            return effects + self.feed(component, path_input(next_value, lo, self.boundary))
        component = (KIND_EXP, self.j + 1)
        effects = self.join(component, ExponentialSearch(self.ctx, self.j + 1))
        return effects + self.feed(component, next_value)


class TwoStep(Composite):
    """Edge agreement in N: agree on the magnitude class 5*floor(log2(v+1)),
    then finish inside one power-of-two path."""

    def __init__(self, ctx: ProtoContext, agr_n_factory: Callable[[ProtoContext], Automaton]):
        super().__init__()
        self.ctx = ctx
        self.input: int | None = None
        self.k: int | None = None
        self.r: int | None = None
        self.stashed_z: int | None = None
        self.latch = OutputLatch()
        self.join((KIND_AGR_N, 0), agr_n_factory(ctx))

    def on_input(self, value: int):
        assert value >= 0
        self.input = value
        effects = self.feed((KIND_AGR_N, 0), 5 * floor_log2_plus1(value))
        if self.stashed_z is not None:
            effects += self._on_class(self.stashed_z)
        return effects

    def on_child_output(self, component, value):
        kind, index = component
        if kind == KIND_TC:
            if (self.r <= 1 and index == self.k) or (self.r == 4 and index == self.k + 1):
                return self.latch.emit(value)
            return []
        return self._on_class(value)

    def _on_class(self, value: int):
        if self.input is None:
            self.stashed_z = value
            return []
        decoded = decode_two_step(value)
        self.k, self.r = decoded.k, decoded.r
        lo = (1 << self.k) - 1
        hi = (1 << (self.k + 1)) - 1
        v_next = min(max(self.input, lo), hi) if self.r == 0 else hi
        effects = []
        if self.r <= 2:
            effects += self.join((KIND_TC, self.k), TreeAgreement(self.ctx, self.k, 2))
            effects += self.feed((KIND_TC, self.k), path_input(v_next, lo, hi))
        if 2 <= self.r <= 3:
            effects += self.latch.emit(v_next)
        if self.r >= 3:
            top = (1 << (self.k + 2)) - 1
            effects += self.join((KIND_TC, self.k + 1),
                                 TreeAgreement(self.ctx, self.k + 1, 2))
            effects += self.feed((KIND_TC, self.k + 1), path_input(v_next, hi, top))
        return effects


class AgrZ(Composite):
    """Edge agreement in Z: 2-graded consensus on the sign, then a possibly
    mirrored run of an edge-agreement-in-N protocol."""

    def __init__(self, ctx: ProtoContext, agr_n_factory: Callable[[ProtoContext], Automaton]):
        super().__init__()
        self.ctx = ctx
        self.input: int | None = None
        self.sign: int | None = None
        self.stashed_pair = None
        self.latch = OutputLatch()
        self.join((KIND_GC2K, 0), GradedConsensus(ctx, 1, 1))
        self.join((KIND_AGR_N, 0), agr_n_factory(ctx))

    def on_input(self, value: int):
        self.input = value
        effects = self.feed((KIND_GC2K, 0), 1 if value >= 0 else 0)
        if self.stashed_pair is not None:
            effects += self._on_sign(self.stashed_pair)
        return effects

    def on_child_output(self, component, value):
        kind, _ = component
        if kind == KIND_GC2K:
            return self._on_sign(value)
        if self.sign is None:
            return []
        return self.latch.emit(self.sign * value)

    def _on_sign(self, pair):
        if self.input is None:
            self.stashed_pair = pair
            return []
        bit, grade = pair
        if grade == 0:
            return self.feed((KIND_AGR_N, 0), 0) + self.latch.emit(0)
        self.sign = 1 if bit == 1 else -1
        v_next = max(0, (grade - 1) * self.sign * self.input)
        return self.feed((KIND_AGR_N, 0), v_next)


def build_exp(ctx: ProtoContext, j: int) -> ExponentialSearch:
    return ExponentialSearch(ctx, j)


def build_two_step(ctx: ProtoContext, agr_n_factory=None) -> TwoStep:
    if agr_n_factory is None:
        agr_n_factory = lambda c: ExponentialSearch(c, 0)
    return TwoStep(ctx, agr_n_factory)


def build_agr_z(ctx: ProtoContext, agr_n_factory=None) -> AgrZ:
    if agr_n_factory is None:
        agr_n_factory = lambda c: build_two_step(c)
    return AgrZ(ctx, agr_n_factory)
