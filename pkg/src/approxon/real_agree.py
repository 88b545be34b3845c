"""epsilon-agreement on exact rationals via edge agreement on integers.

Scale by 2/epsilon, round to the nearest integer with ties toward zero, agree
on integers, then move back toward the own input by at most 1/2 and rescale.
Everything is exact rational arithmetic; the reduction itself sends nothing.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable

from .automaton import Automaton, Composite, OutputLatch, ProtoContext
from .encoding import KIND_AGR_Z
from .errors import InvalidEpsilon


def round_ties_toward_zero(x: Fraction | int) -> int:
    """Nearest integer; an exact half rounds to the neighbor closer to zero."""
    x = Fraction(x)
    floor = x.numerator // x.denominator
    remainder = x - floor
    half = Fraction(1, 2)
    if remainder < half:
        return floor
    if remainder > half:
        return floor + 1
    return floor if x > 0 else floor + 1


def unround(y_prime: int, v: Fraction | int) -> Fraction:
    """Move from the agreed integer toward v by at most one half."""
    v = Fraction(v)
    half = Fraction(1, 2)
    if y_prime <= v:
        return min(y_prime + half, v)
    return max(y_prime - half, v)


class EpsilonAgreement(Composite):
    """Rational-valued approximate agreement with gap at most epsilon."""

    def __init__(self, ctx: ProtoContext, epsilon: Fraction,
                 agr_z_factory: Callable[[ProtoContext], Automaton]):
        epsilon = Fraction(epsilon)
        if epsilon <= 0:
            raise InvalidEpsilon(f"epsilon must be positive, got {epsilon}")
        super().__init__()
        self.ctx = ctx
        self.epsilon = epsilon
        self.scaled: Fraction | None = None
        self.rounded: int | None = None
        self.stashed_y: int | None = None
        self.latch = OutputLatch()
        self.join((KIND_AGR_Z, 0), agr_z_factory(ctx))

    def on_input(self, value: Fraction):
        self.scaled = Fraction(value) * 2 / self.epsilon
        self.rounded = round_ties_toward_zero(self.scaled)
        effects = self.feed((KIND_AGR_Z, 0), self.rounded)
        if self.stashed_y is not None:
            effects += self._on_agreed(self.stashed_y)
        return effects

    def on_child_output(self, component, value):
        return self._on_agreed(value)

    def _on_agreed(self, y_prime: int):
        if self.scaled is None:
            self.stashed_y = y_prime
            return []
        return self.latch.emit(unround(y_prime, self.scaled) * self.epsilon / 2)


def build_epsilon_agreement(ctx: ProtoContext, epsilon,
                            agr_z_factory=None) -> EpsilonAgreement:
    if agr_z_factory is None:
        from .path_agree import build_agr_z
        agr_z_factory = build_agr_z
    return EpsilonAgreement(ctx, epsilon, agr_z_factory)
