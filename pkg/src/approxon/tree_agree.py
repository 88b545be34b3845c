"""Recursive edge agreement in trees of diameter 2^j.

Each level runs one 2-graded consensus on the index of the central subtree
holding the party's vertex, then recurses into that subtree (diameter halved).
The auxiliary anchor inputs let parties that only know an anchor vertex keep
the nested instances live without knowing the tree.
"""

from __future__ import annotations

from dataclasses import dataclass

from .automaton import Composite, OutputLatch, ProtoContext
from .encoding import KIND_GC2K, KIND_TC, encode_value
from .errors import BadAnchor
from .graded import GradedConsensus
from .trees import CentralDecomposition, Tree, central_decomposition


@dataclass(frozen=True)
class TcInput:
    """(vertex, tree-or-None, anchor a, anchor b).

    Either the tree and anchor a are both known, or the tree is unknown and
    exactly one anchor is known.
    """

    v: int
    tree: Tree | None
    a: int | None
    b: int | None

    def validate(self) -> None:
        if self.tree is not None:
            if self.a is None:
                raise BadAnchor("a tree-carrying input needs anchor a")
        elif (self.a is None) == (self.b is None):
            raise BadAnchor("without the tree exactly one anchor must be known")


def index_bits(delta_max: int) -> int:
    """Bit width for subtree indices 1..delta_max (encoded as index-1)."""
    assert delta_max >= 2
    return max(1, (delta_max - 1).bit_length())


class TreeAgreement(Composite):
    """Edge agreement for trees of diameter 2^j with max degree <= delta_max."""

    def __init__(self, ctx: ProtoContext, j: int, delta_max: int):
        assert j >= 0
        super().__init__()
        self.ctx = ctx
        self.j = j
        self.delta_max = delta_max
        self.bits = index_bits(delta_max)
        self.input: TcInput | None = None
        self.decomposition: CentralDecomposition | None = None
        self.stashed_pair = None
        self.latch = OutputLatch()
        if j >= 1:
            self.join(self._graded_component(), self._make_graded())
            self.join((KIND_TC, j - 1), type(self)(ctx, j - 1, delta_max))

    def _graded_component(self) -> tuple[int, int]:
        return (KIND_GC2K, 0)

    def _make_graded(self):
        return GradedConsensus(self.ctx, 1, self.bits)

    def _index_payload(self, k: int) -> int:
        return k - 1

    def on_input(self, value: TcInput):
        value.validate()
        self.input = value
        if self.j == 0:
            return self.latch.emit(value.v)
        child = (KIND_TC, self.j - 1)
        graded = self._graded_component()
        if value.tree is None and value.a is not None:
            return (self.feed(graded, self._index_payload(1))
                    + self.feed(child, TcInput(value.v, None, None, value.a))
                    + self.latch.emit(value.a))
        if value.tree is None:
            return (self.feed(graded, self._index_payload(2))
                    + self.feed(child, TcInput(value.v, None, None, value.b))
                    + self.latch.emit(value.b))
        self.decomposition = central_decomposition(value.tree, value.a, value.b)
        k = self.decomposition.index_of(value.v)
        effects = self.feed(graded, self._index_payload(k))
        if self.stashed_pair is not None:
            effects += self._on_graded(self.stashed_pair)
        return effects

    def on_child_output(self, component, value):
        if component == (KIND_TC, self.j - 1):
            return self.latch.emit(value)
        assert component == self._graded_component()
        return self._on_graded(value)

    def _on_graded(self, value):
        if self.input is None:
            self.stashed_pair = value
            return []
        if self.input.tree is None:
            return []
        dec = self.decomposition
        child = (KIND_TC, self.j - 1)
        index_value, grade = value
        if grade == 0:
            return (self.feed(child, TcInput(dec.sigma, None, dec.sigma, None))
                    + self.latch.emit(dec.sigma))
        k = index_value + 1
        if not 1 <= k <= len(dec.neighbors):
            # Unreachable under honest input discipline: graded intrusion
            # tolerance makes every positive-grade value an honest input.
            raise BadAnchor(f"graded consensus settled on index {k} of {len(dec.neighbors)}")
        if k == 1:
            b_next = self.input.a
        elif k == 2:
            b_next = self.input.b
        else:
            b_next = None
        members = dec.subtrees[k - 1]
        v_next = self.input.v if (grade == 2 and self.input.v in members) else dec.sigma
        return self.feed(child, TcInput(v_next, dec.subtree_tree(k), dec.sigma, b_next))


def build_tc(ctx: ProtoContext, j: int, delta_max: int) -> TreeAgreement:
    return TreeAgreement(ctx, j, delta_max)


def path_input(v: int, lo: int, hi: int) -> TcInput:
    """Vertex input for edge agreement in the integer path lo..hi (a power-of-two span)."""
    return TcInput(v, Tree.path(lo, hi), lo, None)
