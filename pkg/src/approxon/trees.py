"""Tree model and the tree mathematics behind edge agreement.

Vertices are integers (not necessarily contiguous, so induced subtrees keep
their original ids).  All traversals iterate sorted neighbor lists, so every
derived structure is deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from random import Random

from .errors import BadAnchor, OddDiameter


class Tree:
    """Connected acyclic graph over integer vertex ids."""

    __slots__ = ("adj",)

    def __init__(self, adj: dict[int, tuple[int, ...]]):
        self.adj = adj

    @classmethod
    def from_edges(cls, edges, vertices=None) -> "Tree":
        adj: dict[int, list[int]] = {}
        if vertices is not None:
            for v in vertices:
                adj[v] = []
        for u, v in edges:
            adj.setdefault(u, []).append(v)
            adj.setdefault(v, []).append(u)
        tree = cls({v: tuple(sorted(ns)) for v, ns in sorted(adj.items())})
        tree.validate()
        return tree

    @classmethod
    def path(cls, lo: int, hi: int) -> "Tree":
        assert hi > lo
        return cls.from_edges([(v, v + 1) for v in range(lo, hi)])

    def validate(self) -> None:
        n = len(self.adj)
        if n == 0:
            raise ValueError("empty tree")
        edges = sum(len(ns) for ns in self.adj.values()) // 2
        if edges != n - 1:
            raise ValueError(f"{n} vertices need {n - 1} edges, got {edges}")
        if n > 1 and len(self.bfs(next(iter(self.adj)))) != n:
            raise ValueError("tree is not connected")

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(self.adj)

    @property
    def n_vertices(self) -> int:
        return len(self.adj)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adj[v]

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def max_degree(self) -> int:
        return max(len(ns) for ns in self.adj.values())

    def __contains__(self, v: int) -> bool:
        return v in self.adj

    def __eq__(self, other) -> bool:
        return isinstance(other, Tree) and self.adj == other.adj

    def __hash__(self):
        return hash(tuple(sorted((v, ns) for v, ns in self.adj.items())))

    def bfs(self, start: int) -> dict[int, int]:
        dist = {start: 0}
        frontier = deque([start])
        while frontier:
            u = frontier.popleft()
            for v in self.adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    frontier.append(v)
        return dist

    def bfs_parents(self, start: int) -> dict[int, int | None]:
        parent: dict[int, int | None] = {start: None}
        frontier = deque([start])
        while frontier:
            u = frontier.popleft()
            for v in self.adj[u]:
                if v not in parent:
                    parent[v] = u
                    frontier.append(v)
        return parent

    def path_between(self, u: int, v: int) -> list[int]:
        parent = self.bfs_parents(u)
        path = [v]
        while path[-1] != u:
            path.append(parent[path[-1]])
        path.reverse()
        return path

    def induced(self, keep) -> "Tree":
        keep = set(keep)
        return Tree({v: tuple(n for n in ns if n in keep)
                     for v, ns in self.adj.items() if v in keep})

    def edge_list(self) -> list[tuple[int, int]]:
        """Edges sorted lexicographically, each as (low, high)."""
        return sorted((min(u, v), max(u, v))
                      for u, ns in self.adj.items() for v in ns if u < v)


def _farthest(tree: Tree, start: int) -> tuple[int, int]:
    """(vertex, distance) farthest from start; ties broken by smallest id."""
    dist = tree.bfs(start)
    best = max(dist.values())
    vertex = min(v for v, d in dist.items() if d == best)
    return vertex, best


def diametral_path(tree: Tree) -> list[int]:
    if tree.n_vertices == 1:
        return [tree.vertices[0]]
    u, _ = _farthest(tree, min(tree.vertices))
    v, _ = _farthest(tree, u)
    return tree.path_between(u, v)


def tree_diameter(tree: Tree) -> int:
    return len(diametral_path(tree)) - 1


def tree_center(tree: Tree) -> int:
    """The unique vertex at distance at most D/2 from every vertex (even D >= 2)."""
    path = diametral_path(tree)
    diameter = len(path) - 1
    if diameter < 2 or diameter % 2:
        raise OddDiameter(f"center needs an even diameter >= 2, got {diameter}")
    return path[diameter // 2]


@dataclass
class CentralDecomposition:
    tree: Tree
    sigma: int
    neighbors: list[int]                 # w_1 .. w_d in protocol order
    subtrees: list[frozenset[int]]       # H_k vertex sets, parallel to neighbors

    def subtree_tree(self, k: int) -> Tree:
        """H_k as a tree with original vertex ids (1-based k)."""
        return self.tree.induced(self.subtrees[k - 1])

    def index_of(self, v: int) -> int:
        """Minimum k with v in H_k; the center belongs to every subtree."""
        if v == self.sigma:
            return 1
        for k, members in enumerate(self.subtrees, start=1):
            if v in members:
                return k
        raise KeyError(f"vertex {v} not in the tree")


def _first_step(tree: Tree, sigma: int, target: int, parents: dict) -> int:
    """Neighbor of sigma on the path toward target (parents from BFS at sigma)."""
    v = target
    while parents[v] != sigma:
        v = parents[v]
    return v


def central_decomposition(tree: Tree, a: int | None = None,
                          b: int | None = None) -> CentralDecomposition:
    path = diametral_path(tree)
    diameter = len(path) - 1
    if diameter < 2 or diameter % 2:
        raise OddDiameter(f"decomposition needs an even diameter >= 2, got {diameter}")
    sigma = path[diameter // 2]
    parents = tree.bfs_parents(sigma)
    dist = tree.bfs(sigma)
    half = diameter // 2
    ordered: list[int] = []
    for anchor in (a, b):
        if anchor is None:
            continue
        if anchor not in tree.adj or dist[anchor] != half:
            raise BadAnchor(f"anchor {anchor} is not a leaf at distance {half} from {sigma}")
        step = _first_step(tree, sigma, anchor, parents)
        if step in ordered:
            raise BadAnchor(f"anchors {a} and {b} leave the center by the same neighbor")
        ordered.append(step)
    ordered += [w for w in sorted(tree.neighbors(sigma)) if w not in ordered]
    branches: dict[int, set[int]] = {w: {sigma, w} for w in ordered}
    for v in tree.adj:
        if v == sigma or v in branches:
            continue
        branches[_first_step(tree, sigma, v, parents)].add(v)
    return CentralDecomposition(tree, sigma, ordered,
                                [frozenset(branches[w]) for w in ordered])


def gc_input_index(v: int, decomposition: CentralDecomposition) -> int:
    return decomposition.index_of(v)


def convex_hull(tree: Tree, members) -> frozenset[int]:
    """Union of all pairwise paths among `members`, by pruning foreign leaves."""
    members = set(members)
    if not members:
        raise ValueError("hull of an empty set")
    degree = {v: len(ns) for v, ns in tree.adj.items()}
    removed: set[int] = set()
    queue = deque(v for v, d in degree.items() if d <= 1 and v not in members)
    while queue:
        leaf = queue.popleft()
        if leaf in removed:
            continue
        removed.add(leaf)
        for neighbor in tree.adj[leaf]:
            if neighbor in removed:
                continue
            degree[neighbor] -= 1
            if degree[neighbor] == 1 and neighbor not in members:
                queue.append(neighbor)
    return frozenset(v for v in tree.adj if v not in removed)


def grow_to_power_of_two(tree: Tree) -> tuple[Tree, int]:
    """Pad the tree to diameter 2^ceil(log2 D) by extending one diametral endpoint.

    Returns the grown tree and a diametral endpoint of it.  Max degree never
    increases (the padded endpoint goes from degree 1 to 2).
    """
    path = diametral_path(tree)
    diameter = len(path) - 1
    assert diameter >= 1
    if diameter & (diameter - 1) == 0:
        return tree, path[0]
    target = 1 << diameter.bit_length()
    adj = {v: list(ns) for v, ns in tree.adj.items()}
    tip = path[-1]
    next_id = max(adj) + 1
    for _ in range(target - diameter):
        adj[tip].append(next_id)
        adj[next_id] = [tip]
        tip = next_id
        next_id += 1
    grown = Tree({v: tuple(sorted(ns)) for v, ns in sorted(adj.items())})
    return grown, tip


def build_spider_fixture(value_count: int, k: int) -> tuple[Tree, dict[int, int]]:
    """Spider tree with a limb of length k per value; maps value m to its leaf.

    With leaf-only inputs this tree makes edge agreement coincide with graded
    consensus on grades 0..k: the hub decodes to (bottom, 0) and the limb-m
    vertex at depth d to (m, d).
    """
    assert value_count >= 1 and k >= 1
    edges = []
    mapping = {}
    for m in range(value_count):
        base = 1 + m * k
        edges.append((0, base))
        for d in range(1, k):
            edges.append((base + d - 1, base + d))
        mapping[m] = base + k - 1
    return Tree.from_edges(edges), mapping


def spider_decode(vertex: int, value_count: int, k: int) -> tuple[int | None, int]:
    """Inverse of the spider fixture embedding: vertex -> (value, grade)."""
    if vertex == 0:
        return (None, 0)
    m, d = divmod(vertex - 1, k)
    assert 0 <= m < value_count
    return (m, d + 1)


def random_agreement_tree(j: int, delta_max: int, rng: Random) -> tuple[Tree, int, int]:
    """Random tree of diameter 2^j whose central subtrees halve recursively.

    Built by gluing 2..delta_max diameter-2^(j-1) units at a shared center via
    one diametral endpoint each, so every recursion level of the agreement
    protocol sees a well-formed even-diameter subtree.  Returns (tree, a, b)
    with a, b diametral leaves at distance 2^j.
    """
    assert j >= 0 and delta_max >= 2
    counter = [0]

    def alloc() -> int:
        counter[0] += 1
        return counter[0] - 1

    def unit(level: int) -> tuple[list[tuple[int, int]], int, int]:
        if level == 0:
            p, q = alloc(), alloc()
            return [(p, q)], p, q
        sigma = alloc()
        edges: list[tuple[int, int]] = []
        corners: list[int] = []
        for _ in range(rng.randint(2, delta_max)):
            sub_edges, p, q = unit(level - 1)
            edges += [(sigma if x == p else x, sigma if y == p else y)
                      for x, y in sub_edges]
            corners.append(q)
        return edges, corners[0], corners[1]

    edges, a, b = unit(j)
    return Tree.from_edges(edges), a, b
