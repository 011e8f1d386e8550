"""Maximum-cardinality matching on general graphs (Edmonds' blossom search).

Only augmenting-path search is needed by the pairing solver: it keeps a
perfect matching and, after deleting one matched edge, tries to re-augment
between the two exposed vertices.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable

__all__ = ["Graph", "find_augmenting_path", "augment", "maximum_matching", "is_perfect"]


class Graph:
    """Undirected simple graph on vertices ``0..n-1`` with adjacency sets."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        self.n = n
        self.adj: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            self.add_edge(u, v)

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError("self-loops are not edges of a matching graph")
        self.adj[u].add(v)
        self.adj[v].add(u)

    def remove_edge(self, u: int, v: int) -> None:
        self.adj[u].discard(v)
        self.adj[v].discard(u)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]


def find_augmenting_path(graph: Graph, match: list[int], root: int) -> list[int] | None:
    """Alternating-tree search from the exposed vertex ``root``.

    Returns the augmenting path as a vertex list starting at ``root`` and
    ending at another exposed vertex, or ``None`` if none exists. Odd
    cycles (blossoms) are shrunk on the fly by relabeling their base.
    """
    n = graph.n
    adj = graph.adj
    parent = [-1] * n
    base = list(range(n))
    in_tree = [False] * n
    in_tree[root] = True
    queue = deque([root])

    def lca(a: int, b: int) -> int:
        seen = [False] * n
        while True:
            a = base[a]
            seen[a] = True
            if match[a] == -1:
                break
            a = parent[match[a]]
        while True:
            b = base[b]
            if seen[b]:
                return b
            b = parent[match[b]]

    def mark_path(v: int, b: int, child: int, blossom: list[bool]) -> None:
        while base[v] != b:
            blossom[base[v]] = blossom[base[match[v]]] = True
            parent[v] = child
            child = match[v]
            v = parent[match[v]]

    while queue:
        v = queue.popleft()
        for u in adj[v]:
            if base[v] == base[u] or match[v] == u:
                continue
            if u == root or (match[u] != -1 and parent[match[u]] != -1):
                b = lca(v, u)
                blossom = [False] * n
                mark_path(v, b, u, blossom)
                mark_path(u, b, v, blossom)
                for i in range(n):
                    if blossom[base[i]]:
                        base[i] = b
                        if not in_tree[i]:
                            in_tree[i] = True
                            queue.append(i)
            elif parent[u] == -1:
                parent[u] = v
                if match[u] == -1:
                    path = [u]
                    w = u
                    while True:
                        pw = parent[w]
                        path.append(pw)
                        w = match[pw]
                        if w == -1:
                            break
                        path.append(w)
                    return path[::-1]
                in_tree[match[u]] = True
                queue.append(match[u])
    return None


def augment(match: list[int], path: list[int]) -> None:
    """Flip matched/unmatched edges along an augmenting path, in place."""
    for k in range(0, len(path) - 1, 2):
        a, b = path[k], path[k + 1]
        match[a] = b
        match[b] = a


def maximum_matching(graph: Graph, match: list[int] | None = None) -> list[int]:
    """Mate array of a maximum-cardinality matching (``-1`` = exposed)."""
    n = graph.n
    match = [-1] * n if match is None else list(match)
    # greedy warm start
    for v in range(n):
        if match[v] == -1:
            for u in sorted(graph.adj[v]):
                if match[u] == -1:
                    match[v], match[u] = u, v
                    break
    for v in range(n):
        if match[v] == -1:
            path = find_augmenting_path(graph, match, v)
            if path is not None:
                augment(match, path)
    return match


def is_perfect(match: list[int], vertices: Iterable[int] | None = None) -> bool:
    vs = range(len(match)) if vertices is None else vertices
    return all(match[v] != -1 for v in vs)
