"""Partner assignment: min-max optimal pairing, worst-link-first, random.

Nodes are indexed ``0..N-1``. A pairing is a set of disjoint pairs plus the
nodes left single; its cost is ``E^max``, the largest per-node energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import energy
from .matching import Graph, augment, find_augmenting_path, maximum_matching
from .quality import posterior_sf_c

__all__ = [
    "PairingSet",
    "QualityMatrix",
    "WeightedPairGraph",
    "build_weight_graph",
    "e_max",
    "e_max_db",
    "perfect_matching_exists",
    "optimal_pairing",
    "brute_force_pairing",
    "iter_pairings",
    "candidate_sets",
    "no_candidate_probability",
    "wlf_pairing",
    "random_pairing",
    "no_cooperation",
    "format_pairs",
    "format_singles",
]


@dataclass(frozen=True)
class PairingSet:
    n_nodes: int
    pairs: frozenset = frozenset()
    singles: frozenset = frozenset()

    def __post_init__(self):
        pairs = frozenset(tuple(sorted(p)) for p in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "singles", frozenset(self.singles))
        seen: list[int] = [v for p in pairs for v in p] + list(self.singles)
        if any(i == j for i, j in pairs):
            raise ValueError("a node cannot pair with itself")
        if len(seen) != len(set(seen)) or set(seen) != set(range(self.n_nodes)):
            raise ValueError("pairs and singles must partition the node set")
        assert 2 * len(pairs) + len(self.singles) == self.n_nodes

    @classmethod
    def from_pairs(cls, n_nodes: int, pairs: Iterable[tuple[int, int]]) -> "PairingSet":
        pairs = [tuple(sorted(p)) for p in pairs]
        used = {v for p in pairs for v in p}
        return cls(n_nodes, frozenset(pairs), frozenset(set(range(n_nodes)) - used))

    def partner(self, i: int) -> int | None:
        for a, b in self.pairs:
            if a == i:
                return b
            if b == i:
                return a
        return None


def format_pairs(ps: PairingSet) -> str:
    return ";".join(f"{i}-{j}" for i, j in sorted(ps.pairs))


def format_singles(ps: PairingSet) -> str:
    return ";".join(str(i) for i in sorted(ps.singles))


@dataclass(frozen=True)
class QualityMatrix:
    """Per-link quality in dB as seen by the pairing algorithm.

    ``internode`` is a symmetric ``N x N`` array; its diagonal is ignored.
    """

    uplink: np.ndarray
    internode: np.ndarray
    source: str = "exact"

    def __post_init__(self):
        up = np.array(self.uplink, dtype=float).reshape(-1)
        n = len(up)
        inter = np.array(self.internode, dtype=float).reshape(n, n) if n else np.zeros((0, 0))
        off = ~np.eye(n, dtype=bool)
        if np.any(np.isnan(up)) or np.any(np.isnan(inter[off])):
            raise ValueError("quality matrix has missing entries")
        if not np.array_equal(inter[off], inter.T[off]):
            raise ValueError("internode qualities must be symmetric")
        np.fill_diagonal(inter, np.nan)
        up.setflags(write=False)
        inter.setflags(write=False)
        object.__setattr__(self, "uplink", up)
        object.__setattr__(self, "internode", inter)

    @property
    def n_nodes(self) -> int:
        return len(self.uplink)

    @classmethod
    def from_condensed(cls, uplink, internode_condensed, source: str = "exact") -> "QualityMatrix":
        """Build from the ``i < j`` row-major condensed internode vector."""
        up = np.asarray(uplink, dtype=float)
        n = len(up)
        full = np.full((n, n), np.nan)
        iu, ju = np.triu_indices(n, k=1)
        full[iu, ju] = internode_condensed
        full[ju, iu] = internode_condensed
        return cls(up, full, source)


@dataclass(frozen=True)
class WeightedPairGraph:
    """Energy weights of the loop-extended complete graph.

    Weights are kept in dB (``10 log10`` joules) so that ordering survives
    the huge dynamic range of Rician coding gains; the linear
    ``pair_weights`` / ``loop_weights`` are derived.
    """

    pair_db: np.ndarray
    loop_db: np.ndarray
    beta: np.ndarray = field(default=None)

    def __post_init__(self):
        loop = np.asarray(self.loop_db, dtype=float).reshape(-1)
        n = len(loop)
        pair = np.asarray(self.pair_db, dtype=float).reshape(n, n).copy()
        np.fill_diagonal(pair, np.nan)
        off = ~np.eye(n, dtype=bool)
        if not (np.all(np.isfinite(loop)) and np.all(np.isfinite(pair[off]))):
            raise ValueError("all weights must be finite")
        object.__setattr__(self, "pair_db", pair)
        object.__setattr__(self, "loop_db", loop)
        if self.beta is None:
            object.__setattr__(self, "beta", np.full((n, n), 0.5))

    @property
    def n_nodes(self) -> int:
        return len(self.loop_db)

    @property
    def pair_weights(self) -> np.ndarray:
        return 10.0 ** (self.pair_db / 10.0)

    @property
    def loop_weights(self) -> np.ndarray:
        return 10.0 ** (self.loop_db / 10.0)

    @classmethod
    def from_joules(cls, pair_weights, loop_weights) -> "WeightedPairGraph":
        pw = np.array(pair_weights, dtype=float)
        n = len(np.atleast_1d(loop_weights))
        pw = pw.reshape(n, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            pdb = 10.0 * np.log10(pw)
        np.fill_diagonal(pdb, 0.0)
        return cls(pdb, 10.0 * np.log10(np.asarray(loop_weights, dtype=float)))


def build_weight_graph(qualities: QualityMatrix, cfg: energy.RadioConfig) -> WeightedPairGraph:
    """Loop weights from direct transmission, pair weights from AF at the pair's
    slot split and balanced power; both from coding gains in dB."""
    n = qualities.n_nodes
    up = qualities.uplink
    loop = energy.direct_energy_db(up, cfg)
    pair = np.full((n, n), np.nan)
    beta = np.full((n, n), 0.5)
    if n > 1:
        iu, ju = np.triu_indices(n, k=1)
        e, b = energy.pair_energy_db(up[iu], qualities.internode[iu, ju], up[ju], cfg)
        pair[iu, ju] = pair[ju, iu] = e
        beta[iu, ju] = b
        beta[ju, iu] = 1.0 - b
    return WeightedPairGraph(pair, loop, beta)


def e_max_db(pairing: PairingSet, graph: WeightedPairGraph) -> float:
    vals = [graph.pair_db[i, j] for i, j in pairing.pairs] + [graph.loop_db[q] for q in pairing.singles]
    return float(max(vals))


def e_max(pairing: PairingSet, graph: WeightedPairGraph) -> float:
    """Largest per-node energy in joules."""
    return 10.0 ** (e_max_db(pairing, graph) / 10.0)


def _extended_graph(n: int, pairs: Iterable[tuple[int, int]], loops: Iterable[int]) -> Graph:
    # real vertices 0..n-1, virtual n..2n-1; virtual vertices form a clique so
    # the ones not absorbing a single can always pair up among themselves
    g = Graph(2 * n, pairs)
    for i in loops:
        g.add_edge(i, n + i)
    for a in range(n, 2 * n):
        for b in range(a + 1, 2 * n):
            g.add_edge(a, b)
    return g


def perfect_matching_exists(n_nodes: int, pairs: Iterable[tuple[int, int]], loops: Iterable[int]) -> bool:
    """Can every node be paired along a surviving edge or left single on a surviving loop?"""
    if n_nodes == 0:
        return True
    g = _extended_graph(n_nodes, pairs, loops)
    match = maximum_matching(g)
    return all(m != -1 for m in match)


def _matching_to_pairing(n: int, match: list[int]) -> PairingSet:
    pairs = {(i, match[i]) for i in range(n) if match[i] < n and i < match[i]}
    singles = {i for i in range(n) if match[i] == n + i}
    return PairingSet(n, frozenset(pairs), frozenset(singles))


def optimal_pairing(graph: WeightedPairGraph, verify_monotone: bool = False) -> PairingSet:
    """Min-max pairing by heaviest-element deletion on the loop-extended graph.

    Elements (pair edges and loops) are deleted in decreasing weight order,
    ties broken by ``(i, j)`` with loops as ``(i, i)``, for as long as a
    perfect matching survives. The matching is maintained incrementally:
    deleting an unmatched element cannot break it; deleting a matched one
    leaves two exposed vertices, and one blossom search decides whether
    they can be re-covered.

    With ``verify_monotone`` the remaining deletion sequence is also
    checked, asserting that feasibility never comes back once lost.
    """
    n = graph.n_nodes
    if n == 1:
        return PairingSet(1, frozenset(), frozenset({0}))
    iu, ju = np.triu_indices(n, k=1)
    elems = [(-graph.pair_db[i, j], i, j) for i, j in zip(iu.tolist(), ju.tolist())]
    elems += [(-graph.loop_db[i], i, i) for i in range(n)]
    elems.sort()

    g = _extended_graph(n, zip(iu.tolist(), ju.tolist()), range(n))
    match = [-1] * (2 * n)
    for i in range(n):
        match[i], match[n + i] = n + i, i

    stop = len(elems)
    for k, (_, i, j) in enumerate(elems):
        u, v = (i, n + i) if i == j else (i, j)
        g.remove_edge(u, v)
        if match[u] != v:
            continue
        match[u] = match[v] = -1
        path = find_augmenting_path(g, match, u)
        if path is None:
            g.add_edge(u, v)
            match[u], match[v] = v, u
            stop = k
            break
        augment(match, path)

    result = _matching_to_pairing(n, match)
    if verify_monotone and stop < len(elems):
        kept = elems[stop + 1 :]
        for k in range(len(kept)):
            remaining = kept[k + 1 :]
            ok = perfect_matching_exists(
                n, [(i, j) for _, i, j in remaining if i != j], [i for _, i, j in remaining if i == j]
            )
            assert not ok, "matching feasibility increased along the deletion sequence"
    return result


def iter_pairings(nodes: Sequence[int]):
    """All partitions of ``nodes`` into pairs and singletons, as ``(pairs, singles)``."""
    if not nodes:
        yield [], []
        return
    first, rest = nodes[0], nodes[1:]
    for pairs, singles in iter_pairings(rest):
        yield pairs, [first] + singles
    for k, partner in enumerate(rest):
        others = rest[:k] + rest[k + 1 :]
        for pairs, singles in iter_pairings(others):
            yield [(first, partner)] + pairs, singles


def brute_force_pairing(graph: WeightedPairGraph) -> tuple[PairingSet, float]:
    """Exhaustive min-max search; returns the best pairing and its ``E^max`` in dB."""
    n = graph.n_nodes
    best, best_val = None, math.inf
    for pairs, singles in iter_pairings(list(range(n))):
        vals = [graph.pair_db[i, j] for i, j in pairs] + [graph.loop_db[q] for q in singles]
        v = max(vals)
        if v < best_val:
            best, best_val = (pairs, singles), v
    return PairingSet(n, frozenset(best[0]), frozenset(best[1])), float(best_val)


def candidate_sets(qualities: QualityMatrix, tau: float) -> list[set[int]]:
    """``C_P(i) = {j : c_ij - c_i0 > tau}``."""
    n = qualities.n_nodes
    diff = qualities.internode - qualities.uplink[:, None]
    with np.errstate(invalid="ignore"):
        ok = diff > tau
    np.fill_diagonal(ok, False)
    return [set(np.flatnonzero(ok[i]).tolist()) for i in range(n)]


def no_candidate_probability(mu, sigma, L_obs, c_i0: float, tau: float) -> float:
    """Probability that none of the listed links clears ``c_i0 + tau``.

    ``mu``, ``sigma`` describe ``K | L`` for each potential partner link and
    ``L_obs`` its observed path loss; tails come from the shifted log-normal.
    """
    tails = posterior_sf_c(mu, sigma, L_obs, c_i0 + tau)
    return float(np.prod(1.0 - np.atleast_1d(tails)))


def wlf_pairing(qualities: QualityMatrix, tau: float) -> PairingSet:
    """Worst-link-first assignment.

    With odd N the best-uplink node stays single first. Then the worst
    remaining uplink picks, among its still-unassigned candidates, the one
    with the best uplink; with no such candidate it stays single. Ties go
    to the lowest node id.
    """
    n = qualities.n_nodes
    up = qualities.uplink
    cands = candidate_sets(qualities, tau)
    # stable sort on uplink gives lowest-id tie-breaking in both directions
    worst_first = sorted(range(n), key=lambda i: (up[i], i))
    rank = {v: k for k, v in enumerate(sorted(range(n), key=lambda i: (-up[i], i)))}
    free = [True] * n
    pairs, singles = [], []
    if n % 2 == 1:
        best = min(range(n), key=lambda i: (-up[i], i))
        free[best] = False
        singles.append(best)
    for i in worst_first:
        if not free[i]:
            continue
        free[i] = False
        options = [j for j in cands[i] if free[j]]
        if options:
            j = min(options, key=rank.__getitem__)
            free[j] = False
            pairs.append((i, j))
        else:
            singles.append(i)
    return PairingSet(n, frozenset(pairs), frozenset(singles))


def random_pairing(n_nodes: int, rng: np.random.Generator) -> PairingSet:
    """Uniform random disjoint pairing; odd N leaves one uniformly chosen node single."""
    perm = rng.permutation(n_nodes).tolist()
    singles = []
    if n_nodes % 2 == 1:
        singles.append(perm.pop(0))
    pairs = [(perm[k], perm[k + 1]) for k in range(0, len(perm), 2)]
    return PairingSet(n_nodes, frozenset(pairs), frozenset(singles))


def no_cooperation(n_nodes: int) -> PairingSet:
    return PairingSet(n_nodes, frozenset(), frozenset(range(n_nodes)))
