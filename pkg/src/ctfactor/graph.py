"""Correlation thresholding and independent maximal clique search.

A graph is built by connecting every pair whose absolute correlation
strictly exceeds a threshold. The structural objects of interest are the
maximal cliques not covered by the union of the other maximal cliques;
each such clique owns at least one vertex that belongs to no other maximal
clique (a unique member), and it equals the closed neighborhood of any of
its unique members. That characterization gives a quadratic-time search:
test each vertex's closed neighborhood for cliqueness.

The search here does exactly that, with two cheap accelerations: closed
neighborhoods are cached by their byte pattern (equal neighborhoods share
one verdict), and a neighborhood whose members have smaller closed
neighborhoods than the candidate set is rejected without forming the
submatrix. A set-recursion Bron-Kerbosch enumerator (with pivoting) is
kept as an independent oracle for small graphs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, EmptyCliqueSet, TooLarge
from .model import Structure

__all__ = [
    "ThresholdedGraph",
    "CliqueSet",
    "build_graph",
    "neighborhood",
    "is_clique",
    "independent_maximal_cliques",
    "brute_force_independent_cliques",
    "structure_from_cliques",
]

#: Vertex-count guard for the brute-force enumerator.
BRUTE_FORCE_MAX_VERTICES = 25


@dataclass(frozen=True)
class ThresholdedGraph:
    """Simple undirected graph on ``p`` vertices from thresholding.

    ``adjacency`` is a symmetric boolean matrix with a False diagonal;
    ``closed`` is the same matrix with a True diagonal (closed
    neighborhoods as rows).
    """

    p: int
    tau: float
    adjacency: np.ndarray
    closed: np.ndarray

    def edge_count(self):
        return int(self.adjacency.sum()) // 2

    def edges(self):
        """Sorted list of (i, j) pairs with i < j."""
        ii, jj = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(a), int(b)) for a, b in zip(ii, jj)]


@dataclass(frozen=True)
class CliqueSet:
    """Independent maximal cliques with their unique members.

    ``cliques[k]`` and ``unique_members[k]`` are parallel; every unique
    member lies in exactly its own clique and in no other maximal clique
    of the source graph. Cliques are ordered by their smallest unique
    member.
    """

    p: int
    tau: float
    cliques: tuple
    unique_members: tuple

    def __len__(self):
        return len(self.cliques)

    def to_json_dict(self):
        return {
            "p": self.p,
            "tau": self.tau,
            "cliques": [sorted(c) for c in self.cliques],
            "unique_members": [sorted(u) for u in self.unique_members],
        }


def build_graph(corr, tau):
    """Threshold a correlation-like matrix into a graph.

    Parameters
    ----------
    corr : array_like
        Symmetric matrix with unit diagonal (within 1e-9). Positive
        definiteness is not required.
    tau : float
        Threshold in ``[0, 1]``. Pairs with ``|corr[i, j]| > tau``
        (strictly) become edges.
    """
    arr = np.asarray(corr, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"correlation must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("correlation contains non-finite entries")
    if np.abs(arr - arr.T).max() > 1e-8:
        raise DimensionMismatch("correlation matrix is not symmetric")
    if np.abs(np.diag(arr) - 1.0).max() > 1e-9:
        raise DomainError("correlation diagonal must be 1 (within 1e-9)")
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    adjacency = np.abs(arr) > tau
    np.fill_diagonal(adjacency, False)
    adjacency = adjacency | adjacency.T
    closed = adjacency.copy()
    np.fill_diagonal(closed, True)
    adjacency.flags.writeable = False
    closed.flags.writeable = False
    return ThresholdedGraph(
        p=arr.shape[0], tau=float(tau), adjacency=adjacency, closed=closed
    )


def neighborhood(graph, vertex):
    """Closed neighborhood of ``vertex`` (the vertex plus its neighbors)."""
    if not 0 <= vertex < graph.p:
        raise DomainError(f"vertex {vertex} out of range for p={graph.p}")
    return frozenset(int(v) for v in np.flatnonzero(graph.closed[vertex]))

def is_clique(graph, vertices):
    """True when every pair in ``vertices`` is adjacent."""
    idx = np.fromiter((int(v) for v in set(vertices)), dtype=int)
    if idx.size > 0 and (idx.min() < 0 or idx.max() >= graph.p):
        raise DomainError(f"vertex out of range for p={graph.p}")
    if idx.size <= 1:
        return True
    return bool(np.all(graph.closed[np.ix_(idx, idx)]))


def independent_maximal_cliques(graph):
    """Find all independent maximal cliques via closed neighborhoods.

    Scans each vertex once: the vertex's closed neighborhood is an
    independent maximal clique exactly when it is a clique, and the
    vertices generating the same clique are precisely its unique members.
    Runs in roughly the sum of squared degrees.
    """
    closed = graph.closed
    sizes = closed.sum(axis=1)
    verdict_by_key = {}
    cliques = []
    members_of = []
    for i in range(graph.p):
        row = closed[i]
        key = row.tobytes()
        hit = verdict_by_key.get(key, -1)
        if hit != -1:
            if hit is not None:
                members_of[hit].append(i)
            continue
        members = np.flatnonzero(row)
        # a member with a smaller closed neighborhood cannot contain this one
        if sizes[members].min() < sizes[i]:
            verdict_by_key[key] = None
            continue
        if np.all(closed[np.ix_(members, members)]):
            verdict_by_key[key] = len(cliques)
            cliques.append(frozenset(int(v) for v in members))
            members_of.append([i])
        else:
            verdict_by_key[key] = None
    order = sorted(range(len(cliques)), key=lambda k: min(members_of[k]))
    return CliqueSet(
        p=graph.p,
        tau=graph.tau,
        cliques=tuple(cliques[k] for k in order),
        unique_members=tuple(frozenset(members_of[k]) for k in order),
    )


def _bron_kerbosch(current, candidates, excluded, neighbors, out):
    # pivoting variant; recursion depth bounded by the vertex count
    if not candidates and not excluded:
        out.append(frozenset(current))
        return
    pivot = max(candidates | excluded, key=lambda u: len(candidates & neighbors[u]))
    for v in list(candidates - neighbors[pivot]):
        _bron_kerbosch(
            current | {v},
            candidates & neighbors[v],
            excluded & neighbors[v],
            neighbors,
            out,
        )
        candidates.discard(v)
        excluded.add(v)


def brute_force_independent_cliques(graph):
    """Oracle: enumerate all maximal cliques, then filter independent ones.

    A maximal clique is independent when it contains a vertex belonging to
    no other maximal clique. Guarded to ``p <= 25``.
    """
    if graph.p > BRUTE_FORCE_MAX_VERTICES:
        raise TooLarge(
            f"brute-force clique enumeration capped at p={BRUTE_FORCE_MAX_VERTICES}, "
            f"got p={graph.p}"
        )
    neighbors = [
        set(int(v) for v in np.flatnonzero(graph.adjacency[i])) for i in range(graph.p)
    ]
    all_maximal = []
    _bron_kerbosch(set(), set(range(graph.p)), set(), neighbors, all_maximal)
    counts = np.zeros(graph.p, dtype=int)
    for clique in all_maximal:
        for v in clique:
            counts[v] += 1
    kept = []
    for clique in all_maximal:
        unique = frozenset(v for v in clique if counts[v] == 1)
        if unique:
            kept.append((clique, unique))
    kept.sort(key=lambda item: min(item[1]))
    return CliqueSet(
        p=graph.p,
        tau=graph.tau,
        cliques=tuple(c for c, _ in kept),
        unique_members=tuple(u for _, u in kept),
    )


def structure_from_cliques(clique_set):
    """Turn cliques into a loading support: one factor per clique.

    Vertices in no clique become zero rows (pure noise variables).

    Raises
    ------
    EmptyCliqueSet
        If there are no cliques to map.
    """
    if len(clique_set.cliques) == 0:
        raise EmptyCliqueSet("no independent maximal cliques to map to a structure")
    support = set()
    for k, clique in enumerate(clique_set.cliques):
        for i in clique:
            support.add((i, k))
    return Structure(p=clique_set.p, d=len(clique_set.cliques), support=frozenset(support))
