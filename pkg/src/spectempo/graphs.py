"""Graph types, shift-operator constructions, random generators, and the
machine-checkable constraint sets that admissible shifts must satisfy."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import Ambiguous, BadParameters, IsolatedNode, NoneFound

ADJACENCY = "adjacency"
NORMALIZED_LAPLACIAN = "normalized_laplacian"
COMBINATORIAL_LAPLACIAN = "combinatorial_laplacian"


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph on nodes ``0..n-1``.

    Edges are ``(i, j, weight)`` triples with ``i < j`` and nonzero weight.
    """

    n: int
    edges: tuple

    def __post_init__(self):
        canon = []
        seen = set()
        for (i, j, w) in self.edges:
            i, j, w = int(i), int(j), float(w)
            if not (0 <= i < j < self.n):
                raise BadParameters(f"edge ({i},{j}) invalid for n={self.n}")
            if (i, j) in seen:
                raise BadParameters(f"duplicate edge ({i},{j})")
            if w == 0.0 or not np.isfinite(w):
                raise BadParameters(f"edge ({i},{j}) has invalid weight {w}")
            seen.add((i, j))
            canon.append((i, j, w))
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency_matrix(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for (i, j, w) in self.edges:
            A[i, j] = A[j, i] = w
        return A

    def degrees(self) -> np.ndarray:
        return self.adjacency_matrix().sum(axis=1)

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        adj = [[] for _ in range(self.n)]
        for (i, j, _) in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n


@dataclass(frozen=True)
class Gso:
    """A graph-shift operator: a symmetric matrix whose off-diagonal support
    matches a graph's edge set."""

    kind: str
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class OrderingConstraint:
    """Spectral ordering: recovered eigenvalues must satisfy
    ``lam[i] >= lam[i + lag] + gap`` for every valid i (templates sorted
    ascending by covariance eigenvalue)."""

    lag: int
    gap: float


@dataclass(frozen=True)
class ShiftConstraintSet:
    """Encodes which matrices count as admissible shift operators.

    ``adjacency``: nonnegative symmetric, zero diagonal, column
    ``scale_node`` sums to 1.  ``normalized_laplacian``: symmetric PSD, unit
    diagonal, off-diagonal in [-1, 0], smallest eigenvalue 0.
    ``combinatorial_laplacian``: symmetric PSD, nonpositive off-diagonal,
    zero row sums.  ``known_entries`` pins individual off-diagonal values.
    """

    kind: str
    scale_node: int = 0
    ordering: OrderingConstraint | None = None
    known_entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in (ADJACENCY, NORMALIZED_LAPLACIAN, COMBINATORIAL_LAPLACIAN):
            raise BadParameters(f"unknown constraint-set kind {self.kind!r}")


def adjacency(g: Graph) -> Gso:
    return Gso(ADJACENCY, g.adjacency_matrix())


def combinatorial_laplacian(g: Graph) -> Gso:
    A = g.adjacency_matrix()
    return Gso(COMBINATORIAL_LAPLACIAN, np.diag(A.sum(axis=1)) - A)


def normalized_laplacian(g: Graph) -> Gso:
    A = g.adjacency_matrix()
    d = A.sum(axis=1)
    if np.any(d <= 0):
        raise IsolatedNode("normalized Laplacian undefined with a degree-0 node")
    dmh = 1.0 / np.sqrt(d)
    L = np.eye(g.n) - (dmh[:, None] * A) * dmh[None, :]
    return Gso(NORMALIZED_LAPLACIAN, 0.5 * (L + L.T))


def gso_for(g: Graph, kind: str) -> Gso:
    builders = {
        ADJACENCY: adjacency,
        NORMALIZED_LAPLACIAN: normalized_laplacian,
        COMBINATORIAL_LAPLACIAN: combinatorial_laplacian,
    }
    if kind not in builders:
        raise BadParameters(f"unknown GSO kind {kind!r}")
    return builders[kind](g)


def graph_from_adjacency(A: np.ndarray, tol: float = 0.0) -> Graph:
    """Edge list of the (symmetric) matrix ``A``; entries with
    ``|A_ij| <= tol`` are treated as absent."""
    A = linalg.as_matrix(A, "A")
    n = A.shape[0]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if abs(A[i, j]) > tol:
                edges.append((i, j, float(A[i, j])))
    return Graph(n, tuple(edges))


def generate_er(n: int, p: float, seed) -> Graph:
    """Erdos-Renyi graph: each unordered pair independently with prob p."""
    if not (0.0 <= p <= 1.0):
        raise BadParameters(f"edge probability {p} outside [0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    draws = rng.random(iu.size)
    edges = tuple(
        (int(i), int(j), 1.0) for i, j, r in zip(iu, ju, draws) if r < p
    )
    return Graph(n, edges)


def generate_ba(n: int, m0: int, m: int, seed) -> Graph:
    """Preferential-attachment graph.

    The seed component is a complete graph on ``m0`` nodes; each subsequent
    node attaches to ``m`` distinct existing nodes drawn without replacement
    with probability proportional to current degree.
    """
    if not (1 <= m <= m0 <= n):
        raise BadParameters(f"need 1 <= m <= m0 <= n, got m={m}, m0={m0}, n={n}")
    rng = np.random.default_rng(seed)
    edges = [(i, j, 1.0) for i in range(m0) for j in range(i + 1, m0)]
    deg = np.zeros(n)
    deg[:m0] = m0 - 1
    if m0 == 1:
        deg[0] = 1.0  # lone seed node still needs attachment mass
    for new in range(m0, n):
        weights = deg[:new].copy()
        targets = []
        for _ in range(m):
            total = weights.sum()
            if total <= 0:
                weights = np.ones(new)
                total = float(new)
            t = int(rng.choice(new, p=weights / total))
            targets.append(t)
            weights[t] = 0.0
        for t in targets:
            edges.append((min(t, new), max(t, new), 1.0))
            deg[t] += 1
        deg[new] += m
    return Graph(n, tuple(edges))


def validate_membership(S: np.ndarray, cset: ShiftConstraintSet, tol: float = 1e-8):
    """List of constraint violations of ``S`` against ``cset`` (empty = member)."""
    S = linalg.as_matrix(S, "S")
    n = S.shape[0]
    if S.shape[0] != S.shape[1]:
        return ["not square"]
    out = []
    if np.abs(S - S.T).max(initial=0.0) > tol:
        out.append("not symmetric")
    off = S - np.diag(np.diag(S))
    if cset.kind == ADJACENCY:
        if off.min(initial=0.0) < -tol:
            out.append("negative off-diagonal entry")
        if np.abs(np.diag(S)).max(initial=0.0) > tol:
            out.append("nonzero diagonal")
        if abs(S[:, cset.scale_node].sum() - 1.0) > tol:
            out.append("scale constraint")
    elif cset.kind == NORMALIZED_LAPLACIAN:
        mask = ~np.eye(n, dtype=bool)
        if n > 1 and (off[mask].max() > tol or off[mask].min() < -1.0 - tol):
            out.append("off-diagonal outside [-1, 0]")
        if np.abs(np.diag(S) - 1.0).max(initial=0.0) > tol:
            out.append("diagonal not 1")
        wmin = float(np.linalg.eigvalsh(0.5 * (S + S.T)).min())
        if wmin < -tol:
            out.append("not positive semidefinite")
        if abs(wmin) > tol:
            out.append("smallest eigenvalue not 0")
    else:  # combinatorial Laplacian
        mask = ~np.eye(n, dtype=bool)
        if n > 1 and off[mask].max() > tol:
            out.append("positive off-diagonal entry")
        if np.abs(S.sum(axis=1)).max(initial=0.0) > tol:
            out.append("row sums not 0")
        if float(np.linalg.eigvalsh(0.5 * (S + S.T)).min()) < -tol:
            out.append("not positive semidefinite")
    for (i, j, v) in cset.known_entries:
        if abs(S[i, j] - v) > tol:
            out.append(f"known entry ({i},{j}) != {v}")
    return out


def find_degree_eigenvector(V: np.ndarray, tol: float = 1e-8) -> int:
    """Index of the unique column whose entries all share one sign.

    For a normalized Laplacian of a connected graph this is the square-root
    degree eigenvector.
    """
    V = linalg.as_matrix(V, "V")
    candidates = [
        k
        for k in range(V.shape[1])
        if V[:, k].min() >= -tol or V[:, k].max() <= tol
    ]
    if not candidates:
        raise NoneFound("no same-sign column")
    if len(candidates) > 1:
        raise Ambiguous(f"{len(candidates)} same-sign columns: {candidates}")
    return candidates[0]


def same_sign_violation(V: np.ndarray) -> np.ndarray:
    """Per-column magnitude of the worst wrong-sign entry (0 = same-sign)."""
    V = linalg.as_matrix(V, "V")
    pos = np.maximum(-V, 0.0).max(axis=0)
    neg = np.maximum(V, 0.0).max(axis=0)
    return np.minimum(pos, neg)


# ---------------------------------------------------------------------------
# serialization

def graph_to_json(g: Graph) -> str:
    return json.dumps({"n": g.n, "edges": [[i, j, w] for (i, j, w) in g.edges]})


def graph_from_json(text: str) -> Graph:
    d = json.loads(text)
    return Graph(int(d["n"]), tuple((int(i), int(j), float(w)) for i, j, w in d["edges"]))


def graph_to_edge_csv(g: Graph) -> str:
    lines = [f"# n={g.n}"]
    lines += [f"{i},{j},{repr(w)}" for (i, j, w) in g.edges]
    return "\n".join(lines) + "\n"


def graph_from_edge_csv(text: str) -> Graph:
    n = None
    edges = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "n=" in line:
                n = int(line.split("n=")[1].split()[0])
            continue
        i, j, w = line.split(",")
        edges.append((int(i), int(j), float(w)))
    if n is None:
        raise BadParameters("edge CSV missing '# n=<N>' header")
    return Graph(n, tuple(edges))


def dense_matrix_from_csv(text: str) -> np.ndarray:
    """Ingestion path for externally supplied dense symmetric matrices."""
    return linalg.matrix_from_csv(text)
