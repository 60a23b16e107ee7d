"""Interaction graphs, Laplacians, and the spectral data the estimators use.

An edge (i, j) means agent i measures / receives from agent j, so j is a
neighbor of i and row i of the Laplacian picks up -1 in column j. Agent
indices are 1-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

W1_RESIDUAL_TOL = 1e-9     # acceptance residual on w^T L
SIMPLE_ZERO_TOL = 1e-10    # second eigenvalue below this => zero not simple
CONNECT_TOL = 1e-10        # fiedler value below this => disconnected
CLAMP_TOL = 1e-12          # eigenvector entries below this are noise on zeros


class MultiplicityError(ValueError):
    """The zero eigenvalue of the Laplacian is not simple."""


class ConnectivityError(ValueError):
    """The graph behind a symmetric Laplacian is not connected."""


@dataclass(frozen=True)
class Topology:
    """Directed or undirected interaction graph over n agents."""

    n: int
    edges: tuple = ()
    directed: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one agent")
        seen = set()
        for e in self.edges:
            i, j = e
            if i == j:
                raise ValueError(f"self-loop on agent {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ValueError(f"edge {e} outside 1..{self.n}")
            seen.add((int(i), int(j)))
        if not self.directed:
            missing = {(j, i) for (i, j) in seen} - seen
            if missing:
                raise ValueError(
                    f"undirected graph needs symmetric edges; missing {sorted(missing)}"
                )
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    @classmethod
    def undirected(cls, n: int, pairs) -> "Topology":
        """Build an undirected topology from one pair per link."""
        sym = set()
        for i, j in pairs:
            sym.add((int(i), int(j)))
            sym.add((int(j), int(i)))
        return cls(n, tuple(sorted(sym)), directed=False)

    def neighbors(self, i: int) -> tuple:
        """Agents that i measures / receives from, ascending."""
        return tuple(j for (a, j) in self.edges if a == i)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Laplacian plus the spectral quantities the convergence results use.

    ``w1`` is the left null eigenvector normalized to sum 1 (None when the
    zero eigenvalue is not simple); ``lambda2`` is the smallest nonzero
    eigenvalue, only defined for connected undirected graphs.
    """

    laplacian: np.ndarray
    w1: np.ndarray | None = None
    lambda2: float | None = None


def build_laplacian(t: Topology) -> np.ndarray:
    """Graph Laplacian: -1 at (i, j) for each edge, neighbor count on the diagonal."""
    lap = np.zeros((t.n, t.n))
    for i, j in t.edges:
        lap[i - 1, j - 1] = -1.0
        lap[i - 1, i - 1] += 1.0
    return lap


def _reaches_all(t: Topology, root: int) -> bool:
    # Information flows from measured agent j to measurer i, so follow
    # edges (i, j) backwards: from j we can reach i.
    out = {k: [] for k in range(1, t.n + 1)}
    for i, j in t.edges:
        out[j].append(i)
    seen = {root}
    stack = [root]
    while stack:
        k = stack.pop()
        for nxt in out[k]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == t.n


def has_spanning_tree(t: Topology) -> bool:
    """True when some agent's information can reach every other agent."""
    return any(_reaches_all(t, r) for r in range(1, t.n + 1))


def is_connected_undirected(t: Topology) -> bool:
    """True for an undirected topology that is connected (or a single agent)."""
    if t.directed:
        return False
    return _reaches_all(t, 1)


def left_null_eigenvector(l: np.ndarray) -> np.ndarray:
    """Left eigenvector of the zero eigenvalue, normalized to sum 1.

    Requires a Laplacian whose zero eigenvalue is simple (guaranteed by a
    spanning tree); otherwise raises MultiplicityError. Entries that are
    pure rounding noise on structural zeros are clamped to exactly zero.
    """
    l = np.asarray(l, dtype=np.float64)
    n = l.shape[0]
    if l.shape != (n, n):
        raise ValueError(f"expected square matrix, got {l.shape}")
    vals, vecs = np.linalg.eig(l.T)
    order = np.argsort(np.abs(vals))
    if n > 1 and np.abs(vals[order[1]]) < SIMPLE_ZERO_TOL:
        raise MultiplicityError(
            f"zero eigenvalue is not simple (|lambda_2| = {np.abs(vals[order[1]]):.3e})"
        )
    v = vecs[:, order[0]]
    # The null eigenvector of a real matrix with a simple real eigenvalue can
    # be taken real; divide out the phase of the largest component.
    pivot = v[np.argmax(np.abs(v))]
    w = np.real(v / pivot)
    w = w / w.sum()
    w[np.abs(w) < CLAMP_TOL] = 0.0
    w = w / w.sum()
    residual = float(np.max(np.abs(w @ l)))
    if residual > W1_RESIDUAL_TOL:
        raise ValueError(f"left null eigenvector residual too large: {residual:.3e}")
    return w


def fiedler_value(l: np.ndarray) -> float:
    """Second-smallest eigenvalue of a symmetric Laplacian."""
    l = np.asarray(l, dtype=np.float64)
    n = l.shape[0]
    if l.shape != (n, n):
        raise ValueError(f"expected square matrix, got {l.shape}")
    if not np.allclose(l, l.T, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    vals = np.linalg.eigvalsh(l)
    if n < 2:
        raise ValueError("need at least two vertices for a spectral gap")
    lam2 = float(vals[1])
    if lam2 < CONNECT_TOL:
        raise ConnectivityError(f"graph is disconnected (lambda_2 = {lam2:.3e})")
    return lam2


def analyze(t: Topology) -> SpectralData:
    """Laplacian plus whichever spectral quantities the topology supports."""
    lap = build_laplacian(t)
    w1 = None
    if has_spanning_tree(t):
        if t.directed:
            w1 = left_null_eigenvector(lap)
        else:
            w1 = np.full(t.n, 1.0 / t.n)
    lam2 = None
    if not t.directed and t.n >= 2 and is_connected_undirected(t):
        lam2 = fiedler_value(lap)
    return SpectralData(laplacian=lap, w1=w1, lambda2=lam2)
