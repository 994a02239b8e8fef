"""Communication graphs, weighted Laplacians, and their spectral quantities.

The stepsize theory consumes three numbers derived from the gossip
Laplacian W: its largest eigenvalue, its smallest non-zero eigenvalue,
and the largest edge weight.  ``spectral_profile`` packages them together
with the pseudo-inverse W+ used by the Lyapunov seminorm.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DisconnectedGraphError,
    InvalidParametersError,
    ParseError,
    ShapeMismatchError,
)

_ZERO_EIG_TOL = 1e-10
_JACOBI_TOL = 1e-12


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph on nodes 0..n-1.

    ``edges`` holds one entry (i, j, w) per unordered pair with i < j and
    w > 0, sorted; this order is the fixed global edge order used by the
    engine's dual update.
    """

    n: int
    edges: tuple

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParametersError(f"need at least one node, got n={self.n}")
        seen = set()
        for (i, j, w) in self.edges:
            if not (0 <= i < j < self.n):
                raise InvalidParametersError(f"bad edge ({i},{j}) for n={self.n}")
            if w <= 0:
                raise InvalidParametersError(f"edge ({i},{j}) has non-positive weight {w}")
            if (i, j) in seen:
                raise InvalidParametersError(f"duplicate edge ({i},{j})")
            seen.add((i, j))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> list:
        out = [j for (a, j, _) in self.edges if a == i]
        out += [a for (a, j, _) in self.edges if j == i]
        return sorted(out)

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        adj = [[] for _ in range(self.n)]
        for (i, j, _) in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == self.n


def _graph(n, pairs):
    return Graph(n=n, edges=tuple(sorted((min(i, j), max(i, j), float(w)) for i, j, w in pairs)))


def make_ring(n: int) -> Graph:
    """Cycle graph; every node has exactly two neighbours."""
    if n < 3:
        raise InvalidParametersError(f"ring needs n >= 3, got {n}")
    return _graph(n, [(i, (i + 1) % n, 1.0) for i in range(n)])


def make_star(n: int) -> Graph:
    """Node 0 is the hub; the other n-1 nodes are leaves."""
    if n < 2:
        raise InvalidParametersError(f"star needs n >= 2, got {n}")
    return _graph(n, [(0, j, 1.0) for j in range(1, n)])


def make_complete(n: int) -> Graph:
    if n < 2:
        raise InvalidParametersError(f"complete graph needs n >= 2, got {n}")
    return _graph(n, [(i, j, 1.0) for i in range(n) for j in range(i + 1, n)])


def make_k_regular(n: int, k: int) -> Graph:
    """Circulant k-regular graph: node i links to i +- 1..k//2 (and i + n/2 if k is odd)."""
    if not (1 <= k < n):
        raise InvalidParametersError(f"need 1 <= k < n, got k={k}, n={n}")
    if (n * k) % 2 != 0:
        raise InvalidParametersError(f"n*k must be even, got n={n}, k={k}")
    pairs = set()
    for off in range(1, k // 2 + 1):
        for i in range(n):
            pairs.add((min(i, (i + off) % n), max(i, (i + off) % n)))
    if k % 2 == 1:
        # n is even here; add the antipodal perfect matching
        for i in range(n // 2):
            pairs.add((i, i + n // 2))
    return _graph(n, [(i, j, 1.0) for (i, j) in pairs])


def read_graph_file(path) -> Graph:
    """Parse an edge-list file with one "i j w" line per edge (0-indexed, w optional)."""
    pairs = []
    max_node = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"line {lineno}: expected 'i j [w]', got {raw!r}", line=lineno)
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}", line=lineno) from exc
            if i == j:
                raise ParseError(f"line {lineno}: self-loop on node {i}", line=lineno)
            pairs.append((i, j, w))
            max_node = max(max_node, i, j)
    if max_node < 0:
        raise ParseError("graph file contains no edges")
    return _graph(max_node + 1, pairs)


def build_laplacian(graph: Graph) -> np.ndarray:
    """Weighted Laplacian: off-diagonal -w_ij on edges, degrees on the diagonal."""
    W = np.zeros((graph.n, graph.n))
    for (i, j, w) in graph.edges:
        W[i, j] = -w
        W[j, i] = -w
        W[i, i] += w
        W[j, j] += w
    return W


def jacobi_eigh(A: np.ndarray, tol: float = _JACOBI_TOL, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius mass drops below
    tol * ||A||_F.  Returns (eigenvalues ascending, eigenvectors as columns).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatchError(f"expected square matrix, got shape {A.shape}")
    n = A.shape[0]
    B = A.copy()
    V = np.eye(n)
    norm = np.linalg.norm(A)
    if n == 1 or norm == 0.0:
        return np.diag(B).copy(), V
    threshold = tol * norm
    for _ in range(max_sweeps):
        off = np.sqrt(max(0.0, np.sum(B * B) - np.sum(np.diag(B) ** 2)))
        if off < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = B[p, q]
                if abs(apq) < threshold / (n * n):
                    continue
                # rotation angle that annihilates B[p, q]
                diff = B[q, q] - B[p, p]
                if abs(apq) < 1e-300 * abs(diff):
                    t = apq / diff
                else:
                    phi = diff / (2.0 * apq)
                    t = 1.0 / (abs(phi) + np.sqrt(phi * phi + 1.0))
                    if phi < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = B[:, p].copy()
                rot_q = B[:, q].copy()
                B[:, p] = c * rot_p - s * rot_q
                B[:, q] = s * rot_p + c * rot_q
                rot_p = B[p, :].copy()
                rot_q = B[q, :].copy()
                B[p, :] = c * rot_p - s * rot_q
                B[q, :] = s * rot_p + c * rot_q
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    evals = np.diag(B).copy()
    order = np.argsort(evals)
    return evals[order], V[:, order]


@dataclass(frozen=True)
class SpectralProfile:
    """Spectral quantities of a connected-graph Laplacian."""

    laplacian: np.ndarray
    pseudo_inverse: np.ndarray
    lambda_max: float
    lambda_min_plus: float
    rho: float
    rho_inf: float
    max_edge_weight: float


_PROFILE_MEMO: dict = {}
_PROFILE_MEMO_CAP = 16


def spectral_profile(laplacian: np.ndarray) -> SpectralProfile:
    """Eigendecompose a Laplacian and derive the stepsize-theory quantities.

    Raises DisconnectedGraphError if the zero eigenvalue is not simple
    (eigenvalues below 1e-10 * lambda_max count as zero).  Results are
    memoized on the matrix bytes; sweeps reuse the same few Laplacians.
    """
    W = np.asarray(laplacian, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ShapeMismatchError(f"expected square matrix, got shape {W.shape}")
    key = (W.shape[0], W.tobytes())
    hit = _PROFILE_MEMO.get(key)
    if hit is not None:
        return hit
    evals, vecs = jacobi_eigh(W)
    lam_max = float(evals[-1])
    if lam_max <= 0.0:
        raise DisconnectedGraphError("Laplacian has no positive eigenvalue (empty graph)")
    threshold = _ZERO_EIG_TOL * lam_max
    zero_count = int(np.sum(evals < threshold))
    if zero_count != 1:
        raise DisconnectedGraphError(
            f"zero eigenvalue has multiplicity {zero_count}; graph is not connected"
        )
    lam_min_plus = float(evals[zero_count])
    inv = np.zeros_like(evals)
    keep = evals >= threshold
    inv[keep] = 1.0 / evals[keep]
    pinv = (vecs * inv) @ vecs.T
    off = W - np.diag(np.diag(W))
    max_w = float(np.max(-off)) if W.shape[0] > 1 else 0.0
    profile = SpectralProfile(
        laplacian=W,
        pseudo_inverse=pinv,
        lambda_max=lam_max,
        lambda_min_plus=lam_min_plus,
        rho=lam_max / lam_min_plus,
        rho_inf=max_w / lam_min_plus,
        max_edge_weight=max_w,
    )
    if len(_PROFILE_MEMO) >= _PROFILE_MEMO_CAP:
        _PROFILE_MEMO.pop(next(iter(_PROFILE_MEMO)))
    _PROFILE_MEMO[key] = profile
    return profile


def seminorm_sq(X: np.ndarray, B: np.ndarray) -> float:
    """Matrix semi-norm squared tr(X B X^T) for a d-by-n X and n-by-n PSD B."""
    X = np.asarray(X, dtype=float)
    B = np.asarray(B, dtype=float)
    if X.ndim != 2 or B.ndim != 2 or B.shape[0] != B.shape[1] or X.shape[1] != B.shape[0]:
        raise ShapeMismatchError(f"shapes do not conform: X {X.shape}, B {B.shape}")
    return float(np.sum((X @ B) * X))
