"""Undirected graphs, normalized propagation operators and graph data I/O."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .filters import FilterSpec, in_valid_range

log = logging.getLogger(__name__)

ORACLE_MAX_NODES = 64
DOMAIN_SLACK = 1e-9


class OperatorKind(str, enum.Enum):
    NORMALIZED_ADJACENCY = "adjacency"
    LAPLACIAN = "laplacian"


@dataclass(frozen=True)
class SparseGraph:
    node_count: int
    edges: np.ndarray  # (E, 2) int64, u < v, lexicographically sorted
    adjacency: sp.csr_matrix

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)


@dataclass(frozen=True)
class PropagationOperator:
    kind: OperatorKind
    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def from_edges(pairs, node_count: int | None = None) -> SparseGraph:
    """Build a graph from (u, v) pairs; drops self-loops and duplicates."""
    e = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
    e = e.reshape(-1, 2)
    if e.size and e.min() < 0:
        raise ValueError("node ids must be non-negative")
    e = e[e[:, 0] != e[:, 1]]
    e = np.sort(e, axis=1)
    e = np.unique(e, axis=0) if len(e) else e
    n_min = int(e.max()) + 1 if len(e) else 0
    n = n_min if node_count is None else int(node_count)
    if n < n_min:
        raise ValueError(f"edge endpoint {n_min - 1} out of range for {n} nodes")
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    A.sort_indices()
    return SparseGraph(n, e, A)


def load_edge_list(lines: Iterable[str], node_count: int | None = None) -> SparseGraph:
    """Parse ``u v`` lines; ``#`` lines are comments and self-loops are skipped."""
    pairs = []
    loops = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if len(parts) != 2:
                raise ValueError
            u, v = int(parts[0]), int(parts[1])
            if u < 0 or v < 0:
                raise ValueError
        except ValueError:
            raise ValueError(f"line {lineno}: expected two non-negative integers, got {raw.rstrip()!r}") from None
        if u == v:
            loops += 1
            continue
        pairs.append((u, v))
    if loops:
        log.warning("ignored %d self-loop line(s)", loops)
    g = from_edges(np.array(pairs, dtype=np.int64).reshape(-1, 2), node_count)
    return g


def save_edge_list(graph: SparseGraph, fh) -> None:
    for u, v in graph.edges:
        fh.write(f"{u} {v}\n")


def propagation_operator(graph: SparseGraph, kind=OperatorKind.NORMALIZED_ADJACENCY) -> PropagationOperator:
    """Self-loop normalized adjacency ``D~^-1/2 (A + I) D~^-1/2`` or ``I`` minus it."""
    kind = OperatorKind(kind)
    n = graph.node_count
    if n < 1:
        raise ValueError("operator needs at least one node")
    A = graph.adjacency + sp.identity(n, format="csr")
    deg = np.asarray(A.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    P = sp.diags(dinv) @ A @ sp.diags(dinv)
    if kind is OperatorKind.LAPLACIAN:
        P = sp.identity(n, format="csr") - P
    P = sp.csr_matrix(P)
    P.sum_duplicates()
    P.sort_indices()
    return PropagationOperator(kind, P)


def spmm(operator, dense) -> np.ndarray:
    """Sparse-dense product; rows accumulate in ascending column order."""
    M = operator.matrix if isinstance(operator, PropagationOperator) else operator
    X = np.asarray(dense, dtype=float)
    if M.shape[1] != X.shape[0]:
        raise ValueError(f"dimension mismatch: operator {M.shape} times {X.shape}")
    return M @ X


# ---------------------------------------------------------------- synthetic


def sbm_generate(block_sizes: Sequence[int], p_in: float, p_out: float,
                 feature_dim: int, feature_shift: float, seed: int):
    """Stochastic block model with Gaussian class-mean features.

    Returns ``(graph, features, labels)``; node ids are laid out block by
    block.  All randomness comes from a PCG64 stream seeded with ``seed``.
    """
    sizes = [int(s) for s in block_sizes]
    if any(s < 1 for s in sizes):
        raise ValueError("block sizes must be >= 1")
    for p in (p_in, p_out):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    labels = np.repeat(np.arange(len(sizes)), sizes)
    chunks = []
    for i, si in enumerate(sizes):
        for j in range(i, len(sizes)):
            sj = sizes[j]
            draw = rng.random((si, sj))
            if i == j:
                hit = np.triu(draw < p_in, k=1)
            else:
                hit = draw < p_out
            u, v = np.nonzero(hit)
            chunks.append(np.column_stack([u + offsets[i], v + offsets[j]]))
    edges = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
    graph = from_edges(edges.astype(np.int64), n)
    means = rng.standard_normal((len(sizes), feature_dim))
    norms = np.linalg.norm(means, axis=1, keepdims=True)
    means = feature_shift * means / np.where(norms > 0, norms, 1.0)
    features = means[labels] + rng.standard_normal((n, feature_dim))
    return graph, features, labels


# ---------------------------------------------------------------- file formats


def write_features(features, fh) -> None:
    X = np.asarray(features, dtype=float)
    fh.write(f"{X.shape[0]} {X.shape[1]}\n")
    for row in X:
        fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_features(lines: Iterable[str]) -> np.ndarray:
    it = (ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#"))
    try:
        n, m = (int(t) for t in next(it).split())
    except StopIteration:
        raise ValueError("feature file is empty") from None
    rows = [np.array(ln.split(), dtype=float) for ln in it]
    X = np.array(rows, dtype=float).reshape(len(rows), -1) if rows else np.zeros((0, m))
    if X.shape != (n, m):
        raise ValueError(f"feature file header says {n}x{m}, body is {X.shape[0]}x{X.shape[1] if X.ndim == 2 else 0}")
    return X


def write_labels(labels, fh) -> None:
    for i, c in enumerate(np.asarray(labels)):
        fh.write(f"{i} {int(c)}\n")


def read_labels(lines: Iterable[str], n: int | None = None) -> np.ndarray:
    pairs = []
    for lineno, ln in enumerate(lines, start=1):
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'node_id class_id'")
        pairs.append((int(parts[0]), int(parts[1])))
    size = n if n is not None else (max(p[0] for p in pairs) + 1 if pairs else 0)
    labels = np.full(size, -1, dtype=np.int64)
    for i, c in pairs:
        labels[i] = c
    if np.any(labels < 0):
        raise ValueError("every node needs a non-negative class label")
    return labels


# ---------------------------------------------------------------- dense oracle


def jacobi_eigh(matrix, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi sweeps.

    Stops once the off-diagonal Frobenius norm drops below ``tol`` times the
    full norm.  Returns ascending eigenvalues and matching eigenvector columns.
    """
    A = np.array(matrix, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    V = np.eye(n)
    total = np.linalg.norm(A)
    if total == 0.0 or n == 1:
        return np.diag(A).copy(), V
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * total:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp = A[:, p].copy()
                A[:, p] = c * cp - s * A[:, q]
                A[:, q] = s * cp + c * A[:, q]
                rp = A[p, :].copy()
                A[p, :] = c * rp - s * A[q, :]
                A[q, :] = s * rp + c * A[q, :]
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    vals = np.diag(A).copy()
    order = np.argsort(vals)
    return vals[order], V[:, order]


def exact_filter_oracle(operator: PropagationOperator, spec: FilterSpec, signal) -> np.ndarray:
    """``U g(L) U^T x`` from a full eigendecomposition; test-scale graphs only."""
    n = operator.n
    if n > ORACLE_MAX_NODES:
        raise ValueError(f"oracle limited to {ORACLE_MAX_NODES} nodes, got {n}")
    lam, U = jacobi_eigh(operator.dense())
    ok = in_valid_range(spec, lam, DOMAIN_SLACK)
    if not np.all(ok):
        bad = lam[~ok]
        raise ValueError(
            f"eigenvalue {float(bad[0])!r} outside the range where filter {spec.name} is finite"
        )
    lo, hi, closed = spec.valid or (spec.domain.lower, spec.domain.upper, True)
    if closed:
        lam = np.clip(lam, lo, hi)
    gl = np.asarray(spec(lam), dtype=float)
    X = np.asarray(signal, dtype=float)
    out = U @ (gl[:, None] * (U.T @ X.reshape(n, -1)))
    return out.reshape(X.shape)
