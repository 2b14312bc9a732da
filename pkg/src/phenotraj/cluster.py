"""Clustering algorithms over series encodings, plus evaluation metrics.

Four methods share one assignment type: k-means, Gaussian mixtures, spectral
clustering, and HDBSCAN. Only HDBSCAN produces noise points (label -1).
Silhouette and the adjusted Rand index evaluate assignments; silhouette
returns None when fewer than two real clusters exist.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .linalg import jacobi_eigh

NOISE = -1


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-point labels; -1 marks noise. Non-noise labels are contiguous 0..k-1."""

    labels: np.ndarray
    k: int

    def sizes(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for lab in self.labels:
            out[int(lab)] = out.get(int(lab), 0) + 1
        return dict(sorted(out.items()))


@dataclass(frozen=True)
class ClusterReport:
    method: str
    silhouette: float | None
    ari: float | None = None
    sizes: dict[int, int] = field(default_factory=dict)


def _as_points(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise DataError(f"points must be a 2-d array, got shape {pts.shape}")
    return pts


def _canonical(labels: np.ndarray) -> ClusterAssignment:
    """Relabel non-noise clusters to 0..k-1 in order of first appearance."""
    labels = np.asarray(labels, dtype=int)
    remap: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        if lab == NOISE:
            out[i] = NOISE
            continue
        if lab not in remap:
            remap[lab] = len(remap)
        out[i] = remap[lab]
    return ClusterAssignment(labels=out, k=len(remap))


def _pairwise_sq(points: np.ndarray) -> np.ndarray:
    sq = np.sum(points * points, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


# ---------------------------------------------------------------------------
# k-means


def _kmeans_pp_centers(points: np.ndarray, k: int, rng: np.random.Generator):
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(points, centers, max_iter: int, tol: float):
    k = len(centers)
    labels = np.zeros(len(points), dtype=int)
    for _ in range(max_iter):
        d2 = (
            np.sum(points**2, axis=1)[:, None]
            + np.sum(centers**2, axis=1)[None, :]
            - 2.0 * points @ centers.T
        )
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = points[labels == j]
            if len(members):
                new_centers[j] = members.mean(axis=0)
            else:
                # revive an empty cluster at the point farthest from its center
                far = int(np.argmax(np.min(d2, axis=1)))
                new_centers[j] = points[far]
                labels[far] = j
        shift = np.sqrt(np.sum((new_centers - centers) ** 2, axis=1)).max()
        centers = new_centers
        if shift < tol:
            break
    d2 = (
        np.sum(points**2, axis=1)[:, None]
        + np.sum(centers**2, axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    labels = np.argmin(d2, axis=1)
    wcss = float(np.maximum(np.min(d2, axis=1), 0.0).sum())
    return labels, centers, wcss


def kmeans(
    points: np.ndarray,
    k: int = 3,
    n_init: int = 10,
    max_iter: int = 300,
    tol: float = 1e-4,
    seed: int = 0,
) -> ClusterAssignment:
    """Lloyd iterations from k-means++ seeds; best of n_init restarts by WCSS."""
    points = _as_points(points)
    n = len(points)
    if k < 1:
        raise ConfigError(f"kmeans requires k >= 1, got {k}")
    if n < k:
        raise DataError(f"kmeans requires at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)
    best_labels, best_wcss = None, np.inf
    for _ in range(n_init):
        centers = _kmeans_pp_centers(points, k, rng)
        labels, _, wcss = _lloyd(points, centers, max_iter, tol)
        if wcss < best_wcss:
            best_labels, best_wcss = labels, wcss
    return _canonical(best_labels)


# ---------------------------------------------------------------------------
# Gaussian mixture


def _log_gaussians(points, means, covs, reg):
    """Per-component log N(x | mu_j, Sigma_j), shape (n, k)."""
    n, d = points.shape
    k = len(means)
    out = np.empty((n, k))
    for j in range(k):
        cov = covs[j]
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NumericalError(
                f"gmm component {j}: covariance singular despite +{reg} ridge"
            ) from None
        centered = points - means[j]
        y = np.linalg.solve(chol, centered.T)
        quad = np.sum(y * y, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, j] = -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)
    return out


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray


def gmm_em(
    points: np.ndarray,
    k: int = 3,
    max_iter: int = 200,
    reg: float = 1e-6,
    tol: float = 1e-7,
    seed: int = 0,
) -> tuple[ClusterAssignment, np.ndarray, GmmModel]:
    """Full-covariance EM. Returns (assignment, log-likelihood trace, model).

    Initial responsibilities are a seeded flat-Dirichlet draw per point;
    covariance diagonals carry a +reg ridge. Stops when the log-likelihood
    gain drops below tol.
    """
    points = _as_points(points)
    n, d = points.shape
    if k < 1:
        raise ConfigError(f"gmm requires k >= 1, got {k}")
    if n < k:
        raise DataError(f"gmm requires at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)
    resp = rng.dirichlet(np.ones(k), size=n)

    # Each cycle runs M then E and is accepted only if the log-likelihood
    # improves by at least tol; a failed cycle is rolled back, so the trace
    # and the returned model always describe the accepted sequence. The +reg
    # ridge makes the M step inexact, which near convergence can dip the
    # likelihood by a hair; rollback keeps the better parameters.
    trace: list[float] = []
    accepted: tuple | None = None
    for _ in range(max_iter):
        counts = resp.sum(axis=0)
        counts = np.maximum(counts, 1e-300)
        weights = counts / n
        means = (resp.T @ points) / counts[:, None]
        covs = np.empty((k, d, d))
        for j in range(k):
            centered = points - means[j]
            covs[j] = (centered * resp[:, j : j + 1]).T @ centered / counts[j]
            covs[j][np.diag_indices(d)] += reg

        log_prob = _log_gaussians(points, means, covs, reg) + np.log(weights)[None, :]
        row_max = log_prob.max(axis=1, keepdims=True)
        log_norm = row_max + np.log(
            np.sum(np.exp(log_prob - row_max), axis=1, keepdims=True)
        )
        new_resp = np.exp(log_prob - log_norm)
        ll = float(log_norm.sum())

        if trace and ll - trace[-1] < tol:
            break
        trace.append(ll)
        accepted = (weights, means, covs, new_resp)
        resp = new_resp

    weights, means, covs, resp = accepted
    labels = np.argmax(resp, axis=1)
    model = GmmModel(weights=weights, means=means, covariances=covs)
    return _canonical(labels), np.array(trace), model


def gmm(
    points: np.ndarray,
    k: int = 3,
    max_iter: int = 200,
    reg: float = 1e-6,
    tol: float = 1e-7,
    seed: int = 0,
) -> tuple[ClusterAssignment, np.ndarray]:
    assignment, trace, _ = gmm_em(points, k, max_iter, reg, tol, seed)
    return assignment, trace


# ---------------------------------------------------------------------------
# spectral


def rbf_affinity(points: np.ndarray) -> np.ndarray:
    """Gaussian affinity with bandwidth = median pairwise distance; zero diagonal."""
    points = _as_points(points)
    n = len(points)
    d2 = _pairwise_sq(points)
    offdiag = np.sqrt(d2)[np.triu_indices(n, 1)]
    sigma = float(np.median(offdiag)) if len(offdiag) else 1.0
    if sigma <= 0:
        sigma = 1.0
    affinity = np.exp(-d2 / (2.0 * sigma * sigma))
    np.fill_diagonal(affinity, 0.0)
    return affinity


def normalized_laplacian(affinity: np.ndarray) -> np.ndarray:
    """I - D^(-1/2) A D^(-1/2); isolated nodes contribute identity rows."""
    degree = affinity.sum(axis=1)
    inv_sqrt = np.where(degree > 0, 1.0 / np.sqrt(np.maximum(degree, 1e-300)), 0.0)
    return np.eye(len(affinity)) - inv_sqrt[:, None] * affinity * inv_sqrt[None, :]


def spectral(points: np.ndarray, k: int = 3, seed: int = 0) -> ClusterAssignment:
    """RBF affinity (median-distance bandwidth), normalized Laplacian, bottom-k
    Jacobi eigenvectors, row-normalized, then k-means in that spectral space."""
    points = _as_points(points)
    n = len(points)
    if k < 1:
        raise ConfigError(f"spectral requires k >= 1, got {k}")
    if n < k:
        raise DataError(f"spectral requires at least k={k} points, got {n}")
    lap = normalized_laplacian(rbf_affinity(points))
    _, vecs = jacobi_eigh(lap)
    basis = vecs[:, :k]
    norms = np.sqrt(np.sum(basis * basis, axis=1, keepdims=True))
    basis = np.where(norms > 0, basis / np.maximum(norms, 1e-300), basis)
    return kmeans(basis, k=k, seed=seed)


# ---------------------------------------------------------------------------
# HDBSCAN


def mutual_reachability(points: np.ndarray, min_samples: int) -> np.ndarray:
    """max(core(a), core(b), dist(a, b)); core = distance to the min_samples-th
    nearest neighbor counting the point itself."""
    points = _as_points(points)
    n = len(points)
    if min_samples > n:
        raise DataError(f"min_samples={min_samples} exceeds point count {n}")
    dist = np.sqrt(_pairwise_sq(points))
    core = np.sort(dist, axis=1)[:, min_samples - 1]
    mr = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0.0)
    return mr


def _prim_mst(weights: np.ndarray) -> list[tuple[float, int, int]]:
    """Dense-graph Prim; returns edges (weight, a, b)."""
    n = len(weights)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=int)
    in_tree[0] = True
    best = weights[0].copy()
    best_from[:] = 0
    best[0] = np.inf
    edges = []
    for _ in range(n - 1):
        nxt = int(np.argmin(np.where(in_tree, np.inf, best)))
        edges.append((float(best[nxt]), int(best_from[nxt]), nxt))
        in_tree[nxt] = True
        closer = weights[nxt] < best
        best = np.where(closer, weights[nxt], best)
        best_from = np.where(closer, nxt, best_from)
        best[nxt] = np.inf
    return edges


class _UnionFind:
    """Union-find over single-linkage merges; tracks the dendrogram node id of
    each current component root."""

    def __init__(self, n: int):
        self.parent = list(range(2 * n - 1))
        self.node_of = list(range(n))  # component root -> dendrogram node
        self.next_node = n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def merge(self, a: int, b: int) -> tuple[int, int, int]:
        """Returns (new dendrogram node, left child node, right child node)."""
        ra, rb = self.find(a), self.find(b)
        node = self.next_node
        self.next_node += 1
        left, right = self.node_of[ra], self.node_of[rb]
        self.parent[ra] = self.parent[rb] = node
        while len(self.node_of) <= node:
            self.node_of.append(0)
        self.node_of[node] = node
        return node, left, right


@dataclass
class _Dendro:
    """Single-linkage merge tree: nodes 0..n-1 are points; merge node i has
    children[i] and height[i] (the merge distance)."""

    n: int
    children: dict[int, tuple[int, int]]
    height: dict[int, float]
    root: int

    def members(self, node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            cur = stack.pop()
            if cur < self.n:
                out.append(cur)
            else:
                stack.extend(self.children[cur])
        return out


def _single_linkage(mst_edges: list[tuple[float, int, int]], n: int) -> _Dendro:
    uf = _UnionFind(n)
    children: dict[int, tuple[int, int]] = {}
    height: dict[int, float] = {}
    node = n - 1
    for w, a, b in sorted(mst_edges):
        node, left, right = uf.merge(a, b)
        children[node] = (left, right)
        height[node] = w
    return _Dendro(n=n, children=children, height=height, root=node)


@dataclass
class _CondensedCluster:
    points: list[int]
    birth_lambda: float
    leave_lambda: dict[int, float]
    children: list[int]
    parent: int | None


def _lambda_of(distance: float) -> float:
    return 1.0 / max(distance, 1e-300)


def _condense(dendro: _Dendro, min_cluster_size: int) -> list[_CondensedCluster]:
    """Collapse the single-linkage tree: a cluster persists through splits that
    only shed fewer-than-min_cluster_size points; a split into two large
    children ends it and births two new clusters."""
    clusters: list[_CondensedCluster] = []
    root_points = dendro.members(dendro.root)
    clusters.append(
        _CondensedCluster(
            points=root_points,
            birth_lambda=0.0,
            leave_lambda={},
            children=[],
            parent=None,
        )
    )
    # stack entries: (condensed cluster id, dendrogram node to process)
    stack = [(0, dendro.root)]
    while stack:
        cid, node = stack.pop()
        cluster = clusters[cid]
        while True:
            if node < dendro.n:
                # unreachable for min_cluster_size >= 2; zero-contribution guard
                cluster.leave_lambda[node] = cluster.birth_lambda
                break
            lam = _lambda_of(dendro.height[node])
            left, right = dendro.children[node]
            big_left = len(dendro.members(left)) >= min_cluster_size
            big_right = len(dendro.members(right)) >= min_cluster_size
            if big_left and big_right:
                for child_node in (left, right):
                    child_id = len(clusters)
                    child_points = dendro.members(child_node)
                    clusters.append(
                        _CondensedCluster(
                            points=child_points,
                            birth_lambda=lam,
                            leave_lambda={},
                            children=[],
                            parent=cid,
                        )
                    )
                    cluster.children.append(child_id)
                    for p in child_points:
                        cluster.leave_lambda[p] = lam
                    stack.append((child_id, child_node))
                break
            if not big_left and not big_right:
                # the cluster shatters: every remaining point leaves here
                for sub in (left, right):
                    for p in dendro.members(sub):
                        cluster.leave_lambda[p] = lam
                break
            # one big child: the cluster continues as it, small side falls out
            keep, shed = (left, right) if big_left else (right, left)
            for p in dendro.members(shed):
                cluster.leave_lambda[p] = lam
            node = keep
    return clusters


def _stability(cluster: _CondensedCluster) -> float:
    return float(
        sum(
            min(lam, 1e300) - cluster.birth_lambda
            for lam in cluster.leave_lambda.values()
        )
    )


def hdbscan(
    points: np.ndarray,
    min_cluster_size: int = 15,
    min_samples: int | None = None,
) -> ClusterAssignment:
    """Density-based clustering with noise. Deterministic: no seed.

    Mutual-reachability MST -> single-linkage hierarchy -> condensed tree ->
    excess-of-mass cluster selection (the root is never selected). Points
    outside every selected cluster are labeled -1.
    """
    points = _as_points(points)
    n = len(points)
    if min_cluster_size < 2:
        raise ConfigError(f"min_cluster_size must be >= 2, got {min_cluster_size}")
    if n < min_cluster_size:
        raise DataError(
            f"hdbscan requires at least min_cluster_size={min_cluster_size} points, got {n}"
        )
    if min_samples is None:
        min_samples = min_cluster_size
    mr = mutual_reachability(points, min_samples)
    dendro = _single_linkage(_prim_mst(mr), n)
    clusters = _condense(dendro, min_cluster_size)

    # excess-of-mass selection, bottom-up; root (id 0) excluded. Children are
    # always created after their parent, so descending id order is bottom-up.
    stability = {cid: _stability(c) for cid, c in enumerate(clusters)}
    subtree_score: dict[int, float] = {}
    selected: set[int] = set()
    for cid in range(len(clusters) - 1, -1, -1):
        c = clusters[cid]
        child_sum = sum(subtree_score[ch] for ch in c.children)
        if cid == 0:
            subtree_score[cid] = child_sum
            continue
        if c.children and child_sum > stability[cid]:
            subtree_score[cid] = child_sum
        else:
            subtree_score[cid] = stability[cid]
            selected.add(cid)
            # deselect all descendants
            drop = list(c.children)
            while drop:
                d = drop.pop()
                selected.discard(d)
                drop.extend(clusters[d].children)

    labels = np.full(n, NOISE, dtype=int)
    for cid in sorted(selected):
        for p in clusters[cid].points:
            labels[p] = cid
    return _canonical(labels)


# ---------------------------------------------------------------------------
# evaluation


def silhouette(points: np.ndarray, labels: np.ndarray) -> float | None:
    """Mean over non-noise points of (b - a) / max(a, b); None when fewer than
    two non-noise clusters exist. Singleton-cluster points contribute 0."""
    points = _as_points(points)
    labels = np.asarray(labels, dtype=int)
    if len(labels) != len(points):
        raise DataError(
            f"labels length {len(labels)} does not match point count {len(points)}"
        )
    keep = labels != NOISE
    pts, labs = points[keep], labels[keep]
    uniq = np.unique(labs)
    if len(uniq) < 2:
        return None
    dist = np.sqrt(_pairwise_sq(pts))
    scores = np.zeros(len(pts))
    members = {lab: np.flatnonzero(labs == lab) for lab in uniq}
    for i in range(len(pts)):
        own = members[labs[i]]
        if len(own) == 1:
            scores[i] = 0.0
            continue
        a = dist[i, own].sum() / (len(own) - 1)
        b = min(dist[i, members[lab]].mean() for lab in uniq if lab != labs[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def adjusted_rand_index(labels: np.ndarray, truth: np.ndarray) -> float:
    """Chance-corrected pair agreement; pairs involving noise are excluded."""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    if labels.shape != truth.shape:
        raise DataError(
            f"label lengths differ: {labels.shape} vs {truth.shape}"
        )
    keep = (labels != NOISE) & (truth != NOISE)
    labels, truth = labels[keep], truth[keep]
    n = len(labels)
    if n == 0:
        return 0.0

    la, lb = np.unique(labels, return_inverse=True)[1], np.unique(truth, return_inverse=True)[1]
    table = np.zeros((la.max() + 1, lb.max() + 1))
    np.add.at(table, (la, lb), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    maximum = (sum_a + sum_b) / 2.0
    if maximum == expected:
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))
