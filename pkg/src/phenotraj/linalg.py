"""Symmetric eigendecomposition via cyclic Jacobi rotations.

Shared by PCA (covariance matrices, d <= 50) and spectral clustering
(normalized Laplacians, n up to a few thousand). Rotations are scheduled in
round-robin rounds of pairwise-disjoint pivots; rotations within a round act
on disjoint rows and columns, so applying them as one batched update is
exactly equivalent to applying them one by one.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, ShapeError


def _round_robin_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: n-1 (or n) rounds of disjoint index pairs covering
    every unordered pair exactly once per sweep."""
    m = n if n % 2 == 0 else n + 1
    items = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = items[i], items[m - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps), np.array(qs)))
        items = [items[0], items[-1]] + items[1:-1]
    return rounds


def jacobi_eigh(
    matrix: np.ndarray, tol: float = 1e-11, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix.

    The input is symmetrized as (A + A.T) / 2 before iterating, which absorbs
    round-off asymmetry from covariance accumulation.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"jacobi_eigh expects a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    a = (a + a.T) / 2.0
    v = np.eye(n)
    if n == 1:
        return a[0].copy(), v

    scale = max(1.0, float(np.abs(a).max()))
    skip = tol * scale / (n * n)
    rounds = _round_robin_rounds(n)
    converged = False
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= tol * scale:
            converged = True
            break
        for ps, qs in rounds:
            apq = a[ps, qs]
            live = np.abs(apq) > skip
            if not np.any(live):
                continue
            p, q, apq = ps[live], qs[live], apq[live]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            sign = np.where(theta >= 0, 1.0, -1.0)
            t = sign / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            rp, rq = a[p, :], a[q, :]
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
    if not converged:
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off > tol * scale * 100:
            raise NumericalError(
                f"jacobi_eigh failed to converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {off:.3e})"
            )

    eigvals = np.diag(a).copy()
    order = np.argsort(eigvals, kind="stable")
    return eigvals[order], v[:, order]
