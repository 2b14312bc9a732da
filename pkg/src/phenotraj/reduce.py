"""Dimensionality reduction: PCA and exact t-SNE.

PCA rides on the Jacobi eigensolver and doubles as the t-SNE initializer.
t-SNE is the exact O(n^2) formulation; desk-scale inputs (n <= ~20k) keep
that affordable and free of approximation error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .linalg import jacobi_eigh


@dataclass(frozen=True)
class PcaModel:
    """Column means, component rows (orthonormal, descending variance), and
    the explained variance per component."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray


def pca_fit(points: np.ndarray, out_dims: int) -> PcaModel:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise DataError(f"points must be a 2-d array, got shape {pts.shape}")
    n, d = pts.shape
    if out_dims < 1:
        raise ConfigError(f"out_dims must be >= 1, got {out_dims}")
    if out_dims > min(n, d):
        raise DataError(
            f"out_dims={out_dims} exceeds min(n, d) = {min(n, d)} for {n} x {d} data"
        )
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / n
    eigvals, eigvecs = jacobi_eigh(cov)
    order = np.argsort(eigvals, kind="stable")[::-1][:out_dims]
    variances = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T.copy()
    # sign convention: the largest-magnitude entry of each component is positive
    for row in components:
        peak = int(np.argmax(np.abs(row)))
        if row[peak] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, explained_variance=variances)


def pca_transform(model: PcaModel, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != model.mean.shape[0]:
        raise DataError(
            f"points of shape {pts.shape} do not match a PCA model over "
            f"{model.mean.shape[0]} features"
        )
    return (pts - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, reduced: np.ndarray) -> np.ndarray:
    red = np.asarray(reduced, dtype=float)
    return red @ model.components + model.mean


# ---------------------------------------------------------------------------
# t-SNE


@dataclass(frozen=True)
class TsneConfig:
    out_dims: int = 3
    perplexity: float = 100.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.out_dims < 1:
            raise ConfigError(f"out_dims must be >= 1, got {self.out_dims}")
        if self.perplexity <= 1:
            raise ConfigError(f"perplexity must be > 1, got {self.perplexity}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")


def conditional_affinities(
    points: np.ndarray, perplexity: float, tol: float = 1e-5, max_steps: int = 50
) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic conditional affinities p(j|i) whose row entropies match
    log(perplexity), via per-point bandwidth binary search.

    Returns (P_conditional with zero diagonal, precisions beta)."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T
    np.maximum(d2, 0.0, out=d2)
    target = np.log(perplexity)

    p_cond = np.zeros((n, n))
    betas = np.ones(n)
    idx = np.arange(n)
    for i in range(n):
        di = d2[i, idx != i]
        beta, beta_min, beta_max = 1.0, 0.0, np.inf
        row = None
        for _ in range(max_steps):
            logits = -beta * di
            logits -= logits.max()
            expd = np.exp(logits)
            total = expd.sum()
            row = expd / total
            # Shannon entropy in nats of the normalized row
            entropy = -np.sum(row * np.log(np.maximum(row, 1e-300)))
            diff = entropy - target
            if abs(diff) <= tol:
                break
            if diff > 0:
                beta_min = beta
                beta = beta * 2.0 if not np.isfinite(beta_max) else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == 0.0 else (beta + beta_min) / 2.0
        p_cond[i, idx != i] = row
        betas[i] = beta
    return p_cond, betas


def _joint_affinities(points: np.ndarray, perplexity: float) -> np.ndarray:
    p_cond, _ = conditional_affinities(points, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * len(points))
    return np.maximum(p, 1e-12)


def tsne(points: np.ndarray, config: TsneConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact t-SNE. Returns (embedding n x out_dims, KL trace).

    The trace has one entry per iteration measured before that iteration's
    position update, plus one final entry after the last update; all entries
    use the true (non-exaggerated) affinities.
    """
    cfg = config if config is not None else TsneConfig()
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise DataError(f"points must be a 2-d array, got shape {pts.shape}")
    n = len(pts)
    if n <= 3 * cfg.perplexity:
        raise DataError(
            f"t-SNE requires n > 3 * perplexity; got n={n}, perplexity={cfg.perplexity}"
        )

    p = _joint_affinities(pts, cfg.perplexity)

    # PCA init, rescaled so the leading axis has std 1e-4
    init_model = pca_fit(pts, min(cfg.out_dims, min(pts.shape)))
    y = pca_transform(init_model, pts)
    if y.shape[1] < cfg.out_dims:
        y = np.concatenate([y, np.zeros((n, cfg.out_dims - y.shape[1]))], axis=1)
    lead_std = float(np.std(y[:, 0]))
    y = y / max(lead_std, 1e-300) * 1e-4

    velocity = np.zeros_like(y)
    trace = np.empty(cfg.iterations + 1)
    for it in range(cfg.iterations):
        sq = np.sum(y * y, axis=1)
        num = 1.0 / (1.0 + sq[:, None] + sq[None, :] - 2.0 * y @ y.T)
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)

        trace[it] = float(np.sum(p * np.log(p / q)))

        exaggeration = cfg.early_exaggeration if it < cfg.exaggeration_iters else 1.0
        momentum = cfg.momentum_start if it < cfg.momentum_switch else cfg.momentum_final
        pq = (exaggeration * p - q) * num
        grad = 4.0 * (pq.sum(axis=1)[:, None] * y - pq @ y)

        velocity = momentum * velocity - cfg.learning_rate * grad
        y = y + velocity
        y = y - y.mean(axis=0)

    sq = np.sum(y * y, axis=1)
    num = 1.0 / (1.0 + sq[:, None] + sq[None, :] - 2.0 * y @ y.T)
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), 1e-12)
    trace[cfg.iterations] = float(np.sum(p * np.log(p / q)))
    return y, trace
