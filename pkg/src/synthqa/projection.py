"""Exact t-SNE: perplexity-calibrated Gaussian affinities in the input space,
Student-t affinities in the output space, and gradient descent on KL(P||Q).

Everything here is O(n^2) and deterministic for a fixed seed. That is a
deliberate trade: corpora in this pipeline are at most a few thousand chunks,
and the exact gradient admits a finite-difference correctness check that an
approximating tree-based variant would not.

Scatter exports (CSV and SVG) are written byte-deterministically so that
repeated runs produce identical files.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .clustering import as_matrix, pairwise_squared_distances
from .embedding import Vector

log = logging.getLogger(__name__)

AFFINITY_FLOOR = 1e-12
DISTANCE_FLOOR = 1e-12
EARLY_PHASE_ITERS = 250  # early exaggeration and low momentum both end here

# Fixed 10-color palette for SVG scatters, cycled by label index.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

TraceHook = Callable[[int, float, float], None]  # (iteration, kl, max_abs_gradient)


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class TsneConfig:
    out_dims: int = 2
    perplexity: float = 30.0
    iterations: int = 1000
    early_exaggeration_factor: float = 12.0
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    seed: int = 0
    perplexity_tol: float = 1e-5
    perplexity_max_bisections: int = 50

    def __post_init__(self) -> None:
        if self.out_dims < 1:
            raise ValueError("out_dims must be positive")
        if self.iterations < EARLY_PHASE_ITERS:
            raise ValueError(f"iterations must be >= {EARLY_PHASE_ITERS}")
        if self.perplexity <= 0 or self.learning_rate <= 0 or self.early_exaggeration_factor <= 0:
            raise ValueError("perplexity, learning_rate and exaggeration must be positive")


@dataclass
class AffinityMatrix:
    n: int
    p: np.ndarray

    def __post_init__(self) -> None:
        if self.p.shape != (self.n, self.n):
            raise ProjectionError(f"affinity matrix must be {self.n}x{self.n}")
        if not np.allclose(self.p, self.p.T, atol=1e-12, rtol=0.0):
            raise ProjectionError("affinity matrix is not symmetric")
        if np.any(np.diag(self.p) != 0.0):
            raise ProjectionError("affinity diagonal must be zero")
        if not np.isfinite(self.p).all():
            raise ProjectionError("affinity matrix has non-finite entries")
        total = float(self.p.sum())
        if abs(total - 1.0) > 1e-9:
            raise ProjectionError(f"affinity entries sum to {total}, expected 1")
        off = self.p[~np.eye(self.n, dtype=bool)]
        if len(off) and float(off.min()) < AFFINITY_FLOOR:
            raise ProjectionError(f"affinity entries fall below the {AFFINITY_FLOOR} floor")


def clamp_perplexity(perplexity: float, n: int) -> float:
    """Cap perplexity at (n-1)/3 and keep it >= 2 so bisection stays sane."""
    return max(2.0, min(perplexity, (n - 1) / 3.0))


def _row_entropy_bits(p_row: np.ndarray) -> float:
    nz = p_row[p_row > 0.0]
    return float(-(nz * np.log2(nz)).sum())


def _row_affinities(d2_row: np.ndarray, beta: float) -> np.ndarray:
    """Gaussian kernel over squared distances at precision beta, normalized."""
    shifted = -beta * (d2_row - d2_row.min())
    ex = np.exp(shifted)
    return ex / ex.sum()


def bisect_row_precision(
    d2_row: np.ndarray,
    perplexity: float,
    tol: float,
    max_bisections: int,
) -> tuple[np.ndarray, float]:
    """Find the Gaussian precision beta = 1/(2 sigma^2) for one row such that
    2^H(row) matches the target perplexity within tol.

    The search brackets beta by doubling/halving, then bisects in log space,
    keeping the best beta seen in case the budget runs out.
    """
    target_bits = math.log2(perplexity)
    beta = 1.0
    p_row = _row_affinities(d2_row, beta)
    h = _row_entropy_bits(p_row)

    best = (abs(h - target_bits), beta, p_row)
    lo: float | None = None
    hi: float | None = None
    # Higher beta -> narrower kernel -> lower entropy.
    for _ in range(64):
        if abs(2.0**h - perplexity) <= tol:
            return p_row, beta
        if h > target_bits:
            lo = beta
            beta = beta * 2.0 if hi is None else math.sqrt(beta * hi)
        else:
            hi = beta
            beta = beta / 2.0 if lo is None else math.sqrt(beta * lo)
        p_row = _row_affinities(d2_row, beta)
        h = _row_entropy_bits(p_row)
        if abs(h - target_bits) < best[0]:
            best = (abs(h - target_bits), beta, p_row)
        if lo is not None and hi is not None:
            break

    for _ in range(max_bisections):
        if abs(2.0**h - perplexity) <= tol or lo is None or hi is None:
            break
        beta = math.sqrt(lo * hi)
        p_row = _row_affinities(d2_row, beta)
        h = _row_entropy_bits(p_row)
        if abs(h - target_bits) < best[0]:
            best = (abs(h - target_bits), beta, p_row)
        if h > target_bits:
            lo = beta
        else:
            hi = beta

    if abs(2.0**h - perplexity) <= tol:
        return p_row, beta
    _, beta, p_row = best
    return p_row, beta


def conditional_affinities_with_bandwidths(
    vectors: Sequence[Vector] | np.ndarray,
    perplexity: float,
    tol: float = 1e-5,
    max_bisections: int = 50,
) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic conditional affinities P(j|i) plus the per-row sigma."""
    x = vectors if isinstance(vectors, np.ndarray) else as_matrix(vectors)
    n = x.shape[0]
    if n < 4:
        raise ProjectionError("need at least 4 points")
    perplexity = clamp_perplexity(perplexity, n)

    d2 = pairwise_squared_distances(x)
    off_diag = d2[~np.eye(n, dtype=bool)]
    if np.any(off_diag < DISTANCE_FLOOR):
        log.warning("duplicate or near-duplicate points; flooring squared distances at %g",
                    DISTANCE_FLOOR)
        d2 = np.maximum(d2, DISTANCE_FLOOR)

    p = np.zeros((n, n), dtype=np.float64)
    sigmas = np.zeros(n, dtype=np.float64)
    idx = np.arange(n)
    for i in range(n):
        others = idx != i
        row, beta = bisect_row_precision(d2[i][others], perplexity, tol, max_bisections)
        p[i][others] = row
        sigmas[i] = math.sqrt(1.0 / (2.0 * beta))
    return p, sigmas


def conditional_affinities(
    vectors: Sequence[Vector] | np.ndarray,
    perplexity: float,
    tol: float = 1e-5,
    max_bisections: int = 50,
) -> np.ndarray:
    p, _ = conditional_affinities_with_bandwidths(vectors, perplexity, tol, max_bisections)
    return p


def symmetrize(p_conditional: np.ndarray) -> AffinityMatrix:
    """Joint affinities p_ij = (P(j|i) + P(i|j)) / 2n, floored and renormalized."""
    n = p_conditional.shape[0]
    p = (p_conditional + p_conditional.T) / (2.0 * n)
    off = ~np.eye(n, dtype=bool)
    p[off] = np.maximum(p[off], AFFINITY_FLOOR)
    p /= p.sum()
    p[off] = np.maximum(p[off], AFFINITY_FLOOR)
    np.fill_diagonal(p, 0.0)
    return AffinityMatrix(n=n, p=p)


def _student_t_weights(y: np.ndarray) -> np.ndarray:
    """w_ij = 1 / (1 + ||y_i - y_j||^2) with zero diagonal."""
    w = 1.0 / (1.0 + pairwise_squared_distances(y))
    np.fill_diagonal(w, 0.0)
    return w


def low_dim_affinities(y: np.ndarray) -> np.ndarray:
    w = _student_t_weights(y)
    return w / w.sum()


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    """KL(P || Q(y)) in nats over off-diagonal entries."""
    q = np.maximum(low_dim_affinities(y), 1e-12)
    mask = p > 0.0
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def kl_gradient(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Analytic gradient of KL(P||Q) with the Student-t kernel:
    dC/dy_i = 4 * sum_j (p_ij - q_ij) * w_ij * (y_i - y_j).
    """
    w = _student_t_weights(y)
    q = w / w.sum()
    pq_w = (p - q) * w
    # sum_j pq_w[i,j] * (y_i - y_j)  ==  diag(row_sums) @ y - pq_w @ y
    row_sums = pq_w.sum(axis=1)
    return 4.0 * (row_sums[:, None] * y - pq_w @ y)


def tsne(
    vectors: Sequence[Vector] | np.ndarray,
    cfg: TsneConfig | None = None,
    trace_hook: TraceHook | None = None,
) -> np.ndarray:
    """Project vectors to cfg.out_dims coordinates; deterministic per seed.

    The trace hook, when given, receives (iteration, KL against the true
    unexaggerated P, max absolute gradient entry) once per iteration.
    """
    cfg = cfg or TsneConfig()
    x = vectors if isinstance(vectors, np.ndarray) else as_matrix(vectors)
    n = x.shape[0]
    if n < 4:
        raise ProjectionError(f"t-SNE needs at least 4 points, got {n}")

    p_cond = conditional_affinities(
        x, cfg.perplexity, cfg.perplexity_tol, cfg.perplexity_max_bisections
    )
    p = symmetrize(p_cond).p

    rng = np.random.default_rng(cfg.seed)
    y = rng.normal(0.0, 1e-4, size=(n, cfg.out_dims))
    velocity = np.zeros_like(y)
    # Per-coordinate adaptive step sizes ("gains"): grow when the gradient
    # keeps pointing where the velocity is already going, shrink on a sign
    # flip. The stock hyperparameters (lr 200, exaggeration 12) assume this.
    gains = np.ones_like(y)

    for iteration in range(1, cfg.iterations + 1):
        exaggerating = iteration <= EARLY_PHASE_ITERS
        p_eff = p * cfg.early_exaggeration_factor if exaggerating else p
        grad = kl_gradient(p_eff, y)
        if not np.isfinite(grad).all():
            raise ProjectionError(
                f"non-finite gradient at iteration {iteration}; "
                f"max |grad| so far {np.nanmax(np.abs(grad))}"
            )
        same_direction = velocity * grad < 0.0
        gains[same_direction] += 0.2
        gains[~same_direction] *= 0.8
        np.clip(gains, 0.01, None, out=gains)
        momentum = cfg.momentum_early if iteration < EARLY_PHASE_ITERS else cfg.momentum_late
        velocity = momentum * velocity - cfg.learning_rate * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)
        if not np.isfinite(y).all():
            raise ProjectionError(f"non-finite coordinates at iteration {iteration}")
        if trace_hook is not None:
            trace_hook(iteration, kl_divergence(p, y), float(np.abs(grad).max()))

    return y - y.mean(axis=0)


def scatter_export(
    coords: np.ndarray | Sequence[Sequence[float]],
    labels: Sequence[str],
    path: str | Path,
    format: str = "csv",
) -> Path:
    """Write a labeled 2D scatter as CSV (x,y,label) or standalone SVG.

    Output bytes depend only on the input, so identical data produces
    identical files.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if len(coords) != len(labels):
        raise ProjectionError("coords and labels must have the same length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "y", "label"])
            for (x, y), label in zip(coords, labels):
                writer.writerow([repr(float(x)), repr(float(y)), label])
    elif format == "svg":
        path.write_text(_scatter_svg(coords, labels), encoding="utf-8")
    else:
        raise ProjectionError(f"unknown scatter format: {format!r}")
    return path


def _scatter_svg(coords: np.ndarray, labels: Sequence[str]) -> str:
    width, height, margin = 640, 480, 48
    label_order: list[str] = []
    for label in labels:
        if label not in label_order:
            label_order.append(label)
    color = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(label_order)}

    if len(coords):
        x_min, y_min = coords.min(axis=0)
        x_max, y_max = coords.max(axis=0)
    else:
        x_min = y_min = 0.0
        x_max = y_max = 1.0
    x_span = (x_max - x_min) or 1.0
    y_span = (y_max - y_min) or 1.0

    def sx(x: float) -> float:
        return margin + (x - x_min) / x_span * (width - 2 * margin)

    def sy(y: float) -> float:
        # SVG y grows downward
        return height - margin - (y - y_min) / y_span * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for (x, y), label in zip(coords, labels):
        parts.append(
            f'<circle cx="{sx(float(x)):.3f}" cy="{sy(float(y)):.3f}" r="4" '
            f'fill="{color[label]}" fill-opacity="0.8"/>'
        )
    for i, label in enumerate(label_order):
        ly = margin / 2 + i * 18
        parts.append(f'<rect x="{width - 170}" y="{ly}" width="12" height="12" fill="{color[label]}"/>')
        parts.append(
            f'<text x="{width - 152}" y="{ly + 11}" font-family="sans-serif" '
            f'font-size="12">{_svg_escape(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _svg_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_projection_sidecar(
    path: str | Path,
    cfg: TsneConfig,
    n_points: int,
    final_kl: float | None,
) -> Path:
    """JSON sidecar next to a scatter export: config, seed, and final KL."""
    doc = {
        "config": {
            "out_dims": cfg.out_dims,
            "perplexity": cfg.perplexity,
            "iterations": cfg.iterations,
            "early_exaggeration_factor": cfg.early_exaggeration_factor,
            "learning_rate": cfg.learning_rate,
            "momentum_early": cfg.momentum_early,
            "momentum_late": cfg.momentum_late,
            "perplexity_tol": cfg.perplexity_tol,
            "perplexity_max_bisections": cfg.perplexity_max_bisections,
        },
        "seed": cfg.seed,
        "n_points": n_points,
        "final_kl": final_kl,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
