"""Empirical statistics of finite sequences.

Joint types, plug-in entropies and mutual information for discrete
sequences, and the uncentered empirical correlation for real sequences.
Everything is computed in nats internally and reported in bits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

LN2 = np.log(2.0)


def _as_symbols(seq, alphabet: int | None, name: str) -> np.ndarray:
    a = np.asarray(seq)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if a.size and not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.equal(np.mod(a, 1), 0)):
            raise ValueError(f"{name} must contain integer symbols")
        a = a.astype(np.int64)
    a = a.astype(np.int64, copy=False)
    if a.size and a.min() < 0:
        raise ValueError(f"{name} has a negative symbol")
    if alphabet is not None and a.size and a.max() >= alphabet:
        raise ValueError(f"{name} has a symbol outside its alphabet of size {alphabet}")
    return a


@dataclass(frozen=True)
class JointHistogram:
    """Counts of symbol pairs; ``counts[a, b]`` is #{k : x_k = a, y_k = b}."""

    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def joint(self) -> np.ndarray:
        return self.counts / max(self.n, 1)

    @property
    def px(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.joint.sum(axis=0)


def joint_histogram(x, y, ax: int | None = None, ay: int | None = None) -> JointHistogram:
    xs = _as_symbols(x, ax, "x")
    ys = _as_symbols(y, ay, "y")
    if xs.size != ys.size:
        raise ValueError(f"length mismatch: {xs.size} != {ys.size}")
    if xs.size == 0:
        raise ValueError("empty sequence")
    ax = ax if ax is not None else int(xs.max()) + 1
    ay = ay if ay is not None else int(ys.max()) + 1
    flat = np.bincount(xs * ay + ys, minlength=ax * ay)
    return JointHistogram(flat.reshape(ax, ay))


def mi_from_counts(counts) -> np.ndarray:
    """Plug-in mutual information in bits from joint counts.

    ``counts`` has shape ``(..., ax, ay)``; the result has the leading shape.
    Works on integer or float counts, so cumulative counts can be fed in
    directly.
    """
    c = np.asarray(counts, dtype=float)
    m = c.sum(axis=(-2, -1))
    rows = c.sum(axis=-1, keepdims=True)
    cols = c.sum(axis=-2, keepdims=True)
    # Σ c log(c m / (r k)) / m: one log per cell, no cancellation between sums
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(c > 0, c * m[..., None, None] / (rows * cols), 1.0)
        total = xlogy(c, ratio).sum(axis=(-2, -1))
        nats = np.where(m > 0, total / np.where(m > 0, m, 1), 0.0)
    # plug-in MI is nonnegative; clip the rounding residue
    return np.maximum(nats, 0.0) / LN2


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum() / LN2)


def empirical_entropy(x, alphabet: int | None = None) -> float:
    xs = _as_symbols(x, alphabet, "x")
    if xs.size == 0:
        raise ValueError("empty sequence")
    return entropy_bits(np.bincount(xs) / xs.size)


def empirical_mi(hist: JointHistogram) -> float:
    """Î(x;y) in bits from a joint histogram.

    Shares :func:`mi_from_counts` with the per-subset code, so a one-subset
    partition reproduces Î(x;y) to the last bit.
    """
    return float(mi_from_counts(hist.counts))


def empirical_mi_of(x, y, ax: int | None = None, ay: int | None = None) -> float:
    return empirical_mi(joint_histogram(x, y, ax, ay))


@dataclass(frozen=True)
class Partition:
    """Labels ``u_k`` in ``{0..p-1}`` splitting time into p subsets."""

    labels: np.ndarray
    p: int

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 1 or (lab.size and (lab.min() < 0 or lab.max() >= self.p)):
            raise ValueError("labels must be one-dimensional and lie in [0, p)")

    @property
    def weights(self) -> np.ndarray:
        """Fractions λ_i of time spent in each subset."""
        return np.bincount(self.labels, minlength=self.p) / self.labels.size

    @classmethod
    def contiguous(cls, n: int, p: int) -> "Partition":
        return cls(np.minimum(np.arange(n) * p // n, p - 1), p)


def conditional_mi(x, y, part: Partition, ax: int | None = None,
                   ay: int | None = None) -> float:
    """Î(x;y|u) = Σ_i λ_i Î_i(x;y) in bits, with Î_i computed on subset i."""
    xs = _as_symbols(x, ax, "x")
    ys = _as_symbols(y, ay, "y")
    ax = ax if ax is not None else int(xs.max()) + 1
    ay = ay if ay is not None else int(ys.max()) + 1
    lab = np.asarray(part.labels)
    if lab.size != xs.size or ys.size != xs.size:
        raise ValueError("x, y and labels must have equal length")
    flat = np.bincount((lab * ax + xs) * ay + ys, minlength=part.p * ax * ay)
    counts = flat.reshape(part.p, ax, ay)
    return float(np.dot(part.weights, mi_from_counts(counts)))


def per_subset_mi(x, y, part: Partition, ax: int | None = None,
                  ay: int | None = None) -> np.ndarray:
    xs = _as_symbols(x, ax, "x")
    ys = _as_symbols(y, ay, "y")
    ax = ax if ax is not None else int(xs.max()) + 1
    ay = ay if ay is not None else int(ys.max()) + 1
    flat = np.bincount((np.asarray(part.labels) * ax + xs) * ay + ys,
                       minlength=part.p * ax * ay)
    return mi_from_counts(flat.reshape(part.p, ax, ay))


@dataclass(frozen=True)
class CorrelationStats:
    """Running sums behind the uncentered correlation."""

    sxy: float
    sxx: float
    syy: float
    n: int

    @property
    def rho(self) -> float:
        if self.sxx <= 0.0 or self.syy <= 0.0:
            return 0.0
        return float(np.clip(self.sxy / np.sqrt(self.sxx * self.syy), -1.0, 1.0))

    def update(self, x, y) -> "CorrelationStats":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return CorrelationStats(self.sxy + float(x @ y), self.sxx + float(x @ x),
                                self.syy + float(y @ y), self.n + x.size)


def correlation_stats(x, y) -> CorrelationStats:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be one-dimensional with equal length")
    return CorrelationStats(0.0, 0.0, 0.0, 0).update(x, y)


def empirical_correlation(x, y) -> float:
    """ρ̂ = <x, y> / (|x| |y|); zero when either vector is zero."""
    return correlation_stats(x, y).rho


def gaussian_rate(t):
    """R_2(t) = -1/2 log2(1 - t^2) in bits; infinite at |t| = 1."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0) or np.any(np.isnan(t)):
        raise ValueError("correlation must lie in [-1, 1]")
    t2 = t * t
    with np.errstate(divide="ignore"):
        out = np.where(t2 >= 1.0, np.inf, -0.5 * np.log1p(-np.minimum(t2, 1.0)) / LN2)
    return float(out) if out.ndim == 0 else out


def snr_from_rho(rho):
    """Effective SNR ρ²/(1-ρ²) matching a correlation level."""
    r2 = np.asarray(rho, dtype=float) ** 2
    with np.errstate(divide="ignore"):
        out = np.where(r2 >= 1.0, np.inf, r2 / (1.0 - np.minimum(r2, 1.0)))
    return float(out) if out.ndim == 0 else out
