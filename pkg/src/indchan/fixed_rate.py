"""Fixed-rate random codes with universal decoders.

Three decoders over a random codebook:

* ``decode_mmi``: maximum empirical mutual information (discrete inputs)
* ``decode_maxcorr``: maximum ``|<x_i, y>| / |x_i|``, the Gaussian GLRT
* ``decode_projection``: maximum ``|<x_i, y>|``, kept as a weaker baseline

When ``M`` is too large to scan, decoders accept an explicit candidate set.
:func:`ensemble_error_probability` then gives the exact error probability of
the full random-coding ensemble conditioned on the sent word and the output,
using the exact law of a wrong codeword's score.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import log_ndtr, xlogy

from . import bounds
from .codebook import SELECTION, Codebook, Prior, generate_codebook, uint64_words
from .empirical import LN2, gaussian_rate, joint_histogram, mi_from_counts

MAX_SCAN = 1 << 20
_CHUNK = 4096


def codebook_size(n: int, rate: float) -> int:
    """round(2**(n R)) as an exact integer, at least 2."""
    x = n * rate
    if x < 52:
        return max(2, int(round(2.0 ** x)))
    e = math.floor(x)
    return int(round(2.0 ** (x - e) * 2.0 ** 52)) << (e - 52)


@dataclass(frozen=True)
class FixedRateConfig:
    n: int
    rate: float
    prior: Prior
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.rate <= 0:
            raise ValueError("need n >= 1 and a positive rate")

    @property
    def M(self) -> int:
        return codebook_size(self.n, self.rate)

    @property
    def realized_rate(self) -> float:
        return math.log2(self.M) / self.n

    @property
    def codebook(self) -> Codebook:
        return generate_codebook(self.seed, self.prior, self.M, self.n)


@dataclass(frozen=True)
class DecodeResult:
    w_hat: int
    score: float
    runner_up: float


def encode_fixed(cfg: FixedRateConfig, w: int) -> np.ndarray:
    return cfg.codebook.row(w)


def sample_candidates(cfg: FixedRateConfig, w: int, count: int, stream: int = 0) -> np.ndarray:
    """``w`` plus ``count`` distinct other indices, sorted ascending."""
    M = cfg.M
    count = min(count, M - 1)
    chosen = {int(w)}
    pos = 0
    limbs = max(1, -(-M.bit_length() // 64)) + 1
    while len(chosen) < count + 1:
        words = uint64_words(cfg.seed, SELECTION, stream, 0, pos, limbs * (count + 4))
        pos += words.size
        for j in range(0, words.size - limbs + 1, limbs):
            v = sum(int(words[j + t]) << (64 * t) for t in range(limbs))
            chosen.add(v % M)   # one spare limb keeps the modulo bias below 2**-64
            if len(chosen) == count + 1:
                break
    return np.array(sorted(chosen), dtype=object)


def _scan(cfg: FixedRateConfig, candidates, score_fn) -> DecodeResult:
    if candidates is None:
        if cfg.M > MAX_SCAN:
            raise ValueError(f"M = {cfg.M} is too large to scan; pass candidates")
        candidates = np.arange(cfg.M)
    cand = sorted(int(c) for c in np.atleast_1d(candidates))
    best, best_i, second = -np.inf, -1, -np.inf
    cb = cfg.codebook
    for lo in range(0, len(cand), _CHUNK):
        part = cand[lo:lo + _CHUNK]
        s = score_fn(cb.rows(part))
        j = int(np.argmax(s))     # first maximum keeps the lowest index
        top = s[j]
        rest = np.delete(s, j)
        local_second = rest.max() if rest.size else -np.inf
        if top > best:
            second = max(best, local_second)
            best, best_i = top, part[j]
        else:
            second = max(second, top)
    return DecodeResult(best_i, float(best), float(second))


def decode_mmi(cfg: FixedRateConfig, y, candidates=None) -> DecodeResult:
    """argmax Î(x_i; y), ties to the lowest index; score in bits."""
    if cfg.prior.continuous:
        raise ValueError("MMI decoding needs a discrete prior")
    y = np.asarray(y, dtype=np.int64)
    ax = cfg.prior.size
    ay = int(y.max()) + 1 if y.size else 1

    def score(X):
        onehot = (X[:, :, None] * ay + y[None, :, None]) == np.arange(ax * ay)[None, None, :]
        counts = onehot.sum(axis=1).reshape(X.shape[0], ax, ay)
        return mi_from_counts(counts)

    return _scan(cfg, candidates, score)


def decode_maxcorr(cfg: FixedRateConfig, y, candidates=None) -> DecodeResult:
    """argmax |<x_i, y>| / |x_i|; score is R_2(|ρ̂|) in bits."""
    y = np.asarray(y, dtype=float)
    yn = np.sqrt(y @ y)

    def score(X):
        X = X.astype(float)
        norms = np.sqrt((X * X).sum(axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where((norms > 0) & (yn > 0), np.abs(X @ y) / (norms * max(yn, 1e-300)), 0.0)
        return gaussian_rate(np.minimum(r, 1.0))

    return _scan(cfg, candidates, score)


def decode_projection(cfg: FixedRateConfig, y, candidates=None) -> DecodeResult:
    """argmax |<x_i, y>|; the score is |<x, y>| itself."""
    y = np.asarray(y, dtype=float)
    return _scan(cfg, candidates, lambda X: np.abs(X.astype(float) @ y))


DECODERS = {"mmi": decode_mmi, "maxcorr": decode_maxcorr, "projection": decode_projection}


# ------------------------------------------------------------ exact ensemble


def mmi_wrong_tail(y, threshold_bits: float, prior: Prior) -> float:
    """P(Î(X'; y) >= threshold) for X' i.i.d. from a binary prior.

    Exact: with y fixed, the joint type of (X', y) is a product of one
    binomial per output symbol, so the tail is a finite sum over types.
    """
    if prior.continuous or prior.size != 2:
        raise ValueError("exact MMI tail is implemented for binary priors")
    y = np.asarray(y, dtype=np.int64)
    ys = np.bincount(y)
    ys = ys[ys > 0]
    q = prior.probs[1]
    n = int(ys.sum())
    d = len(ys)
    # with k_b ones among the positions where y = b, sum everything by broadcasting
    total = np.zeros([1] * d)
    ones = np.zeros([1] * d)
    logp = np.zeros([1] * d)
    for b, c in enumerate(ys):
        shape = [1] * d
        shape[b] = c + 1
        k = np.arange(c + 1, dtype=float)
        total = total + (xlogy(k, k) + xlogy(c - k, c - k)).reshape(shape)
        ones = ones + k.reshape(shape)
        logp = logp + stats.binom.logpmf(np.arange(c + 1), c, q).reshape(shape)
    total = (total - xlogy(ones, ones) - xlogy(n - ones, n - ones)
             - float(sum(xlogy(c, c) for c in ys)) + xlogy(n, n))
    mi = (np.maximum(total / n, 0.0) / LN2).ravel()
    logp = np.broadcast_to(logp, total.shape).ravel()
    hit = mi >= threshold_bits - 1e-12   # ties count against the decoder
    if not np.any(hit):
        return 0.0
    return float(np.exp(logp[hit]).sum())


def maxcorr_wrong_tail(t: float, n: int) -> float:
    """P(|ρ̂(X', y)| >= t) for X' i.i.d. Gaussian: a Beta(1/2, (n-1)/2) tail."""
    return bounds.rho_tail_oracle(t, n)


def projection_wrong_tail(s: float, y, power: float) -> float:
    """P(|<X', y>| >= s) with X' ~ N(0, P I): a two-sided normal tail."""
    y = np.asarray(y, dtype=float)
    scale = math.sqrt(power * float(y @ y))
    if scale == 0:
        return 1.0
    return float(2.0 * np.exp(log_ndtr(-s / scale)))


def union_of_wrong(p: float, M: int) -> float:
    """1 - (1 - p)**(M - 1), stable for tiny p and huge M."""
    if p <= 0:
        return 0.0
    if p >= 1:
        return 1.0
    return float(-math.expm1((M - 1) * math.log1p(-p)))


def ensemble_error_probability(cfg: FixedRateConfig, decoder: str, x, y) -> float:
    """Exact P(some wrong codeword scores at least the sent one | x, y).

    Ties are counted as errors, so this upper-bounds the lowest-index rule.
    """
    if decoder == "mmi":
        t = float(mi_from_counts(joint_histogram(x, y, cfg.prior.size).counts))
        p = mmi_wrong_tail(y, t, cfg.prior)
    elif decoder == "maxcorr":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        den = math.sqrt(float(x @ x) * float(y @ y))
        t = abs(float(x @ y)) / den if den > 0 else 0.0
        p = maxcorr_wrong_tail(min(t, 1.0), cfg.n)
    elif decoder == "projection":
        s = abs(float(np.asarray(x, dtype=float) @ np.asarray(y, dtype=float)))
        p = projection_wrong_tail(s, y, cfg.prior.power)
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    return union_of_wrong(p, cfg.M)
