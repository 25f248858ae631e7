"""Closed-form bounds, their exact oracles, and the achievable-rate curves.

Probabilities are reported clamped to [0, 1]; the ``log2_*`` companions give
the raw exponent for log-scale plots.  Rates are in bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import betaln, xlogy

from .channels import Nonlinearity, nonlinearity
from .empirical import LN2, empirical_mi_of, gaussian_rate

LOG2E = 1.0 / LN2


def _clamp(log2_value: float) -> float:
    return float(2.0 ** min(log2_value, 0.0))


def _check_unit(t, what="t"):
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"{what} must lie in [0, 1]")


# --------------------------------------------------------------- type bounds


def log2_lemma1_bound(t: float, n: int, ax: int, ay: int) -> float:
    delta_n = ax * ay * math.log2(n + 1) / n
    return -n * (t - delta_n)


def lemma1_bound(t: float, n: int, ax: int, ay: int) -> float:
    """Upper bound on P(Î(X;y) >= t) for X i.i.d. and any fixed y."""
    if not t >= 0 or n < 1:
        raise ValueError("need t >= 0 and n >= 1")
    return _clamp(log2_lemma1_bound(t, n, ax, ay))


def log2_lemma3_bound(delta: float, n: int, ax: int, p: int) -> float:
    return -n * (delta - p * ax * math.log2(n + 1) / n)


def lemma3_bound(delta: float, n: int, ax: int, p: int) -> float:
    """Bound on P(x in J): sup_y of Î(x;y) - Î(x;y|u) exceeding delta."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return _clamp(log2_lemma3_bound(delta, n, ax, p))


# ------------------------------------------------------- correlation bounds


def log2_lemma4_bound(t: float, n: int) -> float:
    _check_unit(t)
    if t == 1.0:
        return -math.inf
    return 1.0 + 0.5 * (n - 1) * math.log2(1.0 - t * t)


def lemma4_bound(t: float, n: int) -> float:
    """Upper bound 2(1-t^2)^((n-1)/2) on P(|ρ̂(X, y)| >= t)."""
    if n < 2:
        raise ValueError("need n >= 2")
    return _clamp(log2_lemma4_bound(t, n))


def log_rho_tail_oracle(t: float, n: int) -> float:
    """Natural log of P(|ρ̂| >= t) for X ~ N(0, I_n) against any fixed y.

    |ρ̂| has density  2 (1-u^2)^((n-3)/2) / B(1/2, (n-1)/2)  on [0, 1].
    The tail is integrated numerically after factoring out (1-t^2)^a so
    that it stays representable when it is far below the float range.
    """
    _check_unit(t)
    if n < 2:
        raise ValueError("need n >= 2")
    if t == 1.0:
        return -math.inf
    a = 0.5 * (n - 3)
    lognorm = math.log(2.0) - betaln(0.5, 0.5 * (n - 1))
    if n == 2:
        # density 2/(pi sqrt(1-u^2)); the tail is closed form
        return math.log(1.0 - 2.0 * math.asin(t) / math.pi)
    base = math.log1p(-t * t)

    def g(u):
        return math.exp(a * (math.log1p(-u * u) - base))

    # the integrand falls off on a scale ~ (1-t^2)/(t a); help quad find it
    width = (1.0 - t * t) / max(t * a, 1e-300) if a > 0 else 1.0
    pts = [p for p in (t + width, t + 5 * width, t + 30 * width) if t < p < 1.0]
    val, _ = integrate.quad(g, t, 1.0, points=pts or None, epsabs=0.0,
                            epsrel=1e-12, limit=200)
    return lognorm + a * base + math.log(val)


def rho_tail_oracle(t: float, n: int) -> float:
    return math.exp(log_rho_tail_oracle(t, n))


def log2_lemma6_bound(delta: float, n: int, p: int, p_max: int | None = None) -> float:
    out = p - n * delta * delta * LOG2E / 8.0
    if p_max is not None:
        out += 2 * p_max * math.log2(n)
    return out


def lemma6_bound(delta: float, n: int, p: int, p_max: int | None = None) -> float:
    """Bound 2^p exp(-n delta^2 / 8) on the correlation deviation event.

    ``p_max`` adds the n^(2 p_max) factor that covers partitions chosen as
    a function of the data.  Valid for 0 < delta <= 1/7.
    """
    if not 0.0 < delta <= 1.0 / 7.0:
        raise ValueError("delta must lie in (0, 1/7]")
    return _clamp(log2_lemma6_bound(delta, n, p, p_max))


def lemma7_bound(a, lam, A: float, abar: float, n: int) -> float:
    """Bound exp(-n abar^2 / (6 A^2)) on P(sum_i a_i |x_i|^2 <= 0).

    Requires abar = sum_i lam_i a_i > 0, |a_i| <= A and abar <= A / 8.
    """
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if abs(float(lam @ a) - abar) > 1e-9 * max(1.0, abs(abar)):
        raise ValueError("abar must equal sum_i lam_i a_i")
    if not abar > 0:
        raise ValueError("abar must be positive")
    if np.any(np.abs(a) > A):
        raise ValueError("every |a_i| must be at most A")
    if abar > A / 8.0:
        raise ValueError("abar must be at most A/8")
    return float(min(1.0, math.exp(-n * abar * abar / (6.0 * A * A))))


# ------------------------------------------------------ continuous pipeline


@dataclass(frozen=True)
class ContinuousPipeline:
    """Constants of the structured-partition lower bound and its two curves."""

    n: float
    k_bits: float
    p_e: float
    p_a: float
    T: float
    delta_mu: float
    eta1: float
    eta2: float
    eps1: float
    Delta: float

    def r_lb1(self, rho):
        rho = np.asarray(rho, dtype=float)
        inner = 1.0 - self.eta1 * (rho * rho - self.Delta)
        with np.errstate(divide="ignore"):
            out = -0.5 * np.log2(inner) * self.eta2 - self.eps1
        return float(out) if out.ndim == 0 else out

    def calibrate(self, rho0: float) -> "CurveR2":
        rbar = self.r_lb1(rho0)
        return CurveR2(self, rho0, gaussian_rate(rho0) - rbar, rbar)


@dataclass(frozen=True)
class CurveR2:
    """min(R_2(ρ) - eps, R̄): a shifted R_2 capped at its value at ρ0."""

    pipeline: ContinuousPipeline
    rho0: float
    eps: float
    rbar: float

    def __call__(self, rho):
        out = np.minimum(gaussian_rate(np.asarray(rho, dtype=float)) - self.eps, self.rbar)
        return float(out) if np.ndim(out) == 0 else out


def solve_delta(n: float, T: float, p_a: float) -> float:
    """Δ with n (log2(e) Δ^2 / 8 - (2/T) log2(sqrt(2) n)) = log2(1/P_A)."""
    rhs = math.log2(1.0 / p_a) / n + (2.0 / T) * math.log2(math.sqrt(2.0) * n)
    return math.sqrt(8.0 * rhs / LOG2E)


def continuous_pipeline(n: float, k_bits: float, p_e: float, p_a: float,
                        T: float) -> ContinuousPipeline:
    if min(n, k_bits, T) <= 0 or not (0 < p_e < 1 and 0 < p_a < 1):
        raise ValueError("need positive n, K, T and probabilities in (0, 1)")
    delta_mu = math.log2(2.0 * n / p_e)
    eta2 = 1.0 / (1.0 + delta_mu / k_bits)
    eps1 = k_bits / n
    Delta = solve_delta(n, T, p_a)
    eta1 = -math.expm1(-2.0 * (1.0 + 1.0 / T) * (k_bits + delta_mu) / T * LN2)
    return ContinuousPipeline(n, k_bits, p_e, p_a, T, delta_mu, eta1, eta2, eps1, Delta)


def discrete_delta(n: int, k_bits: float, ax: int, ay: int, p_a: float) -> float:
    """Loss term of the discrete scheme in bits."""
    h0 = math.log2(min(ax, ay))
    b_max = h0 * n / k_bits
    return (3 * b_max + 2) * ax * math.log2(n + 1) / n - math.log2(p_a) / n


# ------------------------------------------------------------ comparisons


def binary_entropy(p):
    p = np.asarray(p, dtype=float)
    out = -(xlogy(p, p) + xlogy(1 - p, 1 - p)) / LN2
    return float(out) if out.ndim == 0 else out


def bsc_comparison(eps):
    """Capacity 1 - h(ε) and the rate R_2(1 - 2ε) reached with ±1 inputs.

    The channel output of the sign-mapped BSC has correlation (1 - 2ε) with
    the sign of a Gaussian input; the sign itself has correlation sqrt(2/π)
    with the input, which gives R = -1/2 log2(1 - (2/π)(1 - 2ε)^2).
    """
    eps = np.asarray(eps, dtype=float)
    if np.any((eps < 0) | (eps > 1)):
        raise ValueError("ε must lie in [0, 1]")
    C = 1.0 - binary_entropy(eps)
    R = -0.5 * np.log2(1.0 - (2.0 / np.pi) * (1.0 - 2.0 * eps) ** 2) + 0.0
    return C, R


@dataclass(frozen=True)
class EffectiveSNR:
    gamma: float
    p_eff: float
    n_eff: float
    snr: float
    rho: float


def _gauss_expect(fn: Callable, power: float, breakpoints=(), tol=1e-12) -> float:
    """E[fn(X)] for X ~ N(0, P).

    Smooth integrands use Gauss-Hermite with order doubling; integrands with
    kinks are integrated piecewise between their breakpoints instead, since
    Gauss-Hermite converges only algebraically across a kink.
    """
    s = math.sqrt(power)
    if not breakpoints:
        prev = None
        order = 16
        while order <= 1024:
            z, w = np.polynomial.hermite_e.hermegauss(order)
            val = float(w @ fn(s * z)) / math.sqrt(2 * math.pi)
            if prev is not None and abs(val - prev) < 1e-10:
                return val
            prev, order = val, order * 2
    # piecewise adaptive quadrature against the Gaussian density
    pdf = lambda x: math.exp(-0.5 * x * x / power) / math.sqrt(2 * math.pi * power)
    cuts = sorted(set(float(b) for b in breakpoints))
    edges = [-math.inf] + cuts + [math.inf]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(lambda x: float(fn(np.array([x]))[0]) * pdf(x), lo, hi,
                              epsabs=tol, epsrel=tol, limit=400)
        total += v
    return total


def effective_snr(f: Nonlinearity | str | Callable, power: float, noise_power: float,
                  breakpoints=None) -> EffectiveSNR:
    """Split f(X) into γX plus an uncorrelated part for Y = f(X) + V.

    γ = E[X f(X)] / E[X^2], P_eff = γ^2 E[X^2], N_eff = E[(f - γX)^2] and
    SNR = P_eff / (N + N_eff), which equals ρ^2/(1 - ρ^2) for ρ = corr(X, Y).
    """
    if isinstance(f, str):
        f = nonlinearity(*f.split(":")[:1], *[float(v) for v in f.split(":")[1:]])
    if isinstance(f, Nonlinearity):
        fn, bps = f, f.breakpoints
    else:
        fn, bps = (lambda x: np.asarray(f(x), dtype=float)), ()
    if breakpoints is not None:
        bps = tuple(breakpoints)
    exx = power
    exf = _gauss_expect(lambda x: x * fn(x), power, bps)
    eff = _gauss_expect(lambda x: fn(x) ** 2, power, bps)
    gamma = exf / exx
    p_eff = gamma * gamma * exx
    n_eff = max(eff - 2 * gamma * exf + gamma * gamma * exx, 0.0)
    denom = noise_power + n_eff
    snr = p_eff / denom if denom > 0 else (math.inf if p_eff > 0 else 0.0)
    ey2 = eff + noise_power
    rho = exf / math.sqrt(exx * ey2) if ey2 > 0 else 0.0
    return EffectiveSNR(gamma, p_eff, n_eff, snr, rho)


def lemma2_check(sample_xy: Callable[[np.random.Generator, int], tuple], samples: int,
                 seed: int = 0, bins: int = 64) -> dict:
    """Compare a plug-in I(X;Y) estimate with R_2(ρ) for a sampled pair.

    The estimate quantizes both variables into equiprobable bins, which
    can only lose information, so a positive margin beyond the small-sample
    bias supports I(X;Y) >= R_2(ρ).
    """
    rng = np.random.default_rng(seed)
    x, y = sample_xy(rng, samples)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = float(np.corrcoef(x, y)[0, 1]) if x.std() > 0 and y.std() > 0 else 0.0

    def quantize(v):
        edges = np.unique(np.quantile(v, np.linspace(0, 1, bins + 1)[1:-1]))
        return np.searchsorted(edges, v, side="right")

    qx, qy = quantize(x), quantize(y)
    mi = empirical_mi_of(qx, qy)
    # Miller-Madow style estimate of the upward small-sample bias
    cells = len(np.unique(qx * (qy.max() + 1) + qy))
    bias = max(cells - len(np.unique(qx)) - len(np.unique(qy)) + 1, 0) / (2 * samples * LN2)
    r2 = gaussian_rate(min(abs(rho), 1.0))
    return {"mi": mi, "bias": bias, "rho": rho, "r2": r2, "margin": mi - bias - r2}
