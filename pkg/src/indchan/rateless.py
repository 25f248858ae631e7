"""Rateless transmission with block-end feedback.

Each block sends one codeword of a random codebook, symbol by symbol, from
the current absolute time on (the symbol at time k is ``C[i, k]``).  After
every symbol the receiver scores every candidate codeword on the window
since the block began and ends the block as soon as some candidate clears
the threshold ``mu_star(m)``.  One bit of feedback tells the sender to move
on; the tail block that never finishes is discarded.

Scores are Î in bits for discrete inputs and R_2(|ρ̂|) for Gaussian inputs.

``run_adaptive`` looks ahead in chunks: it previews a chunk of channel
outputs for the current codeword, scores the whole chunk at once from
cumulative sums, and commits only the prefix up to the decision point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from . import bounds
from .codebook import MESSAGE, SELECTION, Prior, generate_codebook, uint64_words
from .channels import Channel
from .empirical import LN2, correlation_stats, empirical_mi_of, gaussian_rate

_MAX_CHUNK = 4096
_MIN_CHUNK = 16


@dataclass(frozen=True)
class SchemeParams:
    """Configuration of one rateless run.

    ``competitors`` is the number of wrong codewords scored alongside the
    sent one in each block (drawn afresh per block); ``None`` scores all M,
    which is only practical for small ``k_bits``.
    """

    n: int
    k_bits: int
    p_e: float = 1e-2
    prior: Prior = field(default_factory=lambda: Prior.uniform(2))
    output_alphabet: int | None = None
    feedback_period: int = 1
    competitors: int | None = 31
    p_a: float = 1e-3
    T: float | None = None

    def __post_init__(self):
        if self.n < 2 or self.k_bits < 1:
            raise ValueError("need n >= 2 and k_bits >= 1")
        if not 0 < self.p_e < 1:
            raise ValueError("p_e must lie in (0, 1)")
        if self.feedback_period < 1:
            raise ValueError("feedback_period must be at least 1")
        if self.competitors is None and self.k_bits > 16:
            raise ValueError("scoring all 2**k_bits codewords needs k_bits <= 16")

    @property
    def M(self) -> int:
        return 1 << self.k_bits

    @property
    def continuous(self) -> bool:
        return self.prior.continuous

    @property
    def ax(self) -> int:
        return self.prior.size

    @property
    def ay(self) -> int:
        return self.output_alphabet if self.output_alphabet is not None else self.ax


def mu_star(m, params: SchemeParams):
    """Termination threshold in bits for a window of m symbols."""
    m = np.asarray(m, dtype=float)
    if np.any(m < 1):
        raise ValueError("window length must be at least 1")
    if params.continuous:
        num = params.k_bits + math.log2(2 * params.n / params.p_e)
        with np.errstate(divide="ignore"):
            out = np.where(m > 1, num / np.maximum(m - 1, 1), np.inf)
    else:
        ax, ay = params.ax, params.ay
        out = (params.k_bits + math.log2(params.n / params.p_e)
               + ax * ay * np.log2(m + 1)) / m
    return float(out) if out.ndim == 0 else out


def random_message(seed: int, n_bits: int) -> np.ndarray:
    words = uint64_words(seed, MESSAGE, 0, 0, 0, -(-n_bits // 64))
    bits = np.unpackbits(words.astype(">u8").view(np.uint8))
    return bits[:n_bits]


def bits_to_indices(bits, k_bits: int) -> list[int]:
    """Consecutive k-bit big-endian groups; a short tail is ignored."""
    bits = np.asarray(bits, dtype=np.uint8)
    blocks = bits.size // k_bits
    grid = bits[:blocks * k_bits].reshape(blocks, k_bits)
    pad = -k_bits % 8
    packed = np.packbits(np.pad(grid, ((0, 0), (pad, 0))), axis=1)
    return [int.from_bytes(row.tobytes(), "big") for row in packed]


def indices_to_bits(indices, k_bits: int) -> np.ndarray:
    out = np.zeros(len(indices) * k_bits, dtype=np.uint8)
    for b, v in enumerate(indices):
        for j in range(k_bits):
            out[b * k_bits + j] = (int(v) >> (k_bits - 1 - j)) & 1
    return out


@dataclass
class Transcript:
    n: int
    k_bits: int
    continuous: bool
    feedback_period: int
    starts: list = field(default_factory=list)
    lengths: list = field(default_factory=list)   # symbols scored, decision included
    spans: list = field(default_factory=list)     # lengths plus idle feedback wait
    sent: list = field(default_factory=list)
    decoded: list = field(default_factory=list)
    metrics: list = field(default_factory=list)   # winning score at the decision
    unfinished: int = 0
    x: np.ndarray | None = None
    y: np.ndarray | None = None

    @property
    def B(self) -> int:
        return len(self.decoded)

    @property
    def r_act(self) -> float:
        return self.B * self.k_bits / self.n

    @property
    def block_errors(self) -> int:
        return sum(int(a != b) for a, b in zip(self.sent, self.decoded))

    def decoded_bits(self) -> np.ndarray:
        return indices_to_bits(self.decoded, self.k_bits)

    def check_accounting(self) -> None:
        if sum(self.spans) + self.unfinished != self.n:
            raise AssertionError("block spans and discarded tail do not cover n")
        pos = 0
        for s, span, m in zip(self.starts, self.spans, self.lengths):
            if s != pos or not 1 <= m <= span:
                raise AssertionError(f"block at {s} breaks contiguity")
            pos += span
        if abs(self.r_act - self.B * self.k_bits / self.n) > 0:
            raise AssertionError("R_act mismatch")

    def to_text(self) -> str:
        lines = [f"# n={self.n} k_bits={self.k_bits} "
                 f"metric={'R2' if self.continuous else 'MI'} "
                 f"feedback_period={self.feedback_period} blocks={self.B} "
                 f"unfinished={self.unfinished}",
                 "# k_b m_b i_hat metric_bits"]
        for s, m, d, v in zip(self.starts, self.lengths, self.decoded, self.metrics):
            lines.append(f"{s} {m} {d} {v:.12g}")
        return "\n".join(lines) + "\n"


def parse_transcript(text: str) -> tuple[dict, list[tuple]]:
    header: dict = {}
    rows = []
    for line in text.splitlines():
        if line.startswith("# n="):
            for kv in line[2:].split():
                k, v = kv.split("=")
                header[k] = v if k == "metric" else int(v)
        elif line and not line.startswith("#"):
            s, m, d, v = line.split()
            rows.append((int(s), int(m), int(d), float(v)))
    return header, rows


def _candidates(params: SchemeParams, seed: int, block: int, sent: int) -> list[int]:
    M = params.M
    if params.competitors is None:
        return list(range(M))
    count = min(params.competitors, M - 1)
    chosen = {sent}
    limbs = -(-params.k_bits // 64)
    pos = 0
    while len(chosen) < count + 1:
        words = uint64_words(seed, SELECTION, block, 1, pos, limbs * (count + 4))
        pos += words.size
        for j in range(0, words.size - limbs + 1, limbs):
            v = sum(int(words[j + t]) << (64 * t) for t in range(limbs))
            chosen.add(v & (M - 1))
            if len(chosen) == count + 1:
                break
    return sorted(chosen)


class _Scorer:
    """Cumulative window statistics for a set of candidate codewords."""

    def __init__(self, params: SchemeParams, size: int):
        self.params = params
        if params.continuous:
            self.sxy = np.zeros(size)
            self.sxx = np.zeros(size)
            self.syy = 0.0
        else:
            self.cells = params.ax * params.ay
            self.counts = np.zeros((size, self.cells))

    def scores(self, X: np.ndarray, y: np.ndarray, thr=None) -> tuple[np.ndarray, tuple]:
        """Scores after each symbol of the chunk and the cumulative state.

        With discrete inputs and thresholds ``thr`` given, columns where the
        window's output entropy (an upper bound on every Î) stays below the
        threshold are not scored and come back as -inf.
        """
        p = self.params
        if p.continuous:
            sxy = self.sxy[:, None] + np.cumsum(X * y[None, :], axis=1)
            sxx = self.sxx[:, None] + np.cumsum(X * X, axis=1)
            syy = self.syy + np.cumsum(y * y)
            den = sxx * syy[None, :]
            with np.errstate(invalid="ignore", divide="ignore"):
                r2 = np.where(den > 0, sxy * sxy / np.where(den > 0, den, 1.0), 0.0)
            r2 = np.minimum(r2, 1.0)
            with np.errstate(divide="ignore"):
                s = np.where(r2 >= 1.0, np.inf, -0.5 * np.log1p(-r2) / LN2)
            return s, (sxy, sxx, syy)
        if y.size and (y.min() < 0 or y.max() >= p.ay):
            raise ValueError("channel output outside the declared output alphabet")
        ax, ay = p.ax, p.ay
        codes = X * ay + y[None, :]
        hits = [codes == c for c in range(self.cells)]
        state = (self.counts + np.stack([h.sum(axis=1) for h in hits], axis=-1),)
        ycount = self.counts.reshape(-1, ax, ay)[0].sum(axis=0)
        cols = [ycount[b] + np.cumsum(y == b) for b in range(ay)]
        m = self.counts[0].sum() + np.arange(1, y.size + 1)
        j0 = 0
        if thr is not None:
            hy = (xlogy(m, m) - sum(xlogy(c, c) for c in cols)) / m / LN2
            live = np.flatnonzero(hy + 1e-9 >= thr)
            if live.size == 0:
                return np.full(X.shape, -np.inf), state
            j0 = int(live[0])
        cum = [np.cumsum(h[:, j0:], axis=1) + (self.counts[:, c] + h[:, :j0].sum(axis=1))[:, None]
               for c, h in enumerate(hits)]
        cols = [c[j0:] for c in cols]
        m = m[j0:]
        # the difference-of-sums form of mi_from_counts, unrolled over the cells
        total = sum(xlogy(c, c) for c in cum)
        for a in range(ax):
            r = sum(cum[a * ay + b] for b in range(ay))
            total -= xlogy(r, r)
        for col in cols:
            total -= xlogy(col, col)[None, :]
        total += xlogy(m, m)[None, :]
        s = np.full(X.shape, -np.inf)
        s[:, j0:] = np.maximum(total / m[None, :], 0.0) / LN2
        return s, state

    def advance(self, state: tuple) -> None:
        """Carry the statistics over to the end of the scored chunk."""
        if self.params.continuous:
            sxy, sxx, syy = state
            self.sxy, self.sxx, self.syy = sxy[:, -1], sxx[:, -1], float(syy[-1])
        else:
            self.counts = state[0]


def run_adaptive(params: SchemeParams, channel: Channel, message_bits=None,
                 seed: int = 0, keep_signals: bool = True,
                 forced_input=None) -> Transcript:
    """Send consecutive message blocks over ``channel`` for n symbols.

    ``message_bits`` defaults to a random message drawn from ``seed``.
    ``forced_input`` replaces the sent codeword's symbols with a fixed
    sequence of length n (a diagnostic for adversarially chosen inputs).
    """
    n, K = params.n, params.k_bits
    if message_bits is None:
        message_bits = random_message(seed, (n // 2) * K)
    messages = bits_to_indices(message_bits, K)
    cb = generate_codebook(seed, params.prior, params.M, n)
    if forced_input is not None:
        forced_input = np.asarray(forced_input)
        if forced_input.shape != (n,):
            raise ValueError("forced_input must have length n")

    tr = Transcript(n, K, params.continuous, params.feedback_period)
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    dtype = np.float64 if params.continuous else np.int64
    P = params.feedback_period
    k = 0
    b = 0
    guess = _MIN_CHUNK
    while k < n:
        if b >= len(messages):
            raise ValueError("message too short for the number of blocks sent")
        sent = messages[b]
        cand = _candidates(params, seed, b, sent)
        true_pos = cand.index(sent)
        scorer = _Scorer(params, len(cand))
        start = pos = k
        L = min(max(guess, _MIN_CHUNK), _MAX_CHUNK)
        decided = False
        while pos < n:
            stop = min(n, pos + L)
            X = cb.rows(cand, pos, stop).astype(dtype)
            if forced_input is not None:
                X[true_pos] = forced_input[pos:stop]
            x_sent = X[true_pos]
            y = channel.preview(x_sent)
            m = np.arange(pos - start + 1, stop - start + 1)
            thr = mu_star(m, params)
            s, state = scorer.scores(X, np.asarray(y, dtype=dtype), thr)
            hit = (s >= thr[None, :]) & np.isfinite(thr)[None, :]
            cols = np.flatnonzero(hit.any(axis=0))
            if cols.size:
                j = int(cols[0])
                col = np.where(hit[:, j], s[:, j], -np.inf)
                w = int(np.argmax(col))     # highest score, then lowest index
                end = pos + j + 1
                nxt = min(n, (end - 1) // P * P + P)
                ys_commit = channel.respond(x_sent[:j + 1])
                xs.append(x_sent[:j + 1])
                ys.append(ys_commit)
                if nxt > end:
                    # idle symbols until the next feedback instant
                    x_idle = cb.row(sent, end, nxt).astype(dtype)
                    if forced_input is not None:
                        x_idle = forced_input[end:nxt].astype(dtype)
                    xs.append(x_idle)
                    ys.append(channel.respond(x_idle))
                tr.starts.append(start)
                tr.lengths.append(end - start)
                tr.spans.append(nxt - start)
                tr.sent.append(sent)
                tr.decoded.append(cand[w])
                tr.metrics.append(float(col[w]))
                guess = int(1.25 * (end - start)) + 1
                k = nxt
                decided = True
                break
            xs.append(x_sent)
            ys.append(channel.respond(x_sent))
            scorer.advance(state)
            pos = stop
            L = min(2 * L, _MAX_CHUNK)
        if not decided:
            tr.unfinished = n - start
            k = n
        b += 1
    if keep_signals:
        tr.x = np.concatenate(xs) if xs else np.empty(0, dtype=dtype)
        tr.y = np.concatenate(ys) if ys else np.empty(0, dtype=dtype)
    return tr


def window_score(params: SchemeParams, x, y) -> float:
    """Score of one window, recomputed from scratch."""
    if params.continuous:
        return gaussian_rate(abs(correlation_stats(x, y).rho))
    return empirical_mi_of(x, y, params.ax, params.ay)


def check_pre_termination(tr: Transcript, params: SchemeParams, seed: int = 0) -> None:
    """The sent codeword's score stayed below threshold until each decision.

    Recomputes, from scratch, the score of the sent codeword on each block
    window one symbol short of the decision and checks it against
    ``mu_star``.  Also checks the carried score of the winner.
    """
    if tr.x is None:
        raise ValueError("transcript has no stored signals")
    for s, m, sent, win, metric in zip(tr.starts, tr.lengths, tr.sent,
                                       tr.decoded, tr.metrics):
        xw, yw = tr.x[s:s + m], tr.y[s:s + m]
        if m > 1:
            before = window_score(params, xw[:-1], yw[:-1])
            if before >= mu_star(m - 1, params) and np.isfinite(mu_star(m - 1, params)):
                raise AssertionError(f"block at {s} should have ended earlier")
        if win == sent:
            again = window_score(params, xw, yw)
            if not (np.isinf(again) and np.isinf(metric)) and abs(again - metric) > 1e-9:
                raise AssertionError(f"block at {s}: carried score {metric} != {again}")
            if again < mu_star(m, params):
                raise AssertionError(f"block at {s} ended below threshold")


@dataclass(frozen=True)
class PosthocReport:
    r_act: float
    target: float
    delta: float
    flagged: bool
    statistic: float     # Î(x;y) in bits, or ρ̂


def posthoc_targets(tr: Transcript, params: SchemeParams, delta: float | None = None,
                    rho0: float | None = None) -> PosthocReport:
    """Compare R_act with the rate the realized sequences called for.

    Discrete inputs: target Î(x;y), flagged when R_act < target - delta, with
    delta defaulting to the scheme's loss term.  Gaussian inputs: target
    R_2(ρ̂); with ``T`` set the flag uses the pipeline curve R_LB1(ρ̂) (or
    the capped curve when ``rho0`` is given), otherwise target - delta.
    """
    if tr.x is None:
        raise ValueError("transcript has no stored signals")
    if params.continuous:
        rho = correlation_stats(tr.x, tr.y).rho
        target = gaussian_rate(min(abs(rho), 1.0))
        if params.T is not None and delta is None:
            pipe = bounds.continuous_pipeline(params.n, params.k_bits, params.p_e,
                                              params.p_a, params.T)
            floor = pipe.calibrate(rho0)(abs(rho)) if rho0 else pipe.r_lb1(abs(rho))
            return PosthocReport(tr.r_act, target, target - floor, tr.r_act < floor, rho)
        d = 0.0 if delta is None else delta
        return PosthocReport(tr.r_act, target, d, tr.r_act < target - d, rho)
    mi = empirical_mi_of(tr.x, tr.y, params.ax, params.ay)
    d = bounds.discrete_delta(params.n, params.k_bits, params.ax, params.ay,
                              params.p_a) if delta is None else delta
    return PosthocReport(tr.r_act, mi, d, tr.r_act < mi - d, mi)
