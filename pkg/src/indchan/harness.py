"""Monte-Carlo sweeps, bound verification suites and figure data.

Trial ``t`` of a sweep with master seed ``s`` uses seed ``s ^ t`` for its
codebook, message and channel noise (each in its own seed domain), so a
sweep gives the same rows whatever the worker count or execution order.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import bounds
from .channels import parse_channel
from .codebook import MESSAGE, Prior, uint64_words
from .empirical import (LN2, Partition, correlation_stats, empirical_mi_of,
                        gaussian_rate, mi_from_counts, per_subset_mi,
                        snr_from_rho)
from .fixed_rate import (DECODERS, FixedRateConfig, ensemble_error_probability,
                         sample_candidates)
from .rateless import SchemeParams, check_pre_termination, posthoc_targets, run_adaptive


def parse_prior(text: str) -> Prior:
    """``binary``, ``uniform:A``, ``discrete:p0,p1,...`` or ``gaussian[:P]``."""
    kind, _, arg = text.partition(":")
    if kind == "binary":
        return Prior.uniform(2)
    if kind == "uniform":
        return Prior.uniform(int(arg))
    if kind == "discrete":
        return Prior.discrete([float(v) for v in arg.split(",")])
    if kind == "gaussian":
        return Prior.gaussian(float(arg) if arg else 1.0)
    raise ValueError(f"unknown prior {text!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    scheme: str = "adaptive"          # "adaptive" or "fixed"
    channel: str = "bsc:0.11"
    prior: str = "binary"
    n: int = 1000
    trials: int = 10
    seed: int = 0
    # fixed-rate
    rate: float = 0.3
    decoder: str = "mmi"
    delta: float = 0.0
    competitors: int = 63
    exact: bool = True
    # adaptive
    k_bits: int = 64
    p_e: float = 1e-2
    feedback_period: int = 1
    output_alphabet: int = 0          # 0 means the input alphabet size
    T: float = 0.0                    # 0 means unset
    check_transcripts: bool = True

    def __post_init__(self):
        if self.scheme not in ("adaptive", "fixed"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.trials < 1 or self.n < 2:
            raise ValueError("need trials >= 1 and n >= 2")
        parse_prior(self.prior)
        parse_channel(self.channel)

    def comments(self) -> list[str]:
        return [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentSpec":
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, raw in values.items():
            if key not in kinds:
                raise ValueError(f"unknown experiment key {key!r}")
            default = getattr(cls(), key)
            if isinstance(default, bool):
                out[key] = raw if isinstance(raw, bool) else str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                out[key] = int(raw)
            elif isinstance(default, float):
                out[key] = float(raw)
            else:
                out[key] = str(raw)
        return cls(**out)

    def scheme_params(self) -> SchemeParams:
        prior = parse_prior(self.prior)
        return SchemeParams(n=self.n, k_bits=self.k_bits, p_e=self.p_e, prior=prior,
                            output_alphabet=self.output_alphabet or None,
                            feedback_period=self.feedback_period,
                            competitors=self.competitors if self.competitors >= 0 else None,
                            T=self.T or None)


def trial_seed(master: int, index: int) -> int:
    return (master ^ index) & ((1 << 64) - 1)


def _fixed_trial(spec: ExperimentSpec, index: int) -> dict:
    seed = trial_seed(spec.seed, index)
    cfg = FixedRateConfig(spec.n, spec.rate, parse_prior(spec.prior), seed)
    M = cfg.M
    w = int.from_bytes(np.asarray(uint64_words(seed, MESSAGE, 1, 0, 0, 4)).tobytes(), "little") % M
    x = cfg.codebook.row(w)
    y = parse_channel(spec.channel, seed=seed).respond(x)
    cand = sample_candidates(cfg, w, spec.competitors, stream=index)
    res = DECODERS[spec.decoder](cfg, y, cand)
    if spec.decoder == "mmi":
        true_metric = empirical_mi_of(x, y, cfg.prior.size)
    elif spec.decoder == "maxcorr":
        true_metric = gaussian_rate(min(abs(correlation_stats(x, y).rho), 1.0))
    else:
        true_metric = abs(float(np.asarray(x, float) @ np.asarray(y, float)))
    row = {"trial": index, "seed": seed, "true_metric": true_metric,
           "error": int(res.w_hat != w),
           "qualifies": int(true_metric > spec.rate + spec.delta)}
    if spec.exact:
        row["exact_error"] = ensemble_error_probability(cfg, spec.decoder, x, y)
    return row


def _adaptive_trial(spec: ExperimentSpec, index: int) -> dict:
    seed = trial_seed(spec.seed, index)
    params = spec.scheme_params()
    ch = parse_channel(spec.channel, seed=seed)
    tr = run_adaptive(params, ch, seed=seed)
    if spec.check_transcripts:
        tr.check_accounting()
        check_pre_termination(tr, params)
    rep = posthoc_targets(tr, params)
    row = {"trial": index, "seed": seed, "blocks": tr.B, "r_act": tr.r_act,
           "block_errors": tr.block_errors, "target": rep.target,
           "flagged": int(rep.flagged), "unfinished": tr.unfinished}
    if not params.continuous and params.ax == 2 and tr.y.size:
        row["eps_hat"] = float(np.mean(tr.x != tr.y))
    if params.continuous:
        row["rho_hat"] = rep.statistic
    return row


def run_trial(spec: ExperimentSpec, index: int) -> dict:
    return (_fixed_trial if spec.scheme == "fixed" else _adaptive_trial)(spec, index)


def _run_chunk(args):
    spec, indices = args
    return [run_trial(spec, i) for i in indices]


def _mean_ci(values) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan, math.nan
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return float(v.mean()), sd, 1.96 * sd / math.sqrt(v.size)


@dataclass
class SweepResult:
    spec: ExperimentSpec
    rows: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows if name in r], dtype=float)

    def summary(self) -> dict:
        out: dict = {"trials": len(self.rows)}
        if self.spec.scheme == "fixed":
            q = self.column("qualifies").astype(bool)
            err = self.column("error")
            out["qualifying"] = int(q.sum())
            out["error_rate"] = float(err.mean())
            out["conditional_error_rate"] = float(err[q].mean()) if q.any() else math.nan
            if self.spec.exact:
                ex = self.column("exact_error")
                out["exact_conditional_error"] = float(ex[q].mean()) if q.any() else math.nan
            return out
        mean, sd, ci = _mean_ci(self.column("r_act"))
        out.update(r_act_mean=mean, r_act_sd=sd, r_act_ci95=ci)
        blocks = self.column("blocks").sum()
        out["blocks"] = int(blocks)
        out["block_error_rate"] = float(self.column("block_errors").sum() / blocks) if blocks else 0.0
        out["flag_rate"] = float(self.column("flagged").mean())
        out["target_mean"] = float(self.column("target").mean())
        return out


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> SweepResult:
    indices = list(range(spec.trials))
    if workers <= 1:
        rows = [run_trial(spec, i) for i in indices]
    else:
        chunks = [indices[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(itertools.chain.from_iterable(pool.map(_run_chunk, [(spec, c) for c in chunks])))
        rows.sort(key=lambda r: r["trial"])
    return SweepResult(spec, rows)


# ------------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_csv(rows: list[dict], fh, comments=()) -> None:
    """CSV with a header row, 12 significant digits and ``# `` comment lines."""
    for c in comments:
        fh.write(f"# {c}\n")
    if not rows:
        return
    cols = list(rows[0].keys())
    for r in rows[1:]:
        cols += [k for k in r if k not in cols]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in cols])


def csv_text(rows: list[dict], comments=()) -> str:
    buf = io.StringIO()
    write_csv(rows, buf, comments)
    return buf.getvalue()


# --------------------------------------------------------- bound suites


@dataclass
class BoundReport:
    suite: str
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["ok"] for r in self.rows)

    @property
    def min_margin(self) -> float:
        return min(r["margin"] for r in self.rows)


def binary_sequences(n: int) -> np.ndarray:
    """All 2^n binary sequences as rows, in counting order."""
    if n > 22:
        raise ValueError("exhaustive enumeration is limited to n <= 22")
    k = np.arange(1 << n, dtype=np.int64)
    return ((k[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int64)


def _mi_rows(X: np.ndarray, y: np.ndarray, ax: int, ay: int) -> np.ndarray:
    codes = X * ay + y[None, :]
    counts = np.stack([(codes == c).sum(axis=1) for c in range(ax * ay)], axis=-1)
    return mi_from_counts(counts.reshape(-1, ax, ay))


def exact_mi_tail(y, ts, n: int) -> np.ndarray:
    """P(Î(X; y) >= t) for X uniform on {0,1}^n, by listing every X."""
    X = binary_sequences(n)
    mi = _mi_rows(X, np.asarray(y, dtype=np.int64), 2, 2)
    return np.array([np.count_nonzero(mi >= t - 1e-12) / X.shape[0] for t in ts])


def verify_lemma1(n: int = 12, ys: int = 5, seed: int = 0, ts=None) -> BoundReport:
    ts = np.round(np.arange(1, 11) * 0.1, 10) if ts is None else np.asarray(ts)
    rep = BoundReport("lemma1")
    rng = np.random.default_rng(seed)
    for j in range(ys):
        y = rng.integers(0, 2, n)
        tails = exact_mi_tail(y, ts, n)
        for t, p in zip(ts, tails):
            bnd = bounds.lemma1_bound(float(t), n, 2, 2)
            rep.rows.append({"y": j, "t": float(t), "measured": float(p), "bound": bnd,
                             "margin": bnd - float(p), "ok": bool(p <= bnd)})
    return rep


def verify_lemma4(ns=(3, 11, 101, 1001), ts=None, mc_trials: int = 0, mc_point=(0.3, 101),
                  seed: int = 0) -> BoundReport:
    ts = np.round(np.arange(1, 20) * 0.05, 10) if ts is None else np.asarray(ts)
    rep = BoundReport("lemma4")
    for n in ns:
        for t in ts:
            lo = bounds.log_rho_tail_oracle(float(t), n) / LN2
            lb = bounds.log2_lemma4_bound(float(t), n)
            lb = min(lb, 0.0)
            # margin in log2 units, so the check survives far below float range
            rep.rows.append({"n": n, "t": float(t), "log2_oracle": lo, "log2_bound": lb,
                             "margin": lb - lo, "ok": bool(lb > lo)})
    if mc_trials:
        t, n = mc_point
        hits = correlation_tail_mc(t, n, mc_trials, seed)
        p = bounds.rho_tail_oracle(t, n)
        sigma = math.sqrt(p * (1 - p) / mc_trials)
        rep.rows.append({"n": n, "t": t, "mc": hits, "oracle": p, "sigma": sigma,
                         "margin": 3 * sigma - abs(hits - p),
                         "ok": bool(abs(hits - p) <= 3 * sigma)})
    return rep


def correlation_tail_mc(t: float, n: int, trials: int, seed: int = 0,
                        chunk: int = 50_000) -> float:
    """Frequency of |ρ̂(X, y)| >= t over Gaussian X against a fixed y."""
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(n) + 0.5    # any fixed nonzero y will do
    yn = y / np.linalg.norm(y)
    hits = 0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        X = rng.standard_normal((k, n))
        r = np.abs(X @ yn) / np.linalg.norm(X, axis=1)
        hits += int(np.count_nonzero(r >= t))
        done += k
    return hits / trials


def correlation_deviation_sup(x, part: Partition) -> float:
    """max over y of ρ̂² - Σ λ_i ρ̂_i²: Σ_i max(|x_i|²/|x|² - λ_i, 0)."""
    x = np.asarray(x, dtype=float)
    share = np.bincount(part.labels, weights=x * x, minlength=part.p) / float(x @ x)
    return float(np.maximum(share - part.weights, 0.0).sum())


def worst_output(x, part: Partition) -> np.ndarray:
    """The y attaining the supremum: x on the over-weighted subsets, 0 elsewhere."""
    x = np.asarray(x, dtype=float)
    share = np.bincount(part.labels, weights=x * x, minlength=part.p) / float(x @ x)
    keep = (share - part.weights) > 0
    return np.where(keep[part.labels], x, 0.0)


def correlation_deviation(x, y, part: Partition) -> float:
    """ρ̂² - Σ λ_i ρ̂_i² for a given y."""
    rho2 = correlation_stats(x, y).rho ** 2
    lam = part.weights
    sub = 0.0
    for i in range(part.p):
        m = part.labels == i
        sub += lam[i] * correlation_stats(x[m], y[m]).rho ** 2
    return rho2 - sub


def verify_lemma6(n: int = 400, p: int = 2, deltas=(0.05, 0.1, 1 / 7), trials: int = 20000,
                  seed: int = 0, p_max: int | None = None) -> BoundReport:
    rep = BoundReport("lemma6")
    rng = np.random.default_rng(seed)
    part = Partition.contiguous(n, p)
    X = rng.standard_normal((trials, n))
    share = np.stack([(X[:, part.labels == i] ** 2).sum(axis=1) for i in range(p)], axis=1)
    share /= share.sum(axis=1, keepdims=True)
    dev = np.maximum(share - part.weights[None, :], 0.0).sum(axis=1)
    for d in deltas:
        bnd = bounds.lemma6_bound(float(d), n, p, p_max)
        freq = float(np.mean(dev > d))
        sigma = math.sqrt(max(bnd * (1 - bnd), 1e-300) / trials)
        rep.rows.append({"n": n, "p": p, "delta": float(d), "measured": freq, "bound": bnd,
                         "margin": bnd + 3 * sigma - freq, "ok": bool(freq <= bnd + 3 * sigma)})
    return rep


def verify_lemma7(a=(1.0, -0.5), lam=(0.5, 0.5), A: float = 2.0, n: int = 200,
                  trials: int = 20000, seed: int = 0) -> BoundReport:
    rep = BoundReport("lemma7")
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    abar = float(lam @ a)
    bnd = bounds.lemma7_bound(a, lam, A, abar, n)
    rng = np.random.default_rng(seed)
    sizes = np.round(lam * n).astype(int)
    sizes[-1] = n - sizes[:-1].sum()
    # |x_i|^2 for a standard Gaussian x is chi-square with n_i degrees of freedom
    chi = np.stack([rng.chisquare(s, trials) for s in sizes], axis=1)
    freq = float(np.mean(chi @ a <= 0))
    sigma = math.sqrt(max(bnd * (1 - bnd), 1e-300) / trials)
    rep.rows.append({"n": n, "abar": abar, "A": A, "measured": freq, "bound": bnd,
                     "margin": bnd + 3 * sigma - freq, "ok": bool(freq <= bnd + 3 * sigma)})
    return rep


def verify_lemma3(n: int = 14, p: int = 2, deltas=(0.2, 0.4, 0.6, 0.8)) -> BoundReport:
    """Exact P(sup_y deviation > Δ) for uniform binary x, by enumeration.

    With |Y| >= p the supremum over y of Î(x;y) - Î(x;y|u) is Î(x;u)
    (take y = u), so the event depends on x alone.
    """
    rep = BoundReport("lemma3")
    X = binary_sequences(n)
    u = Partition.contiguous(n, p).labels
    sup = _mi_rows(X, u, 2, p)
    for d in deltas:
        freq = float(np.mean(sup > d + 1e-12))
        bnd = bounds.lemma3_bound(float(d), n, 2, p)
        rep.rows.append({"n": n, "p": p, "delta": float(d), "measured": freq, "bound": bnd,
                         "margin": bnd - freq, "ok": bool(freq <= bnd)})
    return rep


SUITES = {"lemma1": verify_lemma1, "lemma3": verify_lemma3, "lemma4": verify_lemma4,
          "lemma6": verify_lemma6, "lemma7": verify_lemma7}


def verify_bounds(suite: str, **kwargs) -> BoundReport:
    try:
        fn = SUITES[suite]
    except KeyError:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}") from None
    return fn(**kwargs)


# ------------------------------------------------------------ convexity


@dataclass
class ConvexityReport:
    kind: str
    n: int
    trials: int
    max_excess: float            # max of deviation - bound; <= 0 means it held
    violations: int
    mean_deviation: float
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def convexity_check(n: int = 200, p: int | tuple = (2, 3, 4), prior: str = "binary",
                    trials: int = 1000, seed: int = 0, tol: float = 1e-12) -> ConvexityReport:
    """Random (x, y, partition) instances against the deviation bounds.

    Discrete: checks Î(x;y) - Σλ_i Î_i <= Î(x;u) on every instance.
    Gaussian: checks ρ̂² - Σλ_i ρ̂_i² <= Σ max(|x_i|²/|x|² - λ_i, 0) on random
    and on worst-case outputs, the latter with equality.
    """
    ps = (p,) if isinstance(p, int) else tuple(p)
    pr = parse_prior(prior)
    rng = np.random.default_rng(seed)
    devs, excess = [], []
    rows = []
    for t in range(trials):
        pp = ps[t % len(ps)]
        labels = rng.integers(0, pp, n)
        labels[:pp] = np.arange(pp)        # every subset nonempty
        part = Partition(labels, pp)
        if pr.continuous:
            x = rng.standard_normal(n) * math.sqrt(pr.power)
            y = x * rng.uniform(-1, 1) + rng.standard_normal(n) * rng.uniform(0.1, 2)
            cap = correlation_deviation_sup(x, part)
            for yy, tight in ((y, False), (worst_output(x, part), True)):
                d = correlation_deviation(x, yy, part)
                devs.append(d)
                excess.append(d - cap)
                if tight and abs(d - cap) > 1e-9:
                    excess[-1] = abs(d - cap)   # equality must hold
        else:
            ax = pr.size
            x = rng.choice(ax, size=n, p=pr.probs)
            ay = int(rng.integers(2, 4))
            y = rng.integers(0, ay, n) if t % 2 else (x + rng.integers(0, 2, n)) % ay
            d = empirical_mi_of(x, y, ax, ay) - float(part.weights @ per_subset_mi(x, y, part, ax, ay))
            cap = empirical_mi_of(x, labels, ax, pp)
            devs.append(d)
            excess.append(d - cap)
        rows.append({"trial": t, "p": pp, "deviation": devs[-1], "excess": excess[-1]})
    ex = np.asarray(excess)
    return ConvexityReport("gaussian" if pr.continuous else "discrete", n, trials,
                           float(ex.max()), int(np.count_nonzero(ex > tol)),
                           float(np.mean(devs)), rows)


def step_sequence_deviation(n: int) -> float:
    """Deviation for x = 0^{n/2} 1^{n/2}, y = x, split at n/2 (one full bit)."""
    x = np.repeat([0, 1], [n // 2, n - n // 2])
    part = Partition.contiguous(n, 2)
    return empirical_mi_of(x, x, 2, 2) - float(part.weights @ per_subset_mi(x, x, part, 2, 2))


# --------------------------------------------------------------- figures


TABLE_SETS = {
    1: dict(n=1e8, k_bits=1e6, p_e=1e-3, p_a=1e-3, T=2.5e5, rho0=0.9),
    2: dict(n=1e20, k_bits=1e17, p_e=1e-3, p_a=1e-3, T=7.5e15, rho0=0.99998),
}


def figure_data(which: str, parameter_set: int = 1, points: int = 201) -> list[dict]:
    """Rows behind the comparison plots.

    ``continuous_lb``: R_2, R_LB1 and the capped curve against ρ for one of
    the two large-n parameter sets.  ``bsc_compare``: capacity and the
    Gaussian-input rate of the BSC against ε.
    """
    if which == "continuous_lb":
        cfg = dict(TABLE_SETS[parameter_set])
        rho0 = cfg.pop("rho0")
        pipe = bounds.continuous_pipeline(**cfg)
        curve = pipe.calibrate(rho0)
        rho = np.linspace(0.0, 0.99999, points)
        r2 = gaussian_rate(rho)
        lb1 = pipe.r_lb1(rho)
        lb2 = curve(rho)
        snr = snr_from_rho(rho)
        return [{"rho": float(r), "snr_eff": float(q), "R2": float(a), "R_LB1": float(b),
                 "R_LB2": float(c)}
                for r, q, a, b, c in zip(rho, snr, r2, lb1, lb2)]
    if which == "bsc_compare":
        eps = np.linspace(0.0, 0.5, points)
        C, R = bsc_grid(eps)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(C > 0, R / np.where(C > 0, C, 1.0), math.nan)
        return [{"eps": float(e), "C": float(c), "R": float(r), "ratio": float(q)}
                for e, c, r, q in zip(eps, C, R, ratio)]
    raise ValueError(f"unknown figure {which!r}; choose continuous_lb or bsc_compare")


def bsc_grid(eps):
    return bounds.bsc_comparison(eps)


def table_values(parameter_set: int) -> dict:
    cfg = dict(TABLE_SETS[parameter_set])
    rho0 = cfg.pop("rho0")
    pipe = bounds.continuous_pipeline(**cfg)
    curve = pipe.calibrate(rho0)
    out = {k: v for k, v in asdict(pipe).items()}
    out.update(rho0=rho0, eps=curve.eps, rbar=curve.rbar)
    return out
