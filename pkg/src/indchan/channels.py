"""Causal channel plug-ins.

A channel maps an input chunk to an output chunk.  Output ``y_k`` may depend
on ``x_1..x_k`` and ``y_1..y_{k-1}`` but never on later inputs.  All noise
is drawn from counter-based streams indexed by absolute time, so
``preview`` followed by ``respond`` on any prefix reproduces the same
outputs; the rateless runner relies on that to look ahead.

Channels are also constructible from short strings such as ``"bsc:0.11"``,
``"awgn:1.0"`` or ``"nonlinear:clip:2.5:n=1.0"``; see :func:`parse_channel`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .codebook import CHANNEL, normals, uniforms


class Channel:
    """Base class.  Subclasses implement ``_outputs(xs, k0, state)``."""

    kind = "channel"
    input_kind = "real"          # "binary", "discrete" or "real"
    output_alphabet: int | None = None

    def __init__(self, seed: int = 0, record: bool = False):
        self.seed = int(seed)
        self.record = record
        self.reset()

    def reset(self) -> None:
        self.k = 0
        self._state = self._initial_state()
        self._xs: list[np.ndarray] = []
        self._ys: list[np.ndarray] = []

    def _initial_state(self):
        return None

    def _outputs(self, xs: np.ndarray, k0: int, state):
        raise NotImplementedError

    def _u(self, k0: int, count: int, purpose: int = 0) -> np.ndarray:
        return uniforms(self.seed, CHANNEL, 0, purpose, k0, count)

    def _z(self, k0: int, count: int, purpose: int = 1) -> np.ndarray:
        return normals(self.seed, CHANNEL, 0, purpose, k0, count)

    def _check(self, xs) -> np.ndarray:
        xs = np.asarray(xs)
        if xs.ndim != 1:
            raise ValueError("input chunk must be one-dimensional")
        if self.input_kind == "binary":
            if xs.size and not np.all((xs == 0) | (xs == 1)):
                raise ValueError(f"{self.kind} expects binary input")
            return xs.astype(np.int64)
        if self.input_kind == "discrete":
            return xs.astype(np.int64)
        return xs.astype(np.float64)

    def preview(self, xs) -> np.ndarray:
        """Outputs for ``xs`` sent next, without advancing the channel."""
        xs = self._check(xs)
        ys, _ = self._outputs(xs, self.k, self._state)
        return ys

    def respond(self, xs) -> np.ndarray:
        xs = self._check(xs)
        ys, self._state = self._outputs(xs, self.k, self._state)
        self.k += xs.size
        if self.record:
            self._xs.append(xs)
            self._ys.append(ys)
        return ys

    def step(self, x):
        return self.respond(np.asarray([x]))[0]

    def history(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.record:
            raise RuntimeError("channel was created with record=False")
        if not self._xs:
            return np.empty(0), np.empty(0)
        return np.concatenate(self._xs), np.concatenate(self._ys)

    def describe(self) -> str:
        return self.kind


class BSC(Channel):
    kind = "bsc"
    input_kind = "binary"
    output_alphabet = 2

    def __init__(self, eps: float, seed: int = 0, record: bool = False):
        if not 0.0 <= eps <= 1.0:
            raise ValueError("crossover probability must lie in [0, 1]")
        self.eps = float(eps)
        super().__init__(seed, record)

    def _outputs(self, xs, k0, state):
        return xs ^ (self._u(k0, xs.size) < self.eps).astype(np.int64), state

    def describe(self):
        return f"bsc:{self.eps:g}"


class AWGN(Channel):
    kind = "awgn"

    def __init__(self, noise_power: float, seed: int = 0, record: bool = False):
        if noise_power < 0:
            raise ValueError("noise power must be nonnegative")
        self.noise_power = float(noise_power)
        super().__init__(seed, record)

    def _outputs(self, xs, k0, state):
        return xs + np.sqrt(self.noise_power) * self._z(k0, xs.size), state

    def describe(self):
        return f"awgn:{self.noise_power:g}"


class Constant(Channel):
    """Output ignores the input entirely."""

    kind = "constant"

    def __init__(self, value=0, seed: int = 0, record: bool = False):
        self.value = value
        if float(value).is_integer() and value >= 0:
            self.input_kind = "discrete"
            self.output_alphabet = max(2, int(value) + 1)
            self.value = int(value)
        super().__init__(seed, record)

    def _outputs(self, xs, k0, state):
        dtype = np.int64 if self.output_alphabet else np.float64
        return np.full(xs.size, self.value, dtype=dtype), state

    def describe(self):
        return f"constant:{self.value:g}"


class GainAWGN(Channel):
    """y = alpha x + beta v with v ~ N(0, N)."""

    kind = "gain_awgn"

    def __init__(self, alpha: float, beta: float, noise_power: float,
                 seed: int = 0, record: bool = False):
        self.alpha, self.beta, self.noise_power = float(alpha), float(beta), float(noise_power)
        super().__init__(seed, record)

    def _outputs(self, xs, k0, state):
        v = np.sqrt(self.noise_power) * self._z(k0, xs.size)
        return self.alpha * xs + self.beta * v, state

    def describe(self):
        return f"gain_awgn:{self.alpha:g}:{self.beta:g}:n={self.noise_power:g}"


@dataclass(frozen=True)
class Nonlinearity:
    """A memoryless map with the breakpoints where it is not smooth."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple = ()

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))


def clip(c: float = 1.0) -> Nonlinearity:
    c = float(c)
    return Nonlinearity(f"clip:{c:g}", lambda x: np.clip(x, -c, c), (-c, c))


def tabulated(xp, fp) -> Nonlinearity:
    """Piecewise-linear map through ``(xp, fp)``, constant outside."""
    xp = np.asarray(xp, dtype=float)
    fp = np.asarray(fp, dtype=float)
    if xp.ndim != 1 or xp.shape != fp.shape or np.any(np.diff(xp) <= 0):
        raise ValueError("tabulated map needs increasing knots of matching length")
    return Nonlinearity("tabulated", lambda x: np.interp(x, xp, fp), tuple(xp))


NONLINEARITIES: dict[str, Callable[..., Nonlinearity]] = {
    "identity": lambda: Nonlinearity("identity", lambda x: x),
    "square": lambda: Nonlinearity("square", lambda x: x * x),
    "zero": lambda: Nonlinearity("zero", np.zeros_like),
    "sign": lambda: Nonlinearity("sign", lambda x: np.where(x >= 0, 1.0, -1.0), (0.0,)),
    "clip": clip,
}


def nonlinearity(name: str, *params) -> Nonlinearity:
    try:
        return NONLINEARITIES[name](*params)
    except KeyError:
        raise ValueError(f"unknown nonlinearity {name!r}") from None


class Nonlinear(Channel):
    """y = f(x) + v with v ~ N(0, N)."""

    kind = "nonlinear"

    def __init__(self, f: Nonlinearity | str, noise_power: float, seed: int = 0,
                 record: bool = False):
        self.f = nonlinearity(f) if isinstance(f, str) else f
        self.noise_power = float(noise_power)
        super().__init__(seed, record)

    def _outputs(self, xs, k0, state):
        return self.f(xs) + np.sqrt(self.noise_power) * self._z(k0, xs.size), state

    def describe(self):
        return f"nonlinear:{self.f.name}:n={self.noise_power:g}"


class Delay(Channel):
    """y_k = x_{k-d}; the first d outputs are ``fill``."""

    kind = "delay"
    input_kind = "discrete"

    def __init__(self, d: int, fill=0, real: bool = False, seed: int = 0,
                 record: bool = False):
        if d < 0:
            raise ValueError("delay must be nonnegative")
        self.d = int(d)
        self.fill = fill
        if real:
            self.input_kind = "real"
        super().__init__(seed, record)

    def _initial_state(self):
        dtype = np.float64 if self.input_kind == "real" else np.int64
        return np.full(self.d, self.fill, dtype=dtype)

    def _outputs(self, xs, k0, state):
        buf = np.concatenate([state, xs])
        return buf[:xs.size], buf[xs.size:]

    def describe(self):
        return f"delay:{self.d}"


class SlowFading(Channel):
    """y_k = h_k x_k + v_k with Gauss-Markov gain h_k = a h_{k-1} + sqrt(1-a^2) w_k."""

    kind = "fading"

    def __init__(self, a: float, noise_power: float, seed: int = 0, record: bool = False):
        if not 0.0 <= a < 1.0:
            raise ValueError("fading memory must lie in [0, 1)")
        self.a, self.noise_power = float(a), float(noise_power)
        super().__init__(seed, record)

    def _initial_state(self):
        # stationary start
        return float(normals(self.seed, CHANNEL, 1, 0, 0, 1)[0])

    def _outputs(self, xs, k0, state):
        w = normals(self.seed, CHANNEL, 1, 1, k0, xs.size)
        if xs.size == 0:
            return xs.copy(), state
        h, _ = lfilter([np.sqrt(1 - self.a ** 2)], [1.0, -self.a], w, zi=[self.a * state])
        ys = h * xs + np.sqrt(self.noise_power) * self._z(k0, xs.size)
        return ys, float(h[-1])

    def describe(self):
        return f"fading:{self.a:g}:n={self.noise_power:g}"


class ModuloAdditive(Channel):
    """y_k = x_k + e_k mod q with a fixed, cyclically repeated error sequence."""

    kind = "modulo"
    input_kind = "discrete"

    def __init__(self, q: int, errors, seed: int = 0, record: bool = False):
        self.q = int(q)
        self.errors = np.asarray(errors, dtype=np.int64) % self.q
        if self.errors.size == 0:
            raise ValueError("error sequence must be nonempty")
        self.output_alphabet = self.q
        super().__init__(seed, record)

    def _outputs(self, xs, k0, state):
        e = self.errors[(k0 + np.arange(xs.size)) % self.errors.size]
        return (xs + e) % self.q, state

    def describe(self):
        return f"modulo:{self.q}:" + ",".join(str(int(v)) for v in self.errors)


class SignBSC(Channel):
    """Real input is sign-mapped to ±1, then flipped with probability eps."""

    kind = "signbsc"

    def __init__(self, eps: float, seed: int = 0, record: bool = False):
        self.eps = float(eps)
        super().__init__(seed, record)

    def _outputs(self, xs, k0, state):
        flip = self._u(k0, xs.size) < self.eps
        return np.where(flip, -1.0, 1.0) * sign_adaptation(xs), state

    def describe(self):
        return f"signbsc:{self.eps:g}"


def sign_adaptation(x) -> np.ndarray:
    """Map x >= 0 to +1 and x < 0 to -1."""
    return np.where(np.asarray(x, dtype=float) >= 0, 1.0, -1.0)


# adversary policies fold over the past; state is an immutable tuple so that
# previews never disturb the committed state

class BinaryPolicy:
    name = "policy"

    def start(self):
        return ()

    def decide(self, state, k: int) -> int:
        raise NotImplementedError

    def update(self, state, x: int, y: int):
        return state


class GreedyAntiCorrelation(BinaryPolicy):
    """Flip whenever the past agreement count exceeds the disagreement count.

    This drives the running correlation of the ±1-mapped sequences toward
    zero.  With ``budget`` set, flips are also capped at ``budget * k``.
    """

    name = "greedy"

    def __init__(self, budget: float | None = None):
        self.budget = budget

    def start(self):
        return (0, 0)   # agreements minus disagreements, flips

    def decide(self, state, k):
        lead, flips = state
        if lead <= 0:
            return 0
        if self.budget is not None and flips + 1 > self.budget * (k + 1):
            return 0
        return 1

    def update(self, state, x, y):
        lead, flips = state
        return (lead + (1 if x == y else -1), flips + (x != y))


class PeriodicErrors(BinaryPolicy):
    name = "periodic"

    def __init__(self, pattern=(0, 1)):
        self.pattern = tuple(int(v) for v in pattern)

    def decide(self, state, k):
        return self.pattern[k % len(self.pattern)]


class ReactiveBurst(BinaryPolicy):
    """After ``run`` consecutive clean symbols, inject ``burst`` errors."""

    name = "burst"

    def __init__(self, run: int = 16, burst: int = 4):
        self.run, self.burst = int(run), int(burst)

    def start(self):
        return (0, 0)   # current clean run, errors left in burst

    def decide(self, state, k):
        clean, left = state
        return 1 if left > 0 or clean >= self.run else 0

    def update(self, state, x, y):
        clean, left = state
        if x != y:
            left = self.burst - 1 if left == 0 else left - 1
            return (0, left)
        return (clean + 1, 0)


class FunctionPolicy(BinaryPolicy):
    """Wrap ``f(x_past, y_past) -> e`` (quadratic time; for small runs)."""

    name = "function"

    def __init__(self, f):
        self.f = f

    def decide(self, state, k):
        xp = np.asarray([s[0] for s in state], dtype=np.int64)
        yp = np.asarray([s[1] for s in state], dtype=np.int64)
        return int(self.f(xp, yp))

    def update(self, state, x, y):
        return state + ((x, y),)


POLICIES = {"greedy": GreedyAntiCorrelation, "periodic": PeriodicErrors,
            "burst": ReactiveBurst}


class AdversarialBinary(Channel):
    """y_k = x_k xor e_k with e_k chosen from the strict past."""

    kind = "adversarial"
    input_kind = "binary"
    output_alphabet = 2

    def __init__(self, policy: BinaryPolicy | None = None, seed: int = 0,
                 record: bool = False):
        self.policy = policy if policy is not None else GreedyAntiCorrelation()
        super().__init__(seed, record)

    def _initial_state(self):
        return self.policy.start()

    def _outputs(self, xs, k0, state):
        ys = np.empty_like(xs)
        pol = self.policy
        for j, x in enumerate(xs.tolist()):
            y = x ^ pol.decide(state, k0 + j)
            ys[j] = y
            state = pol.update(state, x, y)
        return ys, state

    def describe(self):
        return f"adversarial:{self.policy.name}"


class BudgetStatePolicy:
    """Pick state ``bad`` while its share of past uses is below ``budget``."""

    def __init__(self, bad: int = 1, good: int = 0, budget: float = 0.5):
        self.bad, self.good, self.budget = int(bad), int(good), float(budget)

    def start(self):
        return 0

    def decide(self, state, k):
        return self.bad if state + 1 <= self.budget * (k + 1) else self.good

    def update(self, state, s, x, y):
        return state + (s == self.bad)


class AdversarialState(Channel):
    """y_k ~ W_{s_k}(. | x_k) with the state s_k chosen from the strict past."""

    kind = "adversarial_state"
    input_kind = "discrete"

    def __init__(self, W, policy=None, seed: int = 0, record: bool = False):
        W = np.asarray(W, dtype=float)
        if W.ndim != 3 or not np.allclose(W.sum(axis=2), 1.0) or np.any(W < 0):
            raise ValueError("W must have shape (states, |X|, |Y|) with stochastic rows")
        self.W = W
        self._cdf = np.cumsum(W, axis=2)
        self._cdf[..., -1] = 1.0
        self.output_alphabet = W.shape[2]
        self.policy = policy if policy is not None else BudgetStatePolicy()
        super().__init__(seed, record)

    def _initial_state(self):
        return self.policy.start()

    def _outputs(self, xs, k0, state):
        u = self._u(k0, xs.size)
        ys = np.empty_like(xs)
        pol = self.policy
        for j, x in enumerate(xs.tolist()):
            s = pol.decide(state, k0 + j)
            y = int(np.searchsorted(self._cdf[s, x], u[j], side="right"))
            ys[j] = y
            state = pol.update(state, s, x, y)
        return ys, state

    def describe(self):
        return f"adversarial_state:{self.W.shape[0]}"


# ---------------------------------------------------------------- spec strings


class ChannelSpecError(ValueError):
    """Malformed channel string; ``position`` is the offending character offset."""

    def __init__(self, message: str, text: str, position: int):
        self.message, self.text, self.position = message, text, position
        super().__init__(f"{message} at position {position}\n  {text}\n  {' ' * position}^")


def _fields(text: str):
    pos = 0
    for part in text.split(":"):
        yield part, pos
        pos += len(part) + 1


def _number(tok: str, pos: int, text: str, kind=float):
    try:
        return kind(tok)
    except ValueError:
        what = "an integer" if kind is int else "a number"
        raise ChannelSpecError(f"expected {what}, got {tok!r}", text, pos) from None


# kind -> ordered (name, type, default); a default of ... means required
_SIGNATURES = {
    "bsc": [("eps", float, ...)],
    "awgn": [("n", float, ...)],
    "constant": [("value", float, 0.0)],
    "gain_awgn": [("alpha", float, ...), ("beta", float, ...), ("n", float, ...)],
    "delay": [("d", int, ...)],
    "fading": [("a", float, ...), ("n", float, ...)],
    "modulo": [("q", int, ...), ("errors", "intlist", ...)],
    "signbsc": [("eps", float, ...)],
    "adversarial_state": [("eps0", float, ...), ("eps1", float, ...), ("budget", float, 0.5)],
    "nonlinear": [("f", str, ...), ("n", float, ...)],
    "adversarial": [("policy", str, "greedy"), ("budget", float, None),
                    ("pattern", str, "01"), ("run", int, 16), ("burst", int, 4)],
}


def parse_channel(text: str, seed: int = 0, record: bool = False) -> Channel:
    """Build a channel from a string like ``"nonlinear:clip:2.5:n=1.0"``.

    Fields are separated by ``:``; each is positional or ``key=value``.
    Errors raise :class:`ChannelSpecError` carrying the exact offset.
    """
    fields = list(_fields(text.strip()))
    text = text.strip()
    kind, kpos = fields[0]
    if kind not in _SIGNATURES:
        raise ChannelSpecError(f"unknown channel kind {kind!r}", text, kpos)
    sig = _SIGNATURES[kind]
    names = [s[0] for s in sig]
    values: dict = {}
    extra: list = []
    slot = 0
    rest = fields[1:]
    if kind == "nonlinear" and rest:
        # the map name may carry its own parameter, e.g. clip:2.5
        fname, fpos = rest[0]
        if fname not in NONLINEARITIES:
            raise ChannelSpecError(f"unknown nonlinearity {fname!r}", text, fpos)
        rest = rest[1:]
        if fname == "clip" and rest and "=" not in rest[0][0]:
            extra.append(_number(rest[0][0], rest[0][1], text))
            rest = rest[1:]
        values["f"] = nonlinearity(fname, *extra)
        slot = 1
    for tok, pos in rest:
        if tok == "":
            raise ChannelSpecError("empty field", text, pos)
        if "=" in tok:
            key, val = tok.split("=", 1)
            if key not in names:
                raise ChannelSpecError(f"unknown parameter {key!r} for {kind}", text, pos)
            idx = names.index(key)
            vpos = pos + len(key) + 1
        else:
            while slot < len(sig) and sig[slot][0] in values:
                slot += 1
            if slot >= len(sig):
                raise ChannelSpecError(f"too many fields for {kind}", text, pos)
            idx, val, vpos = slot, tok, pos
        name, typ, _ = sig[idx]
        if name in values:
            raise ChannelSpecError(f"parameter {name!r} given twice", text, pos)
        if typ is str:
            values[name] = val
        elif typ == "intlist":
            values[name] = [_number(v, vpos, text, int) for v in val.split(",")]
        else:
            values[name] = _number(val, vpos, text, typ)
    for name, _, default in sig:
        if name not in values:
            if default is ...:
                raise ChannelSpecError(f"missing parameter {name!r} for {kind}", text, len(text))
            values[name] = default
    try:
        return _build(kind, values, seed, record)
    except ChannelSpecError:
        raise
    except ValueError as exc:
        raise ChannelSpecError(str(exc), text, kpos) from None


def _build(kind, v, seed, record) -> Channel:
    kw = dict(seed=seed, record=record)
    if kind == "bsc":
        return BSC(v["eps"], **kw)
    if kind == "awgn":
        return AWGN(v["n"], **kw)
    if kind == "constant":
        return Constant(v["value"], **kw)
    if kind == "gain_awgn":
        return GainAWGN(v["alpha"], v["beta"], v["n"], **kw)
    if kind == "delay":
        return Delay(v["d"], **kw)
    if kind == "fading":
        return SlowFading(v["a"], v["n"], **kw)
    if kind == "modulo":
        return ModuloAdditive(v["q"], v["errors"], **kw)
    if kind == "signbsc":
        return SignBSC(v["eps"], **kw)
    if kind == "nonlinear":
        return Nonlinear(v["f"], v["n"], **kw)
    if kind == "adversarial_state":
        W = np.array([[[1 - e, e], [e, 1 - e]] for e in (v["eps0"], v["eps1"])])
        return AdversarialState(W, BudgetStatePolicy(1, 0, v["budget"]), **kw)
    pol = v["policy"]
    if pol == "greedy":
        policy = GreedyAntiCorrelation(v["budget"])
    elif pol == "periodic":
        policy = PeriodicErrors([int(c) for c in v["pattern"]])
    elif pol == "burst":
        policy = ReactiveBurst(v["run"], v["burst"])
    else:
        raise ValueError(f"unknown adversary policy {pol!r}")
    return AdversarialBinary(policy, **kw)


def builtin_channels() -> dict[str, type]:
    """Catalogue of channel classes by the kind used in channel strings."""
    return {
        "bsc": BSC, "awgn": AWGN, "constant": Constant, "gain_awgn": GainAWGN,
        "nonlinear": Nonlinear, "delay": Delay, "fading": SlowFading,
        "modulo": ModuloAdditive, "signbsc": SignBSC,
        "adversarial": AdversarialBinary, "adversarial_state": AdversarialState,
    }
