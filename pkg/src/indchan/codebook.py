"""Seeded common randomness and lazily generated random codebooks.

Every random draw in the package comes from a counter-based stream, so any
entry can be regenerated from ``(seed, domain, row, purpose, position)``
without touching its neighbours.

Stream rule
-----------
Write the row index as 64-bit limbs ``r0 r1 r2 r3`` (least significant
first; ``r3 < 2**56``).  Word ``w`` of substream ``(row, purpose)`` in domain
``d`` under master seed ``s`` is lane ``w % 4`` of Philox4x64-10 with

* key ``(s, d << 56 | r3)``
* counter ``(purpose << 40 | (w // 4 + 1), r0, r1, r2)``

(numpy's ``Philox`` increments the counter before each block, which is why
the offset of one appears.)  Rows go up to ``2**248``, purposes up to
``2**24`` and positions up to ``2**42`` words.

Symbol maps
-----------
* uniform double: ``u = (w >> 11) * 2**-53`` in ``[0, 1)``
* discrete prior ``q``: the smallest ``a`` with ``u < q_0 + ... + q_a``
* Gaussian of power ``P``: ``sqrt(P) * Phi^{-1}(((w >> 11) + 1/2) * 2**-53)``
"""
from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

MASK64 = (1 << 64) - 1
_local = threading.local()
MAX_ROWS = 1 << 248

# seed domains; separate keys keep the streams independent
CODEBOOK = 0
CHANNEL = 1
SELECTION = 2
MESSAGE = 3


def uint64_words(seed: int, domain: int, row: int, purpose: int, start: int,
                 count: int) -> np.ndarray:
    """``count`` raw words of one substream, starting at word ``start``."""
    if count < 0 or start < 0:
        raise ValueError("start and count must be nonnegative")
    if not 0 <= row < MAX_ROWS:
        raise ValueError("row index must be below 2**248")
    if not 0 <= purpose < 1 << 24 or not 0 <= domain < 256:
        raise ValueError("purpose or domain out of range")
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    block, lane = divmod(start, 4)
    if block + (count + lane) // 4 + 1 >= 1 << 40:
        raise ValueError("position beyond the addressable range")
    # explicit uint64 arrays: a plain list of large ints may go through float64
    counter = np.array([purpose << 40 | block, row & MASK64, (row >> 64) & MASK64,
                        (row >> 128) & MASK64], dtype=np.uint64)
    key = np.array([seed & MASK64, domain << 56 | row >> 192], dtype=np.uint64)
    # re-keying one generator is several times cheaper than constructing one
    bg = getattr(_local, "philox", None)
    if bg is None:
        bg = _local.philox = np.random.Philox(0)
    bg.state = {"bit_generator": "Philox", "state": {"counter": counter, "key": key},
                "buffer": np.zeros(4, dtype=np.uint64), "buffer_pos": 4,
                "has_uint32": 0, "uinteger": 0}
    return bg.random_raw(count + lane)[lane:]


def words_to_uniform(w: np.ndarray) -> np.ndarray:
    return (w >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def uniforms(seed: int, domain: int, row: int, purpose: int, start: int,
             count: int) -> np.ndarray:
    return words_to_uniform(uint64_words(seed, domain, row, purpose, start, count))


def normals(seed: int, domain: int, row: int, purpose: int, start: int,
            count: int) -> np.ndarray:
    w = uint64_words(seed, domain, row, purpose, start, count)
    return ndtri(((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53)


@dataclass(frozen=True)
class Prior:
    """Input distribution: a pmf on ``{0..A-1}`` or a Gaussian of power P."""

    kind: str
    probs: tuple = ()
    power: float = 1.0
    _cdf: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "discrete":
            p = np.asarray(self.probs, dtype=float)
            if p.ndim != 1 or p.size < 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError("discrete prior must be a probability vector")
            cdf = np.cumsum(p)
            cdf[-1] = 1.0
            object.__setattr__(self, "_cdf", cdf)
        elif self.kind == "gaussian":
            if not self.power > 0:
                raise ValueError("Gaussian prior needs positive power")
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    @classmethod
    def uniform(cls, size: int = 2) -> "Prior":
        return cls("discrete", tuple([1.0 / size] * size))

    @classmethod
    def discrete(cls, probs) -> "Prior":
        return cls("discrete", tuple(float(v) for v in probs))

    @classmethod
    def gaussian(cls, power: float = 1.0) -> "Prior":
        return cls("gaussian", power=float(power))

    @property
    def continuous(self) -> bool:
        return self.kind == "gaussian"

    @property
    def size(self) -> int:
        if self.continuous:
            raise ValueError("a Gaussian prior has no finite alphabet")
        return len(self.probs)

    def symbols_from_words(self, w: np.ndarray) -> np.ndarray:
        if self.continuous:
            u = ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
            return np.sqrt(self.power) * ndtri(u)
        u = words_to_uniform(w)
        return np.minimum(np.searchsorted(self._cdf, u, side="right"),
                          len(self.probs) - 1).astype(np.int64)


@dataclass(frozen=True)
class Codebook:
    """An ``M x n`` random codebook with i.i.d. entries drawn from ``prior``.

    Rows are never stored; :meth:`rows` regenerates any block of entries on
    demand, so ``M`` may be astronomically large.
    """

    seed: int
    prior: Prior
    M: int
    n: int

    def __post_init__(self):
        if self.M < 1 or self.n < 1:
            raise ValueError("M and n must be positive")
        if self.M > MAX_ROWS:
            raise ValueError("M is limited to 2**248 rows")

    def row(self, i: int, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = self.n if stop is None else stop
        if not 0 <= i < self.M:
            raise IndexError(f"row {i} outside [0, {self.M})")
        if not 0 <= start <= stop <= self.n:
            raise IndexError(f"bad column range [{start}, {stop}) for n={self.n}")
        w = uint64_words(self.seed, CODEBOOK, int(i), 0, start, stop - start)
        return self.prior.symbols_from_words(w)

    def rows(self, indices, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = self.n if stop is None else stop
        idx = [int(i) for i in np.atleast_1d(indices)]
        dtype = np.float64 if self.prior.continuous else np.int64
        if not idx:
            return np.empty((0, stop - start), dtype=dtype)
        if not 0 <= start <= stop <= self.n:
            raise IndexError(f"bad column range [{start}, {stop}) for n={self.n}")
        for i in idx:
            if not 0 <= i < self.M:
                raise IndexError(f"row {i} outside [0, {self.M})")
        w = np.stack([uint64_words(self.seed, CODEBOOK, i, 0, start, stop - start) for i in idx])
        return self.prior.symbols_from_words(w)

    @property
    def entries(self) -> np.ndarray:
        if self.M * self.n > 50_000_000:
            raise OverflowError(f"M*n = {self.M * self.n} is too large to materialize")
        return self.rows(range(self.M))


def generate_codebook(seed: int, prior: Prior, M: int, n: int) -> Codebook:
    return Codebook(int(seed) & MASK64, prior, int(M), int(n))


def column_slice(cb: Codebook, i: int, start: int, stop: int) -> np.ndarray:
    """Entries ``k`` in ``[start, stop)`` of row ``i``."""
    return cb.row(i, start, stop)


_MAGIC = b"ICCB"
_VERSION = 1


def dump_codebook(cb: Codebook, path, include_entries: bool = True) -> None:
    """Write a header (magic, version, M, n, prior, seed) and optionally entries."""
    if cb.M >= 1 << 64:
        raise ValueError("the file header stores M in 64 bits")
    kind = 1 if cb.prior.continuous else 0
    probs = () if cb.prior.continuous else cb.prior.probs
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HQQQBdI", _VERSION, cb.M, cb.n, cb.seed, kind,
                             cb.prior.power, len(probs)))
        fh.write(struct.pack(f"<{len(probs)}d", *probs))
        fh.write(struct.pack("<B", int(include_entries)))
        if include_entries:
            data = cb.entries.astype("<f8" if kind else "<i8")
            fh.write(data.tobytes())


def load_codebook(path) -> Codebook:
    """Read a dumped codebook; stored entries are checked against the seed."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a codebook file")
        head = struct.calcsize("<HQQQBdI")
        version, M, n, seed, kind, power, k = struct.unpack("<HQQQBdI", fh.read(head))
        if version != _VERSION:
            raise ValueError(f"unsupported codebook version {version}")
        probs = struct.unpack(f"<{k}d", fh.read(8 * k))
        prior = Prior.gaussian(power) if kind else Prior.discrete(probs)
        cb = Codebook(seed, prior, M, n)
        (has_entries,) = struct.unpack("<B", fh.read(1))
        if has_entries:
            raw = np.frombuffer(fh.read(8 * M * n), dtype="<f8" if kind else "<i8")
            if not np.array_equal(raw.reshape(M, n), cb.entries):
                raise ValueError("stored entries do not match the seed")
    return cb
