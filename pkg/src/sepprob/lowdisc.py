"""Scrambled Faure-type low-discrepancy streams.

Coordinate ``j`` of point ``i`` is the radical inverse, in prime base ``b``, of
the digit vector ``C_j a(i) mod b`` where ``a(i)`` holds the base-``b`` digits
of ``i`` and ``C_j = L_j P^j``: ``P`` is the upper-triangular Pascal matrix and
``L_j`` a nonsingular lower-triangular scrambling matrix drawn from the
stream's seed (the identity when unscrambled).  With ``b >= dimension`` this
is a (0, d)-sequence, so every block of ``b^m`` consecutive points starting
at a multiple of ``b^m`` puts exactly one point in each elementary interval
of length ``b^-m`` along every axis.

Points are produced digit-exactly: both backends compute the same integer
digit vectors, so output is bit-identical across backends, runs and
platforms.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from . import _accel

INDEX_CAP = 2**48
MAX_DIMENSION = 128

_NP_CHUNK = 1 << 17


class StreamExhausted(RuntimeError):
    """Raised when a stream would be advanced past ``INDEX_CAP``."""


def is_prime(n):
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


def smallest_prime_at_least(n):
    n = max(2, int(n))
    while not is_prime(n):
        n += 1
    return n


def digit_layout(base):
    """Return ``(input_digits, output_digits)`` for ``base``.

    Input digits cover every index below ``INDEX_CAP``; output digits are the
    most that keep ``base**output_digits <= 2**53`` so the radical inverse is
    an exact float strictly below 1.
    """
    k_in = 1
    while base**k_in < INDEX_CAP:
        k_in += 1
    m_out = 1
    while base ** (m_out + 1) <= 2**53:
        m_out += 1
    return k_in, m_out


@lru_cache(maxsize=64)
def generator_matrices(dimension, base, scramble_seed):
    """Generator matrices of shape ``(dimension, output_digits, K)`` as int64."""
    k_in, m_out = digit_layout(base)
    k = max(k_in, m_out)
    rng = None if scramble_seed is None else np.random.Generator(np.random.PCG64(scramble_seed))
    mats = np.empty((dimension, m_out, k), dtype=np.int64)
    for j in range(dimension):
        pascal = np.zeros((k, k), dtype=np.int64)
        for c in range(k):
            for r in range(c + 1):
                pascal[r, c] = comb(c, r) % base * pow(j, c - r, base) % base
        if rng is None:
            cj = pascal
        else:
            lower = np.tril(rng.integers(0, base, size=(k, k), dtype=np.int64), -1)
            lower[np.diag_indices(k)] = rng.integers(1, base, size=k, dtype=np.int64)
            cj = (lower @ pascal) % base
        mats[j] = cj[:m_out]
    mats.setflags(write=False)
    return mats


@_accel.njit
def _faure_points_jit(mats, base, start, n):
    d, m_out, k = mats.shape
    out = np.empty((n, d))
    digits = np.zeros(k, np.int64)
    x = start
    pos = 0
    while x > 0:
        digits[pos] = x % base
        x //= base
        pos += 1
    y = np.zeros((d, m_out), np.int64)
    for j in range(d):
        for r in range(m_out):
            acc = 0
            for c in range(k):
                acc += mats[j, r, c] * digits[c]
            y[j, r] = acc % base
    scale = 1
    for _ in range(m_out):
        scale *= base
    fscale = float(scale)
    for i in range(n):
        for j in range(d):
            v = 0
            for r in range(m_out):
                v = v * base + y[j, r]
            out[i, j] = v / fscale
        if i == n - 1:
            break
        # index + 1: every touched digit moves by +1 mod base, carries included
        pos = 0
        while True:
            digits[pos] += 1
            carry = digits[pos] == base
            if carry:
                digits[pos] = 0
            for j in range(d):
                for r in range(m_out):
                    t = y[j, r] + mats[j, r, pos]
                    if t >= base:
                        t -= base
                    y[j, r] = t
            if not carry:
                break
            pos += 1
    return out


def _faure_points_np(mats, base, start, n):
    d, m_out, _ = mats.shape
    out = np.empty((n, d))
    powers = base ** np.arange(m_out - 1, -1, -1, dtype=np.int64)
    fscale = float(base**m_out)
    fmats = mats.astype(np.float64)
    for lo in range(0, n, _NP_CHUNK):
        cnt = min(_NP_CHUNK, n - lo)
        idx = np.arange(start + lo, start + lo + cnt, dtype=np.int64)
        top = int(idx[-1])
        ndig = 1
        while base**ndig <= top:
            ndig += 1
        digits = np.empty((cnt, ndig), dtype=np.float64)
        rem = idx.copy()
        for c in range(ndig):
            digits[:, c] = rem % base
            rem //= base
        for j in range(d):
            y = np.mod(digits @ fmats[j, :, :ndig].T, base).astype(np.int64)
            out[lo : lo + cnt, j] = (y @ powers) / fscale
    return out


def faure_points(mats, base, start, n):
    if _accel.use_jit():
        return _faure_points_jit(mats, np.int64(base), np.int64(start), np.int64(n))
    return _faure_points_np(mats, base, start, n)


class QmcStream:
    """Deterministic point source in ``[0, 1)^dimension`` with random access.

    Args:
        dimension: Number of coordinates per point, 1..MAX_DIMENSION.
        base: Prime base, at least ``dimension``.  Defaults to the smallest
            such prime.
        scramble_seed: 64-bit seed for the per-coordinate scrambling
            matrices; ``None`` gives the plain Faure sequence.
        cursor: Index of the next point to emit.
    """

    def __init__(self, dimension, base=None, scramble_seed=None, cursor=0):
        if not 1 <= dimension <= MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}], got {dimension}")
        if base is None:
            base = smallest_prime_at_least(dimension)
        if not is_prime(base) or base < dimension:
            raise ValueError(f"base must be a prime >= dimension, got {base}")
        if scramble_seed is not None and not 0 <= scramble_seed < 2**64:
            raise ValueError("scramble_seed must fit in 64 unsigned bits")
        self.dimension = int(dimension)
        self.base = int(base)
        self.scramble_seed = scramble_seed
        self._mats = generator_matrices(self.dimension, self.base, scramble_seed)
        self.cursor = 0
        self.skip_to(cursor)

    def __repr__(self):
        return (
            f"QmcStream(dimension={self.dimension}, base={self.base}, "
            f"scramble_seed={self.scramble_seed}, cursor={self.cursor})"
        )

    def skip_to(self, index):
        index = int(index)
        if not 0 <= index < INDEX_CAP:
            raise StreamExhausted(f"index {index} outside [0, 2^48)")
        self.cursor = index

    def points(self, start, n):
        """Points ``start .. start+n-1`` without touching the cursor."""
        start, n = int(start), int(n)
        if n < 0:
            raise ValueError("n must be nonnegative")
        if start < 0 or start + n > INDEX_CAP:
            raise StreamExhausted(f"points [{start}, {start + n}) exceed 2^48")
        if n == 0:
            return np.empty((0, self.dimension))
        return faure_points(self._mats, self.base, start, n)

    def next_points(self, n):
        out = self.points(self.cursor, n)
        self.cursor += int(n)
        return out

    def next_point(self):
        return self.next_points(1)[0]

    def spawn(self, index):
        """Independent copy of this stream positioned at ``index``."""
        return QmcStream(self.dimension, self.base, self.scramble_seed, index)


@dataclass(frozen=True)
class EquidistributionReport:
    moment_order: int
    n: int
    deviations: np.ndarray
    max_deviation: float


def equidistribution_check(stream, n, moment_order):
    """Per-coordinate |empirical moment - 1/(order+1)| from the stream cursor.

    The stream itself is not advanced.
    """
    if n < 1000:
        raise ValueError("equidistribution_check needs n >= 1000")
    pts = stream.points(stream.cursor, n)
    moments = np.mean(pts**moment_order, axis=0)
    dev = np.abs(moments - 1.0 / (moment_order + 1))
    return EquidistributionReport(moment_order, n, dev, float(dev.max()))
