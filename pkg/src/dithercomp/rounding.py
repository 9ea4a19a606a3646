"""Scalar rounding onto a k-bit integer grid.

Three modes share the output contract clip(result, 0, 2^k - 1):

* quantize_det: round half up.  Lowest mean squared error of any
  single-valued rounding for uniform inputs, but biased.
* round_stochastic: floor plus Bernoulli(frac).  Unbiased; the rounded
  value's conditional variance is frac*(1-frac).
* dither_round: floor plus one pulse read from the dither encoding of
  frac over an N-position cycle.  Averaged over a full cycle of
  positions the mean is exactly frac, with per-cycle variance far below
  stochastic rounding's.  At N = 1 it degenerates to stochastic
  rounding exactly.

A cycle is visited through a fixed schedule sigma (position = sigma[i]).
Left operands of a product visit positions consecutively so their sure
blocks stay contiguous in time (format 1); right operands visit with a
coprime stride so their sure blocks interleave evenly (format 2).  Both
schedules carry a seeded random rotation, which is what keeps products
of dither-rounded operands unbiased across independent runs.
"""

from __future__ import annotations

import math

import numpy as np

from .bitstream import dither_bit_prob, dither_params
from .rng import check_rng
from .validation import check_n_pulses

__all__ = [
    "quantize_det",
    "round_stochastic",
    "dither_round",
    "coprime_stride",
    "left_schedule",
    "right_schedule",
    "DitherRounder",
]

_GOLDEN = (1.0 + 5.0**0.5) / 2.0


def _check_k(k) -> int:
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise TypeError(f"k must be an int, got {type(k).__name__}")
    if not 1 <= k <= 24:
        # 24 keeps q-length int64 partial sums exact
        raise ValueError(f"k must lie in 1..24, got {k}")
    return int(k)


def _clip_grid(values, k):
    out = np.clip(values, 0, 2 ** _check_k(k) - 1).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def quantize_det(x, k: int):
    """Round half up onto the k-bit grid; scalars in, int out."""
    xa = np.asarray(x, dtype=np.float64)
    return _clip_grid(np.floor(xa + 0.5), k)


def round_stochastic(x, k: int, rng=None):
    """floor(x) + Bernoulli(frac(x)), clipped to the k-bit grid."""
    gen = check_rng(rng)
    xa = np.asarray(x, dtype=np.float64)
    base = np.floor(xa)
    bit = gen.random(xa.shape) < (xa - base)
    return _clip_grid(base + bit, k)


def dither_round(alpha, index, n_positions: int, sigma=None, rng=None, k=None):
    """floor(alpha) + the pulse at cycle slot ``index`` of frac(alpha).

    ``sigma`` maps slots to encoding positions (identity when None);
    ``index`` is reduced mod the cycle length.  Residual pulses are
    redrawn on every call.  With ``k`` given the result is clipped to
    the k-bit grid.  Scalars or broadcastable arrays.
    """
    n_total = check_n_pulses(n_positions, "n_positions")
    gen = check_rng(rng)
    aa = np.asarray(alpha, dtype=np.float64)
    if not np.all(np.isfinite(aa)):
        raise ValueError("alpha must be finite")
    idx = np.asarray(index, dtype=np.int64) % n_total
    if sigma is None:
        pos = idx
    else:
        sig = np.asarray(sigma, dtype=np.int64)
        if sig.shape != (n_total,):
            raise ValueError(f"sigma must have shape ({n_total},)")
        pos = sig[idx]
    base = np.floor(aa)
    n_sure, delta, low = dither_params(aa - base, n_total)
    prob = dither_bit_prob(pos, n_sure, delta, low)
    bit = gen.random(np.broadcast(aa, pos).shape) < prob
    out = base + bit
    if k is None:
        out = out.astype(np.int64)
        return int(out) if out.ndim == 0 else out
    return _clip_grid(out, k)


def coprime_stride(n_positions: int) -> int:
    """Smallest stride >= round(N / golden ratio) coprime to N."""
    n_total = check_n_pulses(n_positions, "n_positions")
    if n_total == 1:
        return 1
    stride = max(1, round(n_total / _GOLDEN))
    while math.gcd(stride, n_total) != 1:
        stride += 1
    return stride % n_total if stride % n_total else 1


def left_schedule(n_positions: int, rng=None) -> np.ndarray:
    """Consecutive visiting order with a random rotation (format 1 role)."""
    n_total = check_n_pulses(n_positions, "n_positions")
    rot = int(check_rng(rng).integers(n_total))
    return (np.arange(n_total, dtype=np.int64) + rot) % n_total


def right_schedule(n_positions: int, rng=None) -> np.ndarray:
    """Coprime-stride visiting order with a random rotation (format 2 role)."""
    n_total = check_n_pulses(n_positions, "n_positions")
    rot = int(check_rng(rng).integers(n_total))
    stride = coprime_stride(n_total)
    return (rot + stride * np.arange(n_total, dtype=np.int64)) % n_total


class DitherRounder:
    """Stateful dither rounder: one cycle slot consumed per call.

    ``side`` picks the visiting schedule ("left" or "right"); an
    explicit ``sigma`` overrides it.  The schedule is fixed for the
    rounder's lifetime; ``count`` tracks how many roundings have been
    served.
    """

    def __init__(self, n_positions: int, side: str = "left", rng=None, sigma=None, k=None):
        self.n_positions = check_n_pulses(n_positions, "n_positions")
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        self.side = side
        self.k = None if k is None else _check_k(k)
        self._rng = check_rng(rng)
        if sigma is not None:
            sig = np.asarray(sigma, dtype=np.int64)
            if not np.array_equal(np.sort(sig), np.arange(self.n_positions)):
                raise ValueError("sigma must be a bijection on 0..N-1")
            self.sigma = sig
        elif side == "left":
            self.sigma = left_schedule(self.n_positions, self._rng)
        else:
            self.sigma = right_schedule(self.n_positions, self._rng)
        self.count = 0

    def round(self, alpha):
        """Round one scalar and advance the cycle slot."""
        out = dither_round(
            alpha, self.count, self.n_positions, self.sigma, self._rng, k=self.k
        )
        self.count += 1
        return out

    __call__ = round
