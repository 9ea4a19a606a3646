"""Estimator-style facades over the pulse encoders and the k-bit
rounder.

Transformers take an array of values and return pulse tensors with one
extra trailing axis of length n_pulses; ``inverse_transform`` decodes
by pulse fraction.  Randomized encoders derive all draws from ``seed``,
so repeated transforms of the same input are identical.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .bitstream import (
    EncodingSpec,
    encode,
    value_of,
)
from .rng import substream
from .rounding import dither_round, left_schedule, right_schedule
from .validation import check_in_range, check_n_pulses

__all__ = [
    "StochasticEncoder",
    "UnaryEncoder",
    "SpreadEncoder",
    "DitherEncoder",
    "KBitRounder",
]


class _PulseEncoder(TransformerMixin, BaseEstimator):
    _scheme = None

    def fit(self, X, y=None):
        check_n_pulses(self.n_pulses, "n_pulses")
        return self

    def _spec(self):
        return EncodingSpec(scheme=self._scheme, n_pulses=self.n_pulses)

    def transform(self, X):
        self.fit(X)
        xa = np.asarray(X, dtype=np.float64)
        check_in_range(xa.ravel(), 0.0, 1.0, "X")
        flat = xa.ravel()
        seed = getattr(self, "seed", None)
        rng = None if seed is None else substream(seed, 0)
        bits = encode(flat, self._spec(), rng=rng)
        return bits.reshape(xa.shape + (self.n_pulses,))

    def inverse_transform(self, bits):
        return np.asarray(value_of(np.asarray(bits)))


class StochasticEncoder(_PulseEncoder):
    """iid Bernoulli(x) pulses."""

    _scheme = "stochastic"

    def __init__(self, n_pulses: int = 64, seed: int = 0):
        self.n_pulses = n_pulses
        self.seed = seed


class UnaryEncoder(_PulseEncoder):
    """Leading block of round(N x) sure pulses."""

    _scheme = "det-unary"

    def __init__(self, n_pulses: int = 64):
        self.n_pulses = n_pulses


class SpreadEncoder(_PulseEncoder):
    """Clock-division pattern: evenly spread pulses."""

    _scheme = "det-spread"

    def __init__(self, n_pulses: int = 64):
        self.n_pulses = n_pulses


class DitherEncoder(_PulseEncoder):
    """Sure block plus Bernoulli residual pulses."""

    def __init__(self, n_pulses: int = 64, seed: int = 0, spread: bool = False):
        self.n_pulses = n_pulses
        self.seed = seed
        self.spread = spread

    @property
    def _scheme(self):
        return "dither-f2" if self.spread else "dither-f1"


class KBitRounder(TransformerMixin, BaseEstimator):
    """Elementwise dither rounding onto the k-bit grid.

    Values must be pre-scaled to [0, 2^k - 1].  Cycle slots advance in
    flat array order, so a transform of M values consumes M slots
    starting at zero; the schedule and all residual draws derive from
    ``seed``.
    """

    def __init__(self, k: int = 8, n_positions: int = 16, side: str = "left",
                 seed: int = 0):
        self.k = k
        self.n_positions = n_positions
        self.side = side
        self.seed = seed

    def fit(self, X, y=None):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        build = left_schedule if self.side == "left" else right_schedule
        self.sigma_ = build(self.n_positions, substream(self.seed, 0))
        return self

    def transform(self, X):
        if not hasattr(self, "sigma_"):
            self.fit(X)
        xa = np.asarray(X, dtype=np.float64)
        idx = np.arange(xa.size, dtype=np.int64).reshape(xa.shape)
        out = dither_round(
            xa, idx, self.n_positions, self.sigma_, substream(self.seed, 1), k=self.k
        )
        return np.asarray(out)
