"""Pulse-stream encoders.

A value x in [0, 1] is carried by N binary pulses; the decoded value is
the fraction of 1s.  Four placement schemes are provided:

* stochastic: each pulse is an independent Bernoulli(x) draw.  Unbiased,
  per-sequence variance x(1-x)/N.
* det-unary: the first round(N*x) pulses are 1 (round half up).  Zero
  variance, worst-case error 1/(2N).
* det-spread: pulse i (1-based) is 1 exactly when floor(i*y) differs
  from floor((i+1)*y).  Same count accuracy as unary but the 1s are
  spread evenly, which is the form used on the right side of a product.
* dither: a deterministic block of n sure pulses plus independent
  Bernoulli residual pulses chosen so the decoded mean is exactly x
  while the variance stays at most 2/N^2.  For x <= 1/2 the block is
  n = floor(N*x) ones and each of the remaining N-n positions carries
  probability delta = (N*x - n)/(N - n); for x > 1/2 the block is
  n = ceil(N*x) positions carrying probability 1 - delta with
  delta = (n - N*x)/n, and the rest are 0.

Dither block placement is controlled by a permutation: identity keeps
the block at the front (format 1); a spread permutation distributes the
block evenly with a random fractional offset (format 2), which is what
a product's right operand uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import check_rng
from .validation import check_bits, check_n_pulses, check_unit

__all__ = [
    "RESIDUAL_SNAP",
    "DitherParams",
    "dither_params",
    "dither_bit_prob",
    "spread_positions",
    "spread_permutation",
    "encode_stochastic",
    "encode_det_unary",
    "encode_det_spread",
    "encode_dither",
    "value_of",
    "EncodingSpec",
    "encode",
    "SCHEMES",
]

# Residuals within this distance of 0 or 1 pulses are treated as exact.
# floor(N*x) is otherwise off by one for inputs like 0.29 at N = 100,
# which would break the zero-variance guarantee for exact fractions m/N.
# The bias introduced is at most RESIDUAL_SNAP per encoded value.
RESIDUAL_SNAP = 1e-9

SCHEMES = ("stochastic", "det-unary", "det-spread", "dither-f1", "dither-f2")


# ---------------------------------------------------------------------------
# dither parameter block


def dither_params(x, n_pulses: int):
    """Vectorized dither parameters for values ``x`` in [0, 1].

    Returns ``(n_sure, delta, low_branch)`` arrays broadcast to the
    shape of ``x``: the sure-block size, the residual Bernoulli
    probability, and which branch applies (True for x <= 1/2).
    """
    n_total = check_n_pulses(n_pulses)
    xa = np.asarray(x, dtype=np.float64)
    if xa.size and (not np.isfinite(xa).all() or xa.min() < 0.0 or xa.max() > 1.0):
        raise ValueError("x must lie in [0, 1]")

    u = n_total * xa
    n0 = np.floor(u)
    r = u - n0
    promote = r > 1.0 - RESIDUAL_SNAP
    n0 = n0 + promote
    r = np.where(promote | (r < RESIDUAL_SNAP), 0.0, r)

    low = xa <= 0.5
    # low: block n0, residual prob r/(N - n0); denominator >= 1 since x <= 1/2
    delta_low = r / np.maximum(n_total - n0, 1.0)
    # high: block ceil = n0 + (r > 0) at prob 1 - delta, delta = (1 - r)/n if r > 0
    n_high = n0 + (r > 0.0)
    delta_high = np.where(r > 0.0, 1.0 - r, 0.0) / np.maximum(n_high, 1.0)

    n_sure = np.where(low, n0, n_high).astype(np.int64)
    delta = np.clip(np.where(low, delta_low, delta_high), 0.0, 1.0)
    return n_sure, delta, low


@dataclass(frozen=True)
class DitherParams:
    """Scalar dither parameter block for one value."""

    n_sure: int
    delta: float
    low_branch: bool
    n_pulses: int

    @classmethod
    def from_value(cls, x, n_pulses: int) -> "DitherParams":
        x = check_unit(x)
        n, d, low = dither_params(x, n_pulses)
        return cls(int(n), float(d), bool(low), int(n_pulses))

    @property
    def variance(self) -> float:
        """Variance of the decoded value."""
        n_res = (self.n_pulses - self.n_sure) if self.low_branch else self.n_sure
        return n_res * self.delta * (1.0 - self.delta) / self.n_pulses**2


def dither_bit_prob(position, n_sure, delta, low_branch):
    """P(pulse = 1) at an identity-placement ``position`` (broadcastable)."""
    in_block = position < n_sure
    return np.where(
        low_branch,
        np.where(in_block, 1.0, delta),
        np.where(in_block, 1.0 - delta, 0.0),
    )


# ---------------------------------------------------------------------------
# spread placement


def spread_positions(ones_count: int, n_pulses: int, offset: float) -> np.ndarray:
    """Positions of ``ones_count`` pulses spread evenly over ``n_pulses`` slots.

    Position j is floor((j + offset) * n_pulses / ones_count) for
    j = 0..ones_count-1, with ``offset`` in [0, 1) a fraction of the
    stride.  A uniformly random offset makes each returned position
    marginally uniform over {0..N-1}, which is what keeps products of
    spread operands exactly unbiased.
    """
    n_total = check_n_pulses(n_pulses)
    s = int(ones_count)
    if s < 0 or s > n_total:
        raise ValueError(f"ones_count must lie in [0, {n_total}], got {ones_count}")
    offset = float(offset)
    if not 0.0 <= offset < 1.0:
        raise ValueError(f"offset must lie in [0, 1), got {offset}")
    if s == 0:
        return np.empty(0, dtype=np.int64)
    pos = np.floor((np.arange(s) + offset) * (n_total / s)).astype(np.int64)
    np.clip(pos, 0, n_total - 1, out=pos)
    if len(np.unique(pos)) != s:
        raise AssertionError("spread positions collided; this is a bug")
    return pos


def spread_permutation(ones_count: int, n_pulses: int, offset: float) -> np.ndarray:
    """Bijection on {0..N-1}: the first ``ones_count`` slots map to spread
    positions, the remaining slots fill the gaps in ascending order."""
    n_total = check_n_pulses(n_pulses)
    head = spread_positions(ones_count, n_total, offset)
    rest = np.setdiff1d(np.arange(n_total, dtype=np.int64), head, assume_unique=False)
    return np.concatenate([head, rest])


def _inverse_permutation(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm), dtype=perm.dtype)
    return inv


def _check_permutation(perm, n_pulses: int) -> np.ndarray:
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (n_pulses,) or not np.array_equal(np.sort(p), np.arange(n_pulses)):
        raise ValueError(f"permutation must be a bijection on 0..{n_pulses - 1}")
    return p


# ---------------------------------------------------------------------------
# encoders


def _batch_values(x, trials):
    """Normalize scalar-x/trials vs array-x calls to (values, squeeze)."""
    xa = np.asarray(x, dtype=np.float64)
    if xa.ndim == 0:
        if trials is None:
            return np.full(1, float(xa)), True
        if int(trials) < 1:
            raise ValueError(f"trials must be >= 1, got {trials}")
        return np.full(int(trials), float(xa)), False
    if xa.ndim == 1:
        if trials is not None:
            raise ValueError("trials applies only to scalar x")
        return xa, False
    raise ValueError("x must be a scalar or a 1-D array")


def encode_stochastic(x, n_pulses: int, rng=None, trials=None) -> np.ndarray:
    """Independent Bernoulli(x) pulses; shape (N,), (trials, N) or (len(x), N)."""
    n_total = check_n_pulses(n_pulses)
    values, squeeze = _batch_values(x, trials)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValueError("x must lie in [0, 1]")
    gen = check_rng(rng)
    bits = (gen.random((len(values), n_total)) < values[:, None]).astype(np.uint8)
    return bits[0] if squeeze else bits


def encode_det_unary(x, n_pulses: int, trials=None) -> np.ndarray:
    """First round(N*x) pulses set, rounding half up."""
    n_total = check_n_pulses(n_pulses)
    values, squeeze = _batch_values(x, trials)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValueError("x must lie in [0, 1]")
    ones = np.floor(n_total * values + 0.5).astype(np.int64)
    bits = (np.arange(n_total)[None, :] < ones[:, None]).astype(np.uint8)
    return bits[0] if squeeze else bits


def encode_det_spread(y, n_pulses: int, trials=None) -> np.ndarray:
    """Pulse i (1-based) set when floor(i*y) != floor((i+1)*y)."""
    n_total = check_n_pulses(n_pulses)
    values, squeeze = _batch_values(y, trials)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValueError("y must lie in [0, 1]")
    # one multiply per index: floor(i*y + y) drifts below exact integer
    # multiples and drops pulses (e.g. y=0.3, i=9)
    i = np.arange(1, n_total + 2, dtype=np.float64)
    marks = np.floor(i[None, :] * values[:, None])
    bits = (np.diff(marks, axis=1) != 0).astype(np.uint8)
    return bits[0] if squeeze else bits


def encode_dither(
    x,
    n_pulses: int,
    rng=None,
    *,
    spread: bool = False,
    offset=None,
    permutation=None,
    trials=None,
) -> np.ndarray:
    """Dither encoding of x.

    With the default identity placement (format 1) the sure block sits at
    the front.  ``spread=True`` places the block evenly with fractional
    ``offset`` (drawn fresh per encoding when None), which is format 2.
    A fixed ``permutation`` array overrides both.  The decoded value has
    mean exactly x under any placement.
    """
    n_total = check_n_pulses(n_pulses)
    if spread and permutation is not None:
        raise ValueError("pass either spread=True or an explicit permutation, not both")
    values, squeeze = _batch_values(x, trials)
    gen = check_rng(rng)
    n_sure, delta, low = dither_params(values, n_total)
    block_p = np.where(low, 1.0, 1.0 - delta)
    resid_p = np.where(low, delta, 0.0)
    m = len(values)

    if permutation is not None:
        perm = _check_permutation(permutation, n_total)
        slot_of = _inverse_permutation(perm)
        in_block = slot_of[None, :] < n_sure[:, None]
        prob = np.where(in_block, block_p[:, None], resid_p[:, None])
    elif spread:
        if offset is not None:
            offs = np.full(m, float(offset))
        else:
            offs = gen.random(m)
        prob = np.repeat(resid_p[:, None], n_total, axis=1)
        if m and len(np.unique(n_sure)) == 1:
            s = int(n_sure[0])
            if s:
                pos = np.floor(
                    (np.arange(s)[None, :] + offs[:, None]) * (n_total / s)
                ).astype(np.int64)
                np.clip(pos, 0, n_total - 1, out=pos)
                np.put_along_axis(prob, pos, block_p[:, None], axis=1)
        else:
            for row in range(m):
                s = int(n_sure[row])
                if s:
                    prob[row, spread_positions(s, n_total, float(offs[row]))] = block_p[row]
    else:
        in_block = np.arange(n_total)[None, :] < n_sure[:, None]
        prob = np.where(in_block, block_p[:, None], resid_p[:, None])

    bits = (gen.random((m, n_total)) < prob).astype(np.uint8)
    return bits[0] if squeeze else bits


def value_of(bits):
    """Decoded value: fraction of 1 pulses (last axis)."""
    a = check_bits(bits)
    v = a.mean(axis=-1)
    return float(v) if a.ndim == 1 else v


# ---------------------------------------------------------------------------
# scheme dispatch


@dataclass(frozen=True)
class EncodingSpec:
    """Scheme name, pulse count, and optional dither placement controls."""

    scheme: str
    n_pulses: int
    spread_offset: float | None = None
    permutation: np.ndarray | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        check_n_pulses(self.n_pulses)
        if self.spread_offset is not None and not 0.0 <= float(self.spread_offset) < 1.0:
            raise ValueError("spread_offset must lie in [0, 1)")
        if self.permutation is not None:
            _check_permutation(self.permutation, self.n_pulses)


def encode(x, spec: EncodingSpec, rng=None, trials=None) -> np.ndarray:
    """Encode ``x`` according to ``spec``."""
    if spec.scheme == "stochastic":
        return encode_stochastic(x, spec.n_pulses, rng, trials=trials)
    if spec.scheme == "det-unary":
        return encode_det_unary(x, spec.n_pulses, trials=trials)
    if spec.scheme == "det-spread":
        return encode_det_spread(x, spec.n_pulses, trials=trials)
    if spec.scheme == "dither-f1":
        return encode_dither(
            x, spec.n_pulses, rng, permutation=spec.permutation, trials=trials
        )
    return encode_dither(
        x, spec.n_pulses, rng, spread=True, offset=spec.spread_offset, trials=trials
    )
