"""Pulse-stream arithmetic: products by AND, scaled addition by mux.

multiply ANDs two aligned pulse sequences, so decoded values multiply in
expectation when the operands are independent.  scaled_add selects each
pulse from one of two sequences under a control sequence W, computing
(x + y)/2 in expectation when W averages 1/2.  Three control flavors:

* stochastic: W is iid Bernoulli(1/2).
* deterministic: W selects the even 1-based positions.
* dither: the odd-position mask or its complement, one fair coin per
  sequence, which keeps E(W_i) = 1/2 per position with O(1/N^2)
  output variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import check_rng
from .validation import check_bits, check_n_pulses

__all__ = ["ControlSequence", "CONTROL_KINDS", "make_control", "multiply", "scaled_add"]

CONTROL_KINDS = ("stochastic", "deterministic", "dither")


@dataclass(frozen=True)
class ControlSequence:
    """Mux control pulses plus the flavor that produced them."""

    bits: np.ndarray
    kind: str


def multiply(a, b) -> np.ndarray:
    """Pulsewise AND of two equal-length sequences (batches broadcast)."""
    x = check_bits(a, "a")
    y = check_bits(b, "b")
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"length mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    return x & y


def make_control(kind: str, n_pulses: int, rng=None, trials=None) -> ControlSequence:
    """Build a mux control sequence; shape (N,) or (trials, N)."""
    n_total = check_n_pulses(n_pulses)
    if kind not in CONTROL_KINDS:
        raise ValueError(f"unknown control kind {kind!r}; expected one of {CONTROL_KINDS}")
    m = 1 if trials is None else int(trials)
    if m < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")

    if kind == "stochastic":
        gen = check_rng(rng)
        bits = (gen.random((m, n_total)) < 0.5).astype(np.uint8)
    elif kind == "deterministic":
        # 1s at even 1-based positions
        row = np.zeros(n_total, dtype=np.uint8)
        row[1::2] = 1
        bits = np.tile(row, (m, 1))
    else:
        # odd-position mask or its complement, one fair coin per sequence
        gen = check_rng(rng)
        row = np.zeros(n_total, dtype=np.uint8)
        row[0::2] = 1
        coin = gen.integers(0, 2, size=m).astype(np.uint8)
        bits = np.where(coin[:, None] == 1, row[None, :], 1 - row[None, :])

    if trials is None:
        bits = bits[0]
    return ControlSequence(bits=bits, kind=kind)


def scaled_add(x_bits, y_bits, control) -> np.ndarray:
    """Mux x/y pulses under the control: W_i picks x_i, else y_i."""
    x = check_bits(x_bits, "x_bits")
    y = check_bits(y_bits, "y_bits")
    w = control.bits if isinstance(control, ControlSequence) else control
    w = check_bits(w, "control")
    if not (x.shape[-1] == y.shape[-1] == w.shape[-1]):
        raise ValueError(
            f"length mismatch: x={x.shape[-1]} y={y.shape[-1]} control={w.shape[-1]}"
        )
    return np.where(w == 1, x, y).astype(np.uint8)
