"""Monte Carlo error statistics for the three pulse-stream schemes.

``sweep`` measures empirical mean squared error (EMSE), bias, and
variance for an operation (represent, multiply, average) under a scheme
family (stochastic, deterministic, dither) across a grid of sequence
lengths.  Operand values are drawn uniform on [0, 1]; the same pairs are
reused across schemes at a given length so the families are compared on
identical inputs.

Substream key layout under the master seed:
  (0, N)            operand pair values for length N
  (1, N, family)    encoding randomness for length N and scheme family

Aggregates per record, over all pairs x trials samples of the signed
error e = decoded - target:
  bias = mean(e), emse = mean(e^2), variance = var(e) (population),
  sem = sqrt(variance / n_samples).
emse == bias^2 + variance exactly, and variance includes the spread of
per-value bias across pairs, so the identity holds for the
deterministic family too.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import bitstream as bs
from .arithmetic import make_control, multiply, scaled_add
from .rng import substream
from .validation import check_n_pulses

__all__ = [
    "FAMILIES",
    "OPERATIONS",
    "STATS_CSV_HEADER",
    "StatsRecord",
    "EmseReference",
    "sweep",
    "theoretical_emse",
    "emse_lower_bound",
    "fit_loglog_slope",
    "write_stats_csv",
]

FAMILIES = ("stochastic", "deterministic", "dither")
OPERATIONS = ("represent", "multiply", "average")

STATS_CSV_HEADER = (
    "scheme,operation,N,pairs,trials,bias,abs_bias,variance,emse,sem,seed"
)


@dataclass(frozen=True)
class StatsRecord:
    scheme: str
    operation: str
    n_pulses: int
    pairs: int
    trials: int
    bias: float
    abs_bias: float
    variance: float
    emse: float
    sem: float
    seed: int

    def to_csv_row(self) -> list:
        return [
            self.scheme,
            self.operation,
            self.n_pulses,
            self.pairs,
            self.trials,
            repr(self.bias),
            repr(self.abs_bias),
            repr(self.variance),
            repr(self.emse),
            repr(self.sem),
            self.seed,
        ]


@dataclass(frozen=True)
class EmseReference:
    """Closed-form EMSE where one exists, otherwise the asymptotic order."""

    kind: str  # "exact" | "upper-bound" | "asymptotic"
    value: float | None
    order: str  # "1/N" or "1/N^2"


def _one_pair(operation: str, scheme: str, x: float, y: float, n: int, rng, trials: int):
    """Decoded values for ``trials`` runs of one operand pair."""
    if operation == "represent":
        if scheme == "stochastic":
            bits = bs.encode_stochastic(x, n, rng, trials=trials)
        elif scheme == "deterministic":
            bits = bs.encode_det_unary(x, n, trials=trials)
        else:
            bits = bs.encode_dither(x, n, rng, trials=trials)
        return bits.mean(axis=1), x

    if operation == "multiply":
        if scheme == "stochastic":
            xb = bs.encode_stochastic(x, n, rng, trials=trials)
            yb = bs.encode_stochastic(y, n, rng, trials=trials)
        elif scheme == "deterministic":
            xb = bs.encode_det_unary(x, n, trials=trials)
            yb = bs.encode_det_spread(y, n, trials=trials)
        else:
            xb = bs.encode_dither(x, n, rng, trials=trials)
            yb = bs.encode_dither(y, n, rng, spread=True, trials=trials)
        return multiply(xb, yb).mean(axis=1), x * y

    if scheme == "stochastic":
        xb = bs.encode_stochastic(x, n, rng, trials=trials)
        yb = bs.encode_stochastic(y, n, rng, trials=trials)
        ctrl = make_control("stochastic", n, rng, trials=trials)
    elif scheme == "deterministic":
        xb = bs.encode_det_unary(x, n, trials=trials)
        yb = bs.encode_det_unary(y, n, trials=trials)
        ctrl = make_control("deterministic", n, trials=trials)
    else:
        xb = bs.encode_dither(x, n, rng, trials=trials)
        yb = bs.encode_dither(y, n, rng, trials=trials)
        ctrl = make_control("dither", n, rng, trials=trials)
    return scaled_add(xb, yb, ctrl).mean(axis=1), (x + y) / 2.0


def sweep(
    operation: str,
    scheme: str,
    n_list,
    pairs: int,
    trials: int,
    seed: int,
) -> list[StatsRecord]:
    """Measure error statistics across sequence lengths."""
    if operation not in OPERATIONS:
        raise ValueError(f"unknown operation {operation!r}; expected one of {OPERATIONS}")
    if scheme not in FAMILIES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {FAMILIES}")
    if pairs < 1 or trials < 1:
        raise ValueError("pairs and trials must be >= 1")

    family = FAMILIES.index(scheme)
    # the deterministic family has no randomness; one trial carries it
    trials_eff = 1 if scheme == "deterministic" else trials

    records = []
    for n in n_list:
        n = check_n_pulses(n, "N")
        pair_rng = substream(seed, 0, n)
        xs = pair_rng.random(pairs)
        ys = pair_rng.random(pairs)
        enc_rng = substream(seed, 1, n, family)

        errors = np.empty(pairs * trials_eff)
        for p in range(pairs):
            values, target = _one_pair(
                operation, scheme, xs[p], ys[p], n, enc_rng, trials_eff
            )
            errors[p * trials_eff : (p + 1) * trials_eff] = values - target

        n_samples = errors.size
        bias = float(errors.mean())
        # population variance keeps emse == bias^2 + variance exact
        variance = float(errors.var()) if n_samples > 1 else 0.0
        records.append(
            StatsRecord(
                scheme=scheme,
                operation=operation,
                n_pulses=n,
                pairs=pairs,
                trials=trials_eff,
                bias=bias,
                abs_bias=abs(bias),
                variance=variance,
                emse=float(np.mean(errors**2)),
                sem=float(np.sqrt(variance / n_samples)),
                seed=seed,
            )
        )
    return records


def theoretical_emse(scheme: str, operation: str, n_pulses: int) -> EmseReference:
    """Reference EMSE for uniform operands, where a closed form is known."""
    n = check_n_pulses(n_pulses, "N")
    if scheme not in FAMILIES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if operation not in OPERATIONS:
        raise ValueError(f"unknown operation {operation!r}")
    order = "1/N" if scheme == "stochastic" else "1/N^2"
    if operation == "represent":
        if scheme == "stochastic":
            return EmseReference("exact", 1.0 / (6.0 * n), order)
        if scheme == "deterministic":
            return EmseReference("exact", 1.0 / (12.0 * n * n), order)
        return EmseReference("upper-bound", 2.0 / (n * n), order)
    return EmseReference("asymptotic", None, order)


def emse_lower_bound(n_pulses: int) -> float:
    """EMSE floor for any N-pulse representation of a uniform value.

    Decoded values live on the grid {0, 1/N, ..., 1}, so the error is at
    least the distance to the grid; integrating that over uniform x
    gives 1/(12 N^2).
    """
    n = check_n_pulses(n_pulses, "N")
    return 1.0 / (12.0 * n * n)


def fit_loglog_slope(n_values, emse_values) -> float:
    """Least squares slope of log(emse) against log(N)."""
    n_arr = np.asarray(n_values, dtype=np.float64)
    e_arr = np.asarray(emse_values, dtype=np.float64)
    if n_arr.size != e_arr.size or n_arr.size < 2:
        raise ValueError("need at least two (N, emse) points")
    if (e_arr <= 0).any() or (n_arr <= 0).any():
        raise ValueError("N and emse must be positive for a log-log fit")
    return float(np.polyfit(np.log(n_arr), np.log(e_arr), 1)[0])


def write_stats_csv(records, path) -> None:
    """Write records in the fixed column order; floats use repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATS_CSV_HEADER.split(","))
        for rec in records:
            writer.writerow(rec.to_csv_row())
