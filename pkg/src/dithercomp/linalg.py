"""Quantized matrix multiplication with deterministic, stochastic, or
dithered rounding of the scaled operands.

Real matrices are mapped onto the k-bit integer grid by the affine map
m = (a - lo) * s with s = (2^k - 1) / (hi - lo), multiplied with
integer-exact accumulation, then mapped back.  The back map adds the
full-precision cross terms, so the only error is the rounding error of
the grid values themselves.

Rounding modes
--------------
* deterministic: every scaled entry rounds half-up once.  Cheap, but
  the per-entry bias survives the contraction sum.
* stochastic: every rounding is an independent Bernoulli floor/ceil
  draw.  Unbiased; error of one output entry decays like q^(1/2)
  relative to its magnitude.
* dither: every rounding reads one slot of a dither cycle.  Left
  operand entries visit their cycle (length r) consecutively, right
  operand entries (length p) with a coprime stride, so within one
  contraction sum each operand sweeps its cycle nearly evenly and the
  amortized entry error decays like 1/N instead of 1/sqrt(N).

Slots are assigned by the global stream order t = (i*r + kk)*q + j for
output entry (i, kk) and contraction index j: the left operand uses
slot t mod r, the right t mod p.  Cycle schedules carry seeded random
rotations, which keeps every mode-"dither" product entry unbiased
across independent runs.

Variants control how often operands are re-rounded:
* per-partial: both operands re-round for every scalar product
  (2*p*q*r roundings).
* input-once: the left matrix is rounded once up front (slot
  (i*q + j) mod r), the right still per partial (p*q*(r + 1)).
* separate: both matrices are rounded once (right slot
  (j*r + kk) mod p) and multiplied as plain integer matrices
  ((p + r)*q roundings).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .bitstream import dither_bit_prob, dither_params
from .rng import check_rng, substream
from .rounding import _check_k, coprime_stride
from .validation import check_matrix

__all__ = [
    "MATMUL_MODES",
    "MATMUL_VARIANTS",
    "QuantMatmulConfig",
    "matmul_exact",
    "frobenius_error",
    "matmul_quantized",
    "MatmulRecord",
    "MATMUL_CSV_HEADER",
    "run_matmul_experiment",
    "write_matmul_csv",
]

MATMUL_MODES = ("deterministic", "stochastic", "dither")
MATMUL_VARIANTS = ("per-partial", "input-once", "separate")

# cap on chunk cells (rows * r * q) to bound peak memory
_CHUNK_CELLS = 2_000_000


def matmul_exact(a, b) -> np.ndarray:
    a = check_matrix(a, "a")
    b = check_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def frobenius_error(approx, exact, relative: bool = False) -> float:
    """Frobenius norm of (approx - exact); optionally / ||exact||_F."""
    approx = check_matrix(approx, "approx")
    exact = check_matrix(exact, "exact")
    if approx.shape != exact.shape:
        raise ValueError(f"shapes differ: {approx.shape} vs {exact.shape}")
    err = float(np.linalg.norm(approx - exact))
    if not relative:
        return err
    denom = float(np.linalg.norm(exact))
    if denom == 0.0:
        raise ValueError("exact matrix has zero norm; relative error undefined")
    return err / denom


@dataclass(frozen=True)
class QuantMatmulConfig:
    """Settings for one quantized product."""

    k: int
    mode: str = "dither"
    variant: str = "per-partial"
    seed: int | None = None
    scale: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        _check_k(self.k)
        if self.mode not in MATMUL_MODES:
            raise ValueError(f"mode must be one of {MATMUL_MODES}, got {self.mode!r}")
        if self.variant not in MATMUL_VARIANTS:
            raise ValueError(
                f"variant must be one of {MATMUL_VARIANTS}, got {self.variant!r}"
            )
        lo, hi = self.scale
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError(f"scale must be (lo, hi) with lo < hi, got {self.scale!r}")


def _scaled(a, lo, s, grid_max):
    m = (a - lo) * s
    # tolerate float fuzz at the rim, reject genuine out-of-range entries
    if m.min() < -1e-6 * grid_max - 1e-9 or m.max() > grid_max * (1.0 + 1e-6) + 1e-9:
        raise ValueError(
            "matrix entries fall outside the configured scale range "
            f"[{lo}, {lo + grid_max / s}]"
        )
    return np.clip(m, 0.0, grid_max)


def _dither_tables(m, n_cycle):
    base = np.floor(m)
    n_sure, delta, low = dither_params(m - base, n_cycle)
    return base.astype(np.int64), n_sure, delta, low


def _dither_values(slots, schedule, tables, gen):
    """Integer dither roundings for an array of cycle slots.

    ``slots`` indexes the cycle; ``tables`` holds (base, n_sure, delta,
    low) broadcastable against it.
    """
    base, n_sure, delta, low = tables
    pos = schedule[slots]
    prob = dither_bit_prob(pos, n_sure, delta, low)
    bit = gen.random(prob.shape) < prob
    return base + bit


def _stochastic_values(m, shape, gen):
    base = np.floor(m)
    bit = gen.random(shape) < (m - base)
    return base.astype(np.int64) + bit


def matmul_quantized(a, b, config: QuantMatmulConfig, rng=None, return_info: bool = False):
    """Approximate a @ b through k-bit rounding of the scaled operands.

    ``rng`` overrides the stream derived from ``config.seed``; cycle
    rotations are drawn from it first, then rounding draws in stream
    order.  With ``return_info`` the result is ``(c, info)`` where
    ``info`` reports rounding_ops and the two cycle lengths.
    """
    a = check_matrix(a, "a")
    b = check_matrix(b, "b")
    p, q = a.shape
    q2, r = b.shape
    if q != q2:
        raise ValueError(f"inner dimensions differ: {a.shape} x {b.shape}")
    lo, hi = config.scale
    grid_max = 2**config.k - 1
    s = grid_max / (hi - lo)
    ma = _scaled(a, lo, s, grid_max)
    mb = _scaled(b, lo, s, grid_max)

    if rng is None:
        gen = substream(0 if config.seed is None else config.seed, 0)
    else:
        gen = check_rng(rng)

    n_left, n_right = r, p
    mode, variant = config.mode, config.variant
    if mode == "dither":
        sched_a = (np.arange(n_left, dtype=np.int64) + gen.integers(n_left)) % n_left
        sched_b = (
            gen.integers(n_right)
            + coprime_stride(n_right) * np.arange(n_right, dtype=np.int64)
        ) % n_right
        tab_a = _dither_tables(ma, n_left)
        tab_b = _dither_tables(mb, n_right)

    if mode == "deterministic":
        ra = np.clip(np.floor(ma + 0.5), 0, grid_max).astype(np.int64)
        rb = np.clip(np.floor(mb + 0.5), 0, grid_max).astype(np.int64)
        c_int = (ra @ rb).astype(np.float64)
        if variant == "per-partial":
            ops = 2 * p * q * r
        elif variant == "input-once":
            ops = p * q * (r + 1)
        else:
            ops = (p + r) * q
    elif variant == "separate":
        if mode == "stochastic":
            ra = _stochastic_values(ma, ma.shape, gen)
            rb = _stochastic_values(mb, mb.shape, gen)
        else:
            slots_a = (np.arange(p)[:, None] * q + np.arange(q)[None, :]) % n_left
            ra = _dither_values(slots_a, sched_a, tab_a, gen)
            slots_b = (np.arange(q)[:, None] * r + np.arange(r)[None, :]) % n_right
            rb = _dither_values(slots_b, sched_b, tab_b, gen)
        c_int = (ra @ rb).astype(np.float64)
        ops = (p + r) * q
    else:
        if variant == "input-once":
            if mode == "stochastic":
                ra2 = _stochastic_values(ma, ma.shape, gen)
            else:
                slots_a = (np.arange(p)[:, None] * q + np.arange(q)[None, :]) % n_left
                ra2 = _dither_values(slots_a, sched_a, tab_a, gen)
            ops = p * q * (r + 1)
        else:
            ops = 2 * p * q * r
        c_int = np.empty((p, r), dtype=np.float64)
        chunk = max(1, _CHUNK_CELLS // max(1, q * r))
        cols = np.arange(r, dtype=np.int64)
        inner = np.arange(q, dtype=np.int64)
        for i0 in range(0, p, chunk):
            i1 = min(i0 + chunk, p)
            rows = np.arange(i0, i1, dtype=np.int64)
            # stream slot of the (i, kk, j) scalar product
            t = (rows[:, None, None] * r + cols[None, :, None]) * q + inner[None, None, :]
            if variant == "per-partial":
                if mode == "stochastic":
                    va = _stochastic_values(
                        ma[i0:i1, None, :], (i1 - i0, r, q), gen
                    )
                else:
                    tab = tuple(x[i0:i1, None, :] for x in tab_a)
                    va = _dither_values(t % n_left, sched_a, tab, gen)
            else:
                va = ra2[i0:i1, None, :]
            if mode == "stochastic":
                vb = _stochastic_values(
                    mb.T[None, :, :], (i1 - i0, r, q), gen
                )
            else:
                tab = tuple(x.T[None, :, :] for x in tab_b)
                vb = _dither_values(t % n_right, sched_b, tab, gen)
            c_int[i0:i1] = np.einsum(
                "ikj,ikj->ik", va.astype(np.int64), vb.astype(np.int64)
            ).astype(np.float64)

    row_sums = ma.sum(axis=1)
    col_sums = mb.sum(axis=0)
    c = (
        c_int / (s * s)
        + (lo / s) * (row_sums[:, None] + col_sums[None, :])
        + q * lo * lo
    )
    if not return_info:
        return c
    info = {"rounding_ops": ops, "n_left": n_left, "n_right": n_right}
    return c, info


MATMUL_CSV_HEADER = "k,mode,variant,p,q,r,pairs,mean_ef,std_ef,rounding_ops,seed"


@dataclass(frozen=True)
class MatmulRecord:
    """Aggregated error of one (k, mode, variant) matmul setting."""

    k: int
    mode: str
    variant: str
    p: int
    q: int
    r: int
    pairs: int
    mean_ef: float
    std_ef: float
    rounding_ops: int
    seed: int

    def to_csv_row(self) -> list:
        return [
            self.k,
            self.mode,
            self.variant,
            self.p,
            self.q,
            self.r,
            self.pairs,
            repr(self.mean_ef),
            repr(self.std_ef),
            self.rounding_ops,
            self.seed,
        ]


def run_matmul_experiment(
    k_list,
    modes=MATMUL_MODES,
    variant: str = "per-partial",
    shape=(100, 100, 100),
    pairs: int = 10,
    seed: int = 0,
    entry_range=(0.0, 1.0),
    scale=(0.0, 1.0),
) -> list[MatmulRecord]:
    """Measure Frobenius error over random uniform operand pairs.

    Operand pairs are shared across every (k, mode) cell; rounding
    streams are per cell and per pair.
    """
    p, q, r = shape
    e_lo, e_hi = entry_range
    records = []
    mats = []
    for pair in range(pairs):
        pair_rng = substream(seed, 0, pair)
        a = e_lo + (e_hi - e_lo) * pair_rng.random((p, q))
        b = e_lo + (e_hi - e_lo) * pair_rng.random((q, r))
        mats.append((a, b, a @ b))
    for k in k_list:
        for mode in modes:
            cfg = QuantMatmulConfig(k=k, mode=mode, variant=variant, scale=scale)
            efs = np.empty(pairs)
            ops = 0
            for pair, (a, b, c_exact) in enumerate(mats):
                cell_rng = substream(seed, 1, pair, k, MATMUL_MODES.index(mode))
                c, info = matmul_quantized(a, b, cfg, rng=cell_rng, return_info=True)
                efs[pair] = frobenius_error(c, c_exact)
                ops = info["rounding_ops"]
            records.append(
                MatmulRecord(
                    k=k,
                    mode=mode,
                    variant=variant,
                    p=p,
                    q=q,
                    r=r,
                    pairs=pairs,
                    mean_ef=float(efs.mean()),
                    std_ef=float(efs.std(ddof=1)) if pairs > 1 else 0.0,
                    rounding_ops=ops,
                    seed=seed,
                )
            )
    return records


def write_matmul_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MATMUL_CSV_HEADER.split(","))
        for rec in records:
            writer.writerow(rec.to_csv_row())
