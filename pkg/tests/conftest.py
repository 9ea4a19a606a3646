"""Shared fixtures: synthetic IDX datasets and the acceptance summary.

Acceptance tests register one line each through ``report``; the
terminal summary prints them after the run so every criterion shows a
single PASS/FAIL/SKIP line regardless of capture settings.
"""

import gzip
import os
import struct

import numpy as np
import pytest

from dithercomp.rng import substream

ACCEPTANCE_RESULTS = []


def report(criterion: str, status: str, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((criterion, status, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{criterion}] {status} {detail}")


def write_idx_images(path, arr, gz=False):
    blob = (
        struct.pack(">HBB", 0, 8, 3)
        + struct.pack(">III", *arr.shape)
        + arr.astype(np.uint8).tobytes()
    )
    opener = gzip.open if gz else open
    with opener(path, "wb") as fh:
        fh.write(blob)


def write_idx_labels(path, arr, gz=False):
    blob = (
        struct.pack(">HBB", 0, 8, 1)
        + struct.pack(">I", len(arr))
        + arr.astype(np.uint8).tobytes()
    )
    opener = gzip.open if gz else open
    with opener(path, "wb") as fh:
        fh.write(blob)


def _make_split(templates, n, rng):
    labels = rng.integers(0, 10, n)
    imgs = templates[labels] * 200 + rng.integers(0, 56, (n, 28, 28))
    return np.clip(imgs, 0, 255).astype(np.uint8), labels


@pytest.fixture(scope="session")
def synth_mnist(tmp_path_factory):
    """Directory holding a linearly separable 10-class IDX dataset.

    Standard MNIST file names, train split raw and test split gzipped,
    so both code paths get exercised.
    """
    directory = tmp_path_factory.mktemp("idx")
    templates = (substream(100, 0).random((10, 28, 28)) > 0.72).astype(np.float64)
    ti, tl = _make_split(templates, 800, substream(100, 1))
    vi, vl = _make_split(templates, 400, substream(100, 2))
    write_idx_images(os.path.join(directory, "train-images-idx3-ubyte"), ti)
    write_idx_labels(os.path.join(directory, "train-labels-idx1-ubyte"), tl)
    write_idx_images(os.path.join(directory, "t10k-images-idx3-ubyte.gz"), vi, gz=True)
    write_idx_labels(os.path.join(directory, "t10k-labels-idx1-ubyte.gz"), vl, gz=True)
    return str(directory)
