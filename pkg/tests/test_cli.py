import os

import numpy as np
import pytest

from dithercomp import cli
from dithercomp.linalg import MATMUL_CSV_HEADER
from dithercomp.nn import MNIST_CSV_HEADER
from dithercomp.stats import STATS_CSV_HEADER

from conftest import write_idx_images


def run(argv):
    return cli.main(argv)


def test_no_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        run([])
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        run(["repr-sweep", "--scheme", "psychic"])
    assert exc.value.code == cli.EXIT_USAGE


@pytest.mark.parametrize("name", ["repr-sweep", "mult-sweep", "add-sweep"])
def test_sweeps_write_csv_and_rerun_identically(name, tmp_path, capsys):
    out = os.path.join(tmp_path, "s.csv")
    argv = [name, "--N", "16", "64", "--pairs", "40", "--trials", "40",
            "--seed", "5", "--out", out]
    assert run(argv) == cli.EXIT_OK
    first = open(out, "rb").read()
    lines = first.decode().splitlines()
    assert lines[0] == STATS_CSV_HEADER
    assert len(lines) == 1 + 3 * 2  # three families, two N values
    assert run(argv) == cli.EXIT_OK
    assert open(out, "rb").read() == first


def test_sweep_scheme_subset(tmp_path):
    out = os.path.join(tmp_path, "s.csv")
    assert run(["repr-sweep", "--scheme", "dither", "--N", "16", "--pairs", "20",
                "--trials", "20", "--out", out]) == cli.EXIT_OK
    rows = open(out).read().splitlines()[1:]
    assert len(rows) == 1 and rows[0].startswith("dither,represent,16,")


def test_matmul_bench(tmp_path):
    out = os.path.join(tmp_path, "m.csv")
    argv = ["matmul-bench", "--k", "1", "2", "--mode", "deterministic", "dither",
            "--pairs", "3", "--size", "8", "8", "8", "--seed", "4", "--out", out]
    assert run(argv) == cli.EXIT_OK
    first = open(out, "rb").read()
    lines = first.decode().splitlines()
    assert lines[0] == MATMUL_CSV_HEADER
    assert len(lines) == 1 + 2 * 2
    assert run(argv) == cli.EXIT_OK
    assert open(out, "rb").read() == first


def test_mnist_train_and_eval(tmp_path, synth_mnist):
    weights = os.path.join(tmp_path, "w.bin")
    argv = ["mnist-train", "--mnist-dir", synth_mnist, "--epochs", "4",
            "--seed", "0", "--out", weights]
    assert run(argv) == cli.EXIT_OK
    first = open(weights, "rb").read()
    assert first[:4] == b"DCWB"
    assert run(argv) == cli.EXIT_OK
    assert open(weights, "rb").read() == first

    out = os.path.join(tmp_path, "acc.csv")
    ev = ["mnist-eval", "--weights", weights, "--mnist-dir", synth_mnist,
          "--k", "2", "--mode", "deterministic", "dither", "--trials", "2",
          "--seed", "1", "--out", out]
    assert run(ev) == cli.EXIT_OK
    blob = open(out, "rb").read()
    lines = blob.decode().splitlines()
    assert lines[0] == MNIST_CSV_HEADER
    assert lines[1].startswith("0,full-precision,none,1,")
    assert len(lines) == 4
    assert run(ev) == cli.EXIT_OK
    assert open(out, "rb").read() == blob


def test_mnist_train_text_format(tmp_path, synth_mnist):
    weights = os.path.join(tmp_path, "w.txt")
    assert run(["mnist-train", "--mnist-dir", synth_mnist, "--epochs", "2",
                "--text", "--out", weights]) == cli.EXIT_OK
    assert "softmax" in open(weights).read()


def test_missing_mnist_dir_is_ingest_error(tmp_path):
    assert run(["mnist-train", "--mnist-dir", os.path.join(tmp_path, "nope"),
                "--epochs", "1", "--out", os.path.join(tmp_path, "w")]) == cli.EXIT_INGEST


def test_corrupt_idx_is_ingest_error(tmp_path):
    d = os.path.join(tmp_path, "mn")
    os.makedirs(d)
    for stem in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                 "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"):
        open(os.path.join(d, stem), "wb").write(b"\x00\x00\x07\x01garbage")
    assert run(["mnist-train", "--mnist-dir", d, "--epochs", "1",
                "--out", os.path.join(tmp_path, "w")]) == cli.EXIT_INGEST


def test_unwritable_out_is_io_error(tmp_path, synth_mnist):
    out = os.path.join(tmp_path, "no", "such", "dir", "s.csv")
    assert run(["repr-sweep", "--N", "16", "--pairs", "5", "--trials", "5",
                "--out", out]) == cli.EXIT_IO


def test_bad_config_value(tmp_path):
    assert run(["matmul-bench", "--k", "99", "--pairs", "1", "--size",
                "4", "4", "4", "--out", os.path.join(tmp_path, "m.csv")]) == cli.EXIT_CONFIG
    assert run(["repr-sweep", "--N", "0", "--pairs", "5", "--trials", "5",
                "--out", os.path.join(tmp_path, "s.csv")]) == cli.EXIT_CONFIG


def test_eval_missing_weights_is_ingest_error(tmp_path, synth_mnist):
    assert run(["mnist-eval", "--weights", os.path.join(tmp_path, "absent"),
                "--mnist-dir", synth_mnist, "--k", "1", "--trials", "1",
                "--out", os.path.join(tmp_path, "a.csv")]) == cli.EXIT_INGEST


def test_selftest_passes(capsys):
    assert run(["selftest"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "ok" in out.lower()


def test_env_seed_honored(tmp_path, monkeypatch):
    out_a = os.path.join(tmp_path, "a.csv")
    out_b = os.path.join(tmp_path, "b.csv")
    out_c = os.path.join(tmp_path, "c.csv")
    argv = ["repr-sweep", "--scheme", "stochastic", "--N", "16",
            "--pairs", "10", "--trials", "10"]
    monkeypatch.setenv("DITHERCOMP_SEED", "11")
    assert run(argv + ["--out", out_a]) == cli.EXIT_OK
    monkeypatch.delenv("DITHERCOMP_SEED")
    assert run(argv + ["--seed", "11", "--out", out_b]) == cli.EXIT_OK
    assert run(argv + ["--seed", "12", "--out", out_c]) == cli.EXIT_OK
    assert open(out_a).read() == open(out_b).read()
    assert open(out_a).read() != open(out_c).read()


def test_ci_preset_fills_defaults(tmp_path):
    out = os.path.join(tmp_path, "p.csv")
    assert run(["repr-sweep", "--preset", "ci", "--scheme", "deterministic",
                "--out", out]) == cli.EXIT_OK
    rows = open(out).read().splitlines()[1:]
    ns = [int(r.split(",")[2]) for r in rows]
    assert ns == [16, 64, 256, 1024]
    assert all(r.split(",")[3] == "200" for r in rows)


def test_flag_overrides_preset(tmp_path):
    out = os.path.join(tmp_path, "p.csv")
    assert run(["repr-sweep", "--preset", "ci", "--scheme", "deterministic",
                "--N", "32", "--out", out]) == cli.EXIT_OK
    rows = open(out).read().splitlines()[1:]
    assert len(rows) == 1 and rows[0].split(",")[2] == "32"
