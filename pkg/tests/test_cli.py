import csv
import socket
import subprocess
import sys

import pytest

from deepmpc.cli import main

from conftest import MNIST_DIR, needs_mnist


def rows(path):
    lines = [l for l in open(path) if not l.startswith("#")]
    return list(csv.DictReader(lines))


def comments(path):
    return dict(l[2:].strip().split("=", 1) for l in open(path) if l.startswith("# "))


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("train", "microbench", "analyze"):
        assert cmd in out


def test_microbench_costs(capsys):
    assert main(["microbench", "--op", "mul", "--size", "100"]) == 0
    assert "bits=19200 rounds=1" in capsys.readouterr().out
    assert main(["microbench", "--op", "dot", "--size", "100"]) == 0
    assert "bits=192 rounds=1" in capsys.readouterr().out


def test_microbench_exp2_near_reference(capsys):
    assert main(["microbench", "--op", "exp2", "--size", "50"]) == 0
    per = float(capsys.readouterr().out.split("bits_per_instance=")[1])
    assert 0.5 * 16303 <= per <= 2 * 16303


def test_microbench_refuses_emulator(capsys):
    assert main(["microbench", "--op", "mul", "--mode", "emulate"]) == 2
    assert "does not communicate" in capsys.readouterr().err


def test_analyze_writes_csv(tmp_path, capsys):
    out = tmp_path / "p1.csv"
    assert main(["analyze", "--which", "prop1", "--trials", "500", "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("prop1: PASS")
    text = out.read_text()
    assert "# max_abs_z=" in text and "# witness_nearest_bias_in_se=" in text


@pytest.mark.parametrize("args", [
    ["--which", "prop1", "--m", "4", "--n", "4", "--p", "4", "--trials", "100"],
    ["--which", "prop2", "--m", "16", "--n", "16", "--p", "16", "--trials", "100"],
    ["--which", "prop3", "--m", "32", "--n", "32", "--p", "32", "--iota", "1", "--trials", "200"],
])
def test_analyze_smoke(args, capsys):
    assert main(["analyze"] + args) == 0
    assert "PASS" in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path, capsys):
    assert main(["train", "--batch-size", "100", "--data-dir", str(tmp_path)]) == 2
    assert main(["train", "--data-dir", str(tmp_path), "--epochs", "1"]) == 2
    assert "not found" in capsys.readouterr().err


@needs_mnist
def test_train_untrained_error(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["train", "--epochs", "0", "--test-limit", "500", "--data-dir", str(MNIST_DIR), "--metrics", str(out)]) == 0
    err = float(comments(out)["untrained_test_error"])
    assert 0.75 <= err <= 0.99
    assert rows(out) == []


@needs_mnist
def test_train_seeded_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.csv"
        args = ["train", "--epochs", "2", "--rounding", "prob", "--train-limit", "512", "--test-limit", "256",
                "--data-dir", str(MNIST_DIR), "--metrics", str(out), "--seed", "4"]
        assert main(args) == 0
        outs.append(rows(out))
    assert outs[0] == outs[1]
    assert list(outs[0][0]) == ["epoch", "loss", "test_error", "comm_bits", "rounds"]
    assert outs[0][0]["comm_bits"] == "0"


@needs_mnist
def test_train_loopback_three_parties(tmp_path):
    out = tmp_path / "m.csv"
    args = ["train", "--mode", "3pc", "--loopback", "--epochs", "1", "--train-limit", "256", "--test-limit", "128",
            "--data-dir", str(MNIST_DIR), "--metrics", str(out)]
    assert main(args) == 0
    r = rows(out)[0]
    assert int(r["comm_bits"]) > 0 and int(r["rounds"]) > 0
    assert 0.0 <= float(r["test_error"]) <= 1.0


def _free_ports(n):
    socks = [socket.socket() for _ in range(n)]
    for s in socks:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def test_microbench_over_tcp(tmp_path):
    hosts = tmp_path / "hosts"
    hosts.write_text("".join(f"{i} 127.0.0.1:{p}\n" for i, p in enumerate(_free_ports(3))))
    procs = [
        subprocess.Popen([sys.executable, "-m", "deepmpc", "microbench", "--op", "mul", "--size", "10",
                          "--party", str(i), "--hosts", str(hosts)], stdout=subprocess.PIPE, text=True)
        for i in range(3)
    ]
    outs = [p.communicate(timeout=60)[0] for p in procs]
    assert all(p.returncode == 0 for p in procs)
    # each party sends one 64-bit element per product
    assert all("bits=640 rounds=1" in o for o in outs)
