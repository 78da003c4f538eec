"""Training, cost measurement and rounding analysis entry points."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import neuralnet as nn
from . import roundlab
from . import secmath as sm
from .backend import Backend, EmulatorBackend, MPCBackend
from .data import Dataset, load_dataset
from .quantring import ConfigError, FixedConfig
from .transport import CommStats, Session, SessionConfig, parse_hosts, run_parties, setup_session

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "loss", "test_error", "comm_bits", "rounds")
# fields that legitimately differ between the three parties
LOCAL_FIELDS = ("party", "hosts", "metrics", "data_dir", "dump_model", "loopback")


@dataclass
class TrainConfig:
    model: str = "A"
    optimizer: str = "sgd"
    lr: float = 0.01
    batch_size: int = 128
    epochs: int = 15
    f: int = 16
    k: int = 31
    rounding: str = "prob"
    mode: str = "emulate"
    party: int | None = None
    hosts: str | None = None
    loopback: bool = False
    data_dir: str | None = None
    dataset: str = "mnist"
    metrics: str | None = None
    seed: int = 0
    dropout: bool = False
    init: str = "secure"
    train_limit: int | None = None
    test_limit: int | None = None
    dump_model: str | None = None

    def fixed(self) -> FixedConfig:
        ring_bits = 64 if 2 * self.k < 64 else 128
        if ring_bits != 64 and self.mode != "emulate":
            raise ConfigError("k >= 32 needs the 128-bit ring, which only the emulator supports")
        return FixedConfig(self.f, self.k, ring_bits)

    def fingerprint(self) -> str:
        d = {k: v for k, v in asdict(self).items() if k not in LOCAL_FIELDS}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass
class TrainResult:
    rows: list[dict] = field(default_factory=list)
    initial_error: float | None = None
    comm: CommStats = field(default_factory=CommStats)

    @property
    def final_error(self) -> float | None:
        return self.rows[-1]["test_error"] if self.rows else self.initial_error


def _check_consistent(session: Session, cfg: TrainConfig) -> None:
    """Compare configuration fingerprints with both neighbours."""
    h = bytes.fromhex(cfg.fingerprint())
    got_prev, got_next = session.exchange_both(h, len(h), h, len(h))
    if got_prev != h or got_next != h:
        raise ConfigError(f"party {session.my_id}: configuration differs from a peer")


def _broadcast_ints(be: Backend, values, n: int) -> np.ndarray:
    """Publish ``n`` small non-negative integers known to party 0."""
    raw = np.asarray(values, dtype=np.uint64) if be.holds_input(0) else None
    return be.open(be.input(0, raw, (n,))).astype(np.int64)


def _evaluate(be: Backend, model: nn.Sequential, test: Dataset | None, n_test: int, batch: int) -> float:
    """Misclassification rate from opened logits; labels stay with party 0."""
    wrong = 0
    for s in range(0, n_test, batch):
        e = min(s + batch, n_test)
        shape = (e - s,) + model.in_shape
        x = be.input_fixed(0, test.images[s:e] if be.holds_input(0) else None, shape)
        logits = be.reveal(model.forward(be, x, train=False))
        if be.holds_input(0):
            wrong += int((logits.argmax(axis=1) != test.labels[s:e]).sum())
    counts = _broadcast_ints(be, [wrong], 1)
    return int(counts[0]) / max(n_test, 1)


def train_party(be: Backend, cfg: TrainConfig, train: Dataset | None, test: Dataset | None) -> TrainResult:
    """The training loop as run by one party (or the emulator)."""
    sizes = _broadcast_ints(be, [len(train), len(test)] if be.holds_input(0) else None, 2)
    n_train, n_test = int(sizes[0]), int(sizes[1])
    model = nn.build_model(cfg.model, cfg.dropout)
    model.init_params(be, cfg.init, cfg.seed)
    opt = nn.Optimizer(cfg.optimizer, cfg.lr, cfg.batch_size)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult()
    B = cfg.batch_size
    steps = n_train // B
    if cfg.epochs == 0:
        result.initial_error = _evaluate(be, model, test, n_test, B)
    for epoch in range(1, cfg.epochs + 1):
        t0, c0 = time.time(), be.comm()
        perm = nn.shuffle_epoch(rng, n_train)
        losses = []
        for s in range(steps):
            idx = perm[s * B:(s + 1) * B]
            own = be.holds_input(0)
            x = be.input_fixed(0, train.images[idx] if own else None, (B,) + model.in_shape)
            y = be.input_fixed(0, train.onehot(idx) if own else None, (B, 10))
            logits = model.forward(be, x, train=True)
            grad, loss = nn.softmax_xent_grad(be, logits, y)
            model.backward(be, grad)
            model.step(be, opt)
            losses.append(float(be.reveal(loss).mean()))
            if s % 50 == 0:
                log.info("epoch %d step %d/%d loss %.4f", epoch, s, steps, losses[-1])
        err = _evaluate(be, model, test, n_test, B)
        c = be.comm() - c0
        row = {
            "epoch": epoch,
            "loss": float(np.mean(losses)) if losses else float("nan"),
            "test_error": err,
            "comm_bits": c.bits_sent,
            "rounds": c.rounds,
            "seconds": round(time.time() - t0, 2),
        }
        log.info("epoch %d loss %.4f test_error %.4f", epoch, row["loss"], err)
        result.rows.append(row)
    result.comm = be.comm()
    if cfg.dump_model:
        params = {k: be.reveal(v) for k, v in model.named_params().items()}
        if be.holds_input(0) or isinstance(be, EmulatorBackend):
            np.savez(cfg.dump_model, **params)
    return result


def write_metrics(path, cfg: TrainConfig, result: TrainResult) -> None:
    with open(path, "w") as fh:
        for key, v in asdict(cfg).items():
            fh.write(f"# {key}={v}\n")
        if result.initial_error is not None:
            fh.write(f"# untrained_test_error={result.initial_error}\n")
        fh.write(",".join(METRIC_COLUMNS) + "\n")
        for r in result.rows:
            fh.write(",".join(str(r[c]) for c in METRIC_COLUMNS) + "\n")


def _load(cfg: TrainConfig):
    train, test = load_dataset(cfg.dataset, cfg.data_dir)
    if cfg.train_limit is not None:
        train = train.subset(cfg.train_limit)
    if cfg.test_limit is not None:
        test = test.subset(cfg.test_limit)
    return train, test


def _validate(cfg: TrainConfig) -> None:
    if cfg.epochs < 0:
        raise ConfigError("epochs must be non-negative")
    if cfg.mode not in ("emulate", "3pc", "mpc3"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.init not in ("secure", "clear"):
        raise ConfigError(f"unknown init {cfg.init!r}")
    nn.Optimizer(cfg.optimizer, cfg.lr, cfg.batch_size)
    nn.build_model(cfg.model, cfg.dropout)


def run_train(cfg: TrainConfig) -> TrainResult:
    """Train as configured and write the metrics CSV if a path is given.

    In 3pc mode with ``loopback`` all parties run as threads of this
    process; otherwise this process is party ``cfg.party`` and connects to
    its peers from the hosts file.  Only party 0 needs the dataset.
    """
    _validate(cfg)
    fx = cfg.fixed()
    if cfg.mode == "emulate":
        train, test = _load(cfg)
        result = train_party(EmulatorBackend(fx, cfg.rounding, cfg.seed), cfg, train, test)
    elif cfg.loopback:
        train, test = _load(cfg)

        def party(session):
            _check_consistent(session, cfg)
            be = MPCBackend(session, fx, cfg.rounding, cfg.seed)
            own = be.holds_input(0)
            return train_party(be, cfg, train if own else None, test if own else None)

        results = run_parties(party, session_seed=cfg.seed.to_bytes(32, "little"))
        result = results[0]
        result.comm = CommStats(sum(r.comm.bits_sent for r in results), max(r.comm.rounds for r in results))
    else:
        if cfg.party is None or cfg.hosts is None:
            raise ConfigError("3pc mode needs --party and --hosts (or --loopback)")
        train = test = None
        if cfg.party == 0:
            train, test = _load(cfg)
        session = setup_session(SessionConfig(cfg.party, parse_hosts(cfg.hosts)))
        try:
            _check_consistent(session, cfg)
            be = MPCBackend(session, fx, cfg.rounding, cfg.seed)
            result = train_party(be, cfg, train, test)
        finally:
            session.close()
    if cfg.metrics:
        write_metrics(cfg.metrics, cfg, result)
    return result


# ----------------------------------------------------------------------
# cost measurement

MICROBENCH_OPS = ("mul", "dot", "trunc", "ltz", "exp2", "invsqrt", "div", "log2")


@dataclass
class CostReport:
    op: str
    size: int
    bits: int
    rounds: int

    @property
    def bits_per_instance(self) -> float:
        return self.bits / self.size if self.op != "dot" else float(self.bits)

    def line(self) -> str:
        return f"{self.op} size={self.size} bits={self.bits} rounds={self.rounds} bits_per_instance={self.bits_per_instance:.1f}"


def _bench_inputs(op: str, size: int, rng):
    if op in ("exp2",):
        return rng.uniform(-8, 8, size), None
    if op in ("invsqrt", "log2"):
        return rng.uniform(0.01, 100, size), None
    if op == "div":
        return rng.uniform(-10, 10, size), rng.uniform(0.5, 50, size)
    return rng.uniform(-10, 10, size), rng.uniform(-10, 10, size)


def _bench_party(session: Session, op: str, size: int, seed: int) -> CommStats:
    cfg = FixedConfig()
    be = MPCBackend(session, cfg, "prob", seed)
    a, b = _bench_inputs(op, size, np.random.default_rng(seed))
    own = be.holds_input(0)
    x = be.input_fixed(0, a if own else None, (size,))
    y = be.input_fixed(0, b if own else None, (size,)) if b is not None else None
    start = be.comm()
    if op == "mul":
        be.mul(x, y)
    elif op == "dot":
        be.dot(x, y)
    elif op == "trunc":
        sm.trunc(be, x << cfg.f, cfg.k + cfg.f, cfg.f)
    elif op == "ltz":
        sm.ltz(be, x)
    elif op == "exp2":
        sm.exp2(be, x)
    elif op == "invsqrt":
        sm.invert_sqrt(be, x)
    elif op == "div":
        sm.div(be, x, y)
    elif op == "log2":
        sm.log2(be, x)
    return be.comm() - start


def run_microbench(op: str, size: int = 1000, mode: str = "3pc", seed: int = 0,
                   party: int | None = None, hosts: str | None = None) -> CostReport:
    """Payload bits (summed over parties) and rounds of one call on ``size`` elements."""
    if mode == "emulate":
        raise ConfigError("the emulator does not communicate; run microbench in 3pc mode")
    if op not in MICROBENCH_OPS:
        raise ConfigError(f"unknown op {op!r}; choose from {MICROBENCH_OPS}")
    if size < 1:
        raise ConfigError("size must be positive")
    if party is None:
        stats = run_parties(_bench_party, op, size, seed)
        return CostReport(op, size, sum(s.bits_sent for s in stats), max(s.rounds for s in stats))
    session = setup_session(SessionConfig(party, parse_hosts(hosts)))
    try:
        s = _bench_party(session, op, size, seed)
    finally:
        session.close()
    # over TCP each process sees only its own traffic
    return CostReport(op, size, s.bits_sent, s.rounds)


def run_analyze(setup: roundlab.RoundingExperiment, which: str, out: str | Path | None = None) -> roundlab.RoundingReport:
    report = roundlab.run_rounding_experiment(setup, which)
    if which == "prop1":
        report.summary.update({f"witness_{k}": v for k, v in roundlab.nearest_bias_witness().items()})
    if out:
        report.to_csv(out)
    return report
