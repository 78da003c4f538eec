"""Empirical checks of probabilistic rounding in quantized matrix products.

The rounded product is R(AB) = sum_l R(A_il B_lj), each term rounded on its
own: floor(mu) plus a Bernoulli bit with mean frac(mu), mu = Q(a) Q(b) 2^-f.
Three properties are measured over many seeded trials:

* ``prop1``: each entry's mean equals 2^-f Q(A) Q(B) (unbiasedness).
* ``prop2``: ||R(AB) - 2^f AB||_F < sqrt(mp) n (2^k + 1 + eps/4) when
  every entry is bounded by 2^k (holds with certainty).
* ``prop3``: ||R(AB) - E||_F <= iota sqrt(mnp) with probability at least
  1 - 1/(4 iota^2).

Everything runs on cleartext integers; ``mpc_prop1_spotcheck`` repeats the
first experiment through the three-party protocol.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .quantring import FixedConfig

PROPS = ("prop1", "prop2", "prop3")


@dataclass
class RoundingExperiment:
    m: int = 8
    n: int = 8
    p: int = 8
    k_bound: int = 4
    iota: float = 1.0
    trials: int = 1000
    seed: int = 0
    f: int = 16

    def __post_init__(self):
        if min(self.m, self.n, self.p) < 1:
            raise ValueError("matrix dimensions must be at least 1")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.iota <= 0:
            raise ValueError("iota must be positive")
        # products of two encoded entries must fit comfortably in int64
        if 2 * (self.k_bound + self.f) + math.ceil(math.log2(self.n)) + 1 > 62:
            raise ValueError("k_bound + f too large for exact int64 products")


@dataclass
class RoundingReport:
    which: str
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    passed: bool = False

    def to_csv(self, path) -> None:
        cols = list(self.rows[0]) if self.rows else ["trial", "deviation"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols + ["pass"])
            for r in self.rows:
                w.writerow([r[c] for c in cols] + [""])
            w.writerow(["summary"] + [""] * (len(cols) - 1) + [int(self.passed)])
            for key, v in self.summary.items():
                w.writerow([f"# {key}={v}"])


def quantize(x: np.ndarray, f: int) -> np.ndarray:
    return np.floor(x * (1 << f) + 0.5).astype(np.int64)


def _entries(rng, shape, k_bound: int) -> np.ndarray:
    hi = float(2 ** k_bound)
    return rng.uniform(-hi, hi, size=shape)


def rounded_products(qa, qb, f, rng, trials: int, mode: str = "prob") -> np.ndarray:
    """R(AB) for ``trials`` independent roundings; shape (trials, m, p)."""
    prod = qa[:, :, None] * qb[None, :, :]
    floor = prod >> f
    frac = prod & ((1 << f) - 1)
    if mode == "nearest":
        near = (prod + (1 << (f - 1))) >> f
        return np.broadcast_to(near.sum(axis=1), (trials,) + near.sum(axis=1).shape)
    u = rng.integers(0, 1 << f, size=(trials,) + prod.shape, dtype=np.int64)
    return (floor[None] + (u < frac[None])).sum(axis=2)


def _chunks(total: int, size: int):
    done = 0
    while done < total:
        yield min(size, total - done)
        done += size


def _prop1(setup: RoundingExperiment, rng) -> RoundingReport:
    f = setup.f
    qa = quantize(_entries(rng, (setup.m, setup.n), setup.k_bound), f)
    qb = quantize(_entries(rng, (setup.n, setup.p), setup.k_bound), f)
    expect = (qa @ qb) / float(1 << f)
    chunk = max(1, 2_000_000 // (setup.m * setup.n * setup.p))
    s1 = np.zeros(expect.shape)
    s2 = np.zeros(expect.shape)
    rows = []
    t = 0
    for c in _chunks(setup.trials, chunk):
        r = rounded_products(qa, qb, f, rng, c)
        dev = r - expect[None]
        s1 += dev.sum(axis=0)
        s2 += (dev ** 2).sum(axis=0)
        for d in np.sqrt((dev ** 2).sum(axis=(1, 2))):
            rows.append({"trial": t, "deviation": float(d)})
            t += 1
    T = setup.trials
    mean_dev = s1 / T
    var = np.maximum(s2 / T - mean_dev ** 2, 0.0) * T / max(T - 1, 1)
    se = np.sqrt(var / T)
    z = np.where(se > 0, np.abs(mean_dev) / np.where(se > 0, se, 1), np.where(mean_dev == 0, 0.0, np.inf))
    summary = {"max_abs_z": float(z.max()), "max_abs_mean_dev": float(np.abs(mean_dev).max()), "entries": z.size}
    return RoundingReport("prop1", rows, summary, bool(z.max() <= 4.0))


def nearest_bias_witness(setup: RoundingExperiment | None = None) -> dict:
    """Instance where every product has fractional part 1/4.

    Nearest rounding drops all of them, so its deviation from the exact
    mean is -n/4 per entry; probabilistic rounding should show no bias.
    Returns both mean deviations expressed in standard errors of the
    probabilistic estimate.
    """
    setup = setup or RoundingExperiment(trials=10_000)
    f = setup.f
    rng = np.random.default_rng(setup.seed)
    qa = 4 * rng.integers(0, 8, size=(setup.m, setup.n)) + 1
    qb = (4 * rng.integers(0, 8, size=(setup.n, setup.p)) + 1) << (f - 2)
    expect = (qa @ qb) / float(1 << f)
    probs = rounded_products(qa, qb, f, rng, setup.trials)
    near = rounded_products(qa, qb, f, rng, 1, "nearest")[0]
    dev_prob = (probs - expect[None]).mean(axis=0)
    sd = (probs - expect[None]).std(axis=0, ddof=1)
    se = float(np.mean(sd)) / math.sqrt(setup.trials)
    bias_near = float((near - expect).mean())
    bias_prob = float(dev_prob.mean())
    # the entry-averaged probabilistic deviation has standard error se / sqrt(mp)
    se_avg = se / math.sqrt(expect.size)
    return {
        "nearest_bias": bias_near,
        "prob_bias": bias_prob,
        "standard_error": se_avg,
        "nearest_bias_in_se": abs(bias_near) / se_avg,
        "prob_bias_in_se": abs(bias_prob) / se_avg,
    }


def prop2_bound(setup: RoundingExperiment) -> float:
    eps = 2.0 ** -setup.f
    return math.sqrt(setup.m * setup.p) * setup.n * (2 ** setup.k_bound + 1 + eps / 4)


def _prop2(setup: RoundingExperiment, rng) -> RoundingReport:
    f = setup.f
    bound = prop2_bound(setup)
    rows, worst, violations = [], 0.0, 0
    for t in range(setup.trials):
        a = _entries(rng, (setup.m, setup.n), setup.k_bound)
        b = _entries(rng, (setup.n, setup.p), setup.k_bound)
        r = rounded_products(quantize(a, f), quantize(b, f), f, rng, 1)[0]
        dev = float(np.linalg.norm(r - (a @ b) * (1 << f)))
        worst = max(worst, dev)
        violations += dev >= bound
        rows.append({"trial": t, "deviation": dev, "bound": bound})
    summary = {"bound": bound, "max_deviation": worst, "margin": bound - worst, "violations": violations}
    return RoundingReport("prop2", rows, summary, violations == 0)


def prop3_ceiling(setup: RoundingExperiment) -> float:
    """Allowed violation fraction: 1/(4 iota^2) plus three binomial sigmas."""
    q = min(1.0, 1.0 / (4 * setup.iota ** 2))
    return q + 3 * math.sqrt(q * (1 - q) / setup.trials)


def _prop3(setup: RoundingExperiment, rng) -> RoundingReport:
    f = setup.f
    qa = quantize(_entries(rng, (setup.m, setup.n), setup.k_bound), f)
    qb = quantize(_entries(rng, (setup.n, setup.p), setup.k_bound), f)
    expect = (qa @ qb) / float(1 << f)
    radius = setup.iota * math.sqrt(setup.m * setup.n * setup.p)
    chunk = max(1, 2_000_000 // (setup.m * setup.n * setup.p))
    rows, hits, t = [], 0, 0
    for c in _chunks(setup.trials, chunk):
        r = rounded_products(qa, qb, f, rng, c)
        for d in np.sqrt(((r - expect[None]) ** 2).sum(axis=(1, 2))):
            over = bool(d > radius)
            hits += over
            rows.append({"trial": t, "deviation": float(d), "exceeds": int(over)})
            t += 1
    frac = hits / setup.trials
    ceiling = prop3_ceiling(setup)
    summary = {"radius": radius, "violation_fraction": frac, "ceiling": ceiling}
    return RoundingReport("prop3", rows, summary, frac <= ceiling)


def run_rounding_experiment(setup: RoundingExperiment, which: str) -> RoundingReport:
    rng = np.random.default_rng(setup.seed)
    if which == "prop1":
        return _prop1(setup, rng)
    if which == "prop2":
        return _prop2(setup, rng)
    if which == "prop3":
        return _prop3(setup, rng)
    raise ValueError(f"unknown experiment {which!r}; choose from {PROPS}")


def mpc_prop1_spotcheck(trials: int = 200, seed: int = 0, size: int = 8) -> dict:
    """Per-product probabilistic rounding of one 8x8x8 product under the
    three-party protocol, repeated ``trials`` times in one batch."""
    from .backend import MPCBackend
    from .secmath import trunc
    from .transport import run_parties

    cfg = FixedConfig()
    rng = np.random.default_rng(seed)
    qa = quantize(_entries(rng, (size, size), 2), cfg.f)
    qb = quantize(_entries(rng, (size, size), 2), cfg.f)
    expect = (qa @ qb) / float(1 << cfg.f)

    def party(session):
        be = MPCBackend(session, cfg, "prob", seed)
        a = be.input(0, qa.astype(np.uint64) if be.holds_input(0) else None, qa.shape)
        b = be.input(1, qb.astype(np.uint64) if be.holds_input(1) else None, qb.shape)
        shape = (trials, size, size, size)
        pa = a.expand_dims(2).expand_dims(0).broadcast_to(shape)
        pb = b.expand_dims(0).expand_dims(0).broadcast_to(shape)
        prods = be.mul(pa, pb)
        r = trunc(be, prods, cfg.k + cfg.f, cfg.f, "prob").sum(axis=2)
        return be.ring.signed(be.open(r)).astype(np.float64)

    r = run_parties(party, session_seed=seed.to_bytes(32, "little"))[0]
    dev = r - expect[None]
    se = dev.std(axis=0, ddof=1) / math.sqrt(trials)
    mean_dev = dev.mean(axis=0)
    z = np.where(se > 0, np.abs(mean_dev) / np.where(se > 0, se, 1), 0.0)
    return {"max_abs_z": float(z.max()), "passed": bool(z.max() <= 4.0), "trials": trials}


def summary_line(report: RoundingReport) -> str:
    body = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in report.summary.items())
    return f"{report.which}: {'PASS' if report.passed else 'FAIL'} ({body})"


def spec_dict(setup: RoundingExperiment) -> dict:
    return asdict(setup)
