"""Monte-Carlo BER / IUI / MSE evaluation and the exhaustive-search oracle.

Trial ``i`` of a sweep draws everything from its own generator seeded by
``SeedSequence(seed, spawn_key=(i,))``. The stream does not depend on the sweep
value or on scheduling, so every sweep point sees the same channels, symbols
and noise (common random numbers) and the output is identical for any number
of worker threads.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import (IllConditionedChannel, SystemConfig, apply_channel, check_conditioning,
                      perturb_channel, precoding_factor_beta, sample_channel)
from .constellation import Constellation, FiniteAlphabet, modulate, demodulate
from .precoders import Ide2Config, ide2, pgd_reference, zf_precode, zf_quantized
from . import unfolded

PRECODERS = ("zf", "zf-quant", "ide2", "pgd", "ide2-net")
SWEEP_KINDS = ("snr", "layers", "epsilon")
CSV_COLUMNS = ("sweep_value", "ber", "stderr", "mse_mean", "iui_mean", "bits_total", "trials_discarded")


@dataclass(frozen=True)
class PrecoderSpec:
    name: str = "ide2"
    t_max: int = 20
    alpha: float = 0.95
    gamma: float = 1.0
    lam: float = 0.01
    # trained networks keyed by layer count, for "ide2-net"
    params: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.name not in PRECODERS:
            raise ValueError(f"unknown precoder {self.name!r}; choose from {PRECODERS}")

    def with_layers(self, t: int) -> "PrecoderSpec":
        return replace(self, t_max=int(t))

    def network(self) -> unfolded.Ide2NetParams:
        try:
            return self.params[self.t_max]
        except KeyError:
            raise ValueError(f"no trained ide2-net parameters for T={self.t_max} "
                             f"(have {sorted(self.params)})") from None

    def describe(self) -> dict:
        d = {"name": self.name}
        if self.name in ("ide2", "pgd", "ide2-net"):
            d["t_max"] = self.t_max
        if self.name == "ide2":
            d.update(alpha=self.alpha, gamma=self.gamma)
        if self.name == "pgd":
            d["lam"] = self.lam
        if self.name == "ide2-net":
            d["params"] = {str(t): {"gamma": p.gamma.tolist(), "alpha": p.alpha.tolist()}
                           for t, p in sorted(self.params.items())}
        return d


def precode(spec: PrecoderSpec, h: np.ndarray, s: np.ndarray, p_t: float, a: FiniteAlphabet):
    """Transmit vector and precoding factor for the channel known at the BS."""
    if spec.name == "zf":
        r = zf_precode(h, s, p_t)
        return r.x, r.beta
    if spec.name == "zf-quant":
        r = zf_quantized(h, s, p_t, a)
        return r.x, r.beta
    beta = precoding_factor_beta(h, p_t)
    h_tilde = beta * h
    if spec.name == "ide2":
        return ide2(h_tilde, s, a, Ide2Config(spec.t_max, spec.alpha, spec.gamma)).x, beta
    if spec.name == "pgd":
        return pgd_reference(h_tilde, s, a, spec.lam, spec.t_max).x, beta
    x_out, _ = unfolded.forward(spec.network(), s, h_tilde, a)
    return x_out, beta


@dataclass
class TrialOutcome:
    bit_errors: int
    bits: int
    mse: float
    iui: float
    noise_term: float


def run_trial(sys: SystemConfig, precoder: PrecoderSpec, a: FiniteAlphabet, c: Constellation,
              rng: np.random.Generator, epsilon: float = 0.0) -> TrialOutcome:
    """One channel use: draw, precode on the estimated channel, transmit, detect.

    Draw order is channel, bits, noise, then the CSI error, so changing
    ``epsilon`` leaves the other draws untouched. Raises
    :class:`IllConditionedChannel` when the estimate is unusable.
    """
    h = sample_channel(sys, rng)
    bits = rng.integers(0, 2, size=(sys.n_users, c.bits_per_symbol), dtype=np.uint8)
    s = modulate(bits, c)
    noise_rng = np.random.default_rng(rng.integers(2 ** 63))
    h_est = perturb_channel(h, epsilon, rng)
    check_conditioning(h_est)
    x, beta = precode(precoder, h_est, s, sys.p_t, a)
    sigma2 = sys.sigma2
    y = apply_channel(h, x, sigma2, noise_rng)
    s_hat = beta * y
    errors = int(np.count_nonzero(demodulate(s_hat, c) != bits))
    iui = float(np.sum(np.abs(s - beta * (h @ x)) ** 2))
    mse = float(np.sum(np.abs(s - s_hat) ** 2))
    return TrialOutcome(errors, bits.size, mse, iui, beta ** 2 * sys.n_users * sigma2)


@dataclass
class BerResult:
    sweep_value: float
    bit_errors: int
    bits_total: int
    mse_mean: float
    iui_mean: float
    noise_term_mean: float
    trials: int
    trials_discarded: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else float("nan")

    @property
    def stderr(self) -> float:
        p = self.ber
        return float(np.sqrt(p * (1 - p) / self.bits_total)) if self.bits_total else float("nan")


@dataclass
class SweepSpec:
    kind: str
    values: list
    trials_per_point: int
    sys: SystemConfig = field(default_factory=SystemConfig)
    precoder: PrecoderSpec = field(default_factory=PrecoderSpec)
    seed: int = 0
    epsilon: float = 0.0
    constellation: str = "16qam"

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"sweep kind must be one of {SWEEP_KINDS}, got {self.kind!r}")
        if not len(self.values):
            raise ValueError("sweep needs at least one value")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")

    def point(self, value):
        """``(sys, precoder, epsilon)`` for one sweep value."""
        if self.kind == "snr":
            return self.sys.with_snr(value), self.precoder, self.epsilon
        if self.kind == "layers":
            return self.sys, self.precoder.with_layers(int(value)), self.epsilon
        return self.sys, self.precoder, float(value)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def evaluate_point(sys: SystemConfig, precoder: PrecoderSpec, a: FiniteAlphabet, c: Constellation,
                   trials: int, seed: int, epsilon: float = 0.0, sweep_value: float = float("nan"),
                   threads: int = 1) -> BerResult:
    def one(i):
        try:
            return run_trial(sys, precoder, a, c, trial_rng(seed, i), epsilon)
        except IllConditionedChannel:
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(trials)))
    else:
        outcomes = [one(i) for i in range(trials)]
    kept = [o for o in outcomes if o is not None]
    n = len(kept)

    def mean(attr):
        return float(sum(getattr(o, attr) for o in kept) / n) if n else float("nan")

    return BerResult(sweep_value=float(sweep_value),
                     bit_errors=sum(o.bit_errors for o in kept),
                     bits_total=sum(o.bits for o in kept),
                     mse_mean=mean("mse"), iui_mean=mean("iui"), noise_term_mean=mean("noise_term"),
                     trials=trials, trials_discarded=trials - n)


def ber_sweep(spec: SweepSpec, a: FiniteAlphabet, c: Constellation, threads: int = 1) -> list[BerResult]:
    out = []
    for v in spec.values:
        sys, prec, eps = spec.point(v)
        out.append(evaluate_point(sys, prec, a, c, spec.trials_per_point, spec.seed, eps, v, threads))
    return out


def trials_for_bits(min_bits: int, sys: SystemConfig, c: Constellation) -> int:
    per = sys.n_users * c.bits_per_symbol
    return -(-min_bits // per)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def results_to_csv(results: list[BerResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow([_fmt(r.sweep_value), _fmt(r.ber), _fmt(r.stderr), _fmt(r.mse_mean),
                    _fmt(r.iui_mean), _fmt(r.bits_total), _fmt(r.trials_discarded)])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def sweep_manifest(spec: SweepSpec, extra: dict | None = None) -> dict:
    from . import __version__

    doc = {
        "tool": "ide2net",
        "version": __version__,
        "kind": spec.kind,
        "values": [float(v) for v in spec.values],
        "trials_per_point": spec.trials_per_point,
        "seed": spec.seed,
        "epsilon": spec.epsilon,
        "constellation": spec.constellation,
        "system": asdict(spec.sys),
        "precoder": spec.precoder.describe(),
    }
    if extra:
        doc.update(extra)
    return doc


def write_manifest(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# exhaustive search

MAX_CANDIDATES = 10 ** 6


class SearchTooLarge(ValueError):
    pass


@dataclass
class BruteForceResult:
    x: np.ndarray
    residual: float
    beta: float
    candidates: int


def brute_force_precode(h: np.ndarray, s: np.ndarray, p_t: float, a: FiniteAlphabet,
                        optimize_beta: bool = False, max_candidates: int = MAX_CANDIDATES,
                        chunk: int = 1 << 15) -> BruteForceResult:
    """Global minimiser of ``||s - beta H x||^2`` over ``x`` in the alphabet^N.

    ``beta`` is the ZF factor, or with ``optimize_beta`` the best positive
    scalar for each candidate, ``Re((Hx)^H s) / ||Hx||^2``. Ties keep the
    earliest candidate in mixed-radix enumeration order (antenna 0 fastest).
    """
    k, n = h.shape
    m = a.size
    total = m ** n
    if total > max_candidates:
        raise SearchTooLarge(f"{m}^{n} = {total} candidates exceeds the limit of {max_candidates}")
    beta_zf = precoding_factor_beta(h, p_t)
    radix = m ** np.arange(n)
    best = (np.inf, -1, beta_zf)
    s_pow = float(np.sum(np.abs(s) ** 2))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        cand = a.points[(idx[:, None] // radix) % m]        # (chunk, N)
        hx = cand @ h.T                                     # (chunk, K)
        if optimize_beta:
            corr = np.real(np.sum(np.conj(hx) * s, axis=1))
            pw = np.sum(np.abs(hx) ** 2, axis=1)
            b = np.where((corr > 0) & (pw > 0), corr / np.where(pw > 0, pw, 1.0), 0.0)
            res = np.where(b > 0, s_pow - b * corr, s_pow)
        else:
            b = np.full(len(idx), beta_zf)
            res = np.sum(np.abs(s - beta_zf * hx) ** 2, axis=1)
        j = int(np.argmin(res))
        if res[j] < best[0]:
            best = (float(res[j]), int(idx[j]), float(b[j]))
    res, j, beta = best
    x = a.points[(j // radix) % m]
    # recompute with the same expression used to score any other precoder
    return BruteForceResult(x, residual(h, s, beta, x), beta, total)


def residual(h: np.ndarray, s: np.ndarray, beta: float, x: np.ndarray) -> float:
    return float(np.sum(np.abs(s - beta * (h @ x)) ** 2))


@dataclass
class OracleRow:
    instance: int
    residual_opt: float
    residual_ide2: float

    @property
    def ratio(self) -> float:
        if self.residual_opt == 0:
            return 1.0 if self.residual_ide2 == 0 else float("inf")
        return self.residual_ide2 / self.residual_opt


def oracle_batch(sys: SystemConfig, a: FiniteAlphabet, c: Constellation, n_instances: int,
                 seed: int, cfg: Ide2Config = Ide2Config(t_max=50)) -> list[OracleRow]:
    """Exhaustive optimum against IDE2 on ``n_instances`` random tiny problems."""
    if a.size ** sys.n_antennas > MAX_CANDIDATES:
        raise SearchTooLarge(f"{a.size}^{sys.n_antennas} candidates exceeds the limit of {MAX_CANDIDATES}")
    rows = []
    for i in range(n_instances):
        rng = trial_rng(seed, i)
        h = sample_channel(sys, rng)
        s = c.points[rng.integers(0, c.order, size=sys.n_users)]
        opt = brute_force_precode(h, s, sys.p_t, a)
        x = ide2(opt.beta * h, s, a, cfg).x
        rows.append(OracleRow(i, opt.residual, residual(h, s, opt.beta, x)))
    return rows


def oracle_to_csv(rows: list[OracleRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("instance", "residual_opt", "residual_ide2", "ratio"))
    for r in rows:
        w.writerow([r.instance, _fmt(r.residual_opt), _fmt(r.residual_ide2), _fmt(r.ratio)])
    return buf.getvalue()
