"""IDE2-Net: IDE2 unrolled into T layers with a learnable step scale and damping per layer.

The reverse pass is hand written. Complex quantities are differentiated over
their real and imaginary parts: for a real loss ``L`` and complex ``z`` the
adjoint is ``dL/dRe(z) + 1j * dL/dIm(z)``, so a linear map ``z' = A z`` pulls
adjoints back as ``A^H g`` and a real scalar ``c`` in ``z' = c z`` picks up
``Re(sum(conj(g) * z))``. Every projection is treated as the identity on the
way back (straight-through estimator).
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import SystemConfig, precoding_factor_beta, sample_channel
from .constellation import Constellation, FiniteAlphabet, project
from .precoders import MultCounter, adjoint, ide2_layer, inverse_column_gains

log = logging.getLogger(__name__)

ALPHA_MAX = 0.999
PARAMS_FORMAT = "ide2net-params/1"


@dataclass
class Ide2NetParams:
    gamma: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float).copy()
        self.alpha = np.asarray(self.alpha, dtype=float).copy()
        if self.gamma.ndim != 1 or self.gamma.shape != self.alpha.shape or self.gamma.size == 0:
            raise ValueError(f"gamma/alpha must be equal-length 1-d vectors, got "
                             f"{self.gamma.shape} and {self.alpha.shape}")

    @classmethod
    def warm_start(cls, t_layers: int, gamma: float = 1.0, alpha: float = 0.95) -> "Ide2NetParams":
        """Parameters that reproduce plain IDE2."""
        return cls(np.full(t_layers, gamma), np.full(t_layers, alpha))

    @property
    def t_layers(self) -> int:
        return self.gamma.size

    @property
    def n_learnable(self) -> int:
        return self.gamma.size + self.alpha.size

    def copy(self) -> "Ide2NetParams":
        return Ide2NetParams(self.gamma, self.alpha)

    def __eq__(self, other):
        if not isinstance(other, Ide2NetParams):
            return NotImplemented
        return np.array_equal(self.gamma, other.gamma) and np.array_equal(self.alpha, other.alpha)


@dataclass
class ForwardTape:
    x_d: list = field(default_factory=list)       # x_d^t entering layer t
    residual: list = field(default_factory=list)  # s - H~ x_d^t
    step: list = field(default_factory=list)      # W_u (s - H~ x_d^t)
    r: list = field(default_factory=list)
    x: list = field(default_factory=list)         # x^{t+1}
    x_d_final: np.ndarray | None = None
    x_out: np.ndarray | None = None
    inv_gain: np.ndarray | None = None
    h_tilde_h: np.ndarray | None = field(default=None, repr=False)
    relaxed: bool = False
    mult_count: int = 0

    def __len__(self):
        return len(self.x)


def forward(params: Ide2NetParams, s: np.ndarray, h_tilde: np.ndarray, a: FiniteAlphabet,
            relaxed: bool = False):
    """Run every layer and return ``(x_out, tape)`` with ``x_out = Pi(x_d^{T+1})``.

    ``s`` is ``(..., K)`` and ``h_tilde`` is ``(..., K, N)``; leading axes are a
    batch. ``relaxed=True`` replaces every projection with the identity.
    """
    counter = MultCounter()
    inv_gain = inverse_column_gains(h_tilde)
    h_tilde_h = adjoint(h_tilde)
    x_d = np.zeros(h_tilde.shape[:-2] + h_tilde.shape[-1:], dtype=complex)
    tape = ForwardTape(inv_gain=inv_gain, h_tilde_h=h_tilde_h, relaxed=relaxed)
    for g, al in zip(params.gamma, params.alpha):
        residual, step, r, x, x_d_next = ide2_layer(x_d, s, h_tilde, h_tilde_h, inv_gain, g, al, a,
                                                    counter, relaxed)
        tape.x_d.append(x_d)
        tape.residual.append(residual)
        tape.step.append(step)
        tape.r.append(r)
        tape.x.append(x)
        x_d = x_d_next
    tape.x_d_final = x_d
    tape.mult_count = counter.count
    x_out = x_d if relaxed else project(x_d, a)
    tape.x_out = x_out
    return x_out, tape


def loss(s: np.ndarray, h: np.ndarray, beta, x_out: np.ndarray) -> np.ndarray:
    """Per-sample ``||s - beta H x_out||^2`` (take the mean for a batch loss)."""
    beta = np.asarray(beta, dtype=float)[..., None]
    e = s - beta * (h @ x_out[..., None])[..., 0]
    return np.sum(np.abs(e) ** 2, axis=-1)


def backward(tape: ForwardTape, params: Ide2NetParams, s: np.ndarray, h_tilde: np.ndarray,
             grad_seed: float = 1.0):
    """Gradients of ``grad_seed * mean(loss)`` with respect to every gamma and alpha."""
    if len(tape) != params.t_layers:
        raise ValueError(f"tape has {len(tape)} layers but params have {params.t_layers}")
    h_h = tape.h_tilde_h if tape.h_tilde_h is not None else adjoint(h_tilde)
    n_batch = int(np.prod(s.shape[:-1], dtype=int))

    def mv(m, v):
        return (m @ v[..., None])[..., 0]

    e = s - mv(h_tilde, tape.x_out)
    # adjoint of x_d^{T+1}; the output projection passes straight through
    g = (-2.0 * grad_seed / n_batch) * mv(h_h, e)
    d_gamma = np.zeros(params.t_layers)
    d_alpha = np.zeros(params.t_layers)
    for t in range(params.t_layers - 1, -1, -1):
        gam, al = params.gamma[t], params.alpha[t]
        x_d, x = tape.x_d[t], tape.x[t]
        d_alpha[t] = np.sum(np.real(np.conj(g) * (x_d - x)))
        g_r = (1.0 - al) * g  # projection: identity on the way back
        d_gamma[t] = np.sum(np.real(np.conj(g_r) * tape.step[t]))
        # r = x_d + gam * D H~^H (s - H~ x_d)  =>  adjoint I - gam H~^H H~ D
        g = al * g + g_r - gam * mv(h_h, mv(h_tilde, tape.inv_gain * g_r))
    return d_gamma, d_alpha


class TrainingAborted(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


def sgd_step(params: Ide2NetParams, grads, lr: float) -> Ide2NetParams:
    """Plain gradient step; alpha is clamped to ``[0, ALPHA_MAX]``."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    d_gamma, d_alpha = grads
    if not (np.all(np.isfinite(d_gamma)) and np.all(np.isfinite(d_alpha))):
        raise TrainingAborted("non-finite gradient")
    gamma = params.gamma - lr * np.asarray(d_gamma)
    alpha = np.clip(params.alpha - lr * np.asarray(d_alpha), 0.0, ALPHA_MAX)
    return Ide2NetParams(gamma, alpha)


def clip_by_norm(grads, max_norm: float | None):
    if max_norm is None:
        return grads
    d_gamma, d_alpha = grads
    norm = np.sqrt(np.sum(d_gamma ** 2) + np.sum(d_alpha ** 2))
    if norm > max_norm:
        return d_gamma * (max_norm / norm), d_alpha * (max_norm / norm)
    return grads


@dataclass(frozen=True)
class TrainConfig:
    t_layers: int = 20
    epochs: int = 50
    samples_per_epoch: int = 500
    batch_size: int = 100
    lr_initial: float = 0.01
    lr_decay_every: int = 10
    lr_decay_factor: float = 10.0
    lr_floor: float = 1e-4
    snr_db_train: float = 14.0
    seed: int = 0
    validation_samples: int = 1000
    validation_seed: int = 12345
    grad_clip: float | None = None
    optimizer: str = "adam"
    adam_betas: tuple = (0.9, 0.999)

    def __post_init__(self):
        if self.t_layers < 1:
            raise ValueError("t_layers must be >= 1")
        if self.batch_size < 1 or self.samples_per_epoch % self.batch_size:
            raise ValueError("batch_size must divide samples_per_epoch")
        if min(self.lr_initial, self.lr_floor, self.lr_decay_factor) <= 0:
            raise ValueError("learning-rate settings must be positive")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")

    def learning_rate(self, epoch: int) -> float:
        lr = self.lr_initial / self.lr_decay_factor ** (epoch // self.lr_decay_every)
        return max(lr, self.lr_floor)


# full-scale schedule: plain SGD, 5000 draws per epoch, lr 0.1 divided by 10 every 200 epochs
REFERENCE_TRAIN_CONFIG = TrainConfig(epochs=1000, samples_per_epoch=5000, lr_initial=0.1, lr_decay_every=200,
                                     optimizer="sgd")


def draw_batch(sys: SystemConfig, c: Constellation, n: int, rng: np.random.Generator):
    """``n`` independent ``(s, H, beta)`` triples with uniformly random symbols."""
    h = sample_channel(sys, rng, size=n)
    s = c.points[rng.integers(0, c.order, size=(n, sys.n_users))]
    beta = precoding_factor_beta(h, sys.p_t)
    return s, h, np.atleast_1d(beta)


def mean_loss(params: Ide2NetParams, s, h, beta, a: FiniteAlphabet) -> float:
    h_tilde = beta[:, None, None] * h
    x_out, _ = forward(params, s, h_tilde, a)
    return float(np.mean(loss(s, h, beta, x_out)))


class Adam:
    """Adam moments over the flattened ``(gamma, alpha)`` vector, alpha clamped like SGD."""

    def __init__(self, n_params: int, betas=(0.9, 0.999), eps: float = 1e-8):
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.b1, self.b2 = betas
        self.eps = eps
        self.k = 0

    def step(self, params: Ide2NetParams, grads, lr: float) -> Ide2NetParams:
        g = np.concatenate(grads)
        if not np.all(np.isfinite(g)):
            raise TrainingAborted("non-finite gradient")
        self.k += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        m_hat = self.m / (1 - self.b1 ** self.k)
        v_hat = self.v / (1 - self.b2 ** self.k)
        upd = lr * m_hat / (np.sqrt(v_hat) + self.eps)
        t = params.t_layers
        return Ide2NetParams(params.gamma - upd[:t], np.clip(params.alpha - upd[t:], 0.0, ALPHA_MAX))


def train(cfg: TrainConfig, sys: SystemConfig, a: FiniteAlphabet, c: Constellation,
          init: Ide2NetParams | None = None):
    """Mini-batch training over fresh channel/symbol draws.

    Each epoch draws ``samples_per_epoch`` new ``(s, H)`` pairs. The loss is
    noise free, so ``snr_db_train`` only enters the provenance record.
    Returns the parameters with the lowest validation loss, the warm start
    included, and a list of ``(epoch, train_loss, val_loss, lr)`` rows; row 0
    is the untrained initialisation.
    """
    params = init.copy() if init is not None else Ide2NetParams.warm_start(cfg.t_layers)
    if params.t_layers != cfg.t_layers:
        raise ValueError(f"init has {params.t_layers} layers, config asks for {cfg.t_layers}")
    rng = np.random.default_rng(cfg.seed)
    val = draw_batch(sys, c, cfg.validation_samples, np.random.default_rng(cfg.validation_seed))
    adam = Adam(params.n_learnable, cfg.adam_betas) if cfg.optimizer == "adam" else None

    val0 = mean_loss(params, *val, a)
    history = [(0, float("nan"), val0, float("nan"))]
    best_params, best_val = params.copy(), val0
    n_bad = 0
    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.learning_rate(epoch - 1)
        losses = []
        for _ in range(cfg.samples_per_epoch // cfg.batch_size):
            s, h, beta = draw_batch(sys, c, cfg.batch_size, rng)
            h_tilde = beta[:, None, None] * h
            x_out, tape = forward(params, s, h_tilde, a)
            losses.append(float(np.mean(loss(s, h, beta, x_out))))
            grads = clip_by_norm(backward(tape, params, s, h_tilde), cfg.grad_clip)
            try:
                params = adam.step(params, grads, lr) if adam else sgd_step(params, grads, lr)
            except TrainingAborted as exc:
                raise TrainingAborted(f"epoch {epoch}: {exc}", history) from None
        v = mean_loss(params, *val, a)
        history.append((epoch, float(np.mean(losses)), v, lr))
        log.debug("epoch %d lr %.1e train %.4f val %.4f", epoch, lr, history[-1][1], v)
        if v < best_val:
            best_params, best_val = params.copy(), v
        n_bad = n_bad + 1 if v > 10 * val0 else 0
        if n_bad >= 10:
            raise TrainingAborted(f"validation loss above 10x initial for 10 epochs (epoch {epoch})", history)
    return best_params, history


def save_params(params: Ide2NetParams, path, sys: SystemConfig | None = None,
                train_seed: int | None = None) -> None:
    doc = {
        "format": PARAMS_FORMAT,
        "t_layers": params.t_layers,
        # repr() of a float is the shortest string that round-trips exactly
        "gamma": [float(v) for v in params.gamma],
        "alpha": [float(v) for v in params.alpha],
        "system": asdict(sys) if sys is not None else None,
        "train_seed": train_seed,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


class ParamsFileError(ValueError):
    pass


_KNOWN_KEYS = {"format", "t_layers", "gamma", "alpha", "system", "train_seed"}


def load_params(path) -> Ide2NetParams:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParamsFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParamsFileError(f"{path}: top level must be an object")
    for key in ("t_layers", "gamma", "alpha"):
        if key not in doc:
            raise ParamsFileError(f"{path}: missing field {key!r}")
    extra = sorted(set(doc) - _KNOWN_KEYS)
    if extra:
        warnings.warn(f"{path}: ignoring unknown fields {extra}", stacklevel=2)
    t = doc["t_layers"]
    for key in ("gamma", "alpha"):
        vals = doc[key]
        if not isinstance(vals, list) or not all(isinstance(v, (int, float)) for v in vals):
            raise ParamsFileError(f"{path}: field {key!r} must be a list of numbers")
        if len(vals) != t:
            raise ParamsFileError(f"{path}: field {key!r} has {len(vals)} entries but t_layers = {t}")
    return Ide2NetParams(doc["gamma"], doc["alpha"])


def load_params_system(path) -> SystemConfig | None:
    doc = json.loads(Path(path).read_text())
    sys = doc.get("system")
    return SystemConfig(**sys) if sys else None
