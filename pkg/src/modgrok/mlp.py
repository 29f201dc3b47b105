"""One-hidden-layer ReLU MLP on two-hot (a, b) inputs, trained with AdamW.

Parameters are stored neuron-major: ``w_a[i, j]`` is the weight from the
one-hot slot ``a = j`` to hidden neuron ``i``, likewise ``w_b``; ``w_out[i, j]``
connects hidden neuron ``i`` to output logit ``j``. There is no output bias.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_labels, check_pairs
from .dataset import INIT_STREAM, derive_rng, make_dataset

logger = logging.getLogger(__name__)

PARAM_NAMES = ("w_a", "w_b", "bias_h", "w_out")
STOP_REASONS = ("val-threshold", "plateau", "hard-limit")


class TrainingError(RuntimeError):
    """A run diverged (non-finite loss)."""


@dataclass
class Model:
    w_a: np.ndarray
    w_b: np.ndarray
    bias_h: np.ndarray
    w_out: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        n, p = self.w_a.shape
        if self.w_b.shape != (n, p) or self.w_out.shape != (n, p) or self.bias_h.shape != (n,):
            raise ValueError(
                "inconsistent shapes: "
                + ", ".join(f"{k}={getattr(self, k).shape}" for k in PARAM_NAMES)
            )
        for name in PARAM_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def p(self):
        return self.w_a.shape[1]

    @property
    def n_hidden(self):
        return self.w_a.shape[0]

    def params(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return Model(**{k: v.copy() for k, v in self.params().items()})

    @classmethod
    def zeros(cls, p, n_hidden):
        return cls(
            np.zeros((n_hidden, p)), np.zeros((n_hidden, p)), np.zeros(n_hidden), np.zeros((n_hidden, p))
        )


def init_model(p, n_hidden, seed=0):
    """Uniform +-1/sqrt(fan_in) weights (fan-in 2p, then N), zero hidden bias."""
    if p < 2 or n_hidden < 1:
        raise ValueError(f"need p >= 2 and n_hidden >= 1, got p={p}, n_hidden={n_hidden}")
    rng = derive_rng(seed, INIT_STREAM)
    lim_in = 1.0 / np.sqrt(2 * p)
    lim_out = 1.0 / np.sqrt(n_hidden)
    w_a = rng.uniform(-lim_in, lim_in, size=(n_hidden, p))
    w_b = rng.uniform(-lim_in, lim_in, size=(n_hidden, p))
    w_out = rng.uniform(-lim_out, lim_out, size=(n_hidden, p))
    return Model(w_a, w_b, np.zeros(n_hidden), w_out)


def _hidden_pre(model, X):
    # contiguous transposes make the row gathers ~10x faster
    w_aT = np.ascontiguousarray(model.w_a.T)
    w_bT = np.ascontiguousarray(model.w_b.T)
    return w_aT[X[:, 0]] + w_bT[X[:, 1]] + model.bias_h


def forward(model, X):
    """Logits of shape ``(len(X), p)`` for integer pairs ``X``."""
    X = check_pairs(X, model.p)
    return np.maximum(_hidden_pre(model, X), 0.0) @ model.w_out


def _scatter_matrix(idx, p):
    """Sparse ``(p, n)`` matrix summing batch rows into their input slot."""
    n = idx.shape[0]
    return sp.csr_matrix((np.ones(n), (idx, np.arange(n))), shape=(p, n))


def _loss_grads(model, X, y, scatter=None):
    # X, y assumed validated
    n = X.shape[0]
    if scatter is None:
        scatter = (_scatter_matrix(X[:, 0], model.p), _scatter_matrix(X[:, 1], model.p))
    pre = _hidden_pre(model, X)
    h = np.maximum(pre, 0.0)
    logits = h @ model.w_out

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1)
    rows = np.arange(n)
    loss = float(np.mean(np.log(denom) - shifted[rows, y]))
    correct = int(np.count_nonzero(np.argmax(logits, axis=1) == y))

    dlogits = exp / denom[:, None]
    dlogits[rows, y] -= 1.0
    dlogits /= n

    g_out = h.T @ dlogits
    dpre = dlogits @ model.w_out.T
    np.multiply(dpre, pre > 0, out=dpre)
    grads = {
        "w_a": (scatter[0] @ dpre).T,
        "w_b": (scatter[1] @ dpre).T,
        "bias_h": dpre.sum(axis=0),
        "w_out": g_out,
    }
    return loss, grads, correct / n


def loss_and_grads(model, X, y):
    """Mean softmax cross-entropy and its gradient for every parameter."""
    X = check_pairs(X, model.p)
    y = check_labels(y, X.shape[0], model.p)
    loss, grads, _ = _loss_grads(model, X, y)
    return loss, grads


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def zeros_like(cls, model):
        return cls(
            m={k: np.zeros_like(v) for k, v in model.params().items()},
            v={k: np.zeros_like(v) for k, v in model.params().items()},
        )

    def copy(self):
        return AdamState(
            {k: a.copy() for k, a in self.m.items()}, {k: a.copy() for k, a in self.v.items()}, self.step
        )


def _adamw_inplace(params, grads, state, lr, weight_decay, beta1, beta2, eps):
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    decay = 1.0 - lr * weight_decay
    for name, param in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        param *= decay
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def adamw_step(model, grads, state, lr=1e-3, weight_decay=1.0, betas=(0.9, 0.999), eps=1e-8):
    """One decoupled-weight-decay Adam update; returns new ``(model, state)``.

    Every parameter, the hidden bias included, is first scaled by
    ``1 - lr * weight_decay`` and then moved by the bias-corrected Adam step.
    """
    new_model = model.copy()
    new_state = state.copy()
    _adamw_inplace(new_model.params(), grads, new_state, lr, weight_decay, betas[0], betas[1], eps)
    return new_model, new_state


def evaluate_accuracy(model, X, y):
    """Fraction of pairs whose argmax logit (lowest index on ties) equals ``y``."""
    X = check_pairs(X, model.p)
    y = check_labels(y, X.shape[0], model.p)
    return float(np.mean(np.argmax(forward(model, X), axis=1) == y))


@dataclass
class TrainConfig:
    p: int = 97
    n_hidden: int = 256
    train_frac: float = 0.3
    alpha: float = 0.0
    seed: int = 0
    lr: float = 1e-3
    weight_decay: float = 1.0
    eval_every: int = 100
    patience: int = 50_000
    min_delta: float = 1e-4
    val_threshold: float = 0.999
    max_steps: int = 500_000
    saturation_threshold: float = 0.99
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self):
        if self.p < 2 or self.n_hidden < 1:
            raise ValueError("p must be >= 2 and n_hidden >= 1")
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError("train_frac must lie in (0, 1)")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lr <= 0 or self.weight_decay < 0 or self.lr * self.weight_decay >= 1:
            raise ValueError("need lr > 0, weight_decay >= 0, lr * weight_decay < 1")
        if self.eval_every < 1 or self.patience < 1 or self.max_steps < 0:
            raise ValueError("eval_every, patience must be >= 1 and max_steps >= 0")
        if self.min_delta < 0:
            raise ValueError("min_delta must be >= 0")
        for name in ("val_threshold", "saturation_threshold"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ValueError("invalid Adam hyperparameters")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class Checkpoint:
    model: Model
    step: int
    kind: str  # "saturation" | "final" | "constructed" | "extracted"
    meta: dict = field(default_factory=dict)


@dataclass
class RunRecord:
    config: TrainConfig
    history: list  # dicts with step, train_loss, train_acc, val_acc
    final: Checkpoint
    saturation: Checkpoint | None
    stop_reason: str
    wall_time: float = 0.0

    def final_val_acc(self):
        return self.history[-1]["val_acc"]


def fit_model(model, X_train, y_train, X_val, y_val, config, callback=None):
    """Full-batch AdamW training with early stopping.

    ``model`` is updated in place. Returns ``(history, saturation, final,
    stop_reason)``. Train accuracy is read from the same forward pass used for
    the gradient, so the saturation checkpoint is exact to the step.
    """
    cfg = config
    p = model.p
    X_train = check_pairs(X_train, p)
    y_train = check_labels(y_train, X_train.shape[0], p)
    X_val = check_pairs(X_val, p)
    y_val = check_labels(y_val, X_val.shape[0], p)
    scatter = (_scatter_matrix(X_train[:, 0], p), _scatter_matrix(X_train[:, 1], p))
    state = AdamState.zeros_like(model)
    params = model.params()

    history = []
    saturation = None
    # running maximum of val acc at each eval step, for the plateau window
    window = deque()
    best = -np.inf
    step = 0
    stop_reason = None
    while True:
        loss, grads, train_acc = _loss_grads(model, X_train, y_train, scatter)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise TrainingError(f"non-finite loss or gradient at step {step} (loss={loss})")
        if saturation is None and train_acc >= cfg.saturation_threshold:
            saturation = Checkpoint(model.copy(), step, "saturation")
            logger.info("saturation at step %d (train acc %.4f)", step, train_acc)

        at_limit = step >= cfg.max_steps
        if step % cfg.eval_every == 0 or at_limit:
            val_acc = float(np.mean(np.argmax(forward(model, X_val), axis=1) == y_val))
            row = {"step": step, "train_loss": loss, "train_acc": train_acc, "val_acc": val_acc}
            history.append(row)
            if callback is not None:
                callback(row)
            best = max(best, val_acc)
            window.append((step, best))
            while window and window[0][0] < step - cfg.patience:
                window.popleft()
            if val_acc > cfg.val_threshold:
                stop_reason = "val-threshold"
            elif window[0][0] == step - cfg.patience and best - window[0][1] < cfg.min_delta:
                stop_reason = "plateau"
            elif at_limit:
                stop_reason = "hard-limit"
            if stop_reason is not None:
                break

        _adamw_inplace(params, grads, state, cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps)
        step += 1

    final = Checkpoint(model.copy(), step, "final")
    return history, saturation, final, stop_reason


def train(config=None, callback=None):
    """Build the dataset for ``config``, train from scratch, return a :class:`RunRecord`."""
    cfg = (config or TrainConfig()).validate()
    data = make_dataset(cfg.p, cfg.train_frac, cfg.alpha, cfg.seed)
    X_tr, y_tr = data.arrays("train")
    X_val, y_val = data.arrays("val")
    model = init_model(cfg.p, cfg.n_hidden, cfg.seed)
    t0 = time.perf_counter()
    history, saturation, final, reason = fit_model(model, X_tr, y_tr, X_val, y_val, cfg, callback)
    return RunRecord(cfg, history, final, saturation, reason, time.perf_counter() - t0)


class ModularAdditionMLP(ClassifierMixin, BaseEstimator):
    """Estimator wrapper around the two-hot ReLU MLP.

    ``X`` holds ``(a, b)`` integer pairs, ``y`` the labels. ``fit`` accepts an
    optional validation set that drives early stopping; without one, training
    runs until ``max_steps``.
    """

    def __init__(
        self,
        p=97,
        n_hidden=256,
        learning_rate=1e-3,
        weight_decay=1.0,
        max_steps=500_000,
        eval_every=100,
        patience=50_000,
        min_delta=1e-4,
        val_threshold=0.999,
        saturation_threshold=0.99,
        random_state=0,
    ):
        self.p = p
        self.n_hidden = n_hidden
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.max_steps = max_steps
        self.eval_every = eval_every
        self.patience = patience
        self.min_delta = min_delta
        self.val_threshold = val_threshold
        self.saturation_threshold = saturation_threshold
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            p=self.p,
            n_hidden=self.n_hidden,
            seed=self.random_state,
            lr=self.learning_rate,
            weight_decay=self.weight_decay,
            eval_every=self.eval_every,
            patience=self.patience if self.patience else self.max_steps + 1,
            min_delta=self.min_delta,
            val_threshold=self.val_threshold,
            max_steps=self.max_steps,
            saturation_threshold=self.saturation_threshold,
        ).validate()

    def fit(self, X, y, X_val=None, y_val=None):
        cfg = self._config()
        if X_val is None:
            # no held-out signal: track train accuracy, never stop early
            X_val, y_val = X, y
            cfg.val_threshold = 1.0
            cfg.patience = cfg.max_steps + 1
        model = init_model(cfg.p, cfg.n_hidden, cfg.seed)
        history, saturation, final, reason = fit_model(model, X, y, X_val, y_val, cfg)
        self.model_ = model
        self.history_ = history
        self.saturation_ = saturation
        self.n_steps_ = final.step
        self.stop_reason_ = reason
        self.classes_ = np.arange(cfg.p)
        return self

    @classmethod
    def from_model(cls, model, **params):
        est = cls(p=model.p, n_hidden=model.n_hidden, **params)
        est.model_ = model
        est.classes_ = np.arange(model.p)
        return est

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return forward(self.model_, X)

    def predict_proba(self, X):
        logits = self.decision_function(X)
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)
