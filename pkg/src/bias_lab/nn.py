"""Small feedforward networks with hand-written reverse-mode gradients.

A model is a feature extractor (dense layers, each followed by the
activation) whose last activation is the representation ``R``; a linear task
head maps ``R`` to the logit of ``Y = 1``; an adversary head (one ReLU
hidden layer, or linear when ``adversary_width == 0``) maps ``[R, onehot(y)]``
to the logit of ``A = 1``. The label slots are zero except for conditional
FRL, so every method shares one parameter layout.

Updates per batch:

* task head descends the task loss;
* adversary head descends the adversary loss (for every method, so the
  history always records how decodable ``A`` is from ``R``);
* extractor descends ``L_task - lambda * L_adv`` (gradient reversal). For ERM
  ``lambda`` is 0.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .data import Dataset


class Method(str, enum.Enum):
    ERM = "erm"
    FRL_MARGINAL = "frl"
    FRL_CONDITIONAL = "cfrl"


class Activation(str, enum.Enum):
    RELU = "relu"
    TANH = "tanh"


class TrainingError(RuntimeError):
    pass


DEFAULT_LAMBDA = {Method.ERM: 0.0, Method.FRL_MARGINAL: 1.0, Method.FRL_CONDITIONAL: 0.05}


@dataclass(frozen=True)
class Architecture:
    layer_widths: tuple[int, ...]
    activation: Activation = Activation.RELU
    adversary_width: int = 32
    representation_index: int = -1

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        object.__setattr__(self, "activation", Activation(self.activation))
        if len(self.layer_widths) < 2 or min(self.layer_widths) < 1:
            raise ValueError("need an input width and at least one layer, all >= 1")
        if self.representation_index not in (-1, len(self.layer_widths) - 1):
            raise ValueError("the representation is the last extractor layer")

    @classmethod
    def default(cls, input_width: int) -> "Architecture":
        return cls((input_width, 64, 32))

    @property
    def input_width(self) -> int:
        return self.layer_widths[0]

    @property
    def representation_width(self) -> int:
        return self.layer_widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "activation": self.activation.value,
            "adversary_width": self.adversary_width,
            "representation_index": self.representation_index,
        }


@dataclass(frozen=True)
class TrainConfig:
    method: Method = Method.ERM
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    adversarial_coefficient: float | None = None
    max_epochs: int = 50
    patience: int = 5
    batch_size: int = 256
    seed: int = 0
    monitor: str = "worst_group_auc"
    adversary_lr_scale: float = 1.0
    adversary_steps: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.adversary_steps < 1 or self.adversary_lr_scale <= 0:
            raise ValueError("adversary_steps must be >= 1 and adversary_lr_scale > 0")
        if self.monitor not in ("worst_group_auc", "auc"):
            raise ValueError(f"unknown monitor {self.monitor!r}")

    @property
    def lam(self) -> float:
        if self.method is Method.ERM:
            return 0.0
        if self.adversarial_coefficient is None:
            return DEFAULT_LAMBDA[self.method]
        return float(self.adversarial_coefficient)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["method"] = self.method.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainedModel:
    architecture: Architecture
    params: dict[str, np.ndarray]
    config: TrainConfig | None = None
    history: list[dict[str, float]] = field(default_factory=list)
    stopping_epoch: int | None = None

    @property
    def is_trained(self) -> bool:
        return bool(self.history)

    def copy(self) -> "TrainedModel":
        return TrainedModel(
            self.architecture,
            {k: v.copy() for k, v in self.params.items()},
            self.config,
            [dict(h) for h in self.history],
            self.stopping_epoch,
        )

    def extractor_parameter_count(self) -> int:
        return sum(self.params[f"W{i}"].size + self.params[f"b{i}"].size for i in range(self.architecture.n_layers))

    def parameter_count(self) -> int:
        return sum(v.size for v in self.params.values())

    # -- checkpoint ----------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": "bias-lab-checkpoint/1",
            "architecture": self.architecture.to_dict(),
            "config": None if self.config is None else self.config.to_dict(),
            "history": self.history,
            "stopping_epoch": self.stopping_epoch,
            "weights": {
                k: {"shape": list(v.shape), "row_major": [float(x) for x in v.ravel()]}
                for k, v in sorted(self.params.items())
            },
        }

    def save(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict()) + "\n")
        return path

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainedModel":
        arch = Architecture(**d["architecture"])
        params = {
            k: np.array(w["row_major"], dtype=np.float64).reshape(w["shape"]) for k, w in d["weights"].items()
        }
        cfg = None if d.get("config") is None else TrainConfig.from_dict(d["config"])
        return cls(arch, params, cfg, d.get("history", []), d.get("stopping_epoch"))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- initialisation and forward pass -------------------------------------------


def init_model(arch: Architecture, seed: int) -> TrainedModel:
    """Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), drawn layer by layer."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}

    def dense(name_w, name_b, fan_in, fan_out):
        bound = 1.0 / math.sqrt(fan_in)
        params[name_w] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[name_b] = rng.uniform(-bound, bound, size=fan_out)

    widths = arch.layer_widths
    for i in range(arch.n_layers):
        dense(f"W{i}", f"b{i}", widths[i], widths[i + 1])
    r = arch.representation_width
    dense("task_W", "task_b", r, 1)
    if arch.adversary_width > 0:
        dense("adv_W0", "adv_b0", r + 2, arch.adversary_width)
        dense("adv_W1", "adv_b1", arch.adversary_width, 1)
    else:
        dense("adv_W1", "adv_b1", r + 2, 1)
    return TrainedModel(arch, params)


def _act(arch: Architecture, u: np.ndarray) -> np.ndarray:
    return np.maximum(u, 0.0) if arch.activation is Activation.RELU else np.tanh(u)


def _act_grad(arch: Architecture, u: np.ndarray, h: np.ndarray) -> np.ndarray:
    if arch.activation is Activation.RELU:
        return (u > 0).astype(u.dtype)
    return 1.0 - h * h


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _bce_with_logits(logit: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, logit) - target * logit))


def _encode(m: TrainedModel, x: np.ndarray):
    arch = m.architecture
    cache = [x]
    pre = []
    h = x
    for i in range(arch.n_layers):
        u = h @ m.params[f"W{i}"] + m.params[f"b{i}"]
        h = _act(arch, u)
        pre.append(u)
        cache.append(h)
    return h, cache, pre


def _check_input(m: TrainedModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.architecture.input_width:
        raise ValueError(f"input width {x.shape[-1]} != model input width {m.architecture.input_width}")
    return x


def predict(m: TrainedModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(p, r)``: probability of ``y = 1`` and the representation.

    Accepts one feature vector or a matrix of row vectors.
    """
    x = _check_input(m, x)
    single = x.ndim == 1
    r, _, _ = _encode(m, np.atleast_2d(x))
    p = _sigmoid(r @ m.params["task_W"] + m.params["task_b"])[:, 0]
    if single:
        return p[0], r[0]
    return p, r


def predict_dataset(m: TrainedModel, d: Dataset) -> np.ndarray:
    return predict(m, d.design_matrix())[0]


def extract_representations(m: TrainedModel, d: Dataset) -> np.ndarray:
    return predict(m, d.design_matrix())[1]


# -- losses and gradients -------------------------------------------------------


def _adversary_input(r: np.ndarray, y: np.ndarray, conditional: bool) -> np.ndarray:
    labels = np.zeros((len(r), 2))
    if conditional:
        labels[np.arange(len(r)), y.astype(np.int64)] = 1.0
    return np.hstack([r, labels])


def _adversary_forward(m: TrainedModel, ra: np.ndarray):
    p = m.params
    if m.architecture.adversary_width > 0:
        u = ra @ p["adv_W0"] + p["adv_b0"]
        g = np.maximum(u, 0.0)
        return (g @ p["adv_W1"] + p["adv_b1"])[:, 0], (u, g)
    return (ra @ p["adv_W1"] + p["adv_b1"])[:, 0], None


def _backprop_extractor(m: TrainedModel, cache, pre, d_r: np.ndarray) -> dict[str, np.ndarray]:
    arch = m.architecture
    grads = {}
    delta = d_r
    for i in reversed(range(arch.n_layers)):
        du = delta * _act_grad(arch, pre[i], cache[i + 1])
        grads[f"W{i}"] = cache[i].T @ du
        grads[f"b{i}"] = du.sum(axis=0)
        if i:
            delta = du @ m.params[f"W{i}"].T
    return grads


def loss_and_gradients(
    m: TrainedModel, x: np.ndarray, y: np.ndarray, a: np.ndarray, conditional: bool = False
) -> dict[str, Any]:
    """Both losses and the gradient of each with respect to every parameter.

    Returns ``task_loss``, ``adv_loss``, ``task_grads`` (extractor + task head),
    ``adv_grads`` (extractor + adversary head), plus the gradients of each loss
    with respect to ``R`` (``d_r_task``, ``d_r_adv``).
    """
    p = m.params
    n = len(x)
    r, cache, pre = _encode(m, x)
    logit = (r @ p["task_W"] + p["task_b"])[:, 0]
    d_logit = (_sigmoid(logit) - y) / n
    task_grads = {"task_W": r.T @ d_logit[:, None], "task_b": np.array([d_logit.sum()])}
    d_r_task = d_logit[:, None] @ p["task_W"].T

    ra = _adversary_input(r, y, conditional)
    logit_a, hidden = _adversary_forward(m, ra)
    d_la = (_sigmoid(logit_a) - a) / n
    adv_grads = {}
    if hidden is not None:
        u, g = hidden
        adv_grads["adv_W1"] = g.T @ d_la[:, None]
        adv_grads["adv_b1"] = np.array([d_la.sum()])
        du = (d_la[:, None] @ p["adv_W1"].T) * (u > 0)
        adv_grads["adv_W0"] = ra.T @ du
        adv_grads["adv_b0"] = du.sum(axis=0)
        d_ra = du @ p["adv_W0"].T
    else:
        adv_grads["adv_W1"] = ra.T @ d_la[:, None]
        adv_grads["adv_b1"] = np.array([d_la.sum()])
        d_ra = d_la[:, None] @ p["adv_W1"].T
    d_r_adv = d_ra[:, : r.shape[1]]

    task_grads.update(_backprop_extractor(m, cache, pre, d_r_task))
    adv_grads.update(_backprop_extractor(m, cache, pre, d_r_adv))
    return {
        "task_loss": _bce_with_logits(logit, y),
        "adv_loss": _bce_with_logits(logit_a, a),
        "task_grads": task_grads,
        "adv_grads": adv_grads,
        "d_r_task": d_r_task,
        "d_r_adv": d_r_adv,
        "cache": (cache, pre),
    }


def extractor_names(m: TrainedModel) -> list[str]:
    return [f"{k}{i}" for i in range(m.architecture.n_layers) for k in ("W", "b")]


def update_direction(parts: dict[str, Any], m: TrainedModel, lam: float) -> dict[str, np.ndarray]:
    """Per-parameter gradient actually applied by the optimizer.

    Extractor parameters receive the task gradient plus the *reversed*,
    ``lam``-scaled adversary gradient; each head receives its own gradient.
    """
    step = {}
    ext = set(extractor_names(m))
    for k in m.params:
        if k in ext:
            step[k] = parts["task_grads"][k] - lam * parts["adv_grads"][k]
        elif k.startswith("task_"):
            step[k] = parts["task_grads"][k]
        else:
            step[k] = parts["adv_grads"][k]
    return step


def adversary_gradients(
    m: TrainedModel, x, y, a, conditional: bool = False, r: np.ndarray | None = None
) -> tuple[dict[str, np.ndarray], float]:
    """Gradient of the adversary loss w.r.t. the adversary head only (R held fixed).

    Pass ``r`` to reuse representations when the extractor has not moved.
    """
    p = m.params
    if r is None:
        r, _, _ = _encode(m, x)
    ra = _adversary_input(r, y, conditional)
    logit_a, hidden = _adversary_forward(m, ra)
    d_la = (_sigmoid(logit_a) - a) / len(x)
    if hidden is None:
        grads = {"adv_W1": ra.T @ d_la[:, None], "adv_b1": np.array([d_la.sum()])}
    else:
        u, g = hidden
        du = (d_la[:, None] @ p["adv_W1"].T) * (u > 0)
        grads = {"adv_W1": g.T @ d_la[:, None], "adv_b1": np.array([d_la.sum()]),
                 "adv_W0": ra.T @ du, "adv_b0": du.sum(axis=0)}
    return grads, _bce_with_logits(logit_a, a)


def _train_step_direction(m, x, y, a, lam, conditional):
    parts = loss_and_gradients(m, x, y, a, conditional)
    if not (math.isfinite(parts["task_loss"]) and math.isfinite(parts["adv_loss"])):
        raise TrainingError(
            f"non-finite loss (task={parts['task_loss']}, adversary={parts['adv_loss']})"
        )
    return update_direction(parts, m, lam), parts["task_loss"], parts["adv_loss"]


# -- gradient check ---------------------------------------------------------------


def _numeric_grad(loss_fn, m: TrainedModel, name: str, eps: float) -> np.ndarray:
    w = m.params[name]
    out = np.zeros_like(w)
    for idx in np.ndindex(w.shape):
        orig = w[idx]
        w[idx] = orig + eps
        hi = loss_fn()
        w[idx] = orig - eps
        lo = loss_fn()
        w[idx] = orig
        out[idx] = (hi - lo) / (2.0 * eps)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-7) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def grad_check(
    m: TrainedModel,
    x: np.ndarray,
    y: np.ndarray,
    a: np.ndarray,
    eps: float = 1e-5,
    lam: float = 1.0,
    conditional: bool = False,
) -> dict[str, Any]:
    """Compare analytic gradients against central finite differences.

    Checks every partial of the task loss (extractor + task head) and of the
    adversary loss (extractor + adversary head), then verifies that the
    applied extractor update equals ``task_grad - lam * adv_grad`` entrywise.
    """
    m = m.copy()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    parts = loss_and_gradients(m, x, y, a, conditional)

    def task_loss():
        return loss_and_gradients(m, x, y, a, conditional)["task_loss"]

    def adv_loss():
        return loss_and_gradients(m, x, y, a, conditional)["adv_loss"]

    worst = 0.0
    per_param = {}
    for kind, fn, grads in (("task", task_loss, parts["task_grads"]), ("adv", adv_loss, parts["adv_grads"])):
        for name, g in grads.items():
            num = _numeric_grad(fn, m, name, eps)
            err = float(relative_error(g, num).max())
            per_param[f"{kind}:{name}"] = err
            worst = max(worst, err)

    step = update_direction(parts, m, lam)
    reversal = all(reversal_residual_ok(step[k], parts["task_grads"][k], parts["adv_grads"][k], lam)
                   for k in extractor_names(m))
    return {"max_relative_error": worst, "per_parameter": per_param, "reversal_identity": reversal}


def reversal_residual_ok(step: np.ndarray, task: np.ndarray, adv: np.ndarray, lam: float) -> bool:
    """Entrywise ``step - task == -lam * adv`` up to the rounding of one subtraction."""
    tol = 4 * np.finfo(np.float64).eps * (np.abs(task) + np.abs(lam * adv))
    return bool(np.all(np.abs((step - task) + lam * adv) <= tol))


# -- training -----------------------------------------------------------------------


def _monitor_value(m: TrainedModel, x, target, groups, monitor: str) -> float:
    from .metrics import auc_score

    p = predict(m, x)[0]
    if monitor == "auc":
        v = auc_score(p, target)
        return float("nan") if v is None else v
    vals = [auc_score(p[groups == g], target[groups == g]) for g in (0, 1)]
    vals = [v for v in vals if v is not None]
    return min(vals) if vals else float("nan")


class AdamW:
    """Decoupled weight decay Adam; decay is applied to every parameter."""

    def __init__(self, params: dict[str, np.ndarray], lr, beta1, beta2, weight_decay, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.wd, self.eps = lr, beta1, beta2, weight_decay, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            w = params[k]
            w *= 1.0 - self.lr * self.wd
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            w -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def train(
    train_set: Dataset,
    val_set: Dataset,
    arch: Architecture | None,
    cfg: TrainConfig,
    target: str = "y",
) -> TrainedModel:
    """Train with AdamW and early stopping; return the best-epoch weights.

    ``target="a"`` trains an attribute classifier (the adversary still runs
    but with ``lambda = 0``); use ``monitor="auc"`` for it.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise TrainingError("train and validation sets must be nonempty")
    x = train_set.design_matrix()
    t = getattr(train_set, target).astype(np.float64)
    a = train_set.a.astype(np.float64)
    for name, vec in ((target, t), ("a", a)):
        if len(np.unique(vec)) < 2:
            raise TrainingError(f"training data needs both values of {name!r}")
    if arch is None:
        arch = Architecture.default(x.shape[1])
    if arch.input_width != x.shape[1]:
        raise TrainingError(f"architecture expects width {arch.input_width}, data has {x.shape[1]}")
    x_val = val_set.design_matrix()
    t_val = getattr(val_set, target)
    lam = cfg.lam if target == "y" else 0.0
    conditional = cfg.method is Method.FRL_CONDITIONAL

    model = init_model(arch, cfg.seed)
    model.config = cfg
    adv_names = [k for k in model.params if k.startswith("adv_")]
    opt = AdamW(model.params, cfg.lr, cfg.beta1, cfg.beta2, cfg.weight_decay)
    opt_adv = AdamW(model.params, cfg.lr * cfg.adversary_lr_scale, cfg.beta1, cfg.beta2, cfg.weight_decay)
    order_rng = np.random.default_rng([cfg.seed, 1])
    bs = min(cfg.batch_size, len(x))
    best_val, best_epoch, best_params = -math.inf, None, None
    history = []
    for epoch in range(cfg.max_epochs):
        perm = order_rng.permutation(len(x))
        task_losses, adv_losses, sizes = [], [], []
        for start in range(0, len(x), bs):
            idx = perm[start: start + bs]
            r_batch = _encode(model, x[idx])[0] if cfg.adversary_steps > 1 else None
            for _ in range(cfg.adversary_steps - 1):
                g_adv, _ = adversary_gradients(model, x[idx], t[idx], a[idx], conditional, r_batch)
                opt_adv.step(model.params, g_adv)
            try:
                step, lt, la = _train_step_direction(model, x[idx], t[idx], a[idx], lam, conditional)
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}, batch starting at {start}: {exc}") from None
            opt_adv.step(model.params, {k: step.pop(k) for k in adv_names})
            opt.step(model.params, step)
            task_losses.append(lt)
            adv_losses.append(la)
            sizes.append(len(idx))
        val = _monitor_value(model, x_val, t_val, val_set.a, cfg.monitor)
        history.append({
            "epoch": epoch,
            "task_loss": float(np.average(task_losses, weights=sizes)),
            "adv_loss": float(np.average(adv_losses, weights=sizes)),
            "val_monitor": val,
        })
        if val > best_val:
            best_val, best_epoch = val, epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
        elif best_epoch is not None and epoch - best_epoch >= cfg.patience:
            break
    if best_params is None:
        raise TrainingError("validation monitor was undefined in every epoch")
    return TrainedModel(arch, best_params, cfg, history, best_epoch)
