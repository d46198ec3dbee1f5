"""Feedforward regression network with exact backpropagation, written on numpy.

Fixed topology: tanh hidden layers, an identity or exponential output head,
optional batch normalization on hidden pre-activations, Adam updates, Xavier
initialization, and an epoch loop with validation-based early stopping.
No autodiff framework is involved; gradients are derived by hand and checked
against finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

BN_EPSILON = 1e-3
BN_MOMENTUM = 0.99
EXP_CLAMP = 30.0  # pre-activation clamp of the exponential head

PARAMS_SCHEMA_VERSION = 1

_ACTIVATIONS = ("identity", "exponential")


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class NetworkArchitecture:
    """Shape of the network: input width, hidden widths, output head.

    The output layer always has one unit; hidden activation is tanh.
    ``hidden_sizes`` may be empty, which leaves a single affine layer.
    """

    input_dim: int
    hidden_sizes: tuple[int, ...]
    output_activation: str = "exponential"
    batch_norm: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(q) for q in self.hidden_sizes))
        if self.input_dim < 1 or any(q < 1 for q in self.hidden_sizes):
            raise ValueError("layer sizes must be positive")
        if self.output_activation not in _ACTIVATIONS:
            raise ValueError(f"output_activation must be one of {_ACTIVATIONS}")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes, 1)

    @property
    def n_layers(self) -> int:
        return len(self.hidden_sizes) + 1

    @property
    def parameter_count(self) -> int:
        """Number of affine parameters sum_j q_j (q_{j-1} + 1)."""
        sizes = self.layer_sizes
        return sum(sizes[j] * (sizes[j - 1] + 1) for j in range(1, len(sizes)))

    @property
    def uses_batch_norm(self) -> bool:
        return self.batch_norm and len(self.hidden_sizes) > 0


@dataclass
class NetworkParams:
    """All trainable arrays plus batch-norm running statistics.

    ``weights[j]`` has shape (q_{j+1}, q_j); batch-norm lists are per hidden
    layer and are None when batch norm is disabled.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bn_scale: list[np.ndarray] | None = None
    bn_shift: list[np.ndarray] | None = None
    bn_running_mean: list[np.ndarray] | None = None
    bn_running_var: list[np.ndarray] | None = None

    def copy(self) -> "NetworkParams":
        dup = lambda lst: None if lst is None else [a.copy() for a in lst]
        return NetworkParams(
            weights=dup(self.weights),
            biases=dup(self.biases),
            bn_scale=dup(self.bn_scale),
            bn_shift=dup(self.bn_shift),
            bn_running_mean=dup(self.bn_running_mean),
            bn_running_var=dup(self.bn_running_var),
        )

    def validate(self) -> None:
        for a in self.weights + self.biases:
            if not np.all(np.isfinite(a)):
                raise ValueError("network parameters contain non-finite entries")
        if self.bn_running_var is not None:
            for v in self.bn_running_var:
                if not np.all(v > 0.0):
                    raise ValueError("batch-norm running variances must be positive")


@dataclass
class ParameterGradients:
    """Backprop output; mirrors the trainable arrays of NetworkParams.

    ``batch_mean`` / ``batch_var`` carry the observed pre-activation batch
    statistics so the training loop can update the running estimates.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bn_scale: list[np.ndarray] | None
    bn_shift: list[np.ndarray] | None
    batch_mean: list[np.ndarray] | None
    batch_var: list[np.ndarray] | None


def init_params(arch: NetworkArchitecture, output_bias: float, seed) -> NetworkParams:
    """Xavier-uniform weights, zero biases, and a data-informed last bias.

    ``output_bias`` is the initial value of the final bias: pass log(mean(Y))
    for the exponential head (so the net starts at the target mean) and
    mean(Y) for the identity head.  Deterministic given the seed.
    """
    output_bias = float(output_bias)
    if not np.isfinite(output_bias):
        raise ValueError("output_bias must be finite")
    rng = np.random.default_rng(seed)
    sizes = arch.layer_sizes
    weights, biases = [], []
    for j in range(1, len(sizes)):
        fan_in, fan_out = sizes[j - 1], sizes[j]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    biases[-1][0] = output_bias
    params = NetworkParams(weights=weights, biases=biases)
    if arch.uses_batch_norm:
        params.bn_scale = [np.ones(q) for q in arch.hidden_sizes]
        params.bn_shift = [np.zeros(q) for q in arch.hidden_sizes]
        params.bn_running_mean = [np.zeros(q) for q in arch.hidden_sizes]
        params.bn_running_var = [np.ones(q) for q in arch.hidden_sizes]
    return params


def _forward_batch(params: NetworkParams, arch: NetworkArchitecture, x: np.ndarray,
                   train_mode: bool, keep_cache: bool = False):
    n_hidden = len(arch.hidden_sizes)
    h = x
    cache = {"inputs": [], "zhat": [], "inv_std": [], "tanh": [],
             "batch_mean": [], "batch_var": []}
    for j in range(n_hidden):
        if keep_cache:
            cache["inputs"].append(h)
        z = h @ params.weights[j].T + params.biases[j]
        if arch.uses_batch_norm:
            if train_mode:
                mean = z.mean(axis=0)
                var = z.var(axis=0)
            else:
                mean = params.bn_running_mean[j]
                var = params.bn_running_var[j]
            inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
            zhat = (z - mean) * inv_std
            z = params.bn_scale[j] * zhat + params.bn_shift[j]
            if keep_cache:
                cache["zhat"].append(zhat)
                cache["inv_std"].append(inv_std)
                cache["batch_mean"].append(mean)
                cache["batch_var"].append(var)
        h = np.tanh(z)
        if keep_cache:
            cache["tanh"].append(h)
    if keep_cache:
        cache["inputs"].append(h)
    out = (h @ params.weights[-1].T + params.biases[-1])[:, 0]
    if arch.output_activation == "exponential":
        pred = np.exp(np.clip(out, -EXP_CLAMP, EXP_CLAMP))
        if keep_cache:
            cache["head_grad"] = pred * ((out > -EXP_CLAMP) & (out < EXP_CLAMP))
    else:
        pred = out
        if keep_cache:
            cache["head_grad"] = np.ones_like(out)
    return pred, cache


def forward(params: NetworkParams, arch: NetworkArchitecture, x, mode: str = "infer"):
    """Evaluate the network on a single d-vector or an (n, d) batch.

    In infer mode batch norm uses running statistics and the call is a pure
    function of (params, x); in train mode it uses the batch's own statistics.
    """
    if mode not in ("train", "infer"):
        raise ValueError("mode must be 'train' or 'infer'")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise ValueError(f"input must have dimension {arch.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite entries")
    pred, _ = _forward_batch(params, arch, x, train_mode=(mode == "train"))
    return float(pred[0]) if single else pred


def loss_and_gradient(params: NetworkParams, arch: NetworkArchitecture,
                      x: np.ndarray, y: np.ndarray) -> tuple[float, ParameterGradients]:
    """Mean-squared loss over the batch and its exact parameter gradient.

    Forward runs in train mode (batch statistics); the gradient covers all
    weights, biases and batch-norm scale/shift.  Running statistics are not
    touched here; the observed batch statistics ride along on the result.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.size or x.size == 0:
        raise ValueError("need a non-empty batch with x of shape (n, d), y of shape (n,)")
    n = y.size
    pred, cache = _forward_batch(params, arch, x, train_mode=True, keep_cache=True)
    resid = pred - y
    loss = float(np.mean(resid * resid))

    n_hidden = len(arch.hidden_sizes)
    d_weights = [None] * arch.n_layers
    d_biases = [None] * arch.n_layers
    d_scale = [None] * n_hidden if arch.uses_batch_norm else None
    d_shift = [None] * n_hidden if arch.uses_batch_norm else None

    d_out = (2.0 / n) * resid * cache["head_grad"]  # (n,)
    h_last = cache["inputs"][-1]
    d_weights[-1] = d_out[None, :] @ h_last
    d_biases[-1] = np.array([d_out.sum()])
    d_h = d_out[:, None] @ params.weights[-1]

    for j in range(n_hidden - 1, -1, -1):
        d_zt = d_h * (1.0 - cache["tanh"][j] ** 2)
        if arch.uses_batch_norm:
            zhat = cache["zhat"][j]
            inv_std = cache["inv_std"][j]
            d_scale[j] = (d_zt * zhat).sum(axis=0)
            d_shift[j] = d_zt.sum(axis=0)
            d_zhat = d_zt * params.bn_scale[j]
            b = zhat.shape[0]
            d_z = (inv_std / b) * (
                b * d_zhat - d_zhat.sum(axis=0) - zhat * (d_zhat * zhat).sum(axis=0)
            )
        else:
            d_z = d_zt
        d_weights[j] = d_z.T @ cache["inputs"][j]
        d_biases[j] = d_z.sum(axis=0)
        if j > 0:
            d_h = d_z @ params.weights[j]

    grads = ParameterGradients(
        weights=d_weights,
        biases=d_biases,
        bn_scale=d_scale,
        bn_shift=d_shift,
        batch_mean=cache["batch_mean"] if arch.uses_batch_norm else None,
        batch_var=cache["batch_var"] if arch.uses_batch_norm else None,
    )
    return loss, grads


def mean_squared_error(params: NetworkParams, arch: NetworkArchitecture,
                       x: np.ndarray, y: np.ndarray) -> float:
    """Infer-mode MSE over a dataset."""
    pred = forward(params, arch, x, mode="infer")
    return float(np.mean((pred - y) ** 2))


# --- flattening and Adam ----------------------------------------------------

def flatten_trainable(params: NetworkParams) -> np.ndarray:
    """All trainable arrays as one flat vector (row-major weights, then biases,
    then batch-norm scale/shift per hidden layer)."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b)
    if params.bn_scale is not None:
        for s, t in zip(params.bn_scale, params.bn_shift):
            parts.append(s)
            parts.append(t)
    return np.concatenate(parts)


def flatten_gradients(grads: ParameterGradients) -> np.ndarray:
    parts = []
    for w, b in zip(grads.weights, grads.biases):
        parts.append(w.ravel())
        parts.append(b)
    if grads.bn_scale is not None:
        for s, t in zip(grads.bn_scale, grads.bn_shift):
            parts.append(s)
            parts.append(t)
    return np.concatenate(parts)


def write_trainable(params: NetworkParams, theta: np.ndarray) -> None:
    """Write a flat vector produced by :func:`flatten_trainable` back in place."""
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        chunk = theta[pos:pos + size].reshape(shape)
        pos += size
        return chunk

    for j in range(len(params.weights)):
        params.weights[j][...] = take(params.weights[j].shape)
        params.biases[j][...] = take(params.biases[j].shape)
    if params.bn_scale is not None:
        for j in range(len(params.bn_scale)):
            params.bn_scale[j][...] = take(params.bn_scale[j].shape)
            params.bn_shift[j][...] = take(params.bn_shift[j].shape)
    if pos != theta.size:
        raise ValueError("flat vector length does not match parameter shapes")


@dataclass
class AdamState:
    """First/second moment accumulators plus the fixed hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    @staticmethod
    def zeros(dim: int, learning_rate: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-7) -> "AdamState":
        return AdamState(np.zeros(dim), np.zeros(dim), learning_rate, beta1, beta2, epsilon)


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState,
              step_index: int) -> np.ndarray:
    """One Adam update with bias-corrected moments; mutates state, returns new theta."""
    if step_index < 1:
        raise ValueError("step_index must be >= 1")
    if grad.shape != theta.shape or state.m.shape != theta.shape:
        raise ValueError("gradient/state dimensions must match parameters")
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** step_index)
    v_hat = state.v / (1.0 - state.beta2 ** step_index)
    return theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


# --- training loop ----------------------------------------------------------

@dataclass(frozen=True)
class TrainingConfig:
    """Optimization settings; Adam defaults 0.001 / 0.9 / 0.999 / 1e-7.

    ``patience`` counts consecutive epochs without validation improvement
    before stopping; set it >= epochs to disable early stopping.  The final
    partial mini-batch is processed.
    """

    epochs: int
    batch_size: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-7
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")


@dataclass
class TrainingHistory:
    """Per-epoch infer-mode MSE on the training and validation sets."""

    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    extras: list[dict] = field(default_factory=list)
    best_epoch: int = 0  # 1-based epoch whose parameters are returned


def train(arch: NetworkArchitecture, config: TrainingConfig,
          train_x: np.ndarray, train_y: np.ndarray,
          val_x: np.ndarray, val_y: np.ndarray,
          epoch_callback=None) -> tuple[NetworkParams, TrainingHistory]:
    """Mini-batch Adam training with seeded reshuffles and early stopping.

    Returns the parameters of the best-validation epoch.  ``epoch_callback``
    (epoch, params) -> dict, when given, is evaluated after every epoch and
    its result stored in the history extras.
    """
    train_x = np.asarray(train_x, dtype=float)
    train_y = np.asarray(train_y, dtype=float)
    val_x = np.asarray(val_x, dtype=float)
    val_y = np.asarray(val_y, dtype=float)
    if train_y.size == 0 or val_y.size == 0:
        raise ValueError("training and validation sets must be non-empty")

    mean_y = float(train_y.mean())
    if arch.output_activation == "exponential":
        if mean_y <= 0.0:
            raise ValueError("exponential head requires strictly positive mean target")
        bias0 = float(np.log(mean_y))
    else:
        bias0 = mean_y

    root = np.random.SeedSequence(config.seed)
    init_ss, shuffle_ss = root.spawn(2)
    params = init_params(arch, bias0, init_ss)
    rng = np.random.default_rng(shuffle_ss)

    theta = flatten_trainable(params)
    state = AdamState.zeros(theta.size, config.learning_rate, config.beta1,
                            config.beta2, config.adam_epsilon)
    history = TrainingHistory()
    best_val = np.inf
    best_params = params.copy()
    stale = 0
    step = 0
    n = train_y.size

    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            loss, grads = loss_and_gradient(params, arch, train_x[idx], train_y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite training loss at epoch {epoch}, step {step + 1}"
                )
            step += 1
            theta = adam_step(theta, flatten_gradients(grads), state, step)
            write_trainable(params, theta)
            if arch.uses_batch_norm:
                for j in range(len(arch.hidden_sizes)):
                    params.bn_running_mean[j] *= BN_MOMENTUM
                    params.bn_running_mean[j] += (1.0 - BN_MOMENTUM) * grads.batch_mean[j]
                    params.bn_running_var[j] *= BN_MOMENTUM
                    params.bn_running_var[j] += (1.0 - BN_MOMENTUM) * grads.batch_var[j]

        history.train_mse.append(mean_squared_error(params, arch, train_x, train_y))
        history.val_mse.append(mean_squared_error(params, arch, val_x, val_y))
        history.extras.append(epoch_callback(epoch, params) if epoch_callback else {})
        if not np.isfinite(history.val_mse[-1]):
            raise TrainingDivergedError(f"non-finite validation error at epoch {epoch}")

        if history.val_mse[-1] < best_val:
            best_val = history.val_mse[-1]
            best_params = params.copy()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break

    return best_params, history


# --- serialization ----------------------------------------------------------

def params_to_dict(params: NetworkParams, arch: NetworkArchitecture) -> dict:
    """Versioned JSON-ready document: layer sizes, row-major weights, norm stats."""
    doc = {
        "version": PARAMS_SCHEMA_VERSION,
        "input_dim": arch.input_dim,
        "hidden_sizes": list(arch.hidden_sizes),
        "output_activation": arch.output_activation,
        "batch_norm": arch.batch_norm,
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    if params.bn_scale is not None:
        doc["batch_norm_layers"] = {
            "scale": [a.tolist() for a in params.bn_scale],
            "shift": [a.tolist() for a in params.bn_shift],
            "running_mean": [a.tolist() for a in params.bn_running_mean],
            "running_var": [a.tolist() for a in params.bn_running_var],
        }
    return doc


def params_from_dict(doc: dict) -> tuple[NetworkArchitecture, NetworkParams]:
    if doc.get("version") != PARAMS_SCHEMA_VERSION:
        raise ValueError(f"unsupported parameter schema version {doc.get('version')!r}")
    arch = NetworkArchitecture(
        input_dim=int(doc["input_dim"]),
        hidden_sizes=tuple(doc["hidden_sizes"]),
        output_activation=doc["output_activation"],
        batch_norm=bool(doc["batch_norm"]),
    )
    params = NetworkParams(
        weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
    )
    if "batch_norm_layers" in doc:
        bn = doc["batch_norm_layers"]
        params.bn_scale = [np.asarray(a, dtype=float) for a in bn["scale"]]
        params.bn_shift = [np.asarray(a, dtype=float) for a in bn["shift"]]
        params.bn_running_mean = [np.asarray(a, dtype=float) for a in bn["running_mean"]]
        params.bn_running_var = [np.asarray(a, dtype=float) for a in bn["running_var"]]
    params.validate()
    return arch, params


def save_params(path, params: NetworkParams, arch: NetworkArchitecture) -> None:
    with open(path, "w") as fh:
        json.dump(params_to_dict(params, arch), fh)


def load_params(path) -> tuple[NetworkArchitecture, NetworkParams]:
    with open(path) as fh:
        return params_from_dict(json.load(fh))
