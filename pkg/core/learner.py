"""
Feedforward network mapping an image/link context to transmission parameters.

Inputs are (N_roi, N_bg, r_D, rho); outputs are the normalized parameters
(zeta, P_p / (sigma_n gamma_max), P_s / (sigma_n gamma_max), nu / nu_max,
L_s / N_roi). Hidden layers are dense -> batch norm -> ReLU, the output layer
is linear. Gradients are accumulated by hand and applied with Adam.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from core.errors import ContractError, DomainError, NumericalFailureError
from core.system_model import SystemConfig, TxParams, divisors

logger = logging.getLogger(__name__)

INPUT_SCALE = np.array([config.DNN_PACKET_SCALE, config.DNN_PACKET_SCALE, config.DNN_MAX_RADIUS, 1.0])


@dataclass
class DnnModel:
    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    bn_scale: List[np.ndarray]
    bn_shift: List[np.ndarray]
    running_mean: List[np.ndarray]
    running_var: List[np.ndarray]
    input_scale: np.ndarray = field(default_factory=lambda: INPUT_SCALE.copy())

    @classmethod
    def initialize(cls, rng: np.random.Generator,
                   layer_sizes: Sequence[int] = config.DNN_LAYER_SIZES) -> "DnnModel":
        """He-uniform weights, zero biases, identity batch norm."""
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise DomainError(f"invalid layer sizes {sizes}")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        hidden = sizes[1:-1]
        return cls(
            layer_sizes=sizes,
            weights=weights,
            biases=biases,
            bn_scale=[np.ones(u) for u in hidden],
            bn_shift=[np.zeros(u) for u in hidden],
            running_mean=[np.zeros(u) for u in hidden],
            running_var=[np.ones(u) for u in hidden],
        )

    @property
    def n_hidden(self) -> int:
        return len(self.layer_sizes) - 2

    def parameters(self) -> Dict[str, np.ndarray]:
        """Trainable tensors by name; the arrays are the model's own (mutable) storage."""
        params = {}
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            params[f'W{k}'] = W
            params[f'b{k}'] = b
        for k, (g, d) in enumerate(zip(self.bn_scale, self.bn_shift)):
            params[f'bn_scale{k}'] = g
            params[f'bn_shift{k}'] = d
        return params


@dataclass(frozen=True)
class TrainingSample:
    """Context r = (N_roi, N_bg, r_D, rho) and normalized GA optimum p*."""
    inputs: Tuple[float, float, float, float]
    targets: Tuple[float, float, float, float, float]

    def __post_init__(self):
        if len(self.inputs) != 4 or len(self.targets) != 5:
            raise ContractError("a training sample has 4 inputs and 5 targets")
        if min(self.inputs[:3]) <= 0 or not 0 < self.inputs[3] <= 1:
            raise DomainError(f"inputs out of range: {self.inputs}")
        if not all(0 < t <= 1 for t in self.targets):
            raise DomainError(f"targets must lie in (0, 1], got {self.targets}")


def samples_to_arrays(samples: Sequence[TrainingSample]) -> Tuple[np.ndarray, np.ndarray]:
    X = np.array([s.inputs for s in samples], dtype=float)
    Y = np.array([s.targets for s in samples], dtype=float)
    return X, Y


@dataclass(frozen=True)
class TrainSettings:
    batch_size: int = config.DNN_BATCH_SIZE
    max_epochs: int = config.DNN_MAX_EPOCHS
    learning_rate: float = config.DNN_LEARNING_RATE
    drop_factor: float = config.DNN_DROP_FACTOR
    drop_period: int = config.LR_DROP_PERIOD
    split: Tuple[int, int, int] = config.DNN_SPLIT
    log_every: int = config.DNN_LOG_EVERY

    def __post_init__(self):
        if self.batch_size < 2:
            raise DomainError("batch norm needs mini-batches of at least 2 samples")
        if self.max_epochs < 1 or self.drop_period < 1:
            raise DomainError("max_epochs and drop_period must be at least 1")
        if not self.learning_rate > 0 or not 0 < self.drop_factor <= 1:
            raise DomainError("learning rate must be positive and drop factor in (0, 1]")
        if len(self.split) != 3 or self.split[0] < 2 or min(self.split) < 0:
            raise DomainError(f"invalid split {self.split}")

    def rate_at(self, epoch: int) -> float:
        return self.learning_rate * self.drop_factor ** (epoch // self.drop_period)


@dataclass
class TrainReport:
    train_mse: List[float] = field(default_factory=list)
    val_mse: List[float] = field(default_factory=list)
    learning_rates: List[float] = field(default_factory=list)
    test_mse: float = math.nan
    epochs: int = 0
    best_epoch: int = 0


# ==================== Forward / backward ====================

def _as_batch(model: DnnModel, inputs: np.ndarray) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    batch = np.atleast_2d(x)
    if batch.ndim != 2 or batch.shape[1] != model.layer_sizes[0]:
        raise ContractError(f"expected inputs of width {model.layer_sizes[0]}, got shape {x.shape}")
    if not np.all(np.isfinite(batch)):
        raise DomainError("inputs must be finite")
    return batch


def _forward(model: DnnModel, X: np.ndarray, train: bool):
    """Forward pass over normalized inputs; returns (output, cache)."""
    a = X
    cache = []
    for k in range(model.n_hidden):
        z = a @ model.weights[k].T + model.biases[k]
        if train:
            mean = z.mean(axis=0)
            var = z.var(axis=0)
        else:
            mean, var = model.running_mean[k], model.running_var[k]
        inv_std = 1.0 / np.sqrt(var + config.BN_EPSILON)
        xhat = (z - mean) * inv_std
        h = model.bn_scale[k] * xhat + model.bn_shift[k]
        cache.append({'a_prev': a, 'xhat': xhat, 'inv_std': inv_std, 'h': h, 'mean': mean, 'var': var})
        a = np.maximum(h, 0.0)
    out = a @ model.weights[-1].T + model.biases[-1]
    cache.append({'a_prev': a})
    return out, cache


def forward(model: DnnModel, inputs, mode: str = 'infer') -> np.ndarray:
    """
    Network output for raw (unnormalized) inputs.

    mode 'train' normalizes with the batch statistics, 'infer' with the
    running statistics. A single input vector yields a single output vector.
    """
    if mode not in ('train', 'infer'):
        raise DomainError(f"mode must be 'train' or 'infer', got {mode!r}")
    X = _as_batch(model, inputs) / model.input_scale
    out, _ = _forward(model, X, mode == 'train')
    return out[0] if np.ndim(inputs) == 1 else out


def mse(output: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean((output - targets) ** 2))


def backward(model: DnnModel, cache: list, output: np.ndarray, targets: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients of the MSE loss with respect to every trainable tensor."""
    grads = {}
    dy = 2.0 * (output - targets) / output.size
    last = len(model.weights) - 1
    grads[f'W{last}'] = dy.T @ cache[-1]['a_prev']
    grads[f'b{last}'] = dy.sum(axis=0)
    da = dy @ model.weights[-1]

    for k in reversed(range(model.n_hidden)):
        c = cache[k]
        dh = da * (c['h'] > 0)
        grads[f'bn_scale{k}'] = np.sum(dh * c['xhat'], axis=0)
        grads[f'bn_shift{k}'] = dh.sum(axis=0)
        dxhat = dh * model.bn_scale[k]
        n = dxhat.shape[0]
        dz = c['inv_std'] / n * (n * dxhat - dxhat.sum(axis=0)
                                 - c['xhat'] * np.sum(dxhat * c['xhat'], axis=0))
        grads[f'W{k}'] = dz.T @ c['a_prev']
        grads[f'b{k}'] = dz.sum(axis=0)
        da = dz @ model.weights[k]
    return grads


def loss_and_gradients(model: DnnModel, X: np.ndarray, Y: np.ndarray):
    """Train-mode loss and gradients for normalized inputs X."""
    out, cache = _forward(model, X, train=True)
    return mse(out, Y), backward(model, cache, out, Y), cache


def gradient_check(model: DnnModel, inputs: np.ndarray, targets: np.ndarray,
                   step: float = 1e-5) -> Dict[str, float]:
    """Relative error between backprop and central differences, per tensor."""
    X = _as_batch(model, inputs) / model.input_scale
    Y = np.atleast_2d(np.asarray(targets, dtype=float))
    _, analytic, _ = loss_and_gradients(model, X, Y)
    errors = {}
    for name, tensor in model.parameters().items():
        numeric = np.zeros_like(tensor)
        for idx in np.ndindex(tensor.shape):
            original = tensor[idx]
            tensor[idx] = original + step
            up = mse(_forward(model, X, True)[0], Y)
            tensor[idx] = original - step
            down = mse(_forward(model, X, True)[0], Y)
            tensor[idx] = original
            numeric[idx] = (up - down) / (2.0 * step)
        scale = max(np.linalg.norm(analytic[name]), np.linalg.norm(numeric), 1e-6)
        errors[name] = float(np.linalg.norm(analytic[name] - numeric) / scale)
    return errors


# ==================== Training ====================

class Adam:
    """Adam with bias-corrected moments over a dict of tensors updated in place."""

    def __init__(self, params: Dict[str, np.ndarray], beta1: float = config.ADAM_BETA1,
                 beta2: float = config.ADAM_BETA2, epsilon: float = config.ADAM_EPSILON):
        self.params = params
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}
        self.t = 0

    def step(self, grads: Dict[str, np.ndarray], learning_rate: float):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, param in self.params.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            param -= learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def _update_running_stats(model: DnnModel, cache: list):
    momentum = config.BN_MOMENTUM
    for k in range(model.n_hidden):
        model.running_mean[k] = momentum * model.running_mean[k] + (1.0 - momentum) * cache[k]['mean']
        model.running_var[k] = momentum * model.running_var[k] + (1.0 - momentum) * cache[k]['var']


def _infer_mse(model: DnnModel, X: np.ndarray, Y: np.ndarray) -> float:
    if len(X) == 0:
        return math.nan
    return mse(_forward(model, X, train=False)[0], Y)


def train(inputs: np.ndarray, targets: np.ndarray, rng: np.random.Generator,
          settings: Optional[TrainSettings] = None,
          model: Optional[DnnModel] = None) -> Tuple[DnnModel, TrainReport]:
    """
    Fit the network on raw inputs and normalized targets.

    The data are shuffled once and split into train / validation / test
    parts of the configured sizes. The returned model is the checkpoint with
    the lowest validation MSE (train MSE when there is no validation part).
    """
    settings = settings or TrainSettings()
    X_all = np.asarray(inputs, dtype=float)
    Y_all = np.asarray(targets, dtype=float)
    n_train, n_val, n_test = settings.split
    if len(X_all) != len(Y_all):
        raise ContractError("inputs and targets differ in length")
    if len(X_all) < n_train + n_val + n_test:
        raise ContractError(f"dataset has {len(X_all)} samples, split needs {n_train + n_val + n_test}")

    model = model or DnnModel.initialize(rng)
    X_all = _as_batch(model, X_all) / model.input_scale
    order = rng.permutation(len(X_all))
    parts = np.split(order[:n_train + n_val + n_test], [n_train, n_train + n_val])
    (X_tr, Y_tr), (X_val, Y_val), (X_te, Y_te) = [(X_all[p], Y_all[p]) for p in parts]

    optimizer = Adam(model.parameters())
    report = TrainReport()
    best_score, best_model = math.inf, copy.deepcopy(model)

    for epoch in range(settings.max_epochs):
        rate = settings.rate_at(epoch)
        shuffled = rng.permutation(n_train)
        for batch_index, start in enumerate(range(0, n_train, settings.batch_size)):
            idx = shuffled[start:start + settings.batch_size]
            if len(idx) < 2:
                continue
            loss, grads, cache = loss_and_gradients(model, X_tr[idx], Y_tr[idx])
            if not math.isfinite(loss):
                raise NumericalFailureError(
                    f"training loss is {loss} at learning rate {rate:.3g}, "
                    f"epoch {epoch}, batch {batch_index}")
            optimizer.step(grads, rate)
            _update_running_stats(model, cache)

        train_loss = _infer_mse(model, X_tr, Y_tr)
        val_loss = _infer_mse(model, X_val, Y_val)
        report.train_mse.append(train_loss)
        report.val_mse.append(val_loss)
        report.learning_rates.append(rate)

        score = val_loss if n_val else train_loss
        if score < best_score:
            best_score, best_model = score, copy.deepcopy(model)
            report.best_epoch = epoch
        if (epoch + 1) % settings.log_every == 0:
            logger.info(f"Epoch {epoch + 1}: train MSE {train_loss:.4g}, val MSE {val_loss:.4g}, lr {rate:.3g}")

    report.epochs = settings.max_epochs
    report.test_mse = _infer_mse(best_model, X_te, Y_te)
    return best_model, report


# ==================== Online use ====================

def nearest_divisor(N_roi: int, target: float) -> int:
    return min(divisors(N_roi), key=lambda d: (abs(d - target), d))


def denormalize(output: np.ndarray, cfg: SystemConfig, N_roi: int) -> TxParams:
    """Map a normalized output vector onto a box- and divisibility-feasible TxParams."""
    zeta, p_p, p_s, nu, l_s = (float(v) for v in output)
    scale = cfg.sigma_n * cfg.gamma_max
    low = cfg.gamma_min / cfg.gamma_max
    return TxParams(
        zeta=min(max(zeta, config.ZETA_MIN), 1.0),
        P_p=min(max(p_p, low), 1.0) * scale,
        P_s=min(max(p_s, low), 1.0) * scale,
        nu=max(nu, 0.0) * config.NU_MAX_FACTOR * cfg.n_T,
        L_s=nearest_divisor(N_roi, l_s * N_roi),
    )


def normalize_targets(tx: TxParams, cfg: SystemConfig, N_roi: int) -> Tuple[float, ...]:
    """Inverse of denormalize for a feasible TxParams."""
    scale = cfg.sigma_n * cfg.gamma_max
    return (tx.zeta, tx.P_p / scale, tx.P_s / scale,
            tx.nu / (config.NU_MAX_FACTOR * cfg.n_T), tx.L_s / N_roi)


def predict(model: DnnModel, cfg: SystemConfig, N_roi: int, N_bg: int) -> TxParams:
    """Transmission parameters for an image of N_roi + N_bg packets under cfg."""
    if N_roi < 1:
        raise ContractError("prediction needs at least one confidential packet")
    output = forward(model, np.array([N_roi, N_bg, cfg.r_D, cfg.rho], dtype=float))
    return denormalize(output, cfg, N_roi)


def online_cost(model: DnnModel) -> Tuple[int, int]:
    """
    (multiplications, activations) of one forward pass.

    Every dense product counts, plus the batch-norm scale of each hidden unit;
    every unit past the input layer is one activation, the linear output included.
    """
    sizes = model.layer_sizes
    dense = sum(a * b for a, b in zip(sizes[:-1], sizes[1:]))
    return dense + sum(sizes[1:-1]), sum(sizes[1:])


# ==================== Persistence ====================

def save_model(model: DnnModel, path: str):
    tensors = {
        'format_version': np.array([config.MODEL_FORMAT_VERSION], dtype='<i8'),
        'layer_sizes': np.array(model.layer_sizes, dtype='<i8'),
        'input_scale': model.input_scale.astype('<f8'),
    }
    for name, tensor in model.parameters().items():
        tensors[name] = tensor.astype('<f8')
    for k in range(model.n_hidden):
        tensors[f'running_mean{k}'] = model.running_mean[k].astype('<f8')
        tensors[f'running_var{k}'] = model.running_var[k].astype('<f8')
    with open(path, 'wb') as handle:
        np.savez(handle, **tensors)
    logger.info(f"Saved model to {path}")


def load_model(path: str) -> DnnModel:
    with np.load(path) as data:
        version = int(data['format_version'][0])
        if version != config.MODEL_FORMAT_VERSION:
            raise ContractError(f"model file version {version}, expected {config.MODEL_FORMAT_VERSION}")
        sizes = tuple(int(s) for s in data['layer_sizes'])
        n_layers, n_hidden = len(sizes) - 1, len(sizes) - 2

        def tensors(prefix, count):
            return [np.array(data[f'{prefix}{k}'], dtype=np.float64) for k in range(count)]

        model = DnnModel(
            layer_sizes=sizes,
            weights=tensors('W', n_layers),
            biases=tensors('b', n_layers),
            bn_scale=tensors('bn_scale', n_hidden),
            bn_shift=tensors('bn_shift', n_hidden),
            running_mean=tensors('running_mean', n_hidden),
            running_var=tensors('running_var', n_hidden),
            input_scale=np.array(data['input_scale'], dtype=np.float64),
        )
    for k, W in enumerate(model.weights):
        if W.shape != (sizes[k + 1], sizes[k]):
            raise ContractError(f"layer {k} weight shape {W.shape} does not match sizes {sizes}")
    return model
