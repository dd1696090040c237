"""Coordinate MLP with sine / FINER activations, exact gradients and Adam

Everything runs full-batch in float64 on numpy arrays:
  - coordinates are N x 2, targets and loss weights are N x C
  - layer l holds W (out x in) and b (out,); hidden layers apply the
    activation, the last layer is affine
"""
from dataclasses import dataclass, field, replace
from typing import List, Tuple, Union

import numpy as np

from config import constants
from utils.errors import DegenerateMaskError, NonFiniteGradientError, ShapeMismatchError


@dataclass(frozen=True)
class Activation:
    """sine: sin(w0 z); finer: sin(w0 (|z| + 1) z)"""
    kind: str = "sine"
    omega0: float = constants.OMEGA0

    def __post_init__(self):
        if self.kind not in constants.ACTIVATION_IDS:
            raise ValueError(f"Unknown activation {self.kind!r}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "finer":
            return np.sin(self.omega0 * (np.abs(z) + 1.0) * z)
        return np.sin(self.omega0 * z)

    def derivative(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "finer":
            a = np.abs(z)
            return np.cos(self.omega0 * (a + 1.0) * z) * self.omega0 * (2.0 * a + 1.0)
        return self.omega0 * np.cos(self.omega0 * z)


def activation_for(backbone: str, omega0: float = constants.OMEGA0) -> Activation:
    """Map a backbone name (siren / finer) to its activation"""
    if backbone not in constants.BACKBONES:
        raise ValueError(f"backbone must be one of {constants.BACKBONES}, got {backbone!r}")
    return Activation("finer" if backbone == "finer" else "sine", omega0)


@dataclass
class MlpParams:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: Activation = field(default_factory=Activation)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeMismatchError("weights and biases must be non-empty lists of equal length")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ShapeMismatchError(f"layer {i}: weight {W.shape} and bias {b.shape} disagree")
            if i > 0 and W.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeMismatchError(f"layer {i} input {W.shape[1]} != layer {i - 1} output")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} contains non-finite parameters")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def dims(self) -> List[int]:
        return [self.in_dim] + [W.shape[0] for W in self.weights]


@dataclass
class Grads:
    """Gradient arrays shaped like MlpParams"""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def arrays(self) -> List[np.ndarray]:
        return self.weights + self.biases


@dataclass(frozen=True)
class CoordBatch:
    coords: np.ndarray
    targets: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != constants.COORD_DIM:
            raise ShapeMismatchError(f"coords must be N x {constants.COORD_DIM}, got {coords.shape}")
        if targets.ndim != 2 or targets.shape[0] != coords.shape[0]:
            raise ShapeMismatchError(f"targets {targets.shape} do not match coords {coords.shape}")
        if weights.shape != targets.shape:
            raise ShapeMismatchError(f"weights {weights.shape} do not match targets {targets.shape}")
        if np.any(np.abs(coords) > 1.0):
            raise ValueError("coordinates must lie in [-1, 1]^2")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def unweighted(cls, coords: np.ndarray, targets: np.ndarray) -> "CoordBatch":
        targets = np.asarray(targets, dtype=np.float64)
        return cls(coords, targets, np.ones_like(targets))

    def __len__(self) -> int:
        return self.coords.shape[0]


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0
    lr: float = constants.LEARNING_RATE
    beta1: float = constants.ADAM_BETA1
    beta2: float = constants.ADAM_BETA2
    eps: float = constants.ADAM_EPS

    def __post_init__(self):
        if self.t < 0 or not self.lr > 0 or not self.eps > 0:
            raise ValueError("Adam needs t >= 0, lr > 0 and eps > 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")


def init_mlp(hidden_layers: int, width: int, out_channels: int, activation: Activation,
             seed: int, finer_bias_scale: float = constants.FINER_BIAS_SCALE) -> MlpParams:
    """SIREN initialization; FINER additionally draws the first-layer bias from [-k, k]"""
    if hidden_layers < 1 or width < 1:
        raise ValueError("hidden_layers and width must be >= 1")
    if out_channels not in (1, 3):
        raise ValueError(f"out_channels must be 1 or 3, got {out_channels}")

    rng = np.random.default_rng(seed)
    dims = [constants.COORD_DIM] + [width] * hidden_layers + [out_channels]
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        if i == 0:
            bound = 1.0 / fan_in
        else:
            bound = np.sqrt(6.0 / fan_in) / activation.omega0
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        if i == 0 and activation.kind == "finer":
            biases.append(rng.uniform(-finer_bias_scale, finer_bias_scale, size=fan_out))
        else:
            biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, activation)


def _coords_of(coords: Union[np.ndarray, CoordBatch]) -> np.ndarray:
    if isinstance(coords, CoordBatch):
        return coords.coords
    return np.asarray(coords, dtype=np.float64)


def _forward_cache(params: MlpParams, x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ShapeMismatchError(f"coords {x.shape} do not match network input dim {params.in_dim}")
    act = params.activation
    hs, zs = [x], []
    h = x
    for W, b in zip(params.weights[:-1], params.biases[:-1]):
        z = h @ W.T + b
        h = act(z)
        zs.append(z)
        hs.append(h)
    y = h @ params.weights[-1].T + params.biases[-1]
    return y, hs, zs


def forward(params: MlpParams, coords: Union[np.ndarray, CoordBatch]) -> np.ndarray:
    """N x C predictions, unclamped"""
    y, _, _ = _forward_cache(params, _coords_of(coords))
    return y


def loss_and_grad(params: MlpParams, batch: CoordBatch, weighted: bool) -> Tuple[float, Grads]:
    """Full-batch MSE (or mask-weighted MSE) and its exact parameter gradients

    The weighted loss is sum(w * e^2) / (sum(w) / C), so w == 1 gives exactly
    the per-pixel MSE (1/N) sum ||e_i||^2 and any constant rescaling of w cancels.
    For C channels this is C times the per-element form sum(w * e^2) / sum(w);
    the two agree on grayscale, and Adam's steps are insensitive to the factor
    up to eps.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    y, hs, zs = _forward_cache(params, batch.coords)
    if y.shape != batch.targets.shape:
        raise ShapeMismatchError(f"predictions {y.shape} do not match targets {batch.targets.shape}")

    w = batch.weights if weighted else np.ones_like(batch.targets)
    total = np.sum(w)
    if not total > 0:
        raise DegenerateMaskError(f"loss weights sum to {total}")
    denom = total / batch.targets.shape[1]

    diff = y - batch.targets
    loss = float(np.sum(w * diff * diff) / denom)

    grad_out = 2.0 * w * diff / denom
    n_layers = len(params.weights)
    dW: List[np.ndarray] = [None] * n_layers
    db: List[np.ndarray] = [None] * n_layers

    dW[-1] = grad_out.T @ hs[-1]
    db[-1] = grad_out.sum(axis=0)
    dh = grad_out @ params.weights[-1]
    for layer in range(n_layers - 2, -1, -1):
        dz = dh * params.activation.derivative(zs[layer])
        dW[layer] = dz.T @ hs[layer]
        db[layer] = dz.sum(axis=0)
        if layer > 0:
            dh = dz @ params.weights[layer]
    return loss, Grads(dW, db)


def init_adam(params: MlpParams, lr: float = constants.LEARNING_RATE,
              beta1: float = constants.ADAM_BETA1, beta2: float = constants.ADAM_BETA2,
              eps: float = constants.ADAM_EPS) -> AdamState:
    """Zero moments shaped like params"""
    arrays = params.weights + params.biases
    return AdamState(
        m=[np.zeros_like(a) for a in arrays],
        v=[np.zeros_like(a) for a in arrays],
        t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(state: AdamState, params: MlpParams, grads: Grads) -> Tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state, inputs untouched"""
    arrays = params.weights + params.biases
    g_arrays = grads.arrays()
    if len(g_arrays) != len(arrays) or len(state.m) != len(arrays):
        raise ShapeMismatchError("params, grads and optimizer state have different layer counts")
    for a, g, m in zip(arrays, g_arrays, state.m):
        if a.shape != g.shape or a.shape != m.shape:
            raise ShapeMismatchError(f"shape mismatch {a.shape} / {g.shape} / {m.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError("gradient contains non-finite values")

    t = state.t + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    new_m, new_v, new_arrays = [], [], []
    for a, g, m, v in zip(arrays, g_arrays, state.m, state.v):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_arrays.append(a - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
        new_m.append(m)
        new_v.append(v)

    k = len(params.weights)
    new_params = MlpParams(new_arrays[:k], new_arrays[k:], params.activation)
    return new_params, replace(state, m=new_m, v=new_v, t=t)
