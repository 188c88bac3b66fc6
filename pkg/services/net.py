"""
One-dimensional convolutional estimator with hand-written backpropagation and Adam.

Layer stack for a (window_length x in_channels) input:

    conv1 (tanh) -> conv2 (tanh) -> flatten -> dense1 (tanh) -> dense2 (tanh)
    -> dense3 -> |.| * output_scale

Convolutions are valid cross-correlations with stride 1. Filters are stored
as (filters, width, in_channels) so out[t, f] = b[f] + sum_{k,c} W[f, k, c] x[t + k, c].
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from exceptions import CheckpointError, DatasetFormatError, DomainError
from schemas import CHECKPOINT_FORMAT_VERSION, Architecture, CheckpointManifest, Objective, TensorRecord
from storage import read_f64, read_model, write_f64, write_model

logger = logging.getLogger(__name__)

TENSOR_NAMES = (
    "conv1_w", "conv1_b",
    "conv2_w", "conv2_b",
    "dense1_w", "dense1_b",
    "dense2_w", "dense2_b",
    "dense3_w", "dense3_b",
)

CHECKPOINT_MANIFEST = "checkpoint.json"
PARAMS_FILE = "params.f64"
ADAM_M_FILE = "adam_m.f64"
ADAM_V_FILE = "adam_v.f64"


@dataclass
class NetParams:
    """All weights and biases, keyed by TENSOR_NAMES."""
    arch: Architecture
    tensors: Dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def with_tensors(self, tensors: Mapping[str, np.ndarray]) -> "NetParams":
        return NetParams(self.arch, {name: tensors[name] for name in TENSOR_NAMES})

    def copy(self) -> "NetParams":
        return NetParams(self.arch, {name: t.copy() for name, t in self.tensors.items()})

    def is_finite(self) -> bool:
        return all(np.isfinite(t).all() for t in self.tensors.values())


@dataclass
class AdamState:
    """Moment estimates and hyperparameters of the Adam optimizer."""
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class ForwardCache:
    """Activations kept for the backward pass."""
    inputs: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    h4: np.ndarray
    pre_abs: np.ndarray
    outputs: np.ndarray


def tensor_shapes(arch: Architecture) -> Dict[str, Tuple[int, ...]]:
    return {
        "conv1_w": (arch.conv1_filters, arch.conv1_width, arch.in_channels),
        "conv1_b": (arch.conv1_filters,),
        "conv2_w": (arch.conv2_filters, arch.conv2_width, arch.conv1_filters),
        "conv2_b": (arch.conv2_filters,),
        "dense1_w": (arch.dense1_units, arch.flat_size),
        "dense1_b": (arch.dense1_units,),
        "dense2_w": (arch.dense2_units, arch.dense1_units),
        "dense2_b": (arch.dense2_units,),
        "dense3_w": (arch.outputs, arch.dense2_units),
        "dense3_b": (arch.outputs,),
    }


def _fans(name: str, shape: Tuple[int, ...]) -> Tuple[int, int]:
    if name.startswith("conv"):
        filters, width, channels = shape
        return width * channels, width * filters
    out_units, in_units = shape
    return in_units, out_units


def init_network(seed: int, arch: Optional[Architecture] = None) -> NetParams:
    """
    Glorot-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases.

    Deterministic per seed.
    """
    arch = arch or Architecture()
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in tensor_shapes(arch).items():
        if name.endswith("_b"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in, fan_out = _fans(name, shape)
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    logger.debug(f"Initialized network with seed {seed}: {parameter_count(arch)} parameters")
    return NetParams(arch, tensors)


def parameter_count(arch: Architecture) -> int:
    return int(sum(np.prod(shape) for shape in tensor_shapes(arch).values()))


def zeros_like_params(params: NetParams) -> Dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors.items()}


# Convolution

def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched valid cross-correlation: x (B, L, C), w (F, K, C) -> (B, L-K+1, F)."""
    width = w.shape[1]
    length = x.shape[1] - width + 1
    out = np.broadcast_to(b, (x.shape[0], length, w.shape[0])).copy()
    for k in range(width):
        out += x[:, k:k + length, :] @ w[:, k, :].T
    return out


def _conv_backward(
    x: np.ndarray, w: np.ndarray, dout: np.ndarray, need_input_grad: bool = True
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Gradients of `_conv_forward` with respect to w, b and (optionally) x."""
    filters, width, channels = w.shape
    length = dout.shape[1]
    flat_dout = dout.reshape(-1, filters)
    dw = np.empty_like(w)
    dx = np.zeros_like(x) if need_input_grad else None
    for k in range(width):
        dw[:, k, :] = flat_dout.T @ x[:, k:k + length, :].reshape(-1, channels)
        if need_input_grad:
            dx[:, k:k + length, :] += dout @ w[:, k, :]
    db = flat_dout.sum(axis=0)
    return dw, db, dx


def conv1d(inputs: np.ndarray, filters: np.ndarray, biases: np.ndarray, width: Optional[int] = None) -> np.ndarray:
    """Valid, stride-1 cross-correlation of an (L, C_in) signal; returns (L-K+1, C_out)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or filters.ndim != 3 or filters.shape[2] != inputs.shape[1]:
        raise DomainError(f"Incompatible shapes: input {inputs.shape}, filters {filters.shape}")
    if width is not None and width != filters.shape[1]:
        raise DomainError(f"Filter width {filters.shape[1]} does not match K={width}")
    if inputs.shape[0] < filters.shape[1]:
        raise DomainError(f"Input length {inputs.shape[0]} shorter than filter width {filters.shape[1]}")
    return _conv_forward(inputs[None, :, :], filters, biases)[0]


# Network

def _prepare(arch: Architecture, windows: np.ndarray) -> np.ndarray:
    windows = np.asarray(windows, dtype=np.float64)
    expected = (arch.window_length, arch.in_channels)
    if windows.ndim != 3 or windows.shape[1:] != expected:
        raise DomainError(f"Expected windows of shape (B, {expected[0]}, {expected[1]}), got {windows.shape}")
    if arch.normalize_inputs:
        mean = windows.mean(axis=1, keepdims=True)
        std = windows.std(axis=1, keepdims=True)
        windows = (windows - mean) / (std + 1e-12)
    return windows


def forward_batch(params: NetParams, windows: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    """Estimates for a (B, window_length, in_channels) batch, plus the backward cache."""
    arch = params.arch
    x = _prepare(arch, windows)
    batch = x.shape[0]
    h1 = np.tanh(_conv_forward(x, params["conv1_w"], params["conv1_b"]))
    h2 = np.tanh(_conv_forward(h1, params["conv2_w"], params["conv2_b"]))
    flat = h2.reshape(batch, -1)
    h3 = np.tanh(flat @ params["dense1_w"].T + params["dense1_b"])
    h4 = np.tanh(h3 @ params["dense2_w"].T + params["dense2_b"])
    pre_abs = h4 @ params["dense3_w"].T + params["dense3_b"]
    outputs = np.abs(pre_abs) * np.asarray(arch.output_scale)
    cache = ForwardCache(inputs=x, h1=h1, h2=h2, h3=h3, h4=h4, pre_abs=pre_abs, outputs=outputs)
    return outputs, cache


def backward_batch(params: NetParams, cache: ForwardCache, upstream: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Reverse-mode gradients of sum(upstream * outputs) with respect to every tensor.

    The subgradient of |.| at 0 is taken as 0.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != cache.outputs.shape:
        raise DomainError(f"Upstream gradient shape {upstream.shape} does not match outputs {cache.outputs.shape}")
    batch = upstream.shape[0]
    grads = {}

    d_pre = upstream * np.asarray(params.arch.output_scale) * np.sign(cache.pre_abs)
    grads["dense3_w"] = d_pre.T @ cache.h4
    grads["dense3_b"] = d_pre.sum(axis=0)
    dz = (d_pre @ params["dense3_w"]) * (1.0 - cache.h4 ** 2)

    grads["dense2_w"] = dz.T @ cache.h3
    grads["dense2_b"] = dz.sum(axis=0)
    dz = (dz @ params["dense2_w"]) * (1.0 - cache.h3 ** 2)

    flat = cache.h2.reshape(batch, -1)
    grads["dense1_w"] = dz.T @ flat
    grads["dense1_b"] = dz.sum(axis=0)
    d_h2 = (dz @ params["dense1_w"]).reshape(cache.h2.shape)

    dz2 = d_h2 * (1.0 - cache.h2 ** 2)
    grads["conv2_w"], grads["conv2_b"], d_h1 = _conv_backward(cache.h1, params["conv2_w"], dz2)

    dz1 = d_h1 * (1.0 - cache.h1 ** 2)
    grads["conv1_w"], grads["conv1_b"], _ = _conv_backward(cache.inputs, params["conv1_w"], dz1, need_input_grad=False)
    return {name: grads[name] for name in TENSOR_NAMES}


def forward(params: NetParams, window: np.ndarray) -> np.ndarray:
    """Estimate (p1, p2) for a single (window_length, in_channels) window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise DomainError(f"Expected a 2-D window, got shape {window.shape}")
    outputs, _ = forward_batch(params, window[None])
    return outputs[0]


def backward(params: NetParams, window: np.ndarray, upstream: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients for one window given d(loss)/d(output)."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise DomainError(f"Expected a 2-D window, got shape {window.shape}")
    _, cache = forward_batch(params, window[None])
    return backward_batch(params, cache, np.asarray(upstream, dtype=np.float64).reshape(1, -1))


# Optimizer

def init_adam(params: NetParams, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(m=zeros_like_params(params), v=zeros_like_params(params), t=0,
                     lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(
    params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One bias-corrected Adam update.

    Works on any mapping of named arrays; returns new arrays and a new state.
    """
    t = state.t + 1
    # bias corrections once per step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    step_size = state.lr / bc1

    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != np.shape(value):
            raise DomainError(f"Gradient shape {g.shape} does not match parameter {name} {np.shape(value)}")
        m = state.m.get(name, np.zeros_like(g)) * state.beta1 + (1.0 - state.beta1) * g
        v = state.v.get(name, np.zeros_like(g)) * state.beta2 + (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v / bc2) + state.eps
        new_params[name] = value - step_size * m / denom
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t, lr=state.lr,
                                 beta1=state.beta1, beta2=state.beta2, eps=state.eps)


# Checkpoints

def save_checkpoint(
    path: Path,
    params: NetParams,
    adam: AdamState,
    seed: int,
    objective: Optional[Objective] = None,
) -> List[Path]:
    """Write manifest plus raw parameter and moment arrays; returns the written paths."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arrays = [params[name] for name in TENSOR_NAMES]
    write_f64(path / PARAMS_FILE, *arrays)
    write_f64(path / ADAM_M_FILE, *[adam.m[name] for name in TENSOR_NAMES])
    write_f64(path / ADAM_V_FILE, *[adam.v[name] for name in TENSOR_NAMES])
    manifest = CheckpointManifest(
        architecture=params.arch, objective=objective, seed=seed, step=adam.t,
        learning_rate=adam.lr, beta1=adam.beta1, beta2=adam.beta2, epsilon=adam.eps,
        tensors=[TensorRecord(name=name, shape=list(params[name].shape)) for name in TENSOR_NAMES],
    )
    write_model(path / CHECKPOINT_MANIFEST, manifest)
    logger.info(f"Checkpoint saved to {path} at step {adam.t}")
    return [path / PARAMS_FILE, path / ADAM_M_FILE, path / ADAM_V_FILE, path / CHECKPOINT_MANIFEST]


def _split_tensors(flat: np.ndarray, shapes: Dict[str, Tuple[int, ...]]) -> Dict[str, np.ndarray]:
    tensors, offset = {}, 0
    for name in TENSOR_NAMES:
        size = int(np.prod(shapes[name]))
        tensors[name] = flat[offset:offset + size].reshape(shapes[name]).copy()
        offset += size
    return tensors


def load_checkpoint(path: Path) -> Tuple[NetParams, AdamState, CheckpointManifest]:
    """Inverse of `save_checkpoint`; raises CheckpointError on any mismatch."""
    path = Path(path)
    if not (path / CHECKPOINT_MANIFEST).exists():
        raise CheckpointError(f"No checkpoint found at {path}")
    manifest = read_model(path / CHECKPOINT_MANIFEST, CheckpointManifest, CheckpointError)
    if manifest.format_version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"Checkpoint format version {manifest.format_version} not supported (expected {CHECKPOINT_FORMAT_VERSION})"
        )
    shapes = tensor_shapes(manifest.architecture)
    recorded = {t.name: tuple(t.shape) for t in manifest.tensors}
    if recorded != shapes:
        raise CheckpointError(f"Tensor shapes in {path} do not match the recorded architecture")
    total = parameter_count(manifest.architecture)
    try:
        params = _split_tensors(read_f64(path / PARAMS_FILE, total, "params"), shapes)
        m = _split_tensors(read_f64(path / ADAM_M_FILE, total, "adam_m"), shapes)
        v = _split_tensors(read_f64(path / ADAM_V_FILE, total, "adam_v"), shapes)
    except DatasetFormatError as e:
        raise CheckpointError(f"Unreadable checkpoint arrays in {path}: {e}") from e
    adam = AdamState(m=m, v=v, t=manifest.step, lr=manifest.learning_rate,
                     beta1=manifest.beta1, beta2=manifest.beta2, eps=manifest.epsilon)
    return NetParams(manifest.architecture, params), adam, manifest
