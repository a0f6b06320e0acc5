"""The eight sequence architectures: declarative specs, counts, init, forward.

Hidden conv layers use kernel size 3 with same padding and ReLU; the
terminating conv of the fully convolutional models uses a single-tap kernel
(kernel size 1) projecting to one linear output channel. GRU stacks end in a
time-distributed linear dense unit. Parameter counts are exact closed forms,
computed without allocating weights:

    conv1d:   k*in*out + out
    dense:    in*out + out            (flatten mode: in = time*channels)
    gru:      3*h*(in+h) + 6*h        (reset-after, separate biases)
    bgru:     twice the gru count; the next layer sees 2*h input channels
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .layers import GRU, BiGRU, Conv1D, DenseFlatten, DenseTimeDistributed

INPUT_LENGTH = 1000

CONV1D = "conv1d"
DENSE_FLATTEN = "dense_flatten"
DENSE_TD = "dense_timedistributed"
GRU_KIND = "gru"
BGRU_KIND = "bgru"

# Allocating more than this many parameters requires an explicit opt-in
# (the dense-head CNN holds ~513M doubles, ~4 GB).
LARGE_PARAM_THRESHOLD = 50_000_000

DISPLAY_NAMES = {
    "cnn_dense": "CNN+dense",
    "cnnc1": "CNNc1",
    "cnnc2": "CNNc2",
    "cnnc3": "CNNc3",
    "gruc1": "GRUc1",
    "bgruc1": "BGRUc1",
    "bgruc2": "BGRUc2",
    "bgruc3": "BGRUc3",
}

ARCHITECTURE_NAMES = tuple(DISPLAY_NAMES)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int
    out_units: int
    activation: str
    kernel_size: int = 0  # conv1d only


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    layers: tuple
    input_length: int = INPUT_LENGTH


def canonical_name(name: str) -> str:
    key = name.strip().lower().replace("+", "_").replace("-", "_").replace(" ", "_")
    while "__" in key:
        key = key.replace("__", "_")
    return key


def _conv_chain(channel_plan) -> list:
    layers = []
    prev = 1
    for ch in channel_plan:
        layers.append(LayerSpec(CONV1D, prev, ch, "relu", kernel_size=3))
        prev = ch
    return layers


_VGG_BASE = (64, 64, 128, 256, 512, 512)
_CONV_PLANS = {
    "cnnc1": _VGG_BASE,
    "cnnc2": (64, 64, 128, 128, 256, 256, 512, 512, 1024, 1024),
    "cnnc3": (64, 64, 64, 128, 128, 128, 256, 256, 256, 512, 512, 512, 1024, 1024, 1024),
}


def build_architecture(name: str) -> ArchitectureSpec:
    """Layer list for one of the eight published model names."""
    key = canonical_name(name)
    if key == "cnn_dense":
        layers = _conv_chain(_VGG_BASE)
        layers.append(LayerSpec(DENSE_FLATTEN, _VGG_BASE[-1], INPUT_LENGTH, "linear"))
    elif key in _CONV_PLANS:
        plan = _CONV_PLANS[key]
        layers = _conv_chain(plan)
        layers.append(LayerSpec(CONV1D, plan[-1], 1, "linear", kernel_size=1))
    elif key == "gruc1":
        layers = [
            LayerSpec(GRU_KIND, 1, 64, "tanh"),
            LayerSpec(GRU_KIND, 64, 64, "tanh"),
            LayerSpec(DENSE_TD, 64, 1, "linear"),
        ]
    elif key == "bgruc1":
        layers = [
            LayerSpec(BGRU_KIND, 1, 64, "tanh"),
            LayerSpec(BGRU_KIND, 128, 64, "tanh"),
            LayerSpec(DENSE_TD, 128, 1, "linear"),
        ]
    elif key == "bgruc2":
        layers = [
            LayerSpec(BGRU_KIND, 1, 64, "tanh"),
            LayerSpec(BGRU_KIND, 128, 64, "tanh"),
            LayerSpec(BGRU_KIND, 128, 64, "tanh"),
            LayerSpec(BGRU_KIND, 128, 64, "tanh"),
            LayerSpec(DENSE_TD, 128, 1, "linear"),
        ]
    elif key == "bgruc3":
        layers = [
            LayerSpec(BGRU_KIND, 1, 128, "tanh"),
            LayerSpec(BGRU_KIND, 256, 128, "tanh"),
            LayerSpec(BGRU_KIND, 256, 128, "tanh"),
            LayerSpec(BGRU_KIND, 256, 128, "tanh"),
            LayerSpec(DENSE_TD, 256, 1, "linear"),
        ]
    else:
        raise ConfigError(
            f"unknown architecture {name!r}; known: {', '.join(ARCHITECTURE_NAMES)}"
        )
    return ArchitectureSpec(name=key, layers=tuple(layers))


def layer_param_count(layer: LayerSpec, input_length: int = INPUT_LENGTH) -> int:
    if layer.kind == CONV1D:
        return layer.kernel_size * layer.in_channels * layer.out_units + layer.out_units
    if layer.kind == DENSE_FLATTEN:
        return input_length * layer.in_channels * layer.out_units + layer.out_units
    if layer.kind == DENSE_TD:
        return layer.in_channels * layer.out_units + layer.out_units
    if layer.kind == GRU_KIND:
        h = layer.out_units
        return 3 * h * (layer.in_channels + h) + 6 * h
    if layer.kind == BGRU_KIND:
        h = layer.out_units
        return 2 * (3 * h * (layer.in_channels + h) + 6 * h)
    raise ConfigError(f"unknown layer kind {layer.kind!r}")


def layer_param_counts(spec: ArchitectureSpec) -> list:
    return [layer_param_count(layer, spec.input_length) for layer in spec.layers]


def count_params(spec: ArchitectureSpec) -> int:
    return sum(layer_param_counts(spec))


def layer_output_channels(layer: LayerSpec) -> int:
    if layer.kind == BGRU_KIND:
        return 2 * layer.out_units
    return layer.out_units


def architecture_table(spec: ArchitectureSpec) -> list:
    """Rows (layer label, output shape, param count, activation) plus a total row."""
    rows = []
    counters = {}
    for layer in spec.layers:
        idx = counters.get(layer.kind, 0)
        counters[layer.kind] = idx + 1
        suffix = f"_{idx}" if idx else ""
        n_params = layer_param_count(layer, spec.input_length)
        if layer.kind == DENSE_FLATTEN:
            rows.append((
                "flatten", f"(None, {spec.input_length * layer.in_channels})", 0, "-",
            ))
            rows.append((
                f"dense{suffix}", f"(None, {layer.out_units})", n_params, layer.activation,
            ))
        else:
            label = {CONV1D: "conv1d", GRU_KIND: "gru", BGRU_KIND: "bidirectional",
                     DENSE_TD: "dense"}[layer.kind] + suffix
            shape = f"(None, {spec.input_length}, {layer_output_channels(layer)})"
            rows.append((label, shape, n_params, layer.activation))
    return rows


# --- parameter allocation and the assembled model ---------------------------

def _glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def _gru_param_arrays(rng, in_channels: int, h: int) -> dict:
    W = np.concatenate(
        [_glorot_uniform(rng, in_channels, h, (in_channels, h)) for _ in range(3)], axis=1
    )
    U = np.concatenate([_orthogonal(rng, h) for _ in range(3)], axis=1)
    return {"W": W, "U": U, "bw": np.zeros(3 * h), "bu": np.zeros(3 * h)}


def layer_prefix(index: int, layer: LayerSpec) -> str:
    return f"layer{index:02d}.{layer.kind}"


def init_params(spec: ArchitectureSpec, seed: int, allow_large: bool = False) -> dict:
    """Seeded weight arrays for every layer, keyed by '<layer prefix>.<array>'.

    Glorot-uniform input/dense/conv weights, per-gate orthogonal recurrent
    weights, zero biases. Architectures above LARGE_PARAM_THRESHOLD parameters
    are refused unless allow_large is set.
    """
    total = count_params(spec)
    if total > LARGE_PARAM_THRESHOLD and not allow_large:
        raise ConfigError(
            f"{spec.name} holds {total:,} parameters; pass allow_large to materialize it"
        )
    rng = np.random.default_rng(seed)
    params = {}
    for i, layer in enumerate(spec.layers):
        prefix = layer_prefix(i, layer)
        if layer.kind == CONV1D:
            k, cin, cout = layer.kernel_size, layer.in_channels, layer.out_units
            params[f"{prefix}.kernel"] = _glorot_uniform(rng, k * cin, k * cout, (k, cin, cout))
            params[f"{prefix}.bias"] = np.zeros(cout)
        elif layer.kind == DENSE_FLATTEN:
            fan_in = spec.input_length * layer.in_channels
            params[f"{prefix}.weight"] = _glorot_uniform(
                rng, fan_in, layer.out_units, (fan_in, layer.out_units)
            )
            params[f"{prefix}.bias"] = np.zeros(layer.out_units)
        elif layer.kind == DENSE_TD:
            params[f"{prefix}.weight"] = _glorot_uniform(
                rng, layer.in_channels, layer.out_units, (layer.in_channels, layer.out_units)
            )
            params[f"{prefix}.bias"] = np.zeros(layer.out_units)
        elif layer.kind == GRU_KIND:
            arrays = _gru_param_arrays(rng, layer.in_channels, layer.out_units)
            params.update({f"{prefix}.{k}": v for k, v in arrays.items()})
        elif layer.kind == BGRU_KIND:
            for side in ("fwd", "bwd"):
                arrays = _gru_param_arrays(rng, layer.in_channels, layer.out_units)
                params.update({f"{prefix}.{side}.{k}": v for k, v in arrays.items()})
        else:
            raise ConfigError(f"unknown layer kind {layer.kind!r}")
    return params


class Model:
    """Layer objects assembled from a spec, sharing arrays with a params dict."""

    def __init__(self, spec: ArchitectureSpec):
        self.spec = spec
        self.layers = []
        for layer in spec.layers:
            if layer.kind == CONV1D:
                obj = Conv1D(layer.in_channels, layer.out_units, layer.kernel_size, layer.activation)
            elif layer.kind == DENSE_FLATTEN:
                obj = DenseFlatten(spec.input_length, layer.in_channels, layer.out_units, layer.activation)
            elif layer.kind == DENSE_TD:
                obj = DenseTimeDistributed(layer.in_channels, layer.out_units, layer.activation)
            elif layer.kind == GRU_KIND:
                obj = GRU(layer.in_channels, layer.out_units)
            else:
                obj = BiGRU(layer.in_channels, layer.out_units)
            self.layers.append(obj)

    def param_names(self) -> list:
        names = []
        for i, (layer, obj) in enumerate(zip(self.spec.layers, self.layers)):
            prefix = layer_prefix(i, layer)
            names.extend(f"{prefix}.{key}" for key in obj.params)
        return names

    def bind(self, params: dict) -> None:
        """Point every layer at the arrays in `params` (shared, not copied)."""
        expected = set(self.param_names())
        if expected != set(params):
            missing = expected - set(params)
            extra = set(params) - expected
            raise ConfigError(
                f"params do not match {self.spec.name}: missing {sorted(missing)}, extra {sorted(extra)}"
            )
        for i, (layer, obj) in enumerate(zip(self.spec.layers, self.layers)):
            prefix = layer_prefix(i, layer)
            for key in list(obj.params):
                value = np.asarray(params[f"{prefix}.{key}"], dtype=np.float64)
                if value.shape != obj.params[key].shape:
                    raise ConfigError(
                        f"{prefix}.{key}: expected shape {obj.params[key].shape}, got {value.shape}"
                    )
                if isinstance(obj, BiGRU):
                    obj.set_param(key, value)
                else:
                    obj.params[key] = value

    def forward(self, x: np.ndarray) -> np.ndarray:
        """(batch, time, 1) -> (batch, time) model output."""
        for obj in self.layers:
            x = obj.forward(x)
        return x[:, :, 0]

    def backward(self, gy: np.ndarray) -> np.ndarray:
        g = gy[:, :, None]
        for obj in reversed(self.layers):
            g = obj.backward(g)
        return g

    def gradients(self) -> dict:
        grads = {}
        for i, (layer, obj) in enumerate(zip(self.spec.layers, self.layers)):
            prefix = layer_prefix(i, layer)
            grads.update({f"{prefix}.{key}": value for key, value in obj.grads.items()})
        return grads


def model_forward(spec: ArchitectureSpec, params: dict, window) -> np.ndarray:
    """One value per sample for a single (time,) or (time, 1) window."""
    x = np.asarray(window, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != 1:
        raise ConfigError(f"window must be (time,) or (time, 1), got shape {x.shape}")
    if not np.isfinite(x).all():
        raise NumericError("non-finite values in model input")
    model = Model(spec)
    model.bind(params)
    return model.forward(x[None])[0]


def mse_loss_and_grads(spec: ArchitectureSpec, params: dict, window, target):
    """Mean squared error over the window and gradients for every parameter."""
    x = np.asarray(window, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(target, dtype=np.float64)
    if y.shape != (x.shape[0],):
        raise ConfigError(f"target shape {y.shape} does not match window length {x.shape[0]}")
    model = Model(spec)
    model.bind(params)
    pred = model.forward(x[None])
    loss = float(np.mean((pred[0] - y) ** 2))
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss in {spec.name} forward pass")
    model.backward(2.0 * (pred - y[None]) / y.size)
    grads = model.gradients()
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name}")
    return loss, grads
