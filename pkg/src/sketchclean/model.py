"""Fully convolutional encoder-decoder for sketch cleanup.

The network is an hourglass of 3x3 convolutions only: flat stages keep the
resolution, down stages halve it with stride 2, and up stages double it with
nearest-neighbor upsampling followed by a flat convolution. There is no
pooling anywhere. Encoder feature maps can be concatenated into decoder
stages of matching resolution (skip connections). All hidden stages use
ReLU; the single-channel head uses the logistic function, so outputs are
ink probabilities in (0, 1).

Parameters are kept on the float32 grid (stored float64) so the float32
checkpoint format round-trips bit-exactly. All arithmetic is float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetConfig",
    "ConvLayer",
    "Network",
    "build_network",
    "init_params",
    "activation_shapes",
    "kind_census",
    "conv2d_direct",
    "upconv",
    "concat_skip",
    "forward",
    "forward_with_cache",
    "backward",
    "backward_from_cache",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_MAGIC",
]

CHECKPOINT_MAGIC = b"SCN1"

_ENCODER_OUT = {"A": 1, "B": 2, "C": 4, "D": 8, "E": 16}  # channel multiplier per encoder stage
DEFAULT_SKIPS = (("C", "H"), ("B", "J"))


def _f32grid(a: np.ndarray) -> np.ndarray:
    """Snap values to those exactly representable in float32."""
    return a.astype(np.float32).astype(np.float64)


@dataclass(frozen=True)
class NetConfig:
    """Network shape: square input size, channel width, head mode, skips.

    output_mode "double" ends the decoder at twice the input resolution
    (the canonical configuration); "same" drops the final upsampling stage
    so output resolution equals input resolution. skip_wiring lists
    (encoder stage -> decoder stage) concatenations; encoder stages are
    A-E, targets must be flat decoder stages at the same resolution.
    """

    input_size: int = 64
    base_width: int = 8
    output_mode: str = "double"
    skip_wiring: tuple[tuple[str, str], ...] = DEFAULT_SKIPS

    def __post_init__(self):
        object.__setattr__(self, "skip_wiring", tuple((str(e), str(d)) for e, d in self.skip_wiring))

    def validate(self) -> None:
        if self.input_size <= 0 or self.input_size % 8 != 0:
            raise ValueError(f"input_size must be a positive multiple of 8, got {self.input_size}")
        if self.base_width < 1:
            raise ValueError(f"base_width must be >= 1, got {self.base_width}")
        if self.output_mode not in ("double", "same"):
            raise ValueError(f"output_mode must be 'double' or 'same', got {self.output_mode!r}")
        seen = set()
        for enc, dec in self.skip_wiring:
            if enc not in _ENCODER_OUT:
                raise ValueError(f"skip source {enc!r} is not an encoder stage (A-E)")
            if dec in seen:
                raise ValueError(f"decoder stage {dec!r} has more than one skip")
            seen.add(dec)


@dataclass
class ConvLayer:
    """One 3x3 convolution stage. kind fixes the geometry:

    - "flat": stride 1, padding 1, resolution preserved
    - "down": stride 2, padding 1, resolution halved (ceil)
    - "up":   nearest-neighbor 2x upsample, then stride 1 / padding 1
    """

    name: str
    kind: str
    in_channels: int
    out_channels: int
    weight: np.ndarray  # (out, in, 3, 3)
    bias: np.ndarray    # (out,)
    activation: str = "relu"

    @property
    def stride(self) -> int:
        return 2 if self.kind == "down" else 1


@dataclass
class Network:
    config: NetConfig
    layers: list[ConvLayer]
    skip_for: dict[str, str] = field(default_factory=dict)  # decoder stage -> encoder stage

    def forward(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)

    def param_arrays(self) -> list[np.ndarray]:
        """Weights and biases interleaved in graph order."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        return out


def _stage_plan(cfg: NetConfig) -> list[tuple[str, str, int, int]]:
    """(name, kind, in_channels, out_channels) per stage in graph order."""
    w = cfg.base_width
    plan = [
        ("A", "flat", 1, w),
        ("B", "flat", w, 2 * w),
        ("C", "down", 2 * w, 4 * w),
        ("D", "down", 4 * w, 8 * w),
        ("E", "down", 8 * w, 16 * w),
        ("F", "up", 16 * w, 16 * w),
        ("G", "up", 16 * w, 16 * w),
        ("H", "flat", 16 * w, 8 * w),
        ("I", "up", 8 * w, 8 * w),
        ("J", "flat", 8 * w, 4 * w),
    ]
    if cfg.output_mode == "double":
        plan.append(("K", "up", 4 * w, 4 * w))
    plan += [
        ("L", "flat", 4 * w, 2 * w),
        ("M", "flat", 2 * w, w),
        ("head", "flat", w, 1),
    ]
    by_name = {name: i for i, (name, _, _, _) in enumerate(plan)}
    for enc, dec in cfg.skip_wiring:
        if dec not in by_name:
            raise ValueError(f"skip target {dec!r} is not a stage of this configuration")
        idx = by_name[dec]
        name, kind, cin, cout = plan[idx]
        if kind != "flat":
            raise ValueError(f"skip target {dec!r} must be a flat stage, got {kind!r}")
        if by_name[enc] >= idx:
            raise ValueError(f"skip {enc!r} -> {dec!r} must feed a later stage")
        plan[idx] = (name, kind, cin + _ENCODER_OUT[enc] * w, cout)
    return plan


def activation_shapes(cfg: NetConfig) -> list[tuple[str, tuple[int, int, int]]]:
    """Propagate (channels, height, width) through every stage."""
    cfg.validate()
    size = cfg.input_size
    shapes = []
    for name, kind, _cin, cout in _stage_plan(cfg):
        if kind == "down":
            size = (size + 1) // 2
        elif kind == "up":
            size *= 2
        shapes.append((name, (cout, size, size)))
    return shapes


def build_network(cfg: NetConfig, init_seed: int) -> Network:
    """Construct the network for ``cfg`` with seeded parameters."""
    cfg.validate()
    shapes = dict(activation_shapes(cfg))
    plan = _stage_plan(cfg)
    stage_in_size = {}
    size = cfg.input_size
    for name, _kind, _cin, _cout in plan:
        stage_in_size[name] = size
        size = shapes[name][1]
    for enc, dec in cfg.skip_wiring:
        if shapes[enc][1] != stage_in_size[dec]:
            raise ValueError(
                f"skip {enc} -> {dec}: encoder map is {shapes[enc][1]}px "
                f"but decoder stage input is {stage_in_size[dec]}px")

    layers = [
        ConvLayer(
            name=name,
            kind=kind,
            in_channels=cin,
            out_channels=cout,
            weight=np.zeros((cout, cin, 3, 3)),
            bias=np.zeros(cout),
            activation="sigmoid" if name == "head" else "relu",
        )
        for name, kind, cin, cout in plan
    ]
    net = Network(config=cfg, layers=layers, skip_for={dec: enc for enc, dec in cfg.skip_wiring})
    init_params(net, init_seed)
    return net


def init_params(net: Network, seed: int) -> None:
    """He-style init: weights uniform with variance 2/fan_in, biases zero."""
    rng = np.random.default_rng(seed)
    for layer in net.layers:
        fan_in = layer.in_channels * 9
        bound = np.sqrt(6.0 / fan_in)
        layer.weight = _f32grid(rng.uniform(-bound, bound, size=layer.weight.shape))
        layer.bias = np.zeros(layer.out_channels)


def kind_census(net: Network) -> dict[str, int]:
    """Count of layers per kind; the graph contains only conv stages."""
    census: dict[str, int] = {}
    for layer in net.layers:
        census[layer.kind] = census.get(layer.kind, 0) + 1
    return census


# --- primitive ops ------------------------------------------------------------


def _conv3x3(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int) -> np.ndarray:
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(1, 2))[:, ::stride, ::stride]
    out = np.einsum("ocij,chwij->ohw", weight, win, optimize=True)
    return out + bias[:, None, None]


def conv2d_direct(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Cross-correlation with padding 1; stride follows the layer kind."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != layer.in_channels:
        raise ValueError(f"expected {layer.in_channels}-channel input, got shape {x.shape}")
    return _conv3x3(x, layer.weight, layer.bias, layer.stride)


def _upsample2(x: np.ndarray) -> np.ndarray:
    return x.repeat(2, axis=1).repeat(2, axis=2)


def upconv(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Nearest-neighbor 2x upsample followed by a flat 3x3 convolution."""
    if layer.kind != "up":
        raise ValueError(f"upconv requires an 'up' layer, got {layer.kind!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != layer.in_channels:
        raise ValueError(f"expected {layer.in_channels}-channel input, got shape {x.shape}")
    return _conv3x3(_upsample2(x), layer.weight, layer.bias, 1)


def concat_skip(decoder: np.ndarray, encoder: np.ndarray) -> np.ndarray:
    """Channel-wise concatenation, decoder channels first."""
    if decoder.shape[1:] != encoder.shape[1:]:
        raise ValueError(
            f"spatial mismatch: decoder {decoder.shape[1:]} vs encoder {encoder.shape[1:]}")
    return np.concatenate([decoder, encoder], axis=0)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# --- forward / backward --------------------------------------------------------


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a 1xHxW ink-polarity input; H = W = input_size."""
    out, _ = forward_with_cache(net, x)
    return out


def forward_with_cache(net: Network, x: np.ndarray):
    """Forward pass returning (output, cache) for a later backward pass."""
    x = np.asarray(x, dtype=np.float64)
    s = net.config.input_size
    if x.shape != (1, s, s):
        raise ValueError(f"expected input shape (1, {s}, {s}), got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("input contains non-finite values")

    acts: dict[str, np.ndarray] = {}
    cache = []
    cur = x
    for layer in net.layers:
        inp = cur
        if layer.name in net.skip_for:
            inp = concat_skip(inp, acts[net.skip_for[layer.name]])
        if layer.kind == "up":
            inp = _upsample2(inp)
        z = _conv3x3(inp, layer.weight, layer.bias, layer.stride)
        a = _sigmoid(z) if layer.activation == "sigmoid" else np.maximum(z, 0.0)
        cache.append((inp, z))
        acts[layer.name] = a
        cur = a
    return cur, cache


def _conv3x3_backward(d_out: np.ndarray, inp: np.ndarray, weight: np.ndarray, stride: int):
    xp = np.pad(inp, ((0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(1, 2))[:, ::stride, ::stride]
    d_w = np.einsum("ohw,chwij->ocij", d_out, win, optimize=True)
    d_b = d_out.sum(axis=(1, 2))
    t = np.einsum("ohw,ocij->chwij", d_out, weight, optimize=True)
    d_xp = np.zeros_like(xp)
    ho, wo = d_out.shape[1], d_out.shape[2]
    for ki in range(3):
        for kj in range(3):
            d_xp[:, ki:ki + ho * stride:stride, kj:kj + wo * stride:stride] += t[:, :, :, ki, kj]
    return d_w, d_b, d_xp[:, 1:-1, 1:-1]


def backward(net: Network, x: np.ndarray, output_grad: np.ndarray):
    """Gradients of a scalar loss with respect to parameters and input.

    ``output_grad`` is dLoss/dOutput at the network's probability output.
    Returns (grads, input_grad) where grads is a list of (d_weight, d_bias)
    aligned with net.layers.
    """
    _out, cache = forward_with_cache(net, x)
    return backward_from_cache(net, cache, output_grad)


def backward_from_cache(net: Network, cache, output_grad: np.ndarray):
    """Backward pass reusing the cache from :func:`forward_with_cache`."""
    output_grad = np.asarray(output_grad, dtype=np.float64)
    last_z = cache[-1][1]
    if output_grad.shape != last_z.shape:
        raise ValueError(f"output_grad shape {output_grad.shape} != output shape {last_z.shape}")

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)  # type: ignore[list-item]
    pending: dict[str, np.ndarray] = {}
    g = output_grad
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        inp, z = cache[idx]
        if layer.name in pending:
            g = g + pending.pop(layer.name)
        if layer.activation == "sigmoid":
            a = _sigmoid(z)
            dz = g * a * (1.0 - a)
        else:
            dz = g * (z > 0)
        d_w, d_b, d_in = _conv3x3_backward(dz, inp, layer.weight, layer.stride)
        grads[idx] = (d_w, d_b)
        if layer.kind == "up":
            c, h2, w2 = d_in.shape
            d_in = d_in.reshape(c, h2 // 2, 2, w2 // 2, 2).sum(axis=(2, 4))
        if layer.name in net.skip_for:
            dec_c = d_in.shape[0] - _channels_of(net, net.skip_for[layer.name])
            enc_name = net.skip_for[layer.name]
            pending[enc_name] = pending.get(enc_name, 0) + d_in[dec_c:]
            d_in = d_in[:dec_c]
        g = d_in
    return grads, g


def _channels_of(net: Network, stage: str) -> int:
    for layer in net.layers:
        if layer.name == stage:
            return layer.out_channels
    raise KeyError(stage)


# --- checkpoint format ----------------------------------------------------------
#
# magic "SCN1" | u16 version | u32 input_size | u32 base_width | u8 mode |
# u16 n_skips | per skip: u8+name, u8+name | u32 n_layers |
# per layer in graph order: f32-LE weights (out*in*9), f32-LE biases (out)

_MODE_CODE = {"double": 0, "same": 1}
_MODE_NAME = {v: k for k, v in _MODE_CODE.items()}


def save_checkpoint(net: Network, path) -> None:
    """Write config and parameters in the versioned binary container."""
    cfg = net.config
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<HII B", 1, cfg.input_size, cfg.base_width, _MODE_CODE[cfg.output_mode])
    blob += struct.pack("<H", len(cfg.skip_wiring))
    for enc, dec in cfg.skip_wiring:
        for name in (enc, dec):
            raw = name.encode("ascii")
            blob += struct.pack("<B", len(raw)) + raw
    blob += struct.pack("<I", len(net.layers))
    for layer in net.layers:
        blob += layer.weight.astype("<f4").tobytes()
        blob += layer.bias.astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(blob))


def load_checkpoint(path) -> Network:
    """Rebuild a network from a checkpoint file.

    Raises:
        ValueError: On bad magic, version, or truncated parameter blocks.
    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError("not a network checkpoint (bad magic)")
    pos = 4
    version, input_size, base_width, mode_code = struct.unpack_from("<HII B", data, pos)
    pos += struct.calcsize("<HII B")
    if version != 1:
        raise ValueError(f"unsupported checkpoint version {version}")
    if mode_code not in _MODE_NAME:
        raise ValueError(f"unknown output mode code {mode_code}")
    (n_skips,) = struct.unpack_from("<H", data, pos)
    pos += 2
    skips = []
    for _ in range(n_skips):
        names = []
        for _ in range(2):
            (ln,) = struct.unpack_from("<B", data, pos)
            pos += 1
            names.append(data[pos:pos + ln].decode("ascii"))
            pos += ln
        skips.append((names[0], names[1]))
    (n_layers,) = struct.unpack_from("<I", data, pos)
    pos += 4

    cfg = NetConfig(input_size=input_size, base_width=base_width,
                    output_mode=_MODE_NAME[mode_code], skip_wiring=tuple(skips))
    net = build_network(cfg, init_seed=0)
    if n_layers != len(net.layers):
        raise ValueError(f"checkpoint has {n_layers} layers, config implies {len(net.layers)}")
    for layer in net.layers:
        wn = layer.out_channels * layer.in_channels * 9
        need = (wn + layer.out_channels) * 4
        if pos + need > len(data):
            raise ValueError("truncated checkpoint parameter block")
        w = np.frombuffer(data, dtype="<f4", count=wn, offset=pos)
        pos += wn * 4
        b = np.frombuffer(data, dtype="<f4", count=layer.out_channels, offset=pos)
        pos += layer.out_channels * 4
        layer.weight = w.astype(np.float64).reshape(layer.weight.shape)
        layer.bias = b.astype(np.float64)
    if pos != len(data):
        raise ValueError("trailing bytes after checkpoint parameter blocks")
    return net
