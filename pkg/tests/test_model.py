import numpy as np
import pytest

from sketchclean import model
from sketchclean.model import (
    ConvLayer,
    NetConfig,
    Network,
    activation_shapes,
    backward,
    build_network,
    concat_skip,
    conv2d_direct,
    forward,
    init_params,
    kind_census,
    load_checkpoint,
    save_checkpoint,
    upconv,
)

from helpers import conv3x3_loops, fd_layer_check, fd_whole_net_check

# The thirteen canonical stage shapes of the full-scale configuration
# (input 256, base width 32, doubling head), plus the probability head.
REFERENCE_SHAPES_256 = [
    ("A", (32, 256, 256)),
    ("B", (64, 256, 256)),
    ("C", (128, 128, 128)),
    ("D", (256, 64, 64)),
    ("E", (512, 32, 32)),
    ("F", (512, 64, 64)),
    ("G", (512, 128, 128)),
    ("H", (256, 128, 128)),
    ("I", (256, 256, 256)),
    ("J", (128, 256, 256)),
    ("K", (128, 512, 512)),
    ("L", (64, 512, 512)),
    ("M", (32, 512, 512)),
    ("head", (1, 512, 512)),
]


def _flat_layer(c_in, c_out, weight=None, bias=None, activation="relu"):
    w = np.zeros((c_out, c_in, 3, 3)) if weight is None else weight
    b = np.zeros(c_out) if bias is None else bias
    return ConvLayer("t", "flat", c_in, c_out, w, b, activation)


# --- architecture ---


def test_full_scale_shapes_match_reference():
    shapes = activation_shapes(NetConfig(256, 32, "double"))
    assert shapes == REFERENCE_SHAPES_256


def test_channel_multipliers_scale_with_base_width():
    shapes = dict(activation_shapes(NetConfig(64, 8, "double")))
    mult = {"A": 1, "B": 2, "C": 4, "D": 8, "E": 16, "F": 16, "G": 16,
            "H": 8, "I": 8, "J": 4, "K": 4, "L": 2, "M": 1}
    for stage, m in mult.items():
        assert shapes[stage][0] == 8 * m


def test_forward_output_shapes_double_and_same():
    rng = np.random.default_rng(0)
    x = rng.random((1, 64, 64))
    net_d = build_network(NetConfig(64, 8, "double"), init_seed=1)
    assert forward(net_d, x).shape == (1, 128, 128)
    net_s = build_network(NetConfig(64, 8, "same"), init_seed=1)
    assert forward(net_s, x).shape == (1, 64, 64)


def test_shape_propagation_oracle():
    # independent oracle: walk the layer list applying each kind's spatial rule
    for cfg in [NetConfig(64, 8, "double"), NetConfig(64, 8, "same"),
                NetConfig(16, 2, "double", skip_wiring=())]:
        net = build_network(cfg, init_seed=0)
        size = cfg.input_size
        expected = []
        for layer in net.layers:
            if layer.kind == "down":
                size = -(-size // 2)
            elif layer.kind == "up":
                size *= 2
            expected.append((layer.name, (layer.out_channels, size, size)))
        assert activation_shapes(cfg) == expected


def test_input_size_must_divide_by_8():
    with pytest.raises(ValueError):
        build_network(NetConfig(100, 8, "double"), init_seed=0)


def test_no_pooling_census():
    net = build_network(NetConfig(16, 2, "double"), init_seed=0)
    census = kind_census(net)
    assert set(census) == {"flat", "down", "up"}
    assert census["down"] == 3


def test_skip_toggle_changes_only_skip_inputs():
    with_skips = build_network(NetConfig(16, 2, "double"), init_seed=0)
    without = build_network(NetConfig(16, 2, "double", skip_wiring=()), init_seed=0)
    for a, b in zip(with_skips.layers, without.layers):
        if a.name in ("H", "J"):
            assert a.in_channels > b.in_channels
        else:
            assert a.in_channels == b.in_channels
        assert a.out_channels == b.out_channels


def test_invalid_skip_wiring_rejected():
    with pytest.raises(ValueError):
        build_network(NetConfig(16, 2, "double", skip_wiring=(("E", "H"),)), init_seed=0)
    with pytest.raises(ValueError):
        build_network(NetConfig(16, 2, "double", skip_wiring=(("C", "F"),)), init_seed=0)
    with pytest.raises(ValueError):
        NetConfig(16, 2, "double", skip_wiring=(("Z", "H"),)).validate()


# --- conv primitives ---


def test_conv_matches_loop_oracle():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 5, 5))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    for kind, stride in (("flat", 1), ("down", 2)):
        layer = ConvLayer("t", kind, 2, 3, w, b)
        got = conv2d_direct(x, layer)
        want = conv3x3_loops(x, w, b, stride)
        assert got.shape == want.shape
        assert np.abs(got - want).max() < 1e-12


def test_conv_all_ones_kernel_center_is_total_sum():
    rng = np.random.default_rng(2)
    x = rng.random((1, 3, 3))
    layer = _flat_layer(1, 1, weight=np.ones((1, 1, 3, 3)))
    out = conv2d_direct(x, layer)
    assert out[0, 1, 1] == pytest.approx(x.sum(), rel=1e-12)


def test_conv_zero_kernel_gives_bias():
    layer = _flat_layer(1, 2, bias=np.array([0.3, -0.7]))
    out = conv2d_direct(np.random.default_rng(3).random((1, 4, 4)), layer)
    assert np.allclose(out[0], 0.3) and np.allclose(out[1], -0.7)


def test_conv_flat_preserves_shape():
    layer = _flat_layer(2, 5)
    assert conv2d_direct(np.zeros((2, 7, 9)), layer).shape == (5, 7, 9)


def test_conv_down_halves_with_ceil():
    w = np.zeros((1, 1, 3, 3))
    layer = ConvLayer("t", "down", 1, 1, w, np.zeros(1))
    assert conv2d_direct(np.zeros((1, 7, 7)), layer).shape == (1, 4, 4)


def test_conv_channel_mismatch():
    with pytest.raises(ValueError):
        conv2d_direct(np.zeros((3, 4, 4)), _flat_layer(2, 2))


def test_upconv_constant_with_center_kernel():
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    layer = ConvLayer("t", "up", 1, 1, w, np.zeros(1))
    out = upconv(np.full((1, 3, 3), 0.6), layer)
    assert out.shape == (1, 6, 6)
    assert np.allclose(out, 0.6)


def test_upconv_nearest_neighbor_definition():
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    layer = ConvLayer("t", "up", 1, 1, w, np.zeros(1))
    out = upconv(np.array([[[0.25]]]), layer)
    assert np.array_equal(out, np.full((1, 2, 2), 0.25))


def test_upconv_matches_compose_oracle():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((1, 2, 2))
    w = rng.standard_normal((2, 1, 3, 3))
    b = rng.standard_normal(2)
    layer = ConvLayer("t", "up", 1, 2, w, b)
    up = x.repeat(2, axis=1).repeat(2, axis=2)
    want = conv3x3_loops(up, w, b, 1)
    assert np.abs(upconv(x, layer) - want).max() < 1e-12


def test_upconv_kind_mismatch():
    with pytest.raises(ValueError):
        upconv(np.zeros((1, 2, 2)), _flat_layer(1, 1))


def test_concat_channel_arithmetic_and_order():
    d = np.random.default_rng(5).random((4, 8, 8))
    e = np.random.default_rng(6).random((2, 8, 8))
    out = concat_skip(d, e)
    assert out.shape == (6, 8, 8)
    assert np.array_equal(out[:4], d)
    assert np.array_equal(out[4:], e)


def test_concat_spatial_mismatch():
    with pytest.raises(ValueError):
        concat_skip(np.zeros((1, 4, 4)), np.zeros((1, 5, 5)))


def test_concat_zero_encoder_with_zero_extended_kernel():
    # extending a kernel with zero weights over concatenated zero channels
    # must reproduce the original convolution output
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 6, 6))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    base = conv2d_direct(x, ConvLayer("t", "flat", 2, 3, w, b))
    xc = concat_skip(x, np.zeros((2, 6, 6)))
    w_ext = np.concatenate([w, np.zeros((3, 2, 3, 3))], axis=1)
    ext = conv2d_direct(xc, ConvLayer("t", "flat", 4, 3, w_ext, b))
    assert np.abs(base - ext).max() < 1e-12


# --- forward ---


def test_forward_outputs_strictly_in_unit_interval():
    net = build_network(NetConfig(16, 2, "double"), init_seed=3)
    out = forward(net, np.random.default_rng(8).random((1, 16, 16)))
    assert out.min() > 0.0 and out.max() < 1.0


def test_forward_zero_parameters_gives_half():
    net = build_network(NetConfig(16, 2, "double"), init_seed=0)
    for layer in net.layers:
        layer.weight[...] = 0.0
        layer.bias[...] = 0.0
    out = forward(net, np.random.default_rng(9).random((1, 16, 16)))
    assert np.all(out == 0.5)


def test_forward_single_down_layer_samples_even_indices():
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    layer = ConvLayer("d", "down", 1, 1, w, np.zeros(1))
    net = Network(config=NetConfig(8, 1, "same", skip_wiring=()), layers=[layer])
    x = np.random.default_rng(10).random((1, 8, 8))  # non-negative: ReLU is identity
    out, _ = model.forward_with_cache(net, x)
    assert np.array_equal(out[0], x[0, ::2, ::2])


def test_forward_shape_mismatch():
    net = build_network(NetConfig(16, 2, "double"), init_seed=0)
    with pytest.raises(ValueError):
        forward(net, np.zeros((1, 8, 8)))


def test_forward_bit_stable():
    net = build_network(NetConfig(16, 2, "double"), init_seed=4)
    x = np.random.default_rng(11).random((1, 16, 16))
    assert np.array_equal(forward(net, x), forward(net, x))


# --- backward ---


def test_backward_zero_output_grad():
    net = build_network(NetConfig(16, 2, "double"), init_seed=5)
    x = np.random.default_rng(12).random((1, 16, 16))
    grads, gin = backward(net, x, np.zeros((1, 32, 32)))
    assert np.all(gin == 0)
    for dw, db in grads:
        assert np.all(dw == 0) and np.all(db == 0)


def test_backward_relu_gates_negative_preactivation():
    layer = _flat_layer(1, 1, bias=np.array([-10.0]))
    net = Network(config=NetConfig(8, 1, "same", skip_wiring=()), layers=[layer])
    x = np.random.default_rng(13).random((1, 8, 8))
    grads, gin = backward(net, x, np.ones((1, 8, 8)))
    assert np.all(grads[0][0] == 0) and np.all(grads[0][1] == 0) and np.all(gin == 0)


def test_backward_shape_mismatch():
    net = build_network(NetConfig(16, 2, "double"), init_seed=0)
    with pytest.raises(ValueError):
        backward(net, np.zeros((1, 16, 16)), np.zeros((1, 16, 16)))


def test_every_layer_gradient_matches_finite_differences():
    rng = np.random.default_rng(14)
    net = build_network(NetConfig(16, 2, "double"), init_seed=6)
    for layer in net.layers:
        checked = fd_layer_check(layer, spatial=8, rng=rng, eps=1e-4,
                                 rel_tol=1e-3, abs_tol=1e-7, samples_per_tensor=3)
        assert checked >= 2


def test_composed_backward_matches_finite_differences():
    rng = np.random.default_rng(24)
    net = build_network(NetConfig(16, 2, "double"), init_seed=6)
    x = rng.random((1, 16, 16))
    probe = rng.standard_normal((1, 32, 32))
    fd_whole_net_check(net, x, probe, rng, samples_per_layer=2, min_checked=14)


def test_backward_input_gradient_matches_fd():
    rng = np.random.default_rng(15)
    net = build_network(NetConfig(16, 2, "same"), init_seed=7)
    x = rng.random((1, 16, 16))
    probe = rng.standard_normal((1, 16, 16))
    _, gin = backward(net, x, probe)
    flat = x.ravel()
    for i in rng.choice(flat.size, size=6, replace=False):
        orig = flat[i]
        flat[i] = orig + 1e-6
        lp = float((forward(net, x) * probe).sum())
        flat[i] = orig - 1e-6
        lm = float((forward(net, x) * probe).sum())
        flat[i] = orig
        fd = (lp - lm) / 2e-6
        assert abs(gin.ravel()[i] - fd) <= 1e-3 * max(abs(fd), 1e-7) + 1e-7


# --- init ---


def test_init_deterministic_per_seed():
    a = build_network(NetConfig(16, 2, "double"), init_seed=21)
    b = build_network(NetConfig(16, 2, "double"), init_seed=21)
    c = build_network(NetConfig(16, 2, "double"), init_seed=22)
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.weight, lb.weight)
    assert any(not np.array_equal(la.weight, lc.weight) for la, lc in zip(a.layers, c.layers))


def test_init_biases_zero():
    net = build_network(NetConfig(16, 2, "double"), init_seed=1)
    for layer in net.layers:
        assert np.all(layer.bias == 0.0)


def test_init_weight_variance_near_he_target():
    layer = ConvLayer("t", "flat", 128, 16, np.zeros((16, 128, 3, 3)), np.zeros(16))
    net = Network(config=NetConfig(16, 2, "same", skip_wiring=()), layers=[layer])
    init_params(net, seed=33)
    fan_in = 128 * 9
    target = 2.0 / fan_in
    var = float(net.layers[0].weight.var())
    assert abs(var - target) / target < 0.2


# --- checkpoints ---


def test_checkpoint_round_trip_bit_exact(tmp_path):
    net = build_network(NetConfig(16, 2, "double"), init_seed=8)
    x = np.random.default_rng(16).random((1, 16, 16))
    before = forward(net, x)
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, path)
    loaded = load_checkpoint(path)
    assert loaded.config == net.config
    assert np.array_equal(forward(loaded, x), before)


def test_checkpoint_bad_magic(tmp_path):
    p = tmp_path / "bad.ckpt"
    p.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(ValueError):
        load_checkpoint(p)


def test_checkpoint_truncated(tmp_path):
    net = build_network(NetConfig(16, 2, "double"), init_seed=8)
    p = tmp_path / "net.ckpt"
    save_checkpoint(net, p)
    data = p.read_bytes()
    p.write_bytes(data[:-17])
    with pytest.raises(ValueError):
        load_checkpoint(p)


def test_checkpoint_preserves_skip_wiring(tmp_path):
    cfg = NetConfig(16, 2, "double", skip_wiring=())
    net = build_network(cfg, init_seed=8)
    p = tmp_path / "noskip.ckpt"
    save_checkpoint(net, p)
    assert load_checkpoint(p).config.skip_wiring == ()
