"""Shared test oracles: brute-force convolution and finite-difference checks.

Central differences are only a valid derivative estimate where the function
is smooth over the probed interval, so the ReLU checks guard against gate
flips: per-layer checks redraw samples whose own activation pattern changes,
and the whole-net composition check discards out-of-tolerance samples whose
any gate flipped. A systematically wrong gradient still fails: kink-free
samples exist for every tensor and fail directly.
"""

import numpy as np

from sketchclean.model import (
    ConvLayer,
    NetConfig,
    Network,
    backward,
    backward_from_cache,
    conv2d_direct,
    forward,
    forward_with_cache,
)


def conv3x3_loops(x, weight, bias, stride):
    """Quadruple-loop cross-correlation with padding 1 (independent oracle)."""
    c_in, h, w = x.shape
    c_out = weight.shape[0]
    xp = np.zeros((c_in, h + 2, w + 2))
    xp[:, 1:-1, 1:-1] = x
    ho = (h + 2 - 3) // stride + 1
    wo = (w + 2 - 3) // stride + 1
    out = np.zeros((c_out, ho, wo))
    for o in range(c_out):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for c in range(c_in):
                    for ki in range(3):
                        for kj in range(3):
                            acc += weight[o, c, ki, kj] * xp[c, i * stride + ki, j * stride + kj]
                out[o, i, j] = acc + bias[o]
    return out


def _relu_signature(net, x):
    _, cache = forward_with_cache(net, x)
    return [z > 0 for _, z in cache]


def _signatures_equal(a, b):
    return all(np.array_equal(p, q) for p, q in zip(a, b))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _layer_eval(layer, x):
    """(conv_input, pre_activation, activation) for one isolated layer."""
    conv_in = x.repeat(2, axis=1).repeat(2, axis=2) if layer.kind == "up" else x
    z = conv2d_direct(conv_in, layer)
    a = _sigmoid(z) if layer.activation == "sigmoid" else np.maximum(z, 0.0)
    return conv_in, z, a


def fd_layer_check(layer, spatial, rng, eps=1e-4, rel_tol=1e-3, abs_tol=1e-7,
                   samples_per_tensor=5):
    """FD-check one layer's parameter and input gradients in isolation.

    Probes L = sum(R * activation(layer(x))) on a random instance. For ReLU
    layers, samples whose perturbation flips this layer's own gates are
    redrawn; the check fails if a tensor yields no clean sample.
    Returns the number of verified parameter samples.
    """
    x = rng.uniform(0.1, 1.0, size=(layer.in_channels, spatial, spatial))
    conv_in, z, a = _layer_eval(layer, x)
    probe_w = rng.standard_normal(a.shape)

    shell = Network(config=NetConfig(8, 1, "same", skip_wiring=()), layers=[layer])
    grads, gin = backward_from_cache(shell, [(conv_in, z)], probe_w)

    def probe_and_sig():
        ci, zz, aa = _layer_eval(layer, x)
        return float((aa * probe_w).sum()), (zz > 0)

    base_sig = z > 0
    gated = layer.activation == "relu"
    checked = 0
    d_w, d_b = grads[0]
    for arr, darr in ((layer.weight, d_w), (layer.bias, d_b)):
        flat = arr.ravel()
        dflat = darr.ravel()
        n_ok = 0
        attempts = 0
        while n_ok < min(samples_per_tensor, flat.size) and attempts < 60 * samples_per_tensor:
            attempts += 1
            i = int(rng.integers(flat.size))
            orig = flat[i]
            flat[i] = np.float64(np.float32(orig + eps))
            wp, (lp, sig_p) = flat[i], probe_and_sig()
            flat[i] = np.float64(np.float32(orig - eps))
            wm, (lm, sig_m) = flat[i], probe_and_sig()
            flat[i] = orig
            if gated and not (np.array_equal(sig_p, base_sig) and np.array_equal(sig_m, base_sig)):
                continue
            fd = (lp - lm) / (wp - wm)
            an = dflat[i]
            err = abs(an - fd)
            rel = err / max(abs(an), abs(fd), 1e-12)
            assert err <= abs_tol or rel <= rel_tol, (
                f"layer {layer.name} ({layer.kind}) param {i}: "
                f"analytic {an} vs fd {fd} (rel {rel:.3g})")
            n_ok += 1
            checked += 1
        assert n_ok > 0, f"layer {layer.name}: no kink-free FD samples for a parameter tensor"

    # input gradient, same guard
    flat = x.ravel()
    n_ok = 0
    attempts = 0
    while n_ok < samples_per_tensor and attempts < 60 * samples_per_tensor:
        attempts += 1
        i = int(rng.integers(flat.size))
        orig = flat[i]
        flat[i] = orig + eps
        lp, sig_p = probe_and_sig()
        flat[i] = orig - eps
        lm, sig_m = probe_and_sig()
        flat[i] = orig
        if gated and not (np.array_equal(sig_p, base_sig) and np.array_equal(sig_m, base_sig)):
            continue
        fd = (lp - lm) / (2 * eps)
        an = gin.ravel()[i]
        err = abs(an - fd)
        assert err <= abs_tol or err / max(abs(an), abs(fd), 1e-12) <= rel_tol, (
            f"layer {layer.name} input grad {i}: analytic {an} vs fd {fd}")
        n_ok += 1
    assert n_ok > 0, f"layer {layer.name}: no kink-free FD samples for the input gradient"
    return checked


def fd_whole_net_check(net, x, probe_weights, rng, eps=1e-4, rel_tol=1e-3,
                       abs_tol=1e-7, samples_per_layer=3, min_checked=20):
    """Composition FD check through the full network.

    Out-of-tolerance samples are discarded when any ReLU gate flipped during
    the perturbation (the FD estimate is invalid there); valid failures
    raise. Requires at least ``min_checked`` verified samples overall.
    """
    grads, _ = backward(net, x, probe_weights)
    base_sig = _relu_signature(net, x)

    def probe():
        return float((forward(net, x) * probe_weights).sum())

    checked = 0
    for li, layer in enumerate(net.layers):
        d_w, _d_b = grads[li]
        flat = layer.weight.ravel()
        dflat = d_w.ravel()
        n_ok = 0
        attempts = 0
        while n_ok < samples_per_layer and attempts < 20 * samples_per_layer:
            attempts += 1
            i = int(rng.integers(flat.size))
            orig = flat[i]
            flat[i] = np.float64(np.float32(orig + eps))
            wp, lp = flat[i], probe()
            sig_p = _relu_signature(net, x)
            flat[i] = np.float64(np.float32(orig - eps))
            wm, lm = flat[i], probe()
            sig_m = _relu_signature(net, x)
            flat[i] = orig
            fd = (lp - lm) / (wp - wm)
            an = dflat[i]
            err = abs(an - fd)
            rel = err / max(abs(an), abs(fd), 1e-12)
            within = err <= abs_tol or rel <= rel_tol
            kinked = not (_signatures_equal(sig_p, base_sig)
                          and _signatures_equal(sig_m, base_sig))
            if not within and kinked:
                continue
            assert within, (
                f"layer {layer.name} param {i}: analytic {an} vs fd {fd} (rel {rel:.3g})")
            n_ok += 1
            checked += 1
    assert checked >= min_checked, f"only {checked} valid composition FD samples"
    return checked


def fd_loss_check(loss_fn, yhat, eps, rng, samples=16, rel_tol=1e-5):
    """Central finite differences for a scalar loss over predictions."""
    _loss, grad = loss_fn(yhat)
    worst = 0.0
    flat = yhat.ravel()
    gflat = grad.ravel()
    for i in rng.choice(flat.size, size=min(samples, flat.size), replace=False):
        orig = flat[i]
        flat[i] = orig + eps
        lp = loss_fn(yhat)[0]
        flat[i] = orig - eps
        lm = loss_fn(yhat)[0]
        flat[i] = orig
        fd = (lp - lm) / (2 * eps)
        rel = abs(gflat[i] - fd) / max(abs(fd), abs(gflat[i]), 1e-12)
        assert rel <= rel_tol, f"pixel {i}: analytic {gflat[i]} vs fd {fd} (rel {rel:.3g})"
        worst = max(worst, rel)
    return worst
