"""Anatomy of the cleaner network.

An hourglass of 3x3 convolutions: two flat stages, three stride-2 down
stages, then alternating upsampling and flat stages back out, with encoder
maps B and C concatenated into the matching-resolution decoder stages. No
pooling anywhere; ReLU everywhere except the logistic head.
"""

from _bootstrap import OUT  # noqa: F401

import numpy as np

from sketchclean.model import (NetConfig, activation_shapes, build_network, forward,
                               kind_census, load_checkpoint, save_checkpoint)

full = NetConfig(input_size=256, base_width=32, output_mode="double")
print("full-scale stage shapes (channels, height, width):")
for name, shape in activation_shapes(full):
    print(f"  {name:>4s}: {shape}")

desk = NetConfig(input_size=64, base_width=8, output_mode="double")
net = build_network(desk, init_seed=1)
print("desk net kinds:", kind_census(net))
n_params = sum(l.weight.size + l.bias.size for l in net.layers)
print("desk net parameters:", n_params)

x = np.random.default_rng(0).random((1, 64, 64))
y = forward(net, x)
print("forward: input 1x64x64 -> output", y.shape, " values in (0,1):",
      (y.min() > 0.0, y.max() < 1.0))

ckpt = OUT / "anatomy.ckpt"
save_checkpoint(net, ckpt)
again = load_checkpoint(ckpt)
print("checkpoint round trip bit-exact:", bool(np.array_equal(forward(again, x), y)))
