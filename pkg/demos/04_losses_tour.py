"""The training loss, piece by piece.

Sketches are almost all background, so plain cross-entropy collapses. The
balanced term weights each class's log-loss by the opposite class's pixel
share; the density term weights each ink pixel by how concentrated its
intensity is within one histogram bin of a Gaussian kernel estimate.
"""

from _bootstrap import OUT  # noqa: F401  (import set up for consistency)

import numpy as np

from sketchclean.losses import (LossConfig, bdcn_loss, bin_probabilities,
                                class_balance_weights, combined_loss, kde_density,
                                kde_loss, pmax_weights)
from sketchclean.raster import invert
from sketchclean.synth import Circle, DefectProfile, ShapeSpec, inject_defects, render_clean

cfg = LossConfig()
print("defaults:", cfg.to_dict())

clean = render_clean(ShapeSpec((Circle(0.5, 0.5, 0.3),)), 32, 32)
# faint mesh lines and a touch of blur add mid-gray values, whose kernels
# straddle bin edges and therefore earn lower weights than crisp pixels
soft = inject_defects(clean, DefectProfile(mesh_line_count=3, blur_sigma=0.6, seed=1))
y = invert(soft)  # ink polarity for the loss

alpha, beta = class_balance_weights(y, cfg)
print(f"alpha (background weight) = {alpha:.4f}, beta (ink weight) = {beta:.4f}")

# intensity histogram of the ground truth: one dominant background bin
hist = bin_probabilities(y, cfg)
print("histogram:", np.round(hist, 3).tolist(), " sum:", float(hist.sum()))

f = kde_density(y, cfg.kde_sigma)
print("density at g=0 (background):", float(f(0.0)), " at g=1 (ink):", float(f(1.0)))

weights = pmax_weights(y, cfg)
print(f"P_max weights: min {weights.min():.3f}  max {weights.max():.3f}")

rng = np.random.default_rng(0)
yhat = np.clip(y + 0.2 * rng.standard_normal(y.shape), 0.01, 0.99)
l1v, _ = bdcn_loss(yhat, y, cfg)
l2v, _ = kde_loss(yhat, y, weights, cfg)
lcv, grad = combined_loss(yhat, y, cfg)
print(f"balanced CE = {l1v:.3f}, density-weighted = {l2v:.3f}, "
      f"combined = {lcv:.3f} (= {cfg.lambda1}*L1 + {cfg.lambda2}*L2)")
print("gradient shape:", grad.shape, " mean |g|:", float(np.abs(grad).mean()))
