"""Rasters 101: loading, saving, resizing, ink masks, and polarity.

Files store sketches as "white paper, dark ink" (1.0 = white). The losses
and the network want the opposite convention (ink = 1), so everything
crossing that boundary goes through invert().
"""

from _bootstrap import OUT

import numpy as np

from sketchclean.raster import invert, load_raster, resize_bilinear, save_raster, to_ink_mask

rng = np.random.default_rng(0)

# a tiny gradient image, saved and re-loaded: round trip is 8-bit accurate
img = np.linspace(0, 1, 64 * 64).reshape(64, 64)
save_raster(img, OUT / "gradient.png")
back = load_raster(OUT / "gradient.png")
print("round-trip max error:", np.abs(back - img).max(), "(<= 1/255)")

# PGM works the same way, with no image library involved
save_raster(img, OUT / "gradient.pgm")
print("pgm matches png:", np.array_equal(load_raster(OUT / "gradient.pgm"), back))

# bilinear resampling preserves constants and interpolates between samples
checker = np.array([[0.0, 1.0], [1.0, 0.0]])
up = resize_bilinear(checker, 3, 3)
print("checkerboard 2x2 -> 3x3 center:", up[1, 1], "(= 0.5 by hand)")

# ink masks: a pixel is ink when strictly darker than the threshold
strip = np.array([[0.2, 0.5, 0.8]])
print("mask of [0.2 0.5 0.8] @ 0.5:", to_ink_mask(strip, 0.5).tolist())

# polarity: invert is its own inverse
sample = rng.random((4, 4))
print("invert is involutive:", np.array_equal(invert(invert(sample)), sample))
