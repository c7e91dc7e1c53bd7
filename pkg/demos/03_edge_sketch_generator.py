"""The edge-plus-blur sketch generator.

A rendered drawing is converted into a sketch-like image by mixing its
Canny edge map (Sobel gradients, non-maximum suppression, double-threshold
hysteresis) with a Gaussian-blurred copy, then mapping back to white paper.
"""

from _bootstrap import OUT

import numpy as np

from sketchclean.raster import save_raster
from sketchclean.synth import (Circle, Rect, ShapeSpec, canny_edges,
                               generate_sketch_from_render, render_clean)

drawing = render_clean(ShapeSpec((Rect(0.2, 0.2, 0.8, 0.8), Circle(0.5, 0.5, 0.2))), 96, 96)
save_raster(drawing, OUT / "sketchgen_input.png")

edges = canny_edges(drawing, low=0.2, high=0.6)
print("edge pixels:", int(edges.sum()))

# a clean vertical step produces a single-pixel-wide response
step = np.zeros((9, 9))
step[:, 5:] = 1.0
print("step response width per row:", set(canny_edges(step, 0.2, 0.6).sum(axis=1).tolist()))

for w_edge in (1.0, 0.6, 0.0):
    sketch = generate_sketch_from_render(drawing, canny_low=0.2, canny_high=0.6,
                                         blur_sigma=1.2, w_edge=w_edge)
    save_raster(sketch, OUT / f"sketchgen_w{int(w_edge * 100):03d}.png")
    print(f"w_edge={w_edge:.1f}: mean intensity {sketch.mean():.3f}")
print("outputs in", OUT)
