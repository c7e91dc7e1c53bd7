"""Does cleaning queries improve retrieval?

Builds a 60-item index (6 shape classes x 10 variants), defects 30 query
sketches, trains a desk-scale cleaner, and compares top-10 accuracy /
precision / recall for raw-defective versus cleaned queries over the same
index. The cleaned queries should win, decisively so on the severe subset.
Takes two to three minutes.
"""

from _bootstrap import OUT

from dataclasses import replace

import numpy as np

from sketchclean.losses import LossConfig
from sketchclean.model import NetConfig, forward
from sketchclean.raster import invert, resize_bilinear
from sketchclean.retrieval import build_index, embed, save_index, score_retrieval, write_report_json
from sketchclean.synth import (Circle, DefectProfile, Polyline, Rect, ShapeSpec,
                               TrainingPair, inject_defects, render_clean)
from sketchclean.training import TrainConfig, train

W = 2.0
PROTOS = {
    "washer": ShapeSpec((Circle(0.5, 0.5, 0.32), Circle(0.5, 0.5, 0.14)), W),
    "plate": ShapeSpec((Rect(0.15, 0.25, 0.85, 0.75), Circle(0.3, 0.5, 0.06),
                        Circle(0.7, 0.5, 0.06)), W),
    "bracket": ShapeSpec((Polyline(((0.2, 0.2), (0.45, 0.2), (0.45, 0.55), (0.8, 0.55),
                                    (0.8, 0.8), (0.2, 0.8)), closed=True),), W),
    "gear": ShapeSpec((Circle(0.5, 0.5, 0.28), Circle(0.5, 0.5, 0.1),
                       Polyline(((0.5, 0.14), (0.5, 0.06))), Polyline(((0.5, 0.86), (0.5, 0.94))),
                       Polyline(((0.14, 0.5), (0.06, 0.5))), Polyline(((0.86, 0.5), (0.94, 0.5)))), W),
    "panel": ShapeSpec((Rect(0.15, 0.15, 0.85, 0.85), Polyline(((0.38, 0.15), (0.38, 0.85))),
                        Polyline(((0.62, 0.15), (0.62, 0.85)))), W),
    "strut": ShapeSpec((Polyline(((0.4, 0.1), (0.6, 0.1), (0.6, 0.4), (0.9, 0.4), (0.9, 0.6),
                                  (0.6, 0.6), (0.6, 0.9), (0.4, 0.9), (0.4, 0.6), (0.1, 0.6),
                                  (0.1, 0.4), (0.4, 0.4)), closed=True),), W),
}


def jitter(spec, rng):
    s = float(rng.uniform(0.95, 1.05))
    dx, dy = (float(v) for v in rng.uniform(-0.02, 0.02, 2))

    def m(x, y):
        return (min(max((x - 0.5) * s + 0.5 + dx, 0.0), 1.0),
                min(max((y - 0.5) * s + 0.5 + dy, 0.0), 1.0))

    prims = []
    for p in spec.primitives:
        if isinstance(p, Circle):
            cx, cy = m(p.cx, p.cy)
            prims.append(Circle(cx, cy, min(p.r * s, min(cx, cy, 1 - cx, 1 - cy))))
        elif isinstance(p, Rect):
            (x0, y0), (x1, y1) = m(p.x0, p.y0), m(p.x1, p.y1)
            prims.append(Rect(x0, y0, x1, y1))
        else:
            prims.append(Polyline(tuple(m(x, y) for x, y in p.points), p.closed))
    return ShapeSpec(tuple(prims), spec.stroke_width)


SIZE, K = 32, 10
MILD = DefectProfile(gap_rate=4, extra_line_count=1, duplicate_stroke_count=1,
                     duplicate_jitter=2, seed=0)
SEVERE = DefectProfile(gap_rate=10, mesh_line_count=40, extra_line_count=14,
                       duplicate_stroke_count=8, duplicate_jitter=5, seed=0)

rng = np.random.default_rng(42)
items, queries_clean, labels = [], [], []
for cls, proto in PROTOS.items():
    for j in range(10):
        items.append((f"{cls}{j:02d}", cls, render_clean(jitter(proto, rng), SIZE, SIZE)))
    for _ in range(5):
        queries_clean.append(render_clean(jitter(proto, rng), SIZE, SIZE))
        labels.append(cls)
index = build_index(items)
save_index(index, OUT / "ab.idx")

defective = [inject_defects(r, replace(SEVERE if i % 2 == 0 else MILD, seed=1000 + i))
             for i, r in enumerate(queries_clean)]

print("training the cleaner ...")
train_rng = np.random.default_rng(7)
train_pairs = []
for rep in range(10):
    for ci, (cls, proto) in enumerate(PROTOS.items()):
        clean32 = render_clean(jitter(proto, train_rng), SIZE, SIZE)
        prof = SEVERE if (rep + ci) % 2 == 0 else MILD
        rough32 = inject_defects(clean32, replace(prof, seed=5000 + rep * 10 + ci))
        train_pairs.append(TrainingPair(resize_bilinear(rough32, 16, 16),
                                        resize_bilinear(clean32, 16, 16), cls))
net, _ = train(train_pairs, TrainConfig(epochs=200, batch_size=8, learning_rate=3e-4,
                                        seed=7, loss=LossConfig(),
                                        net=NetConfig(16, 2, "same")))

cleaned = [1.0 - forward(net, invert(resize_bilinear(r, 16, 16))[None])[0] for r in defective]

before = score_retrieval(index, [(embed(r), l) for r, l in zip(defective, labels)], K)
after = score_retrieval(index, [(embed(r), l) for r, l in zip(cleaned, labels)], K)
write_report_json(OUT / "ab_defective.json", before)
write_report_json(OUT / "ab_cleaned.json", after)

print(f"{'':12s}{'top-10 acc':>12s}{'precision':>11s}{'recall':>9s}")
print(f"{'defective':12s}{before.top_k_accuracy:12.2f}{before.precision:11.4f}{before.recall:9.4f}")
print(f"{'cleaned':12s}{after.top_k_accuracy:12.2f}{after.precision:11.4f}{after.recall:9.4f}")
print("reports written to", OUT)
