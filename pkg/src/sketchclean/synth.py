"""Procedural training data for sketch cleanup.

Renders clean line art from parametric primitives, injects the four rough
defect classes (gaps, duplicate strokes, mesh lines, extra lines), and
provides the classic edge-plus-blur sketch generator (Sobel/NMS/hysteresis
Canny mixed with a Gaussian-blurred render).

Everything here is a pure function of its inputs and a seed, so datasets are
bit-reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .raster import as_raster, load_raster, save_raster

__all__ = [
    "Circle",
    "Rect",
    "Polyline",
    "Arc",
    "ShapeSpec",
    "DefectProfile",
    "TrainingPair",
    "render_clean",
    "gaussian_blur",
    "canny_edges",
    "generate_sketch_from_render",
    "inject_defects",
    "make_dataset",
    "shape_families",
    "write_dataset",
    "read_dataset",
]

_SEED_MASK = (1 << 63) - 1


# --- shape specs -------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True)
class Polyline:
    points: tuple[tuple[float, float], ...]
    closed: bool = False


@dataclass(frozen=True)
class Arc:
    cx: float
    cy: float
    r: float
    start_deg: float
    end_deg: float


@dataclass(frozen=True)
class ShapeSpec:
    """A set of primitives in normalized [0, 1]^2 coordinates."""

    primitives: tuple = ()
    stroke_width: float = 1.0

    def __post_init__(self):
        if self.stroke_width <= 0:
            raise ValueError("stroke_width must be positive")
        for p in self.primitives:
            for x, y in _control_points(p):
                if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                    raise ValueError(f"primitive coordinate ({x}, {y}) outside unit square")


@dataclass(frozen=True)
class DefectProfile:
    """How much of each rough-sketch defect to inject, plus the RNG seed.

    gap_rate is the expected number of gaps per 100 ink pixels. All counts
    and rates must be non-negative. The identity profile (all zero) leaves
    the input untouched.
    """

    gap_rate: float = 0.0
    duplicate_stroke_count: int = 0
    duplicate_jitter: float = 0.0
    mesh_line_count: int = 0
    extra_line_count: int = 0
    blur_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("gap_rate", "duplicate_stroke_count", "duplicate_jitter",
                     "mesh_line_count", "extra_line_count", "blur_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class TrainingPair:
    rough: np.ndarray
    clean: np.ndarray
    category: str | None = None


def _control_points(prim):
    if isinstance(prim, Circle):
        return [(prim.cx - prim.r, prim.cy - prim.r), (prim.cx + prim.r, prim.cy + prim.r)]
    if isinstance(prim, Rect):
        return [(prim.x0, prim.y0), (prim.x1, prim.y1)]
    if isinstance(prim, Polyline):
        return list(prim.points)
    if isinstance(prim, Arc):
        return [(prim.cx - prim.r, prim.cy - prim.r), (prim.cx + prim.r, prim.cy + prim.r)]
    raise TypeError(f"unknown primitive {type(prim).__name__}")


# --- rendering ---------------------------------------------------------------


def render_clean(spec: ShapeSpec, h: int, w: int) -> np.ndarray:
    """Rasterize a ShapeSpec onto a white h x w canvas with black strokes."""
    if h <= 0 or w <= 0:
        raise ValueError("canvas dimensions must be positive")
    canvas = np.ones((h, w), dtype=np.float64)
    offsets = _stamp_offsets(spec.stroke_width)
    for prim in spec.primitives:
        pts = _sample_curve(prim, h, w)
        _paint(canvas, pts, offsets, 0.0)
    return canvas


def _stamp_offsets(width: float) -> np.ndarray:
    rad = width / 2.0
    n = int(math.ceil(rad))
    dy, dx = np.mgrid[-n:n + 1, -n:n + 1]
    keep = dy * dy + dx * dx <= rad * rad
    return np.stack([dy[keep], dx[keep]], axis=1)


def _sample_curve(prim, h: int, w: int) -> np.ndarray:
    """Sample pixel-space points along a primitive, step <= 0.4 px."""
    sx, sy = w - 1, h - 1

    def seg(p0, p1, out):
        x0, y0 = p0[0] * sx, p0[1] * sy
        x1, y1 = p1[0] * sx, p1[1] * sy
        n = max(2, int(math.hypot(x1 - x0, y1 - y0) / 0.4) + 1)
        t = np.linspace(0.0, 1.0, n)
        out.append(np.stack([y0 + (y1 - y0) * t, x0 + (x1 - x0) * t], axis=1))

    pts: list[np.ndarray] = []
    if isinstance(prim, (Circle, Arc)):
        if isinstance(prim, Circle):
            a0, a1 = 0.0, 2.0 * math.pi
        else:
            a0, a1 = math.radians(prim.start_deg), math.radians(prim.end_deg)
        arc_px = abs(a1 - a0) * prim.r * max(sx, sy)
        n = max(8, int(arc_px / 0.4) + 1)
        ang = np.linspace(a0, a1, n)
        xs = (prim.cx + prim.r * np.cos(ang)) * sx
        ys = (prim.cy + prim.r * np.sin(ang)) * sy
        pts.append(np.stack([ys, xs], axis=1))
    elif isinstance(prim, Rect):
        corners = [(prim.x0, prim.y0), (prim.x1, prim.y0), (prim.x1, prim.y1), (prim.x0, prim.y1)]
        for i in range(4):
            seg(corners[i], corners[(i + 1) % 4], pts)
    elif isinstance(prim, Polyline):
        p = list(prim.points)
        if prim.closed:
            p.append(p[0])
        for i in range(len(p) - 1):
            seg(p[i], p[i + 1], pts)
    else:
        raise TypeError(f"unknown primitive {type(prim).__name__}")
    return np.concatenate(pts, axis=0) if pts else np.empty((0, 2))


def _paint(canvas: np.ndarray, pts: np.ndarray, offsets: np.ndarray, value: float,
           blend: str = "set") -> None:
    if len(pts) == 0:
        return
    h, w = canvas.shape
    iy = np.rint(pts[:, 0]).astype(np.int64)
    ix = np.rint(pts[:, 1]).astype(np.int64)
    ys = (iy[:, None] + offsets[None, :, 0]).ravel()
    xs = (ix[:, None] + offsets[None, :, 1]).ravel()
    keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    ys, xs = ys[keep], xs[keep]
    if blend == "min":
        np.minimum.at(canvas, (ys, xs), value)
    else:
        canvas[ys, xs] = value


# --- Gaussian blur and Canny -------------------------------------------------


def gaussian_blur(r, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge-replicated borders. sigma=0 is a copy."""
    src = as_raster(r)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return src.copy()
    rad = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-rad, rad + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    return _correlate1d(_correlate1d(src, k, axis=0), k, axis=1)


def _correlate1d(a: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    rad = len(k) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (rad, rad)
    ap = np.pad(a, pad, mode="edge")
    out = np.zeros_like(a)
    for i, kv in enumerate(k):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + a.shape[axis])
        out += kv * ap[tuple(sl)]
    return out


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


def _correlate3x3(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    ap = np.pad(a, 1, mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(ap, (3, 3))
    return np.einsum("hwij,ij->hw", win, k)


def canny_edges(r, low: float, high: float) -> np.ndarray:
    """Binary edge map: Sobel gradients, non-maximum suppression, hysteresis.

    ``low`` and ``high`` threshold the gradient magnitude after it is
    normalized to [0, 1]. Suppression keeps at most one pixel across a step:
    on exact magnitude ties the pixel on the darker side of the edge wins.
    Hysteresis connectivity is 8-neighbor.
    """
    src = as_raster(r)
    if not 0.0 <= low < high:
        raise ValueError(f"need 0 <= low < high, got low={low} high={high}")
    gx = _correlate3x3(src, _SOBEL_X)
    gy = _correlate3x3(src, _SOBEL_Y)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak == 0.0:
        return np.zeros_like(src, dtype=np.uint8)
    mag /= peak

    theta = np.arctan2(gy, gx)
    dx = np.rint(np.cos(theta)).astype(np.int64)
    dy = np.rint(np.sin(theta)).astype(np.int64)
    h, w = src.shape
    padded = np.pad(mag, 1)
    yy, xx = np.mgrid[0:h, 0:w]
    fwd = padded[yy + dy + 1, xx + dx + 1]
    back = padded[yy - dy + 1, xx - dx + 1]
    nms = np.where((mag > back) & (mag >= fwd), mag, 0.0)

    strong = nms >= high
    weak = (nms >= low) & ~strong
    return _hysteresis(strong, weak)


def _hysteresis(strong: np.ndarray, weak: np.ndarray) -> np.ndarray:
    from collections import deque

    h, w = strong.shape
    out = strong.copy()
    dq = deque(zip(*np.nonzero(strong)))
    while dq:
        y, x = dq.popleft()
        for ddy in (-1, 0, 1):
            for ddx in (-1, 0, 1):
                ny, nx = y + ddy, x + ddx
                if 0 <= ny < h and 0 <= nx < w and weak[ny, nx] and not out[ny, nx]:
                    out[ny, nx] = True
                    dq.append((ny, nx))
    return out.astype(np.uint8)


def generate_sketch_from_render(img, canny_low: float, canny_high: float,
                                blur_sigma: float, w_edge: float) -> np.ndarray:
    """Weighted mix of Canny edges and a Gaussian-blurred render.

    The edge map and the inverted blurred image are combined in ink=1
    polarity with weight ``w_edge`` on the edges, clamped, and mapped back
    to the white-background convention.
    """
    src = as_raster(img)
    if not 0.0 <= w_edge <= 1.0:
        raise ValueError("w_edge must lie in [0, 1]")
    edges = canny_edges(src, canny_low, canny_high).astype(np.float64)
    soft = gaussian_blur(src, blur_sigma)
    ink = np.clip(w_edge * edges + (1.0 - w_edge) * (1.0 - soft), 0.0, 1.0)
    return 1.0 - ink


# --- defect injection --------------------------------------------------------

_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]

_MESH_VALUE = 0.6
_DUPLICATE_VALUE = 0.15
_EXTRA_VALUE = 0.1
_INK_CUTOFF = 0.5


def inject_defects(clean, profile: DefectProfile) -> np.ndarray:
    """Apply the profile's defects to white-background line art.

    Gaps erase short runs of ink, duplicate strokes redraw jittered copies of
    ink segments, mesh lines cross the drawing interior at a faint gray, and
    extra lines add short dark segments anywhere. Deterministic per
    (input, profile).
    """
    out = as_raster(clean).copy()
    if (profile.gap_rate == 0 and profile.duplicate_stroke_count == 0
            and profile.mesh_line_count == 0 and profile.extra_line_count == 0
            and profile.blur_sigma == 0):
        return out

    rng = np.random.default_rng(profile.seed & _SEED_MASK)
    h, w = out.shape

    ink = np.argwhere(out < _INK_CUTOFF)
    n_ink = len(ink)

    if profile.gap_rate > 0 and n_ink > 0:
        n_gaps = max(1, int(round(profile.gap_rate * n_ink / 100.0)))
        for _ in range(n_gaps):
            live = np.argwhere(out < _INK_CUTOFF)
            if len(live) == 0:
                break
            start = tuple(live[rng.integers(len(live))])
            length = int(rng.integers(2, 7))
            for y, x in _walk_ink(out, start, length, rng):
                out[y, x] = 1.0

    if profile.duplicate_stroke_count > 0 and n_ink > 0:
        for _ in range(profile.duplicate_stroke_count):
            start = tuple(ink[rng.integers(n_ink)])
            length = int(rng.integers(8, 25))
            path = _walk_ink(out, start, length, rng)
            jit = max(1.0, profile.duplicate_jitter)
            oy = int(rng.integers(-int(jit), int(jit) + 1))
            ox = int(rng.integers(-int(jit), int(jit) + 1))
            if oy == 0 and ox == 0:
                ox = 1
            for y, x in path:
                ny, nx = y + oy, x + ox
                if 0 <= ny < h and 0 <= nx < w:
                    out[ny, nx] = min(out[ny, nx], _DUPLICATE_VALUE)

    if profile.mesh_line_count > 0:
        if n_ink > 0:
            y0, x0 = ink.min(axis=0)
            y1, x1 = ink.max(axis=0)
        else:
            y0, x0, y1, x1 = 0, 0, h - 1, w - 1
        for _ in range(profile.mesh_line_count):
            if rng.random() < 0.5:  # spanning left-right
                pa = (float(rng.uniform(y0, y1 + 1)), float(x0))
                pb = (float(rng.uniform(y0, y1 + 1)), float(x1))
            else:
                pa = (float(y0), float(rng.uniform(x0, x1 + 1)))
                pb = (float(y1), float(rng.uniform(x0, x1 + 1)))
            _paint_segment(out, pa, pb, _MESH_VALUE)

    if profile.extra_line_count > 0:
        max_len = max(3.0, 0.25 * min(h, w))
        for _ in range(profile.extra_line_count):
            y = float(rng.uniform(0, h - 1))
            x = float(rng.uniform(0, w - 1))
            ang = float(rng.uniform(0, 2 * math.pi))
            length = float(rng.uniform(0.4 * max_len, max_len))
            pb = (y + length * math.sin(ang), x + length * math.cos(ang))
            _paint_segment(out, (y, x), pb, _EXTRA_VALUE)

    if profile.blur_sigma > 0:
        out = gaussian_blur(out, profile.blur_sigma)
    return np.clip(out, 0.0, 1.0)


def _walk_ink(out: np.ndarray, start: tuple, length: int, rng) -> list[tuple[int, int]]:
    """Follow connected ink from ``start`` for up to ``length`` pixels."""
    h, w = out.shape
    path = [start]
    visited = {start}
    direction = None
    y, x = start
    while len(path) < length:
        cands = []
        for ddy, ddx in _NEIGHBORS:
            ny, nx = y + ddy, x + ddx
            if 0 <= ny < h and 0 <= nx < w and out[ny, nx] < _INK_CUTOFF and (ny, nx) not in visited:
                cands.append((ddy, ddx))
        if not cands:
            break
        if direction is None:
            ddy, ddx = cands[rng.integers(len(cands))]
        else:
            ddy, ddx = max(cands, key=lambda d: d[0] * direction[0] + d[1] * direction[1])
        direction = (ddy, ddx)
        y, x = y + ddy, x + ddx
        path.append((y, x))
        visited.add((y, x))
    return path


def _paint_segment(canvas: np.ndarray, pa: tuple, pb: tuple, value: float) -> None:
    n = max(2, int(math.hypot(pb[0] - pa[0], pb[1] - pa[1]) / 0.4) + 1)
    t = np.linspace(0.0, 1.0, n)
    pts = np.stack([pa[0] + (pb[0] - pa[0]) * t, pa[1] + (pb[1] - pa[1]) * t], axis=1)
    _paint(canvas, pts, np.array([[0, 0]]), value, blend="min")


# --- shape families and dataset assembly -------------------------------------


def _family_washer(rng) -> ShapeSpec:
    cx, cy = rng.uniform(0.42, 0.58, size=2)
    r_out = rng.uniform(0.24, 0.36)
    r_in = r_out * rng.uniform(0.35, 0.55)
    prims = [Circle(cx, cy, r_out), Circle(cx, cy, r_in)]
    return ShapeSpec(tuple(prims))


def _family_plate(rng) -> ShapeSpec:
    x0, y0 = rng.uniform(0.1, 0.2, size=2)
    x1, y1 = rng.uniform(0.8, 0.9, size=2)
    prims = [Rect(x0, y0, x1, y1)]
    for hx in np.linspace(0.3, 0.7, int(rng.integers(2, 4))):
        prims.append(Circle(float(hx), float((y0 + y1) / 2), float(rng.uniform(0.04, 0.08))))
    return ShapeSpec(tuple(prims))


def _family_bracket(rng) -> ShapeSpec:
    t = rng.uniform(0.22, 0.34)
    pts = ((0.15, 0.15), (0.15 + t, 0.15), (0.15 + t, 0.85 - t),
           (0.85, 0.85 - t), (0.85, 0.85), (0.15, 0.85))
    prims = [Polyline(pts, closed=True),
             Circle(0.15 + t / 2, 0.3, 0.05),
             Circle(0.7, 0.85 - t / 2, 0.05)]
    return ShapeSpec(tuple(prims))


def _family_gear(rng) -> ShapeSpec:
    cx, cy = 0.5, 0.5
    r = rng.uniform(0.26, 0.34)
    prims = [Circle(cx, cy, r), Circle(cx, cy, r * 0.3)]
    n_teeth = int(rng.integers(6, 10))
    for i in range(n_teeth):
        a = 2 * math.pi * i / n_teeth
        x0, y0 = cx + r * math.cos(a), cy + r * math.sin(a)
        x1 = cx + (r + 0.08) * math.cos(a)
        y1 = cy + (r + 0.08) * math.sin(a)
        x1, y1 = min(max(x1, 0.0), 1.0), min(max(y1, 0.0), 1.0)
        prims.append(Polyline(((x0, y0), (x1, y1))))
    return ShapeSpec(tuple(prims))


def _family_panel(rng) -> ShapeSpec:
    x0, y0, x1, y1 = 0.15, 0.15, 0.85, 0.85
    prims = [Rect(x0, y0, x1, y1)]
    for gx in np.linspace(x0, x1, int(rng.integers(3, 6)))[1:-1]:
        prims.append(Polyline(((float(gx), y0), (float(gx), y1))))
    return ShapeSpec(tuple(prims))


def _family_strut(rng) -> ShapeSpec:
    t = rng.uniform(0.1, 0.16)
    pts = ((0.5 - t, 0.1), (0.5 + t, 0.1), (0.5 + t, 0.5 - t), (0.9, 0.5 - t),
           (0.9, 0.5 + t), (0.5 + t, 0.5 + t), (0.5 + t, 0.9), (0.5 - t, 0.9),
           (0.5 - t, 0.5 + t), (0.1, 0.5 + t), (0.1, 0.5 - t), (0.5 - t, 0.5 - t))
    return ShapeSpec((Polyline(pts, closed=True),))


_FAMILIES = {
    "washer": _family_washer,
    "plate": _family_plate,
    "bracket": _family_bracket,
    "gear": _family_gear,
    "panel": _family_panel,
    "strut": _family_strut,
}


def shape_families() -> list[str]:
    """Names of the built-in parametric shape families."""
    return list(_FAMILIES)


def make_dataset(n: int, h: int, w: int, profile: DefectProfile, seed: int) -> list[TrainingPair]:
    """Generate n (rough, clean) pairs by cycling the shape families.

    Pair i draws its shape from a sub-stream of ``seed`` and its defects from
    ``profile.seed ^ i``, so datasets are reproducible and pairs independent.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    names = list(_FAMILIES)
    pairs = []
    for i in range(n):
        family = names[i % len(names)]
        shape_rng = np.random.default_rng(np.random.SeedSequence(seed & _SEED_MASK, spawn_key=(i,)))
        spec = _FAMILIES[family](shape_rng)
        clean = render_clean(spec, h, w)
        rough = inject_defects(clean, replace(profile, seed=(profile.seed ^ i) & _SEED_MASK))
        pairs.append(TrainingPair(rough=rough, clean=clean, category=family))
    return pairs


# --- dataset directory layout -------------------------------------------------


def write_dataset(pairs: list[TrainingPair], root) -> None:
    """Write pairs as <root>/rough/<id>.png, <root>/clean/<id>.png, labels.csv."""
    root = Path(root)
    (root / "rough").mkdir(parents=True, exist_ok=True)
    (root / "clean").mkdir(parents=True, exist_ok=True)
    with (root / "labels.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "category"])
        for i, pair in enumerate(pairs):
            pid = f"{i:04d}"
            save_raster(pair.rough, root / "rough" / f"{pid}.png")
            save_raster(pair.clean, root / "clean" / f"{pid}.png")
            writer.writerow([pid, pair.category or ""])


def read_dataset(root) -> tuple[list[str], list[TrainingPair]]:
    """Load a dataset directory; returns (ids, pairs) in labels.csv order."""
    root = Path(root)
    labels_path = root / "labels.csv"
    if not labels_path.is_file():
        raise ValueError(f"no labels.csv in {root}")
    ids, pairs = [], []
    with labels_path.open(newline="") as f:
        for row in csv.DictReader(f):
            pid = row["id"]
            rough = load_raster(root / "rough" / f"{pid}.png")
            clean = load_raster(root / "clean" / f"{pid}.png")
            ids.append(pid)
            pairs.append(TrainingPair(rough=rough, clean=clean, category=row.get("category") or None))
    if not ids:
        raise ValueError(f"dataset at {root} is empty")
    return ids, pairs
