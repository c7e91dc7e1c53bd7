"""Grayscale sketch rasters: codecs, resampling, and polarity helpers.

A raster is a 2-D float64 array with values in [0, 1], row-major. Files use
the drawing convention "white background, dark ink" (0 = black ink,
1 = white paper). Loss and network code work in the opposite ink=1 polarity;
:func:`invert` converts between the two.

PNG files are read and written through Pillow; binary PGM (P5) is handled
natively as a dependency-free fallback.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "as_raster",
    "load_raster",
    "save_raster",
    "decode_image_bytes",
    "encode_png_bytes",
    "resize_bilinear",
    "to_ink_mask",
    "invert",
]


def as_raster(a) -> np.ndarray:
    """Validate and return ``a`` as a float64 raster with values in [0, 1].

    Raises:
        ValueError: If the array is not 2-D, is empty, contains non-finite
            values, or has values outside [0, 1].
    """
    r = np.asarray(a, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 1:
        raise ValueError(f"raster must be a non-empty 2-D array, got shape {r.shape}")
    if not np.isfinite(r).all():
        raise ValueError("raster contains non-finite values")
    lo, hi = float(r.min()), float(r.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"raster values must lie in [0, 1], got range [{lo}, {hi}]")
    return r


def load_raster(path) -> np.ndarray:
    """Load an image file as a grayscale raster in [0, 1].

    Multi-channel images are converted to luminance; 8-bit values are
    divided by 255.

    Raises:
        OSError: If the file cannot be read.
        ValueError: If the data is not a supported image format.
    """
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return _parse_pgm(path.read_bytes())
    try:
        with Image.open(path) as img:
            data = np.asarray(img.convert("L"), dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise ValueError(f"unsupported or corrupt image file: {path}") from exc
    return data / 255.0


def save_raster(r, path) -> None:
    """Write a raster as an 8-bit grayscale image (.png or .pgm).

    Values are quantized with round-to-nearest, so a save/load round trip
    is accurate to 1/510 per pixel.

    Raises:
        OSError: If the file cannot be written (e.g. missing parent dir).
        ValueError: If the path suffix is not a supported format.
    """
    r = as_raster(r)
    path = Path(path)
    q = np.round(r * 255.0).astype(np.uint8)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        path.open("wb").close()  # surface I/O errors before encoding
        path.write_bytes(_encode_pgm(q))
    elif suffix == ".png":
        Image.fromarray(q, mode="L").save(path, format="PNG")
    else:
        raise ValueError(f"unsupported raster format {suffix!r} (use .png or .pgm)")


def decode_image_bytes(data: bytes) -> np.ndarray:
    """Decode an in-memory PNG/PGM payload to a raster in [0, 1]."""
    if data[:2] == b"P5":
        return _parse_pgm(data)
    try:
        with Image.open(io.BytesIO(data)) as img:
            arr = np.asarray(img.convert("L"), dtype=np.float64)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ValueError("payload is not a decodable grayscale image") from exc
    return arr / 255.0


def encode_png_bytes(r) -> bytes:
    """Encode a raster as 8-bit grayscale PNG bytes (deterministic)."""
    q = np.round(as_raster(r) * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(q, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def resize_bilinear(r, new_h: int, new_w: int) -> np.ndarray:
    """Resample a raster to ``new_h`` x ``new_w`` with bilinear interpolation.

    Pixel centers are aligned on the half-pixel grid and borders are
    clamp-replicated. Resizing to the same shape returns an exact copy.
    """
    src = as_raster(r)
    if new_h <= 0 or new_w <= 0:
        raise ValueError(f"target size must be positive, got {new_h}x{new_w}")
    h, w = src.shape
    if (new_h, new_w) == (h, w):
        return src.copy()

    ys = (np.arange(new_h) + 0.5) * (h / new_h) - 0.5
    xs = (np.arange(new_w) + 0.5) * (w / new_w) - 0.5
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    y0c = np.clip(y0.astype(np.int64), 0, h - 1)
    y1c = np.clip(y0.astype(np.int64) + 1, 0, h - 1)
    x0c = np.clip(x0.astype(np.int64), 0, w - 1)
    x1c = np.clip(x0.astype(np.int64) + 1, 0, w - 1)

    out = (
        src[np.ix_(y0c, x0c)] * (1.0 - fy) * (1.0 - fx)
        + src[np.ix_(y0c, x1c)] * (1.0 - fy) * fx
        + src[np.ix_(y1c, x0c)] * fy * (1.0 - fx)
        + src[np.ix_(y1c, x1c)] * fy * fx
    )
    return np.clip(out, 0.0, 1.0)


def to_ink_mask(r, threshold: float) -> np.ndarray:
    """Binarize a raster into an ink mask: 1 where intensity < threshold.

    Ink is dark, so a pixel is ink (positive) iff its value is strictly
    below ``threshold``; ties go to background.
    """
    src = as_raster(r)
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return (src < threshold).astype(np.uint8)


def invert(r) -> np.ndarray:
    """Map each pixel v to 1 - v, flipping ink/background polarity."""
    return 1.0 - as_raster(r)


# --- PGM (P5) codec ---------------------------------------------------------


def _parse_pgm(data: bytes) -> np.ndarray:
    if data[:2] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    fields: list[int] = []
    i = 2
    while len(fields) < 3:
        if i >= len(data):
            raise ValueError("truncated PGM header")
        c = data[i]
        if c in b" \t\r\n":
            i += 1
        elif c == ord("#"):
            while i < len(data) and data[i] not in b"\r\n":
                i += 1
        elif chr(c).isdigit():
            j = i
            while j < len(data) and chr(data[j]).isdigit():
                j += 1
            fields.append(int(data[i:j]))
            i = j
        else:
            raise ValueError(f"unexpected byte {data[i:i + 1]!r} in PGM header")
    i += 1  # single whitespace byte separating header from pixel data
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValueError(f"invalid PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise ValueError(f"only 8-bit PGM supported, got maxval {maxval}")
    n = width * height
    px = data[i:i + n]
    if len(px) < n:
        raise ValueError("truncated PGM pixel data")
    arr = np.frombuffer(px, dtype=np.uint8).reshape(height, width)
    return arr.astype(np.float64) / float(maxval)


def _encode_pgm(q: np.ndarray) -> bytes:
    h, w = q.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()
