"""Image similarity metrics and per-pair/aggregate reports.

All metrics assume rasters with unit dynamic range. PSNR uses +inf as the
sentinel for identical images (mse = 0); aggregation excludes those entries
from the PSNR mean and counts them. SSIM is the windowed form with an 11x11
Gaussian window (sigma 1.5) and stabilizers C1 = 0.01^2, C2 = 0.03^2,
evaluated at valid window positions only.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .losses import LossConfig, bdcn_loss

__all__ = [
    "MetricReport",
    "mse",
    "l1",
    "psnr",
    "ssim",
    "bdcn_metric",
    "aggregate",
    "write_reports_csv",
    "write_summary_json",
]

PSNR_INF = math.inf

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2


@dataclass
class MetricReport:
    mse: float
    l1: float
    bdcn_loss: float
    psnr: float
    ssim: float
    n_pairs: int = 1
    psnr_inf_count: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["psnr"]):
            d["psnr"] = "inf"
        return d


def _check_shapes(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    """Mean squared per-pixel difference."""
    a, b = _check_shapes(a, b)
    d = a - b
    return float(np.mean(d * d))


def l1(a, b) -> float:
    """Mean absolute per-pixel difference."""
    a, b = _check_shapes(a, b)
    return float(np.mean(np.abs(a - b)))


def psnr(a, b) -> float:
    """10*log10(1/mse) in dB for unit dynamic range; +inf when mse = 0."""
    m = mse(a, b)
    if m == 0.0:
        return PSNR_INF
    return -10.0 * math.log10(m)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    win = np.outer(g, g)
    return win / win.sum()


def _windowed_mean(a: np.ndarray, win: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(a, win.shape)
    return np.einsum("hwij,ij->hw", view, win, optimize=True)


def ssim(a, b) -> float:
    """Mean local structural similarity; symmetric, 1.0 for identical inputs.

    Raises:
        ValueError: If either dimension is smaller than the 11x11 window.
    """
    a, b = _check_shapes(a, b)
    if min(a.shape) < _SSIM_WINDOW:
        raise ValueError(f"rasters must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW}, got {a.shape}")
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu_a = _windowed_mean(a, win)
    mu_b = _windowed_mean(b, win)
    e_aa = _windowed_mean(a * a, win)
    e_bb = _windowed_mean(b * b, win)
    e_ab = _windowed_mean(a * b, win)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + _SSIM_C1) * (2.0 * cov + _SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + _SSIM_C1) * (var_a + var_b + _SSIM_C2)
    return float(np.mean(num / den))


def bdcn_metric(prediction, ground_truth, cfg: LossConfig) -> float:
    """The balanced cross-entropy reused as a similarity metric (lower is better).

    Delegates to the loss implementation; arguments follow its ink=1
    polarity convention.
    """
    return bdcn_loss(prediction, ground_truth, cfg)[0]


def aggregate(reports: list[MetricReport]) -> MetricReport:
    """Arithmetic mean per metric; infinite PSNR entries are excluded from
    the PSNR mean and counted in psnr_inf_count."""
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    finite_psnr = [r.psnr for r in reports if not math.isinf(r.psnr)]
    n_inf = sum(1 for r in reports if math.isinf(r.psnr)) + sum(r.psnr_inf_count for r in reports)
    return MetricReport(
        mse=float(np.mean([r.mse for r in reports])),
        l1=float(np.mean([r.l1 for r in reports])),
        bdcn_loss=float(np.mean([r.bdcn_loss for r in reports])),
        psnr=float(np.mean(finite_psnr)) if finite_psnr else PSNR_INF,
        ssim=float(np.mean([r.ssim for r in reports])),
        n_pairs=sum(r.n_pairs for r in reports),
        psnr_inf_count=n_inf,
    )


def write_reports_csv(path, ids: list[str], reports: list[MetricReport]) -> None:
    """One row per pair: id plus the five metrics."""
    if len(ids) != len(reports):
        raise ValueError("ids and reports must align")
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "mse", "l1", "bdcn_loss", "psnr", "ssim"])
        for pid, r in zip(ids, reports):
            writer.writerow([pid, repr(r.mse), repr(r.l1), repr(r.bdcn_loss),
                             "inf" if math.isinf(r.psnr) else repr(r.psnr), repr(r.ssim)])


def write_summary_json(path, report: MetricReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
