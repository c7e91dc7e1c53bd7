"""Training losses for the sketch cleaner, with analytic gradients.

Two components, combined with weights (lambda1, lambda2):

- a class-balanced binary cross-entropy where each class is weighted by the
  opposite class's pixel share (ink pixels are rare, so their log term gets
  the large background share and vice versa), with lambda_bal controlling
  the positive-over-negative emphasis;
- a density-weighted cross-entropy on ink pixels, where each pixel's weight
  is the largest single-bin mass of its own Gaussian intensity kernel,
  i.e. how concentrated that pixel's intensity is in one histogram bin.

Conventions: predictions and ground truth are in ink=1 polarity (ink bright).
A pixel is positive (ink) iff its original white-background intensity is
strictly below pos_threshold, which here reads as value > 1 - pos_threshold.
All gradients are with respect to the predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

__all__ = [
    "LossConfig",
    "class_balance_weights",
    "bdcn_loss",
    "kde_density",
    "bin_probabilities",
    "pmax_weights",
    "pmax_bins",
    "kde_loss",
    "combined_loss",
]


@dataclass(frozen=True)
class LossConfig:
    lambda_bal: float = 1.1
    pos_threshold: float = 0.5
    num_bins: int = 10
    kde_sigma: float = 0.05
    lambda1: float = 0.8
    lambda2: float = 0.2
    epsilon: float = 1e-7

    def __post_init__(self):
        if self.lambda_bal <= 0:
            raise ValueError("lambda_bal must be positive")
        if not 0.0 <= self.pos_threshold <= 1.0:
            raise ValueError("pos_threshold must lie in [0, 1]")
        if self.num_bins < 2:
            raise ValueError("num_bins must be >= 2")
        if self.kde_sigma <= 0:
            raise ValueError("kde_sigma must be positive")
        if self.lambda1 < 0 or self.lambda2 < 0 or self.lambda1 + self.lambda2 <= 0:
            raise ValueError("lambda1, lambda2 must be non-negative with a positive sum")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 0.5)")

    def to_dict(self) -> dict:
        return {
            "lambda_bal": self.lambda_bal,
            "pos_threshold": self.pos_threshold,
            "num_bins": self.num_bins,
            "kde_sigma": self.kde_sigma,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        return cls(**d)


def _positive_mask(y: np.ndarray, cfg: LossConfig) -> np.ndarray:
    # ink polarity: original intensity < threshold  <=>  value > 1 - threshold
    return y > (1.0 - cfg.pos_threshold)


def _check_pair(yhat: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    yhat = np.asarray(yhat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if yhat.shape != y.shape:
        raise ValueError(f"shape mismatch: prediction {yhat.shape} vs ground truth {y.shape}")
    return yhat, y


def class_balance_weights(y, cfg: LossConfig) -> tuple[float, float]:
    """(alpha, beta) = (lambda_bal * |pos| / N, |neg| / N).

    alpha weights the background (negative) log terms, beta the ink
    (positive) ones; an all-background image yields alpha = 0, beta = 1.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    n_pos = int(_positive_mask(y, cfg).sum())
    alpha = cfg.lambda_bal * n_pos / n
    beta = (n - n_pos) / n
    return float(alpha), float(beta)


def bdcn_loss(yhat, y, cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Class-balanced cross-entropy over all pixels.

    loss = -alpha * sum_neg log(1 - p) - beta * sum_pos log(p), with p
    clamped to [epsilon, 1 - epsilon] before the logs. The gradient per
    pixel is alpha / (1 - p) on negatives and -beta / p on positives.
    """
    yhat, y = _check_pair(yhat, y)
    pos = _positive_mask(y, cfg)
    alpha, beta = class_balance_weights(y, cfg)
    p = np.clip(yhat, cfg.epsilon, 1.0 - cfg.epsilon)
    loss = -alpha * np.log1p(-p[~pos]).sum() - beta * np.log(p[pos]).sum()
    grad = np.where(pos, -beta / p, alpha / (1.0 - p))
    return float(loss), grad


def kde_density(y, sigma: float):
    """Gaussian kernel density of the image's intensity values.

    Returns a vectorized evaluator f(g) = mean_x N(g - I(x); sigma) over all
    pixels x, usable at arbitrary g. Diagnostic companion to the closed-form
    bin integrals below.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    vals = np.asarray(y, dtype=np.float64).ravel()
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def density(g):
        g = np.asarray(g, dtype=np.float64)
        z = (g[..., None] - vals) / sigma
        return norm * np.exp(-0.5 * z * z).mean(axis=-1)

    return density


def _bin_masses(vals: np.ndarray, cfg: LossConfig) -> np.ndarray:
    """Per-pixel Gaussian mass in each of the K equal bins over [0, 1].

    Closed form via the Gaussian CDF: mass_k = Phi((e_{k+1}-I)/s) -
    Phi((e_k-I)/s). Shape (n_pixels, K).
    """
    edges = np.linspace(0.0, 1.0, cfg.num_bins + 1)
    z = (edges[None, :] - vals[:, None]) / (cfg.kde_sigma * math.sqrt(2.0))
    # 0.5 * (erf(z2) - erf(z1)) keeps erf's odd symmetry, so a pixel sitting
    # exactly on a bin edge splits its mass bit-identically between the two
    # adjacent bins
    return 0.5 * np.diff(erf(z), axis=1)


def bin_probabilities(y, cfg: LossConfig) -> np.ndarray:
    """Histogram of the image intensity density over K bins spanning [0, 1].

    Per-pixel bin masses are averaged over the image and renormalized so the
    K entries sum to 1 (kernel mass leaking outside [0, 1] is truncated).
    """
    vals = np.asarray(y, dtype=np.float64).ravel()
    hist = _bin_masses(vals, cfg).mean(axis=0)
    return hist / hist.sum()


def pmax_weights(y, cfg: LossConfig) -> np.ndarray:
    """Per-pixel weight: the largest single-bin share of that pixel's kernel.

    Each pixel's kernel mass is renormalized over [0, 1]; the weight is the
    maximum bin share, in [0, 1]. A pixel well inside a bin scores near 1; a
    pixel on a bin boundary splits evenly and scores near 0.5.
    """
    y = np.asarray(y, dtype=np.float64)
    masses = _bin_masses(y.ravel(), cfg)
    masses /= masses.sum(axis=1, keepdims=True)
    return masses.max(axis=1).reshape(y.shape)


def pmax_bins(y, cfg: LossConfig) -> np.ndarray:
    """Index of each pixel's maximum-share bin; ties resolve to the lower bin."""
    y = np.asarray(y, dtype=np.float64)
    masses = _bin_masses(y.ravel(), cfg)
    return masses.argmax(axis=1).reshape(y.shape)


def kde_loss(yhat, y, weights, cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Density-weighted cross-entropy on ink pixels.

    loss = -sum_g w_g * y_g * log(p_g) with y binarized to {0, 1} at the ink
    threshold; background pixels contribute zero loss and zero gradient.
    """
    yhat, y = _check_pair(yhat, y)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != y.shape:
        raise ValueError(f"shape mismatch: weights {weights.shape} vs ground truth {y.shape}")
    ybin = _positive_mask(y, cfg).astype(np.float64)
    p = np.clip(yhat, cfg.epsilon, 1.0 - cfg.epsilon)
    coef = weights * ybin
    loss = -(coef * np.log(p)).sum()
    grad = -coef / p
    return float(loss), grad


def combined_loss(yhat, y, cfg: LossConfig, pmax: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """lambda1 * balanced cross-entropy + lambda2 * density-weighted loss.

    ``pmax`` may carry precomputed :func:`pmax_weights` for the ground truth
    (they depend only on y and cfg, so training loops cache them per pair).
    """
    yhat, y = _check_pair(yhat, y)
    loss1, grad1 = bdcn_loss(yhat, y, cfg)
    if pmax is None:
        pmax = pmax_weights(y, cfg)
    loss2, grad2 = kde_loss(yhat, y, pmax, cfg)
    loss = cfg.lambda1 * loss1 + cfg.lambda2 * loss2
    grad = cfg.lambda1 * grad1 + cfg.lambda2 * grad2
    return float(loss), grad
