"""Dataset splitting, Adam mini-batch training, checkpointing, evaluation.

Training runs are a pure function of (dataset seed, init seed, shuffle seed):
per-epoch shuffles come from a seed sequence keyed by the absolute epoch
index, parameters stay on the float32 grid after every update, and gradient
accumulation uses a fixed reduction order. The optimizer state needed for
exact resume (step count plus both Adam moments) is stored in a sidecar
"<checkpoint>.state" file next to the model checkpoint.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .losses import LossConfig, combined_loss, pmax_weights
from .metrics import MetricReport, aggregate, bdcn_metric, l1 as metric_l1, mse as metric_mse, psnr, ssim
from .model import (
    NetConfig,
    Network,
    backward_from_cache,
    build_network,
    forward_with_cache,
    load_checkpoint,
    save_checkpoint,
    _f32grid,
)
from .raster import invert, resize_bilinear
from .synth import TrainingPair

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "TrainingError",
    "AdamState",
    "split_dataset",
    "adam_step",
    "train",
    "evaluate",
    "evaluate_pairs",
    "load_config",
    "save_config",
]

_SEED_MASK = (1 << 63) - 1
_STATE_MAGIC = b"SCNS"


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 8
    learning_rate: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    split_ratio: float = 0.8
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    net: NetConfig = field(default_factory=NetConfig)

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must lie strictly between 0 and 1")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
            "split_ratio": self.split_ratio,
            "seed": self.seed,
            "loss": self.loss.to_dict(),
            "net": {
                "input_size": self.net.input_size,
                "base_width": self.net.base_width,
                "output_mode": self.net.output_mode,
                "skip_wiring": [list(pair) for pair in self.net.skip_wiring],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        loss = LossConfig.from_dict(d.pop("loss", {}))
        net_d = dict(d.pop("net", {}))
        if "skip_wiring" in net_d:
            net_d["skip_wiring"] = tuple(tuple(pair) for pair in net_d["skip_wiring"])
        net = NetConfig(**net_d)
        return cls(loss=loss, net=net, **d)


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    seconds: float
    metrics: dict | None = None

    def to_dict(self) -> dict:
        d = {"epoch": self.epoch, "mean_loss": self.mean_loss, "seconds": self.seconds}
        if self.metrics is not None:
            d["metrics"] = self.metrics
        return d


def load_config(path) -> TrainConfig:
    return TrainConfig.from_dict(json.loads(Path(path).read_text()))


def save_config(cfg: TrainConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


# --- dataset split -------------------------------------------------------------


def split_dataset(pairs: list, ratio: float, seed: int,
                  paper_compat: bool = False) -> tuple[list, list]:
    """Deterministic shuffled split into (train, test) covering the input.

    Train size is round(ratio * N). With ``paper_compat`` and exactly 801
    pairs the historical 632/169 counts are reproduced instead of the exact
    80% rounding.
    """
    n = len(pairs)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    if paper_compat:
        if n != 801:
            raise ValueError("paper_compat split is defined only for 801 pairs")
        n_train = 632
    else:
        n_train = int(round(ratio * n))
        n_train = min(max(n_train, 0), n)
    perm = np.random.default_rng(seed & _SEED_MASK).permutation(n)
    train = [pairs[i] for i in perm[:n_train]]
    test = [pairs[i] for i in perm[n_train:]]
    return train, test


# --- Adam ------------------------------------------------------------------------


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], t=0)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              t: int, cfg: TrainConfig) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update (in place) with bias correction at step index t >= 1.

    Raises:
        TrainingError: If any gradient is non-finite, reporting the step.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and state must align")
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient at step {t}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        step = cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
        p[...] = _f32grid(p - step)
    state.t = t
    return params, state


# --- training loop ----------------------------------------------------------------


def _prepare_pair(pair: TrainingPair, net_cfg: NetConfig, loss_cfg: LossConfig):
    """(input 1xSxS, ink-polarity target, cached density weights) for one pair."""
    s = net_cfg.input_size
    out_s = s * 2 if net_cfg.output_mode == "double" else s
    if pair.rough.shape != (s, s):
        raise ValueError(f"rough raster is {pair.rough.shape}, expected ({s}, {s})")
    if pair.clean.shape == (out_s, out_s):
        clean = pair.clean
    elif pair.clean.shape == (s, s):
        clean = resize_bilinear(pair.clean, out_s, out_s)
    else:
        raise ValueError(
            f"clean raster is {pair.clean.shape}, expected ({s}, {s}) or ({out_s}, {out_s})")
    x = invert(pair.rough)[None, :, :]
    y = invert(clean)
    return x, y, pmax_weights(y, loss_cfg)


def _write_state(path: Path, epoch_done: int, state: AdamState) -> None:
    blob = bytearray()
    blob += _STATE_MAGIC
    blob += struct.pack("<HIQ I", 1, epoch_done, state.t, len(state.m))
    for m, v in zip(state.m, state.v):
        blob += m.astype("<f8").tobytes()
        blob += v.astype("<f8").tobytes()
    path.write_bytes(bytes(blob))


def _read_state(path: Path, params: list[np.ndarray]) -> tuple[int, AdamState]:
    data = path.read_bytes()
    if data[:4] != _STATE_MAGIC:
        raise ValueError("not a training state file (bad magic)")
    version, epoch_done, t, n = struct.unpack_from("<HIQ I", data, 4)
    if version != 1:
        raise ValueError(f"unsupported training state version {version}")
    if n != len(params):
        raise ValueError("training state does not match the network's parameter count")
    pos = 4 + struct.calcsize("<HIQ I")
    m, v = [], []
    for p in params:
        for dest in (m, v):
            cnt = p.size
            arr = np.frombuffer(data, dtype="<f8", count=cnt, offset=pos).reshape(p.shape)
            pos += cnt * 8
            dest.append(arr.copy())
    return epoch_done, AdamState(m=m, v=v, t=t)


def train(pairs: list[TrainingPair], cfg: TrainConfig, *,
          eval_pairs: list[TrainingPair] | None = None, eval_every: int = 0,
          checkpoint_path=None, checkpoint_every: int = 0,
          history_path=None, resume_from=None) -> tuple[Network, list[EpochRecord]]:
    """Mini-batch Adam training of the cleaner under the combined loss.

    Shuffles per epoch by the config seed, records one history entry per
    epoch, and optionally writes checkpoints (plus resume state) at the
    given epoch cadence and always at the end. ``resume_from`` continues an
    interrupted run bit-exactly from its checkpoint + state files.
    """
    if not pairs:
        raise ValueError("training requires at least one pair")
    prepared = [_prepare_pair(p, cfg.net, cfg.loss) for p in pairs]

    start_epoch = 0
    if resume_from is not None:
        net = load_checkpoint(resume_from)
        if net.config != cfg.net:
            raise ValueError("checkpoint configuration does not match cfg.net")
        start_epoch, state = _read_state(Path(str(resume_from) + ".state"), net.param_arrays())
    else:
        net = build_network(cfg.net, init_seed=cfg.seed)
        state = AdamState.for_params(net.param_arrays())

    history: list[EpochRecord] = []
    hist_file = None
    if history_path is not None:
        mode = "a" if resume_from is not None else "w"
        hist_file = Path(history_path).open(mode)

    params = net.param_arrays()
    n = len(prepared)
    t = state.t
    try:
        for epoch in range(start_epoch, cfg.epochs):
            t0 = time.perf_counter()
            order = np.random.default_rng(
                np.random.SeedSequence(cfg.seed & _SEED_MASK, spawn_key=(epoch,))).permutation(n)
            image_losses = []
            for b0 in range(0, n, cfg.batch_size):
                batch = order[b0:b0 + cfg.batch_size]
                t += 1
                acc = [np.zeros_like(p) for p in params]
                for i in batch:
                    x, y, wts = prepared[i]
                    yhat, cache = forward_with_cache(net, x)
                    loss, grad = combined_loss(yhat[0], y, cfg.loss, pmax=wts)
                    image_losses.append(loss)
                    layer_grads, _ = backward_from_cache(net, cache, grad[None, :, :])
                    for j, (dw, db) in enumerate(layer_grads):
                        acc[2 * j] += dw
                        acc[2 * j + 1] += db
                scale = 1.0 / len(batch)
                for a in acc:
                    a *= scale
                adam_step(params, acc, state, t, cfg)

            record = EpochRecord(epoch=epoch,
                                 mean_loss=float(np.mean(image_losses)),
                                 seconds=time.perf_counter() - t0)
            if eval_every > 0 and eval_pairs and (epoch + 1) % eval_every == 0:
                record.metrics = evaluate(net, eval_pairs, cfg.loss).to_dict()
            history.append(record)
            if hist_file is not None:
                hist_file.write(json.dumps(record.to_dict()) + "\n")
                hist_file.flush()
            if (checkpoint_path is not None and checkpoint_every > 0
                    and (epoch + 1) % checkpoint_every == 0):
                save_checkpoint(net, checkpoint_path)
                _write_state(Path(str(checkpoint_path) + ".state"), epoch + 1, state)
    finally:
        if hist_file is not None:
            hist_file.close()

    if checkpoint_path is not None:
        save_checkpoint(net, checkpoint_path)
        _write_state(Path(str(checkpoint_path) + ".state"), cfg.epochs, state)
    return net, history


# --- evaluation --------------------------------------------------------------------


def evaluate_pairs(net, pairs: list[TrainingPair], loss_cfg: LossConfig) -> list[MetricReport]:
    """Per-pair metric reports: forward each rough input, compare to clean."""
    if not pairs:
        raise ValueError("evaluation requires at least one pair")
    s = net.config.input_size
    reports = []
    for pair in pairs:
        rough = pair.rough if pair.rough.shape == (s, s) else resize_bilinear(pair.rough, s, s)
        yhat = net.forward(invert(rough)[None, :, :])[0]
        target = pair.clean
        if target.shape != yhat.shape:
            target = resize_bilinear(target, yhat.shape[0], yhat.shape[1])
        pred_img = 1.0 - yhat
        reports.append(MetricReport(
            mse=metric_mse(pred_img, target),
            l1=metric_l1(pred_img, target),
            bdcn_loss=bdcn_metric(yhat, invert(target), loss_cfg),
            psnr=psnr(pred_img, target),
            ssim=ssim(pred_img, target),
        ))
    return reports


def evaluate(net, pairs: list[TrainingPair], loss_cfg: LossConfig) -> MetricReport:
    """Aggregate metric report over a test set."""
    return aggregate(evaluate_pairs(net, pairs, loss_cfg))
