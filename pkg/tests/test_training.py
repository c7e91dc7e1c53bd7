import json

import numpy as np
import pytest

from sketchclean.losses import LossConfig
from sketchclean.model import NetConfig, build_network, forward
from sketchclean.synth import DefectProfile, TrainingPair, make_dataset
from sketchclean.training import (
    AdamState,
    EpochRecord,
    TrainConfig,
    TrainingError,
    adam_step,
    evaluate,
    load_config,
    save_config,
    split_dataset,
    train,
)

DESK_NET = NetConfig(input_size=16, base_width=2, output_mode="double")


def desk_pairs(n=6, seed=0):
    return make_dataset(n, 16, 16, DefectProfile(gap_rate=4, extra_line_count=1, seed=seed),
                        seed=seed)


def desk_cfg(epochs=2, **kw):
    return TrainConfig(epochs=epochs, batch_size=4, learning_rate=3e-4, seed=5,
                       loss=LossConfig(), net=DESK_NET, **kw)


# --- split ---


def test_split_exact_ratio():
    train_part, test_part = split_dataset(list(range(10)), 0.8, seed=1)
    assert len(train_part) == 8 and len(test_part) == 2


def test_split_801_rounding():
    train_part, test_part = split_dataset(list(range(801)), 0.8, seed=1)
    assert (len(train_part), len(test_part)) == (641, 160)


def test_split_paper_compat_counts():
    train_part, test_part = split_dataset(list(range(801)), 0.8, seed=1, paper_compat=True)
    assert (len(train_part), len(test_part)) == (632, 169)


def test_split_paper_compat_requires_801():
    with pytest.raises(ValueError):
        split_dataset(list(range(100)), 0.8, seed=1, paper_compat=True)


def test_split_is_partition():
    items = list(range(57))
    train_part, test_part = split_dataset(items, 0.7, seed=3)
    assert sorted(train_part + test_part) == items
    assert set(train_part).isdisjoint(test_part)


def test_split_deterministic_and_seed_sensitive():
    items = list(range(40))
    a1, _ = split_dataset(items, 0.8, seed=7)
    a2, _ = split_dataset(items, 0.8, seed=7)
    b1, _ = split_dataset(items, 0.8, seed=8)
    assert a1 == a2
    assert a1 != b1


def test_split_empty_rejected():
    with pytest.raises(ValueError):
        split_dataset([], 0.8, seed=0)


# --- adam ---


def test_adam_zero_gradient_keeps_params():
    p = [np.array([1.0, -2.0]), np.array([[0.5]])]
    before = [a.copy() for a in p]
    state = AdamState.for_params(p)
    adam_step(p, [np.zeros(2), np.zeros((1, 1))], state, t=1, cfg=desk_cfg())
    for a, b in zip(p, before):
        assert np.array_equal(a, b)


def test_adam_constant_gradient_step_approaches_lr():
    cfg = desk_cfg()
    p = [np.array([0.0])]
    g = [np.array([0.35])]
    state = AdamState.for_params(p)
    prev = p[0].copy()
    for t in range(1, 2001):
        adam_step(p, g, state, t=t, cfg=cfg)
        step = float(np.abs(p[0] - prev)[0])
        prev = p[0].copy()
    assert step == pytest.approx(cfg.learning_rate, rel=0.05)


def test_adam_deterministic():
    rng = np.random.default_rng(0)
    grads_seq = [rng.standard_normal(3) for _ in range(5)]

    def run():
        p = [np.zeros(3)]
        state = AdamState.for_params(p)
        for t, g in enumerate(grads_seq, start=1):
            adam_step(p, [g], state, t=t, cfg=desk_cfg())
        return p[0].copy()

    assert np.array_equal(run(), run())


def test_adam_rejects_non_finite_gradient():
    p = [np.zeros(2)]
    state = AdamState.for_params(p)
    with pytest.raises(TrainingError, match="step 3"):
        adam_step(p, [np.array([np.nan, 0.0])], state, t=3, cfg=desk_cfg())


# --- train ---


def test_train_zero_epochs_returns_initial_network():
    pairs = desk_pairs(4)
    cfg = desk_cfg(epochs=0)
    net, history = train(pairs, cfg)
    fresh = build_network(cfg.net, init_seed=cfg.seed)
    assert history == []
    for a, b in zip(net.layers, fresh.layers):
        assert np.array_equal(a.weight, b.weight)


def test_train_loss_decreases():
    from sketchclean.synth import ShapeSpec, Rect, Circle, render_clean, inject_defects

    spec = ShapeSpec((Rect(0.2, 0.2, 0.8, 0.8), Circle(0.5, 0.5, 0.15)))
    clean = render_clean(spec, 16, 16)
    pairs = [TrainingPair(
        rough=inject_defects(clean, DefectProfile(gap_rate=6, extra_line_count=1, seed=100 + i)),
        clean=clean, category="plate") for i in range(6)]
    cfg = TrainConfig(epochs=60, batch_size=4, learning_rate=3e-4, seed=7,
                      net=NetConfig(16, 2, "same"))
    _, history = train(pairs, cfg)
    assert history[-1].mean_loss < 0.5 * history[0].mean_loss


def test_train_history_one_record_per_epoch(tmp_path):
    pairs = desk_pairs(4)
    hist_path = tmp_path / "h.jsonl"
    _, history = train(pairs, desk_cfg(epochs=3), history_path=hist_path)
    assert [r.epoch for r in history] == [0, 1, 2]
    lines = hist_path.read_text().strip().splitlines()
    assert len(lines) == 3
    assert json.loads(lines[1])["epoch"] == 1


def test_train_deterministic_across_runs():
    pairs = desk_pairs(5)
    cfg = desk_cfg(epochs=4)
    net1, hist1 = train(pairs, cfg)
    net2, hist2 = train(pairs, cfg)
    assert [r.mean_loss for r in hist1] == [r.mean_loss for r in hist2]
    for a, b in zip(net1.layers, net2.layers):
        assert np.array_equal(a.weight, b.weight)
        assert np.array_equal(a.bias, b.bias)


def test_train_resume_reproduces_uninterrupted_run(tmp_path):
    pairs = desk_pairs(5)
    ckpt = tmp_path / "mid.ckpt"

    cfg_full = desk_cfg(epochs=6)
    net_full, hist_full = train(pairs, cfg_full)

    train(pairs, desk_cfg(epochs=3), checkpoint_path=ckpt)
    net_resumed, hist_resumed = train(pairs, cfg_full, resume_from=ckpt)

    assert [r.epoch for r in hist_resumed] == [3, 4, 5]
    assert [r.mean_loss for r in hist_resumed] == [r.mean_loss for r in hist_full[3:]]
    for a, b in zip(net_resumed.layers, net_full.layers):
        assert np.array_equal(a.weight, b.weight)
        assert np.array_equal(a.bias, b.bias)


def test_train_rejects_shape_inconsistent_dataset():
    pairs = desk_pairs(3)
    pairs.append(TrainingPair(rough=np.ones((8, 8)), clean=np.ones((8, 8))))
    with pytest.raises(ValueError):
        train(pairs, desk_cfg())


def test_train_accepts_clean_at_output_size():
    rng = np.random.default_rng(1)
    pairs = [TrainingPair(rough=rng.random((16, 16)), clean=rng.random((32, 32)))
             for _ in range(2)]
    _, history = train(pairs, desk_cfg(epochs=1))
    assert len(history) == 1


def test_train_empty_dataset_rejected():
    with pytest.raises(ValueError):
        train([], desk_cfg())


# --- evaluate ---


class _OracleNet:
    """Stub that returns a fixed target regardless of the input."""

    def __init__(self, target_img, input_size=16):
        self.config = NetConfig(input_size, 2, "same", skip_wiring=())
        self._out = 1.0 - target_img  # ink polarity

    def forward(self, x):
        return self._out[None, :, :]


def test_evaluate_oracle_network_scores_perfectly():
    rng = np.random.default_rng(2)
    clean = (rng.random((16, 16)) > 0.8).astype(float)
    pairs = [TrainingPair(rough=rng.random((16, 16)), clean=clean)]
    report = evaluate(_OracleNet(clean), pairs, LossConfig())
    assert report.mse == 0.0
    assert report.ssim == pytest.approx(1.0, abs=1e-9)
    assert report.psnr_inf_count == 1


def test_evaluate_constant_half_network_against_binary_targets():
    net = build_network(DESK_NET, init_seed=0)
    for layer in net.layers:
        layer.weight[...] = 0.0
        layer.bias[...] = 0.0
    rng = np.random.default_rng(3)
    clean = (rng.random((32, 32)) > 0.5).astype(float)
    pairs = [TrainingPair(rough=rng.random((16, 16)), clean=clean)]
    report = evaluate(net, pairs, LossConfig())
    assert report.mse == pytest.approx(0.25, rel=1e-12)


def test_evaluate_counts_pairs():
    pairs = desk_pairs(4)
    net = build_network(DESK_NET, init_seed=1)
    assert evaluate(net, pairs, LossConfig()).n_pairs == 4


def test_evaluate_empty_rejected():
    net = build_network(DESK_NET, init_seed=1)
    with pytest.raises(ValueError):
        evaluate(net, [], LossConfig())


# --- config files ---


def test_train_config_json_round_trip(tmp_path):
    cfg = TrainConfig(epochs=12, batch_size=4, learning_rate=1e-3, seed=9,
                      loss=LossConfig(num_bins=8), net=NetConfig(32, 4, "same", ()))
    path = tmp_path / "cfg.json"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(split_ratio=1.0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)


def test_epoch_record_serialization():
    rec = EpochRecord(epoch=2, mean_loss=1.5, seconds=0.1, metrics={"mse": 0.2})
    d = rec.to_dict()
    assert d["epoch"] == 2 and d["metrics"]["mse"] == 0.2
