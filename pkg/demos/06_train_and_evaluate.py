"""Train a desk-scale cleaner and score it.

Splits a synthetic dataset 80/20, runs mini-batch Adam under the combined
loss, writes a checkpoint plus a JSONL history, and reports MSE / L1 /
balanced-CE / PSNR / SSIM on the held-out pairs. Takes a couple of minutes.
"""

from _bootstrap import OUT

from sketchclean.losses import LossConfig
from sketchclean.model import NetConfig
from sketchclean.raster import save_raster
from sketchclean.synth import DefectProfile, make_dataset
from sketchclean.training import TrainConfig, evaluate, split_dataset, train

profile = DefectProfile(gap_rate=5, mesh_line_count=2, extra_line_count=2, seed=4)
pairs = make_dataset(24, 16, 16, profile, seed=4)
train_pairs, test_pairs = split_dataset(pairs, ratio=0.8, seed=4)
print(f"{len(train_pairs)} training pairs, {len(test_pairs)} held out")

cfg = TrainConfig(epochs=200, batch_size=8, learning_rate=3e-4, seed=4,
                  loss=LossConfig(), net=NetConfig(16, 2, "same"))
net, history = train(train_pairs, cfg,
                     checkpoint_path=OUT / "desk.ckpt",
                     history_path=OUT / "desk.history.jsonl")
print(f"epoch   0 loss {history[0].mean_loss:9.3f}")
print(f"epoch {history[-1].epoch:3d} loss {history[-1].mean_loss:9.3f} "
      f"({history[-1].mean_loss / history[0].mean_loss:.1%} of start)")

report = evaluate(net, test_pairs, cfg.loss)
print("held-out:", {k: round(v, 4) for k, v in report.to_dict().items()
                    if isinstance(v, float)})

sample = test_pairs[0]
from sketchclean.model import forward
from sketchclean.raster import invert

cleaned = 1.0 - forward(net, invert(sample.rough)[None])[0]
save_raster(sample.rough, OUT / "eval_rough.png")
save_raster(cleaned, OUT / "eval_cleaned.png")
save_raster(sample.clean, OUT / "eval_target.png")
print("sample triplet written to", OUT)
