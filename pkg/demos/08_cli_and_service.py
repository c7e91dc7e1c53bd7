"""The operator surface: CLI subcommands and the HTTP service.

Drives the same synth -> train -> index workflow through the CLI, then
starts the service in-process, cleans a sketch over POST /clean, and runs a
retrieval over POST /retrieve. Takes about a minute.
"""

from _bootstrap import OUT

import json
import threading
import urllib.request
import uuid

from sketchclean.cli import main
from sketchclean.losses import LossConfig
from sketchclean.model import NetConfig, load_checkpoint
from sketchclean.retrieval import load_index
from sketchclean.service import ServiceState, make_server
from sketchclean.training import TrainConfig, save_config

root = OUT / "cli_demo"
data = root / "data"

print("$ sketchclean synth ...")
main(["synth", "--n", "12", "--seed", "6", "--out", str(data),
      "--height", "16", "--width", "16", "--gap-rate", "5", "--mesh-lines", "2"])

cfg = TrainConfig(epochs=120, batch_size=8, learning_rate=3e-4, seed=6,
                  loss=LossConfig(), net=NetConfig(16, 2, "same"))
save_config(cfg, root / "config.json")
print("$ sketchclean train ...")
main(["train", "--config", str(root / "config.json"), "--data", str(data),
      "--out", str(root / "model.ckpt")])

print("$ sketchclean index ...")
main(["index", "--data", str(data), "--out", str(root / "items.idx")])

print("$ sketchclean retrieve ...")
main(["retrieve", "--index", str(root / "items.idx"), "--k", "3",
      str(data / "rough" / "0000.png")])

# the same pipeline over HTTP
state = ServiceState(network=load_checkpoint(root / "model.ckpt"),
                     index=load_index(root / "items.idx"), data_root=data)
server = make_server(state, port=0)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://127.0.0.1:{server.server_address[1]}"
print("service at", base)

with urllib.request.urlopen(base + "/health") as resp:
    print("GET /health ->", json.loads(resp.read()))

png = (data / "rough" / "0001.png").read_bytes()
req = urllib.request.Request(base + "/clean", data=png, method="POST",
                             headers={"Content-Type": "image/png"})
with urllib.request.urlopen(req) as resp:
    (OUT / "service_cleaned.png").write_bytes(resp.read())
print("POST /clean -> demos/out/service_cleaned.png")

boundary = uuid.uuid4().hex
body = (f"--{boundary}\r\n"
        f'Content-Disposition: form-data; name="image"; filename="q.png"\r\n'
        f"Content-Type: image/png\r\n\r\n").encode() + png + (
    f"\r\n--{boundary}\r\n"
    f'Content-Disposition: form-data; name="k"\r\n\r\n3\r\n'
    f"--{boundary}--\r\n").encode()
req = urllib.request.Request(base + "/retrieve", data=body, method="POST",
                             headers={"Content-Type": f"multipart/form-data; boundary={boundary}"})
with urllib.request.urlopen(req) as resp:
    print("POST /retrieve ->", json.loads(resp.read()))

server.shutdown()
server.server_close()
