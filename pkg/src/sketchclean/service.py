"""Local HTTP service exposing cleaning and retrieval to the sketch studio.

Endpoints:
    POST /clean                image/png (or PGM) in, cleaned PNG out
    POST /retrieve             multipart form: "image" file + "k" field;
                               JSON list of {id, label, similarity}, descending
    GET  /health               JSON status of the loaded model and index
    GET  /items/{id}/thumbnail PNG of an indexed dataset item

The model and index are loaded once at startup and never mutated; requests
run concurrently against that immutable snapshot. A bounded gate returns 503
instead of queueing without limit; errors are JSON {code, message}.
"""

from __future__ import annotations

import email.parser
import email.policy
import json
import logging
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .model import Network, forward
from .raster import decode_image_bytes, encode_png_bytes, invert, resize_bilinear
from .retrieval import RetrievalIndex, embed, query_scored

__all__ = ["ServiceState", "make_server", "clean_image_bytes"]

log = logging.getLogger("sketchclean.service")


@dataclass(frozen=True)
class ServiceState:
    network: Network | None = None
    index: RetrievalIndex | None = None
    data_root: Path | None = None
    request_timeout: float = 30.0
    max_concurrency: int = 4


def clean_image_bytes(net: Network, payload: bytes) -> bytes:
    """Decode, resize to the model input, clean, and re-encode as PNG.

    The CLI `clean` command and POST /clean both route through here, so the
    two surfaces produce identical bytes for identical inputs.

    Raises:
        ValueError: If the payload is not a decodable grayscale image.
    """
    img = decode_image_bytes(payload)
    s = net.config.input_size
    x = invert(resize_bilinear(img, s, s))[None, :, :]
    yhat = forward(net, x)[0]
    return encode_png_bytes(1.0 - yhat)


def _clean_raster(net: Network, img: np.ndarray) -> np.ndarray:
    s = net.config.input_size
    x = invert(resize_bilinear(img, s, s))[None, :, :]
    return 1.0 - forward(net, x)[0]


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState
    gate: threading.Semaphore

    protocol_version = "HTTP/1.1"

    # --- plumbing ---

    def log_message(self, fmt, *args):  # route http.server chatter to logging
        log.debug("%s " + fmt, self.address_string(), *args)

    def _send(self, code: int, body: bytes, content_type: str) -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, code: int, obj) -> None:
        self._send(code, json.dumps(obj).encode("utf-8"), "application/json")

    def _send_error_json(self, code: int, message: str) -> None:
        self._send_json(code, {"code": code, "message": message})

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length > 0 else b""

    def _guarded(self, fn) -> None:
        if not self.gate.acquire(timeout=self.state.request_timeout):
            self._send_error_json(503, "service busy, try again")
            return
        try:
            fn()
        except ValueError as exc:
            self._send_error_json(400, str(exc))
        except Exception as exc:  # noqa: BLE001 - request boundary
            log.error("request failed: %s", exc)
            self._send_error_json(500, "internal error")
        finally:
            self.gate.release()

    # --- routes ---

    def do_GET(self):
        if self.path == "/health":
            self._guarded(self._handle_health)
        elif self.path.startswith("/items/") and self.path.endswith("/thumbnail"):
            self._guarded(self._handle_thumbnail)
        else:
            self._send_error_json(404, f"no such endpoint: {self.path}")

    def do_POST(self):
        if self.path == "/clean":
            self._guarded(self._handle_clean)
        elif self.path == "/retrieve":
            self._guarded(self._handle_retrieve)
        else:
            self._send_error_json(404, f"no such endpoint: {self.path}")

    def do_OPTIONS(self):  # CORS preflight for the browser studio
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _handle_health(self):
        net = self.state.network
        idx = self.state.index
        self._send_json(200, {
            "model": net is not None,
            "index": idx is not None,
            "input_size": net.config.input_size if net else None,
            "items": len(idx) if idx else 0,
        })

    def _handle_clean(self):
        if self.state.network is None:
            self._send_error_json(503, "no model loaded")
            return
        body = self._read_body()
        if not body:
            self._send_error_json(400, "empty request body")
            return
        png = clean_image_bytes(self.state.network, body)
        self._send(200, png, "image/png")

    def _handle_retrieve(self):
        if self.state.index is None:
            self._send_error_json(503, "no index loaded")
            return
        body = self._read_body()
        if not body:
            self._send_error_json(400, "empty request body")
            return
        image_bytes, k = _parse_multipart(self.headers.get("Content-Type", ""), body)
        if image_bytes is None:
            self._send_error_json(400, "multipart body must include an 'image' part")
            return
        if k < 1 or k > len(self.state.index):
            self._send_error_json(400, f"k must lie in [1, {len(self.state.index)}], got {k}")
            return
        img = decode_image_bytes(image_bytes)
        if self.state.network is not None:
            img = _clean_raster(self.state.network, img)
        results = query_scored(self.state.index, embed(img), k)
        self._send_json(200, [
            {"id": pid, "label": label, "similarity": sim} for pid, label, sim in results
        ])

    def _handle_thumbnail(self):
        if self.state.index is None or self.state.data_root is None:
            self._send_error_json(503, "no indexed dataset available")
            return
        item_id = self.path[len("/items/"):-len("/thumbnail")]
        if item_id not in self.state.index.ids:
            self._send_error_json(404, f"unknown item id {item_id!r}")
            return
        for sub in ("clean", "rough"):
            path = self.state.data_root / sub / f"{item_id}.png"
            if path.is_file():
                self._send(200, path.read_bytes(), "image/png")
                return
        self._send_error_json(404, f"no image stored for item {item_id!r}")


def _parse_multipart(content_type: str, body: bytes) -> tuple[bytes | None, int]:
    """Extract the 'image' file part and the 'k' field (default 10)."""
    if "multipart/form-data" not in content_type:
        raise ValueError("expected multipart/form-data")
    msg = email.parser.BytesParser(policy=email.policy.HTTP).parsebytes(
        b"Content-Type: " + content_type.encode("latin-1") + b"\r\n\r\n" + body)
    if not msg.is_multipart():
        raise ValueError("malformed multipart body")
    image_bytes: bytes | None = None
    k = 10
    for part in msg.iter_parts():
        name = part.get_param("name", header="content-disposition")
        payload = part.get_payload(decode=True) or b""
        if name == "image":
            image_bytes = payload
        elif name == "k":
            try:
                k = int(payload.decode("utf-8").strip())
            except (UnicodeDecodeError, ValueError) as exc:
                raise ValueError("field 'k' must be an integer") from exc
    return image_bytes, k


def make_server(state: ServiceState, port: int) -> ThreadingHTTPServer:
    """Build a threading HTTP server bound to 127.0.0.1:port (0 = ephemeral)."""
    handler = type("BoundHandler", (_Handler,), {
        "state": state,
        "gate": threading.Semaphore(state.max_concurrency),
    })
    server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    server.daemon_threads = True
    return server
