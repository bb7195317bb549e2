"""Newline-delimited JSON wire protocol between the tracker and model servers.

See ``docs/protocol.md`` for the message reference. Every message is one
compact UTF-8 JSON object terminated by ``\\n``.
"""

from __future__ import annotations

import base64
import io
import json
import queue
import shlex
import socket
import subprocess
import threading
from typing import Any, Callable, Sequence

import numpy as np

from ..core import ImageFrame, RleMask, SegmentationRecord, rle_decode, rle_encode
from ..errors import (
    BackendError,
    BackendTimeoutError,
    BackendUnavailableError,
    MalformedRunLengthError,
    ProtocolViolationError,
    ValidationError,
)
from .base import (
    ConceptRequest,
    FrameStore,
    KeyframeItem,
    MemoryItem,
    PixelRequest,
    Request,
    validate_request,
)

PROTO_VERSION = 1
ROLES = ("pixel", "concept")
DEFAULT_TIMEOUT = 30.0


def dumps(msg: dict) -> str:
    return json.dumps(msg, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def loads(line: str) -> dict:
    try:
        msg = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ProtocolViolationError(f"invalid JSON: {e}") from e
    if not isinstance(msg, dict):
        raise ProtocolViolationError("message is not a JSON object")
    return msg


def _field(obj: Any, key: str, kind: type | tuple[type, ...]) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise ProtocolViolationError(f"missing field {key!r}")
    v = obj[key]
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if (isinstance(v, bool) and bool not in kinds) or not isinstance(v, kinds):
        raise ProtocolViolationError(f"field {key!r} has wrong type")
    return v


# -- frames -----------------------------------------------------------------

def encode_png(frame: ImageFrame) -> str:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.asarray(frame.pixels), "RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_png(data: str, frame_index: int) -> ImageFrame:
    from PIL import Image

    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except Exception as e:  # PIL raises a zoo of exception types on bad input
        raise ProtocolViolationError(f"undecodable embedded frame {frame_index}: {e}") from e
    return ImageFrame(arr, frame_index)


class FrameRefEncoder:
    """Builds frame references, embedding each frame's PNG the first time it is sent.

    With a shared frames directory nothing is ever embedded.
    """

    def __init__(self, frames: FrameStore | None, embed: bool):
        self.frames = frames
        self.embed = embed
        self._sent: set[int] = set()

    def ref(self, index: int) -> dict:
        out: dict[str, Any] = {"frame_index": index}
        if self.embed and index not in self._sent:
            if self.frames is None:
                raise BackendError("frames must be supplied to embed them")
            out["png"] = encode_png(self.frames[index])
            self._sent.add(index)
        return out


def decode_frame_ref(obj: Any, store: FrameStore, require: bool = True) -> int:
    index = _field(obj, "frame_index", int)
    if "png" in obj:
        store.put(decode_png(_field(obj, "png", str), index))
    if require and index not in store:
        raise ProtocolViolationError(f"frame {index} is neither embedded nor available on disk")
    return index


# -- masks ------------------------------------------------------------------

def encode_mask(mask) -> dict:
    return rle_encode(mask).to_json()


def decode_mask(obj: Any):
    try:
        return rle_decode(RleMask.from_json(obj))
    except (MalformedRunLengthError, ValidationError) as e:
        raise ProtocolViolationError(f"bad mask: {e}") from e


# -- requests ---------------------------------------------------------------

def encode_request(req_id: int, req: Request, refs: FrameRefEncoder) -> dict:
    msg: dict[str, Any] = {
        "id": req_id,
        "op": req.op,
        "object_id": req.object_id,
        "frame": refs.ref(req.frame_index),
    }
    if isinstance(req, ConceptRequest):
        msg["keyframes"] = [
            {"frame": refs.ref(k.frame_index), "mask": encode_mask(k.mask), "is_anchor": k.is_anchor}
            for k in req.keyframes
        ]
    msg["memory"] = [
        {"frame": refs.ref(m.frame_index), "mask": encode_mask(m.mask),
         "presence_score": m.presence_score, "offset": m.offset}
        for m in req.memory
    ]
    return msg


def decode_request(msg: dict, store: FrameStore, require_frames: bool = True) -> Request:
    """Parse a request message. With ``require_frames`` every referenced frame
    must be embedded or present in ``store``."""

    def ref(obj: Any) -> int:
        return decode_frame_ref(obj, store, require_frames)

    op = _field(msg, "op", str)
    object_id = _field(msg, "object_id", int)
    frame_index = ref(_field(msg, "frame", dict))
    memory = tuple(
        MemoryItem(ref(_field(m, "frame", dict)), decode_mask(_field(m, "mask", dict)),
                   float(_field(m, "presence_score", (int, float))), _field(m, "offset", int))
        for m in _field(msg, "memory", list)
    )
    if op == "pixel":
        req: Request = PixelRequest(frame_index, object_id, memory)
    elif op == "concept":
        keyframes = tuple(
            KeyframeItem(ref(_field(k, "frame", dict)),
                         decode_mask(_field(k, "mask", dict)), _field(k, "is_anchor", bool))
            for k in _field(msg, "keyframes", list)
        )
        req = ConceptRequest(frame_index, object_id, keyframes, memory)
    else:
        raise ProtocolViolationError(f"unknown op {op!r}")
    validate_request(req)
    return req


# -- responses --------------------------------------------------------------

def encode_result(req_id: int, rec: SegmentationRecord) -> dict:
    return {
        "id": req_id,
        "result": {
            "frame_index": rec.frame_index,
            "object_id": rec.object_id,
            "mask": encode_mask(rec.mask),
            "presence_score": rec.presence_score,
            "confidence": rec.confidence,
        },
    }


def encode_error(req_id: int | None, kind: str, message: str) -> dict:
    return {"id": req_id, "error": {"kind": kind, "message": message}}


def decode_result(msg: dict, expected_id: int, req: Request,
                  shape: tuple[int, int] | None) -> SegmentationRecord:
    if msg.get("id") != expected_id:
        raise ProtocolViolationError(f"response id {msg.get('id')!r} does not match request {expected_id}")
    if "error" in msg:
        err = msg["error"] if isinstance(msg["error"], dict) else {}
        text = f"backend error: {err.get('message', msg['error'])}"
        if err.get("kind") == "protocol-violation":
            raise ProtocolViolationError(text)
        raise BackendError(text)
    res = _field(msg, "result", dict)
    mask = decode_mask(_field(res, "mask", dict))
    if shape is not None and mask.shape != shape:
        raise ProtocolViolationError(f"response mask {mask.shape} does not match frame {shape}")
    if _field(res, "frame_index", int) != req.frame_index or _field(res, "object_id", int) != req.object_id:
        raise ProtocolViolationError("response frame_index/object_id do not match the request")
    try:
        return SegmentationRecord(req.frame_index, req.object_id, mask,
                                  float(_field(res, "presence_score", (int, float))),
                                  float(_field(res, "confidence", (int, float))))
    except ValidationError as e:
        raise ProtocolViolationError(f"invalid result: {e}") from e


# -- transports -------------------------------------------------------------

_EOF = object()


class _LineReader(threading.Thread):
    def __init__(self, stream):
        super().__init__(daemon=True)
        self.stream = stream
        self.lines: queue.Queue = queue.Queue()

    def run(self):
        try:
            for raw in self.stream:
                self.lines.put(raw)
        except (OSError, ValueError):
            pass
        self.lines.put(_EOF)


class Transport:
    def __init__(self, reader, writer):
        self._reader = _LineReader(reader)
        self._reader.start()
        self._writer = writer

    def send_line(self, line: str) -> None:
        try:
            self._writer.write((line + "\n").encode("utf-8"))
            self._writer.flush()
        except (OSError, ValueError) as e:
            raise BackendUnavailableError(f"backend connection lost: {e}") from e

    def recv_line(self, timeout: float) -> str:
        try:
            raw = self._reader.lines.get(timeout=timeout)
        except queue.Empty:
            raise BackendTimeoutError(f"no response within {timeout:g} s") from None
        if raw is _EOF:
            self._reader.lines.put(_EOF)
            raise BackendUnavailableError("backend closed the connection")
        try:
            return raw.decode("utf-8").rstrip("\r\n")
        except UnicodeDecodeError as e:
            raise ProtocolViolationError(f"response is not UTF-8: {e}") from e

    def close(self) -> None:
        for s in (self._writer,):
            try:
                s.close()
            except OSError:
                pass


class SubprocessTransport(Transport):
    def __init__(self, command: str | Sequence[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as e:
            raise BackendUnavailableError(f"cannot start backend {argv!r}: {e}") from e
        super().__init__(self.proc.stdout, self.proc.stdin)

    def close(self) -> None:
        super().close()
        try:
            self.proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
        if self.proc.stdout:
            self.proc.stdout.close()


class TcpTransport(Transport):
    def __init__(self, host: str, port: int, connect_timeout: float = DEFAULT_TIMEOUT):
        try:
            self.sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as e:
            raise BackendUnavailableError(f"cannot connect to {host}:{port}: {e}") from e
        self.sock.settimeout(None)
        super().__init__(self.sock.makefile("rb"), self.sock.makefile("wb"))

    def close(self) -> None:
        super().close()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def parse_address(spec: str) -> tuple[str, int] | None:
    """``tcp://host:port`` -> ``(host, port)``; anything else is not an address."""
    if not spec.startswith("tcp://"):
        return None
    host, _, port = spec[len("tcp://"):].rpartition(":")
    if not host or not port.isdigit():
        raise ValidationError(f"bad backend address {spec!r}")
    return host, int(port)


# -- client endpoint --------------------------------------------------------

class StreamEndpoint:
    """Engine-side client for one backend connection (one video, sequential requests)."""

    def __init__(self, transport: Transport, role: str, frames: FrameStore | None = None,
                 frames_dir: str | None = None, timeout: float = DEFAULT_TIMEOUT,
                 tap: Callable[[str, str], None] | None = None):
        if role not in ROLES:
            raise ValidationError(f"unknown backend role {role!r}")
        self.transport = transport
        self.role = role
        self.frames = frames
        self.timeout = timeout
        self.tap = tap
        self._next_id = 1
        self._refs = FrameRefEncoder(frames, embed=frames_dir is None)
        self._closed = False
        hello: dict[str, Any] = {"proto": PROTO_VERSION, "role": role}
        if frames_dir is not None:
            hello["frames_dir"] = str(frames_dir)
        try:
            self._send({"hello": hello})
            reply = self._recv()
            ready = reply.get("ready")
            if not isinstance(ready, dict) or ready.get("proto") != PROTO_VERSION:
                raise ProtocolViolationError(f"bad handshake reply: {reply!r}")
        except BaseException:
            self.transport.close()
            raise

    def _send(self, msg: dict) -> None:
        line = dumps(msg)
        if self.tap:
            self.tap(">", line)
        self.transport.send_line(line)

    def _recv(self) -> dict:
        line = self.transport.recv_line(self.timeout)
        if self.tap:
            self.tap("<", line)
        return loads(line)

    def segment(self, request: Request) -> SegmentationRecord:
        validate_request(request)
        if request.op != self.role:
            raise ProtocolViolationError(f"{self.role} endpoint cannot send {request.op!r} requests")
        req_id = self._next_id
        self._next_id += 1
        self._send(encode_request(req_id, request, self._refs))
        shape = None
        if self.frames is not None and request.frame_index in self.frames:
            shape = self.frames[request.frame_index].shape
        return decode_result(self._recv(), req_id, request, shape)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._send({"bye": {}})
        except BackendError:
            pass
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
