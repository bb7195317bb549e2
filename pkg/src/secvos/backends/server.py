"""Backend-side protocol loop, usable over standard I/O or TCP.

Run a built-in backend as a protocol peer::

    python -m secvos.backends.server --backend toy            # stdio
    python -m secvos.backends.server --backend echo --tcp 127.0.0.1:7000
"""

from __future__ import annotations

import argparse
import socketserver
import sys
from typing import BinaryIO, Callable

from ..core import SegmentationRecord
from ..errors import BackendError, ProtocolViolationError, SecvosError
from .base import FrameStore, Request
from .protocol import (
    PROTO_VERSION,
    ROLES,
    decode_request,
    dumps,
    encode_error,
    encode_result,
    loads,
)

Handler = Callable[[str, Request, FrameStore], SegmentationRecord]


def serve(handler: Handler, instream: BinaryIO, outstream: BinaryIO) -> int:
    """Answer requests until ``bye`` or end of input. Returns a process exit code.

    A handler with a false ``needs_frames`` attribute never reads pixels, so
    referenced frames need not be available to it.
    """
    needs_frames = getattr(handler, "needs_frames", True)

    def send(msg: dict) -> None:
        outstream.write((dumps(msg) + "\n").encode("utf-8"))
        outstream.flush()

    role: str | None = None
    store: FrameStore | None = None
    for raw in instream:
        try:
            line = raw.decode("utf-8").strip()
        except UnicodeDecodeError:
            send(encode_error(None, "protocol-violation", "message is not UTF-8"))
            continue
        if not line:
            continue
        req_id = None
        try:
            msg = loads(line)
            if "bye" in msg:
                return 0
            if "hello" in msg:
                hello = msg["hello"]
                if not isinstance(hello, dict) or hello.get("proto") != PROTO_VERSION:
                    raise ProtocolViolationError(f"unsupported handshake {hello!r}")
                if hello.get("role") not in ROLES:
                    raise ProtocolViolationError(f"unknown role {hello.get('role')!r}")
                frames_dir = hello.get("frames_dir")
                try:
                    store = FrameStore(directory=frames_dir) if frames_dir else FrameStore()
                except SecvosError:
                    # the directory may legitimately be unused (e.g. echo backends)
                    store = FrameStore()
                role = hello["role"]
                send({"ready": {"proto": PROTO_VERSION}})
                continue
            req_id = msg.get("id") if isinstance(msg.get("id"), int) else None
            if role is None or store is None:
                raise ProtocolViolationError("request before handshake")
            if req_id is None:
                raise ProtocolViolationError("request lacks an integer id")
            req = decode_request(msg, store, needs_frames)
            if req.op != role:
                raise ProtocolViolationError(f"{role} backend received a {req.op!r} request")
            send(encode_result(req_id, handler(role, req, store)))
        except ProtocolViolationError as e:
            send(encode_error(req_id, "protocol-violation", str(e)))
        except (BackendError, SecvosError, KeyError, ValueError) as e:
            send(encode_error(req_id, "backend", f"{type(e).__name__}: {e}"))
    return 0


def toy_handler(radius: int = 16, tau_pix: float = 1500.0, tau_con: float = 0.6) -> Handler:
    from .toy import ToyConceptMatcher, ToyPixelMatcher

    pixel = ToyPixelMatcher(radius, tau_pix)
    concept = ToyConceptMatcher(tau_con)

    def handle(role: str, req: Request, store: FrameStore) -> SegmentationRecord:
        return pixel(req, store) if role == "pixel" else concept(req, store)

    return handle


def echo_handler() -> Handler:
    from .echo import echo_segment

    def handle(role: str, req: Request, store: FrameStore) -> SegmentationRecord:
        return echo_segment(req)

    handle.needs_frames = False  # type: ignore[attr-defined]
    return handle


def _make_handler(name: str, args) -> Handler:
    if name == "toy":
        return toy_handler(args.radius, args.tau_pix, args.tau_con)
    return echo_handler()


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(prog="python -m secvos.backends.server")
    p.add_argument("--backend", choices=("toy", "echo"), default="toy")
    p.add_argument("--tcp", metavar="HOST:PORT", help="listen on TCP instead of standard I/O")
    p.add_argument("--radius", type=int, default=16)
    p.add_argument("--tau-pix", type=float, default=1500.0)
    p.add_argument("--tau-con", type=float, default=0.6)
    args = p.parse_args(argv)
    handler = _make_handler(args.backend, args)

    if args.tcp is None:
        return serve(handler, sys.stdin.buffer, sys.stdout.buffer)

    host, _, port = args.tcp.rpartition(":")

    class _Conn(socketserver.StreamRequestHandler):
        def handle(self):
            serve(handler, self.rfile, self.wfile)

    class _Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with _Server((host, int(port)), _Conn) as srv:
        print(f"listening on {srv.server_address[0]}:{srv.server_address[1]}", file=sys.stderr, flush=True)
        srv.serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
