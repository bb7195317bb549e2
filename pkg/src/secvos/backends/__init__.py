"""Segmentation backends: request types, toy matchers and the wire protocol."""

from __future__ import annotations

from typing import Sequence

from ..core import ImageFrame
from ..errors import ValidationError
from .base import (
    ConceptRequest,
    Endpoint,
    FrameStore,
    KeyframeItem,
    LocalEndpoint,
    MemoryItem,
    PixelRequest,
    RecordingEndpoint,
)
from .protocol import (
    DEFAULT_TIMEOUT,
    StreamEndpoint,
    SubprocessTransport,
    TcpTransport,
    parse_address,
)
from .toy import ToyConceptMatcher, ToyPixelMatcher


def toy_endpoint(role: str, frames: FrameStore | Sequence[ImageFrame], **params) -> LocalEndpoint:
    if role == "pixel":
        return LocalEndpoint(ToyPixelMatcher(**params), frames, role)
    if role == "concept":
        return LocalEndpoint(ToyConceptMatcher(**params), frames, role)
    raise ValidationError(f"unknown backend role {role!r}")


def make_endpoint(spec: str, role: str, frames: FrameStore | Sequence[ImageFrame] | None = None,
                  frames_dir: str | None = None, timeout: float = DEFAULT_TIMEOUT) -> Endpoint:
    """Build an endpoint from a CLI-style spec.

    ``toy`` and ``echo`` run in-process; ``tcp://host:port`` connects to a
    listening server; anything else is a command line started as a child
    process speaking the protocol on standard I/O.
    """
    store = frames if isinstance(frames, FrameStore) or frames is None else FrameStore(frames)
    if spec == "toy":
        return toy_endpoint(role, store if store is not None else FrameStore(directory=frames_dir))
    if spec == "echo":
        from .echo import echo_segment

        return LocalEndpoint(lambda req, _frames: echo_segment(req), store or FrameStore(), role)
    addr = parse_address(spec)
    transport = TcpTransport(*addr) if addr else SubprocessTransport(spec)
    return StreamEndpoint(transport, role, store, frames_dir=frames_dir, timeout=timeout)


__all__ = [
    "ConceptRequest",
    "Endpoint",
    "FrameStore",
    "KeyframeItem",
    "LocalEndpoint",
    "MemoryItem",
    "PixelRequest",
    "RecordingEndpoint",
    "StreamEndpoint",
    "SubprocessTransport",
    "TcpTransport",
    "ToyConceptMatcher",
    "ToyPixelMatcher",
    "make_endpoint",
    "toy_endpoint",
]
