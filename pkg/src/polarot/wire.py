"""Newline-delimited JSON wire format.

Every frame is one line: an object with ``"v": 1`` and a ``"type"``.  Bit
vectors and matrices are base64 of little-endian packed bits, reals are
printed with 17 significant digits, and indices are 1-based.
"""

from __future__ import annotations

import base64
import json
import math
import socket
from typing import Any

import numpy as np

from .polar_core import BitMatrix

VERSION = 1
TYPES = (
    "hello",
    "public_transform",
    "index_sets",
    "channel_frame",
    "hash_seeds",
    "ciphertexts",
    "close",
)
MAX_LINE = 1 << 26


class ProtocolError(RuntimeError):
    """Malformed frame, version mismatch or out-of-order message."""


def dumps(obj: Any) -> str:
    """Compact JSON with reals at 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite real on the wire")
        return format(obj, ".17g")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def encode_frame(msg: dict) -> str:
    if msg.get("v") != VERSION or msg.get("type") not in TYPES:
        raise ProtocolError("frame needs v=1 and a known type")
    return dumps(msg)


def decode_frame(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed frame: {exc}") from None
    if not isinstance(msg, dict):
        raise ProtocolError("frame is not an object")
    if msg.get("v") != VERSION:
        raise ProtocolError(f"unsupported version {msg.get('v')!r}")
    if msg.get("type") not in TYPES:
        raise ProtocolError(f"unknown frame type {msg.get('type')!r}")
    return msg


def bits_to_b64(bits) -> str:
    b = np.asarray(bits, dtype=np.uint8)
    return base64.b64encode(np.packbits(b, bitorder="little").tobytes()).decode("ascii")


def b64_to_bits(text: str, length: int) -> np.ndarray:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except (ValueError, UnicodeEncodeError) as exc:
        raise ProtocolError(f"bad base64: {exc}") from None
    if len(raw) != -(-length // 8):
        raise ProtocolError("bit vector has the wrong length")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:length].copy()


def matrix_to_b64(M: BitMatrix) -> str:
    return M.to_base64()


def b64_to_matrix(text: str, n: int) -> BitMatrix:
    try:
        return BitMatrix.from_base64(text, n, n)
    except ValueError as exc:
        raise ProtocolError(f"bad matrix payload: {exc}") from None


class LineSocket:
    """Blocking line-oriented wrapper around a connected TCP socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.reader = sock.makefile("rb")

    def send(self, line: str) -> None:
        self.sock.sendall(line.encode("utf-8") + b"\n")

    def recv(self) -> str:
        raw = self.reader.readline(MAX_LINE + 1)
        if not raw:
            raise ProtocolError("peer closed the connection")
        if len(raw) > MAX_LINE or not raw.endswith(b"\n"):
            raise ProtocolError("frame too long or truncated")
        return raw[:-1].decode("utf-8")

    def close(self) -> None:
        try:
            self.reader.close()
        finally:
            self.sock.close()


def parse_hostport(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def listen_once(addr: str, ready=None) -> LineSocket:
    """Accept a single peer on ``addr``; ``ready(port)`` is called once bound."""
    host, port = parse_hostport(addr)
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        srv.bind((host, port))
        srv.listen(1)
        if ready is not None:
            ready(srv.getsockname()[1])
        conn, _ = srv.accept()
    finally:
        srv.close()
    return LineSocket(conn)


def connect(addr: str, timeout: float = 10.0) -> LineSocket:
    host, port = parse_hostport(addr)
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    return LineSocket(sock)
