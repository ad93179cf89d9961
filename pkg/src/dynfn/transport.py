"""Blocking stream transport for frames."""

from __future__ import annotations

import socket
import struct

from .channel import HEADER_LEN, MAGIC, Frame, MsgType, decode_frame, encode_frame
from .errors import MalformedFrame, TransportError, UnknownType

MAX_PAYLOAD = 512 * 1024 * 1024


def recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        try:
            chunk = sock.recv(remaining)
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        if not chunk:
            raise TransportError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> Frame:
    header = recv_exact(sock, HEADER_LEN)
    if header[:4] != MAGIC:
        raise MalformedFrame(f"bad magic {header[:4]!r}")
    (payload_len,) = struct.unpack_from(">I", header, 14)
    if payload_len > MAX_PAYLOAD:
        raise MalformedFrame(f"payload length {payload_len} too large")
    payload = recv_exact(sock, payload_len)
    return decode_frame(header + payload)


def write_frame(sock: socket.socket, frame: Frame) -> None:
    try:
        sock.sendall(encode_frame(frame))
    except OSError as exc:
        raise TransportError(str(exc)) from exc
