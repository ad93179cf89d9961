"""Binary request/response payload encodings.

Everything except the address map (JSON, see :mod:`dynfn.addrmap`) is
length-prefixed binary, big-endian. The full layouts live in
docs/PROTOCOL.md.
"""

from __future__ import annotations

import struct

from .errors import ErrorCode, MalformedFrame


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedFrame("truncated message payload")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack(">q", self.take(8))[0]

    def done(self) -> None:
        if self.pos != len(self.data):
            raise MalformedFrame("trailing bytes in message payload")


# -- HELLO ----------------------------------------------------------------

def encode_hello(nonce: bytes, kx_public: bytes) -> bytes:
    return struct.pack(">H", len(nonce)) + nonce + struct.pack(">H", len(kx_public)) + kx_public


def decode_hello(data: bytes) -> tuple[bytes, bytes]:
    r = _Reader(data)
    nonce = r.take(r.u16())
    kx_public = r.take(r.u16())
    r.done()
    return nonce, kx_public


# -- LOAD_FN / LOAD_ACK ---------------------------------------------------

def encode_load(name: str, descriptor: str, code: bytes) -> bytes:
    name_b, desc_b = name.encode(), descriptor.encode()
    return (
        struct.pack(">H", len(name_b)) + name_b
        + struct.pack(">H", len(desc_b)) + desc_b
        + struct.pack(">I", len(code)) + code
    )


def decode_load(data: bytes) -> tuple[str, str, bytes]:
    r = _Reader(data)
    name = r.take(r.u16()).decode()
    descriptor = r.take(r.u16()).decode()
    code = r.take(r.u32())
    r.done()
    return name, descriptor, code


def encode_ack(fn_id: int) -> bytes:
    return struct.pack(">Q", fn_id)


def decode_ack(data: bytes) -> int:
    r = _Reader(data)
    fn_id = r.u64()
    r.done()
    return fn_id


# -- EXEC_FN / EXEC_RESULT ------------------------------------------------

_ARG_INT = 0x01
_ARG_STR = 0x02
_ARG_BUF = 0x03


def encode_exec(fn_id: int, args: list) -> bytes:
    out = bytearray(struct.pack(">QH", fn_id, len(args)))
    for value in args:
        if isinstance(value, int):
            out += struct.pack(">Bq", _ARG_INT, value)
        elif isinstance(value, str):
            data = value.encode()
            out += struct.pack(">BI", _ARG_STR, len(data)) + data
        elif isinstance(value, (bytes, bytearray)):
            out += struct.pack(">BI", _ARG_BUF, len(value)) + bytes(value)
        else:
            raise TypeError(f"unsupported argument type {type(value).__name__}")
    return bytes(out)


def decode_exec(data: bytes) -> tuple[int, list]:
    r = _Reader(data)
    fn_id = r.u64()
    argc = r.u16()
    args: list = []
    for _ in range(argc):
        kind = r.u8()
        if kind == _ARG_INT:
            args.append(r.i64())
        elif kind == _ARG_STR:
            args.append(r.take(r.u32()).decode())
        elif kind == _ARG_BUF:
            args.append(r.take(r.u32()))
        else:
            raise MalformedFrame(f"unknown argument kind {kind:#x}")
    r.done()
    return fn_id, args


def encode_exec_result(return_word: int | None, wall_time_ns: int) -> bytes:
    if return_word is None:
        return struct.pack(">BqQ", 0, 0, wall_time_ns)
    return struct.pack(">BqQ", 1, return_word, wall_time_ns)


def decode_exec_result(data: bytes) -> tuple[int | None, int]:
    r = _Reader(data)
    has_ret = r.u8()
    ret = r.i64()
    wall = r.u64()
    r.done()
    return (ret if has_ret else None), wall


# -- CLEAR_FNS response ---------------------------------------------------

def encode_count(count: int) -> bytes:
    return struct.pack(">Q", count)


def decode_count(data: bytes) -> int:
    r = _Reader(data)
    count = r.u64()
    r.done()
    return count


# -- ERROR ----------------------------------------------------------------

def encode_error(code: ErrorCode, message: str) -> bytes:
    msg = message.encode()[:65535]
    return struct.pack(">HH", int(code), len(msg)) + msg


def decode_error(data: bytes) -> tuple[int, str]:
    r = _Reader(data)
    code = r.u16()
    message = r.take(r.u16()).decode(errors="replace")
    r.done()
    return code, message
