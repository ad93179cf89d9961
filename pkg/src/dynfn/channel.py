"""Sequence-numbered authenticated-encryption framing.

Wire layout (big-endian throughout)::

    magic   4 bytes  "DSGX"
    version 1 byte   0x01
    type    1 byte   MsgType
    seq     8 bytes  unsigned, per direction, starts at 0, +1 per frame
    len     4 bytes  payload length
    payload          AES-256-GCM ciphertext+tag, or plaintext for the two
                     pre-attestation types (HELLO, RA_REPORT)

The AEAD nonce is the per-direction label padded to 12 bytes XORed with
the sequence number, so nonces never repeat within a direction and no
random nonce is sent on the wire. The 18-byte header is bound as
associated data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .attest import SessionKeys
from .errors import (
    AuthFailure,
    MalformedFrame,
    ReplayOrReorder,
    SequenceExhausted,
    UnknownType,
)

MAGIC = b"DSGX"
VERSION = 0x01
HEADER_LEN = 18
MAX_SEQ = 2**64 - 1
GCM_TAG_LEN = 16


class MsgType(IntEnum):
    HELLO = 0x01
    RA_REPORT = 0x02
    ADDR_MAP = 0x10
    LOAD_FN = 0x11
    LOAD_ACK = 0x12
    EXEC_FN = 0x13
    EXEC_RESULT = 0x14
    UNLOAD_FN = 0x15
    CLEAR_FNS = 0x16
    LIST_FNS = 0x17
    ERROR = 0x7F


#: The only types allowed (and required) to travel unencrypted.
PLAINTEXT_TYPES = frozenset({MsgType.HELLO, MsgType.RA_REPORT})


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    seq: int
    payload: bytes


def _header(msg_type: MsgType, seq: int, payload_len: int) -> bytes:
    return MAGIC + struct.pack(">BBQI", VERSION, msg_type, seq, payload_len)


def encode_frame(frame: Frame) -> bytes:
    return _header(frame.msg_type, frame.seq, len(frame.payload)) + frame.payload


def decode_frame(data: bytes) -> Frame:
    if len(data) < HEADER_LEN:
        raise MalformedFrame(f"frame shorter than header ({len(data)} bytes)")
    if data[:4] != MAGIC:
        raise MalformedFrame(f"bad magic {data[:4]!r}")
    version, type_byte, seq, payload_len = struct.unpack_from(">BBQI", data, 4)
    if version != VERSION:
        raise MalformedFrame(f"unsupported version {version:#x}")
    try:
        msg_type = MsgType(type_byte)
    except ValueError:
        raise UnknownType(f"unknown message type {type_byte:#x}") from None
    if len(data) != HEADER_LEN + payload_len:
        raise MalformedFrame(
            f"payload length mismatch: header says {payload_len}, "
            f"got {len(data) - HEADER_LEN}"
        )
    return Frame(msg_type=msg_type, seq=seq, payload=data[HEADER_LEN:])


def _nonce(label: bytes, seq: int) -> bytes:
    padded = label.ljust(12, b"\x00")[:12]
    seq_bytes = struct.pack(">Q", seq)
    return padded[:4] + bytes(a ^ b for a, b in zip(padded[4:], seq_bytes))


def seal(keys: SessionKeys, seq: int, msg_type: MsgType, plaintext: bytes) -> Frame:
    """Encrypt ``plaintext`` into the next outbound frame."""
    if seq >= MAX_SEQ:
        raise SequenceExhausted("outbound sequence counter exhausted")
    if msg_type in PLAINTEXT_TYPES:
        return Frame(msg_type=msg_type, seq=seq, payload=plaintext)
    header = _header(msg_type, seq, len(plaintext) + GCM_TAG_LEN)
    ciphertext = AESGCM(keys.send_key).encrypt(
        _nonce(keys.send_label, seq), plaintext, header
    )
    return Frame(msg_type=msg_type, seq=seq, payload=ciphertext)


def open_frame(keys: SessionKeys, expected_seq: int, frame: Frame) -> tuple[MsgType, bytes]:
    """Authenticate and decrypt an inbound frame at the expected sequence."""
    if frame.seq != expected_seq:
        raise ReplayOrReorder(f"expected seq {expected_seq}, got {frame.seq}")
    if frame.msg_type in PLAINTEXT_TYPES:
        return frame.msg_type, frame.payload
    header = _header(frame.msg_type, frame.seq, len(frame.payload))
    try:
        plaintext = AESGCM(keys.recv_key).decrypt(
            _nonce(keys.recv_label, frame.seq), frame.payload, header
        )
    except InvalidTag as exc:
        raise AuthFailure("frame failed authentication") from exc
    return frame.msg_type, plaintext
