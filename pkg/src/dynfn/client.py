"""Client session: attest, then drive requests over the secure channel."""

from __future__ import annotations

import socket

from . import wire
from .addrmap import AddressMap, parse_map_json
from .attest import (
    AttestationReport,
    client_finish,
    client_hello,
    client_verify_report,
)
from .channel import Frame, MsgType, open_frame, seal
from .errors import ProtocolViolation, RemoteError, TransportError
from .transport import read_frame, write_frame


class ClientSession:
    """One attested connection to a server.

    ``attest`` must complete before any request; the received address map
    is cached on the session and refreshed after every load.
    """

    def __init__(self, server_address: tuple[str, int], timeout: float = 60.0):
        try:
            self._sock = socket.create_connection(server_address, timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {server_address}: {exc}") from exc
        self.keys = None
        self._send_seq = 0
        self._recv_seq = 0
        self.address_map: AddressMap | None = None

    # -- attestation -------------------------------------------------------

    def attest(self, pinned_verify_key: bytes, expected_measurement: bytes) -> None:
        nonce, kx_private, kx_public = client_hello()
        write_frame(
            self._sock,
            Frame(MsgType.HELLO, 0, wire.encode_hello(nonce, kx_public)),
        )
        self._send_seq = 1
        frame = read_frame(self._sock)
        if frame.msg_type == MsgType.ERROR:
            code, message = wire.decode_error(frame.payload)
            raise RemoteError(code, message)
        if frame.msg_type != MsgType.RA_REPORT or frame.seq != 0:
            raise ProtocolViolation(f"expected RA_REPORT, got {frame.msg_type.name}")
        report = AttestationReport.decode(frame.payload)
        client_verify_report(report, pinned_verify_key, expected_measurement, nonce)
        self.keys = client_finish(report, kx_private)
        self._recv_seq = 1
        self.address_map = self._recv_map()

    # -- requests ----------------------------------------------------------

    def load(self, name: str, descriptor: str, code: bytes) -> int:
        msg_type, payload = self._request(
            MsgType.LOAD_FN, wire.encode_load(name, descriptor, code)
        )
        self._expect(msg_type, MsgType.LOAD_ACK)
        fn_id = wire.decode_ack(payload)
        self.address_map = self._recv_map()
        return fn_id

    def execute(self, fn_id: int, args: list) -> tuple[int | None, int]:
        """Returns (return word or None, server-side wall time in ns)."""
        msg_type, payload = self._request(MsgType.EXEC_FN, wire.encode_exec(fn_id, args))
        self._expect(msg_type, MsgType.EXEC_RESULT)
        return wire.decode_exec_result(payload)

    def unload(self, fn_id: int) -> None:
        msg_type, payload = self._request(MsgType.UNLOAD_FN, wire.encode_ack(fn_id))
        self._expect(msg_type, MsgType.LOAD_ACK)

    def clear(self) -> int:
        msg_type, payload = self._request(MsgType.CLEAR_FNS, b"")
        self._expect(msg_type, MsgType.CLEAR_FNS)
        return wire.decode_count(payload)

    def list_functions(self) -> AddressMap:
        msg_type, payload = self._request(MsgType.LIST_FNS, b"")
        self._expect(msg_type, MsgType.ADDR_MAP)
        self.address_map = parse_map_json(payload)
        return self.address_map

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    # -- internals ---------------------------------------------------------

    def _request(self, msg_type: MsgType, payload: bytes) -> tuple[MsgType, bytes]:
        if self.keys is None:
            raise ProtocolViolation("session is not attested")
        frame = seal(self.keys, self._send_seq, msg_type, payload)
        self._send_seq += 1
        write_frame(self._sock, frame)
        return self._recv()

    def _recv(self) -> tuple[MsgType, bytes]:
        frame = read_frame(self._sock)
        msg_type, payload = open_frame(self.keys, self._recv_seq, frame)
        self._recv_seq += 1
        if msg_type == MsgType.ERROR:
            code, message = wire.decode_error(payload)
            raise RemoteError(code, message)
        return msg_type, payload

    def _recv_map(self) -> AddressMap:
        msg_type, payload = self._recv()
        self._expect(msg_type, MsgType.ADDR_MAP)
        return parse_map_json(payload)

    @staticmethod
    def _expect(actual: MsgType, expected: MsgType) -> None:
        if actual != expected:
            raise ProtocolViolation(f"expected {expected.name}, got {actual.name}")
