"""The server process: session state machine over the stream transport.

One enclave instance is shared across all sessions; each connection is an
independent session that must attest before anything else. Recoverable
enclave errors come back as ERROR frames and the session survives;
protocol violations (bad framing, wrong phase, broken sequence) close it.
"""

from __future__ import annotations

import logging
import socketserver
import threading

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from . import wire
from .addrmap import build_address_map, render_map_json
from .attest import EnclaveAttester
from .channel import MsgType, open_frame, seal
from .enclave import Enclave, EnclaveConfig
from .errors import (
    ERROR_CODE_OF,
    BindFailure,
    ChannelError,
    DynfnError,
    ErrorCode,
    MalformedFrame,
    ProtocolViolation,
    TransportError,
)
from .transport import read_frame, write_frame

log = logging.getLogger(__name__)

_REQUEST_TYPES = {
    MsgType.LOAD_FN,
    MsgType.EXEC_FN,
    MsgType.UNLOAD_FN,
    MsgType.CLEAR_FNS,
    MsgType.LIST_FNS,
}


class _Session:
    """Per-connection state: phase, keys, directional sequence counters."""

    def __init__(self, sock, enclave: Enclave, attester: EnclaveAttester):
        self.sock = sock
        self.enclave = enclave
        self.attester = attester
        self.keys = None
        self.recv_seq = 0
        self.send_seq = 0

    def _send(self, msg_type: MsgType, payload: bytes) -> None:
        frame = seal(self.keys, self.send_seq, msg_type, payload)
        self.send_seq += 1
        write_frame(self.sock, frame)

    def _send_map(self) -> None:
        self._send(MsgType.ADDR_MAP, render_map_json(build_address_map(self.enclave)))

    def _send_error(self, code: ErrorCode, message: str) -> None:
        self._send(MsgType.ERROR, wire.encode_error(code, message))

    def run(self) -> None:
        self._await_hello()
        while True:
            frame = read_frame(self.sock)
            msg_type, payload = open_frame(self.keys, self.recv_seq, frame)
            self.recv_seq += 1
            if msg_type not in _REQUEST_TYPES:
                raise ProtocolViolation(f"unexpected {msg_type.name} while serving")
            self._handle(msg_type, payload)

    def _await_hello(self) -> None:
        frame = read_frame(self.sock)
        if frame.msg_type != MsgType.HELLO or frame.seq != 0:
            # unattested peers get a plaintext error before the close
            err = seal_plain_error("attestation required")
            write_frame(self.sock, err)
            raise ProtocolViolation(f"{frame.msg_type.name} before attestation")
        self.recv_seq = 1
        nonce, client_kx_public = wire.decode_hello(frame.payload)
        report, self.keys = self.attester.ra_init(nonce, client_kx_public)
        write_frame(
            self.sock, seal(self.keys, self.send_seq, MsgType.RA_REPORT, report.encode())
        )
        self.send_seq += 1
        self._send_map()

    def _handle(self, msg_type: MsgType, payload: bytes) -> None:
        try:
            if msg_type == MsgType.LOAD_FN:
                name, descriptor, code = wire.decode_load(payload)
                fn_id = self.enclave.register_function(code, name, descriptor)
                self._send(MsgType.LOAD_ACK, wire.encode_ack(fn_id))
                self._send_map()
            elif msg_type == MsgType.EXEC_FN:
                fn_id, args = wire.decode_exec(payload)
                result = self.enclave.execute_function(fn_id, args)
                self._send(
                    MsgType.EXEC_RESULT,
                    wire.encode_exec_result(result.return_word, result.wall_time_ns),
                )
            elif msg_type == MsgType.UNLOAD_FN:
                fn_id = wire.decode_ack(payload)
                self.enclave.unregister_function(fn_id)
                self._send(MsgType.LOAD_ACK, wire.encode_ack(fn_id))
            elif msg_type == MsgType.CLEAR_FNS:
                count = self.enclave.clear_functions()
                self._send(MsgType.CLEAR_FNS, wire.encode_count(count))
            elif msg_type == MsgType.LIST_FNS:
                self._send_map()
        except DynfnError as exc:
            code = ERROR_CODE_OF.get(type(exc))
            if code is None:
                raise
            self._send_error(code, str(exc))


def seal_plain_error(message: str):
    """A plaintext-encodable ERROR for peers with no session keys yet.

    ERROR is normally encrypted; before attestation there are no keys, so
    the payload rides unprotected. The client treats any pre-report ERROR
    as fatal anyway.
    """
    from .channel import Frame

    return Frame(
        msg_type=MsgType.ERROR,
        seq=0,
        payload=wire.encode_error(ErrorCode.PROTOCOL_VIOLATION, message),
    )


class DynfnServer:
    """Threaded TCP server wrapping one shared enclave."""

    def __init__(
        self,
        bind_address: tuple[str, int],
        config: EnclaveConfig | None = None,
        signing_key: Ed25519PrivateKey | None = None,
    ):
        self.enclave = Enclave(config)
        self.attester = EnclaveAttester(self.enclave.config, signing_key)
        enclave, attester = self.enclave, self.attester

        class _Handler(socketserver.BaseRequestHandler):
            def handle(self):
                session = _Session(self.request, enclave, attester)
                try:
                    session.run()
                except (TransportError, ChannelError, ProtocolViolation,
                        MalformedFrame) as exc:
                    log.debug("session %s closed: %s", self.client_address, exc)

        class _TCPServer(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        try:
            self._server = _TCPServer(bind_address, _Handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {bind_address}: {exc}") from exc

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address

    @property
    def measurement(self) -> bytes:
        return self.attester.measurement

    @property
    def verify_key_bytes(self) -> bytes:
        return self.attester.verify_key_bytes

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self.enclave.close()
