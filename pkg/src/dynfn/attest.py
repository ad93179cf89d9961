"""Simulated remote attestation.

The enclave proves its identity with a signed measurement report and the
two sides agree on session keys through an ephemeral X25519 exchange.
Ed25519 replaces the hardware vendor's attestation service as the trust
anchor: the verification key is pinned client-side, distributed out of
band. X25519 provides ~128-bit security; the choice is recorded in
docs/PROTOCOL.md.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .enclave import EnclaveConfig
from .errors import (
    BadSignature,
    DegenerateSecret,
    InvalidPublicKey,
    MalformedFrame,
    MeasurementMismatch,
    NonceMismatch,
)

PROTOCOL_VERSION = 1
NONCE_LEN = 16
KX_PUBLIC_LEN = 32
SIGNATURE_LEN = 64
MEASUREMENT_LEN = 32

_LABEL_C2S = b"dynfn-c2s"
_LABEL_S2C = b"dynfn-s2c"


def compute_measurement(config: EnclaveConfig) -> bytes:
    """Digest identifying the enclave image: core id, protocol version,
    arena capacity. Loaded functions arrive after attestation and are
    deliberately not covered."""
    h = hashlib.sha256()
    h.update(struct.pack(">I", len(config.core_image_id)))
    h.update(config.core_image_id)
    h.update(struct.pack(">I", PROTOCOL_VERSION))
    h.update(struct.pack(">Q", config.arena_capacity))
    return h.digest()


@dataclass(frozen=True)
class SessionKeys:
    """Directional channel keys plus the AEAD nonce labels for each side."""

    send_key: bytes
    recv_key: bytes
    send_label: bytes
    recv_label: bytes


@dataclass(frozen=True)
class AttestationReport:
    measurement: bytes
    enclave_kx_public: bytes
    client_nonce: bytes
    signature: bytes

    def signed_portion(self) -> bytes:
        return self.measurement + self.enclave_kx_public + self.client_nonce

    def encode(self) -> bytes:
        out = bytearray()
        for part in (
            self.measurement,
            self.enclave_kx_public,
            self.client_nonce,
            self.signature,
        ):
            out += struct.pack(">I", len(part)) + part
        return bytes(out)

    @classmethod
    def decode(cls, data: bytes) -> "AttestationReport":
        parts = []
        pos = 0
        for _ in range(4):
            if pos + 4 > len(data):
                raise MalformedFrame("truncated attestation report")
            (n,) = struct.unpack_from(">I", data, pos)
            pos += 4
            if pos + n > len(data):
                raise MalformedFrame("truncated attestation report")
            parts.append(data[pos : pos + n])
            pos += n
        if pos != len(data):
            raise MalformedFrame("trailing bytes after attestation report")
        return cls(*parts)


def derive_session_keys(
    shared_secret: bytes,
    client_kx_public: bytes,
    enclave_kx_public: bytes,
    role: str,
) -> SessionKeys:
    """Derive mirrored directional keys from the exchange transcript.

    ``role`` is ``"client"`` or ``"server"`` and swaps the direction
    labels so that one side's send key is the other's receive key.
    """
    if not shared_secret or shared_secret == b"\x00" * len(shared_secret):
        raise DegenerateSecret("all-zero or empty shared secret")
    transcript = client_kx_public + enclave_kx_public

    def kdf(label: bytes) -> bytes:
        return HKDF(
            algorithm=hashes.SHA256(),
            length=32,
            salt=None,
            info=label + transcript,
        ).derive(shared_secret)

    c2s, s2c = kdf(_LABEL_C2S), kdf(_LABEL_S2C)
    if role == "client":
        return SessionKeys(c2s, s2c, _LABEL_C2S, _LABEL_S2C)
    if role == "server":
        return SessionKeys(s2c, c2s, _LABEL_S2C, _LABEL_C2S)
    raise ValueError(f"role must be 'client' or 'server', got {role!r}")


class EnclaveAttester:
    """Server-side attestation state: long-term signing key + measurement."""

    def __init__(self, config: EnclaveConfig, signing_key: Ed25519PrivateKey | None = None):
        self.signing_key = signing_key or Ed25519PrivateKey.generate()
        self.measurement = compute_measurement(config)

    @property
    def verify_key_bytes(self) -> bytes:
        return self.signing_key.public_key().public_bytes_raw()

    def ra_init(
        self, client_nonce: bytes, client_kx_public: bytes
    ) -> tuple[AttestationReport, SessionKeys]:
        """Answer a client HELLO: fresh ephemeral key pair per session."""
        if len(client_nonce) != NONCE_LEN:
            raise InvalidPublicKey(f"nonce must be {NONCE_LEN} bytes")
        try:
            peer = X25519PublicKey.from_public_bytes(client_kx_public)
        except (ValueError, TypeError) as exc:
            raise InvalidPublicKey(str(exc)) from exc
        ephemeral = X25519PrivateKey.generate()
        enclave_kx_public = ephemeral.public_key().public_bytes_raw()
        try:
            shared = ephemeral.exchange(peer)
        except ValueError as exc:
            raise InvalidPublicKey(str(exc)) from exc
        signature = self.signing_key.sign(
            self.measurement + enclave_kx_public + client_nonce
        )
        report = AttestationReport(
            measurement=self.measurement,
            enclave_kx_public=enclave_kx_public,
            client_nonce=client_nonce,
            signature=signature,
        )
        keys = derive_session_keys(shared, client_kx_public, enclave_kx_public, "server")
        return report, keys


def client_hello() -> tuple[bytes, X25519PrivateKey, bytes]:
    """Generate the client side of the exchange: nonce + ephemeral key."""
    nonce = os.urandom(NONCE_LEN)
    key = X25519PrivateKey.generate()
    return nonce, key, key.public_key().public_bytes_raw()


def client_verify_report(
    report: AttestationReport,
    pinned_verify_key: bytes,
    expected_measurement: bytes,
    sent_nonce: bytes,
) -> None:
    """Check signature, then nonce, then measurement.

    The three failure classes are distinct on purpose: tampering trips the
    signature, replay trips the nonce, wrong enclave code trips the
    measurement.
    """
    verify_key = Ed25519PublicKey.from_public_bytes(pinned_verify_key)
    try:
        verify_key.verify(report.signature, report.signed_portion())
    except InvalidSignature as exc:
        raise BadSignature("report signature does not verify") from exc
    if report.client_nonce != sent_nonce:
        raise NonceMismatch("echoed nonce differs from the one sent")
    if report.measurement != expected_measurement:
        raise MeasurementMismatch(
            f"expected {expected_measurement.hex()}, got {report.measurement.hex()}"
        )


def client_finish(
    report: AttestationReport, client_key: X25519PrivateKey
) -> SessionKeys:
    """Complete the exchange after a verified report."""
    try:
        peer = X25519PublicKey.from_public_bytes(report.enclave_kx_public)
        shared = client_key.exchange(peer)
    except ValueError as exc:
        raise InvalidPublicKey(str(exc)) from exc
    return derive_session_keys(
        shared,
        client_key.public_key().public_bytes_raw(),
        report.enclave_kx_public,
        "client",
    )
