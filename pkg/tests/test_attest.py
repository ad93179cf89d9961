import os

import pytest

from dynfn.attest import (
    AttestationReport,
    EnclaveAttester,
    client_finish,
    client_hello,
    client_verify_report,
    compute_measurement,
    derive_session_keys,
)
from dynfn.enclave import EnclaveConfig
from dynfn.errors import (
    AttestationError,
    BadSignature,
    DegenerateSecret,
    InvalidPublicKey,
    MalformedFrame,
    MeasurementMismatch,
    NonceMismatch,
)

CONFIG = EnclaveConfig(arena_capacity=4096, scratch_capacity=4096)


def honest_exchange(attester=None):
    attester = attester or EnclaveAttester(CONFIG)
    nonce, kx_private, kx_public = client_hello()
    report, server_keys = attester.ra_init(nonce, kx_public)
    return attester, nonce, kx_private, report, server_keys


class TestMeasurement:
    def test_deterministic(self):
        assert compute_measurement(CONFIG) == compute_measurement(CONFIG)
        assert len(compute_measurement(CONFIG)) == 32

    def test_differs_per_input(self):
        other_image = EnclaveConfig(
            arena_capacity=4096, scratch_capacity=4096, core_image_id=b"other"
        )
        other_capacity = EnclaveConfig(arena_capacity=8192, scratch_capacity=4096)
        base = compute_measurement(CONFIG)
        assert compute_measurement(other_image) != base
        assert compute_measurement(other_capacity) != base


class TestRaInit:
    def test_honest_report_verifies(self):
        attester, nonce, kx_private, report, server_keys = honest_exchange()
        client_verify_report(
            report, attester.verify_key_bytes, attester.measurement, nonce
        )
        client_keys = client_finish(report, kx_private)
        assert client_keys.send_key == server_keys.recv_key
        assert client_keys.recv_key == server_keys.send_key
        assert client_keys.send_key != client_keys.recv_key

    def test_malformed_public_key(self):
        attester = EnclaveAttester(CONFIG)
        with pytest.raises(InvalidPublicKey):
            attester.ra_init(os.urandom(16), b"short")

    def test_bad_nonce_length(self):
        attester = EnclaveAttester(CONFIG)
        with pytest.raises(InvalidPublicKey):
            attester.ra_init(b"short", os.urandom(32))

    def test_sessions_use_fresh_ephemeral_keys(self):
        attester = EnclaveAttester(CONFIG)
        publics = set()
        for _ in range(20):
            nonce, _, kx_public = client_hello()
            report, _ = attester.ra_init(nonce, kx_public)
            publics.add(report.enclave_kx_public)
        assert len(publics) == 20


class TestVerifyReport:
    def test_flipped_signature_byte(self):
        attester, nonce, _, report, _ = honest_exchange()
        bad = AttestationReport(
            report.measurement,
            report.enclave_kx_public,
            report.client_nonce,
            bytes([report.signature[0] ^ 0x01]) + report.signature[1:],
        )
        with pytest.raises(BadSignature):
            client_verify_report(bad, attester.verify_key_bytes, attester.measurement, nonce)

    def test_wrong_nonce_is_distinct_error(self):
        # signature is valid, but the echoed nonce is not the one we sent
        attester, nonce, _, report, _ = honest_exchange()
        with pytest.raises(NonceMismatch):
            client_verify_report(
                report, attester.verify_key_bytes, attester.measurement, os.urandom(16)
            )

    def test_wrong_measurement_is_distinct_error(self):
        # a different core image yields a valid report with the wrong digest
        other = EnclaveAttester(
            EnclaveConfig(arena_capacity=4096, scratch_capacity=4096,
                          core_image_id=b"imposter"),
            signing_key=None,
        )
        expected = compute_measurement(CONFIG)
        nonce, _, kx_public = client_hello()
        report, _ = other.ra_init(nonce, kx_public)
        with pytest.raises(MeasurementMismatch):
            client_verify_report(report, other.verify_key_bytes, expected, nonce)

    def test_randomized_mutations_never_accepted(self):
        attester, nonce, _, report, _ = honest_exchange()
        encoded = bytearray(report.encode())
        rng_positions = [
            (os.urandom(1)[0] * len(encoded)) // 256 for _ in range(100)
        ]
        for pos in rng_positions:
            mutated = bytearray(encoded)
            mutated[pos] ^= 1 << (os.urandom(1)[0] % 8)
            try:
                tampered = AttestationReport.decode(bytes(mutated))
            except MalformedFrame:
                continue  # structurally rejected counts as detected
            with pytest.raises(AttestationError):
                client_verify_report(
                    tampered, attester.verify_key_bytes, attester.measurement, nonce
                )


class TestKeyDerivation:
    def test_roles_mirror(self):
        shared, cpub, epub = os.urandom(32), os.urandom(32), os.urandom(32)
        client = derive_session_keys(shared, cpub, epub, "client")
        server = derive_session_keys(shared, cpub, epub, "server")
        assert client.send_key == server.recv_key
        assert client.recv_key == server.send_key

    def test_transcript_changes_keys(self):
        shared, cpub, epub = os.urandom(32), os.urandom(32), os.urandom(32)
        base = derive_session_keys(shared, cpub, epub, "client")
        assert derive_session_keys(shared, os.urandom(32), epub, "client") != base
        assert derive_session_keys(os.urandom(32), cpub, epub, "client") != base

    def test_golden_vector(self):
        # frozen output of the chosen KDF for fixed inputs
        keys = derive_session_keys(
            bytes(range(32)), bytes(range(32, 64)), bytes(range(64, 96)), "client"
        )
        assert keys.send_key.hex() == (
            "380014d1e9551c2bb13e98a51d98e693caae7b6a6b86e737b93e9daeba02451f"
        )
        assert keys.recv_key.hex() == (
            "d743af959a8c6730f8a7bf08e8abe3d9f315add94743bb45ceef17b9e7ca59ab"
        )

    def test_degenerate_secret_rejected(self):
        with pytest.raises(DegenerateSecret):
            derive_session_keys(b"\x00" * 32, b"a" * 32, b"b" * 32, "client")
        with pytest.raises(DegenerateSecret):
            derive_session_keys(b"", b"a" * 32, b"b" * 32, "client")


class TestReportCodec:
    def test_roundtrip(self):
        report = AttestationReport(os.urandom(32), os.urandom(32), os.urandom(16),
                                   os.urandom(64))
        assert AttestationReport.decode(report.encode()) == report

    def test_truncated(self):
        report = AttestationReport(os.urandom(32), os.urandom(32), os.urandom(16),
                                   os.urandom(64))
        with pytest.raises(MalformedFrame):
            AttestationReport.decode(report.encode()[:-1])

    def test_trailing_garbage(self):
        report = AttestationReport(os.urandom(32), os.urandom(32), os.urandom(16),
                                   os.urandom(64))
        with pytest.raises(MalformedFrame):
            AttestationReport.decode(report.encode() + b"x")
