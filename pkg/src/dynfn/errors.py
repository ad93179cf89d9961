"""Exception hierarchy and stable wire error codes."""

from enum import IntEnum


class DynfnError(Exception):
    """Base class for all errors raised by this package."""


# --- enclave / arena ---

class PlatformUnsupported(DynfnError):
    """Host cannot create or call into an executable memory region."""


class AllocationFailure(DynfnError):
    """Arena or scratch region could not be allocated."""


class OutOfEnclaveMemory(DynfnError):
    """A load would exceed the arena capacity."""


class DuplicateName(DynfnError):
    """A live function with the same name already exists."""


class BadDescriptor(DynfnError):
    """Signature descriptor is not grammar-valid or the payload is invalid."""


class UnknownFunction(DynfnError):
    """No live function with the given identifier."""


class ArityMismatch(DynfnError):
    """Arguments do not match the registered descriptor."""


class ScratchOverflow(DynfnError):
    """String/buffer arguments do not fit the scratch region."""


# --- attestation ---

class AttestationError(DynfnError):
    """Base class for attestation failures."""


class InvalidPublicKey(AttestationError):
    """Peer key-agreement public key is not a valid curve point."""


class BadSignature(AttestationError):
    """Report signature does not verify under the pinned key."""


class NonceMismatch(AttestationError):
    """Echoed nonce differs from the one the client sent (replay)."""


class MeasurementMismatch(AttestationError):
    """Reported measurement differs from the expected one (wrong code)."""


class DegenerateSecret(AttestationError):
    """Key agreement produced a degenerate shared secret."""


# --- secure channel ---

class ChannelError(DynfnError):
    """Base class for framing/encryption failures."""


class AuthFailure(ChannelError):
    """Ciphertext tag did not verify."""


class ReplayOrReorder(ChannelError):
    """Frame sequence number is not the expected next value."""


class MalformedFrame(ChannelError):
    """Frame bytes do not decode structurally."""


class UnknownType(ChannelError):
    """Message type byte outside the defined set."""


class SequenceExhausted(ChannelError):
    """Per-direction sequence counter wrapped."""


# --- object parsing / extraction ---

class ObjectError(DynfnError):
    """Base class for object-file parsing failures."""


class NotAnObject(ObjectError):
    """Input bytes are not an object file in the supported format."""


class TruncatedObject(ObjectError):
    """Valid header but the body is cut short."""


class UnsupportedClass(ObjectError):
    """Object is not 64-bit or not the supported machine."""


class SymbolNotFound(ObjectError):
    """Requested symbol is absent from the symbol tables."""


class NotAFunction(ObjectError):
    """Symbol exists but is not of function type."""


class ZeroSize(ObjectError):
    """Function symbol has zero recorded size."""


class BadHexstring(ObjectError):
    """String is not a sequence of lowercase \\xNN tokens."""


# --- linking / rewriting ---

class MalformedMap(DynfnError):
    """Address-map JSON is not an object of strings."""


class BadCastString(DynfnError):
    """Map value does not follow the cast-string format."""


class UnbalancedSource(DynfnError):
    """C tokenizer could not terminate a string, char literal, or comment."""


class ExternalSymbolUnresolved(DynfnError):
    """Payload still references external symbols after rewriting."""

    def __init__(self, names):
        self.names = list(names)
        super().__init__(f"unresolved external symbols: {', '.join(self.names)}")


# --- service / client ---

class BindFailure(DynfnError):
    """Server could not bind the requested address."""


class TransportError(DynfnError):
    """Stream transport failed (connect, send, or receive)."""


class ProtocolViolation(DynfnError):
    """Peer sent a message the session state machine does not accept."""


class RemoteError(DynfnError):
    """Server reported an error frame."""

    def __init__(self, code, message):
        self.code = ErrorCode(code) if code in ErrorCode._value2member_map_ else code
        self.message = message
        super().__init__(f"remote error {self.code}: {message}")


class ErrorCode(IntEnum):
    """Stable numeric codes carried in ERROR frames."""

    OUT_OF_ENCLAVE_MEMORY = 1
    DUPLICATE_NAME = 2
    BAD_DESCRIPTOR = 3
    UNKNOWN_FUNCTION = 4
    ARITY_MISMATCH = 5
    SCRATCH_OVERFLOW = 6
    PLATFORM_UNSUPPORTED = 7
    PROTOCOL_VIOLATION = 8
    INTERNAL = 9


#: Enclave exception class -> wire code, used when bridging errors to frames.
ERROR_CODE_OF = {
    OutOfEnclaveMemory: ErrorCode.OUT_OF_ENCLAVE_MEMORY,
    DuplicateName: ErrorCode.DUPLICATE_NAME,
    BadDescriptor: ErrorCode.BAD_DESCRIPTOR,
    UnknownFunction: ErrorCode.UNKNOWN_FUNCTION,
    ArityMismatch: ErrorCode.ARITY_MISMATCH,
    ScratchOverflow: ErrorCode.SCRATCH_OVERFLOW,
    PlatformUnsupported: ErrorCode.PLATFORM_UNSUPPORTED,
}

#: Wire code -> exception class, used by the client to re-raise.
EXCEPTION_OF_CODE = {code: exc for exc, code in ERROR_CODE_OF.items()}
