"""The simulated enclave: executable arena plus function registry.

Implements the six trusted operations: attestation init lives in
:mod:`dynfn.attest`; this module provides create, register, get_fas,
execute, unregister, and clear. There is no fault isolation — a crashing
payload crashes the process, mirroring a trust model where payload
authors are the enclave's users.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import platform
import threading
import time
from dataclasses import dataclass, field

from .arena import ExecArena, Scratch
from .descriptor import SignatureDescriptor
from .errors import (
    ArityMismatch,
    BadDescriptor,
    DuplicateName,
    PlatformUnsupported,
    UnknownFunction,
)

DEFAULT_ARENA_CAPACITY = 128 * 1024 * 1024
DEFAULT_SCRATCH_CAPACITY = 1024 * 1024

_SUPPORTED_MACHINES = {"x86_64", "amd64"}


@dataclass(frozen=True)
class RuntimeEntry:
    """A trusted helper function exported to payloads via the address map."""

    name: str
    return_type: str
    address: int


@dataclass(frozen=True)
class EnclaveConfig:
    arena_capacity: int = DEFAULT_ARENA_CAPACITY
    scratch_capacity: int = DEFAULT_SCRATCH_CAPACITY
    core_image_id: bytes = b"dynfn-core-v1"
    runtime_table: tuple[RuntimeEntry, ...] = ()

    def __post_init__(self):
        if self.arena_capacity <= 0:
            raise ValueError("arena_capacity must be positive")
        if self.scratch_capacity <= 0:
            raise ValueError("scratch_capacity must be positive")
        names = [e.name for e in self.runtime_table]
        if len(names) != len(set(names)):
            raise ValueError("runtime_table names must be unique")


@dataclass
class FunctionRecord:
    id: int
    name: str
    descriptor: SignatureDescriptor
    bytes: bytes
    entry: int
    size: int
    loaded_at: int = field(default_factory=time.monotonic_ns)


@dataclass(frozen=True)
class ExecResult:
    return_word: int | None
    wall_time_ns: int


#: (name, return type) pairs resolved against the process libc.
_DEFAULT_RUNTIME_SYMBOLS = (
    ("strcmp", "int"),
    ("strncmp", "int"),
    ("strlen", "unsigned long"),
    ("memcpy", "void *"),
    ("memset", "void *"),
    ("malloc", "void *"),
    ("free", "void"),
    ("snprintf", "int"),
    ("vsnprintf", "int"),
)


def default_runtime_table() -> tuple[RuntimeEntry, ...]:
    """Resolve the trusted helper set against the process C library.

    These stand in for the statically trusted libc of a real enclave; the
    addresses are real in-process entry points, so loaded code rewritten
    against the address map can call them directly.
    """
    libc = ctypes.CDLL(None)
    entries = []
    for name, ret in _DEFAULT_RUNTIME_SYMBOLS:
        try:
            fn = getattr(libc, name)
        except AttributeError:
            continue
        address = ctypes.cast(fn, ctypes.c_void_p).value
        entries.append(RuntimeEntry(name=name, return_type=ret, address=address))
    return tuple(entries)


# Dispatch always passes four words; the first four integer arguments ride
# in registers, so shorter callees ignore the padding.
_PROTO_RET = ctypes.CFUNCTYPE(
    ctypes.c_int64, ctypes.c_uint64, ctypes.c_uint64, ctypes.c_uint64, ctypes.c_uint64
)
_PROTO_VOID = ctypes.CFUNCTYPE(
    None, ctypes.c_uint64, ctypes.c_uint64, ctypes.c_uint64, ctypes.c_uint64
)


class Enclave:
    """Registry + arena state unit.

    Mutations (register/unregister/clear) and native calls are serialized
    behind one lock; the handle may be shared across threads.
    """

    def __init__(self, config: EnclaveConfig | None = None):
        self.config = config or EnclaveConfig(runtime_table=default_runtime_table())
        self._arena = ExecArena(self.config.arena_capacity)
        self._scratch = Scratch(self.config.scratch_capacity)
        self._records: dict[int, FunctionRecord] = {}
        self._names: dict[str, int] = {}
        self._next_id = 1
        self._lock = threading.RLock()

    # -- registration ------------------------------------------------------

    def register_function(
        self, code: bytes, name: str, descriptor: SignatureDescriptor | str
    ) -> int:
        if isinstance(descriptor, str):
            descriptor = SignatureDescriptor.parse(descriptor)
        if not code:
            raise BadDescriptor("function bytes must be non-empty")
        if not name:
            raise BadDescriptor("function name must be non-empty")
        with self._lock:
            if name in self._names or any(
                e.name == name for e in self.config.runtime_table
            ):
                raise DuplicateName(f"function {name!r} already registered")
            entry = self._arena.place(code)
            record = FunctionRecord(
                id=self._next_id,
                name=name,
                descriptor=descriptor,
                bytes=code,
                entry=entry,
                size=len(code),
            )
            self._next_id += 1
            self._records[record.id] = record
            self._names[name] = record.id
            return record.id

    def unregister_function(self, fn_id: int) -> None:
        with self._lock:
            record = self._records.pop(fn_id, None)
            if record is None:
                raise UnknownFunction(f"no live function with id {fn_id}")
            del self._names[record.name]
            self._arena.release(record.entry, record.size)

    def clear_functions(self) -> int:
        with self._lock:
            count = len(self._records)
            self._records.clear()
            self._names.clear()
            self._arena.reset()
            return count

    # -- introspection -----------------------------------------------------

    def get_fas(self) -> list[tuple[str, str, int]]:
        """Union of runtime helpers and live user functions.

        User functions are reported with return type ``int`` when the
        descriptor returns a word and ``void`` otherwise.
        """
        with self._lock:
            out = [(e.name, e.return_type, e.address) for e in self.config.runtime_table]
            for record in self._records.values():
                ret = "int" if record.descriptor.returns_word else "void"
                out.append((record.name, ret, record.entry))
            return out

    def lookup(self, fn_id: int) -> FunctionRecord:
        with self._lock:
            record = self._records.get(fn_id)
            if record is None:
                raise UnknownFunction(f"no live function with id {fn_id}")
            return record

    @property
    def cursor(self) -> int:
        return self._arena.cursor

    @property
    def live_ids(self) -> list[int]:
        with self._lock:
            return sorted(self._records)

    def read_back(self, record: FunctionRecord) -> bytes:
        """Bytes currently in the arena for a record (testing/verification)."""
        return self._arena.read(record.entry, record.size)

    # -- execution ---------------------------------------------------------

    def execute_function(self, fn_id: int, args: list) -> ExecResult:
        if platform.machine().lower() not in _SUPPORTED_MACHINES:
            raise PlatformUnsupported(
                f"native dispatch requires x86-64, host is {platform.machine()}"
            )
        with self._lock:
            record = self.lookup(fn_id)
            words = self._marshal(record.descriptor, args)
            if record.descriptor.returns_word:
                fn = _PROTO_RET(record.entry)
            else:
                fn = _PROTO_VOID(record.entry)
            start = time.perf_counter_ns()
            result = fn(*words)
            elapsed = time.perf_counter_ns() - start
        return ExecResult(
            return_word=result if record.descriptor.returns_word else None,
            wall_time_ns=elapsed,
        )

    def _marshal(self, descriptor: SignatureDescriptor, args: list) -> list[int]:
        if len(args) != len(descriptor.args):
            raise ArityMismatch(
                f"descriptor {descriptor} takes {len(descriptor.args)} args, "
                f"got {len(args)}"
            )
        self._scratch.begin_call()
        words: list[int] = []
        for kind, value in zip(descriptor.args, args):
            if kind == "i":
                if not isinstance(value, int):
                    raise ArityMismatch(f"expected int, got {type(value).__name__}")
                words.append(value & 0xFFFFFFFFFFFFFFFF)
            elif kind == "s":
                if isinstance(value, str):
                    value = value.encode()
                if not isinstance(value, (bytes, bytearray)):
                    raise ArityMismatch(f"expected str/bytes, got {type(value).__name__}")
                words.append(self._scratch.stage(bytes(value) + b"\x00"))
            elif kind == "b":
                if not isinstance(value, (bytes, bytearray)):
                    raise ArityMismatch(f"expected bytes, got {type(value).__name__}")
                words.append(self._scratch.stage(bytes(value)) if value else 0)
                words.append(len(value))
        words.extend([0] * (4 - len(words)))
        return words

    def close(self) -> None:
        with self._lock:
            self._records.clear()
            self._names.clear()
            self._arena.close()
            self._scratch.close()
